//! Samples, per-task datasets and solver tolerances.

use serde::{Deserialize, Serialize};

use crate::error::{MolError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }
}

/// Labeled and unlabeled draws for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub task_id: usize,
    pub labeled: Vec<Sample>,
    pub unlabeled: Vec<Vec<f64>>,
}

impl TaskData {
    pub fn new(task_id: usize, labeled: Vec<Sample>, unlabeled: Vec<Vec<f64>>) -> Result<Self> {
        if labeled.is_empty() {
            return Err(MolError::Data(format!("task {task_id} has no labeled samples")));
        }
        let d = labeled[0].x.len();
        let q = labeled[0].y.len();
        if labeled.iter().any(|s| s.x.len() != d || s.y.len() != q) {
            return Err(MolError::Shape(format!("task {task_id}: ragged labeled samples")));
        }
        if unlabeled.iter().any(|x| x.len() != d) {
            return Err(MolError::Shape(format!("task {task_id}: unlabeled covariate dimension differs from {d}")));
        }
        let finite =
            labeled.iter().all(|s| s.x.iter().chain(&s.y).all(|v| v.is_finite())) && unlabeled.iter().all(|x| x.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(MolError::Data(format!("task {task_id}: non-finite value")));
        }
        Ok(Self { task_id, labeled, unlabeled })
    }

    pub fn input_dim(&self) -> usize {
        self.labeled[0].x.len()
    }

    pub fn label_dim(&self) -> usize {
        self.labeled[0].y.len()
    }

    pub fn labeled_x(&self) -> Vec<Vec<f64>> {
        self.labeled.iter().map(|s| s.x.clone()).collect()
    }

    pub fn labels_flat(&self) -> Vec<f64> {
        self.labeled.iter().flat_map(|s| s.y.iter().copied()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiTaskData {
    pub tasks: Vec<TaskData>,
}

impl MultiTaskData {
    pub fn new(tasks: Vec<TaskData>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(MolError::Data("no tasks".into()));
        }
        let d = tasks[0].input_dim();
        if tasks.iter().any(|t| t.input_dim() != d) {
            return Err(MolError::Shape("tasks have different covariate dimensions".into()));
        }
        Ok(Self { tasks })
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub opt_rel_tol: f64,
    pub max_iters: usize,
    pub constraint_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { opt_rel_tol: 1e-8, max_iters: 50_000, constraint_tol: 1e-9 }
    }
}

impl Tolerances {
    pub fn scaled_budget(&self, factor: usize) -> Self {
        Self { max_iters: self.max_iters.saturating_mul(factor), ..*self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_and_empty() {
        assert!(TaskData::new(0, vec![], vec![]).is_err());
        let s = vec![Sample::new(vec![0.0], vec![1.0]), Sample::new(vec![0.0, 1.0], vec![1.0])];
        assert!(matches!(TaskData::new(0, s, vec![]), Err(MolError::Shape(_))));
        let ok = TaskData::new(0, vec![Sample::new(vec![0.5], vec![1.0])], vec![vec![0.1]]).unwrap();
        assert!(matches!(TaskData::new(0, ok.labeled.clone(), vec![vec![0.1, 0.2]]), Err(MolError::Shape(_))));
        assert!(MultiTaskData::new(vec![]).is_err());
    }
}
