//! Deterministic quadrature rules used as population supports.

use nalgebra::{DMatrix, SymmetricEigen};

/// Trapezoid nodes and weights on `[0, 1]`.
pub fn trapezoid(points: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 1.0 / (points - 1) as f64;
    let xs = (0..points).map(|i| i as f64 * h).collect();
    let ws = (0..points).map(|i| if i == 0 || i == points - 1 { 0.5 * h } else { h }).collect();
    (xs, ws)
}

/// Gauss-Hermite rule for the standard normal law (Golub-Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let j = DMatrix::from_fn(n, n, |a, b| if a + 1 == b || b + 1 == a { (a.max(b) as f64).sqrt() } else { 0.0 });
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2))).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Midpoints of a `cells x cells` grid over `[lo, hi]^2`.
pub fn square_midpoints(lo: f64, hi: f64, cells: usize) -> Vec<Vec<f64>> {
    let h = (hi - lo) / cells as f64;
    let mut pts = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        for j in 0..cells {
            pts.push(vec![lo + (i as f64 + 0.5) * h, lo + (j as f64 + 0.5) * h]);
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_moments() {
        let (x, w) = gauss_hermite(12);
        let m = |k: i32| x.iter().zip(&w).map(|(a, b)| b * a.powi(k)).sum::<f64>();
        assert!((m(0) - 1.0).abs() < 1e-12);
        assert!(m(1).abs() < 1e-12);
        assert!((m(2) - 1.0).abs() < 1e-11);
        assert!((m(4) - 3.0).abs() < 1e-10);
    }
}
