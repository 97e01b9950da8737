use moltk::hypclass::{project_bounded_steps, project_l1_ball, project_l2_ball};
use proptest::prelude::*;

// Cyclic Dykstra over the box and each pairwise step constraint.
fn dykstra(z: &[f64], c: f64, lo: f64, hi: f64) -> Vec<f64> {
    let m = z.len();
    let sets = m; // m - 1 step constraints plus the box
    let mut x = z.to_vec();
    let mut inc = vec![vec![0.0; m]; sets];
    for _ in 0..20_000 {
        let before = x.clone();
        let inc_before = inc.clone();
        for s in 0..sets {
            let y: Vec<f64> = x.iter().zip(&inc[s]).map(|(a, b)| a + b).collect();
            let mut p = y.clone();
            if s == m - 1 {
                p.iter_mut().for_each(|v| *v = v.clamp(lo, hi));
            } else {
                let d = p[s + 1] - p[s];
                if d.abs() > c {
                    let excess = 0.5 * (d.abs() - c) * d.signum();
                    p[s] += excess;
                    p[s + 1] -= excess;
                }
            }
            inc[s] = y.iter().zip(&p).map(|(a, b)| a - b).collect();
            x = p;
        }
        // x can sit still for a sweep while the corrections are still moving
        let settled = inc.iter().flatten().zip(inc_before.iter().flatten()).all(|(a, b)| (a - b).abs() < 1e-13);
        if settled && x.iter().zip(&before).all(|(a, b)| (a - b).abs() < 1e-13) {
            break;
        }
    }
    x
}

fn feasible(x: &[f64], c: f64, lo: f64, hi: f64, tol: f64) -> bool {
    x.iter().all(|v| *v >= lo - tol && *v <= hi + tol) && x.windows(2).all(|w| (w[1] - w[0]).abs() <= c + tol)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn step_projection_matches_dykstra(z in prop::collection::vec(-0.5f64..1.5, 2..9), c in 0.0f64..0.4) {
        let p = project_bounded_steps(&z, c, 0.0, 1.0);
        prop_assert!(feasible(&p, c, 0.0, 1.0, 1e-12));
        let q = dykstra(&z, c, 0.0, 1.0);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-7, "dp {:?} dykstra {:?}", p, q);
        }
    }

    // <z - p, x - p> <= 0 for every feasible x
    #[test]
    fn step_projection_variational_inequality(
        z in prop::collection::vec(-1.0f64..2.0, 3..40),
        c in 0.0f64..0.2,
        seeds in prop::collection::vec(0.0f64..1.0, 40),
    ) {
        let p = project_bounded_steps(&z, c, 0.0, 1.0);
        prop_assert!(feasible(&p, c, 0.0, 1.0, 1e-12));
        // feasible comparison point: a clipped walk with bounded steps
        let mut x = vec![seeds[0]];
        for i in 1..z.len() {
            let step = (2.0 * seeds[i % seeds.len()] - 1.0) * c;
            x.push((x[i - 1] + step).clamp(0.0, 1.0));
        }
        let ip: f64 = z.iter().zip(&p).zip(&x).map(|((z, p), x)| (z - p) * (x - p)).sum();
        prop_assert!(ip <= 1e-10);
    }

    #[test]
    fn l2_projection_is_radial(v in prop::collection::vec(-5.0f64..5.0, 1..8), r in 0.1f64..3.0) {
        let p = project_l2_ball(&v, r);
        let n: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n <= r {
            prop_assert_eq!(p, v);
        } else {
            for (a, b) in p.iter().zip(&v) {
                prop_assert!((a - b * r / n).abs() < 1e-12);
            }
        }
    }

    // Soft threshold at the tau solving sum (|v| - tau)_+ = r, found by bisection.
    #[test]
    fn l1_projection_matches_bisection(v in prop::collection::vec(-5.0f64..5.0, 1..10), r in 0.1f64..3.0) {
        let p = project_l1_ball(&v, r);
        let l1: f64 = v.iter().map(|x| x.abs()).sum();
        if l1 <= r {
            prop_assert_eq!(p, v);
        } else {
            let mass = |t: f64| v.iter().map(|x| (x.abs() - t).max(0.0)).sum::<f64>();
            let (mut a, mut b) = (0.0, v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if mass(m) > r { a = m } else { b = m }
            }
            let t = 0.5 * (a + b);
            for (pi, vi) in p.iter().zip(&v) {
                let want = vi.signum() * (vi.abs() - t).max(0.0);
                prop_assert!((pi - want).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn zero_slope_projects_to_clamped_mean() {
    let p = project_bounded_steps(&[0.2, 0.6, 1.6], 0.0, 0.0, 1.0);
    for v in p {
        assert!((v - 0.8).abs() < 1e-12);
    }
}

#[test]
fn step_projection_two_points_one_clamped() {
    let p = project_bounded_steps(&[0.07674169464495081, -0.49362114083090414], 0.1430225516966598, 0.0, 1.0);
    assert_eq!(p, vec![0.07674169464495081, 0.0]);
    assert_eq!(dykstra(&[0.07674169464495081, -0.49362114083090414], 0.1430225516966598, 0.0, 1.0), p);
}
