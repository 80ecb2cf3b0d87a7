//! Dense tableau simplex for `max cᵀx  s.t.  A x ≤ b, x ≥ 0` with `b ≥ 0`.
//!
//! The origin is feasible for this form, so no phase one is needed. Pivoting
//! uses the largest reduced cost and falls back to Bland's rule after a run of
//! degenerate pivots.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;
const DEGENERATE_RUN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals, one per constraint, all nonnegative.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

/// Solves the LP. `a` is row-major with `b.len()` rows and `c.len()` columns.
pub fn solve_lp(c: &[f64], a: &[f64], b: &[f64]) -> Result<LpSolution> {
    let n = c.len();
    let m = b.len();
    if a.len() != n * m {
        return Err(Error::Shape(format!("LP matrix has {} entries, expected {}", a.len(), n * m)));
    }
    if b.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidSettings("LP right-hand side must be nonnegative".into()));
    }
    let width = n + m + 1;
    let rhs = n + m;
    let mut t = vec![0.0; m * width];
    for r in 0..m {
        t[r * width..r * width + n].copy_from_slice(&a[r * n..(r + 1) * n]);
        t[r * width + n + r] = 1.0;
        t[r * width + rhs] = b[r];
    }
    let mut z = vec![0.0; width];
    for j in 0..n {
        z[j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut pivots = 0;
    let mut degenerate = 0;
    loop {
        let bland = degenerate >= DEGENERATE_RUN;
        let mut enter = None;
        let mut most = -PIVOT_EPS;
        for (j, &zj) in z[..rhs].iter().enumerate() {
            if zj < most {
                enter = Some(j);
                if bland {
                    break;
                }
                most = zj;
            }
        }
        let Some(e) = enter else { break };
        let mut leave: Option<(usize, f64)> = None;
        for r in 0..m {
            let coef = t[r * width + e];
            if coef > PIVOT_EPS {
                let ratio = t[r * width + rhs] / coef;
                let better = match leave {
                    None => true,
                    Some((lr, lratio)) => {
                        ratio < lratio - PIVOT_EPS
                            || (ratio <= lratio + PIVOT_EPS && basis[r] < basis[lr])
                    }
                };
                if better {
                    leave = Some((r, ratio));
                }
            }
        }
        let Some((p, ratio)) = leave else {
            return Err(Error::Unbounded);
        };
        degenerate = if ratio <= PIVOT_EPS { degenerate + 1 } else { 0 };
        pivot(&mut t, &mut z, width, p, e);
        basis[p] = e;
        pivots += 1;
    }
    let mut x = vec![0.0; n];
    for (r, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[r * width + rhs];
        }
    }
    let duals = z[n..n + m].iter().map(|v| v.max(0.0)).collect();
    Ok(LpSolution { x, objective: z[rhs], duals, pivots })
}

fn pivot(t: &mut [f64], z: &mut [f64], width: usize, p: usize, e: usize) {
    let inv = 1.0 / t[p * width + e];
    for v in &mut t[p * width..(p + 1) * width] {
        *v *= inv;
    }
    t[p * width + e] = 1.0;
    let (before, rest) = t.split_at_mut(p * width);
    let (prow, after) = rest.split_at_mut(width);
    let eliminate = |row: &mut [f64]| {
        let f = row[e];
        if f != 0.0 {
            for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            row[e] = 0.0;
        }
    };
    for row in before.chunks_mut(width).chain(after.chunks_mut(width)) {
        eliminate(row);
    }
    eliminate(z);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let s = solve_lp(&[3.0, 5.0], &[1.0, 0.0, 0.0, 2.0, 3.0, 2.0], &[4.0, 12.0, 18.0]).unwrap();
        assert!((s.objective - 36.0).abs() < 1e-12);
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        // Dual: (0, 1.5, 1) with bᵀy = 36.
        let by: f64 = s.duals.iter().zip([4.0, 12.0, 18.0]).map(|(y, b)| y * b).sum();
        assert!((by - 36.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_detected() {
        // max x, −x ≤ 1
        assert!(matches!(solve_lp(&[1.0], &[-1.0], &[1.0]), Err(Error::Unbounded)));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's cycling example under Dantzig's rule.
        let c = [0.75, -150.0, 0.02, -6.0];
        let a = [0.25, -60.0, -0.04, 9.0, 0.5, -90.0, -0.02, 3.0, 0.0, 0.0, 1.0, 0.0];
        let s = solve_lp(&c, &a, &[0.0, 0.0, 1.0]).unwrap();
        assert!((s.objective - 0.05).abs() < 1e-12);
    }

    #[test]
    fn strong_duality_on_random_problems() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.random_range(1..6);
            let m = rng.random_range(1..6);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
            let a: Vec<f64> = (0..n * m).map(|_| rng.random_range(0.1..2.0)).collect();
            let b: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..3.0)).collect();
            let s = solve_lp(&c, &a, &b).unwrap();
            let by: f64 = s.duals.iter().zip(&b).map(|(y, b)| y * b).sum();
            assert!((by - s.objective).abs() < 1e-9);
            // Primal feasibility.
            for r in 0..m {
                let lhs: f64 = (0..n).map(|j| a[r * n + j] * s.x[j]).sum();
                assert!(lhs <= b[r] + 1e-9);
            }
            // Dual feasibility: Aᵀy ≥ c.
            for j in 0..n {
                let col: f64 = (0..m).map(|r| a[r * n + j] * s.duals[r]).sum();
                assert!(col >= c[j] - 1e-9);
            }
        }
    }
}
