//! Oracles shared by the integration tests.

#![allow(dead_code)]

use hsketch::data::{ConstraintSet, DenseMatrix, ProblemInstance};

/// `A = [[1,0],[0,1],[1,1],[1,−1],[2,1],[0,2]]`, `b = A·(1,−2)`, `λ = 5`.
pub fn six_by_two_lasso() -> ProblemInstance {
    let rows = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0], [2.0, 1.0], [0.0, 2.0]];
    let b = rows.iter().map(|r| r[0] - 2.0 * r[1]).collect();
    let a = DenseMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>());
    ProblemInstance::new(a, b, ConstraintSet::L1Penalty { lambda: 5.0 }).unwrap()
}

/// Minimises a two-variable function by exhaustive search over `[−3, 3]²`
/// at spacing `1e−3`, then refines with a compass search whose step shrinks
/// to `1e−13`.
pub fn grid_search_with_polish(f: impl Fn(f64, f64) -> f64) -> [f64; 2] {
    let steps = 6000;
    let h = 6.0 / steps as f64;
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..=steps {
        let x = -3.0 + i as f64 * h;
        for j in 0..=steps {
            let y = -3.0 + j as f64 * h;
            let v = f(x, y);
            if v < best.0 {
                best = (v, x, y);
            }
        }
    }
    let (mut fv, mut x, mut y) = best;
    let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)];
    let mut step = h;
    while step > 1e-13 {
        let mut moved = false;
        for (dx, dy) in dirs {
            let (cx, cy) = (x + dx * step, y + dy * step);
            let v = f(cx, cy);
            if v < fv {
                (fv, x, y) = (v, cx, cy);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    [x, y]
}

/// Objective of a problem evaluated through its dense rows, independent of
/// the library's matrix-vector products.
pub fn dense_objective(rows: &[Vec<f64>], b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for (row, bi) in rows.iter().zip(b) {
        let p: f64 = row.iter().zip(x).map(|(a, v)| a * v).sum();
        r2 += (p - bi) * (p - bi);
    }
    0.5 * r2 + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}
