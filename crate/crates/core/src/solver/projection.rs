//! Euclidean projections and the ℓ1 proximal map.

/// `sign(v) · max(|v| − t, 0)`.
#[inline]
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Projection onto `{x : ‖x‖₁ ≤ radius}` by the sort-and-threshold method,
/// `O(d log d)`.
pub fn project_l1(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius >= 0.0, "radius must be non-negative");
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; v.len()];
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &u) in mags.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - radius) / (j + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    v.iter().map(|&x| soft_threshold(x, theta)).collect()
}

/// Projection onto `{x : ‖x‖₂ ≤ radius}`.
pub fn project_l2(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius >= 0.0, "radius must be non-negative");
    let norm = crate::linalg::norm2(v);
    if norm <= radius {
        return v.to_vec();
    }
    let scale = radius / norm;
    v.iter().map(|x| x * scale).collect()
}
