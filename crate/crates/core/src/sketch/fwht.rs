//! In-place fast Walsh–Hadamard transform.

/// Unnormalised transform: afterwards `x = H x` with `H` entries `±1`.
///
/// `x.len()` must be a power of two.
pub fn fwht(x: &mut [f64]) {
    let n = x.len();
    assert!(n.is_power_of_two(), "FWHT length {n} is not a power of two");
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
}

/// Entry `(r, c)` of the unnormalised Hadamard matrix.
#[inline]
pub fn hadamard_entry(r: usize, c: usize) -> f64 {
    if (r & c).count_ones().is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}
