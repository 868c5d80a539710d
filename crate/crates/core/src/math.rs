//! Thin float helpers so the rest of the crate does not depend on `std`.

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

/// Normalizes `v` in place and returns the original sum. A zero sum leaves
/// `v` untouched.
pub(crate) fn normalize(v: &mut [f64]) -> f64 {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
    s
}
