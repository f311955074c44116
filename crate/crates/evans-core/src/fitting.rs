//! Least-squares line fits used by rate measurements.

use crate::scalar::Scalar;

/// Least-squares line y = slope * x + intercept; returns
/// (slope, intercept, rms residual).
pub fn linear_fit<T: Scalar>(xs: &[T], ys: &[T]) -> (T, T, T) {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need at least two points");
    let n = T::from_usize(xs.len()).unwrap();
    let mean = |v: &[T]| v.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mx = mean(xs);
    let my = mean(ys);
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let r = y - (slope * x + intercept);
        ss = ss + r * r;
    }
    (slope, intercept, (ss / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_line() {
        let xs = [0.0_f64, 1.0, 2.0, 3.0];
        let ys = [1.0_f64, 3.0, 5.0, 7.0];
        let (slope, intercept, resid) = linear_fit(&xs, &ys);
        assert!((slope - 2.0).abs() < 1e-14);
        assert!((intercept - 1.0).abs() < 1e-14);
        assert!(resid < 1e-14);
    }
}
