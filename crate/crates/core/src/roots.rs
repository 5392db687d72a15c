//! Bracketed scalar root finding.

use crate::scalar::Scalar;

/// Brent's method on `[lo, hi]`. `g(lo)` and `g(hi)` must have opposite signs
/// (zero at an endpoint is accepted). Returns the best point found after
/// `max_iter` steps even if the tolerance was not met.
pub fn brent<T, F>(mut g: F, lo: T, hi: T, xtol: T, max_iter: usize) -> Option<T>
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let two = T::lit(2.0);
    let half = T::lit(0.5);
    let three = T::lit(3.0);
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (g(a), g(b));
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if fa.is_nan() || fb.is_nan() || (fa > T::zero()) == (fb > T::zero()) {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > T::zero()) == (fc > T::zero()) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = two * T::epsilon() * b.abs() + half * xtol;
        let m = half * (c - b);
        if m.abs() <= tol || fb == T::zero() {
            return Some(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = two * m * s;
                q = T::one() - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (two * m * qa * (qa - r) - (b - a) * (r - T::one()));
                q = (qa - T::one()) * (r - T::one()) * (s - T::one());
            }
            if p > T::zero() {
                q = -q;
            } else {
                p = -p;
            }
            if two * p < (three * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b = if d.abs() > tol {
            b + d
        } else if m > T::zero() {
            b + tol
        } else {
            b - tol
        };
        fb = g(b);
    }
    Some(b)
}

/// Maximizer of a concave function on `[lo, hi]` given its derivative, which
/// must be nonincreasing on the interval.
pub fn concave_argmax<T, F>(mut derivative: F, lo: T, hi: T) -> T
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    if hi <= lo {
        return lo;
    }
    let d_hi = derivative(hi);
    if d_hi >= T::zero() {
        return hi;
    }
    let d_lo = derivative(lo);
    if d_lo <= T::zero() {
        return lo;
    }
    brent(derivative, lo, hi, T::zero(), 200).unwrap_or(lo)
}
