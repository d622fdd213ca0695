//! Small numerical kernels: quadrature, cubic Hermite pieces, bisection, line fits.

use alloc::vec::Vec;

use crate::math;

/// Cubic Hermite interpolation on `[a, b]` from end values and end slopes.
#[inline]
pub fn hermite(a: f64, b: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let w = b - a;
    let u = (t - a) / w;
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * y0 + h10 * w * d0 + h01 * y1 + h11 * w * d1
}

/// Derivative of [`hermite`] with respect to `t`.
#[inline]
pub fn hermite_deriv(a: f64, b: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let w = b - a;
    let u = (t - a) / w;
    let u2 = u * u;
    let dh00 = (6.0 * u2 - 6.0 * u) / w;
    let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
    let dh01 = (-6.0 * u2 + 6.0 * u) / w;
    let dh11 = 3.0 * u2 - 2.0 * u;
    dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1
}

const GL3_NODE: f64 = 0.774_596_669_241_483_4; // sqrt(3/5)
const GL3_W_OUTER: f64 = 5.0 / 9.0;
const GL3_W_INNER: f64 = 8.0 / 9.0;

/// Three-point Gauss–Legendre rule, exact for quintics.
#[inline]
pub fn gauss3<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    r * (GL3_W_OUTER * (f(c - r * GL3_NODE) + f(c + r * GL3_NODE)) + GL3_W_INNER * f(c))
}

/// Composite Simpson rule with `panels` panels (rounded up to even).
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(2) + panels % 2;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Integrates `f` over `[a, b]` with [`gauss3`] on every sub-interval cut by
/// the uniform grid `t0 + k·step` and by the sorted `breaks`.
///
/// Piecewise-smooth integrands whose kinks sit on the grid or in `breaks`
/// keep full order.
pub fn integrate_on_grid<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    t0: f64,
    step: f64,
    breaks: &[f64],
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    let mut left = a;
    let mut k = math::floor((a - t0) / step + 1e-9) as i64 + 1;
    let mut bi = breaks.partition_point(|&x| x <= a);
    loop {
        let grid_next = t0 + k as f64 * step;
        let brk_next = breaks.get(bi).copied().unwrap_or(f64::INFINITY);
        let mut right = grid_next.min(brk_next).min(b);
        // merge points closer than rounding noise
        if right - left <= 1e-12 * step && right < b {
            if grid_next <= brk_next {
                k += 1;
            } else {
                bi += 1;
            }
            continue;
        }
        if b - right <= 1e-12 * step {
            right = b;
        }
        total += gauss3(f, left, right);
        if right >= b {
            break;
        }
        if grid_next <= right {
            k += 1;
        }
        while breaks.get(bi).is_some_and(|&x| x <= right) {
            bi += 1;
        }
        left = right;
    }
    total
}

/// Bisection for a sign change of `f` on `[lo, hi]`.
///
/// Returns `None` if `f(lo)` and `f(hi)` share a strict sign.
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol: f64) -> Option<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if (flo > 0.0) == (fhi > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol {
            return Some(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Least-squares line through `(xs, ys)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len().min(ys.len());
    if n < 2 {
        return None;
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// `n` points evenly spaced in log scale from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![lo];
    }
    let (a, b) = (math::ln(lo), math::ln(hi));
    (0..n)
        .map(|i| math::exp(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}
