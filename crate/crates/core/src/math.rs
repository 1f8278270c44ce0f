//! Thin wrappers around `libm` so the crate builds without `std`.
//!
//! `abs`, `max` and `min` come from `core` and are used directly on `f64`.

#[inline(always)]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline(always)]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline(always)]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline(always)]
pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

#[inline(always)]
pub fn pow(x: f64, y: f64) -> f64 {
    libm::pow(x, y)
}

#[inline(always)]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline(always)]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline(always)]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

/// Nodes and weights of the 8-point Gauss–Legendre rule on [-1, 1].
pub const GL8_NODES: [f64; 8] = [
    -0.9602898564975362,
    -0.7966664774136267,
    -0.5255324099163290,
    -0.1834346424956498,
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975362,
];

pub const GL8_WEIGHTS: [f64; 8] = [
    0.1012285362903763,
    0.2223810344533745,
    0.3137066458778873,
    0.3626837833783620,
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

/// 8-point Gauss–Legendre quadrature of `f` on `[a, b]`.
pub fn gl8<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (node, weight) in GL8_NODES.iter().zip(GL8_WEIGHTS.iter()) {
        acc += weight * f(mid + half * node);
    }
    acc * half
}

/// Adaptive Gauss–Legendre quadrature with relative tolerance `tol_rel`.
///
/// Returns `None` when the recursion depth limit is hit before the interval
/// estimates agree, which only happens for pathological integrands.
pub fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol_rel: f64) -> Option<f64> {
    let whole = gl8(f, a, b);
    let scale = whole.abs().max(1e-300);
    adaptive_gl_rec(f, a, b, whole, tol_rel * scale, 60)
}

fn adaptive_gl_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    tol_abs: f64,
    depth: u32,
) -> Option<f64> {
    let mid = 0.5 * (a + b);
    let left = gl8(f, a, mid);
    let right = gl8(f, mid, b);
    let refined = left + right;
    if (refined - whole).abs() <= tol_abs || (b - a).abs() < 1e-14 {
        return Some(refined);
    }
    if depth == 0 {
        return None;
    }
    let half_tol = 0.5 * tol_abs;
    let l = adaptive_gl_rec(f, a, mid, left, half_tol, depth - 1)?;
    let r = adaptive_gl_rec(f, mid, b, right, half_tol, depth - 1)?;
    Some(l + r)
}

/// Least-squares fit of `y = c + s * x`; returns `(c, s, rms_residual)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    debug_assert!(xs.len() == ys.len() && xs.len() >= 2);
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys.iter()).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mut sq = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        let r = y - (intercept + slope * x);
        sq += r * r;
    }
    (intercept, slope, sqrt(sq / n))
}
