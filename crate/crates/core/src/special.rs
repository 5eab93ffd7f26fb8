//! Gaussian special functions with tail-stable evaluation.

use libm::{erf, erfc};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;

/// Standard normal density.
pub fn normal_pdf(t: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    FRAC_1_SQRT_2PI * (-0.5 * t * t).exp()
}

/// Standard normal CDF.
pub fn normal_cdf(t: f64) -> f64 {
    if t == f64::INFINITY {
        return 1.0;
    }
    if t == f64::NEG_INFINITY {
        return 0.0;
    }
    0.5 * erfc(-t / std::f64::consts::SQRT_2)
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 5.0 {
        return (x * x).exp() * erfc(x);
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    // Continued fraction erfc(x) = e^{-x²}/√π · 1/(x + ½/(x + 1/(x + 3/2/(x + ...)))).
    let terms = if x < 10.0 { 90 } else { 40 };
    let mut tail = x;
    for k in (1..=terms).rev() {
        tail = x + (k as f64 * 0.5) / tail;
    }
    1.0 / (tail * std::f64::consts::PI.sqrt())
}

/// Mean and variance of a standard normal truncated to `[a, b]`.
///
/// Either bound may be infinite. Intervals lying deep in one tail are
/// evaluated through `erfcx` ratios so the result stays finite when the
/// interval probability itself underflows.
pub fn truncated_standard_moments(a: f64, b: f64) -> (f64, f64) {
    debug_assert!(a <= b);
    if a >= 0.0 {
        upper_tail_moments(a, b)
    } else if b <= 0.0 {
        let (m, v) = upper_tail_moments(-b, -a);
        (-m, v)
    } else {
        let z = 0.5 * (erf(b / std::f64::consts::SQRT_2) - erf(a / std::f64::consts::SQRT_2));
        let (pa, pb) = (normal_pdf(a), normal_pdf(b));
        let apa = if a.is_finite() { a * pa } else { 0.0 };
        let bpb = if b.is_finite() { b * pb } else { 0.0 };
        let m = (pa - pb) / z;
        let v = 1.0 + (apa - bpb) / z - m * m;
        (m, v.clamp(0.0, 1.0))
    }
}

fn upper_tail_moments(a: f64, b: f64) -> (f64, f64) {
    if a == b {
        return (a, 0.0);
    }
    // Everything is divided through by φ(a).
    let rb = if b.is_finite() {
        (-0.5 * (b - a) * (b + a)).exp()
    } else {
        0.0
    };
    let tail_b = if b.is_finite() {
        erfcx(b / std::f64::consts::SQRT_2) * rb
    } else {
        0.0
    };
    let zn = SQRT_HALF_PI * (erfcx(a / std::f64::consts::SQRT_2) - tail_b);
    if !(zn > 0.0) {
        // interval too narrow to resolve; collapse onto it
        return (0.5 * (a + b.min(a + 1.0)), 0.0);
    }
    let brb = if b.is_finite() { b * rb } else { 0.0 };
    let m = (1.0 - rb) / zn;
    let v = 1.0 + (a - brb) / zn - m * m;
    (m, v.clamp(0.0, 1.0))
}
