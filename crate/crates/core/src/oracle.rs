//! Slow, independent reference implementations.
//!
//! Everything here is built from dense matrices or adaptive numerical
//! integration and shares no code path with the fast implementations it
//! is used to check. Sizes are meant to stay small (`NMQ ≲ 256`).

use nalgebra::DVector;

use crate::angular_domain::{build_dictionary, khatri_rao_rows};
use crate::denoisers::{GmPrior, PosteriorMoments};
use crate::linear_operator::{OperatorDims, TrainingMatrix};
use crate::quantizer::{QuantizedSample, QuantizerSpec};
use crate::{CMatrix, Error, Result, C64};

/// `F_Q* ⊗ F_N`.
pub fn dense_left_transform(dims: &OperatorDims) -> CMatrix {
    let fq = build_dictionary(dims.q1, dims.q2).matrix.map(|c| c.conj());
    fq.kronecker(&build_dictionary(dims.n1, dims.n2).matrix)
}

/// `A = (F_Mᴴ E)ᵀ ⊗ (F_Q* ⊗ F_N)`, `(PTN) × (NMQ)`.
pub fn dense_operator(dims: &OperatorDims, training: &TrainingMatrix) -> CMatrix {
    let fm = build_dictionary(dims.m1, dims.m2).matrix;
    let right = (fm.adjoint() * training.dense()).transpose();
    right.kronecker(&dense_left_transform(dims))
}

/// `V_A = (F_M U_E / √M) ⊗ I_{NQ}` from the training matrix's basis.
pub fn dense_va(dims: &OperatorDims, training: &TrainingMatrix) -> CMatrix {
    let fm = build_dictionary(dims.m1, dims.m2).matrix;
    let b = fm * training.basis_matrix() / C64::from((dims.m() as f64).sqrt());
    b.kronecker(&CMatrix::identity(dims.qn(), dims.qn()))
}

/// Noiseless measurements of the uncompressed model
/// `(F_Q* ⊗ F_N) X (F_Mᵀ ⋄ F_Mᴴ) E` with `X ∈ C^{QN×M²}`.
pub fn kronecker_model_measurements(
    dims: &OperatorDims,
    training: &TrainingMatrix,
    x_full: &CMatrix,
) -> CMatrix {
    dense_left_transform(dims) * x_full * khatri_rao_rows(dims.m1, dims.m2) * training.dense()
}

/// `(γ AᴴA + I)⁻¹ (γ Aᴴ p + r)`.
pub fn dense_ridge(a: &CMatrix, gamma: f64, p: &[C64], r: &[C64]) -> Result<Vec<C64>> {
    let n = a.ncols();
    let g = C64::from(gamma);
    let lhs = a.adjoint() * a * g + CMatrix::identity(n, n);
    let rhs = a.adjoint() * DVector::from_column_slice(p) * g + DVector::from_column_slice(r);
    let sol = lhs.lu().solve(&rhs).ok_or(Error::SingularNormalEquations)?;
    Ok(sol.iter().copied().collect())
}

/// `(AᴴA + ridge·I)⁻¹ Aᴴ y`.
pub fn dense_least_squares(a: &CMatrix, y: &[C64], ridge: f64) -> Result<Vec<C64>> {
    let n = a.ncols();
    let lhs = a.adjoint() * a + CMatrix::identity(n, n) * C64::from(ridge);
    let rhs = a.adjoint() * DVector::from_column_slice(y);
    let sol = lhs.lu().solve(&rhs).ok_or(Error::SingularNormalEquations)?;
    Ok(sol.iter().copied().collect())
}

/// 15-point Kronrod nodes/weights and the embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Returns (integral, error estimate, integral of |f|).
fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    let mut abs = WGK[7] * fc.abs();
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let (f1, f2) = (f(c - h * x), f(c + h * x));
        kron += w * (f1 + f2);
        abs += w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let h = h.abs();
    (kron * h, ((kron - gauss) * h).abs(), abs * h)
}

/// Adaptive Gauss-Kronrod integral of `f` over `[a, b]`; either end may be
/// infinite.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    integrate_dyn(&f, a, b, tol)
}

fn integrate_dyn(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate_dyn(f, b, a, tol);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adapt(f, a, b, tol),
        // x = a + t/(1-t)
        (true, false) => adapt(
            &|t: f64| {
                let d = 1.0 - t;
                f(a + t / d) / (d * d)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, true) => adapt(
            &|t: f64| {
                let d = 1.0 - t;
                f(b - t / d) / (d * d)
            },
            0.0,
            1.0,
            tol,
        ),
        (false, false) => integrate_dyn(f, f64::NEG_INFINITY, 0.0, tol) + integrate_dyn(f, 0.0, f64::INFINITY, tol),
    }
}

const MAX_PANELS: usize = 100_000;

fn adapt<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    // tolerance is relative to a coarse estimate of ∫|f|
    const PANELS: usize = 8;
    let width = b - a;
    let edges: Vec<f64> = (0..=PANELS).map(|i| a + width * i as f64 / PANELS as f64).collect();
    let scale: f64 = edges
        .windows(2)
        .map(|w| gk15(f, w[0], w[1]).2)
        .sum();
    if scale == 0.0 {
        return 0.0;
    }
    let mut stack: Vec<(f64, f64, u32)> = edges.windows(2).map(|w| (w[0], w[1], 0)).collect();
    let mut total = 0.0;
    let mut budget = MAX_PANELS;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err, abs) = gk15(f, lo, hi);
        budget = budget.saturating_sub(1);
        // below the roundoff floor further splitting cannot help
        let floor = 50.0 * f64::EPSILON * abs;
        if err <= (tol * scale * (hi - lo) / width).max(floor) || depth >= 40 || budget == 0 {
            total += val;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, depth + 1));
            stack.push((mid, hi, depth + 1));
        }
    }
    total
}

/// Integrates over the real line split at the given breakpoints.
fn integrate_line<F: Fn(f64) -> f64>(f: &F, breaks: &mut Vec<f64>, tol: f64) -> f64 {
    breaks.retain(|b| b.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(breaks.iter().copied());
    edges.push(f64::INFINITY);
    edges.windows(2).map(|w| integrate(f, w[0], w[1], tol)).sum()
}

fn gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Posterior moments of the spike-plus-mixture prior by quadrature.
///
/// Each slab term `CN(x; μ, ρ)·CN(r; x, ν)` factorises over the real and
/// imaginary axes, so the complex-plane integrals are products of 1-D
/// integrals evaluated numerically.
pub fn gm_denoise_quadrature(r: C64, nu_r: f64, prior: &GmPrior) -> PosteriorMoments {
    let tol = 1e-11;
    let axis = |rr: f64, mu: f64, rho: f64| -> [f64; 3] {
        let f = |x: f64| gauss_pdf(x, mu, rho / 2.0) * gauss_pdf(rr, x, nu_r / 2.0);
        let z0 = integrate_line(&f, &mut vec![rr, mu], tol);
        let m = integrate_line(&|x| x * f(x), &mut vec![rr, mu], tol) / z0;
        let v = integrate_line(&|x| (x - m).powi(2) * f(x), &mut vec![rr, mu, m], tol) / z0;
        [z0, m, v]
    };
    // per term: (evidence, mean, variance)
    let mut terms = Vec::new();
    for c in &prior.components {
        let mu = c.mean();
        let re = axis(r.re, mu.re, c.variance);
        let im = axis(r.im, mu.im, c.variance);
        terms.push((c.weight * re[0] * im[0], C64::new(re[1], im[1]), re[2] + im[2]));
    }
    let spike = gauss_pdf(r.re, 0.0, nu_r / 2.0) * gauss_pdf(r.im, 0.0, nu_r / 2.0);
    terms.push((prior.lambda0 * spike, C64::new(0.0, 0.0), 0.0));
    let z: f64 = terms.iter().map(|t| t.0).sum();
    let mean: C64 = terms.iter().map(|t| t.1 * t.0).sum::<C64>() / z;
    let variance = terms
        .iter()
        .map(|t| t.0 * (t.2 + (t.1 - mean).norm_sqr()))
        .sum::<f64>()
        / z;
    PosteriorMoments { mean, variance }
}

fn output_axis(p: f64, v: f64, noise: f64, lo: f64, hi: f64) -> (f64, f64) {
    let tol = 1e-11;
    let f = |z: f64| -> f64 {
        let like = if noise == 0.0 {
            if z >= lo && z < hi {
                1.0
            } else {
                0.0
            }
        } else {
            // Φ(b) - Φ(a), taken from whichever tail avoids cancellation
            let k = 1.0 / (noise.sqrt() * std::f64::consts::SQRT_2);
            let (a, b) = ((lo - z) * k, (hi - z) * k);
            if a > 0.0 {
                0.5 * (libm::erfc(a) - if b.is_finite() { libm::erfc(b) } else { 0.0 })
            } else {
                0.5 * (if b.is_finite() { libm::erfc(-b) } else { 2.0 } - if a.is_finite() { libm::erfc(-a) } else { 0.0 })
            }
        };
        gauss_pdf(z, p, v) * like
    };
    let mut breaks = vec![lo, hi, p];
    let z0 = integrate_line(&f, &mut breaks.clone(), tol);
    let m = integrate_line(&|z| z * f(z), &mut breaks.clone(), tol) / z0;
    breaks.push(m);
    let var = integrate_line(&|z| (z - m).powi(2) * f(z), &mut breaks, tol) / z0;
    (m, var)
}

/// Posterior moments of the quantized-output channel by quadrature.
pub fn output_denoise_quadrature(
    y: &QuantizedSample,
    p_hat: C64,
    nu_p: f64,
    noise_var: f64,
    spec: &QuantizerSpec,
) -> PosteriorMoments {
    let (v, noise) = (nu_p / 2.0, noise_var / 2.0);
    let full = (f64::NEG_INFINITY, f64::INFINITY);
    let (bre, bim) = if spec.is_identity() {
        // y is an exact observation of z + w
        let post = |yy: f64, pp: f64| -> (f64, f64) {
            let f = |z: f64| gauss_pdf(z, pp, v) * gauss_pdf(yy, z, noise);
            let z0 = integrate_line(&f, &mut vec![yy, pp], 1e-11);
            let m = integrate_line(&|z| z * f(z), &mut vec![yy, pp], 1e-11) / z0;
            let var = integrate_line(&|z| (z - m).powi(2) * f(z), &mut vec![yy, pp, m], 1e-11) / z0;
            (m, var)
        };
        let (mr, vr) = post(y.value.re, p_hat.re);
        let (mi, vi) = post(y.value.im, p_hat.im);
        return PosteriorMoments {
            mean: C64::new(mr, mi),
            variance: vr + vi,
        };
    } else {
        (
            spec.bin_bounds(y.bin_re as usize).unwrap_or(full),
            spec.bin_bounds(y.bin_im as usize).unwrap_or(full),
        )
    };
    let (mr, vr) = output_axis(p_hat.re, v, noise, bre.0, bre.1);
    let (mi, vi) = output_axis(p_hat.im, v, noise, bim.0, bim.1);
    PosteriorMoments {
        mean: C64::new(mr, mi),
        variance: vr + vi,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_known_forms() {
        let g = integrate(|x| (-x * x).exp(), f64::NEG_INFINITY, f64::INFINITY, 1e-11);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-12);
        let p = integrate(|x| x * x, 0.0, 3.0, 1e-11);
        assert!((p - 9.0).abs() < 1e-12);
        let e = integrate(|x| (-x).exp(), 2.0, f64::INFINITY, 1e-11);
        assert!((e - (-2.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_posterior_by_quadrature() {
        let prior = GmPrior::bernoulli_gaussian(0.0, 2.0).unwrap();
        let r = C64::new(0.4, -1.0);
        let q = gm_denoise_quadrature(r, 0.5, &prior);
        assert!((q.mean - r * 2.0 / 2.5).norm() < 1e-10);
        assert!((q.variance - 0.4).abs() < 1e-10);
    }
}
