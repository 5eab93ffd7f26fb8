//! VAMP estimator for the compressed angular channel from quantized
//! measurements.
//!
//! Each iteration runs the separable prior denoiser on `r1`, the
//! quantized-output denoiser on `p1`, and one LMMSE stage through the
//! eigen-structure of `AᴴA`, exchanging extrinsic messages between them.

use serde::{Deserialize, Serialize};

use crate::angular_domain::CompressedAngularMatrix;
use crate::channel_model::CascadedChannel;
use crate::denoisers::{gm_denoise_all, quantized_output_denoise_all, GmPrior};
use crate::linear_operator::StructuredOperator;
use crate::quantizer::{QuantizedSample, QuantizerSpec};
use crate::{norm_sqr, Error, Result, C64};

/// Reported in place of `-∞` dB.
pub const NMSE_FLOOR_DB: f64 = -300.0;

/// Consecutive clamped iterations after which the run is flagged.
const CLAMP_PATIENCE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Weight of the new iterate in the damped update of `r1`, `p1`.
    pub damping: f64,
    /// Floor for every message variance.
    pub var_eps: f64,
    /// Divergences are kept in `[div_eps, 1 - div_eps]`.
    pub div_eps: f64,
    /// Stop once `‖x̂ - x̂_prev‖ / ‖x̂_prev‖` falls below this.
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            damping: 0.5,
            var_eps: 1e-11,
            div_eps: 1e-6,
            tol: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidConfig(format!("damping {} outside (0,1]", self.damping)));
        }
        if !(self.var_eps > 0.0) || !(self.tol >= 0.0) {
            return Err(Error::InvalidConfig("var_eps must be positive and tol non-negative".into()));
        }
        if !(self.div_eps > 0.0 && self.div_eps < 0.5) {
            return Err(Error::InvalidConfig(format!("div_eps {} outside (0,0.5)", self.div_eps)));
        }
        Ok(())
    }
}

/// Full message state of one iteration, captured after the second
/// extrinsic update and before damping.
#[derive(Debug, Clone, Default)]
pub struct VampState {
    pub iteration: usize,
    pub r1: Vec<C64>,
    pub nu_x1: f64,
    pub x_hat1: Vec<C64>,
    pub alpha1: f64,
    pub r2: Vec<C64>,
    pub nu_x2: f64,
    pub p1: Vec<C64>,
    pub nu_p1: f64,
    pub z_hat1: Vec<C64>,
    pub beta1: f64,
    pub p2: Vec<C64>,
    pub nu_p2: f64,
    pub x_hat2: Vec<C64>,
    pub alpha2: f64,
    pub z_hat2: Vec<C64>,
    pub beta2: f64,
    /// Undamped extrinsic messages fed to the next iteration.
    pub r1_next: Vec<C64>,
    pub nu_x1_next: f64,
    pub p1_next: Vec<C64>,
    pub nu_p1_next: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub nu_x1: f64,
    pub nu_x2: f64,
    pub nu_p1: f64,
    pub nu_p2: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// NaN when no ground truth was supplied.
    pub nmse_lambda: f64,
}

#[derive(Debug, Clone)]
pub struct VampOutput {
    pub lambda_hat: CompressedAngularMatrix,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    /// Stopping tolerance reached without a clamp flag.
    pub converged: bool,
    /// A divergence sat on its clamp for several consecutive iterations.
    pub clamp_flagged: bool,
}

/// Runs the estimator; see [`vamp_estimate_observed`].
pub fn vamp_estimate(
    y: &[QuantizedSample],
    op: &StructuredOperator,
    spec: &QuantizerSpec,
    prior: &GmPrior,
    noise_var: f64,
    cfg: &SolverConfig,
    truth: Option<&[C64]>,
) -> Result<VampOutput> {
    vamp_estimate_observed(y, op, spec, prior, noise_var, cfg, truth, |_| {})
}

fn clamp_div(v: f64, eps: f64) -> (f64, bool) {
    let c = v.clamp(eps, 1.0 - eps);
    (c, c != v || v.is_nan())
}

fn ensure_finite(v: &[C64], scalar: f64, step: &'static str, iteration: usize) -> Result<()> {
    if scalar.is_finite() && v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step, iteration })
    }
}

/// `(a - d·b) / (1 - d)` elementwise.
fn extrinsic(a: &[C64], b: &[C64], d: f64) -> Vec<C64> {
    let s = 1.0 / (1.0 - d);
    a.iter().zip(b).map(|(x, y)| (x - y * d) * s).collect()
}

/// NMSE in dB between vectors, floored at [`NMSE_FLOOR_DB`].
pub fn nmse_db_vec(truth: &[C64], est: &[C64]) -> Result<f64> {
    if truth.len() != est.len() {
        return Err(Error::dims("nmse", truth.len(), est.len()));
    }
    let den = norm_sqr(truth);
    if den == 0.0 {
        return Err(Error::ZeroEnergy("reference channel"));
    }
    let num: f64 = truth.iter().zip(est).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(if num == 0.0 {
        NMSE_FLOOR_DB
    } else {
        (10.0 * (num / den).log10()).max(NMSE_FLOOR_DB)
    })
}

/// `10·log10(‖G - Ĝ‖_F² / ‖G‖_F²)`.
pub fn nmse(g_true: &CascadedChannel, g_hat: &CascadedChannel) -> Result<f64> {
    if g_true.g.shape() != g_hat.g.shape() {
        return Err(Error::dims("nmse (entries)", g_true.g.len(), g_hat.g.len()));
    }
    nmse_db_vec(g_true.g.as_slice(), g_hat.g.as_slice())
}

/// Runs the estimator, invoking `observe` with the state of every
/// iteration.
///
/// With `truth = Some(vec(Λ))` each trace row carries the NMSE of the
/// current estimate.
#[allow(clippy::too_many_arguments)]
pub fn vamp_estimate_observed<F: FnMut(&VampState)>(
    y: &[QuantizedSample],
    op: &StructuredOperator,
    spec: &QuantizerSpec,
    prior: &GmPrior,
    noise_var: f64,
    cfg: &SolverConfig,
    truth: Option<&[C64]>,
    mut observe: F,
) -> Result<VampOutput> {
    cfg.validate()?;
    let dims = *op.dims();
    let (n_x, n_z) = (dims.input_len(), dims.output_len());
    if y.len() != n_z {
        return Err(Error::dims("measurements", n_z, y.len()));
    }
    if let Some(t) = truth {
        if t.len() != n_x {
            return Err(Error::dims("ground truth", n_x, t.len()));
        }
    }
    if !(noise_var >= 0.0 && noise_var.is_finite()) {
        return Err(Error::InvalidConfig(format!("noise variance {noise_var} must be finite and non-negative")));
    }
    let s2 = op.singular_values_squared();
    let eps = cfg.var_eps;
    let damp = cfg.damping;

    let prior_var = prior.variance().max(eps);
    let mut r1 = vec![prior.mean(); n_x];
    let mut nu_x1 = prior_var;
    let mut p1 = op.forward(&r1)?;
    let mut nu_p1 = (prior_var * op.frobenius_norm_sqr() / n_z as f64).max(eps);

    let mut x_hat1 = vec![C64::new(0.0, 0.0); n_x];
    let mut z_hat1 = vec![C64::new(0.0, 0.0); n_z];
    let mut prev: Option<Vec<C64>> = None;
    let mut trace = Vec::with_capacity(cfg.max_iters);
    let mut clamp_run = 0usize;
    let mut clamp_flagged = false;
    let mut reached_tol = false;
    let mut iterations = 0;

    for it in 1..=cfg.max_iters {
        iterations = it;
        // input denoiser and its extrinsic message
        let avg_vx = gm_denoise_all(&r1, nu_x1, prior, &mut x_hat1);
        ensure_finite(&x_hat1, avg_vx, "input denoiser", it)?;
        let (alpha1, c_a1) = clamp_div(avg_vx / nu_x1, cfg.div_eps);
        let r2 = extrinsic(&x_hat1, &r1, alpha1);
        let nu_x2 = (nu_x1 * alpha1 / (1.0 - alpha1)).max(eps);
        ensure_finite(&r2, nu_x2, "input extrinsic", it)?;

        // output denoiser and its extrinsic message
        let avg_vz = quantized_output_denoise_all(y, &p1, nu_p1, noise_var, spec, &mut z_hat1);
        ensure_finite(&z_hat1, avg_vz, "output denoiser", it)?;
        let (beta1, c_b1) = clamp_div(avg_vz / nu_p1, cfg.div_eps);
        let p2 = extrinsic(&z_hat1, &p1, beta1);
        let nu_p2 = (nu_p1 * beta1 / (1.0 - beta1)).max(eps);
        ensure_finite(&p2, nu_p2, "output extrinsic", it)?;

        // LMMSE stage
        let gamma = nu_x2 / nu_p2;
        let mut rhs = op.adjoint(&p2)?;
        for (v, r) in rhs.iter_mut().zip(&r2) {
            *v = *v * gamma + r;
        }
        let weights: Vec<f64> = s2.iter().map(|&s| 1.0 / (gamma * s + 1.0)).collect();
        let x_hat2 = op.va_filter(&rhs, &weights)?;
        let (alpha2, c_a2) = clamp_div(weights.iter().sum::<f64>() / n_x as f64, cfg.div_eps);
        ensure_finite(&x_hat2, gamma, "lmmse", it)?;
        let r1_next = extrinsic(&x_hat2, &r2, alpha2);
        let nu_x1_next = (nu_x2 * alpha2 / (1.0 - alpha2)).max(eps);
        ensure_finite(&r1_next, nu_x1_next, "lmmse extrinsic", it)?;

        let z_hat2 = op.forward(&x_hat2)?;
        let (beta2, c_b2) = clamp_div((1.0 - alpha2) * n_x as f64 / n_z as f64, cfg.div_eps);
        let p1_next = extrinsic(&z_hat2, &p2, beta2);
        let nu_p1_next = (nu_p2 * beta2 / (1.0 - beta2)).max(eps);
        ensure_finite(&p1_next, nu_p1_next, "output-side extrinsic", it)?;

        let nmse_lambda = match truth {
            Some(t) => nmse_db_vec(t, &x_hat1)?,
            None => f64::NAN,
        };
        trace.push(TraceRow {
            iter: it,
            nu_x1,
            nu_x2,
            nu_p1,
            nu_p2,
            alpha1,
            alpha2,
            beta1,
            beta2,
            nmse_lambda,
        });

        let state = VampState {
            iteration: it,
            r1: std::mem::take(&mut r1),
            nu_x1,
            x_hat1: x_hat1.clone(),
            alpha1,
            r2,
            nu_x2,
            p1: std::mem::take(&mut p1),
            nu_p1,
            z_hat1: z_hat1.clone(),
            beta1,
            p2,
            nu_p2,
            x_hat2,
            alpha2,
            z_hat2,
            beta2,
            r1_next,
            nu_x1_next,
            p1_next,
            nu_p1_next,
        };
        observe(&state);

        // damped message update; the first iteration has nothing to damp against
        let d = if it == 1 { 1.0 } else { damp };
        r1 = state
            .r1_next
            .iter()
            .zip(&state.r1)
            .map(|(new, old)| new * d + old * (1.0 - d))
            .collect();
        nu_x1 = (d * state.nu_x1_next + (1.0 - d) * state.nu_x1).max(eps);
        p1 = state
            .p1_next
            .iter()
            .zip(&state.p1)
            .map(|(new, old)| new * d + old * (1.0 - d))
            .collect();
        nu_p1 = (d * state.nu_p1_next + (1.0 - d) * state.nu_p1).max(eps);

        if c_a1 || c_a2 || c_b1 || c_b2 {
            clamp_run += 1;
            if clamp_run >= CLAMP_PATIENCE {
                clamp_flagged = true;
            }
        } else {
            clamp_run = 0;
        }

        if let Some(prev) = &prev {
            let den = norm_sqr(prev).sqrt();
            let diff: f64 = prev
                .iter()
                .zip(&x_hat1)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if diff <= cfg.tol * den {
                reached_tol = true;
                break;
            }
        }
        prev = Some(x_hat1.clone());
    }

    let qn = dims.qn();
    Ok(VampOutput {
        lambda_hat: CompressedAngularMatrix::from_vec(qn, dims.m(), &x_hat1)?,
        trace,
        iterations,
        converged: reached_tol && !clamp_flagged,
        clamp_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular_domain::{project_cascaded, reconstruct_cascaded, AngularDictionaries};
    use crate::channel_model::{complex_gaussian, UpaGeometry};
    use crate::linear_operator::{build_training_matrix, OperatorDims, TrainingKind};
    use crate::{oracle, CMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_problem(seed: u64) -> (StructuredOperator, Vec<C64>) {
        let d = OperatorDims {
            n1: 2,
            n2: 2,
            m1: 2,
            m2: 2,
            q1: 1,
            q2: 1,
            p: 16,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tm = build_training_matrix(d.m(), d.p, TrainingKind::RandomPhase, &mut rng).unwrap();
        let op = StructuredOperator::new(d, tm).unwrap();
        let mut x = vec![C64::new(0.0, 0.0); d.input_len()];
        x[3] = complex_gaussian(&mut rng) * 2.0;
        x[9] = complex_gaussian(&mut rng) * 2.0;
        (op, x)
    }

    #[test]
    fn nmse_examples() {
        let g = CascadedChannel {
            g: CMatrix::from_fn(3, 2, |r, c| C64::new(r as f64 + 1.0, c as f64)),
        };
        assert_eq!(nmse(&g, &g).unwrap(), NMSE_FLOOR_DB);
        let zero = CascadedChannel {
            g: CMatrix::zeros(3, 2),
        };
        assert!(nmse(&g, &zero).unwrap().abs() < 1e-12);
        let e = g.g.norm() * 0.1;
        let mut perturbed = g.clone();
        perturbed.g[(0, 0)] += C64::new(e, 0.0);
        assert!((nmse(&g, &perturbed).unwrap() + 20.0).abs() < 1e-9);
        assert!(nmse(&zero, &g).is_err());
    }

    #[test]
    fn extrinsic_identities_hold() {
        let (op, x) = small_problem(2);
        let z = op.forward(&x).unwrap();
        let spec = QuantizerSpec::with_step(crate::quantizer::Resolution::Bits(2), 3.0).unwrap();
        let y = spec.quantize_all(&z);
        let prior = GmPrior::bernoulli_gaussian(0.8, 4.0).unwrap();
        let mut count = 0;
        vamp_estimate_observed(&y, &op, &spec, &prior, 0.01, &SolverConfig::default(), None, |s| {
            count += 1;
            let close = |a: &[C64], b: &[C64]| a.iter().zip(b).all(|(u, v)| (u - v).norm() <= 1e-12 * (1.0 + v.norm()));
            let want_r2: Vec<C64> = s.x_hat1.iter().zip(&s.r1).map(|(x, r)| (x - r * s.alpha1) / (1.0 - s.alpha1)).collect();
            assert!(close(&s.r2, &want_r2));
            let want_p2: Vec<C64> = s.z_hat1.iter().zip(&s.p1).map(|(z, p)| (z - p * s.beta1) / (1.0 - s.beta1)).collect();
            assert!(close(&s.p2, &want_p2));
            let want_r1: Vec<C64> = s.x_hat2.iter().zip(&s.r2).map(|(x, r)| (x - r * s.alpha2) / (1.0 - s.alpha2)).collect();
            assert!(close(&s.r1_next, &want_r1));
            let want_p1: Vec<C64> = s.z_hat2.iter().zip(&s.p2).map(|(z, p)| (z - p * s.beta2) / (1.0 - s.beta2)).collect();
            assert!(close(&s.p1_next, &want_p1));
            assert!((s.nu_x2 - s.nu_x1 * s.alpha1 / (1.0 - s.alpha1)).abs() <= 1e-12 * s.nu_x2.max(1e-11));
            for d in [s.alpha1, s.alpha2, s.beta1, s.beta2] {
                assert!(d > 0.0 && d < 1.0);
            }
        })
        .unwrap();
        assert!(count > 0);
    }

    #[test]
    fn lmmse_stage_matches_dense_ridge() {
        let (op, _) = small_problem(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = *op.dims();
        let r2: Vec<C64> = (0..d.input_len()).map(|_| complex_gaussian(&mut rng)).collect();
        let p2: Vec<C64> = (0..d.output_len()).map(|_| complex_gaussian(&mut rng)).collect();
        let gamma = 0.37;
        let mut rhs = op.adjoint(&p2).unwrap();
        for (v, r) in rhs.iter_mut().zip(&r2) {
            *v = *v * gamma + r;
        }
        let w: Vec<f64> = op.singular_values_squared().iter().map(|&s| 1.0 / (gamma * s + 1.0)).collect();
        let fast = op.va_filter(&rhs, &w).unwrap();
        let a = oracle::dense_operator(&d, op.training());
        let dense = oracle::dense_ridge(&a, gamma, &p2, &r2).unwrap();
        let err: f64 = fast.iter().zip(&dense).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-8 * norm_sqr(&dense).sqrt());
    }

    #[test]
    fn unquantized_sparse_recovery() {
        let (op, x) = small_problem(6);
        let z = op.forward(&x).unwrap();
        let sig = norm_sqr(&z) / z.len() as f64;
        let noise_var = sig * 1e-3;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let spec = QuantizerSpec::identity();
        let y: Vec<_> = z
            .iter()
            .map(|&v| spec.quantize(v + complex_gaussian(&mut rng) * noise_var.sqrt()))
            .collect();
        let prior = GmPrior::sparse_default(x.len(), 2.0, norm_sqr(&x) / x.len() as f64).unwrap();
        let out = vamp_estimate(&y, &op, &spec, &prior, noise_var, &SolverConfig::default(), Some(&x)).unwrap();
        let final_nmse = out.trace.last().unwrap().nmse_lambda;
        assert!(final_nmse < -35.0, "nmse {final_nmse}");
        assert!(out.iterations <= 30 || final_nmse < -35.0);
    }

    #[test]
    fn huge_noise_returns_prior_mean() {
        let (op, x) = small_problem(8);
        let spec = QuantizerSpec::identity();
        let z = op.forward(&x).unwrap();
        let y = spec.quantize_all(&z);
        let prior = GmPrior::bernoulli_gaussian(0.9, 1.0).unwrap();
        let out = vamp_estimate(&y, &op, &spec, &prior, 1e12, &SolverConfig::default(), Some(&x)).unwrap();
        let est = out.lambda_hat.to_vec();
        assert!(norm_sqr(&est) < 1e-6 * norm_sqr(&x));
        assert!(out.trace.last().unwrap().nmse_lambda.abs() < 0.01);
    }

    #[test]
    fn trace_is_bitwise_deterministic() {
        let (op, x) = small_problem(10);
        let z = op.forward(&x).unwrap();
        let spec = QuantizerSpec::with_step(crate::quantizer::Resolution::Bits(1), 1.0).unwrap();
        let y = spec.quantize_all(&z);
        let prior = GmPrior::bernoulli_gaussian(0.8, 2.0).unwrap();
        let run = || vamp_estimate(&y, &op, &spec, &prior, 0.1, &SolverConfig::default(), Some(&x)).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.trace.len(), b.trace.len());
        for (r, s) in a.trace.iter().zip(&b.trace) {
            assert_eq!(format!("{r:?}"), format!("{s:?}"));
        }
        assert_eq!(a.lambda_hat, b.lambda_hat);
    }

    #[test]
    fn estimate_maps_back_to_cascaded_channel() {
        let (op, x) = small_problem(12);
        let d = *op.dims();
        let spec = QuantizerSpec::identity();
        let y = spec.quantize_all(&op.forward(&x).unwrap());
        let prior = GmPrior::sparse_default(x.len(), 2.0, norm_sqr(&x) / x.len() as f64).unwrap();
        let out = vamp_estimate(&y, &op, &spec, &prior, 1e-9, &SolverConfig::default(), None).unwrap();
        let geom = |a, b| UpaGeometry::new(a, b).unwrap();
        let dicts = AngularDictionaries::new(&geom(d.n1, d.n2), &geom(d.m1, d.m2), &geom(d.q1, d.q2));
        let truth = CompressedAngularMatrix::from_vec(d.qn(), d.m(), &x).unwrap();
        let g = reconstruct_cascaded(&truth, &dicts).unwrap();
        let g_hat = reconstruct_cascaded(&out.lambda_hat, &dicts).unwrap();
        let lam_nmse = nmse_db_vec(&x, &out.lambda_hat.to_vec()).unwrap();
        assert!((nmse(&g, &g_hat).unwrap() - lam_nmse).abs() < 1e-6);
        assert_eq!(project_cascaded(&g, &dicts).unwrap().lambda.shape(), (d.qn(), d.m()));
    }

    #[test]
    fn rejects_bad_inputs() {
        let (op, _) = small_problem(1);
        let spec = QuantizerSpec::identity();
        let prior = GmPrior::bernoulli_gaussian(0.5, 1.0).unwrap();
        let y = spec.quantize_all(&[C64::new(1.0, 0.0); 3]);
        assert!(vamp_estimate(&y, &op, &spec, &prior, 0.1, &SolverConfig::default(), None).is_err());
        let cfg = SolverConfig {
            damping: 0.0,
            ..SolverConfig::default()
        };
        let y = spec.quantize_all(&vec![C64::new(1.0, 0.0); op.dims().output_len()]);
        assert!(vamp_estimate(&y, &op, &spec, &prior, 0.1, &cfg, None).is_err());
    }
}
