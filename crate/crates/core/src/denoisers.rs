//! Scalar MMSE denoisers: the spike-plus-Gaussian-mixture input denoiser
//! and the quantized-output denoiser.

use serde::{Deserialize, Serialize};

use crate::par::*;
use crate::quantizer::{QuantizedSample, QuantizerSpec};
use crate::special::truncated_standard_moments;
use crate::{Error, Result, C64};

/// Elements handled per parallel task.
const CHUNK: usize = 1024;

/// One circularly-symmetric complex Gaussian component `CN(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmComponent {
    pub weight: f64,
    #[serde(default)]
    pub mean: [f64; 2],
    pub variance: f64,
}

impl GmComponent {
    pub fn mean(&self) -> C64 {
        C64::new(self.mean[0], self.mean[1])
    }
}

/// Spike at zero with weight `lambda0` plus a Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GmPrior {
    pub lambda0: f64,
    pub components: Vec<GmComponent>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorMoments {
    pub mean: C64,
    /// Total complex variance `E|x - mean|²`.
    pub variance: f64,
}

impl GmPrior {
    pub fn new(lambda0: f64, components: Vec<GmComponent>) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda0) {
            return Err(Error::InvalidConfig(format!("spike weight {lambda0} outside [0,1]")));
        }
        for c in &components {
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "component variance must be positive, got {}",
                    c.variance
                )));
            }
            if !(c.weight >= 0.0) {
                return Err(Error::InvalidConfig(format!("negative component weight {}", c.weight)));
            }
        }
        let total = lambda0 + components.iter().map(|c| c.weight).sum::<f64>();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("prior weights sum to {total}, not 1")));
        }
        if components.is_empty() && lambda0 < 1.0 {
            return Err(Error::InvalidConfig("prior needs a component unless lambda0 = 1".into()));
        }
        Ok(Self {
            lambda0,
            components,
        })
    }

    /// Bernoulli-Gaussian prior with one zero-mean slab.
    pub fn bernoulli_gaussian(lambda0: f64, variance: f64) -> Result<Self> {
        Self::new(
            lambda0,
            vec![GmComponent {
                weight: 1.0 - lambda0,
                mean: [0.0, 0.0],
                variance,
            }],
        )
    }

    /// Moment-matched default for a support of `support` active entries out
    /// of `len`, with per-entry energy `energy_per_entry = E|x|²`.
    pub fn sparse_default(len: usize, support: f64, energy_per_entry: f64) -> Result<Self> {
        if len == 0 || !(support > 0.0) || !(energy_per_entry > 0.0) {
            return Err(Error::InvalidConfig("degenerate default prior".into()));
        }
        let active = (support / len as f64).min(1.0);
        Self::bernoulli_gaussian(1.0 - active, energy_per_entry / active)
    }

    pub fn mean(&self) -> C64 {
        self.components.iter().map(|c| c.mean() * c.weight).sum()
    }

    /// Total complex variance of the prior.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        let slab: f64 = self
            .components
            .iter()
            .map(|c| c.weight * (c.variance + (c.mean() - mean).norm_sqr()))
            .sum();
        slab + self.lambda0 * mean.norm_sqr()
    }
}

/// `ln CN(r; μ, s)`.
fn log_cn(r: C64, mu: C64, s: f64) -> f64 {
    -(std::f64::consts::PI * s).ln() - (r - mu).norm_sqr() / s
}

/// Posterior moments of `x` under `prior` given `r = x + CN(0, nu_r)`.
pub fn gm_denoise(r: C64, nu_r: f64, prior: &GmPrior) -> PosteriorMoments {
    debug_assert!(nu_r > 0.0);
    let k = prior.components.len();
    // (log weight, mean, variance) per posterior component; slot k is the spike
    let mut parts = [(f64::NEG_INFINITY, C64::new(0.0, 0.0), 0.0); 8];
    let mut scratch;
    let parts: &mut [(f64, C64, f64)] = if k < parts.len() {
        &mut parts[..=k]
    } else {
        scratch = vec![(f64::NEG_INFINITY, C64::new(0.0, 0.0), 0.0); k + 1];
        &mut scratch
    };
    for (slot, c) in parts.iter_mut().zip(&prior.components) {
        if c.weight > 0.0 {
            let mu = c.mean();
            let s = c.variance + nu_r;
            *slot = (
                c.weight.ln() + log_cn(r, mu, s),
                (r * c.variance + mu * nu_r) / s,
                c.variance * nu_r / s,
            );
        }
    }
    if prior.lambda0 > 0.0 {
        parts[k].0 = prior.lambda0.ln() + log_cn(r, C64::new(0.0, 0.0), nu_r);
    }
    let top = parts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return PosteriorMoments {
            mean: C64::new(0.0, 0.0),
            variance: 0.0,
        };
    }
    let mut norm = 0.0;
    let mut mean = C64::new(0.0, 0.0);
    for p in parts.iter_mut() {
        p.0 = (p.0 - top).exp();
        norm += p.0;
        mean += p.1 * p.0;
    }
    mean /= norm;
    let variance = parts
        .iter()
        .map(|&(w, m, v)| w * (v + (m - mean).norm_sqr()))
        .sum::<f64>()
        / norm;
    PosteriorMoments { mean, variance }
}

/// Mean and variance of one real axis of the output posterior.
fn axis_moments(p: f64, v: f64, noise: f64, lower: f64, upper: f64) -> (f64, f64) {
    let s2 = v + noise;
    let s = s2.sqrt();
    let (m, var_t) = truncated_standard_moments((lower - p) / s, (upper - p) / s);
    let mean = p + (v / s) * m;
    let var = v * (1.0 - v / s2) + (v * v / s2) * var_t;
    (mean, var.max(0.0))
}

/// Posterior moments of `z` given `y = Q(z + w)`, `z ~ CN(p_hat, nu_p)`,
/// `w ~ CN(0, noise_var)`.
pub fn quantized_output_denoise(
    y: &QuantizedSample,
    p_hat: C64,
    nu_p: f64,
    noise_var: f64,
    spec: &QuantizerSpec,
) -> PosteriorMoments {
    debug_assert!(nu_p > 0.0);
    if spec.is_identity() {
        let s = nu_p + noise_var;
        return PosteriorMoments {
            mean: (y.value * nu_p + p_hat * noise_var) / s,
            variance: nu_p * noise_var / s,
        };
    }
    let (v, noise) = (nu_p / 2.0, noise_var / 2.0);
    let (lr, ur) = spec.bin_bounds(y.bin_re as usize).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (li, ui) = spec.bin_bounds(y.bin_im as usize).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (mr, vr) = axis_moments(p_hat.re, v, noise, lr, ur);
    let (mi, vi) = axis_moments(p_hat.im, v, noise, li, ui);
    PosteriorMoments {
        mean: C64::new(mr, mi),
        variance: vr + vi,
    }
}

/// Applies [`gm_denoise`] elementwise, writing the posterior means into
/// `out` and returning the average posterior variance.
pub fn gm_denoise_all(r: &[C64], nu_r: f64, prior: &GmPrior, out: &mut [C64]) -> f64 {
    debug_assert_eq!(r.len(), out.len());
    let mut vars = vec![0.0; r.len()];
    out.par_chunks_mut(CHUNK)
        .zip(vars.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, (o, v))| {
            let base = c * CHUNK;
            for (i, (oo, vv)) in o.iter_mut().zip(v.iter_mut()).enumerate() {
                let pm = gm_denoise(r[base + i], nu_r, prior);
                *oo = pm.mean;
                *vv = pm.variance;
            }
        });
    mean_of(&vars)
}

/// Applies [`quantized_output_denoise`] elementwise; returns the average
/// posterior variance.
pub fn quantized_output_denoise_all(
    y: &[QuantizedSample],
    p_hat: &[C64],
    nu_p: f64,
    noise_var: f64,
    spec: &QuantizerSpec,
    out: &mut [C64],
) -> f64 {
    debug_assert_eq!(y.len(), p_hat.len());
    debug_assert_eq!(y.len(), out.len());
    let mut vars = vec![0.0; y.len()];
    out.par_chunks_mut(CHUNK)
        .zip(vars.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(c, (o, v))| {
            let base = c * CHUNK;
            for (i, (oo, vv)) in o.iter_mut().zip(v.iter_mut()).enumerate() {
                let pm = quantized_output_denoise(&y[base + i], p_hat[base + i], nu_p, noise_var, spec);
                *oo = pm.mean;
                *vv = pm.variance;
            }
        });
    mean_of(&vars)
}

/// Fixed-order mean, identical in parallel and sequential builds.
fn mean_of(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}
