//! Oracle-equivalence checks shared by `estimate selftest` and the test
//! suites. Each check returns the worst discrepancy it observed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::angular_domain::{build_compression_map, compress};
use crate::channel_model::complex_gaussian;
use crate::denoisers::{gm_denoise, quantized_output_denoise, GmComponent, GmPrior};
use crate::linear_operator::{build_training_matrix, OperatorDims, StructuredOperator, TrainingKind};
use crate::oracle;
use crate::quantizer::{QuantizerSpec, Resolution};
use crate::{norm_sqr, CMatrix, Result, C64};

/// Dimension tuples with `NMQ ≤ 256`, including non-square arrays and
/// every eigen-basis variant.
pub fn operator_test_dims() -> Vec<OperatorDims> {
    let d = |n1, n2, m1, m2, q1, q2, p| OperatorDims {
        n1,
        n2,
        m1,
        m2,
        q1,
        q2,
        p,
    };
    vec![
        d(1, 1, 1, 1, 1, 1, 1),
        d(2, 1, 2, 1, 1, 1, 2),
        d(2, 3, 1, 2, 2, 1, 5),
        d(4, 2, 2, 2, 1, 2, 8),
        d(3, 1, 3, 2, 2, 2, 6),
        d(2, 2, 4, 2, 1, 1, 12),
        d(4, 4, 2, 2, 2, 2, 4),
        d(2, 4, 4, 4, 1, 2, 16),
        d(1, 4, 2, 4, 2, 1, 9),
    ]
}

fn rel_err(a: &[C64], b: &[C64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    (num / norm_sqr(b).max(f64::MIN_POSITIVE)).sqrt()
}

fn random_vec<R: Rng>(rng: &mut R, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

fn random_operator(dims: OperatorDims, rng: &mut ChaCha8Rng) -> Result<StructuredOperator> {
    let tm = build_training_matrix(dims.m(), dims.p, TrainingKind::RandomPhase, rng)?;
    StructuredOperator::new(dims, tm)
}

/// Worst relative error of the fast forward and adjoint against the dense
/// operator over `vectors` random inputs per dimension tuple.
pub fn operator_equivalence(dims: &[OperatorDims], vectors: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for &d in dims {
        let op = random_operator(d, &mut rng)?;
        let a = oracle::dense_operator(&d, op.training());
        let ah = a.adjoint();
        for _ in 0..vectors {
            let x = random_vec(&mut rng, d.input_len());
            let want: Vec<C64> = (&a * nalgebra::DVector::from_column_slice(&x)).iter().copied().collect();
            worst = worst.max(rel_err(&op.forward(&x)?, &want));
            let y = random_vec(&mut rng, d.output_len());
            let want: Vec<C64> = (&ah * nalgebra::DVector::from_column_slice(&y)).iter().copied().collect();
            worst = worst.max(rel_err(&op.adjoint(&y)?, &want));
        }
    }
    Ok(worst)
}

/// Compressed-model measurements against the full Kronecker model for
/// random sparse `X ∈ C^{QN×M²}`; the map itself is literally validated
/// while it is built.
pub fn compression_equivalence(m1: usize, m2: usize, inputs: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = build_compression_map(m1, m2)?;
    crate::angular_domain::validate_literally(&map)?;
    let m = m1 * m2;
    let dims = OperatorDims {
        n1: 2,
        n2: 1,
        m1,
        m2,
        q1: 1,
        q2: 2,
        p: m + 3,
    };
    let op = random_operator(dims, &mut rng)?;
    let mut worst: f64 = 0.0;
    for _ in 0..inputs {
        let qn = dims.qn();
        let x = CMatrix::from_fn(qn, m * m, |_, _| {
            if rng.random_bool(0.1) {
                complex_gaussian(&mut rng)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let full = oracle::kronecker_model_measurements(&dims, op.training(), &x);
        let lam = compress(&x, &map)?;
        let fast = op.forward(&lam.to_vec())?;
        worst = worst.max(rel_err(&fast, full.as_slice()));
    }
    Ok(worst)
}

/// Worst absolute moment error of [`gm_denoise`] against quadrature.
pub fn gm_denoiser_equivalence(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let k = rng.random_range(1..=3usize);
        let lambda0 = rng.random_range(0.0..0.95);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let components = raw
            .iter()
            .map(|w| GmComponent {
                weight: (1.0 - lambda0) * w / total,
                mean: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                variance: rng.random_range(0.1..4.0),
            })
            .collect();
        let prior = match GmPrior::new(lambda0, components) {
            Ok(p) => p,
            Err(_) => continue,
        };
        let r = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let nu = rng.random_range(0.05..4.0);
        let fast = gm_denoise(r, nu, &prior);
        let slow = oracle::gm_denoise_quadrature(r, nu, &prior);
        worst = worst
            .max((fast.mean - slow.mean).norm())
            .max((fast.variance - slow.variance).abs());
    }
    worst
}

/// Worst absolute moment error of [`quantized_output_denoise`] against
/// quadrature.
pub fn output_denoiser_equivalence(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let bits = rng.random_range(0..=4u8);
        let step = rng.random_range(0.2..2.0);
        let spec = if bits == 0 {
            QuantizerSpec::identity()
        } else {
            QuantizerSpec::with_step(Resolution::Bits(bits), step).expect("valid step")
        };
        let p = C64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let nu_p: f64 = rng.random_range(0.05..4.0);
        let noise_var: f64 = if rng.random_bool(0.25) && bits != 0 {
            0.0
        } else {
            rng.random_range(0.01..1.0)
        };
        let z = p + complex_gaussian(&mut rng) * (nu_p + noise_var).sqrt();
        let y = spec.quantize(z);
        let fast = quantized_output_denoise(&y, p, nu_p, noise_var, &spec);
        let slow = oracle::output_denoise_quadrature(&y, p, nu_p, noise_var, &spec);
        worst = worst
            .max((fast.mean - slow.mean).norm())
            .max((fast.variance - slow.variance).abs());
    }
    worst
}

/// Worst relative error of one LMMSE stage against the dense ridge
/// solution, over the small operator dims and a few `γ`.
pub fn ridge_equivalence(seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for d in operator_test_dims().into_iter().take(6) {
        let op = random_operator(d, &mut rng)?;
        let a = oracle::dense_operator(&d, op.training());
        for gamma in [1e-3, 0.25, 7.0] {
            let r2 = random_vec(&mut rng, d.input_len());
            let p2 = random_vec(&mut rng, d.output_len());
            let mut rhs = op.adjoint(&p2)?;
            for (v, r) in rhs.iter_mut().zip(&r2) {
                *v = *v * gamma + r;
            }
            let w: Vec<f64> = op
                .singular_values_squared()
                .iter()
                .map(|&s| 1.0 / (gamma * s + 1.0))
                .collect();
            let fast = op.va_filter(&rhs, &w)?;
            let dense = oracle::dense_ridge(&a, gamma, &p2, &r2)?;
            worst = worst.max(rel_err(&fast, &dense));
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub worst: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.worst <= self.tolerance
    }
}

/// The quick oracle suite run by `estimate selftest`.
pub fn run_all() -> Result<Vec<Check>> {
    let mut checks = vec![Check {
        name: "operator forward/adjoint vs dense",
        worst: operator_equivalence(&operator_test_dims(), 10, 1)?,
        tolerance: 1e-10,
    }];
    let mut comp: f64 = 0.0;
    for (m1, m2) in [(2, 1), (2, 2), (4, 2), (4, 4)] {
        comp = comp.max(compression_equivalence(m1, m2, 3, 2)?);
    }
    checks.push(Check {
        name: "compressed vs Kronecker model",
        worst: comp,
        tolerance: 1e-10,
    });
    checks.push(Check {
        name: "mixture denoiser vs quadrature",
        worst: gm_denoiser_equivalence(300, 3),
        tolerance: 1e-5,
    });
    checks.push(Check {
        name: "quantized-output denoiser vs quadrature",
        worst: output_denoiser_equivalence(300, 4),
        tolerance: 1e-5,
    });
    checks.push(Check {
        name: "LMMSE stage vs dense ridge",
        worst: ridge_equivalence(5)?,
        tolerance: 1e-8,
    });
    Ok(checks)
}
