use proptest::prelude::*;
use qris::baselines::ls_estimate;
use qris::channel_model::complex_gaussian;
use qris::denoisers::{gm_denoise, quantized_output_denoise, GmPrior};
use qris::linear_operator::{build_training_matrix, OperatorDims, StructuredOperator, TrainingKind};
use qris::quantizer::{QuantizerSpec, Resolution};
use qris::{norm_sqr, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims_strategy() -> impl Strategy<Value = OperatorDims> {
    (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3, 1usize..=2, 1usize..=2, 0usize..=4).prop_map(
        |(n1, n2, m1, m2, q1, q2, extra)| OperatorDims {
            n1,
            n2,
            m1,
            m2,
            q1,
            q2,
            p: m1 * m2 + extra,
        },
    )
}

fn setup(dims: OperatorDims, seed: u64, kind: TrainingKind) -> (StructuredOperator, ChaCha8Rng) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tm = build_training_matrix(dims.m(), dims.p, kind, &mut rng).unwrap();
    (StructuredOperator::new(dims, tm).unwrap(), rng)
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| complex_gaussian(rng)).collect()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjoint_is_the_adjoint(dims in dims_strategy(), seed in any::<u64>()) {
        let (op, mut rng) = setup(dims, seed, TrainingKind::RandomPhase);
        let x = random(&mut rng, dims.input_len());
        let y = random(&mut rng, dims.output_len());
        let lhs = dot(&op.forward(&x).unwrap(), &y);
        let rhs = dot(&x, &op.adjoint(&y).unwrap());
        let scale = (norm_sqr(&x) * norm_sqr(&y)).sqrt() * op.frobenius_norm_sqr().sqrt();
        prop_assert!((lhs - rhs).norm() <= 1e-11 * scale);
    }

    #[test]
    fn forward_is_linear(dims in dims_strategy(), seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let (op, mut rng) = setup(dims, seed, TrainingKind::RandomPhase);
        let x1 = random(&mut rng, dims.input_len());
        let x2 = random(&mut rng, dims.input_len());
        let c = C64::new(a, b);
        let mix: Vec<C64> = x1.iter().zip(&x2).map(|(u, v)| u * c + v).collect();
        let lhs = op.forward(&mix).unwrap();
        let f1 = op.forward(&x1).unwrap();
        let f2 = op.forward(&x2).unwrap();
        let err: f64 = lhs.iter().zip(f1.iter().zip(&f2)).map(|(l, (u, v))| (l - (u * c + v)).norm_sqr()).sum();
        prop_assert!(err.sqrt() <= 1e-10 * (1.0 + norm_sqr(&lhs).sqrt()));
    }

    #[test]
    fn eigenbasis_is_unitary_and_diagonalises(dims in dims_strategy(), seed in any::<u64>(), zc in any::<bool>()) {
        let kind = if zc { TrainingKind::ZadoffChu } else { TrainingKind::RandomPhase };
        let (op, mut rng) = setup(dims, seed, kind);
        let x = random(&mut rng, dims.input_len());
        let round = op.va_apply(&op.va_adjoint_apply(&x).unwrap()).unwrap();
        let err: f64 = round.iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum();
        prop_assert!(err.sqrt() <= 1e-10 * norm_sqr(&x).sqrt());
        // ‖Ax‖² = Σ s²ᵢ |(V_Aᴴx)ᵢ|²
        let coeffs = op.va_adjoint_apply(&x).unwrap();
        let spectral: f64 = coeffs.iter().zip(op.singular_values_squared()).map(|(c, s)| c.norm_sqr() * s).sum();
        let direct = norm_sqr(&op.forward(&x).unwrap());
        prop_assert!((spectral - direct).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn noiseless_ls_recovers_input(dims in dims_strategy(), seed in any::<u64>()) {
        let (op, mut rng) = setup(dims, seed, TrainingKind::RandomPhase);
        let x = random(&mut rng, dims.input_len());
        let y = op.forward(&x).unwrap();
        let sol = ls_estimate(&y, &op, 0.0).unwrap();
        // only the range of Aᴴ is identifiable; compare forward images
        let back = op.forward(&sol.lambda_hat.to_vec()).unwrap();
        let err: f64 = back.iter().zip(&y).map(|(a, b)| (a - b).norm_sqr()).sum();
        prop_assert!(err.sqrt() <= 1e-8 * norm_sqr(&y).sqrt().max(1e-300));
    }

    #[test]
    fn gm_posterior_limits(re in -4.0f64..4.0, im in -4.0f64..4.0, lambda0 in 0.0f64..0.95, rho in 0.1f64..5.0) {
        let prior = GmPrior::bernoulli_gaussian(lambda0, rho).unwrap();
        let r = C64::new(re, im);
        let dense = GmPrior::bernoulli_gaussian(0.0, rho).unwrap();
        let sharp = gm_denoise(r, 1e-10, &dense);
        prop_assert!((sharp.mean - r).norm() < 1e-6 * (1.0 + r.norm()));
        let flat = gm_denoise(r, 1e8, &prior);
        prop_assert!((flat.mean - prior.mean()).norm() < 1e-6);
        prop_assert!((flat.variance - prior.variance()).abs() < 1e-6 * prior.variance().max(1.0));
        let mid = gm_denoise(r, 0.7, &prior);
        prop_assert!(mid.variance >= 0.0 && mid.mean.re.is_finite() && mid.mean.im.is_finite());
    }

    #[test]
    fn output_denoiser_shrinks_variance(
        bits in 1u8..=6,
        step in 0.1f64..2.0,
        pr in -3.0f64..3.0,
        pi in -3.0f64..3.0,
        nu_p in 0.01f64..5.0,
        noise in 0.0f64..1.0,
        zr in -4.0f64..4.0,
        zi in -4.0f64..4.0,
    ) {
        let spec = QuantizerSpec::with_step(Resolution::Bits(bits), step).unwrap();
        let y = spec.quantize(C64::new(zr, zi));
        let post = quantized_output_denoise(&y, C64::new(pr, pi), nu_p, noise, &spec);
        // conditioning on a quantized observation never increases the
        // variance beyond the prior's
        prop_assert!(post.variance >= 0.0);
        prop_assert!(post.variance <= nu_p * (1.0 + 1e-9));
    }
}
