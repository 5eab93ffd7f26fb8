//! Ridge-regularised least squares on the compressed model, treating the
//! quantized outputs as linear measurements.

use crate::angular_domain::CompressedAngularMatrix;
use crate::linear_operator::StructuredOperator;
use crate::{norm_sqr, Error, Result, C64};

#[derive(Debug, Clone)]
pub struct LsSolution {
    pub lambda_hat: CompressedAngularMatrix,
    /// `‖y - A x̂‖₂`.
    pub residual_norm: f64,
}

/// `x̂ = V_A (diag(s²) + ridge·I)⁺ V_Aᴴ Aᴴ y`.
///
/// Directions with `s² + ridge = 0` are dropped (pseudo-inverse); if every
/// direction vanishes the problem has no solution.
pub fn ls_estimate(y: &[C64], op: &StructuredOperator, ridge: f64) -> Result<LsSolution> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge must be finite and non-negative, got {ridge}")));
    }
    let weights: Vec<f64> = op
        .singular_values_squared()
        .iter()
        .map(|&s| {
            let d = s + ridge;
            if d > 0.0 {
                1.0 / d
            } else {
                0.0
            }
        })
        .collect();
    if weights.iter().all(|&w| w == 0.0) {
        return Err(Error::SingularNormalEquations);
    }
    let x = op.va_filter(&op.adjoint(y)?, &weights)?;
    let fit = op.forward(&x)?;
    let residual: Vec<C64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let dims = op.dims();
    Ok(LsSolution {
        lambda_hat: CompressedAngularMatrix::from_vec(dims.qn(), dims.m(), &x)?,
        residual_norm: norm_sqr(&residual).sqrt(),
    })
}
