//! The structured measurement operator
//! `A = (F_Mᴴ E)ᵀ ⊗ (Sᵀ F_Q* ⊗ F_N)` with `S = I_Q`, its FFT fast paths and
//! the eigen-structure `AᴴA = V_A diag(s²) V_Aᴴ`.
//!
//! Vectors follow column-major `vec(·)`: the unknown `x = vec(Λ)` has
//! `Λ ∈ C^{QN×M}` so entry `(r, m)` sits at `m·QN + r`, and the
//! measurement `vec(Z)` has `Z ∈ C^{QN×P}` so entry `(r, p)` sits at
//! `p·QN + r`. Within a length-`QN` column, `r = q·N + n`.

use nalgebra::{DMatrixView, SymmetricEigen};
use rand::Rng;
use rustfft::FftPlanner;

use crate::fft::{Dft2, Direction, Fft1};
use crate::par::*;
use crate::{CMatrix, Error, Result, C64};

/// Rows (or columns) handled per parallel task.
const GROUP: usize = 16;

/// Array and training dimensions of one estimation problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OperatorDims {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub q1: usize,
    pub q2: usize,
    /// RIS phase configurations; also the circulant size.
    pub p: usize,
}

impl OperatorDims {
    pub fn n(&self) -> usize {
        self.n1 * self.n2
    }
    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }
    pub fn q(&self) -> usize {
        self.q1 * self.q2
    }
    /// Pilot slots per configuration (`T = Q` with `S = I_Q`).
    pub fn t(&self) -> usize {
        self.q()
    }
    pub fn qn(&self) -> usize {
        self.q() * self.n()
    }
    /// `NMQ`.
    pub fn input_len(&self) -> usize {
        self.qn() * self.m()
    }
    /// `PTN`.
    pub fn output_len(&self) -> usize {
        self.qn() * self.p
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.n1, self.n2, self.m1, self.m2, self.q1, self.q2, self.p];
        if all.iter().any(|&d| d == 0) {
            return Err(Error::InvalidConfig(format!("all dimensions must be positive: {self:?}")));
        }
        if self.p < self.m() {
            return Err(Error::TrainingTooShort {
                m: self.m(),
                p: self.p,
            });
        }
        Ok(())
    }
}

/// How the circulant generator of the training matrix is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingKind {
    /// Independent unit-modulus entries with uniform phase.
    #[default]
    RandomPhase,
    /// Zadoff-Chu sequence, ideal periodic autocorrelation.
    ZadoffChu,
}

/// Eigenvectors `U_E` of `E* Eᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Eigenbasis {
    /// `E* Eᵀ` is a multiple of the identity.
    Identity,
    /// `M = P`: `U_E = F_Pᴴ/√P`, applied by FFT.
    Circulant,
    /// General `M < P`: Hermitian Toeplitz Gram matrix, dense eigenvectors.
    Dense(CMatrix),
}

/// RIS training matrix `E ∈ C^{M×P}` whose transpose is the first `M`
/// columns of a `P×P` circulant, i.e. `E[m, p] = c[(p - m) mod P]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMatrix {
    pub m: usize,
    pub generator: Vec<C64>,
    /// Eigenvalues `λ_E` of `E* Eᵀ`, aligned with the columns of `basis`.
    pub eigvals: Vec<f64>,
    pub basis: Eigenbasis,
}

pub fn zadoff_chu(len: usize) -> Vec<C64> {
    let tau = len as f64;
    (0..len)
        .map(|k| {
            let k = k as f64;
            let phase = if len % 2 == 1 {
                std::f64::consts::PI * k * (k + 1.0) / tau
            } else {
                std::f64::consts::PI * k * k / tau
            };
            C64::from_polar(1.0, phase)
        })
        .collect()
}

pub fn build_training_matrix<R: Rng + ?Sized>(
    m: usize,
    p: usize,
    kind: TrainingKind,
    rng: &mut R,
) -> Result<TrainingMatrix> {
    if m == 0 {
        return Err(Error::InvalidConfig("RIS size must be positive".into()));
    }
    if p < m {
        return Err(Error::TrainingTooShort { m, p });
    }
    let generator = match kind {
        TrainingKind::RandomPhase => (0..p)
            .map(|_| C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect(),
        TrainingKind::ZadoffChu => zadoff_chu(p),
    };
    TrainingMatrix::from_generator(m, generator)
}

impl TrainingMatrix {
    pub fn from_generator(m: usize, generator: Vec<C64>) -> Result<Self> {
        let p = generator.len();
        if m == 0 {
            return Err(Error::InvalidConfig("RIS size must be positive".into()));
        }
        if p < m {
            return Err(Error::TrainingTooShort { m, p });
        }
        let mut tm = TrainingMatrix {
            m,
            generator,
            eigvals: Vec::new(),
            basis: Eigenbasis::Identity,
        };
        tm.decompose();
        Ok(tm)
    }

    pub fn p(&self) -> usize {
        self.generator.len()
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        let p = self.p();
        self.generator[(col + p - row % p) % p]
    }

    /// Dense `E` (`M × P`).
    pub fn dense(&self) -> CMatrix {
        CMatrix::from_fn(self.m, self.p(), |r, c| self.entry(r, c))
    }

    /// Periodic autocorrelation `ρ(d) = Σ_k conj(c[k]) c[k + d]`.
    fn autocorrelation(&self, lag: isize) -> C64 {
        let p = self.p() as isize;
        let c = &self.generator;
        (0..p)
            .map(|k| c[k as usize].conj() * c[(k + lag).rem_euclid(p) as usize])
            .sum()
    }

    /// `E* Eᵀ`, Hermitian Toeplitz with `[a, b] = ρ(a - b)`.
    pub fn gram(&self) -> CMatrix {
        let m = self.m as isize;
        let lags: Vec<C64> = (-(m - 1)..m).map(|d| self.autocorrelation(d)).collect();
        CMatrix::from_fn(self.m, self.m, |a, b| {
            lags[(a as isize - b as isize + m - 1) as usize]
        })
    }

    fn decompose(&mut self) {
        let p = self.p();
        if self.m == p {
            let mut spec = self.generator.clone();
            FftPlanner::new()
                .plan_fft_forward(p)
                .process(&mut spec);
            self.eigvals = spec.iter().map(|c| c.norm_sqr()).collect();
            self.basis = Eigenbasis::Circulant;
            return;
        }
        let gram = self.gram();
        let scale = gram[(0, 0)].re.abs().max(f64::MIN_POSITIVE);
        let off_diag = (0..self.m)
            .flat_map(|a| (0..self.m).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| gram[(a, b)].norm())
            .fold(0.0, f64::max);
        if off_diag <= 1e-9 * scale {
            self.eigvals = (0..self.m).map(|a| gram[(a, a)].re).collect();
            self.basis = Eigenbasis::Identity;
            return;
        }
        let eig = SymmetricEigen::new(gram);
        self.eigvals = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        self.basis = Eigenbasis::Dense(eig.eigenvectors);
    }

    /// Dense `U_E` (`M × M`, unitary).
    pub fn basis_matrix(&self) -> CMatrix {
        match &self.basis {
            Eigenbasis::Identity => CMatrix::identity(self.m, self.m),
            Eigenbasis::Circulant => {
                let p = self.p();
                let s = 1.0 / (p as f64).sqrt();
                CMatrix::from_fn(p, p, |a, b| {
                    C64::from_polar(
                        s,
                        2.0 * std::f64::consts::PI * ((a * b) % p) as f64 / p as f64,
                    )
                })
            }
            Eigenbasis::Dense(u) => u.clone(),
        }
    }
}

/// Measurement operator with FFT fast paths.
#[derive(Debug, Clone)]
pub struct StructuredOperator {
    dims: OperatorDims,
    training: TrainingMatrix,
    ris_dft: Dft2,
    bs_dft: Dft2,
    user_dft: Dft2,
    conv: Fft1,
    /// Unnormalised DFT of the generator.
    spectrum: Vec<C64>,
    sv2: Vec<f64>,
}

impl StructuredOperator {
    pub fn new(dims: OperatorDims, training: TrainingMatrix) -> Result<Self> {
        dims.validate()?;
        if training.m != dims.m() {
            return Err(Error::dims("training matrix rows", dims.m(), training.m));
        }
        if training.p() != dims.p {
            return Err(Error::dims("training matrix columns", dims.p, training.p()));
        }
        let mut planner = FftPlanner::new();
        let conv = Fft1::new(&mut planner, dims.p);
        let mut spectrum = training.generator.clone();
        conv.process(Direction::Forward, &mut spectrum, &mut Vec::new());
        let qn = dims.qn();
        let scale = dims.input_len() as f64;
        let sv2 = training
            .eigvals
            .iter()
            .flat_map(|&l| std::iter::repeat_n(scale * l, qn))
            .collect();
        Ok(Self {
            dims,
            ris_dft: Dft2::new(&mut planner, dims.m1, dims.m2),
            bs_dft: Dft2::new(&mut planner, dims.n1, dims.n2),
            user_dft: Dft2::new(&mut planner, dims.q1, dims.q2),
            conv,
            spectrum,
            sv2,
            training,
        })
    }

    pub fn dims(&self) -> &OperatorDims {
        &self.dims
    }

    pub fn training(&self) -> &TrainingMatrix {
        &self.training
    }

    /// Diagonal of `S_AᴴS_A`: `NMQ·λ_E(i)`, each repeated `NQ` times.
    pub fn singular_values_squared(&self) -> &[f64] {
        &self.sv2
    }

    /// `‖A‖_F² = Σ s²`.
    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.sv2.iter().sum()
    }

    fn check(&self, context: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::dims(context, expected, got));
        }
        Ok(())
    }

    /// `A·x`.
    pub fn forward(&self, x: &[C64]) -> Result<Vec<C64>> {
        self.check("forward input", self.dims.input_len(), x.len())?;
        let (qn, m, p) = (self.dims.qn(), self.dims.m(), self.dims.p);

        // Rows of Λ, then Λ F_Mᴴ via a 2-D inverse DFT per row.
        let mut rows = gather_rows(x, qn, m);
        rows.par_chunks_mut(GROUP * m)
            .for_each(|g| self.ris_dft.apply(Direction::Inverse, g));

        // (·)E as circular convolution with the generator, keeping P taps.
        let mut conv = vec![C64::new(0.0, 0.0); qn * p];
        for (dst, src) in conv.chunks_exact_mut(p).zip(rows.chunks_exact(m)) {
            dst[..m].copy_from_slice(src);
        }
        let inv_p = 1.0 / p as f64;
        conv.par_chunks_mut(GROUP * p).for_each(|g| {
            let mut scratch = Vec::new();
            self.conv.process(Direction::Forward, g, &mut scratch);
            for chunk in g.chunks_exact_mut(p) {
                for (v, s) in chunk.iter_mut().zip(&self.spectrum) {
                    *v *= s * inv_p;
                }
            }
            self.conv.process(Direction::Inverse, g, &mut scratch);
        });

        // Left factor (F_Q* ⊗ F_N) on each of the P columns.
        let mut out = scatter_rows(&conv, qn, p);
        out.par_chunks_mut(GROUP * qn)
            .for_each(|g| self.left_factor(g, false));
        Ok(out)
    }

    /// `Aᴴ·y`.
    pub fn adjoint(&self, y: &[C64]) -> Result<Vec<C64>> {
        self.check("adjoint input", self.dims.output_len(), y.len())?;
        let (qn, m, p) = (self.dims.qn(), self.dims.m(), self.dims.p);

        let mut cols = y.to_vec();
        cols.par_chunks_mut(GROUP * qn)
            .for_each(|g| self.left_factor(g, true));

        // (·)Eᴴ as circular cross-correlation, first M lags.
        let mut conv = gather_rows(&cols, qn, p);
        let inv_p = 1.0 / p as f64;
        conv.par_chunks_mut(GROUP * p).for_each(|g| {
            let mut scratch = Vec::new();
            self.conv.process(Direction::Forward, g, &mut scratch);
            for chunk in g.chunks_exact_mut(p) {
                for (v, s) in chunk.iter_mut().zip(&self.spectrum) {
                    *v *= s.conj() * inv_p;
                }
            }
            self.conv.process(Direction::Inverse, g, &mut scratch);
        });
        let mut rows = vec![C64::new(0.0, 0.0); qn * m];
        for (dst, src) in rows.chunks_exact_mut(m).zip(conv.chunks_exact(p)) {
            dst.copy_from_slice(&src[..m]);
        }
        rows.par_chunks_mut(GROUP * m)
            .for_each(|g| self.ris_dft.apply(Direction::Forward, g));
        Ok(scatter_rows(&rows, qn, m))
    }

    /// Applies `F_Q* ⊗ F_N` (or its adjoint `F_Q ⊗ F_N*`) to consecutive
    /// length-`QN` columns.
    ///
    /// Each column is permuted from `(N, Q)` to `(Q, N)` order, transformed
    /// over the user grid, permuted back and transformed over the BS grid.
    fn left_factor(&self, cols: &mut [C64], adjoint: bool) {
        let (n, q) = (self.dims.n(), self.dims.q());
        let (user_dir, bs_dir) = if adjoint {
            (Direction::Forward, Direction::Inverse)
        } else {
            (Direction::Inverse, Direction::Forward)
        };
        if q > 1 {
            let mut tmp = vec![C64::new(0.0, 0.0); cols.len()];
            for (col, t) in cols.chunks_exact(n * q).zip(tmp.chunks_exact_mut(n * q)) {
                for qi in 0..q {
                    for ni in 0..n {
                        t[ni * q + qi] = col[qi * n + ni];
                    }
                }
            }
            self.user_dft.apply(user_dir, &mut tmp);
            // pilot matrix Sᵀ is the identity here
            for (col, t) in cols.chunks_exact_mut(n * q).zip(tmp.chunks_exact(n * q)) {
                for qi in 0..q {
                    for ni in 0..n {
                        col[qi * n + ni] = t[ni * q + qi];
                    }
                }
            }
        }
        self.bs_dft.apply(bs_dir, cols);
    }

    fn apply_basis(&self, rows: &mut [C64], adjoint: bool) {
        let m = self.dims.m();
        match &self.training.basis {
            Eigenbasis::Identity => {}
            Eigenbasis::Circulant => {
                let dir = if adjoint {
                    Direction::Forward
                } else {
                    Direction::Inverse
                };
                self.conv.process(dir, rows, &mut Vec::new());
                let s = 1.0 / (m as f64).sqrt();
                rows.iter_mut().for_each(|v| *v *= s);
            }
            Eigenbasis::Dense(u) => {
                let count = rows.len() / m;
                let view = DMatrixView::from_slice(rows, m, count);
                let prod = if adjoint {
                    u.ad_mul(&view)
                } else {
                    u * view
                };
                rows.copy_from_slice(prod.as_slice());
            }
        }
    }

    /// `V_A·v` with `V_A = (F_M U_E/√M) ⊗ I_{NQ}`.
    pub fn va_apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check("V_A input", self.dims.input_len(), v.len())?;
        let (qn, m) = (self.dims.qn(), self.dims.m());
        let mut rows = gather_rows(v, qn, m);
        let s = 1.0 / (m as f64).sqrt();
        rows.par_chunks_mut(GROUP * m).for_each(|g| {
            self.apply_basis(g, false);
            self.ris_dft.apply(Direction::Forward, g);
            g.iter_mut().for_each(|c| *c *= s);
        });
        Ok(scatter_rows(&rows, qn, m))
    }

    /// `V_Aᴴ·v`.
    pub fn va_adjoint_apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        self.check("V_A^H input", self.dims.input_len(), v.len())?;
        let (qn, m) = (self.dims.qn(), self.dims.m());
        let mut rows = gather_rows(v, qn, m);
        let s = 1.0 / (m as f64).sqrt();
        rows.par_chunks_mut(GROUP * m).for_each(|g| {
            self.ris_dft.apply(Direction::Inverse, g);
            g.iter_mut().for_each(|c| *c *= s);
            self.apply_basis(g, true);
        });
        Ok(scatter_rows(&rows, qn, m))
    }

    /// `V_A (diag(weights)) V_Aᴴ v`.
    pub fn va_filter(&self, v: &[C64], weights: &[f64]) -> Result<Vec<C64>> {
        self.check("filter weights", self.dims.input_len(), weights.len())?;
        let mut t = self.va_adjoint_apply(v)?;
        t.iter_mut().zip(weights).for_each(|(c, w)| *c *= *w);
        self.va_apply(&t)
    }
}

/// Column-major `(rows × cols)` data to row-contiguous layout.
fn gather_rows(x: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); rows * cols];
    for (c, col) in x.chunks_exact(rows).enumerate() {
        for (r, v) in col.iter().enumerate() {
            out[r * cols + c] = *v;
        }
    }
    out
}

/// Inverse of [`gather_rows`].
fn scatter_rows(rows_data: &[C64], rows: usize, cols: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); rows * cols];
    for (r, row) in rows_data.chunks_exact(cols).enumerate() {
        for (c, v) in row.iter().enumerate() {
            out[c * rows + r] = *v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_model::complex_gaussian;
    use crate::oracle;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims(n1: usize, n2: usize, m1: usize, m2: usize, q1: usize, q2: usize, p: usize) -> OperatorDims {
        OperatorDims {
            n1,
            n2,
            m1,
            m2,
            q1,
            q2,
            p,
        }
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
        (0..n).map(|_| complex_gaussian(rng)).collect()
    }

    fn rel(a: &[C64], b: &[C64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
        (num / den.max(1e-300)).sqrt()
    }

    fn op(d: OperatorDims, seed: u64) -> StructuredOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tm = build_training_matrix(d.m(), d.p, TrainingKind::RandomPhase, &mut rng).unwrap();
        StructuredOperator::new(d, tm).unwrap()
    }

    #[test]
    fn training_matrix_is_circulant_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tm = build_training_matrix(3, 7, TrainingKind::RandomPhase, &mut rng).unwrap();
        let e = tm.dense();
        for r in 0..3 {
            for c in 0..7 {
                assert!((e[(r, c)].norm() - 1.0).abs() < 1e-14);
                // Eᵀ[c, r] = circulant[c, r] = gen[(c - r) mod P]
                assert_eq!(e[(r, c)], tm.generator[(c + 7 - r) % 7]);
            }
        }
        assert!(build_training_matrix(8, 4, TrainingKind::RandomPhase, &mut rng).is_err());
    }

    #[test]
    fn square_circulant_eigenvalues_match_dense_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let tm = build_training_matrix(8, 8, TrainingKind::RandomPhase, &mut rng).unwrap();
        assert_eq!(tm.basis, Eigenbasis::Circulant);
        let e = tm.dense();
        let gram = e.map(|c| c.conj()) * e.transpose();
        let mut dense: Vec<f64> = SymmetricEigen::new(gram.clone()).eigenvalues.iter().copied().collect();
        let mut fast = tm.eigvals.clone();
        dense.sort_by(f64::total_cmp);
        fast.sort_by(f64::total_cmp);
        for (a, b) in dense.iter().zip(&fast) {
            assert!((a - b).abs() < 1e-8 * b.max(1.0));
        }
        // U_E diag(λ) U_Eᴴ reconstructs the Gram matrix
        let u = tm.basis_matrix();
        let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            8,
            tm.eigvals.iter().map(|&l| C64::from(l)),
        ));
        let rec = &u * diag * u.adjoint();
        assert!((rec - gram).norm() < 1e-10);
    }

    #[test]
    fn single_element_ris_gram_is_p() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tm = build_training_matrix(1, 9, TrainingKind::RandomPhase, &mut rng).unwrap();
        assert_eq!(tm.eigvals.len(), 1);
        assert!((tm.eigvals[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn training_matrix_deterministic_per_seed() {
        let a = build_training_matrix(4, 8, TrainingKind::RandomPhase, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = build_training_matrix(4, 8, TrainingKind::RandomPhase, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zadoff_chu_gives_identity_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tm = build_training_matrix(4, 16, TrainingKind::ZadoffChu, &mut rng).unwrap();
        assert_eq!(tm.basis, Eigenbasis::Identity);
        assert!(tm.eigvals.iter().all(|&l| (l - 16.0).abs() < 1e-9));
    }

    #[test]
    fn dense_basis_diagonalises_toeplitz_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let tm = build_training_matrix(6, 13, TrainingKind::RandomPhase, &mut rng).unwrap();
        assert!(matches!(tm.basis, Eigenbasis::Dense(_)));
        let e = tm.dense();
        let gram = e.map(|c| c.conj()) * e.transpose();
        assert!((tm.gram() - &gram).norm() < 1e-10);
        let u = tm.basis_matrix();
        let d = u.adjoint() * gram * &u;
        for a in 0..6 {
            for b in 0..6 {
                let want = if a == b { tm.eigvals[a] } else { 0.0 };
                assert!((d[(a, b)] - C64::from(want)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn forward_and_adjoint_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in [
            dims(2, 2, 2, 2, 1, 1, 8),
            dims(2, 1, 2, 2, 1, 2, 4),
            dims(3, 2, 1, 3, 2, 1, 5),
        ] {
            let o = op(d, 4);
            let a = oracle::dense_operator(&d, o.training());
            for _ in 0..5 {
                let x = random_vec(&mut rng, d.input_len());
                let want: Vec<C64> = (&a * nalgebra::DVector::from_vec(x.clone())).iter().copied().collect();
                assert!(rel(&o.forward(&x).unwrap(), &want) < 1e-10);
                let y = random_vec(&mut rng, d.output_len());
                let want: Vec<C64> = (a.adjoint() * nalgebra::DVector::from_vec(y.clone())).iter().copied().collect();
                assert!(rel(&o.adjoint(&y).unwrap(), &want) < 1e-10);
            }
            // unit vectors pick out dense columns
            let k = d.input_len() / 2;
            let mut e = vec![C64::new(0.0, 0.0); d.input_len()];
            e[k] = C64::new(1.0, 0.0);
            let col: Vec<C64> = a.column(k).iter().copied().collect();
            assert!(rel(&o.forward(&e).unwrap(), &col) < 1e-10);
        }
    }

    #[test]
    fn zero_inputs_give_zero_outputs_and_lengths_are_checked() {
        let d = dims(2, 2, 2, 1, 1, 2, 4);
        let o = op(d, 1);
        let zx = vec![C64::new(0.0, 0.0); d.input_len()];
        let zy = vec![C64::new(0.0, 0.0); d.output_len()];
        assert!(o.forward(&zx).unwrap().iter().all(|c| c.norm() == 0.0));
        assert!(o.adjoint(&zy).unwrap().iter().all(|c| c.norm() == 0.0));
        assert!(o.va_apply(&zx).unwrap().iter().all(|c| c.norm() == 0.0));
        assert!(o.forward(&zy).is_err());
        assert!(o.adjoint(&zx).is_err());
        assert!(o.va_adjoint_apply(&zy).is_err());
    }

    #[test]
    fn va_is_unitary_and_diagonalises_gram() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in [dims(2, 2, 2, 2, 1, 1, 4), dims(2, 1, 2, 2, 2, 1, 10), dims(1, 2, 3, 1, 1, 1, 3)] {
            let o = op(d, 7);
            let v = random_vec(&mut rng, d.input_len());
            let back = o.va_adjoint_apply(&o.va_apply(&v).unwrap()).unwrap();
            assert!(rel(&back, &v) < 1e-10);
            let a = oracle::dense_operator(&d, o.training());
            let va = oracle::dense_va(&d, o.training());
            let fast: Vec<C64> = o.va_apply(&v).unwrap();
            let want: Vec<C64> = (&va * nalgebra::DVector::from_vec(v.clone())).iter().copied().collect();
            assert!(rel(&fast, &want) < 1e-10);
            let gram = a.adjoint() * &a;
            let s2 = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                d.input_len(),
                o.singular_values_squared().iter().map(|&s| C64::from(s)),
            ));
            let rec = &va * s2 * va.adjoint();
            assert!((rec - &gram).norm() / gram.norm() < 1e-8);
            let trace: f64 = (0..d.input_len()).map(|i| gram[(i, i)].re).sum();
            assert!((o.frobenius_norm_sqr() - trace).abs() < 1e-8 * trace);
        }
    }

    #[test]
    fn single_element_ris_has_flat_spectrum() {
        let d = dims(2, 2, 1, 1, 1, 2, 6);
        let o = op(d, 3);
        let want = (d.qn() * d.p) as f64;
        assert!(o.singular_values_squared().iter().all(|&s| (s - want).abs() < 1e-9));
    }

    #[test]
    fn quadratic_form_is_real_nonnegative() {
        let d = dims(2, 2, 2, 2, 1, 2, 5);
        let o = op(d, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_vec(&mut rng, d.input_len());
        let aha = o.adjoint(&o.forward(&x).unwrap()).unwrap();
        let ip: C64 = x.iter().zip(&aha).map(|(a, b)| a.conj() * b).sum();
        assert!(ip.re > 0.0 && ip.im.abs() < 1e-9 * ip.re);
    }
}
