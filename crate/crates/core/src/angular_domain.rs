//! DFT dictionaries, the virtual angular domain and the lossless
//! compression of the Kronecker-structured angular channel.
//!
//! All DFT matrices are unnormalised, `U_n[a, b] = exp(-j2πab/n)`, so
//! `FᴴF = n·I`.

use std::f64::consts::PI;

use crate::channel_model::{CascadedChannel, ChannelPair, UpaGeometry};
use crate::{CMatrix, Error, Result, C64};

/// Unnormalised `n`-point DFT matrix.
pub fn dft_matrix(n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |a, b| {
        C64::from_polar(1.0, -2.0 * PI * ((a * b) % n) as f64 / n as f64)
    })
}

/// `U_{dim1} ⊗ U_{dim2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DftDictionary {
    pub dim1: usize,
    pub dim2: usize,
    pub matrix: CMatrix,
}

impl DftDictionary {
    pub fn len(&self) -> usize {
        self.dim1 * self.dim2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn build_dictionary(dim1: usize, dim2: usize) -> DftDictionary {
    DftDictionary {
        dim1,
        dim2,
        matrix: dft_matrix(dim1).kronecker(&dft_matrix(dim2)),
    }
}

pub fn dictionary_for(geom: &UpaGeometry) -> DftDictionary {
    build_dictionary(geom.vertical, geom.horizontal)
}

/// Dictionaries of the BS (`F_N`), RIS (`F_M`) and user (`F_Q`) arrays.
#[derive(Debug, Clone)]
pub struct AngularDictionaries {
    pub bs: DftDictionary,
    pub ris: DftDictionary,
    pub user: DftDictionary,
}

impl AngularDictionaries {
    pub fn new(bs: &UpaGeometry, ris: &UpaGeometry, user: &UpaGeometry) -> Self {
        Self {
            bs: dictionary_for(bs),
            ris: dictionary_for(ris),
            user: dictionary_for(user),
        }
    }

    /// `F_Q* ⊗ F_N`, the left factor of the compressed model.
    pub fn left_transform(&self) -> CMatrix {
        self.user.matrix.map(|c| c.conj()).kronecker(&self.bs.matrix)
    }
}

/// Partition of the `M²` rows of `F_Mᵀ ⋄ F_Mᴴ` into the `M` classes of
/// identical rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressionMap {
    pub m1: usize,
    pub m2: usize,
    /// For row `n` of the Khatri-Rao product, the index `i < M` of the
    /// identical row in the first block.
    pub row_of: Vec<usize>,
    /// Inverse image `S_i` of each class, ascending.
    pub sets: Vec<Vec<usize>>,
}

impl CompressionMap {
    pub fn m(&self) -> usize {
        self.m1 * self.m2
    }
}

/// Largest `M` for which the map is cross-checked by literal row comparison.
pub const LITERAL_CHECK_LIMIT: usize = 64;

/// Builds the class map by index arithmetic.
///
/// Row `n = a·M + b` of `F_Mᵀ ⋄ F_Mᴴ` has entries `F_M[m, a]·conj(F_M[m, b])`,
/// which equals the first-block row indexed by the component-wise modular
/// difference `b - a` of the 2-D indices `(a1, a2)` and `(b1, b2)`.
pub fn build_compression_map(m1: usize, m2: usize) -> Result<CompressionMap> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::InvalidConfig("RIS dimensions must be positive".into()));
    }
    let m = m1 * m2;
    let mut row_of = Vec::with_capacity(m * m);
    for a in 0..m {
        let (a1, a2) = (a / m2, a % m2);
        for b in 0..m {
            let (b1, b2) = (b / m2, b % m2);
            let i1 = (b1 + m1 - a1) % m1;
            let i2 = (b2 + m2 - a2) % m2;
            row_of.push(i1 * m2 + i2);
        }
    }
    let mut sets = vec![Vec::new(); m];
    for (n, &i) in row_of.iter().enumerate() {
        sets[i].push(n);
    }
    let map = CompressionMap {
        m1,
        m2,
        row_of,
        sets,
    };
    if m <= LITERAL_CHECK_LIMIT {
        validate_literally(&map)?;
    }
    Ok(map)
}

/// Rows of `F_Mᵀ ⋄ F_Mᴴ` (an `M² × M` matrix).
pub fn khatri_rao_rows(m1: usize, m2: usize) -> CMatrix {
    let f = build_dictionary(m1, m2).matrix;
    let m = m1 * m2;
    let ft = f.transpose();
    let fh = f.adjoint();
    CMatrix::from_fn(m * m, m, |row, col| ft[(row / m, col)] * fh[(row % m, col)])
}

/// Literal row comparison of the Khatri-Rao product against `map`.
pub fn validate_literally(map: &CompressionMap) -> Result<()> {
    let kr = khatri_rao_rows(map.m1, map.m2);
    let m = map.m();
    let tol = 1e-9;
    for (n, &i) in map.row_of.iter().enumerate() {
        let same = (0..m).all(|c| (kr[(n, c)] - kr[(i, c)]).norm() < tol);
        if !same {
            return Err(Error::CompressionMapInvalid { row: n });
        }
    }
    // the first M rows must be pairwise distinct
    for i in 0..m {
        for k in (i + 1)..m {
            if (0..m).all(|c| (kr[(i, c)] - kr[(k, c)]).norm() < tol) {
                return Err(Error::CompressionMapInvalid { row: k });
            }
        }
    }
    Ok(())
}

/// Compressed angular channel `Λ ∈ C^{QN×M}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedAngularMatrix {
    pub lambda: CMatrix,
}

impl CompressedAngularMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            lambda: CMatrix::zeros(rows, cols),
        }
    }

    /// Column-major `vec(Λ)`.
    pub fn to_vec(&self) -> Vec<C64> {
        self.lambda.as_slice().to_vec()
    }

    pub fn from_vec(rows: usize, cols: usize, x: &[C64]) -> Result<Self> {
        if x.len() != rows * cols {
            return Err(Error::dims("Λ from vector", rows * cols, x.len()));
        }
        Ok(Self {
            lambda: CMatrix::from_column_slice(rows, cols, x),
        })
    }
}

/// `Λ(:, i) = Σ_{n∈S_i} X(:, n)` for `X ∈ C^{QN×M²}`.
pub fn compress(kron_sparse: &CMatrix, map: &CompressionMap) -> Result<CompressedAngularMatrix> {
    let m = map.m();
    if kron_sparse.ncols() != m * m {
        return Err(Error::dims("compress (columns)", m * m, kron_sparse.ncols()));
    }
    let mut lambda = CMatrix::zeros(kron_sparse.nrows(), m);
    for (n, &i) in map.row_of.iter().enumerate() {
        let src = kron_sparse.column(n);
        let mut dst = lambda.column_mut(i);
        dst += src;
    }
    Ok(CompressedAngularMatrix { lambda })
}

/// `H̃_br = F_Nᴴ H_br F_M / (NM)`, `H̃_ru = F_Mᴴ H_ru F_Q / (MQ)`.
pub fn angular_decompose(pair: &ChannelPair, dicts: &AngularDictionaries) -> (CMatrix, CMatrix) {
    let (fn_, fm, fq) = (&dicts.bs.matrix, &dicts.ris.matrix, &dicts.user.matrix);
    let (n, m, q) = (fn_.nrows() as f64, fm.nrows() as f64, fq.nrows() as f64);
    let hb = fn_.adjoint() * &pair.h_br * fm / C64::from(n * m);
    let hr = fm.adjoint() * &pair.h_ru * fq / C64::from(m * q);
    (hb, hr)
}

/// `H_br = F_N H̃_br F_Mᴴ`, `H_ru = F_M H̃_ru F_Qᴴ`.
pub fn angular_compose(
    h_br: &CMatrix,
    h_ru: &CMatrix,
    dicts: &AngularDictionaries,
) -> (CMatrix, CMatrix) {
    let (fn_, fm, fq) = (&dicts.bs.matrix, &dicts.ris.matrix, &dicts.user.matrix);
    (fn_ * h_br * fm.adjoint(), fm * h_ru * fq.adjoint())
}

/// `Ĝ = (F_Q* ⊗ F_N) Λ F_Mᴴ`, the cascaded channel whose noiseless
/// measurements `ĜE` coincide with those of the compressed model.
pub fn reconstruct_cascaded(
    lambda: &CompressedAngularMatrix,
    dicts: &AngularDictionaries,
) -> Result<CascadedChannel> {
    let k = dicts.left_transform();
    let fm = &dicts.ris.matrix;
    if lambda.lambda.nrows() != k.ncols() {
        return Err(Error::dims("reconstruct (rows)", k.ncols(), lambda.lambda.nrows()));
    }
    if lambda.lambda.ncols() != fm.nrows() {
        return Err(Error::dims("reconstruct (cols)", fm.nrows(), lambda.lambda.ncols()));
    }
    Ok(CascadedChannel {
        g: k * &lambda.lambda * fm.adjoint(),
    })
}

/// Compressed angular matrix of a cascaded channel.
///
/// `F_Q* ⊗ F_N` and `F_M` are invertible, so the least-squares projection of
/// the noiseless measurements onto the compressed model is exact and equals
/// `Λ = (F_Q* ⊗ F_N)ᴴ G F_M / (QNM)`.
pub fn project_cascaded(
    g: &CascadedChannel,
    dicts: &AngularDictionaries,
) -> Result<CompressedAngularMatrix> {
    let k = dicts.left_transform();
    let fm = &dicts.ris.matrix;
    if g.g.nrows() != k.nrows() {
        return Err(Error::dims("project (rows)", k.nrows(), g.g.nrows()));
    }
    if g.g.ncols() != fm.nrows() {
        return Err(Error::dims("project (cols)", fm.nrows(), g.g.ncols()));
    }
    let scale = (k.nrows() * fm.nrows()) as f64;
    Ok(CompressedAngularMatrix {
        lambda: k.adjoint() * &g.g * fm / C64::from(scale),
    })
}
