//! UPA steering vectors, Saleh-Valenzuela multipath channels and the
//! Khatri-Rao cascaded channel.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{CMatrix, Error, Result, C64};

/// Uniform planar array with `vertical × horizontal` elements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpaGeometry {
    pub vertical: usize,
    pub horizontal: usize,
    /// Element spacing over carrier wavelength, `d/λc`.
    pub spacing: f64,
}

impl UpaGeometry {
    pub fn new(vertical: usize, horizontal: usize) -> Result<Self> {
        Self::with_spacing(vertical, horizontal, 0.5)
    }

    pub fn with_spacing(vertical: usize, horizontal: usize, spacing: f64) -> Result<Self> {
        if vertical == 0 || horizontal == 0 {
            return Err(Error::InvalidConfig(format!(
                "UPA dimensions must be positive, got {vertical}x{horizontal}"
            )));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "element spacing must be positive, got {spacing}"
            )));
        }
        Ok(Self {
            vertical,
            horizontal,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.vertical * self.horizontal
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `z = (d/λc)·cos(zenith)`, `x = (d/λc)·sin(zenith)·cos(azimuth)`.
pub fn spatial_frequencies(zenith: f64, azimuth: f64, spacing: f64) -> (f64, f64) {
    (spacing * zenith.cos(), spacing * zenith.sin() * azimuth.cos())
}

/// One-dimensional steering vector `[1, e^{-j2πu}, …, e^{-j2π(k-1)u}]`.
pub fn steering_1d(len: usize, u: f64) -> Vec<C64> {
    (0..len)
        .map(|n| {
            // reduce the phase modulo one turn before scaling to keep
            // on-grid vectors bit-close to the DFT columns
            let turns = (u * n as f64).rem_euclid(1.0);
            C64::from_polar(1.0, -2.0 * PI * turns)
        })
        .collect()
}

/// UPA response `a_{k1}(z) ⊗ a_{k2}(x)`.
pub fn steering_vector(geom: &UpaGeometry, z: f64, x: f64) -> DVector<C64> {
    let a = steering_1d(geom.vertical, z);
    let b = steering_1d(geom.horizontal, x);
    DVector::from_iterator(
        geom.len(),
        a.iter().flat_map(|va| b.iter().map(move |vb| va * vb)),
    )
}

/// A propagation direction, physical angles plus the spatial frequencies
/// actually used to build the steering vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub zenith: f64,
    pub azimuth: f64,
    pub freq_vertical: f64,
    pub freq_horizontal: f64,
}

impl Direction {
    pub fn from_angles(zenith: f64, azimuth: f64, spacing: f64) -> Self {
        let (z, x) = spatial_frequencies(zenith, azimuth, spacing);
        Self {
            zenith,
            azimuth,
            freq_vertical: z,
            freq_horizontal: x,
        }
    }

    /// Moves the spatial frequencies onto the DFT grid of `geom`.
    pub fn snapped(self, geom: &UpaGeometry) -> Self {
        let snap = |u: f64, k: usize| (u * k as f64).round() / k as f64;
        Self {
            freq_vertical: snap(self.freq_vertical, geom.vertical),
            freq_horizontal: snap(self.freq_horizontal, geom.horizontal),
            ..self
        }
    }

    pub fn response(&self, geom: &UpaGeometry) -> DVector<C64> {
        steering_vector(geom, self.freq_vertical, self.freq_horizontal)
    }
}

/// One multipath component: complex gain, arrival and departure direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: C64,
    pub arrival: Direction,
    pub departure: Direction,
}

/// Array geometries and multipath settings for channel synthesis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub bs: UpaGeometry,
    pub ris: UpaGeometry,
    pub user: UpaGeometry,
    /// Paths between RIS and BS (`L`).
    pub paths_br: usize,
    /// Paths between user and RIS (`J`).
    pub paths_ru: usize,
    /// Scale gains by `1/√L` (resp. `1/√J`).
    pub normalize_gains: bool,
    /// Snap every spatial frequency to the DFT grid.
    pub on_grid: bool,
}

#[derive(Debug, Clone)]
pub struct ChannelPair {
    /// RIS → BS channel, `N × M`.
    pub h_br: CMatrix,
    /// user → RIS channel, `M × Q`.
    pub h_ru: CMatrix,
    pub paths_br: Vec<PathParams>,
    pub paths_ru: Vec<PathParams>,
}

/// Ground-truth cascaded channel `G = H_ruᵀ ⋄ H_br`, `(QN) × M`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedChannel {
    pub g: CMatrix,
}

/// `Σ gain · a_rx(arrival) · a_tx(departure)ᴴ`.
pub fn assemble_channel(rx: &UpaGeometry, tx: &UpaGeometry, paths: &[PathParams]) -> CMatrix {
    let mut h = CMatrix::zeros(rx.len(), tx.len());
    for path in paths {
        let a = path.arrival.response(rx);
        let d = path.departure.response(tx);
        h += (a * path.gain) * d.adjoint();
    }
    h
}

/// Draws a standard circularly-symmetric complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn draw_paths<R: Rng + ?Sized>(
    rng: &mut R,
    count: usize,
    rx: &UpaGeometry,
    tx: &UpaGeometry,
    normalize: bool,
    on_grid: bool,
) -> Vec<PathParams> {
    let scale = if normalize {
        1.0 / (count as f64).sqrt()
    } else {
        1.0
    };
    (0..count)
        .map(|_| {
            let mut direction = |geom: &UpaGeometry| {
                let zenith = rng.random_range(-PI / 2.0..PI / 2.0);
                let azimuth = rng.random_range(-PI..PI);
                let d = Direction::from_angles(zenith, azimuth, geom.spacing);
                if on_grid {
                    d.snapped(geom)
                } else {
                    d
                }
            };
            let arrival = direction(rx);
            let departure = direction(tx);
            PathParams {
                gain: complex_gaussian(rng) * scale,
                arrival,
                departure,
            }
        })
        .collect()
}

/// Draws `H_br` and `H_ru` with uniform angles and CN(0,1) gains.
pub fn synthesize_channels<R: Rng + ?Sized>(spec: &ChannelSpec, rng: &mut R) -> Result<ChannelPair> {
    if spec.paths_br == 0 || spec.paths_ru == 0 {
        return Err(Error::InvalidConfig(
            "path counts L and J must be at least 1".into(),
        ));
    }
    let paths_br = draw_paths(
        rng,
        spec.paths_br,
        &spec.bs,
        &spec.ris,
        spec.normalize_gains,
        spec.on_grid,
    );
    let paths_ru = draw_paths(
        rng,
        spec.paths_ru,
        &spec.ris,
        &spec.user,
        spec.normalize_gains,
        spec.on_grid,
    );
    Ok(ChannelPair {
        h_br: assemble_channel(&spec.bs, &spec.ris, &paths_br),
        h_ru: assemble_channel(&spec.ris, &spec.user, &paths_ru),
        paths_br,
        paths_ru,
    })
}

/// Column-wise Khatri-Rao product `H_ruᵀ ⋄ H_br`.
pub fn cascade(pair: &ChannelPair) -> Result<CascadedChannel> {
    let (n, m) = pair.h_br.shape();
    let (m_ru, q) = pair.h_ru.shape();
    if m_ru != m {
        return Err(Error::dims("cascade (RIS size)", m, m_ru));
    }
    let g = CMatrix::from_fn(q * n, m, |row, col| {
        let (qi, ni) = (row / n, row % n);
        pair.h_ru[(col, qi)] * pair.h_br[(ni, col)]
    });
    Ok(CascadedChannel { g })
}
