//! B-bit uniform mid-rise complex quantizer.
//!
//! Real and imaginary parts are quantized independently with the same
//! step. Thresholds sit at `h_b = (b - 2^{B-1})·Δ` for `b = 1..2^B-1` and
//! every bin reconstructs at its midpoint; the two outermost bins extend
//! to ±∞ and reconstruct at the outermost midpoints.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::special::{normal_cdf, normal_pdf};
use crate::{Error, Result, C64};

/// Largest finite resolution supported.
pub const MAX_BITS: u8 = 8;

/// MSE-optimal uniform mid-rise step for a unit-variance real Gaussian,
/// indexed by `bits - 1`. Regenerate with [`optimal_gaussian_step`].
pub const GAUSSIAN_STEP: [f64; 8] = [
    1.595_769_121_605_730_8,
    0.995_686_695_986_354_8,
    0.586_019_449_553_749_4,
    0.335_200_598_054_170_3,
    0.188_138_797_799_824_5,
    0.104_063_004_427_134_3,
    0.056_867_669_224_997_1,
    0.030_762_387_715_279_2,
];

/// ADC resolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resolution {
    Bits(u8),
    Infinite,
}

impl Resolution {
    pub fn bits(bits: u32) -> Result<Self> {
        if (1..=MAX_BITS as u32).contains(&bits) {
            Ok(Resolution::Bits(bits as u8))
        } else {
            Err(Error::BitsOutOfRange(bits))
        }
    }

    pub fn levels(self) -> Option<usize> {
        match self {
            Resolution::Bits(b) => Some(1usize << b),
            Resolution::Infinite => None,
        }
    }
}

impl fmt::Display for Resolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resolution::Bits(b) => write!(f, "{b}"),
            Resolution::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "infinite" | "∞" => Ok(Resolution::Infinite),
            other => {
                let bits: u32 = other
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad resolution '{other}'")))?;
                Resolution::bits(bits)
            }
        }
    }
}

impl Serialize for Resolution {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Resolution::Bits(b) => s.serialize_u8(*b),
            Resolution::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Resolution {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(b) if b >= 0 => Resolution::bits(b as u32).map_err(serde::de::Error::custom),
            Raw::Int(b) => Err(serde::de::Error::custom(format!("bad resolution {b}"))),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// A designed quantizer: resolution, step and decision thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    pub resolution: Resolution,
    /// Common step of the real and imaginary quantizers.
    pub step: f64,
    /// `2^B - 1` ascending thresholds; empty for the identity quantizer.
    pub thresholds: Vec<f64>,
}

/// Quantizer output: reconstruction value and per-axis bin indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizedSample {
    pub value: C64,
    pub bin_re: u32,
    pub bin_im: u32,
}

/// Tabulated `Δ(B)`.
pub fn gaussian_step(bits: u8) -> Result<f64> {
    if (1..=MAX_BITS).contains(&bits) {
        Ok(GAUSSIAN_STEP[bits as usize - 1])
    } else {
        Err(Error::BitsOutOfRange(bits as u32))
    }
}

/// Closed-form MSE of the `bits`-bit mid-rise quantizer with step `step`
/// on a unit-variance real Gaussian input.
pub fn gaussian_quantizer_mse(bits: u8, step: f64) -> f64 {
    let levels = 1usize << bits;
    let half = (levels / 2) as f64;
    (0..levels)
        .map(|k| {
            let lo = if k == 0 {
                f64::NEG_INFINITY
            } else {
                (k as f64 - half) * step
            };
            let hi = if k == levels - 1 {
                f64::INFINITY
            } else {
                (k as f64 + 1.0 - half) * step
            };
            let c = (k as f64 + 0.5 - half) * step;
            let mass = normal_cdf(hi) - normal_cdf(lo);
            let first = normal_pdf(lo) - normal_pdf(hi);
            let lo_t = if lo.is_finite() { lo * normal_pdf(lo) } else { 0.0 };
            let hi_t = if hi.is_finite() { hi * normal_pdf(hi) } else { 0.0 };
            let second = mass - (hi_t - lo_t);
            second - 2.0 * c * first + c * c * mass
        })
        .sum()
}

/// Numerically minimises [`gaussian_quantizer_mse`] over the step by
/// golden-section search; this is the generator of [`GAUSSIAN_STEP`].
pub fn optimal_gaussian_step(bits: u8) -> f64 {
    let (mut a, mut b) = (1e-3, 3.0);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (
        gaussian_quantizer_mse(bits, c),
        gaussian_quantizer_mse(bits, d),
    );
    while b - a > 1e-13 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = gaussian_quantizer_mse(bits, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = gaussian_quantizer_mse(bits, d);
        }
    }
    0.5 * (a + b)
}

/// Automatic-gain design: `Δ_Re = Δ_Im = sqrt(E|ξ|²/2)·Δ(B)`.
pub fn design_quantizer(resolution: Resolution, input_power: f64) -> Result<QuantizerSpec> {
    if !(input_power > 0.0 && input_power.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "quantizer input power must be positive, got {input_power}"
        )));
    }
    match resolution {
        Resolution::Infinite => Ok(QuantizerSpec::identity()),
        Resolution::Bits(b) => {
            let step = (input_power / 2.0).sqrt() * gaussian_step(b)?;
            QuantizerSpec::with_step(resolution, step)
        }
    }
}

impl QuantizerSpec {
    pub fn identity() -> Self {
        Self {
            resolution: Resolution::Infinite,
            step: f64::INFINITY,
            thresholds: Vec::new(),
        }
    }

    pub fn with_step(resolution: Resolution, step: f64) -> Result<Self> {
        let Some(levels) = resolution.levels() else {
            return Ok(Self::identity());
        };
        if let Resolution::Bits(b) = resolution {
            if b == 0 || b > MAX_BITS {
                return Err(Error::BitsOutOfRange(b as u32));
            }
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
        }
        let half = (levels / 2) as f64;
        let thresholds = (1..levels).map(|b| (b as f64 - half) * step).collect();
        Ok(Self {
            resolution,
            step,
            thresholds,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.resolution == Resolution::Infinite
    }

    pub fn step_re(&self) -> f64 {
        self.step
    }

    pub fn step_im(&self) -> f64 {
        self.step
    }

    pub fn levels(&self) -> Option<usize> {
        self.resolution.levels()
    }

    fn quantize_axis(&self, v: f64) -> (u32, f64) {
        let levels = self.levels().expect("finite quantizer");
        let half = (levels / 2) as i64;
        let raw = (v / self.step).floor();
        let k = if raw.is_nan() {
            half
        } else {
            (raw.clamp(-(half as f64), (half - 1) as f64) as i64) + half
        };
        (k as u32, (k as f64 - half as f64 + 0.5) * self.step)
    }

    pub fn quantize(&self, z: C64) -> QuantizedSample {
        if self.is_identity() {
            return QuantizedSample {
                value: z,
                bin_re: 0,
                bin_im: 0,
            };
        }
        let (bin_re, re) = self.quantize_axis(z.re);
        let (bin_im, im) = self.quantize_axis(z.im);
        QuantizedSample {
            value: C64::new(re, im),
            bin_re,
            bin_im,
        }
    }

    pub fn quantize_all(&self, z: &[C64]) -> Vec<QuantizedSample> {
        z.iter().map(|&v| self.quantize(v)).collect()
    }

    /// Decision interval `[lower, upper)` of `bin`; the outer bins are
    /// unbounded. The identity quantizer has the single bin `(-∞, ∞)`.
    pub fn bin_bounds(&self, bin: usize) -> Result<(f64, f64)> {
        let levels = self.levels().unwrap_or(1);
        if bin >= levels {
            return Err(Error::BinOutOfRange { index: bin, levels });
        }
        let lower = if bin == 0 {
            f64::NEG_INFINITY
        } else {
            self.thresholds[bin - 1]
        };
        let upper = if bin + 1 == levels {
            f64::INFINITY
        } else {
            self.thresholds[bin]
        };
        Ok((lower, upper))
    }
}
