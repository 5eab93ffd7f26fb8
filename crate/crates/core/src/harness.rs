//! Monte Carlo experiment orchestration: configuration, SNR calibration,
//! seeded trial generation, sweeps and CSV output.
//!
//! # Random streams
//!
//! Trial `t` draws everything from `ChaCha20Rng::seed_from_u64(seed)` with
//! stream number `t`, so trials are independent of each other and of the
//! order in which they run. Within a trial the draws are, in order: the
//! training generator, then for each user its two channels and a unit-power
//! noise vector `w0`. Every `(snr, bits)` cell of a trial reuses these draws
//! (common random numbers) and scales `w0` to the cell's noise level.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::angular_domain::{project_cascaded, reconstruct_cascaded, AngularDictionaries};
use crate::baselines::ls_estimate;
use crate::channel_model::{cascade, complex_gaussian, synthesize_channels, CascadedChannel, ChannelSpec, UpaGeometry};
use crate::denoisers::{GmComponent, GmPrior};
use crate::linear_operator::{build_training_matrix, OperatorDims, StructuredOperator, TrainingKind, TrainingMatrix};
use crate::par::*;
use crate::quantizer::{design_quantizer, Resolution};
use crate::vamp_solver::{nmse, vamp_estimate, SolverConfig, TraceRow, VampOutput};
use crate::{norm_sqr, Error, Result, C64};

/// Optional replacements for the moment-matched default prior.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorOverrides {
    /// Expected number of active entries of `Λ` (default `L·J·Q`).
    pub support: Option<f64>,
    /// Explicit spike weight; requires `components`.
    pub lambda0: Option<f64>,
    /// Up to three mixture components.
    pub components: Option<Vec<GmComponent>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub n1: usize,
    pub n2: usize,
    pub m1: usize,
    pub m2: usize,
    pub q1: usize,
    pub q2: usize,
    pub p: usize,
    /// Pilot slots; must equal `q1·q2` when given.
    pub t: Option<usize>,
    pub l: usize,
    pub j: usize,
    pub bits: Vec<Resolution>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub users: usize,
    pub training: TrainingKind,
    pub on_grid: bool,
    pub normalize_gains: bool,
    pub run_ls: bool,
    /// Record wall-clock seconds per solve; off by default so that output
    /// files are reproducible byte for byte.
    pub record_timing: bool,
    pub solver: SolverConfig,
    pub prior: PriorOverrides,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n1: 8,
            n2: 8,
            m1: 8,
            m2: 8,
            q1: 2,
            q2: 2,
            p: 128,
            t: None,
            l: 4,
            j: 4,
            bits: vec![
                Resolution::Bits(2),
                Resolution::Bits(3),
                Resolution::Bits(4),
                Resolution::Infinite,
            ],
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            trials: 1,
            seed: 0,
            users: 1,
            training: TrainingKind::RandomPhase,
            on_grid: false,
            normalize_gains: false,
            run_ls: true,
            record_timing: false,
            solver: SolverConfig::default(),
            prior: PriorOverrides::default(),
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SystemConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn operator_dims(&self) -> OperatorDims {
        OperatorDims {
            n1: self.n1,
            n2: self.n2,
            m1: self.m1,
            m2: self.m2,
            q1: self.q1,
            q2: self.q2,
            p: self.p,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.operator_dims();
        dims.validate()?;
        if let Some(t) = self.t {
            if t != dims.q() {
                return Err(Error::InvalidConfig(format!(
                    "t = {t} must equal q1·q2 = {}",
                    dims.q()
                )));
            }
        }
        if self.l == 0 || self.j == 0 {
            return Err(Error::InvalidConfig("path counts l and j must be at least 1".into()));
        }
        if self.trials == 0 || self.users == 0 {
            return Err(Error::InvalidConfig("trials and users must be at least 1".into()));
        }
        if self.bits.is_empty() || self.snr_db.is_empty() {
            return Err(Error::InvalidConfig("bits and snr_db must be non-empty".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| s.is_nan() || **s == f64::NEG_INFINITY) {
            return Err(Error::InvalidConfig(format!("invalid SNR {s}")));
        }
        self.solver.validate()?;
        self.prior(dims.input_len()).map(|_| ())
    }

    pub fn channel_spec(&self) -> Result<ChannelSpec> {
        Ok(ChannelSpec {
            bs: UpaGeometry::new(self.n1, self.n2)?,
            ris: UpaGeometry::new(self.m1, self.m2)?,
            user: UpaGeometry::new(self.q1, self.q2)?,
            paths_br: self.l,
            paths_ru: self.j,
            normalize_gains: self.normalize_gains,
            on_grid: self.on_grid,
        })
    }

    pub fn dictionaries(&self) -> Result<AngularDictionaries> {
        let spec = self.channel_spec()?;
        Ok(AngularDictionaries::new(&spec.bs, &spec.ris, &spec.user))
    }

    /// Expected `|G|²` per entry under the channel model.
    pub fn channel_energy(&self) -> f64 {
        if self.normalize_gains {
            1.0
        } else {
            (self.l * self.j) as f64
        }
    }

    /// The prior used for every solve of this configuration.
    pub fn prior(&self, len: usize) -> Result<GmPrior> {
        let o = &self.prior;
        if let Some(components) = &o.components {
            if components.is_empty() || components.len() > 3 {
                return Err(Error::InvalidConfig("prior needs 1 to 3 components".into()));
            }
            let lambda0 = o
                .lambda0
                .ok_or_else(|| Error::InvalidConfig("prior.components requires prior.lambda0".into()))?;
            return GmPrior::new(lambda0, components.clone());
        }
        if o.lambda0.is_some() {
            return Err(Error::InvalidConfig("prior.lambda0 requires prior.components".into()));
        }
        let support = o.support.unwrap_or((self.l * self.j * self.q1 * self.q2) as f64);
        GmPrior::sparse_default(len, support, self.channel_energy() / len as f64)
    }
}

/// Noise variance that puts `‖Z‖²/E‖W‖²` at `snr_db`, with `Z = G·E`
/// computed densely.
pub fn calibrate_noise(snr_db: f64, channel: &CascadedChannel, training: &TrainingMatrix) -> Result<f64> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::InvalidConfig(format!("invalid SNR {snr_db}")));
    }
    let z = &channel.g * training.dense();
    calibrate_from_energy(snr_db, z.norm_squared(), z.len())
}

fn calibrate_from_energy(snr_db: f64, energy: f64, len: usize) -> Result<f64> {
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy("noiseless measurement"));
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    Ok(energy / (len as f64 * 10f64.powf(snr_db / 10.0)))
}

/// One user's draws within a trial.
#[derive(Debug, Clone)]
pub struct UserDraw {
    pub channel: CascadedChannel,
    /// `vec(Λ)` of the channel.
    pub lambda: Vec<C64>,
    /// Noiseless `vec(G·E)`.
    pub z: Vec<C64>,
    /// Unit-power noise, scaled per SNR.
    pub w0: Vec<C64>,
}

/// Everything a trial shares across its cells.
#[derive(Debug, Clone)]
pub struct TrialDraw {
    pub trial: usize,
    pub op: StructuredOperator,
    pub users: Vec<UserDraw>,
}

pub fn trial_rng(seed: u64, trial: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

pub fn draw_trial(cfg: &SystemConfig, trial: usize) -> Result<TrialDraw> {
    let dims = cfg.operator_dims();
    let mut rng = trial_rng(cfg.seed, trial);
    let training = build_training_matrix(dims.m(), dims.p, cfg.training, &mut rng)?;
    let e = training.dense();
    let spec = cfg.channel_spec()?;
    let dicts = cfg.dictionaries()?;
    let users = (0..cfg.users)
        .map(|_| {
            let channel = cascade(&synthesize_channels(&spec, &mut rng)?)?;
            let lambda = project_cascaded(&channel, &dicts)?.to_vec();
            let z = (&channel.g * &e).as_slice().to_vec();
            let w0 = (0..z.len()).map(|_| complex_gaussian(&mut rng)).collect();
            Ok(UserDraw {
                channel,
                lambda,
                z,
                w0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialDraw {
        trial,
        op: StructuredOperator::new(dims, training)?,
        users,
    })
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub snr_db: f64,
    pub bits: String,
    pub trial: usize,
    pub user: usize,
    pub algo: String,
    pub nmse_db: f64,
    pub iters: usize,
    pub seconds: f64,
    pub converged: bool,
}

/// Result of solving one `(snr, bits)` cell for one user.
#[derive(Debug)]
pub struct CellOutcome {
    pub noise_var: f64,
    pub vamp: Result<VampOutput>,
    pub vamp_nmse_db: f64,
    pub vamp_seconds: f64,
    pub ls_nmse_db: Option<f64>,
    pub ls_seconds: f64,
}

/// Quantizes the user's measurements at the cell's SNR and resolution and
/// runs the estimators. With `trace_truth` the VAMP trace carries the
/// per-iteration NMSE.
pub fn solve_cell(
    cfg: &SystemConfig,
    draw: &TrialDraw,
    user: usize,
    snr_db: f64,
    bits: Resolution,
    trace_truth: bool,
) -> Result<CellOutcome> {
    let u = draw
        .users
        .get(user)
        .ok_or_else(|| Error::InvalidConfig(format!("user {user} out of range")))?;
    let n_z = u.z.len();
    let energy = norm_sqr(&u.z);
    let noise_var = calibrate_from_energy(snr_db, energy, n_z)?;
    let spec = design_quantizer(bits, energy / n_z as f64 + noise_var)?;
    let sd = noise_var.sqrt();
    let received: Vec<C64> = u.z.iter().zip(&u.w0).map(|(z, w)| z + w * sd).collect();
    let y = spec.quantize_all(&received);
    let prior = cfg.prior(u.lambda.len())?;
    let dicts = cfg.dictionaries()?;
    let dims = draw.op.dims();

    let start = Instant::now();
    let vamp = vamp_estimate(
        &y,
        &draw.op,
        &spec,
        &prior,
        noise_var,
        &cfg.solver,
        trace_truth.then_some(u.lambda.as_slice()),
    );
    let vamp_seconds = start.elapsed().as_secs_f64();
    let vamp_nmse_db = match &vamp {
        Ok(out) => nmse(&u.channel, &reconstruct_cascaded(&out.lambda_hat, &dicts)?)?,
        Err(_) => f64::NAN,
    };

    let (ls_nmse_db, ls_seconds) = if cfg.run_ls {
        let start = Instant::now();
        let values: Vec<C64> = y.iter().map(|s| s.value).collect();
        let sol = ls_estimate(&values, &draw.op, noise_var)?;
        let secs = start.elapsed().as_secs_f64();
        let g_hat = reconstruct_cascaded(&sol.lambda_hat, &dicts)?;
        (Some(nmse(&u.channel, &g_hat)?), secs)
    } else {
        (None, 0.0)
    };
    debug_assert_eq!(u.lambda.len(), dims.input_len());
    Ok(CellOutcome {
        noise_var,
        vamp,
        vamp_nmse_db,
        vamp_seconds,
        ls_nmse_db,
        ls_seconds,
    })
}

/// Cell ordering key: (snr index, bits index, trial, user, algo).
type Keyed = ((usize, usize, usize, usize, u8), ExperimentRecord);

fn trial_records(cfg: &SystemConfig, trial: usize) -> Result<(Vec<Keyed>, usize)> {
    let draw = draw_trial(cfg, trial)?;
    let mut out = Vec::new();
    let mut aborts = 0;
    let timing = |s: f64| if cfg.record_timing { s } else { 0.0 };
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        for (bi, &bits) in cfg.bits.iter().enumerate() {
            for user in 0..cfg.users {
                let cell = solve_cell(cfg, &draw, user, snr, bits, false)?;
                let (iters, converged) = match &cell.vamp {
                    Ok(v) => (v.iterations, v.converged),
                    Err(Error::NonFinite { iteration, .. }) => {
                        aborts += 1;
                        (*iteration, false)
                    }
                    Err(e) => return Err(Error::InvalidConfig(e.to_string())),
                };
                let base = ExperimentRecord {
                    snr_db: snr,
                    bits: bits.to_string(),
                    trial,
                    user,
                    algo: "vamp".into(),
                    nmse_db: cell.vamp_nmse_db,
                    iters,
                    seconds: timing(cell.vamp_seconds),
                    converged,
                };
                if let Some(ls) = cell.ls_nmse_db {
                    out.push((
                        (si, bi, trial, user, 1),
                        ExperimentRecord {
                            algo: "ls".into(),
                            nmse_db: ls,
                            iters: 1,
                            seconds: timing(cell.ls_seconds),
                            converged: true,
                            ..base.clone()
                        },
                    ));
                }
                out.push(((si, bi, trial, user, 0), base));
            }
        }
    }
    Ok((out, aborts))
}

/// Records of a sweep plus the number of VAMP solves that aborted.
#[derive(Debug, Clone)]
pub struct SweepResult {
    pub records: Vec<ExperimentRecord>,
    pub aborted: usize,
}

/// Runs every `(snr, bits, trial, user)` cell. Trials run in parallel;
/// records come back in `(snr, bits, trial, user)` order.
pub fn run_sweep(cfg: &SystemConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let per_trial: Vec<Result<(Vec<Keyed>, usize)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| trial_records(cfg, t))
        .collect();
    let mut all = Vec::new();
    let mut aborted = 0;
    for r in per_trial {
        let (recs, a) = r?;
        all.extend(recs);
        aborted += a;
    }
    all.sort_by_key(|(k, _)| *k);
    Ok(SweepResult {
        records: all.into_iter().map(|(_, r)| r).collect(),
        aborted,
    })
}

/// [`run_sweep`] with `k` users sharing each trial's training matrix.
pub fn multiuser_run(cfg: &SystemConfig, k: usize) -> Result<SweepResult> {
    let cfg = SystemConfig {
        users: k,
        ..cfg.clone()
    };
    run_sweep(&cfg)
}

pub fn write_csv<W: std::io::Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv<W: std::io::Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Single solve of the first `(snr, bits)` cell of trial 0, user 0, with
/// per-iteration NMSE in the trace.
pub fn trace_run(cfg: &SystemConfig) -> Result<VampOutput> {
    cfg.validate()?;
    let cfg = SystemConfig {
        users: 1,
        run_ls: false,
        ..cfg.clone()
    };
    let draw = draw_trial(&cfg, 0)?;
    solve_cell(&cfg, &draw, 0, cfg.snr_db[0], cfg.bits[0], true)?.vamp
}

/// Median of the finite values, `NaN` if there are none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-cell summary over trials and users.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub snr_db: f64,
    pub bits: String,
    pub algo: String,
    pub median_nmse_db: f64,
    pub mean_nmse_db: f64,
    pub count: usize,
}

pub fn summarize(records: &[ExperimentRecord]) -> Vec<CellSummary> {
    let mut out: Vec<(CellSummary, Vec<f64>)> = Vec::new();
    for r in records {
        let slot = out.iter_mut().find(|(c, _)| {
            c.snr_db.to_bits() == r.snr_db.to_bits() && c.bits == r.bits && c.algo == r.algo
        });
        match slot {
            Some((_, v)) => v.push(r.nmse_db),
            None => out.push((
                CellSummary {
                    snr_db: r.snr_db,
                    bits: r.bits.clone(),
                    algo: r.algo.clone(),
                    median_nmse_db: f64::NAN,
                    mean_nmse_db: f64::NAN,
                    count: 0,
                },
                vec![r.nmse_db],
            )),
        }
    }
    out.into_iter()
        .map(|(mut c, v)| {
            let finite: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
            c.median_nmse_db = median(&finite);
            c.mean_nmse_db = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
            c.count = v.len();
            c
        })
        .collect()
}
