//! Monte-Carlo evaluation over BPSK/AWGN and the decoding latency model.
//!
//! Each trial draws its message and noise from its own ChaCha8 stream keyed
//! by `(seed, point, trial)`, so results do not depend on the number of
//! worker threads, and two decoders run with the same seed see exactly the
//! same channel realizations.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::bp::{BpConfig, LLR_MAX};
use crate::construction::SubcodeSpec;
use crate::ensemble::{decode_list, EnsembleSpec};
use crate::error::Error;
use crate::scl::scl_decode;
use crate::transform::PermGroupKind;

pub const CSV_HEADER: &str = "decoder,N,k,L,perm_group,relaxed,ebn0_db,frames,frame_errors,bit_errors,bler,ber,avg_iters,avg_latency_cycles,seed";

const BATCH: usize = 64;
const STREAM_CHANNEL: u64 = 0;
const STREAM_PERM: u64 = 1;
const ENSEMBLE_POINT: u64 = u64::MAX;

/// Named decoder families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DecoderLabel {
    /// Single BP decoder on the plain graph.
    CaBp,
    /// Single BP decoder on the relaxed graph.
    RCaBp,
    /// List of stage-shuffled graphs.
    CaBpl,
    /// List of LTA-permuted graphs.
    PCaBpl,
    /// List of stage-shuffled relaxed graphs.
    RCaBpl,
    /// List of LTA-permuted relaxed graphs.
    PrCaBpl,
    /// Successive cancellation list decoding.
    CaScl,
}

impl DecoderLabel {
    pub const ALL: [Self; 7] = [
        Self::CaBp,
        Self::RCaBp,
        Self::CaBpl,
        Self::PCaBpl,
        Self::RCaBpl,
        Self::PrCaBpl,
        Self::CaScl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::CaBp => "ca-bp",
            Self::RCaBp => "r-ca-bp",
            Self::CaBpl => "ca-bpl",
            Self::PCaBpl => "p-ca-bpl",
            Self::RCaBpl => "r-ca-bpl",
            Self::PrCaBpl => "pr-ca-bpl",
            Self::CaScl => "ca-scl",
        }
    }

    /// Default `(group, relaxed, list size)`.
    pub fn defaults(self) -> (PermGroupKind, bool, usize) {
        match self {
            Self::CaBp => (PermGroupKind::Identity, false, 1),
            Self::RCaBp => (PermGroupKind::Identity, true, 1),
            Self::CaBpl => (PermGroupKind::Stage, false, 8),
            Self::PCaBpl => (PermGroupKind::Lta, false, 8),
            Self::RCaBpl => (PermGroupKind::Stage, true, 8),
            Self::PrCaBpl => (PermGroupKind::Lta, true, 8),
            Self::CaScl => (PermGroupKind::Identity, false, 8),
        }
    }

    pub fn is_bp(self) -> bool {
        self != Self::CaScl
    }
}

impl fmt::Display for DecoderLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DecoderLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let lower = s.to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|d| d.name() == lower)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|d| d.name()).collect();
                Error::Parse(format!("unknown decoder {s:?} (expected one of {})", names.join(", ")))
            })
    }
}

/// A fully specified decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct DecoderSpec {
    pub label: DecoderLabel,
    pub list_size: usize,
    pub perm_group: PermGroupKind,
    pub relaxed: bool,
    /// Draw a fresh set of permutations for every frame instead of fixing
    /// the ensemble once. No decoder is pinned to the identity.
    pub fresh_perm_per_frame: bool,
    pub bp: BpConfig,
}

impl DecoderSpec {
    pub fn new(label: DecoderLabel) -> Self {
        let (perm_group, relaxed, list_size) = label.defaults();
        Self {
            label,
            list_size,
            perm_group,
            relaxed,
            fresh_perm_per_frame: false,
            bp: BpConfig::default(),
        }
    }

    pub fn with_list_size(mut self, list_size: usize) -> Self {
        self.list_size = list_size;
        self
    }

    pub fn with_perm_group(mut self, kind: PermGroupKind) -> Self {
        self.perm_group = kind;
        self
    }

    pub fn with_relaxed(mut self, relaxed: bool) -> Self {
        self.relaxed = relaxed;
        self
    }

    pub fn with_fresh_perm_per_frame(mut self, fresh: bool) -> Self {
        self.fresh_perm_per_frame = fresh;
        self
    }

    pub fn with_bp(mut self, bp: BpConfig) -> Self {
        self.bp = bp;
        self
    }
}

/// `σ²` for unit-energy BPSK at the given `Eb/N0` (dB) and code rate.
pub fn noise_variance(ebn0_db: f64, rate: f64) -> f64 {
    1.0 / (2.0 * rate * 10f64.powf(ebn0_db / 10.0))
}

/// Transmits `c` as `x = 1 − 2c` over AWGN and returns `2y/σ²`.
pub fn awgn_llr<R: Rng + ?Sized>(c: &[u8], ebn0_db: f64, rate: f64, rng: &mut R) -> Vec<f64> {
    let var = noise_variance(ebn0_db, rate);
    let sigma = var.sqrt();
    c.iter()
        .map(|&b| {
            let x = if b == 0 { 1.0 } else { -1.0 };
            let z: f64 = rng.sample(StandardNormal);
            2.0 * (x + sigma * z) / var
        })
        .collect()
}

/// Decoding latency in clock cycles.
///
/// A single BP decoder needs `(2n + 2)` cycles per iteration. A list of BP
/// decoders runs in parallel, waits for the slowest one and spends one cycle
/// on selection. SCL needs `2N + k` cycles regardless of `iterations`.
pub fn latency_cycles(label: DecoderLabel, n: u32, len: usize, k: usize, iterations: &[usize]) -> u64 {
    if label == DecoderLabel::CaScl {
        return (2 * len + k) as u64;
    }
    let per_iter = 2 * n as u64 + 2;
    let slowest = iterations.iter().copied().max().unwrap_or(0) as u64;
    if iterations.len() > 1 {
        per_iter * slowest + 1
    } else {
        per_iter * slowest
    }
}

/// Simulation parameters.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub code: Arc<SubcodeSpec>,
    pub decoder: DecoderSpec,
    pub ebn0_db: Vec<f64>,
    /// Stop a point after this many frame errors.
    pub min_frame_errors: Option<u64>,
    /// Hard cap on frames per point.
    pub max_frames: u64,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
    /// Replace the channel with perfectly confident LLRs.
    pub noiseless: bool,
    /// Keep per-trial records in the returned points.
    pub log_trials: bool,
}

impl SimConfig {
    pub fn new(code: Arc<SubcodeSpec>, decoder: DecoderSpec, ebn0_db: Vec<f64>, seed: u64) -> Self {
        Self {
            code,
            decoder,
            ebn0_db,
            min_frame_errors: Some(200),
            max_frames: 1_000_000,
            seed,
            threads: 0,
            noiseless: false,
            log_trials: false,
        }
    }
}

/// Outcome of one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub frame_error: bool,
    pub bit_errors: u32,
    /// Iterations per sub-decoder; empty for SCL.
    pub iterations: Vec<usize>,
    pub latency_cycles: u64,
}

/// Aggregated statistics at one `Eb/N0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimPoint {
    pub decoder: DecoderLabel,
    pub len: usize,
    pub k: usize,
    pub list_size: usize,
    pub perm_group: PermGroupKind,
    pub relaxed: bool,
    pub ebn0_db: f64,
    pub frames: u64,
    pub frame_errors: u64,
    pub bit_errors: u64,
    /// Mean over frames of the slowest sub-decoder's iteration count.
    pub avg_iters: f64,
    /// Mean over frames and sub-decoders of the iteration count.
    pub avg_iters_per_decoder: f64,
    pub avg_latency_cycles: f64,
    pub seed: u64,
    pub trials: Option<Vec<TrialRecord>>,
}

impl SimPoint {
    pub fn bler(&self) -> f64 {
        ratio(self.frame_errors, self.frames)
    }

    pub fn ber(&self) -> f64 {
        ratio(self.bit_errors, self.frames * self.k as u64)
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.decoder,
            self.len,
            self.k,
            self.list_size,
            self.perm_group,
            self.relaxed,
            self.ebn0_db,
            self.frames,
            self.frame_errors,
            self.bit_errors,
            self.bler(),
            self.ber(),
            self.avg_iters,
            self.avg_latency_cycles,
            self.seed
        )
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Writes the header and one row per point.
pub fn write_csv<W: Write>(points: &[SimPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for p in points {
        writeln!(out, "{}", p.csv_row())?;
    }
    Ok(())
}

/// Independent stream for one trial.
pub fn trial_rng(seed: u64, point: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, point, trial, stream]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream used to draw the fixed ensemble of a simulation with `seed`.
pub fn ensemble_rng(seed: u64) -> ChaCha8Rng {
    trial_rng(seed, ENSEMBLE_POINT, 0, STREAM_PERM)
}

enum Engine {
    Fixed(EnsembleSpec),
    Fresh,
    Scl,
}

/// A configured simulation with its decoder built once.
pub struct Simulator {
    cfg: SimConfig,
    engine: Engine,
    pool: rayon::ThreadPool,
}

impl Simulator {
    pub fn new(cfg: SimConfig) -> Result<Self, Error> {
        let d = &cfg.decoder;
        if d.list_size == 0 {
            return Err(Error::InvalidArgument("list size must be at least 1".into()));
        }
        if cfg.max_frames == 0 {
            return Err(Error::InvalidArgument("frame budget must be positive".into()));
        }
        if cfg.code.k() == 0 {
            return Err(Error::InvalidArgument("code carries no message bits".into()));
        }
        if d.bp.max_iter == 0 && d.label.is_bp() {
            return Err(Error::InvalidArgument("BP needs at least one iteration".into()));
        }
        let engine = if !d.label.is_bp() {
            Engine::Scl
        } else if d.fresh_perm_per_frame {
            let order = d.perm_group.order(cfg.code.n());
            if d.list_size as u128 > order {
                return Err(Error::GroupExhausted {
                    requested: d.list_size,
                    order,
                });
            }
            Engine::Fresh
        } else {
            let mut rng = ensemble_rng(cfg.seed);
            Engine::Fixed(EnsembleSpec::random(
                cfg.code.clone(),
                d.list_size,
                d.perm_group,
                d.relaxed,
                true,
                &mut rng,
            )?)
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        Ok(Self { cfg, engine, pool })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// The fixed ensemble, if the decoder uses one.
    pub fn ensemble(&self) -> Option<&EnsembleSpec> {
        match &self.engine {
            Engine::Fixed(e) => Some(e),
            _ => None,
        }
    }

    fn trial(&self, point: u64, ebn0_db: f64, trial: u64) -> Result<TrialRecord, Error> {
        let code = &self.cfg.code;
        let d = &self.cfg.decoder;
        let rate = code.k() as f64 / code.len() as f64;
        let mut rng = trial_rng(self.cfg.seed, point, trial, STREAM_CHANNEL);
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.random::<bool>() as u8).collect();
        let (_, c) = code.encode_bits(&msg);
        let llr = if self.cfg.noiseless {
            c.iter().map(|&b| if b == 0 { LLR_MAX } else { -LLR_MAX }).collect()
        } else {
            awgn_llr(&c, ebn0_db, rate, &mut rng)
        };
        let (c_hat, iterations) = match &self.engine {
            Engine::Scl => (scl_decode(code, &llr, d.list_size)?.c_hat, Vec::new()),
            Engine::Fixed(e) => {
                let out = decode_list(e, &llr, &d.bp)?;
                (out.selected.c_hat, out.iterations)
            }
            Engine::Fresh => {
                let mut prng = trial_rng(self.cfg.seed, point, trial, STREAM_PERM);
                let e = EnsembleSpec::random(code.clone(), d.list_size, d.perm_group, d.relaxed, false, &mut prng)?;
                let out = decode_list(&e, &llr, &d.bp)?;
                (out.selected.c_hat, out.iterations)
            }
        };
        let c_hat = c_hat.to_bits();
        let decoded = code.message_of(&c_hat);
        let bit_errors = decoded.iter().zip(&msg).filter(|(a, b)| a != b).count() as u32;
        Ok(TrialRecord {
            frame_error: c_hat != c,
            bit_errors,
            latency_cycles: latency_cycles(d.label, code.n(), code.len(), code.k(), &iterations),
            iterations,
        })
    }

    /// Simulates one point; `point` selects the random substreams.
    pub fn run_point(&self, point: u64, ebn0_db: f64) -> Result<SimPoint, Error> {
        let d = &self.cfg.decoder;
        let mut frames = 0u64;
        let mut frame_errors = 0u64;
        let mut bit_errors = 0u64;
        let mut iter_max_sum = 0u64;
        let mut iter_all_sum = 0u64;
        let mut iter_count = 0u64;
        let mut latency_sum = 0u64;
        let mut trials = self.cfg.log_trials.then(Vec::new);
        'outer: while frames < self.cfg.max_frames {
            let end = (frames + BATCH as u64).min(self.cfg.max_frames);
            let batch: Vec<TrialRecord> = self.pool.install(|| {
                (frames..end)
                    .into_par_iter()
                    .map(|t| self.trial(point, ebn0_db, t))
                    .collect::<Result<_, _>>()
            })?;
            for rec in batch {
                frames += 1;
                frame_errors += rec.frame_error as u64;
                bit_errors += rec.bit_errors as u64;
                iter_max_sum += rec.iterations.iter().copied().max().unwrap_or(0) as u64;
                iter_all_sum += rec.iterations.iter().sum::<usize>() as u64;
                iter_count += rec.iterations.len() as u64;
                latency_sum += rec.latency_cycles;
                if let Some(t) = trials.as_mut() {
                    t.push(rec);
                }
                if self.cfg.min_frame_errors.is_some_and(|m| frame_errors >= m) {
                    break 'outer;
                }
            }
        }
        let (perm_group, relaxed) = if d.label.is_bp() {
            (d.perm_group, d.relaxed)
        } else {
            (PermGroupKind::Identity, false)
        };
        Ok(SimPoint {
            decoder: d.label,
            len: self.cfg.code.len(),
            k: self.cfg.code.k(),
            list_size: d.list_size,
            perm_group,
            relaxed,
            ebn0_db,
            frames,
            frame_errors,
            bit_errors,
            avg_iters: iter_max_sum as f64 / frames as f64,
            avg_iters_per_decoder: ratio(iter_all_sum, iter_count),
            avg_latency_cycles: latency_sum as f64 / frames as f64,
            seed: self.cfg.seed,
            trials,
        })
    }

    /// Simulates every configured point in order.
    pub fn run_sweep(&self) -> Result<Vec<SimPoint>, Error> {
        if self.cfg.ebn0_db.is_empty() {
            return Err(Error::InvalidArgument("empty Eb/N0 grid".into()));
        }
        self.cfg
            .ebn0_db
            .iter()
            .enumerate()
            .map(|(i, &e)| self.run_point(i as u64, e))
            .collect()
    }
}

/// Simulates a single point (substream index 0) at `ebn0_db`.
pub fn run_point(cfg: &SimConfig, ebn0_db: f64) -> Result<SimPoint, Error> {
    Simulator::new(cfg.clone())?.run_point(0, ebn0_db)
}

/// Simulates every point of `cfg.ebn0_db`.
pub fn run_sweep(cfg: &SimConfig) -> Result<Vec<SimPoint>, Error> {
    Simulator::new(cfg.clone())?.run_sweep()
}
