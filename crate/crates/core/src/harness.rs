//! Monte Carlo campaigns over a load grid.
//!
//! Every load point runs in rounds. In each round every worker simulates one
//! block of frames on its own ChaCha stream, seeded from
//! `(seed, point, worker)`, and the counter records are summed. A point stops
//! once `target_errors` frame errors or `max_frames` frames are reached.
//! Results depend only on the config, including the worker count.

use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::degree::DegreeDistribution;
use crate::error::{IrsaError, Result};
use crate::floor::floor_estimate;
use crate::frame::{generate_frame, sic_decode, Activity, ActivityModel};
use crate::scaling::{fep_predict, plp_predict, ScalingParams};

/// Frames per worker per round.
pub const BLOCK_FRAMES: u64 = 4096;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

fn default_max_frames() -> u64 {
    1_000_000
}
fn default_target_errors() -> u64 {
    200
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dist: DegreeDistribution,
    pub m: usize,
    pub load_grid: Vec<f64>,
    #[serde(default)]
    pub activity: Activity,
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
    /// Frame errors after which a point stops early; 0 disables the rule.
    #[serde(default = "default_target_errors")]
    pub target_errors: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub emit_floor: bool,
    #[serde(default)]
    pub emit_prediction: bool,
    /// Scaling constants for distributions without a builtin table row.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(dist: DegreeDistribution, m: usize, load_grid: Vec<f64>) -> Self {
        Self {
            dist,
            m,
            load_grid,
            activity: Activity::Poisson,
            max_frames: default_max_frames(),
            target_errors: default_target_errors(),
            seed: 0,
            workers: default_workers(),
            emit_floor: false,
            emit_prediction: false,
            alpha0: None,
            beta0: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| IrsaError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| IrsaError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(IrsaError::InvalidConfig(msg));
        if self.m == 0 {
            return bad("m must be at least 1".into());
        }
        if self.load_grid.is_empty() {
            return bad("load_grid is empty".into());
        }
        if self.load_grid.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return bad("load_grid values must be positive".into());
        }
        if self.load_grid.windows(2).any(|w| w[1] <= w[0]) {
            return bad("load_grid must be strictly increasing".into());
        }
        if self.max_frames == 0 {
            return bad("max_frames must be at least 1".into());
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.dist.max_degree() > self.m {
            return bad(format!(
                "max degree {} exceeds m = {}",
                self.dist.max_degree(),
                self.m
            ));
        }
        if let Some(n) = self.activity.population() {
            if self.emit_prediction && n <= self.m as u64 {
                return bad(format!("population {n} must exceed m = {}", self.m));
            }
            if let Some(g) = self.load_grid.last() {
                if g * self.m as f64 > n as f64 {
                    return bad(format!("load {g} needs more than {n} users"));
                }
            }
        }
        if self.emit_prediction {
            self.scaling_params()?;
        }
        Ok(())
    }

    pub fn scaling_params(&self) -> Result<ScalingParams> {
        ScalingParams::for_distribution(&self.dist, self.alpha0, self.beta0)
    }
}

/// Deterministic per-(point, worker) seed: the first 8 bytes of
/// SHA-256 over the little-endian triple.
pub fn seed_stream(master_seed: u64, point_index: u64, worker_index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(b"irsa/seed-stream/v1");
    h.update(master_seed.to_le_bytes());
    h.update(point_index.to_le_bytes());
    h.update(worker_index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Mergeable Monte Carlo counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Tally {
    pub frames: u64,
    pub frame_errors: u64,
    pub packets_sent: u64,
    pub packets_lost: u64,
    // per-frame second moments for the ratio estimator's variance
    pub sent_sq: u64,
    pub lost_sq: u64,
    pub sent_lost: u64,
    /// Σ lost/sent over frames with at least one packet.
    pub loss_fraction_sum: f64,
}

impl Tally {
    pub fn record(&mut self, sent: u64, lost: u64) {
        self.frames += 1;
        self.frame_errors += u64::from(lost > 0);
        self.packets_sent += sent;
        self.packets_lost += lost;
        self.sent_sq += sent * sent;
        self.lost_sq += lost * lost;
        self.sent_lost += sent * lost;
        if sent > 0 {
            self.loss_fraction_sum += lost as f64 / sent as f64;
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.frames += other.frames;
        self.frame_errors += other.frame_errors;
        self.packets_sent += other.packets_sent;
        self.packets_lost += other.packets_lost;
        self.sent_sq += other.sent_sq;
        self.lost_sq += other.lost_sq;
        self.sent_lost += other.sent_lost;
        self.loss_fraction_sum += other.loss_fraction_sum;
    }

    pub fn fer(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.frame_errors as f64 / self.frames as f64
        }
    }

    pub fn fer_ci(&self) -> f64 {
        binomial_ci_half_width(self.frame_errors, self.frames)
    }

    /// Ratio of sums: lost packets over sent packets.
    pub fn plr(&self) -> f64 {
        if self.packets_sent == 0 {
            0.0
        } else {
            self.packets_lost as f64 / self.packets_sent as f64
        }
    }

    /// Mean per-frame loss fraction, empty frames counting as zero. Unlike
    /// [`plr`](Self::plr) this never exceeds [`fer`](Self::fer).
    pub fn mean_frame_loss(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.loss_fraction_sum / self.frames as f64
        }
    }

    /// 95% half-width of the ratio estimator (delta method over frames).
    pub fn plr_ci(&self) -> f64 {
        if self.packets_sent == 0 || self.frames == 0 {
            return 0.0;
        }
        let n = self.frames as f64;
        let r = self.plr();
        let mean_sent = self.packets_sent as f64 / n;
        // mean of (lost - r·sent)² per frame
        let resid = (self.lost_sq as f64 - 2.0 * r * self.sent_lost as f64
            + r * r * self.sent_sq as f64)
            / n;
        Z95 * (resid.max(0.0) / n).sqrt() / mean_sent
    }
}

/// Normal-approximation 95% half-width for `successes / trials`.
pub fn binomial_ci_half_width(successes: u64, trials: u64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let p = successes as f64 / trials as f64;
    Z95 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Simulates `frames` independent frames on one stream.
pub fn simulate_block(
    m: usize,
    dist: &DegreeDistribution,
    model: &ActivityModel,
    frames: u64,
    rng: &mut ChaCha8Rng,
) -> Result<Tally> {
    let mut tally = Tally::default();
    for _ in 0..frames {
        let frame = generate_frame(m, dist, model, rng)?;
        let out = sic_decode(&frame);
        tally.record(frame.num_users() as u64, out.unresolved.len() as u64);
    }
    Ok(tally)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub g: f64,
    pub frames_run: u64,
    pub frame_errors: u64,
    pub packets_sent: u64,
    pub packets_lost: u64,
    pub fer: f64,
    pub fer_ci: f64,
    pub plr: f64,
    pub plr_ci: f64,
    pub fep_pred: Option<f64>,
    pub plp_pred: Option<f64>,
    pub fep_floor: Option<f64>,
    pub plp_floor: Option<f64>,
}

impl SweepRow {
    fn from_tally(g: f64, t: &Tally) -> Self {
        Self {
            g,
            frames_run: t.frames,
            frame_errors: t.frame_errors,
            packets_sent: t.packets_sent,
            packets_lost: t.packets_lost,
            fer: t.fer(),
            fer_ci: t.fer_ci(),
            plr: t.plr(),
            plr_ci: t.plr_ci(),
            fep_pred: None,
            plp_pred: None,
            fep_floor: None,
            plp_floor: None,
        }
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| IrsaError::InvalidConfig(format!("worker pool: {e}")))
}

fn simulate_point(
    config: &ExperimentConfig,
    point_index: u64,
    g: f64,
    pool: &rayon::ThreadPool,
) -> Result<Tally> {
    let model = config.activity.at_load(g, config.m);
    let workers = config.workers as u64;
    let mut rngs: Vec<ChaCha8Rng> = (0..workers)
        .map(|w| ChaCha8Rng::seed_from_u64(seed_stream(config.seed, point_index, w)))
        .collect();

    let mut total = Tally::default();
    loop {
        if config.target_errors > 0 && total.frame_errors >= config.target_errors {
            break;
        }
        let remaining = config.max_frames - total.frames;
        if remaining == 0 {
            break;
        }
        let round = remaining.min(BLOCK_FRAMES * workers);
        let sizes: Vec<u64> = (0..workers)
            .map(|w| round / workers + u64::from(w < round % workers))
            .collect();
        let tallies: Vec<Tally> = pool.install(|| {
            rngs.par_iter_mut()
                .zip(sizes.par_iter())
                .map(|(rng, &n)| simulate_block(config.m, &config.dist, &model, n, rng))
                .collect::<Result<Vec<_>>>()
        })?;
        for t in &tallies {
            total.merge(t);
        }
    }
    Ok(total)
}

fn annotate(config: &ExperimentConfig, row: &mut SweepRow, params: Option<&ScalingParams>) -> Result<()> {
    if let Some(p) = params {
        let population = config.activity.population();
        row.fep_pred = Some(fep_predict(config.m, row.g, p, population)?);
        row.plp_pred = Some(plp_predict(config.m, row.g, p, population)?);
    }
    if config.emit_floor {
        let f = floor_estimate(&config.dist, config.m, row.g);
        row.fep_floor = Some(f.fep_floor);
        row.plp_floor = Some(f.plp_floor);
    }
    Ok(())
}

/// Simulates one load point. `point_index` selects the seed streams, so the
/// same point inside a sweep and on its own agree when indices match.
pub fn run_point(config: &ExperimentConfig, point_index: u64, g: f64) -> Result<SweepRow> {
    config.validate()?;
    let pool = pool(config.workers)?;
    let tally = simulate_point(config, point_index, g, &pool)?;
    let mut row = SweepRow::from_tally(g, &tally);
    let params = if config.emit_prediction {
        Some(config.scaling_params()?)
    } else {
        None
    };
    annotate(config, &mut row, params.as_ref())?;
    Ok(row)
}

/// Runs every grid point in order.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let pool = pool(config.workers)?;
    let params = if config.emit_prediction {
        Some(config.scaling_params()?)
    } else {
        None
    };
    config
        .load_grid
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let tally = simulate_point(config, i as u64, g, &pool)?;
            let mut row = SweepRow::from_tally(g, &tally);
            annotate(config, &mut row, params.as_ref())?;
            log::info!(
                "g={g} frames={} errors={} fer={:.3e}",
                row.frames_run,
                row.frame_errors,
                row.fer
            );
            Ok(row)
        })
        .collect()
}

/// Inclusive arithmetic grid; the stop value is kept when within half a step.
pub fn load_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start > 0.0 && step > 0.0 && stop >= start) {
        return Err(IrsaError::InvalidConfig(format!(
            "bad grid start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 0.5).floor() as usize;
    // round away accumulated binary noise so values print cleanly
    Ok((0..=n)
        .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
        .collect())
}

/// Six significant digits.
pub fn fmt_prob(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:.5e}")
    }
}

pub fn csv_header(with_prediction: bool, with_floor: bool) -> String {
    let mut h = String::from("g,frames_run,frame_errors,packets_sent,packets_lost,fer,fer_ci,plr,plr_ci");
    if with_prediction {
        h.push_str(",fep_pred,plp_pred");
    }
    if with_floor {
        h.push_str(",fep_floor,plp_floor");
    }
    h
}

pub fn write_csv<W: Write>(
    mut w: W,
    rows: &[SweepRow],
    with_prediction: bool,
    with_floor: bool,
) -> std::io::Result<()> {
    writeln!(w, "{}", csv_header(with_prediction, with_floor))?;
    for r in rows {
        write!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            r.g,
            r.frames_run,
            r.frame_errors,
            r.packets_sent,
            r.packets_lost,
            fmt_prob(r.fer),
            fmt_prob(r.fer_ci),
            fmt_prob(r.plr),
            fmt_prob(r.plr_ci)
        )?;
        if with_prediction {
            write!(
                w,
                ",{},{}",
                fmt_prob(r.fep_pred.unwrap_or(f64::NAN)),
                fmt_prob(r.plp_pred.unwrap_or(f64::NAN))
            )?;
        }
        if with_floor {
            write!(
                w,
                ",{},{}",
                fmt_prob(r.fep_floor.unwrap_or(f64::NAN)),
                fmt_prob(r.plp_floor.unwrap_or(f64::NAN))
            )?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Sidecar metadata for a sweep.
pub fn metadata_json(config: &ExperimentConfig) -> serde_json::Value {
    serde_json::json!({
        "tool": "irsa",
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.seed,
        "workers": config.workers,
        "block_frames": BLOCK_FRAMES,
        "config": config,
    })
}
