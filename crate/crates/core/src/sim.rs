//! Trial-by-trial Monte Carlo execution of a hidden-variable model.
//!
//! Each trial draws from its own ChaCha8 stream (key from the seed, stream
//! number = trial index), so results do not depend on how trials are split
//! across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::behaviour::{SettingsDistribution, Tolerance};
use crate::error::{BellError, Result};
use crate::hvmodel::HvModel;

// Trials handled per rayon task.
const CHUNK: u64 = 4096;

#[derive(Debug, Clone, PartialEq)]
pub enum SettingsSource {
    /// Settings drawn from the model's own `P_xy|λ`.
    Model,
    /// Settings drawn independently of `λ`; only valid for fully free models.
    External(SettingsDistribution),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub trials: u64,
    pub seed: u64,
    pub settings_source: SettingsSource,
}

impl SimConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        SimConfig {
            trials,
            seed,
            settings_source: SettingsSource::Model,
        }
    }

    pub fn with_external(mut self, s: SettingsDistribution) -> Self {
        self.settings_source = SettingsSource::External(s);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: u64,
    pub seed: u64,
    pub num_settings_a: usize,
    pub num_settings_b: usize,
    /// Trials whose hidden value satisfies locality.
    pub local_trials: u64,
    /// Trials whose hidden value satisfies free choice.
    pub free_trials: u64,
    /// Outcome counts `[x][y][a][b]`.
    pub counts: Vec<Vec<[[u64; 2]; 2]>>,
    /// Empirical `P(a,b|x,y)`; `None` for setting pairs never drawn.
    pub behaviour: Vec<Vec<Option<[[f64; 2]; 2]>>>,
    /// Empirical `P(x,y)`.
    pub settings: Vec<Vec<f64>>,
}

impl SimResult {
    pub fn local_fraction(&self) -> f64 {
        self.local_trials as f64 / self.trials as f64
    }

    pub fn free_fraction(&self) -> f64 {
        self.free_trials as f64 / self.trials as f64
    }

    /// Empirical `P(a,b|x,y)`, `None` when `(x, y)` was never drawn.
    pub fn empirical(&self, x: usize, y: usize, a: usize, b: usize) -> Option<f64> {
        self.behaviour[x][y].map(|t| t[a][b])
    }
}

/// Index of the first category whose cumulative weight exceeds `u`.
/// Rounding overshoot falls back to the last category with positive weight.
pub fn sample_index(cdf: &[f64], u: f64) -> usize {
    match cdf.iter().position(|&c| c > u) {
        Some(i) => i,
        None => {
            let mut i = cdf.len() - 1;
            while i > 0 && cdf[i] == cdf[i - 1] {
                i -= 1;
            }
            i
        }
    }
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, v| {
            *acc += v.max(0.0);
            Some(*acc)
        })
        .collect()
}

struct Sampler {
    cells: usize,
    lambda_cdf: Vec<f64>,
    // per λ
    settings_cdf: Vec<Vec<f64>>,
    // per λ, per cell
    outcome_cdf: Vec<Vec<Vec<f64>>>,
    local: Vec<bool>,
    free: Vec<bool>,
    external: Option<Vec<f64>>,
}

#[derive(Clone)]
struct Tally {
    local: u64,
    free: u64,
    // [cell][ab]
    counts: Vec<[u64; 4]>,
}

impl Tally {
    fn new(cells: usize) -> Self {
        Tally {
            local: 0,
            free: 0,
            counts: vec![[0; 4]; cells],
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        self.local += other.local;
        self.free += other.free;
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for k in 0..4 {
                a[k] += b[k];
            }
        }
        self
    }
}

impl Sampler {
    fn new(m: &HvModel, cfg: &SimConfig, tol: Tolerance) -> Result<Self> {
        let cells = m.num_settings_a() * m.num_settings_b();
        let class = m.classify(tol);
        let mut local = vec![false; m.lambda_count()];
        let mut free = vec![false; m.lambda_count()];
        class.local.iter().for_each(|&l| local[l] = true);
        class.free.iter().for_each(|&l| free[l] = true);
        let external = match &cfg.settings_source {
            SettingsSource::Model => None,
            SettingsSource::External(s) => {
                if s.num_settings_a() != m.num_settings_a() || s.num_settings_b() != m.num_settings_b() {
                    return Err(BellError::Config(
                        "external settings distribution has the wrong setting counts".to_string(),
                    ));
                }
                if !class.nonfree.is_empty() {
                    return Err(BellError::Config(format!(
                        "external settings require a fully free model; {} hidden values are not free",
                        class.nonfree.len()
                    )));
                }
                Some(cumulative(s.as_slice()))
            }
        };
        Ok(Sampler {
            cells,
            lambda_cdf: cumulative(m.p_lambda()),
            settings_cdf: (0..m.lambda_count())
                .map(|l| cumulative(m.p_xy_given_lambda(l)))
                .collect(),
            outcome_cdf: m
                .outcome_tables()
                .iter()
                .map(|t| t.as_slice().chunks(4).map(cumulative).collect())
                .collect(),
            local,
            free,
            external,
        })
    }

    fn trial(&self, key: [u8; 32], index: u64, tally: &mut Tally) {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        let lambda = sample_index(&self.lambda_cdf, rng.random::<f64>());
        let settings_cdf = self.external.as_ref().unwrap_or(&self.settings_cdf[lambda]);
        let cell = sample_index(settings_cdf, rng.random::<f64>());
        let ab = sample_index(&self.outcome_cdf[lambda][cell], rng.random::<f64>());
        tally.local += self.local[lambda] as u64;
        tally.free += self.free[lambda] as u64;
        tally.counts[cell][ab] += 1;
    }

    fn range(&self, key: [u8; 32], start: u64, end: u64) -> Tally {
        let mut t = Tally::new(self.cells);
        for i in start..end {
            self.trial(key, i, &mut t);
        }
        t
    }
}

fn stream_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn finish(m: &HvModel, cfg: &SimConfig, tally: Tally) -> SimResult {
    let (ma, mb) = (m.num_settings_a(), m.num_settings_b());
    let mut counts = vec![vec![[[0u64; 2]; 2]; mb]; ma];
    let mut behaviour = vec![vec![None; mb]; ma];
    let mut settings = vec![vec![0.0; mb]; ma];
    for x in 0..ma {
        for y in 0..mb {
            let c = tally.counts[x * mb + y];
            let total: u64 = c.iter().sum();
            counts[x][y] = [[c[0], c[1]], [c[2], c[3]]];
            settings[x][y] = total as f64 / cfg.trials as f64;
            if total > 0 {
                let f = |k: usize| c[k] as f64 / total as f64;
                behaviour[x][y] = Some([[f(0), f(1)], [f(2), f(3)]]);
            }
        }
    }
    SimResult {
        trials: cfg.trials,
        seed: cfg.seed,
        num_settings_a: ma,
        num_settings_b: mb,
        local_trials: tally.local,
        free_trials: tally.free,
        counts,
        behaviour,
        settings,
    }
}

fn check(cfg: &SimConfig) -> Result<()> {
    if cfg.trials == 0 {
        return Err(BellError::Config("at least one trial is required".to_string()));
    }
    Ok(())
}

/// Runs `cfg.trials` trials in parallel.
pub fn run(m: &HvModel, cfg: &SimConfig, tol: Tolerance) -> Result<SimResult> {
    check(cfg)?;
    let sampler = Sampler::new(m, cfg, tol)?;
    let key = stream_key(cfg.seed);
    let chunks = cfg.trials.div_ceil(CHUNK);
    let tally = (0..chunks)
        .into_par_iter()
        .map(|c| sampler.range(key, c * CHUNK, ((c + 1) * CHUNK).min(cfg.trials)))
        .reduce(|| Tally::new(sampler.cells), Tally::merge);
    Ok(finish(m, cfg, tally))
}

/// Same as [`run`] on the calling thread only.
pub fn run_serial(m: &HvModel, cfg: &SimConfig, tol: Tolerance) -> Result<SimResult> {
    check(cfg)?;
    let sampler = Sampler::new(m, cfg, tol)?;
    let tally = sampler.range(stream_key(cfg.seed), 0, cfg.trials);
    Ok(finish(m, cfg, tally))
}
