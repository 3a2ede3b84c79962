//! Monte Carlo recovery experiments: sample a signal from the prior, measure it with a
//! Gaussian matrix, solve weighted ℓ1 minimization and check whether the signal came back.
//!
//! Indices are 0-based here; position j stands for the point (j + 1)/n of [0, 1].

mod lp;

pub use lp::{solve_weighted_l1, Matrix, SolveReport, SolveStatus, SolverOptions};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::shapes::{Role, ShapeFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Sampled { seed: u64 },
    LeadingFace { k: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalInstance {
    pub n: usize,
    /// Sorted, distinct indices in 0..n.
    pub support: Vec<usize>,
    /// Nonzero values, aligned with `support`.
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl SignalInstance {
    pub fn k(&self) -> usize {
        self.support.len()
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }
}

fn nonzero_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z != 0.0 {
            return z;
        }
    }
}

/// Draws a signal whose entry j is nonzero with probability p((j + 1)/n), independently.
pub fn sample_signal<R: Rng + ?Sized>(
    p: &ShapeFunction<f64>,
    n: usize,
    seed: u64,
    rng: &mut R,
) -> Result<SignalInstance> {
    if p.role() != Role::Probability {
        return Err(Error::InvalidShape(
            "sample_signal needs a probability shape".into(),
        ));
    }
    let mut support = Vec::new();
    let mut values = Vec::new();
    for j in 0..n {
        let pj = p.eval((j + 1) as f64 / n as f64);
        // always draw both numbers so the stream layout does not depend on p
        let u: f64 = rng.random();
        let z = nonzero_normal(rng);
        if u < pj {
            support.push(j);
            values.push(z);
        }
    }
    Ok(SignalInstance {
        n,
        support,
        values,
        provenance: Provenance::Sampled { seed },
    })
}

/// Signal supported on the first k entries with standard normal values.
pub fn leading_face_signal<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    rng: &mut R,
) -> Result<SignalInstance> {
    if k > n {
        return Err(Error::Domain(format!(
            "leading face needs k <= n, got k={k}, n={n}"
        )));
    }
    let values = (0..k).map(|_| nonzero_normal(rng)).collect();
    Ok(SignalInstance {
        n,
        support: (0..k).collect(),
        values,
        provenance: Provenance::LeadingFace { k },
    })
}

/// Gaussian m×n matrix whose (row, col) entry is a pure function of (seed, row, col).
///
/// Row i reads ChaCha8 stream i + 1 (stream 0 is left to the signal draw); column j
/// consumes 32-bit words 4j..4j+4 of it for one Box–Muller pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MeasurementEnsemble {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

fn box_muller(a: u64, b: u64) -> f64 {
    let scale = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * scale;
    let u2 = (b >> 11) as f64 * scale;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl MeasurementEnsemble {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        MeasurementEnsemble { m, n, seed }
    }

    fn stream(&self, row: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(row as u64 + 1);
        rng
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let mut rng = self.stream(row);
        rng.set_word_pos(4 * col as u128);
        box_muller(rng.next_u64(), rng.next_u64())
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        let mut rng = self.stream(row);
        (0..self.n)
            .map(|_| box_muller(rng.next_u64(), rng.next_u64()))
            .collect()
    }

    pub fn matrix(&self) -> Matrix<f64> {
        let data: Vec<f64> = (0..self.m).flat_map(|i| self.row(i)).collect();
        Matrix::from_rows(self.m, self.n, data)
    }
}

/// Seed for trial `trial` of a run, a function of (master, trial) only.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

/// Recovery verdict; `None` when the solver did not reach optimal status.
pub fn judge_recovery(x_true: &SignalInstance, report: &SolveReport<f64>) -> Option<bool> {
    if report.status != SolveStatus::Optimal || report.minimizer.len() != x_true.n {
        return None;
    }
    Some(recovered(&x_true.dense(), &report.minimizer))
}

pub(crate) fn recovered(x: &[f64], xhat: &[f64]) -> bool {
    let err: f64 = x
        .iter()
        .zip(xhat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    err <= 1e-4 * scale.max(1.0)
}

#[derive(Clone, Debug, PartialEq)]
pub enum SignalModel {
    LeadingFace { k: usize },
    Prior(ShapeFunction<f64>),
}

#[derive(Clone, Debug)]
pub struct TrialConfig {
    pub model: SignalModel,
    /// Weight shape; entry j gets weight f((j + 1)/n).
    pub weight: ShapeFunction<f64>,
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
    pub solver: SolverOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub status: SolveStatus,
    pub success: Option<bool>,
    pub objective: f64,
    pub residual: f64,
    pub iterations: usize,
}

impl TrialRecord {
    pub const CSV_HEADER: [&'static str; 10] = [
        "trial",
        "seed",
        "m",
        "n",
        "k",
        "status",
        "success",
        "objective",
        "residual",
        "iterations",
    ];

    /// Fields in `CSV_HEADER` order. An indeterminate trial has an empty success field.
    pub fn csv_fields(&self) -> [String; 10] {
        [
            self.trial.to_string(),
            self.seed.to_string(),
            self.m.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.status.to_string(),
            self.success.map(|s| s.to_string()).unwrap_or_default(),
            format!("{:e}", self.objective),
            format!("{:e}", self.residual),
            self.iterations.to_string(),
        ]
    }
}

#[derive(Clone, Debug)]
pub struct TrialSummary {
    pub failures: usize,
    pub indeterminate: usize,
    pub records: Vec<TrialRecord>,
}

impl TrialSummary {
    pub fn decided(&self) -> usize {
        self.records.len() - self.indeterminate
    }

    /// failures / decided trials; NaN if every trial was indeterminate.
    pub fn failure_rate(&self) -> f64 {
        let d = self.decided();
        if d == 0 {
            f64::NAN
        } else {
            self.failures as f64 / d as f64
        }
    }

    /// Wilson 95% interval for the failure probability.
    pub fn wilson(&self) -> (f64, f64) {
        wilson_interval(self.failures, self.decided(), 1.959963984540054)
    }
}

/// Wilson score interval for `hits` out of `n`; (0, 1) when n = 0.
pub fn wilson_interval(hits: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn validate(cfg: &TrialConfig) -> Result<()> {
    if cfg.trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    if cfg.m == 0 || cfg.m > cfg.n {
        return Err(Error::Domain(format!(
            "need 1 <= m <= n, got m={}, n={}",
            cfg.m, cfg.n
        )));
    }
    if cfg.weight.role() != Role::Weight {
        return Err(Error::InvalidShape(
            "trial weights need a weight shape".into(),
        ));
    }
    match &cfg.model {
        SignalModel::LeadingFace { k } if *k > cfg.n => {
            Err(Error::Domain(format!("k={k} exceeds n={}", cfg.n)))
        }
        SignalModel::Prior(p) if p.role() != Role::Probability => Err(Error::InvalidShape(
            "signal prior needs a probability shape".into(),
        )),
        _ => Ok(()),
    }
}

pub fn weight_vector(f: &ShapeFunction<f64>, n: usize) -> Vec<f64> {
    (0..n).map(|j| f.eval((j + 1) as f64 / n as f64)).collect()
}

/// One trial, fully determined by (cfg, trial).
pub fn run_trial(cfg: &TrialConfig, w: &[f64], trial: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.master_seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = match &cfg.model {
        SignalModel::LeadingFace { k } => leading_face_signal(*k, cfg.n, &mut rng)?,
        SignalModel::Prior(p) => sample_signal(p, cfg.n, seed, &mut rng)?,
    };
    let a = MeasurementEnsemble::new(cfg.m, cfg.n, seed).matrix();
    let y = a.mul_vec(&signal.dense());
    let rep = solve_weighted_l1(&a, &y, w, &cfg.solver);
    Ok(TrialRecord {
        trial,
        seed,
        m: cfg.m,
        n: cfg.n,
        k: signal.k(),
        status: rep.status,
        success: judge_recovery(&signal, &rep),
        objective: rep.objective,
        residual: rep.residual,
        iterations: rep.iterations,
    })
}

/// Runs all trials in parallel on the current rayon pool. Records come back in trial order
/// and do not depend on the number of workers.
pub fn run_trials(cfg: &TrialConfig) -> Result<TrialSummary> {
    validate(cfg)?;
    let w = weight_vector(&cfg.weight, cfg.n);
    if w.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidShape(
            "weights must be positive on (0, 1]".into(),
        ));
    }
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &w, t))
        .collect::<Result<Vec<_>>>()?;
    let failures = records.iter().filter(|r| r.success == Some(false)).count();
    let indeterminate = records.iter().filter(|r| r.success.is_none()).count();
    Ok(TrialSummary {
        failures,
        indeterminate,
        records,
    })
}
