use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hardchain::{ChainOracle, ChainPartition};
use crate::oracle::QueryLedger;
use crate::report::csv_writer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    /// Best of `q` random ±1/√d perturbations (norm 1) of the incumbent, every round.
    ParallelRandomSearch,
    /// Forward-difference gradient steps; one gradient takes `⌈(d+1)/q⌉` rounds.
    BatchedFdGradientDescent,
}

impl Baseline {
    pub const ALL: [Baseline; 2] = [Baseline::ParallelRandomSearch, Baseline::BatchedFdGradientDescent];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::ParallelRandomSearch => "parallel-random-search",
            Baseline::BatchedFdGradientDescent => "batched-fd-gradient-descent",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown baseline {s:?}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainBenchConfig {
    pub d: usize,
    pub d0: usize,
    pub rounds: usize,
    pub queries_per_round: usize,
    pub trials: usize,
    pub seed: u64,
    pub baselines: Vec<Baseline>,
    /// Gradient-descent step size.
    pub step: f64,
    /// Forward-difference increment.
    pub fd_increment: f64,
}

impl Default for ChainBenchConfig {
    fn default() -> Self {
        ChainBenchConfig {
            d: 4096,
            d0: 256,
            rounds: 20,
            queries_per_round: 1000,
            trials: 200,
            seed: 0,
            baselines: Baseline::ALL.to_vec(),
            step: 1.0,
            fd_increment: 1e-4,
        }
    }
}

impl ChainBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d0 == 0 || self.d % self.d0 != 0 || self.d / self.d0 < 3 {
            return Err(Error::invalid(format!(
                "need d0 | d and d/d0 >= 3, got d = {}, d0 = {}",
                self.d, self.d0
            )));
        }
        if self.queries_per_round == 0 || self.trials == 0 {
            return Err(Error::invalid("queries per round and trials must be at least 1"));
        }
        if !(self.step > 0.0 && self.fd_increment > 0.0) {
            return Err(Error::invalid("step and fd increment must be positive"));
        }
        if self.baselines.is_empty() {
            return Err(Error::invalid("no baseline selected"));
        }
        Ok(())
    }
}

/// Progress after one round of one trial.
#[derive(Clone, Debug, Serialize)]
pub struct RoundRow {
    pub baseline: Baseline,
    pub trial: usize,
    pub seed: u64,
    pub round: usize,
    pub queries: usize,
    /// Largest progress index among this round's queries.
    pub round_progress: usize,
    /// Largest progress index over all queries so far, round 0 included.
    pub progress: usize,
    /// Queried points with progress index at most r, where the gradient floor applies.
    pub floor_checked: usize,
    pub floor_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BaselineSummary {
    pub baseline: Baseline,
    pub trials: usize,
    /// Trials whose progress stayed at most 2t after every round t.
    pub trials_within_2t: usize,
    pub fraction_within_2t: f64,
    /// Worst per-round fraction of trials with progress at most 2t.
    pub min_round_fraction: f64,
    pub max_progress: usize,
    pub floor_checked: u64,
    pub floor_violations: u64,
    pub min_gradient_norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainBenchSummary {
    pub schema: &'static str,
    pub config: ChainBenchConfig,
    pub r: usize,
    pub baselines: Vec<BaselineSummary>,
}

pub struct ChainBenchResult {
    pub summary: ChainBenchSummary,
    pub rows: Vec<RoundRow>,
}

impl ChainBenchResult {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, "gfgt-chain-bench/1")?;
        w.write_record([
            "baseline",
            "trial",
            "seed",
            "round",
            "queries",
            "round_progress",
            "progress",
            "floor_checked",
            "floor_violations",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.baseline.to_string(),
                r.trial.to_string(),
                r.seed.to_string(),
                r.round.to_string(),
                r.queries.to_string(),
                r.round_progress.to_string(),
                r.progress.to_string(),
                r.floor_checked.to_string(),
                r.floor_violations.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Answers queries round by round and keeps the progress and gradient-floor tallies.
struct Tracker<'a> {
    oracle: &'a ChainOracle<f64>,
    ledger: QueryLedger,
    progress: usize,
    round_progress: usize,
    floor_checked: usize,
    floor_violations: usize,
    min_grad: f64,
}

impl Tracker<'_> {
    fn open(&mut self, n: usize) -> Result<()> {
        self.ledger.open_round(n)?;
        self.round_progress = 0;
        self.floor_checked = 0;
        self.floor_violations = 0;
        Ok(())
    }

    fn query(&mut self, x: &[f64]) -> Result<f64> {
        let e = self.oracle.analyze(x)?;
        let idx = e.progress.index;
        self.round_progress = self.round_progress.max(idx);
        self.progress = self.progress.max(idx);
        if idx <= self.oracle.r() {
            self.floor_checked += 1;
            self.min_grad = self.min_grad.min(e.gradient_norm);
            if e.gradient_norm < 0.08 {
                self.floor_violations += 1;
            }
        }
        Ok(e.value)
    }

    fn row(&self, baseline: Baseline, trial: usize, seed: u64, round: usize, queries: usize) -> RoundRow {
        RoundRow {
            baseline,
            trial,
            seed,
            round,
            queries,
            round_progress: self.round_progress,
            progress: self.progress,
            floor_checked: self.floor_checked,
            floor_violations: self.floor_violations,
        }
    }
}

fn random_search(cfg: &ChainBenchConfig, t: &mut Tracker, rng: &mut ChaCha8Rng, emit: &mut dyn FnMut(&Tracker, usize, usize)) -> Result<()> {
    let d = cfg.d;
    let amp = 1.0 / (d as f64).sqrt();
    let mut best = vec![0.0; d];
    let mut f_best = t.query(&best)?;
    emit(t, 0, 1);
    let mut cand = vec![0.0; d];
    let mut winner = vec![0.0; d];
    for round in 1..=cfg.rounds {
        t.open(cfg.queries_per_round)?;
        let mut f_win = f64::INFINITY;
        for _ in 0..cfg.queries_per_round {
            let mut bits = 0u64;
            for (i, c) in cand.iter_mut().enumerate() {
                if i % 64 == 0 {
                    bits = rng.next_u64();
                }
                let sign = if bits >> (i % 64) & 1 == 1 { amp } else { -amp };
                *c = best[i] + sign;
            }
            let v = t.query(&cand)?;
            if v < f_win {
                f_win = v;
                winner.copy_from_slice(&cand);
            }
        }
        if f_win < f_best {
            f_best = f_win;
            best.copy_from_slice(&winner);
        }
        emit(t, round, cfg.queries_per_round);
    }
    Ok(())
}

fn fd_descent(cfg: &ChainBenchConfig, t: &mut Tracker, emit: &mut dyn FnMut(&Tracker, usize, usize)) -> Result<()> {
    let d = cfg.d;
    let h = cfg.fd_increment;
    let mut x = vec![0.0; d];
    t.query(&x)?;
    emit(t, 0, 1);
    // Probe 0 is x itself, probe j + 1 is x + h e_j.
    let mut values = vec![0.0; d + 1];
    let mut next = 0usize;
    let mut probe = vec![0.0; d];
    for round in 1..=cfg.rounds {
        let n = cfg.queries_per_round.min(d + 1 - next);
        t.open(n)?;
        for p in next..next + n {
            probe.copy_from_slice(&x);
            if p > 0 {
                probe[p - 1] += h;
            }
            values[p] = t.query(&probe)?;
        }
        next += n;
        if next == d + 1 {
            for j in 0..d {
                x[j] -= cfg.step * (values[j + 1] - values[0]) / h;
            }
            next = 0;
        }
        emit(t, round, n);
    }
    Ok(())
}

fn run_trial(cfg: &ChainBenchConfig, baseline: Baseline, trial: usize) -> Result<(Vec<RoundRow>, f64)> {
    let seed = cfg.seed.wrapping_add(trial as u64);
    let part = ChainPartition::sample(cfg.d, cfg.d0, seed)?;
    let oracle = ChainOracle::<f64>::unscaled(part);
    let mut t = Tracker {
        oracle: &oracle,
        ledger: QueryLedger::with_budget(Some(cfg.rounds), Some(cfg.queries_per_round)),
        progress: 0,
        round_progress: 0,
        floor_checked: 0,
        floor_violations: 0,
        min_grad: f64::INFINITY,
    };
    let mut rows = Vec::with_capacity(cfg.rounds + 1);
    let mut emit = |t: &Tracker, round: usize, queries: usize| rows.push(t.row(baseline, trial, seed, round, queries));
    match baseline {
        Baseline::ParallelRandomSearch => {
            // Perturbations use a stream independent of the partition seed.
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
            random_search(cfg, &mut t, &mut rng, &mut emit)?
        }
        Baseline::BatchedFdGradientDescent => fd_descent(cfg, &mut t, &mut emit)?,
    }
    let min_grad = t.min_grad;
    Ok((rows, min_grad))
}

/// Tracks the progress index of each baseline on the unscaled chain function.
pub fn run_chain_bench(cfg: &ChainBenchConfig) -> Result<ChainBenchResult> {
    cfg.validate()?;
    let r = cfg.d / cfg.d0 - 2;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &b in &cfg.baselines {
        let per_trial: Vec<(Vec<RoundRow>, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, b, i))
            .collect::<Result<_>>()?;
        let mut within = 0;
        let mut per_round_ok = vec![0usize; cfg.rounds + 1];
        let mut max_progress = 0;
        let (mut checked, mut violations) = (0u64, 0u64);
        let mut min_grad = f64::INFINITY;
        for (trial_rows, g) in &per_trial {
            let mut ok = true;
            for row in trial_rows {
                if row.progress <= 2 * row.round {
                    per_round_ok[row.round] += 1;
                } else {
                    ok = false;
                }
                max_progress = max_progress.max(row.progress);
                checked += row.floor_checked as u64;
                violations += row.floor_violations as u64;
            }
            within += usize::from(ok);
            min_grad = min_grad.min(*g);
        }
        let n = cfg.trials as f64;
        summaries.push(BaselineSummary {
            baseline: b,
            trials: cfg.trials,
            trials_within_2t: within,
            fraction_within_2t: within as f64 / n,
            min_round_fraction: per_round_ok.iter().map(|&c| c as f64 / n).fold(1.0, f64::min),
            max_progress,
            floor_checked: checked,
            floor_violations: violations,
            min_gradient_norm: min_grad,
        });
        rows.extend(per_trial.into_iter().flat_map(|(r, _)| r));
    }
    Ok(ChainBenchResult {
        summary: ChainBenchSummary {
            schema: "gfgt-chain-bench-summary/1",
            config: cfg.clone(),
            r,
            baselines: summaries,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ChainBenchConfig {
        ChainBenchConfig {
            d: 256,
            d0: 32,
            rounds: 6,
            queries_per_round: 100,
            trials: 4,
            ..ChainBenchConfig::default()
        }
    }

    #[test]
    fn zero_rounds_means_zero_progress() {
        let cfg = ChainBenchConfig { rounds: 0, ..small() };
        let res = run_chain_bench(&cfg).unwrap();
        assert!(res.rows.iter().all(|r| r.round == 0 && r.progress == 0));
        assert_eq!(res.rows.len(), 8);
    }

    #[test]
    fn small_bench_is_reproducible_and_respects_budgets() {
        let a = run_chain_bench(&small()).unwrap();
        let b = run_chain_bench(&small()).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv(&mut x).unwrap();
        b.write_csv(&mut y).unwrap();
        assert_eq!(x, y);
        assert!(a.rows.iter().all(|r| r.queries <= 100));
        assert_eq!(a.rows.len(), 2 * 4 * 7);
        for s in &a.summary.baselines {
            assert_eq!(s.floor_violations, 0);
        }
    }

    #[test]
    fn fd_descent_spreads_gradients_over_rounds() {
        let cfg = ChainBenchConfig {
            baselines: vec![Baseline::BatchedFdGradientDescent],
            trials: 1,
            ..small()
        };
        let res = run_chain_bench(&cfg).unwrap();
        let q: Vec<usize> = res.rows.iter().map(|r| r.queries).collect();
        assert_eq!(q, vec![1, 100, 100, 57, 100, 100, 57]);
    }
}
