use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gridpath::{hard_query_scale, round_limited_search, MonotonePath, PathOracle, Strategy};
use crate::report::csv_writer;

/// Failure probability the randomized path construction guarantees against any
/// algorithm under the hard query scale. Reported next to measured rates, never asserted.
pub const REFERENCE_FAILURE_PROBABILITY: f64 = 7.0 / 40.0;

#[derive(Clone, Debug, Serialize)]
pub struct GridBenchConfig {
    pub n: usize,
    pub d: usize,
    pub ks: Vec<usize>,
    pub qs: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub strategy: Strategy,
}

impl Default for GridBenchConfig {
    fn default() -> Self {
        GridBenchConfig {
            n: 64,
            d: 2,
            ks: vec![1, 2, 4],
            qs: vec![1, 3, 10, 100],
            trials: 200,
            seed: 0,
            strategy: Strategy::Lookahead,
        }
    }
}

impl GridBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.trials == 0 {
            return Err(Error::invalid("n, d and trials must be at least 1"));
        }
        if self.ks.is_empty() || self.qs.is_empty() || self.ks.contains(&0) || self.qs.contains(&0) {
            return Err(Error::invalid("k and q grids must be non-empty and positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRow {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub q: usize,
    pub seed: u64,
    pub found: bool,
    pub rounds_used: usize,
    pub queries_used: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurfaceCell {
    pub k: usize,
    pub q: usize,
    pub trials: usize,
    pub failures: usize,
    pub failure_rate: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
    /// Whether any run went over its budget (always false for the builtin strategies).
    pub budget_rejections: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridBenchSummary {
    pub schema: &'static str,
    pub config: GridBenchConfig,
    pub cells: Vec<SurfaceCell>,
    /// `(k, hard query scale)` for each k.
    pub hard_query_scale: Vec<(usize, Option<f64>)>,
    pub reference_failure_probability: f64,
    /// Pairs `q < q'` at equal `k` whose intervals show a strictly higher failure rate at `q'`.
    pub trend_violations: usize,
}

pub struct GridBenchResult {
    pub summary: GridBenchSummary,
    pub rows: Vec<TrialRow>,
}

impl GridBenchResult {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, "gfgt-grid-bench/1")?;
        w.write_record(["n", "d", "k", "q", "seed", "found", "rounds_used", "queries_used"])?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.d.to_string(),
                r.k.to_string(),
                r.q.to_string(),
                r.seed.to_string(),
                r.found.to_string(),
                r.rounds_used.to_string(),
                r.queries_used.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// 95% Wilson score interval for `successes` out of `n`.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = (p + z * z / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

pub fn run_grid_bench(cfg: &GridBenchConfig) -> Result<GridBenchResult> {
    cfg.validate()?;
    let paths: Vec<PathOracle> = (0..cfg.trials)
        .map(|i| MonotonePath::random(cfg.n, cfg.d, cfg.seed.wrapping_add(i as u64)).map(PathOracle::new))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &k in &cfg.ks {
        for &q in &cfg.qs {
            let outcomes = paths
                .par_iter()
                .map(|o| round_limited_search(o, k, q, cfg.strategy, o.path().seed))
                .collect::<Result<Vec<_>>>()?;
            let failures = outcomes.iter().filter(|o| !o.found).count();
            let (lo, hi) = wilson_interval(failures, cfg.trials);
            cells.push(SurfaceCell {
                k,
                q,
                trials: cfg.trials,
                failures,
                failure_rate: failures as f64 / cfg.trials as f64,
                ci_low: lo,
                ci_high: hi,
                budget_rejections: outcomes.iter().filter(|o| o.error.is_some()).count(),
            });
            for (o, p) in outcomes.iter().zip(&paths) {
                rows.push(TrialRow {
                    n: cfg.n,
                    d: cfg.d,
                    k,
                    q,
                    seed: p.path().seed,
                    found: o.found,
                    rounds_used: o.rounds_used,
                    queries_used: o.queries_used,
                });
            }
        }
    }
    let mut trend_violations = 0;
    for a in &cells {
        for b in &cells {
            if a.k == b.k && a.q < b.q && b.ci_low > a.ci_high {
                trend_violations += 1;
            }
        }
    }
    Ok(GridBenchResult {
        summary: GridBenchSummary {
            schema: "gfgt-grid-bench-summary/1",
            config: cfg.clone(),
            hard_query_scale: cfg.ks.iter().map(|&k| (k, hard_query_scale(cfg.n, cfg.d, k))).collect(),
            reference_failure_probability: REFERENCE_FAILURE_PROBABILITY,
            cells,
            trend_violations,
        },
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 200);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.02);
        let (lo, hi) = wilson_interval(100, 200);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_row_never_fails() {
        let cfg = GridBenchConfig {
            n: 6,
            d: 2,
            ks: vec![1],
            qs: vec![49],
            trials: 30,
            strategy: Strategy::Exhaustive,
            ..GridBenchConfig::default()
        };
        let res = run_grid_bench(&cfg).unwrap();
        assert_eq!(res.summary.cells[0].failures, 0);
    }

    #[test]
    fn frontier_short_of_n_rounds_always_fails() {
        let cfg = GridBenchConfig {
            n: 10,
            d: 2,
            ks: vec![9],
            qs: vec![1],
            trials: 40,
            strategy: Strategy::Frontier,
            ..GridBenchConfig::default()
        };
        let res = run_grid_bench(&cfg).unwrap();
        assert_eq!(res.summary.cells[0].failure_rate, 1.0);
    }

    #[test]
    fn failure_rate_trend_in_q() {
        let cfg = GridBenchConfig {
            n: 64,
            d: 2,
            ks: vec![2],
            qs: vec![3, 30, 300, 3000],
            trials: 200,
            strategy: Strategy::LayerGuess,
            ..GridBenchConfig::default()
        };
        let res = run_grid_bench(&cfg).unwrap();
        assert_eq!(res.summary.trend_violations, 0);
        let rates: Vec<f64> = res.summary.cells.iter().map(|c| c.failure_rate).collect();
        assert!(rates[0] > 0.0);
        assert_eq!(*rates.last().unwrap(), 0.0);
    }
}
