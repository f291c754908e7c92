use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, DEFAULT_NET_CAP};
use crate::hardchain::{ChainOracle, ChainPartition};
use crate::objectives::{Cosine, Quadratic};
use crate::oracle::{BatchSession, Domain, Objective};
use crate::report::{csv_writer, fmt_f64};
use crate::trap::{gfgt, stationarity, GfgtConfig, Instrumentation, Mode, RunTrace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builtin {
    Quadratic,
    Cosine,
    Chain,
}

impl Builtin {
    pub fn name(self) -> &'static str {
        match self {
            Builtin::Quadratic => "quadratic",
            Builtin::Cosine => "cosine",
            Builtin::Chain => "chain",
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Builtin::Quadratic, Builtin::Cosine, Builtin::Chain]
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown function {s:?}")))
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cube" => Ok(Mode::Cube),
            "unconstrained" => Ok(Mode::Unconstrained),
            _ => Err(Error::invalid(format!("unknown mode {s:?}"))),
        }
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Cube => "cube",
        Mode::Unconstrained => "unconstrained",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveConfig {
    pub func: Builtin,
    pub d: usize,
    pub k: usize,
    pub eps: f64,
    pub lipschitz: f64,
    pub mode: Mode,
    pub seed: u64,
    pub trials: usize,
    /// Boundary samples per iteration for the trap check; 0 disables it.
    pub trap_samples: usize,
    pub net_cap: usize,
    /// Part size of the chain function.
    pub d0: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            func: Builtin::Quadratic,
            d: 2,
            k: 3,
            eps: 1e-2,
            lipschitz: 1.0,
            mode: Mode::Cube,
            seed: 0,
            trials: 1,
            trap_samples: 1000,
            net_cap: DEFAULT_NET_CAP,
            d0: 1,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::invalid("d must be at least 2"));
        }
        if self.k == 0 || self.trials == 0 {
            return Err(Error::invalid("k and trials must be at least 1"));
        }
        for (name, v) in [("eps", self.eps), ("lipschitz", self.lipschitz)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.func == Builtin::Chain && (self.d0 == 0 || self.d % self.d0 != 0 || self.d / self.d0 < 3) {
            return Err(Error::invalid(format!(
                "chain needs d0 | d and d/d0 >= 3, got d = {}, d0 = {}",
                self.d, self.d0
            )));
        }
        Ok(())
    }

    /// Seed of trial `i`.
    pub fn trial_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

/// One solve run: objective, start point and everything measured.
#[derive(Clone, Debug, Serialize)]
pub struct SolveRecord {
    pub trial: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    /// Minimizer of the quadratic builtin, empty otherwise.
    pub center: Vec<f64>,
    pub x: Vec<f64>,
    pub f_x: f64,
    pub rounds: usize,
    pub rounds_with_initial: usize,
    pub total_queries: u64,
    pub max_batch: usize,
    pub grad_norm: f64,
    pub success: bool,
    pub invariant_violations: usize,
    pub trap_samples: usize,
    pub trap_violations: usize,
    pub final_side: f64,
    pub final_side_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub schema: &'static str,
    pub config: SolveConfig,
    pub records: Vec<SolveRecord>,
    pub successes: usize,
    pub invariant_violations: usize,
}

impl SolveSummary {
    pub fn all_succeeded(&self) -> bool {
        self.successes == self.records.len()
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let c = &self.config;
        let mut w = csv_writer(out, "gfgt-solve/1")?;
        w.write_record([
            "trial",
            "seed",
            "func",
            "mode",
            "d",
            "k",
            "eps",
            "lipschitz",
            "rounds",
            "rounds_with_initial",
            "total_queries",
            "max_batch",
            "grad_norm",
            "success",
            "invariant_violations",
            "trap_samples",
            "trap_violations",
            "final_side",
        ])?;
        for r in &self.records {
            w.write_record([
                r.trial.to_string(),
                r.seed.to_string(),
                c.func.to_string(),
                mode_name(c.mode).to_string(),
                c.d.to_string(),
                c.k.to_string(),
                fmt_f64(c.eps),
                fmt_f64(c.lipschitz),
                r.rounds.to_string(),
                r.rounds_with_initial.to_string(),
                r.total_queries.to_string(),
                r.max_batch.to_string(),
                fmt_f64(r.grad_norm),
                r.success.to_string(),
                r.invariant_violations.to_string(),
                r.trap_samples.to_string(),
                r.trap_violations.to_string(),
                fmt_f64(r.final_side),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn random_point(rng: &mut ChaCha8Rng, d: usize, mode: Mode) -> Vec<f64> {
    match mode {
        Mode::Cube => (0..d).map(|_| rng.random::<f64>()).collect(),
        Mode::Unconstrained => (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// Runs one trial and returns its record and trace.
pub fn solve_trial(cfg: &SolveConfig, trial: usize) -> Result<(SolveRecord, RunTrace<f64>)> {
    cfg.validate()?;
    let seed = cfg.trial_seed(trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = match cfg.mode {
        Mode::Cube => Domain::UnitCube,
        Mode::Unconstrained => Domain::Whole,
    };
    let mut center = Vec::new();
    let obj: Box<dyn Objective<f64>> = match cfg.func {
        Builtin::Quadratic => {
            center = random_point(&mut rng, cfg.d, cfg.mode);
            Box::new(Quadratic::new(Point::new(center.clone())?, cfg.lipschitz, domain)?)
        }
        Builtin::Cosine => Box::new(Cosine::new(cfg.d, cfg.lipschitz, domain)?),
        Builtin::Chain => {
            let part = ChainPartition::sample(cfg.d, cfg.d0, seed)?;
            Box::new(ChainOracle::<f64>::unscaled(part))
        }
    };
    let x0 = random_point(&mut rng, cfg.d, cfg.mode);
    // The chain declares its own smoothness; the flag sets it for the other builtins.
    let lipschitz = obj.lipschitz();
    let mut gcfg = GfgtConfig::new(cfg.eps, lipschitz, cfg.k, Point::new(x0.clone())?, cfg.mode);
    gcfg.net_cap = cfg.net_cap;
    if cfg.trap_samples > 0 {
        gcfg.instrument = Some(Instrumentation {
            samples_per_iter: cfg.trap_samples,
            seed,
        });
    }
    let mut session = BatchSession::new(obj.as_ref());
    let out = gfgt(&gcfg, &mut session)?;
    let grad_norm = stationarity(obj.as_ref(), &out.x, cfg.mode)?;
    let inv = &out.trace.invariants;
    let record = SolveRecord {
        trial,
        seed,
        x0,
        center,
        x: out.x.coords().to_vec(),
        f_x: out.f_x,
        rounds: out.rounds,
        rounds_with_initial: out.rounds_with_initial,
        total_queries: out.total_queries,
        max_batch: session.ledger().max_batch_size(),
        grad_norm,
        success: grad_norm <= cfg.eps,
        invariant_violations: inv.violations(),
        trap_samples: inv.trap_samples,
        trap_violations: inv.trap_violations,
        final_side: inv.final_side,
        final_side_bound: inv.final_side_bound,
    };
    Ok((record, out.trace))
}

/// Runs every trial in order and collects the traces.
pub fn run_solve(cfg: &SolveConfig) -> Result<(SolveSummary, Vec<RunTrace<f64>>)> {
    cfg.validate()?;
    let mut records = Vec::with_capacity(cfg.trials);
    let mut traces = Vec::with_capacity(cfg.trials);
    for i in 0..cfg.trials {
        let (r, t) = solve_trial(cfg, i)?;
        records.push(r);
        traces.push(t);
    }
    let successes = records.iter().filter(|r| r.success).count();
    let invariant_violations = records.iter().map(|r| r.invariant_violations).sum();
    Ok((
        SolveSummary {
            schema: "gfgt-solve-summary/1",
            config: cfg.clone(),
            records,
            successes,
            invariant_violations,
        },
        traces,
    ))
}

/// Total and per-round queries of one cube-mode quadratic run at each `ε`.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingPoint {
    pub eps: f64,
    pub total_queries: u64,
    pub max_batch: usize,
}

pub fn query_scaling(d: usize, k: usize, eps: &[f64], seed: u64) -> Result<Vec<ScalingPoint>> {
    eps.iter()
        .map(|&e| {
            let cfg = SolveConfig {
                d,
                k,
                eps: e,
                seed,
                trap_samples: 0,
                ..SolveConfig::default()
            };
            let (r, _) = solve_trial(&cfg, 0)?;
            Ok(ScalingPoint {
                eps: e,
                total_queries: r.total_queries,
                max_batch: r.max_batch,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `(d−1)/(2(q^k − 1)) + (d−1)/2` with `q = 2d/(d+1)`: the exponent of `1/ε` in the
/// per-round query count of a `k`-round run.
pub fn per_round_exponent(d: usize, k: usize) -> f64 {
    let df = d as f64;
    let q = 2.0 * df / (df + 1.0);
    (df - 1.0) / (2.0 * (q.powi(k as i32) - 1.0)) + (df - 1.0) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_quadratic_example() {
        let (s, traces) = run_solve(&SolveConfig::default()).unwrap();
        assert!(s.all_succeeded());
        assert_eq!(s.invariant_violations, 0);
        assert_eq!(traces.len(), 1);
        assert!(s.records[0].grad_norm <= 1e-2);
    }

    #[test]
    fn loose_eps_finishes_at_once() {
        let cfg = SolveConfig {
            k: 1,
            eps: 10.0,
            ..SolveConfig::default()
        };
        let (s, _) = run_solve(&cfg).unwrap();
        assert!(s.all_succeeded());
    }

    #[test]
    fn exponent_values() {
        assert!((per_round_exponent(2, 1) - 2.0).abs() < 1e-12);
        assert!((per_round_exponent(2, 2) - 16.0 / 14.0).abs() < 1e-12);
        assert!((loglog_slope(&[1.0, 10.0, 100.0], &[3.0, 300.0, 30000.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn config_errors() {
        let bad = SolveConfig {
            d: 1,
            ..SolveConfig::default()
        };
        assert!(matches!(run_solve(&bad), Err(Error::InvalidArgument(_))));
        let chain = SolveConfig {
            func: Builtin::Chain,
            d: 4,
            d0: 3,
            ..SolveConfig::default()
        };
        assert!(chain.validate().is_err());
        assert_eq!("cube".parse::<Mode>().unwrap(), Mode::Cube);
        assert_eq!("chain".parse::<Builtin>().unwrap(), Builtin::Chain);
    }

    #[test]
    fn csv_is_reproducible() {
        let cfg = SolveConfig {
            trials: 2,
            func: Builtin::Cosine,
            ..SolveConfig::default()
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        run_solve(&cfg).unwrap().0.write_csv(&mut a).unwrap();
        run_solve(&cfg).unwrap().0.write_csv(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(String::from_utf8(a).unwrap().starts_with("# schema: gfgt-solve/1\n"));
    }
}
