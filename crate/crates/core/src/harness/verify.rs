use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::solve::{run_solve, Builtin, SolveConfig};
use crate::error::Result;
use crate::geometry::Point;
use crate::gridpath::{local_minima, round_limited_search, square_tiling_check, MonotonePath, PathOracle, Strategy};
use crate::hardchain::concentration::bound_crossing;
use crate::hardchain::properties::chain_suite;
use crate::hardchain::{component_suite, concentration_probe, ChainOracle, ChainPartition, Components, PropertyCheck, TestVector};
use crate::objectives::{Cosine, Quadratic};
use crate::oracle::{verify_gradient, Domain, Objective};

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub checks: Vec<PropertyCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed())
    }
}

fn single(name: &str, points: usize, bad: Vec<f64>) -> PropertyCheck {
    PropertyCheck {
        name: name.into(),
        points,
        violations: bad.len(),
        first_violation: bad.first().copied(),
    }
}

/// Largest relative FD error of the analytic gradient over `n` random points, per objective.
pub fn gradient_agreement(n: usize, seed: u64) -> Result<Vec<(String, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let cube_points = |d: usize, rng: &mut ChaCha8Rng| -> Result<Vec<Point<f64>>> {
        (0..n).map(|_| Point::new((0..d).map(|_| rng.random::<f64>()).collect())).collect()
    };
    let q = Quadratic::new(Point::new(vec![0.3, 0.8, 0.55])?, 1.0, Domain::UnitCube)?;
    let pts = cube_points(3, &mut rng)?;
    out.push(("quadratic".into(), verify_gradient(&q, &pts, 1e-5)?));
    let c = Cosine::new(3, 1.0, Domain::UnitCube)?;
    let pts = cube_points(3, &mut rng)?;
    out.push(("cosine".into(), verify_gradient(&c, &pts, 1e-5)?));
    let chain = ChainOracle::<f64>::unscaled(ChainPartition::sample(512, 64, seed)?);
    let pts: Vec<Point<f64>> = (0..n)
        .map(|_| {
            let s = 10f64.powf(rng.random_range(-1.0..1.0));
            Point::new((0..chain.dim()).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect())
        })
        .collect::<Result<_>>()?;
    out.push(("chain".into(), verify_gradient(&chain, &pts, 1e-5)?));
    Ok(out)
}

/// Brute-force uniqueness of the local minimum, `square` tiling and the frontier round count.
pub fn gridpath_suite(seeds: u64) -> Result<Vec<PropertyCheck>> {
    let mut unique = Vec::new();
    let mut points = 0;
    for (max_n, d) in [(8, 2), (4, 3)] {
        for n in 1..=max_n {
            for seed in 0..seeds {
                let o = PathOracle::new(MonotonePath::random(n, d, seed)?);
                points += 1;
                if local_minima(&o)? != vec![o.path().endpoint().to_vec()] {
                    unique.push((n * 1000 + d) as f64);
                }
            }
        }
    }
    let mut tiles = Vec::new();
    let mut tile_points = 0;
    for n in 1..=4 {
        for d in 1..=3 {
            tile_points += 1;
            if !square_tiling_check(n, d)? {
                tiles.push((n * 10 + d) as f64);
            }
        }
    }
    let mut frontier = Vec::new();
    let mut frontier_points = 0;
    for n in 1..=16 {
        for seed in 0..seeds {
            let o = PathOracle::new(MonotonePath::random(n, 2, seed)?);
            let r = round_limited_search(&o, 2 * n, 1, Strategy::Frontier, seed)?;
            frontier_points += 1;
            if !r.found || r.rounds_used != n {
                frontier.push(n as f64);
            }
        }
    }
    Ok(vec![
        single("unique local minimum at the path endpoint", points, unique),
        single("square(v) tiles the unit cube", tile_points, tiles),
        single("frontier with q = 1 uses exactly n rounds (d = 2)", frontier_points, frontier),
    ])
}

fn solve_suite() -> Result<Vec<PropertyCheck>> {
    let mut grad = Vec::new();
    let mut inv = Vec::new();
    let mut runs = 0;
    for func in [Builtin::Quadratic, Builtin::Cosine] {
        for k in 1..=3 {
            let cfg = SolveConfig {
                func,
                k,
                eps: 2e-2,
                trials: 2,
                trap_samples: 200,
                ..SolveConfig::default()
            };
            let (s, _) = run_solve(&cfg)?;
            for r in &s.records {
                runs += 1;
                if !r.success {
                    grad.push(r.grad_norm);
                }
                if r.invariant_violations > 0 {
                    inv.push(r.invariant_violations as f64);
                }
            }
        }
    }
    Ok(vec![
        single("output gradient norm <= eps", runs, grad),
        single("schedule and trap invariants", runs, inv),
    ])
}

fn concentration_suite(seed: u64) -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    for v in TestVector::ALL {
        let y = v.build(1024, seed);
        let ts: Vec<f64> = [0.5, 1.0, 2.0, 3.0].iter().map(|m| m * bound_crossing(&y, 64)).collect();
        let est = concentration_probe(&y, 64, 2000, &ts, seed)?;
        let bad: Vec<f64> = est.iter().filter(|e| !e.within_bound()).map(|e| e.t).collect();
        out.push(single(&format!("tail frequency <= bound ({})", v.name()), est.len(), bad));
    }
    Ok(out)
}

/// Every property suite, with `components` standing in for Ψ, Φ in the component checks.
pub fn verify_all(components: &Components, seed: u64) -> Result<Vec<SuiteReport>> {
    let grads = gradient_agreement(100, seed)?;
    Ok(vec![
        SuiteReport {
            name: "components".into(),
            checks: component_suite(components),
        },
        SuiteReport {
            name: "chain".into(),
            checks: chain_suite(seed),
        },
        SuiteReport {
            name: "gradients".into(),
            checks: grads
                .into_iter()
                .map(|(n, e)| single(&format!("{n}: FD relative error <= 1e-5"), 100, if e <= 1e-5 { vec![] } else { vec![e] }))
                .collect(),
        },
        SuiteReport {
            name: "solve".into(),
            checks: solve_suite()?,
        },
        SuiteReport {
            name: "gridpath".into(),
            checks: gridpath_suite(50)?,
        },
        SuiteReport {
            name: "concentration".into(),
            checks: concentration_suite(seed)?,
        },
    ])
}
