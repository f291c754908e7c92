use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::path::PathOracle;
use crate::error::{Error, Result};
use crate::oracle::QueryLedger;

/// Largest candidate set a strategy will enumerate in memory.
const ENUMERATION_CAP: usize = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Strategy {
    /// Queries the grid in a seeded random order, `q` vertices per round.
    Exhaustive,
    /// Walks the path one step per round, inferring the last candidate without a query.
    Frontier,
    /// Queries the whole monotone cone ahead of the known path vertex up to the
    /// deepest layer that fits into `q`.
    Lookahead,
    /// Guesses uniformly among uneliminated vertices of the last layer `‖v‖₁ = n`.
    LayerGuess,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Exhaustive,
        Strategy::Frontier,
        Strategy::Lookahead,
        Strategy::LayerGuess,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Frontier => "frontier",
            Strategy::Lookahead => "lookahead",
            Strategy::LayerGuess => "layer-guess",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SearchOutcome {
    pub strategy: Strategy,
    pub found: bool,
    pub answer: Option<Vec<usize>>,
    pub rounds_used: usize,
    pub queries_used: u64,
    /// Set when the session rejected a request; the run then counts as failed.
    pub error: Option<String>,
    pub ledger: QueryLedger,
}

/// All oracle access of a search goes through here, one round per call.
struct Session<'a> {
    oracle: &'a PathOracle,
    ledger: QueryLedger,
    /// Deepest known path vertex.
    best: Vec<usize>,
}

impl Session<'_> {
    fn query(&mut self, batch: &[Vec<usize>]) -> Result<Vec<i64>> {
        self.ledger.open_round(batch.len())?;
        let values = batch.iter().map(|v| self.oracle.value(v)).collect::<Result<Vec<_>>>()?;
        for (v, &p) in batch.iter().zip(&values) {
            if p < 0 && -p > self.best.iter().sum::<usize>() as i64 {
                self.best = v.clone();
            }
        }
        Ok(values)
    }

    fn rounds_left(&self, k: usize) -> bool {
        self.ledger.round_count() < k
    }

    fn at_end(&self, n: usize) -> bool {
        self.best.iter().sum::<usize>() == n
    }
}

/// Runs `strategy` with at most `k` rounds of at most `q` queries. The answer is
/// the deepest path vertex the strategy has identified; `found` iff it is the endpoint.
pub fn round_limited_search(oracle: &PathOracle, k: usize, q: usize, strategy: Strategy, seed: u64) -> Result<SearchOutcome> {
    if k == 0 || q == 0 {
        return Err(Error::invalid("k and q must be at least 1"));
    }
    let g = oracle.grid();
    let mut s = Session {
        oracle,
        ledger: QueryLedger::with_budget(Some(k), Some(q)),
        best: vec![0; g.d],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let run = match strategy {
        Strategy::Exhaustive => exhaustive(&mut s, k, q, &mut rng),
        Strategy::Frontier => frontier(&mut s, k, q),
        Strategy::Lookahead => lookahead(&mut s, k, q),
        Strategy::LayerGuess => layer_guess(&mut s, k, q, &mut rng),
    };
    let error = match run {
        Ok(()) => None,
        Err(e @ Error::ResourceLimit { .. }) => Some(e.to_string()),
        Err(e) => return Err(e),
    };
    let answer = s.best.clone();
    let found = error.is_none() && answer == oracle.path().endpoint();
    Ok(SearchOutcome {
        strategy,
        found,
        answer: Some(answer),
        rounds_used: s.ledger.round_count(),
        queries_used: s.ledger.total_queries(),
        error,
        ledger: s.ledger,
    })
}

fn exhaustive(s: &mut Session, k: usize, q: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let g = s.oracle.grid();
    let count = g
        .vertex_count()
        .filter(|&c| c <= ENUMERATION_CAP)
        .ok_or_else(|| Error::invalid("grid too large for the exhaustive strategy"))?;
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(rng);
    for chunk in order.chunks(q) {
        if !s.rounds_left(k) || s.at_end(g.n) {
            break;
        }
        let batch: Vec<Vec<usize>> = chunk.iter().map(|&i| g.vertex(i)).collect();
        s.query(&batch)?;
    }
    Ok(())
}

fn frontier(s: &mut Session, k: usize, q: usize) -> Result<()> {
    let g = s.oracle.grid();
    let mut excluded: Vec<usize> = Vec::new();
    while !s.at_end(g.n) {
        let v = s.best.clone();
        let open: Vec<usize> = (0..g.d).filter(|&a| v[a] < g.n && !excluded.contains(&a)).collect();
        if open.len() == 1 {
            // The path has to continue along the only remaining axis.
            let mut u = v;
            u[open[0]] += 1;
            s.best = u;
            excluded.clear();
            continue;
        }
        if !s.rounds_left(k) {
            break;
        }
        let axes = &open[..q.min(open.len() - 1)];
        let batch: Vec<Vec<usize>> = axes
            .iter()
            .map(|&a| {
                let mut u = v.clone();
                u[a] += 1;
                u
            })
            .collect();
        let before = s.best.clone();
        s.query(&batch)?;
        if s.best == before {
            excluded.extend_from_slice(axes);
        } else {
            excluded.clear();
        }
    }
    Ok(())
}

/// Vertices `u ≥ v` with `u ≤ n` and `‖u − v‖₁ = depth`, capped at `limit` (None past it).
fn cone_layer(v: &[usize], n: usize, depth: usize, limit: usize) -> Option<Vec<Vec<usize>>> {
    fn rec(v: &[usize], n: usize, s: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>, limit: usize) -> bool {
        if s == v.len() {
            if left == 0 {
                if out.len() >= limit {
                    return false;
                }
                out.push(cur.clone());
            }
            return true;
        }
        let room = n - v[s];
        for add in 0..=left.min(room) {
            cur.push(v[s] + add);
            let ok = rec(v, n, s + 1, left - add, cur, out, limit);
            cur.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(v.len());
    rec(v, n, 0, depth, &mut cur, &mut out, limit).then_some(out)
}

fn lookahead(s: &mut Session, k: usize, q: usize) -> Result<()> {
    let g = s.oracle.grid();
    while !s.at_end(g.n) && s.rounds_left(k) {
        let v = s.best.clone();
        let remaining = g.n - v.iter().sum::<usize>();
        let mut batch: Vec<Vec<usize>> = Vec::new();
        for depth in 1..=remaining {
            match cone_layer(&v, g.n, depth, q - batch.len()) {
                Some(layer) => batch.extend(layer),
                None => break,
            }
        }
        if batch.is_empty() {
            // Not even the first layer fits; walk like the frontier strategy for one round.
            return frontier_round(s, q);
        }
        s.query(&batch)?;
    }
    Ok(())
}

fn frontier_round(s: &mut Session, q: usize) -> Result<()> {
    let g = s.oracle.grid();
    let v = s.best.clone();
    let batch: Vec<Vec<usize>> = (0..g.d)
        .filter(|&a| v[a] < g.n)
        .take(q)
        .map(|a| {
            let mut u = v.clone();
            u[a] += 1;
            u
        })
        .collect();
    s.query(&batch).map(|_| ())
}

fn layer_guess(s: &mut Session, k: usize, q: usize, rng: &mut ChaCha8Rng) -> Result<()> {
    let g = s.oracle.grid();
    let mut tried: HashSet<Vec<usize>> = HashSet::new();
    while !s.at_end(g.n) && s.rounds_left(k) {
        let v = s.best.clone();
        let remaining = g.n - v.iter().sum::<usize>();
        let layer = cone_layer(&v, g.n, remaining, ENUMERATION_CAP)
            .ok_or_else(|| Error::invalid("last layer too large for the layer-guess strategy"))?;
        let mut candidates: Vec<Vec<usize>> = layer.into_iter().filter(|u| !tried.contains(u)).collect();
        if candidates.is_empty() {
            break;
        }
        candidates.shuffle(rng);
        candidates.truncate(q);
        tried.extend(candidates.iter().cloned());
        s.query(&candidates)?;
    }
    Ok(())
}

/// `n^{(d^{k+1} − d^k)/(d^k − 1)}/(20dk)`, the per-round query scale below which
/// randomized path instances defeat `k`-round search. Undefined for `d = 1`.
pub fn hard_query_scale(n: usize, d: usize, k: usize) -> Option<f64> {
    if d < 2 || k == 0 {
        return None;
    }
    let dk = (d as f64).powi(k as i32);
    let e = (dk * d as f64 - dk) / (dk - 1.0);
    Some((n as f64).powf(e) / (20.0 * d as f64 * k as f64))
}
