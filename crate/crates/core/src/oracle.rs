//! Zeroth-order oracles, batched sessions and round accounting.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::report::csv_writer;
use crate::scalar::{norm, Scalar};

/// Batches at least this large are evaluated on the rayon pool.
const PAR_THRESHOLD: usize = 4096;

/// Chunk size for streamed rounds.
const STREAM_CHUNK: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Domain {
    /// All of ℝ^d.
    Whole,
    /// `[0,1]^d`.
    UnitCube,
}

impl Domain {
    pub fn contains<S: Scalar>(self, x: &[S]) -> bool {
        match self {
            Domain::Whole => x.iter().all(|v| v.is_finite()),
            Domain::UnitCube => x.iter().all(|&v| v >= S::zero() && v <= S::one()),
        }
    }
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Domain::Whole => write!(f, "R^d"),
            Domain::UnitCube => write!(f, "[0,1]^d"),
        }
    }
}

/// A deterministic function with a declared domain and gradient-Lipschitz constant.
pub trait Objective<S: Scalar>: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[S]) -> S;

    /// Gradient-Lipschitz constant `L`.
    fn lipschitz(&self) -> S;

    fn domain(&self) -> Domain {
        Domain::Whole
    }

    /// Analytic gradient, used for verification only.
    fn gradient(&self, _x: &[S]) -> Option<Vec<S>> {
        None
    }

    fn name(&self) -> String {
        "objective".into()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub batch_size: usize,
}

/// Per-round record of algorithm queries.
///
/// An optional round 0 holds the single initial evaluation; adaptive rounds are
/// numbered from 1. Verification queries are counted apart and never open a round.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct QueryLedger {
    initial: Option<usize>,
    rounds: Vec<RoundRecord>,
    total: u64,
    verification: u64,
    max_rounds: Option<usize>,
    max_batch: Option<usize>,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Ledger that rejects any round past `max_rounds` or any batch above `max_batch`.
    pub fn with_budget(max_rounds: Option<usize>, max_batch: Option<usize>) -> Self {
        QueryLedger {
            max_rounds,
            max_batch,
            ..Self::default()
        }
    }

    pub(crate) fn record_initial(&mut self, size: usize) -> Result<()> {
        if self.initial.is_some() || !self.rounds.is_empty() {
            return Err(Error::invalid("round 0 must precede every other round and occur once"));
        }
        self.initial = Some(size);
        self.total += size as u64;
        Ok(())
    }

    /// Opens a new round of `size` queries and returns its index.
    pub fn open_round(&mut self, size: usize) -> Result<usize> {
        if size == 0 {
            return Err(Error::invalid("empty batch"));
        }
        if let Some(cap) = self.max_rounds {
            if self.rounds.len() >= cap {
                return Err(Error::ResourceLimit {
                    what: "adaptive rounds".into(),
                    size: (self.rounds.len() + 1) as f64,
                    cap: cap as f64,
                });
            }
        }
        if let Some(cap) = self.max_batch {
            if size > cap {
                return Err(Error::ResourceLimit {
                    what: "queries in one round".into(),
                    size: size as f64,
                    cap: cap as f64,
                });
            }
        }
        let round = self.rounds.len() + 1;
        self.rounds.push(RoundRecord { round, batch_size: size });
        self.total += size as u64;
        Ok(round)
    }

    pub(crate) fn record_verification(&mut self, n: u64) {
        self.verification += n;
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    /// Adaptive rounds, excluding round 0.
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// Rounds including round 0 when it was used.
    pub fn round_count_with_initial(&self) -> usize {
        self.rounds.len() + usize::from(self.initial.is_some())
    }

    pub fn initial_queries(&self) -> usize {
        self.initial.unwrap_or(0)
    }

    /// All algorithm queries, round 0 included.
    pub fn total_queries(&self) -> u64 {
        self.total
    }

    pub fn verification_queries(&self) -> u64 {
        self.verification
    }

    pub fn max_batch_size(&self) -> usize {
        self.rounds.iter().map(|r| r.batch_size).max().unwrap_or(0)
    }

    /// Rows `round,batch_size,cumulative_queries`, round 0 first when present.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, "gfgt-ledger/1")?;
        w.write_record(["round", "batch_size", "cumulative_queries"])?;
        let mut cum = 0u64;
        if let Some(n) = self.initial {
            cum += n as u64;
            w.write_record([0.to_string(), n.to_string(), cum.to_string()])?;
        }
        for r in &self.rounds {
            cum += r.batch_size as u64;
            w.write_record([r.round.to_string(), r.batch_size.to_string(), cum.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One algorithm's view of an objective: every query goes through a batch.
pub struct BatchSession<'a, S: Scalar> {
    obj: &'a dyn Objective<S>,
    ledger: QueryLedger,
}

impl<'a, S: Scalar> BatchSession<'a, S> {
    pub fn new(obj: &'a dyn Objective<S>) -> Self {
        Self::with_ledger(obj, QueryLedger::new())
    }

    pub fn with_ledger(obj: &'a dyn Objective<S>, ledger: QueryLedger) -> Self {
        BatchSession { obj, ledger }
    }

    pub fn objective(&self) -> &'a dyn Objective<S> {
        self.obj
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn into_ledger(self) -> QueryLedger {
        self.ledger
    }

    fn check(&self, x: &[S]) -> Result<()> {
        if x.len() != self.obj.dim() {
            return Err(Error::invalid(format!(
                "query of dimension {} for objective of dimension {}",
                x.len(),
                self.obj.dim()
            )));
        }
        let domain = self.obj.domain();
        if !domain.contains(x) {
            return Err(Error::Domain {
                point: format!("{x:?}"),
                domain: domain.to_string(),
            });
        }
        Ok(())
    }

    /// The single evaluation of round 0.
    pub fn initial_query(&mut self, x: &Point<S>) -> Result<S> {
        self.check(x)?;
        self.ledger.record_initial(1)?;
        Ok(self.obj.value(x))
    }

    /// One adaptive round: all points are answered together, in order.
    pub fn batch_query(&mut self, points: &[Point<S>]) -> Result<Vec<S>> {
        if points.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        for p in points {
            self.check(p)?;
        }
        self.ledger.open_round(points.len())?;
        let obj = self.obj;
        Ok(if points.len() >= PAR_THRESHOLD {
            points.par_iter().map(|p| obj.value(p)).collect()
        } else {
            points.iter().map(|p| obj.value(p)).collect()
        })
    }

    /// One adaptive round of `n` points too many to materialize.
    ///
    /// `fill(i, buf)` writes point `i`; it is fixed before any answer exists.
    /// Answers are handed to `sink(i, point, value)` in index order once the whole
    /// chunk containing them is evaluated.
    pub fn stream_round<F, K>(&mut self, n: usize, fill: F, mut sink: K) -> Result<usize>
    where
        F: Fn(usize, &mut [S]) + Sync,
        K: FnMut(usize, &[S], S),
    {
        if n == 0 {
            return Err(Error::invalid("empty batch"));
        }
        let d = self.obj.dim();
        let round = self.ledger.open_round(n)?;
        let obj = self.obj;
        let mut buf = vec![S::zero(); d * STREAM_CHUNK.min(n)];
        let mut vals = vec![S::zero(); STREAM_CHUNK.min(n)];
        let mut start = 0;
        while start < n {
            let m = STREAM_CHUNK.min(n - start);
            let pts = &mut buf[..m * d];
            for (j, p) in pts.chunks_mut(d).enumerate() {
                fill(start + j, p);
            }
            for p in pts.chunks(d) {
                self.check(p)?;
            }
            if m >= PAR_THRESHOLD {
                vals[..m]
                    .par_iter_mut()
                    .zip(pts.par_chunks(d))
                    .for_each(|(v, p)| *v = obj.value(p));
            } else {
                for (v, p) in vals[..m].iter_mut().zip(pts.chunks(d)) {
                    *v = obj.value(p);
                }
            }
            for (j, p) in pts.chunks(d).enumerate() {
                sink(start + j, p, vals[j]);
            }
            start += m;
        }
        Ok(round)
    }

    /// Evaluation outside the round structure, for checking results only.
    pub fn verification_value(&mut self, x: &[S]) -> S {
        self.ledger.record_verification(1);
        self.obj.value(x)
    }

    /// Maximum over `points` of `‖∇f − ∇_h f‖ / max(1, ‖∇f‖)` with central differences.
    ///
    /// On cube-constrained objectives the stencil turns one-sided at the boundary
    /// so that every probe stays in the domain.
    pub fn verify_gradient(&mut self, points: &[Point<S>], step: S) -> Result<f64> {
        if !(step > S::zero()) {
            return Err(Error::invalid("finite-difference step must be positive"));
        }
        let mut worst = 0.0f64;
        for p in points {
            let g = self.obj.gradient(p).ok_or_else(|| {
                Error::Unsupported(format!("{} has no analytic gradient", self.obj.name()))
            })?;
            let fd = self.fd_gradient(p, step);
            let diff: Vec<S> = g.iter().zip(&fd).map(|(&a, &b)| a - b).collect();
            let err = norm(&diff).to_f64_lossy() / norm(&g).to_f64_lossy().max(1.0);
            worst = worst.max(err);
        }
        Ok(worst)
    }

    fn fd_gradient(&mut self, x: &[S], h: S) -> Vec<S> {
        let cube = self.obj.domain() == Domain::UnitCube;
        let mut y = x.to_vec();
        let mut g = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let xi = x[i];
            let (up, down) = if cube {
                (xi + h <= S::one(), xi - h >= S::zero())
            } else {
                (true, true)
            };
            let (a, b) = match (up, down) {
                (true, true) | (false, false) => (xi + h, xi - h),
                (true, false) => (xi + h, xi),
                (false, true) => (xi, xi - h),
            };
            y[i] = a;
            let fa = self.verification_value(&y);
            y[i] = b;
            let fb = self.verification_value(&y);
            y[i] = xi;
            g.push((fa - fb) / (a - b));
        }
        g
    }
}

/// [`BatchSession::verify_gradient`] on a throwaway session.
pub fn verify_gradient<S: Scalar>(obj: &dyn Objective<S>, points: &[Point<S>], step: S) -> Result<f64> {
    BatchSession::new(obj).verify_gradient(points, step)
}
