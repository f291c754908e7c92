//! Monte Carlo tails of one chain coordinate `X(y) = Σ_{s∈P} y_s/√d0` over random parts `P`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Fixed non-negative unit test vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TestVector {
    /// All entries `1/√d`.
    Uniform,
    /// `|g|/‖g‖` for a seeded standard normal `g`.
    AbsNormal,
    /// Eight entries carrying half of the mass, the rest spread evenly.
    Spiky,
}

impl TestVector {
    pub const ALL: [TestVector; 3] = [TestVector::Uniform, TestVector::AbsNormal, TestVector::Spiky];

    pub fn name(self) -> &'static str {
        match self {
            TestVector::Uniform => "uniform",
            TestVector::AbsNormal => "abs-normal",
            TestVector::Spiky => "spiky",
        }
    }

    pub fn build(self, d: usize, seed: u64) -> Vec<f64> {
        let mut y: Vec<f64> = match self {
            TestVector::Uniform => vec![1.0; d],
            TestVector::AbsNormal => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..d).map(|_| f64::abs(StandardNormal.sample(&mut rng))).collect()
            }
            TestVector::Spiky => {
                let spikes = 8.min(d);
                let rest = (d - spikes).max(1) as f64;
                (0..d)
                    .map(|i| if i < spikes { (0.5 / spikes as f64).sqrt() } else { (0.5 / rest).sqrt() })
                    .collect()
            }
        };
        let n = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        y.iter_mut().for_each(|v| *v /= n);
        y
    }
}

/// `2 exp(−t²/(16 Σ_{i≤d0} (α↓_i)²))` with `α = y/√d0`.
pub fn tail_bound(y: &[f64], d0: usize, t: f64) -> f64 {
    let mut sq: Vec<f64> = y.iter().map(|v| v * v / d0 as f64).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sq.iter().take(d0).sum();
    2.0 * (-t * t / (16.0 * top)).exp()
}

/// Deviation at which [`tail_bound`] equals 1.
pub fn bound_crossing(y: &[f64], d0: usize) -> f64 {
    let mut sq: Vec<f64> = y.iter().map(|v| v * v / d0 as f64).collect();
    sq.sort_by(|a, b| b.total_cmp(a));
    let top: f64 = sq.iter().take(d0).sum();
    (16.0 * top * std::f64::consts::LN_2).sqrt()
}

#[derive(Clone, Debug, Serialize)]
pub struct TailEstimate {
    pub d: usize,
    pub d0: usize,
    pub trials: usize,
    pub t: f64,
    pub exceedances: usize,
    pub frequency: f64,
    pub bound: f64,
}

impl TailEstimate {
    pub fn within_bound(&self) -> bool {
        self.frequency <= self.bound
    }
}

/// Draws `trials` uniform `d0`-subsets of `[d]` (the law of any single part of a uniform
/// equipartition) and counts `|X(y) − E X(y)| ≥ t` for every `t` in `ts`.
pub fn concentration_probe(y: &[f64], d0: usize, trials: usize, ts: &[f64], seed: u64) -> Result<Vec<TailEstimate>> {
    let d = y.len();
    if d0 == 0 || d0 > d || trials == 0 {
        return Err(Error::invalid(format!("need 0 < d0 <= d and trials > 0, got d0 = {d0}, d = {d}")));
    }
    if ts.iter().any(|t| !(*t >= 0.0)) || y.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("t and y must be non-negative"));
    }
    let scale = 1.0 / (d0 as f64).sqrt();
    let mean = d0 as f64 / d as f64 * y.iter().sum::<f64>() * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; ts.len()];
    for _ in 0..trials {
        let x: f64 = rand::seq::index::sample(&mut rng, d, d0).iter().map(|s| y[s]).sum::<f64>() * scale;
        let dev = (x - mean).abs();
        for (c, &t) in counts.iter_mut().zip(ts) {
            if dev >= t {
                *c += 1;
            }
        }
    }
    Ok(ts
        .iter()
        .zip(counts)
        .map(|(&t, c)| TailEstimate {
            d,
            d0,
            trials,
            t,
            exceedances: c,
            frequency: c as f64 / trials as f64,
            bound: tail_bound(y, d0, t),
        })
        .collect())
}
