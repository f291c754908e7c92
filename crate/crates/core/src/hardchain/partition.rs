use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marker in [`ChainPartition::part_of`] for coordinates outside every part.
pub const INERT: u32 = u32::MAX;

/// A random equipartition of (a subset of) `[d]` into `r + 2` parts of size `d0`.
///
/// Coordinates not covered by any part are inert: the chain function ignores them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPartition {
    pub d: usize,
    pub d0: usize,
    pub r: usize,
    pub seed: u64,
    pub parts: Vec<Vec<usize>>,
    #[serde(skip)]
    part_of: Vec<u32>,
}

impl ChainPartition {
    /// Uniform equipartition of `[d]` into `d/d0` parts: a seeded Fisher–Yates shuffle
    /// sliced into consecutive blocks.
    pub fn sample(d: usize, d0: usize, seed: u64) -> Result<Self> {
        if d0 == 0 || d % d0 != 0 {
            return Err(Error::invalid(format!("d0 = {d0} does not divide d = {d}")));
        }
        if d / d0 < 3 {
            return Err(Error::invalid(format!("need d/d0 >= 3, got {d}/{d0}")));
        }
        Self::sample_with_parts(d, d0, d / d0, seed)
    }

    /// `n_parts` parts of size `d0` drawn uniformly from `[d]`; the remaining
    /// `d − n_parts·d0` coordinates are inert.
    pub fn sample_with_parts(d: usize, d0: usize, n_parts: usize, seed: u64) -> Result<Self> {
        if d0 == 0 || n_parts < 3 || d0 * n_parts > d {
            return Err(Error::invalid(format!(
                "cannot fit {n_parts} parts of size {d0} (at least 3 parts) into d = {d}"
            )));
        }
        let mut idx: Vec<usize> = (0..d).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let parts: Vec<Vec<usize>> = idx[..n_parts * d0].chunks(d0).map(|c| c.to_vec()).collect();
        Self::from_parts(d, d0, seed, parts)
    }

    /// Rebuilds a partition from explicit index sets, e.g. after JSON round-tripping.
    pub fn from_parts(d: usize, d0: usize, seed: u64, parts: Vec<Vec<usize>>) -> Result<Self> {
        if parts.len() < 3 {
            return Err(Error::invalid("need at least 3 parts"));
        }
        let mut part_of = vec![INERT; d];
        for (i, p) in parts.iter().enumerate() {
            if p.len() != d0 {
                return Err(Error::invalid(format!("part {i} has size {} != d0 = {d0}", p.len())));
            }
            for &s in p {
                if s >= d {
                    return Err(Error::invalid(format!("index {s} outside [0, {d})")));
                }
                if part_of[s] != INERT {
                    return Err(Error::invalid(format!("index {s} appears in two parts")));
                }
                part_of[s] = i as u32;
            }
        }
        Ok(ChainPartition {
            d,
            d0,
            r: parts.len() - 2,
            seed,
            parts,
            part_of,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            d: usize,
            d0: usize,
            seed: u64,
            parts: Vec<Vec<usize>>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::from_parts(raw.d, raw.d0, raw.seed, raw.parts)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Zero-based part index of each coordinate, or [`INERT`].
    pub fn part_of(&self) -> &[u32] {
        &self.part_of
    }

    pub fn inert_count(&self) -> usize {
        self.d - self.d0 * self.parts.len()
    }

    /// Whether `d0 ≥ ⌈ln² d⌉`, the part size the concentration argument needs.
    pub fn satisfies_log_size(&self) -> bool {
        let l = (self.d as f64).ln();
        self.d0 as f64 >= (l * l).ceil()
    }
}
