use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::HyperRectangle;

/// The grid graph on `{0, …, n}^d` with edges between vertices at L1 distance 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridGraph {
    pub n: usize,
    pub d: usize,
}

impl GridGraph {
    pub fn new(n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!("grid needs n, d >= 1, got n = {n}, d = {d}")));
        }
        Ok(GridGraph { n, d })
    }

    pub fn contains(&self, v: &[usize]) -> bool {
        v.len() == self.d && v.iter().all(|&c| c <= self.n)
    }

    /// `(n + 1)^d`, or `None` on overflow.
    pub fn vertex_count(&self) -> Option<usize> {
        (0..self.d).try_fold(1usize, |acc, _| acc.checked_mul(self.n + 1))
    }

    /// Vertex with mixed-radix index `i`, axis 0 least significant.
    pub fn vertex(&self, mut i: usize) -> Vec<usize> {
        (0..self.d)
            .map(|_| {
                let c = i % (self.n + 1);
                i /= self.n + 1;
                c
            })
            .collect()
    }

    pub fn neighbors(&self, v: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(2 * self.d);
        for s in 0..self.d {
            if v[s] > 0 {
                let mut u = v.to_vec();
                u[s] -= 1;
                out.push(u);
            }
            if v[s] < self.n {
                let mut u = v.to_vec();
                u[s] += 1;
                out.push(u);
            }
        }
        out
    }
}

/// A monotone path `v⁰ = 0, …, vⁿ` where every step increments one coordinate.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MonotonePath {
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub steps: Vec<usize>,
    #[serde(skip)]
    vertices: Vec<Vec<usize>>,
}

impl MonotonePath {
    /// Each step picks an axis uniformly among those still below `n`.
    pub fn random(n: usize, d: usize, seed: u64) -> Result<Self> {
        GridGraph::new(n, d)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = vec![0usize; d];
        let mut steps = Vec::with_capacity(n);
        for _ in 0..n {
            let open: Vec<usize> = (0..d).filter(|&s| v[s] < n).collect();
            let s = open[rng.random_range(0..open.len())];
            v[s] += 1;
            steps.push(s);
        }
        Self::from_steps(n, d, seed, steps)
    }

    pub fn from_steps(n: usize, d: usize, seed: u64, steps: Vec<usize>) -> Result<Self> {
        GridGraph::new(n, d)?;
        if steps.len() != n {
            return Err(Error::invalid(format!("path of length {n} needs {n} steps, got {}", steps.len())));
        }
        let mut v = vec![0usize; d];
        let mut vertices = vec![v.clone()];
        for &s in &steps {
            if s >= d || v[s] >= n {
                return Err(Error::invalid(format!("step along axis {s} leaves the grid")));
            }
            v[s] += 1;
            vertices.push(v.clone());
        }
        Ok(MonotonePath {
            n,
            d,
            seed,
            steps,
            vertices,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            n: usize,
            d: usize,
            seed: u64,
            steps: Vec<usize>,
        }
        let raw: Raw = serde_json::from_str(text)?;
        Self::from_steps(raw.n, raw.d, raw.seed, raw.steps)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn vertices(&self) -> &[Vec<usize>] {
        &self.vertices
    }

    pub fn endpoint(&self) -> &[usize] {
        &self.vertices[self.n]
    }

    pub fn grid(&self) -> GridGraph {
        GridGraph { n: self.n, d: self.d }
    }
}

/// `P(v) = −‖v‖₁` on the path, `+‖v‖₁` elsewhere.
#[derive(Clone, Debug)]
pub struct PathOracle {
    path: MonotonePath,
    position: HashMap<Vec<usize>, usize>,
}

impl PathOracle {
    pub fn new(path: MonotonePath) -> Self {
        let position = path.vertices().iter().enumerate().map(|(i, v)| (v.clone(), i)).collect();
        PathOracle { path, position }
    }

    pub fn path(&self) -> &MonotonePath {
        &self.path
    }

    pub fn grid(&self) -> GridGraph {
        self.path.grid()
    }

    pub fn value(&self, v: &[usize]) -> Result<i64> {
        if !self.grid().contains(v) {
            return Err(Error::invalid(format!("vertex {v:?} outside {{0..{}}}^{}", self.path.n, self.path.d)));
        }
        let l1 = v.iter().sum::<usize>() as i64;
        Ok(if self.position.contains_key(v) { -l1 } else { l1 })
    }

    /// `P(v) ≤ P(u)` for every neighbour `u`.
    pub fn is_local_min(&self, v: &[usize]) -> Result<bool> {
        let pv = self.value(v)?;
        for u in self.grid().neighbors(v) {
            if self.value(&u)? < pv {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Every local minimum over the whole grid, by brute force.
pub fn local_minima(oracle: &PathOracle) -> Result<Vec<Vec<usize>>> {
    let g = oracle.grid();
    let count = g
        .vertex_count()
        .filter(|&c| c <= 10_000_000)
        .ok_or_else(|| Error::invalid("grid too large for a brute-force scan"))?;
    let mut out = Vec::new();
    for i in 0..count {
        let v = g.vertex(i);
        if oracle.is_local_min(&v)? {
            out.push(v);
        }
    }
    Ok(out)
}

/// `square(v) = ∏_s [v_s/(n+1), (v_s+1)/(n+1)]`.
pub fn square(v: &[usize], n: usize) -> Result<HyperRectangle<f64>> {
    let m = (n + 1) as f64;
    if v.iter().any(|&c| c > n) {
        return Err(Error::invalid(format!("vertex {v:?} outside {{0..{n}}}")));
    }
    HyperRectangle::new(
        v.iter().map(|&c| c as f64 / m).collect(),
        v.iter().map(|&c| (c + 1) as f64 / m).collect(),
    )
}

/// Path queries one smooth-side query is worth: `(2d + 1)·queries_smooth`.
pub fn reduction_budget(queries_smooth: u64, d: usize) -> u64 {
    (2 * d as u64 + 1) * queries_smooth
}

/// Whether the boxes `square(v)` tile `[0,1]^d`: unit total volume, and any two
/// distinct boxes meet at most on their boundary.
pub fn square_tiling_check(n: usize, d: usize) -> Result<bool> {
    let g = GridGraph::new(n, d)?;
    let count = g
        .vertex_count()
        .filter(|&c| c <= 4096)
        .ok_or_else(|| Error::invalid("grid too large for the pairwise tiling check"))?;
    let boxes: Vec<HyperRectangle<f64>> = (0..count).map(|i| square(&g.vertex(i), n)).collect::<Result<_>>()?;
    let volume: f64 = boxes.iter().map(|b| b.sides().iter().product::<f64>()).sum();
    if (volume - 1.0).abs() > 1e-12 {
        return Ok(false);
    }
    for i in 0..count {
        if boxes[i].lo().iter().any(|&a| a < 0.0) || boxes[i].hi().iter().any(|&b| b > 1.0) {
            return Ok(false);
        }
        for j in i + 1..count {
            let interiors_meet = (0..d).all(|s| {
                boxes[i].lo()[s] < boxes[j].hi()[s] && boxes[j].lo()[s] < boxes[i].hi()[s]
            });
            if interiors_meet {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn values_on_and_off_the_path() {
        let p = MonotonePath::from_steps(3, 2, 0, vec![0, 1, 0]).unwrap();
        let o = PathOracle::new(p);
        assert_eq!(o.value(&[0, 0]).unwrap(), 0);
        assert_eq!(o.value(&[2, 1]).unwrap(), -3);
        assert_eq!(o.value(&[0, 3]).unwrap(), 3);
        assert!(o.value(&[4, 0]).is_err());
        assert!(o.value(&[1]).is_err());
    }

    #[test]
    fn one_axis_has_one_path() {
        let p = MonotonePath::random(5, 1, 3).unwrap();
        assert_eq!(p.steps, vec![0; 5]);
        assert_eq!(p.endpoint(), &[5]);
    }

    #[test]
    fn tiny_paths_all_occur() {
        let seen: BTreeSet<Vec<usize>> = (0..200).map(|s| MonotonePath::random(2, 2, s).unwrap().steps).collect();
        assert_eq!(seen.len(), 4);
    }

    #[test]
    fn on_path_values_fall_by_one() {
        let p = MonotonePath::random(20, 3, 9).unwrap();
        let o = PathOracle::new(p.clone());
        for (i, v) in p.vertices().iter().enumerate() {
            assert_eq!(o.value(v).unwrap(), -(i as i64));
        }
        assert_eq!(p.endpoint().iter().sum::<usize>(), 20);
    }

    #[test]
    fn endpoint_is_the_only_local_min() {
        for seed in 0..10 {
            let o = PathOracle::new(MonotonePath::random(6, 2, seed).unwrap());
            assert_eq!(local_minima(&o).unwrap(), vec![o.path().endpoint().to_vec()]);
            assert!(!o.is_local_min(&[0, 0]).unwrap());
        }
    }

    #[test]
    fn square_and_budget() {
        let b = square(&[0, 0], 3).unwrap();
        assert_eq!(b.lo(), &[0.0, 0.0]);
        assert_eq!(b.hi(), &[0.25, 0.25]);
        assert_eq!(reduction_budget(100, 2), 500);
        assert_eq!(reduction_budget(7, 1), 21);
        assert!(square_tiling_check(3, 2).unwrap());
    }

    #[test]
    fn json_round_trip() {
        let p = MonotonePath::random(7, 3, 4).unwrap();
        let q = MonotonePath::from_json(&p.to_json().unwrap()).unwrap();
        assert_eq!(p, q);
        assert!(MonotonePath::from_steps(2, 2, 0, vec![0, 0, 0]).is_err());
        assert!(MonotonePath::from_steps(1, 2, 0, vec![2]).is_err());
    }
}
