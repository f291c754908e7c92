use serde::Serialize;

use super::components::{phi, phi_prime, psi, psi_prime};
use super::partition::{ChainPartition, INERT};
use crate::error::{Error, Result};
use crate::oracle::Objective;
use crate::scalar::Scalar;

/// Default gradient-Lipschitz constant `l_1` of the unscaled chain function.
///
/// Largest Hessian spectral norm found by [`estimate_l1`] over 10⁵ probes for each of
/// `r ∈ {2, 4, 8}` (seed 0): 332.2, 376.8 and 361.6, rounded up. The curvature of the
/// chain does not depend on `d` or `d0`.
pub const DEFAULT_L1: f64 = 380.0;

/// `R = 230√(r + 1)`.
pub fn squash_radius(r: usize) -> f64 {
    230.0 * ((r + 1) as f64).sqrt()
}

/// `ρ(x) = x/√(1 + ‖x‖²/R²)`.
pub fn rho<S: Scalar>(x: &[S], radius: S) -> Vec<S> {
    let n2: S = x.iter().map(|&v| v * v).sum();
    let s = (S::one() + n2 / (radius * radius)).sqrt();
    x.iter().map(|&v| v / s).collect()
}

/// The chain potential `G(X¹, …, X^{r+1})` with `X⁰ ≡ 0`, and its partials `∂G/∂X^j`.
pub fn chain_potential<S: Scalar>(xs: &[S]) -> (S, Vec<S>) {
    let n = xs.len();
    let at = |i: usize| if i == 0 { S::zero() } else { xs[i - 1] };
    let mut dg = vec![S::zero(); n];
    let psi1 = psi(S::one());
    let mut g = -psi1 * phi(at(1));
    dg[0] = -psi1 * phi_prime(at(1));
    for i in 1..n {
        let a = at(i - 1) - at(i);
        let b = at(i + 1) - at(i);
        let (pa, pma) = (psi(a), psi(-a));
        let term = pa * phi(b) - pma * phi(-b);
        // The summand enters with sign −(−1)^i.
        let w = if i % 2 == 0 { -S::one() } else { S::one() };
        g = g + w * term;
        let da = psi_prime(a) * phi(b) + psi_prime(-a) * phi(-b);
        let db = pa * phi_prime(b) + pma * phi_prime(-b);
        if i >= 2 {
            dg[i - 2] = dg[i - 2] + w * da;
        }
        dg[i - 1] = dg[i - 1] - w * (da + db);
        dg[i] = dg[i] + w * db;
    }
    (g, dg)
}

/// Largest `i ≥ 1` with `|X^i − X^{i−1}| ≥ 1/2`, or 0.
pub fn progress_index<S: Scalar>(xs: &[S]) -> usize {
    let half = S::lit(0.5);
    let mut prev = S::zero();
    let mut idx = 0;
    for (i, &v) in xs.iter().enumerate() {
        if (v - prev).abs() >= half {
            idx = i + 1;
        }
        prev = v;
    }
    idx
}

/// Chain coordinates at `ρ(x/σ)` and the resulting progress index.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProgressVector<S> {
    pub x: Vec<S>,
    pub index: usize,
}

/// Everything one evaluation reveals, computed in a single pass over `x`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainEval<S> {
    pub value: S,
    pub gradient_norm: S,
    pub progress: ProgressVector<S>,
    /// `|X^{r+1} − X^r|` at `ρ(x/σ)`.
    pub last_gap: S,
}

/// `f⁰(x) = A·f_P(x/σ)` with `f_P(z) = G(X(ρ(z))) + ‖z‖²/5`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainOracle<S> {
    partition: ChainPartition,
    radius: S,
    p: usize,
    sigma: S,
    amplitude: S,
    l_p: S,
}

struct Pass<S> {
    /// `X^j(z)` for `j = 1..r+1`, before squashing.
    raw: Vec<S>,
    z2: S,
    s: S,
}

impl<S: Scalar> ChainOracle<S> {
    /// The unscaled `f_P` (σ = A = 1, p = 1, `l_1` = [`DEFAULT_L1`]).
    pub fn unscaled(partition: ChainPartition) -> Self {
        Self::with_scaling(partition, 1, S::one(), S::one(), S::lit(DEFAULT_L1))
    }

    /// Arbitrary scaling `A·f_P(x/σ)`; no relation between the parameters is enforced.
    pub fn with_scaling(partition: ChainPartition, p: usize, sigma: S, amplitude: S, l_p: S) -> Self {
        let radius = S::lit(squash_radius(partition.r));
        ChainOracle {
            partition,
            radius,
            p,
            sigma,
            amplitude,
            l_p,
        }
    }

    pub fn partition(&self) -> &ChainPartition {
        &self.partition
    }

    pub fn r(&self) -> usize {
        self.partition.r
    }

    pub fn radius(&self) -> S {
        self.radius
    }

    pub fn sigma(&self) -> S {
        self.sigma
    }

    pub fn amplitude(&self) -> S {
        self.amplitude
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn l_p(&self) -> S {
        self.l_p
    }

    fn check_dim(&self, x: &[S]) -> Result<()> {
        if x.len() != self.partition.d {
            return Err(Error::invalid(format!(
                "point of dimension {} for chain oracle of dimension {}",
                x.len(),
                self.partition.d
            )));
        }
        Ok(())
    }

    fn pass(&self, x: &[S]) -> Pass<S> {
        let n = self.partition.r + 1;
        let mut raw = vec![S::zero(); n];
        let mut x2 = S::zero();
        for (&v, &p) in x.iter().zip(self.partition.part_of()) {
            x2 = x2 + v * v;
            if p != INERT && (p as usize) < n {
                raw[p as usize] = raw[p as usize] + v;
            }
        }
        let scale = S::one() / (self.sigma * S::from_usize_lossy(self.partition.d0).sqrt());
        for v in raw.iter_mut() {
            *v = *v * scale;
        }
        let z2 = x2 / (self.sigma * self.sigma);
        let s = (S::one() + z2 / (self.radius * self.radius)).sqrt();
        Pass { raw, z2, s }
    }

    fn squashed(p: &Pass<S>) -> Vec<S> {
        p.raw.iter().map(|&v| v / p.s).collect()
    }

    /// Value, gradient norm and progress from one pass.
    pub fn analyze(&self, x: &[S]) -> Result<ChainEval<S>> {
        self.check_dim(x)?;
        let p = self.pass(x);
        let xs = Self::squashed(&p);
        let (g, dg) = chain_potential(&xs);
        let value = self.amplitude * (g + p.z2 / S::lit(5.0));

        // ‖∇_z‖² = Σ dg²/s² + 2κ Σ dg_j X^j(z)/s + κ²‖z‖² with κ = 2/5 − (ρ·v)/(R² s²).
        let r2 = self.radius * self.radius;
        let rho_v: S = dg.iter().zip(&xs).map(|(&a, &b)| a * b).sum();
        let kappa = S::lit(0.4) - rho_v / (r2 * p.s * p.s);
        let dg2: S = dg.iter().map(|&a| a * a).sum();
        let cross: S = dg.iter().zip(&p.raw).map(|(&a, &b)| a * b).sum();
        let n2 = dg2 / (p.s * p.s) + S::lit(2.0) * kappa * cross / p.s + kappa * kappa * p.z2;
        let gradient_norm = self.amplitude / self.sigma * n2.max(S::zero()).sqrt();

        let r = self.partition.r;
        let last_gap = (xs[r] - if r == 0 { S::zero() } else { xs[r - 1] }).abs();
        let index = progress_index(&xs);
        Ok(ChainEval {
            value,
            gradient_norm,
            progress: ProgressVector { x: xs, index },
            last_gap,
        })
    }

    pub fn try_value(&self, x: &[S]) -> Result<S> {
        self.check_dim(x)?;
        let p = self.pass(x);
        let (g, _) = chain_potential(&Self::squashed(&p));
        Ok(self.amplitude * (g + p.z2 / S::lit(5.0)))
    }

    pub fn try_gradient(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_dim(x)?;
        let p = self.pass(x);
        let xs = Self::squashed(&p);
        let (_, dg) = chain_potential(&xs);
        let r2 = self.radius * self.radius;
        let rho_v: S = dg.iter().zip(&xs).map(|(&a, &b)| a * b).sum();
        let kappa = S::lit(0.4) - rho_v / (r2 * p.s * p.s);
        let inv = S::one() / (S::from_usize_lossy(self.partition.d0).sqrt() * p.s);
        let outer = self.amplitude / self.sigma;
        let n = dg.len();
        Ok(x
            .iter()
            .zip(self.partition.part_of())
            .map(|(&v, &part)| {
                let z = v / self.sigma;
                let chain = if part != INERT && (part as usize) < n {
                    dg[part as usize] * inv
                } else {
                    S::zero()
                };
                outer * (chain + kappa * z)
            })
            .collect())
    }

    pub fn progress(&self, x: &[S]) -> Result<ProgressVector<S>> {
        self.check_dim(x)?;
        let xs = Self::squashed(&self.pass(x));
        let index = progress_index(&xs);
        Ok(ProgressVector { x: xs, index })
    }

    /// `g_P(y)` and `‖∇g_P(y)‖`, with `y` fed to the potential directly (no squashing).
    pub fn g_value_and_gradient_norm(&self, y: &[S]) -> Result<(S, S)> {
        self.check_dim(y)?;
        let n = self.partition.r + 1;
        let mut raw = vec![S::zero(); n];
        for (&v, &p) in y.iter().zip(self.partition.part_of()) {
            if p != INERT && (p as usize) < n {
                raw[p as usize] = raw[p as usize] + v;
            }
        }
        let scale = S::one() / S::from_usize_lossy(self.partition.d0).sqrt();
        raw.iter_mut().for_each(|v| *v = *v * scale);
        let (g, dg) = chain_potential(&raw);
        // Every part has d0 coordinates each carrying dg_j/√d0.
        Ok((g, dg.iter().map(|&a| a * a).sum::<S>().sqrt()))
    }
}

impl<S: Scalar> Objective<S> for ChainOracle<S> {
    fn dim(&self) -> usize {
        self.partition.d
    }

    fn value(&self, x: &[S]) -> S {
        self.try_value(x).expect("dimension checked by the session")
    }

    /// `A·l_1/σ²` with `l_1` = [`DEFAULT_L1`]; equals `L_p` for p = 1 at the default `l_p`.
    fn lipschitz(&self) -> S {
        self.amplitude * S::lit(DEFAULT_L1) / (self.sigma * self.sigma)
    }

    fn gradient(&self, x: &[S]) -> Option<Vec<S>> {
        self.try_gradient(x).ok()
    }

    fn name(&self) -> String {
        "chain".into()
    }
}

fn spectral_norm(h: &[Vec<f64>]) -> f64 {
    // Power iteration on H² gives |λ|_max² regardless of sign.
    let n = h.len();
    let mul = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| h[i][j] * v[j]).sum()).collect() };
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
    let mut lam = 0.0;
    for _ in 0..200 {
        let w = mul(&mul(&v));
        let nw = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        lam = nw / v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v = w.iter().map(|a| a / nw).collect();
    }
    lam.sqrt()
}

/// Largest spectral norm of a finite-difference Hessian of the unscaled chain
/// function over `probes` random points, using one coordinate per part.
///
/// Probes are random walks in chain coordinates with steps in `[−2.5, 2.5]`, so
/// that the Ψ·Φ links are switched on and off, at a random overall scale.
pub fn estimate_l1(r: usize, probes: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let d = r + 2;
    let part = ChainPartition::from_parts(d, 1, 0, (0..d).map(|i| vec![i]).collect()).expect("valid");
    let oracle = ChainOracle::<f64>::unscaled(part);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut best = 0.0f64;
    for _ in 0..probes {
        let scale = 10f64.powf(rng.random_range(-1.0..2.0));
        let mut acc = 0.0;
        let x: Vec<f64> = (0..d)
            .map(|_| {
                acc += rng.random_range(-2.5..2.5);
                acc * scale.min(1.0) + if scale > 1.0 { rng.random_range(-scale..scale) } else { 0.0 }
            })
            .collect();
        let mut hess = vec![vec![0.0; d]; d];
        let mut y = x.clone();
        for j in 0..d {
            y[j] = x[j] + h;
            let gp = oracle.try_gradient(&y).expect("dim");
            y[j] = x[j] - h;
            let gm = oracle.try_gradient(&y).expect("dim");
            y[j] = x[j];
            for i in 0..d {
                hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        for i in 0..d {
            for j in 0..i {
                let m = 0.5 * (hess[i][j] + hess[j][i]);
                hess[i][j] = m;
                hess[j][i] = m;
            }
        }
        best = best.max(spectral_norm(&hess));
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::oracle::verify_gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn oracle(d: usize, d0: usize, seed: u64) -> ChainOracle<f64> {
        ChainOracle::unscaled(ChainPartition::sample(d, d0, seed).unwrap())
    }

    #[test]
    fn value_at_origin() {
        let o = oracle(64, 8, 1);
        let v = o.try_value(&vec![0.0; 64]).unwrap();
        assert!((v + 2.0663656770612464).abs() < 1e-12);
        let pv = o.progress(&vec![0.0; 64]).unwrap();
        assert!(pv.x.iter().all(|&v| v == 0.0));
        assert_eq!(pv.index, 0);
    }

    #[test]
    fn gradient_matches_differences() {
        let o = oracle(96, 8, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Point<f64>> = (0..50)
            .map(|_| {
                let s = 10f64.powf(rng.random_range(-1.0..1.5));
                Point::new((0..96).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()).unwrap()
            })
            .collect();
        let e = verify_gradient(&o, &pts, 1e-5).unwrap();
        assert!(e <= 1e-5, "{e}");
    }

    #[test]
    fn fast_norm_agrees_with_full_gradient() {
        let part = ChainPartition::sample_with_parts(100, 9, 6, 4).unwrap();
        let o = ChainOracle::with_scaling(part, 1, 0.7, 2.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..100).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let g = o.try_gradient(&x).unwrap();
            let n = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            let e = o.analyze(&x).unwrap();
            assert!((n - e.gradient_norm).abs() <= 1e-10 * n.max(1.0));
            assert_eq!(e.value, o.try_value(&x).unwrap());
        }
    }

    #[test]
    fn rho_contracts() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let radius = squash_radius(3);
        assert_eq!(rho(&[0.0, 0.0], radius), vec![0.0, 0.0]);
        for _ in 0..200 {
            let s = 10f64.powf(rng.random_range(-2.0..5.0));
            let x: Vec<f64> = (0..5).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
            let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
            let y = rho(&x, radius);
            let m = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(m < n.min(radius), "{m} vs {n}");
        }
    }

    #[test]
    fn indicator_of_first_part_moves_first_link() {
        let o = oracle(64, 16, 7);
        let mut x = vec![0.0; 64];
        for &s in &o.partition().parts[0] {
            x[s] = 4.0f64.sqrt();
        }
        // X¹ = 16·2/√16 = 8 before squashing.
        let pv = o.progress(&x).unwrap();
        let s = (1.0 + 64.0 / squash_radius(2).powi(2)).sqrt();
        assert!((pv.x[0] - 8.0 / s).abs() < 1e-12);
        // X² stays 0, so the second link is open as well.
        assert_eq!(pv.index, 2);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let o = oracle(12, 3, 0);
        assert!(o.try_value(&[0.0; 5]).is_err());
        assert!(o.try_gradient(&[0.0; 5]).is_err());
        assert!(o.progress(&[0.0; 5]).is_err());
    }

    #[test]
    #[ignore = "slow; regenerates DEFAULT_L1"]
    fn print_l1_estimate() {
        for r in [2, 4, 8] {
            println!("r = {r}: {}", estimate_l1(r, 100_000, 0));
        }
    }

    #[test]
    fn default_l1_covers_a_fresh_estimate() {
        for r in [2, 5] {
            let est = estimate_l1(r, 2000, 99);
            assert!(est > 1.0 && est <= DEFAULT_L1, "r = {r}: {est}");
        }
    }
}
