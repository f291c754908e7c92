//! Sampled property checks of the chain function, shared by unit tests and `verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::chain::{chain_potential, rho, squash_radius, ChainOracle};
use super::components::PropertyCheck;
use super::partition::ChainPartition;

struct Tally {
    name: String,
    points: usize,
    violations: usize,
    first: Option<f64>,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Tally {
            name: name.into(),
            points: 0,
            violations: 0,
            first: None,
        }
    }

    fn record(&mut self, ok: bool, witness: f64) {
        self.points += 1;
        if !ok {
            self.violations += 1;
            self.first.get_or_insert(witness);
        }
    }

    fn finish(self) -> PropertyCheck {
        PropertyCheck {
            name: self.name,
            points: self.points,
            violations: self.violations,
            first_violation: self.first,
        }
    }
}

/// Chain coordinates drawn as a random walk, so consecutive links land on both sides of 1/2.
fn random_chain(rng: &mut ChaCha8Rng, n: usize, step: f64) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|_| {
            acc += rng.random_range(-step..step);
            acc
        })
        .collect()
}

/// A point whose chain coordinates are `xs`, plus noise that sums to zero on every part.
fn lift(part: &ChainPartition, xs: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut y = vec![0.0; part.d];
    let sq = (part.d0 as f64).sqrt();
    for (j, p) in part.parts.iter().enumerate() {
        let base = if j < xs.len() { xs[j] / sq } else { 0.0 };
        let eta: Vec<f64> = p.iter().map(|_| noise * rng.sample::<f64, _>(StandardNormal)).collect();
        let mean = eta.iter().sum::<f64>() / eta.len() as f64;
        for (&s, e) in p.iter().zip(eta) {
            y[s] = base + e - mean;
        }
    }
    y
}

/// `‖∇g_P(y)‖ ≤ 46√(r+1)` at `n` points: half random-walk chains, half Gaussian.
pub fn gradient_bound_check(part: &ChainPartition, n: usize, seed: u64) -> PropertyCheck {
    let oracle = ChainOracle::<f64>::unscaled(part.clone());
    let bound = 46.0 * ((part.r + 1) as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(format!("||grad g|| <= 46 sqrt(r+1) (r = {})", part.r));
    for i in 0..n {
        let y = if i % 2 == 0 {
            let xs = random_chain(&mut rng, part.r + 1, 2.0);
            lift(part, &xs, rng.random_range(0.0..1.0), &mut rng)
        } else {
            let s = 10f64.powf(rng.random_range(-2.0..1.0));
            (0..part.d).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let (_, g) = oracle.g_value_and_gradient_norm(&y).expect("dimension matches");
        t.record(g <= bound, g);
    }
    t.finish()
}

/// `‖∇f_P(x)‖ ≥ 0.08` at `x = 0` and at `n − 1` points built so that
/// `|X^{r+1} − X^r| < 1` at `ρ(x)`.
pub fn gradient_floor_check(part: &ChainPartition, n: usize, seed: u64) -> PropertyCheck {
    let oracle = ChainOracle::<f64>::unscaled(part.clone());
    let radius = squash_radius(part.r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(format!("||grad f|| >= 0.08 where last gap < 1 (r = {})", part.r));
    let e = oracle.analyze(&vec![0.0; part.d]).expect("dimension matches");
    t.record(e.gradient_norm >= 0.08, e.gradient_norm);
    let mut attempts = 0;
    while t.points < n {
        attempts += 1;
        assert!(attempts < 100 * n, "could not construct points with a short last link");
        let step = rng.random_range(0.2..3.0);
        let mut xs = random_chain(&mut rng, part.r + 1, step);
        let r = part.r;
        let prev = if r == 0 { 0.0 } else { xs[r - 1] };
        xs[r] = prev + rng.random_range(-0.999..0.999);
        let y = lift(part, &xs, rng.random_range(0.0..2.0), &mut rng);
        let y2: f64 = y.iter().map(|v| v * v).sum();
        if y2 >= radius * radius {
            continue;
        }
        // ρ is inverted by x = y/√(1 − ‖y‖²/R²).
        let c = (1.0 - y2 / (radius * radius)).sqrt();
        let x: Vec<f64> = y.iter().map(|v| v / c).collect();
        let e = oracle.analyze(&x).expect("dimension matches");
        if e.last_gap >= 1.0 {
            continue;
        }
        t.record(e.gradient_norm >= 0.08, e.gradient_norm);
    }
    t.finish()
}

/// `min g_P ≥ g_P(0) − 12r` over `n` samples drawn directly in chain coordinates.
///
/// `g_P` depends on `y` only through `X(y)`, and every `X ∈ ℝ^{r+1}` is attained.
pub fn value_gap_check(r: usize, n: usize, seed: u64) -> PropertyCheck {
    let (g0, _) = chain_potential(&vec![0.0f64; r + 1]);
    let floor = g0 - 12.0 * r as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new(format!("g >= g(0) - 12r (r = {r})"));
    let mut xs = vec![0.0; r + 1];
    for _ in 0..n {
        let step = rng.random_range(0.3..4.0);
        let mut acc = 0.0;
        for v in xs.iter_mut() {
            acc += rng.random_range(-step..step);
            *v = acc;
        }
        let (g, _) = chain_potential(&xs);
        t.record(g >= floor, g);
    }
    t.finish()
}

/// `‖ρ(x)‖ < min(‖x‖, R)` for `x ≠ 0`, and `ρ(0) = 0`.
pub fn rho_contraction_check(d: usize, r: usize, n: usize, seed: u64) -> PropertyCheck {
    let radius = squash_radius(r);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Tally::new("||rho(x)|| < min(||x||, R)");
    t.record(rho(&vec![0.0; d], radius).iter().all(|&v| v == 0.0), 0.0);
    for _ in 0..n {
        let s = 10f64.powf(rng.random_range(-3.0..6.0));
        let x: Vec<f64> = (0..d).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = rho(&x, radius).iter().map(|v| v * v).sum::<f64>().sqrt();
        t.record(ny < nx.min(radius), ny);
    }
    t.finish()
}

/// All chain-function checks at the sizes used for acceptance: d = 512, d0 = 64,
/// 10³ points for the gradient checks and 10⁶ for the value gap.
pub fn chain_suite(seed: u64) -> Vec<PropertyCheck> {
    let part = ChainPartition::sample(512, 64, seed).expect("512 = 8·64");
    vec![
        gradient_bound_check(&part, 1000, seed.wrapping_add(1)),
        gradient_floor_check(&part, 1000, seed.wrapping_add(2)),
        value_gap_check(part.r, 1_000_000, seed.wrapping_add(3)),
        rho_contraction_check(part.d, part.r, 1000, seed.wrapping_add(4)),
    ]
}
