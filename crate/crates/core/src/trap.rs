//! Gradient flow grid trapping: a `k`-round search for ε-stationary points.
//!
//! Each round queries nice nets on the interior barrier slices of the current
//! rectangle, moves to the best point that is not ε_t-unreachable, and shrinks the
//! rectangle to the 2 or 3 barrier cells around the new iterate.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    barrier_slices, is_unreachable, nice_delta_net, nice_net_size, HyperRectangle, Net, Point,
    DEFAULT_NET_CAP,
};
use crate::oracle::{BatchSession, Domain, Objective};
use crate::report::{csv_writer, fmt_f64};
use crate::scalar::{dist, norm, Scalar};

/// Relative tolerance for snapping an iterate onto a barrier it sits on.
const BARRIER_SNAP: f64 = 1.0 / (1u64 << 40) as f64;

/// Slack for comparisons of barrier differences that differ from the ideal only by rounding.
const ROUNDING_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    /// `f : ℝ^d → [0, ∞)`; the search starts in an ∞-ball sized by `f(x0)`.
    Unconstrained,
    /// `f` on `[0,1]^d`; finishes with projected-gradient corner extraction.
    Cube,
}

/// Boundary-sampling check of the trap invariant, using unmetered evaluations.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Instrumentation {
    pub samples_per_iter: usize,
    pub seed: u64,
}

impl Default for Instrumentation {
    fn default() -> Self {
        Instrumentation {
            samples_per_iter: 1000,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GfgtConfig<S> {
    pub eps: S,
    pub lipschitz: S,
    pub d: usize,
    pub k: usize,
    pub x0: Point<S>,
    pub mode: Mode,
    /// Largest number of queries one round may use.
    pub net_cap: usize,
    pub instrument: Option<Instrumentation>,
}

impl<S: Scalar> GfgtConfig<S> {
    pub fn new(eps: S, lipschitz: S, k: usize, x0: Point<S>, mode: Mode) -> Self {
        GfgtConfig {
            eps,
            lipschitz,
            d: x0.dim(),
            k,
            x0,
            mode,
            net_cap: DEFAULT_NET_CAP,
            instrument: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > S::zero()) || !self.eps.is_finite() {
            return Err(Error::invalid("eps must be positive"));
        }
        if !(self.lipschitz > S::zero()) || !self.lipschitz.is_finite() {
            return Err(Error::invalid("lipschitz constant must be positive"));
        }
        if self.d < 2 {
            return Err(Error::invalid("dimension must be >= 2"));
        }
        if self.k < 1 {
            return Err(Error::invalid("round budget k must be >= 1"));
        }
        if self.x0.dim() != self.d {
            return Err(Error::invalid(format!(
                "x0 has dimension {} but d = {}",
                self.x0.dim(),
                self.d
            )));
        }
        if self.mode == Mode::Cube && !Domain::UnitCube.contains(self.x0.coords()) {
            return Err(Error::invalid("cube mode needs x0 in [0,1]^d"));
        }
        Ok(())
    }

    fn eps_f64(&self) -> f64 {
        self.eps.to_f64_lossy()
    }

    fn l_f64(&self) -> f64 {
        self.lipschitz.to_f64_lossy()
    }

    /// Side length of `R_0`: 1 on the cube, `4 f(x0)/ε_0` otherwise.
    pub fn initial_side(&self, f_x0: f64) -> f64 {
        match self.mode {
            Mode::Cube => 1.0,
            Mode::Unconstrained => 4.0 * f_x0 / (self.eps_f64() / 4.0),
        }
    }
}

/// Exponent of the barrier-count base at iteration `t`:
/// `((d−1)/(d+1))·q^t / (q^k − 1)` with `q = 2d/(d+1)`. Sums to 1 over `t < k`.
pub fn ell_exponent(d: usize, k: usize, t: usize) -> f64 {
    let d = d as f64;
    let q = 2.0 * d / (d + 1.0);
    (d - 1.0) / (d + 1.0) * q.powi(t as i32) / (q.powi(k as i32) - 1.0)
}

/// Base of the barrier schedule, `3^k · 2√d · L · r_0 / ε`, so that `∏ ℓ_t` shrinks
/// `R_0` to sides of at most `ε/(2√d L)` after `k` rounds.
pub fn ell_base<S: Scalar>(cfg: &GfgtConfig<S>, f_x0: f64) -> f64 {
    let d = cfg.d as f64;
    3f64.powi(cfg.k as i32) * 2.0 * d.sqrt() * cfg.l_f64() * cfg.initial_side(f_x0) / cfg.eps_f64()
}

/// Number of cells per axis at iteration `t`, `max(3, ⌈base^exponent⌉)`.
pub fn schedule_ell<S: Scalar>(cfg: &GfgtConfig<S>, f_x0: f64, t: usize) -> Result<usize> {
    if t >= cfg.k {
        return Err(Error::invalid(format!("iteration {t} outside 0..{}", cfg.k)));
    }
    if cfg.mode == Mode::Unconstrained && !(f_x0 > 0.0) {
        return Err(Error::invalid("unconstrained schedule needs f(x0) > 0"));
    }
    let v = ell_base(cfg, f_x0).powf(ell_exponent(cfg.d, cfg.k, t)).ceil();
    if !v.is_finite() || v > 1e15 {
        return Err(Error::ResourceLimit {
            what: format!("barrier count at iteration {t}"),
            size: v,
            cap: 1e15,
        });
    }
    Ok((v as usize).max(3))
}

/// Net spacing `√(ε r^t (3/4)^{td} / (40·3^k·ℓ_t·d√d·L))`.
pub fn schedule_delta<S: Scalar>(cfg: &GfgtConfig<S>, t: usize, ell: usize, r_min: f64) -> f64 {
    let d = cfg.d as f64;
    let decay = 0.75f64.powi((t * cfg.d) as i32);
    (cfg.eps_f64() * r_min * decay
        / (40.0 * 3f64.powi(cfg.k as i32) * ell as f64 * d * d.sqrt() * cfg.l_f64()))
    .sqrt()
}

/// `ε_{t+1} = ε_t + ε (3/4)^{td} / (16 d)`.
pub fn update_eps(eps_t: f64, t: usize, d: usize, eps: f64) -> f64 {
    eps_t + eps * 0.75f64.powi((t * d) as i32) / (16.0 * d as f64)
}

/// Upper bound `C(d,k,L)·ℓ^{(d+1)/2}·(r^t)^{(d−1)/2}·ε^{−(d−1)/2}` on the queries of iteration `t`.
pub fn query_bound(d: usize, k: usize, lipschitz: f64, eps: f64, t: usize, ell: usize, r_min: f64) -> f64 {
    let df = d as f64;
    let decay = 0.75f64.powi((t * d) as i32);
    let inner = df.sqrt() * 3f64.powi(t as i32) * (40.0 * 3f64.powi(k as i32) * df * df.sqrt() * lipschitz).sqrt()
        / (2.0 * decay.sqrt());
    let c = df * inner.powi(d as i32 - 1);
    c * (ell as f64).powf((df + 1.0) / 2.0) * r_min.powf((df - 1.0) / 2.0) * eps.powf(-(df - 1.0) / 2.0)
}

/// The extra unreachability slack `δ²/(2 dist)·(L + 2ε_t/dist)` of lifting a net to its slice.
pub fn lift_slack(delta: f64, dist: f64, lipschitz: f64, eps_t: f64) -> f64 {
    delta * delta / (2.0 * dist) * (lipschitz + 2.0 * eps_t / dist)
}

/// Streaming version of [`select_next`]: offer candidates in net order.
struct Selector<S> {
    x: Vec<S>,
    f_x: S,
    eps_t: S,
    best: Option<(Vec<S>, S)>,
    f_min: S,
}

impl<S: Scalar> Selector<S> {
    fn new(x: &[S], f_x: S, eps_t: S) -> Self {
        Selector {
            x: x.to_vec(),
            f_x,
            eps_t,
            best: None,
            f_min: f_x,
        }
    }

    #[inline]
    fn offer(&mut self, z: &[S], fz: S) {
        if fz < self.f_min {
            self.f_min = fz;
        }
        if fz <= self.f_x - self.eps_t * dist(&self.x, z) {
            match &self.best {
                Some((_, b)) if fz >= *b => {}
                _ => self.best = Some((z.to_vec(), fz)),
            }
        }
    }
}

/// Keeps `x_t` unless some net point satisfies `f(z) ≤ f(x_t) − ε_t‖x_t − z‖`;
/// otherwise returns the value-minimal such point (first one on ties).
pub fn select_next<S: Scalar>(x_t: &Point<S>, f_xt: S, net_points: &[(Point<S>, S)], eps_t: S) -> Point<S> {
    let mut sel = Selector::new(x_t, f_xt, eps_t);
    for (z, fz) in net_points {
        sel.offer(z, *fz);
    }
    match sel.best {
        Some((z, _)) => Point::new(z).expect("net points are finite"),
        None => x_t.clone(),
    }
}

fn compress_axis<S: Scalar>(a: S, b: S, x: S, ell: usize) -> (S, S) {
    let w = (b - a) / S::from_usize_lossy(ell);
    let bar = |m: usize| crate::geometry::barrier_coordinate(a, b, m, ell);
    if x <= bar(1) {
        return (a, bar(2));
    }
    if x >= bar(ell - 1) {
        return (bar(ell - 2), b);
    }
    let pos = ((x - a) / w).to_f64_lossy();
    let nearest = pos.round();
    let mut m1 = if (pos - nearest).abs() <= BARRIER_SNAP * pos.abs().max(1.0) {
        nearest as usize
    } else {
        pos.floor() as usize
    };
    m1 = m1.clamp(1, ell - 2);
    (bar(m1 - 1), bar(m1 + 2))
}

/// Shrinks `rect` to the barrier cells around `x_new` on every axis.
pub fn compress<S: Scalar>(rect: &HyperRectangle<S>, x_new: &Point<S>, ell: usize) -> Result<HyperRectangle<S>> {
    if ell < 3 {
        return Err(Error::invalid(format!("compress needs ell >= 3, got {ell}")));
    }
    if !rect.contains(x_new) {
        return Err(Error::invalid(format!("{x_new:?} is not inside {rect:?}")));
    }
    let (lo, hi): (Vec<S>, Vec<S>) = (0..rect.dim())
        .map(|j| compress_axis(rect.lo()[j], rect.hi()[j], x_new[j], ell))
        .unzip();
    HyperRectangle::new(lo, hi)
}

/// Projected gradient on `[0,1]^d`.
pub fn projected_gradient<S: Scalar>(x: &[S], grad: &[S]) -> Vec<S> {
    x.iter()
        .zip(grad)
        .map(|(&xi, &g)| {
            if xi <= S::zero() {
                g.min(S::zero())
            } else if xi >= S::one() {
                g.max(S::zero())
            } else {
                g
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct CornerEstimate {
    pub corner: Vec<f64>,
    pub projected_gradient: Vec<f64>,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Extraction<S> {
    pub point: Point<S>,
    pub step: f64,
    pub corners: Vec<CornerEstimate>,
    pub chosen: usize,
}

/// Estimates the projected gradient at every corner of `rect` in one round and
/// returns the corner with the smallest estimate, provided it is at most `eps`.
///
/// The finite-difference step is `min(ε/(8L√d), 10⁻⁶·√d)`; differences are central
/// where both probes stay in the cube and one-sided inward otherwise.
pub fn extract_kkt_corner<S: Scalar>(
    rect: &HyperRectangle<S>,
    session: &mut BatchSession<'_, S>,
    eps: S,
    lipschitz: S,
) -> Result<Extraction<S>> {
    let d = rect.dim();
    if !Domain::UnitCube.contains(rect.lo()) || !Domain::UnitCube.contains(rect.hi()) {
        return Err(Error::invalid("corner extraction needs a rectangle inside [0,1]^d"));
    }
    let df = d as f64;
    let step = (eps.to_f64_lossy() / (8.0 * lipschitz.to_f64_lossy() * df.sqrt())).min(1e-6 * df.sqrt());
    let h = S::lit(step);
    let corners = rect.corners();

    // Per corner: the corner itself, then for each axis an optional forward and backward probe.
    let mut probes: Vec<Point<S>> = Vec::new();
    let mut layout: Vec<(usize, Vec<(Option<usize>, Option<usize>)>)> = Vec::new();
    for c in &corners {
        let base = probes.len();
        probes.push(c.clone());
        let mut axes = Vec::with_capacity(d);
        for i in 0..d {
            let mut slot = |v: S| -> Option<usize> {
                if v >= S::zero() && v <= S::one() {
                    let mut p = c.coords().to_vec();
                    p[i] = v;
                    probes.push(Point::new(p).expect("finite probe"));
                    Some(probes.len() - 1)
                } else {
                    None
                }
            };
            let fwd = slot(c[i] + h);
            let bwd = slot(c[i] - h);
            axes.push((fwd, bwd));
        }
        layout.push((base, axes));
    }
    let vals = session.batch_query(&probes)?;

    let mut estimates = Vec::with_capacity(corners.len());
    for (c, (base, axes)) in corners.iter().zip(&layout) {
        let f0 = vals[*base];
        let grad: Vec<S> = axes
            .iter()
            .enumerate()
            .map(|(i, &(fwd, bwd))| match (fwd, bwd) {
                (Some(a), Some(b)) => (vals[a] - vals[b]) / (probes[a][i] - probes[b][i]),
                (Some(a), None) => (vals[a] - f0) / (probes[a][i] - c[i]),
                (None, Some(b)) => (f0 - vals[b]) / (c[i] - probes[b][i]),
                (None, None) => S::zero(),
            })
            .collect();
        let g = projected_gradient(c, &grad);
        estimates.push(CornerEstimate {
            corner: c.iter().map(|v| v.to_f64_lossy()).collect(),
            norm: norm(&g).to_f64_lossy(),
            projected_gradient: g.iter().map(|v| v.to_f64_lossy()).collect(),
        });
    }
    let mut chosen = 0;
    for (i, e) in estimates.iter().enumerate() {
        if e.norm < estimates[chosen].norm {
            chosen = i;
        }
    }
    if !(estimates[chosen].norm <= eps.to_f64_lossy()) {
        return Err(Error::AlgorithmFailure {
            message: format!(
                "no corner of {rect:?} has projected gradient estimate <= {eps}; best {}",
                estimates[chosen].norm
            ),
            details: estimates.iter().map(|e| e.projected_gradient.clone()).collect(),
        });
    }
    Ok(Extraction {
        point: corners[chosen].clone(),
        step,
        corners: estimates,
        chosen,
    })
}

/// State at the start of iteration `t` (or the final state when `t = k`).
#[derive(Clone, Debug, Serialize)]
pub struct IterRecord<S> {
    pub t: usize,
    pub lo: Vec<S>,
    pub hi: Vec<S>,
    pub x: Vec<S>,
    pub f_x: S,
    pub eps_t: f64,
    /// 0 on the final record.
    pub ell: usize,
    /// 0 on the final record.
    pub delta: f64,
    /// Queries issued by this iteration's round (the extraction round on a final cube record).
    pub queries: u64,
    pub cum_queries: u64,
    /// Smallest value seen so far.
    pub f_best: S,
    /// Largest side length, i.e. the ∞-norm diameter.
    pub diam: f64,
    pub euclidean_diam: f64,
}

/// Tallies of the runtime invariant checks.
#[derive(Clone, Debug, Default, Serialize)]
pub struct InvariantReport {
    pub eps0_exact: bool,
    pub eps_range_violations: usize,
    pub eps_monotone_violations: usize,
    pub shrink_violations: usize,
    pub distance_guard_violations: usize,
    pub query_count_mismatches: usize,
    pub query_bound_violations: usize,
    pub lift_slack_violations: usize,
    pub final_side: f64,
    pub final_side_bound: f64,
    /// Smallest `dist(x^{t+1}, new faces) · 3^k 2√d L / ε` across iterations.
    pub min_guard_ratio: f64,
    pub trap_samples: usize,
    pub trap_violations: usize,
}

impl InvariantReport {
    /// Violations of the checks that must hold on every run.
    pub fn violations(&self) -> usize {
        usize::from(!self.eps0_exact)
            + self.eps_range_violations
            + self.eps_monotone_violations
            + self.shrink_violations
            + self.distance_guard_violations
            + self.query_count_mismatches
            + self.query_bound_violations
            + self.lift_slack_violations
            + usize::from(self.final_side > self.final_side_bound)
            + self.trap_violations
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunTrace<S> {
    pub d: usize,
    pub k: usize,
    pub eps: f64,
    pub records: Vec<IterRecord<S>>,
    pub invariants: InvariantReport,
}

impl<S: Scalar> RunTrace<S> {
    /// `t,ell,delta,eps_t,queries,cum_queries,diam,f_best,x0,…,x{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv_writer(out, "gfgt-trace/1")?;
        let mut header: Vec<String> = ["t", "ell", "delta", "eps_t", "queries", "cum_queries", "diam", "f_best"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((0..self.d).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![
                r.t.to_string(),
                r.ell.to_string(),
                fmt_f64(r.delta),
                fmt_f64(r.eps_t),
                r.queries.to_string(),
                r.cum_queries.to_string(),
                fmt_f64(r.diam),
                fmt_f64(r.f_best.to_f64_lossy()),
            ];
            row.extend(r.x.iter().map(|v| fmt_f64(v.to_f64_lossy())));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GfgtOutput<S> {
    pub x: Point<S>,
    pub f_x: S,
    pub trace: RunTrace<S>,
    pub extraction: Option<Extraction<S>>,
    /// Rounds excluding the initial evaluation.
    pub rounds: usize,
    pub rounds_with_initial: usize,
    pub total_queries: u64,
}

fn sample_open_boundary<S: Scalar>(rect: &HyperRectangle<S>, cube: bool, rng: &mut ChaCha8Rng) -> Option<Vec<S>> {
    // Facets not lying on the cube boundary.
    let facets: Vec<(usize, bool)> = (0..rect.dim())
        .flat_map(|j| [(j, false), (j, true)])
        .filter(|&(j, upper)| {
            !cube || if upper { rect.hi()[j] < S::one() } else { rect.lo()[j] > S::zero() }
        })
        .collect();
    if facets.is_empty() {
        return None;
    }
    let (j, upper) = facets[rng.random_range(0..facets.len())];
    Some(
        (0..rect.dim())
            .map(|i| {
                if i == j {
                    if upper {
                        rect.hi()[i]
                    } else {
                        rect.lo()[i]
                    }
                } else {
                    let u = S::lit(rng.random::<f64>());
                    rect.lo()[i] + u * rect.side(i)
                }
            })
            .collect(),
    )
}

fn check_trap<S: Scalar>(
    obj: &dyn Objective<S>,
    rect: &HyperRectangle<S>,
    x: &[S],
    f_x: S,
    eps_t: S,
    cube: bool,
    samples: usize,
    rng: &mut ChaCha8Rng,
    report: &mut InvariantReport,
) {
    for _ in 0..samples {
        let Some(y) = sample_open_boundary(rect, cube, rng) else {
            return;
        };
        report.trap_samples += 1;
        if !is_unreachable(f_x, obj.value(&y), x, &y, eps_t).unwrap_or(false) {
            report.trap_violations += 1;
        }
    }
}

/// Runs the search for `cfg.k` barrier rounds (plus round 0 for `f(x0)` and, in cube
/// mode, one corner-extraction round).
pub fn gfgt<S: Scalar>(cfg: &GfgtConfig<S>, session: &mut BatchSession<'_, S>) -> Result<GfgtOutput<S>> {
    cfg.validate()?;
    let obj = session.objective();
    if obj.dim() != cfg.d {
        return Err(Error::invalid(format!(
            "objective has dimension {} but d = {}",
            obj.dim(),
            cfg.d
        )));
    }
    let cube = cfg.mode == Mode::Cube;
    let d = cfg.d;
    let k = cfg.k;
    let eps = cfg.eps_f64();
    let lip = cfg.l_f64();
    let df = d as f64;

    let mut report = InvariantReport {
        min_guard_ratio: f64::INFINITY,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.instrument.map_or(0, |i| i.seed));

    let f_x0 = session.initial_query(&cfg.x0)?;
    if !cube && f_x0 < S::zero() {
        return Err(Error::ContractViolation(format!(
            "f(x0) = {f_x0} < 0 but unconstrained mode needs f >= 0"
        )));
    }
    let f_x0_f = f_x0.to_f64_lossy();

    let mut x = cfg.x0.clone();
    let mut f_x = f_x0;
    let mut f_best = f_x0;
    let mut eps_t = eps / 4.0;
    report.eps0_exact = eps_t == eps / 4.0;
    let mut records = Vec::with_capacity(k + 1);

    if !cube && f_x0 == S::zero() {
        // x0 is a global minimum of a nonnegative function.
        let rect = HyperRectangle::point(&x);
        records.push(final_record(k, &rect, &x, f_x, eps_t, 0, session, f_best));
        report.final_side_bound = eps / (2.0 * df.sqrt() * lip);
        return Ok(finish(cfg, session, x, f_x, records, report, None));
    }

    let mut rect = if cube {
        HyperRectangle::unit_cube(d)
    } else {
        HyperRectangle::centered_cube(&x, S::lit(cfg.initial_side(f_x0_f) / 2.0))?
    };

    for t in 0..k {
        let ell = schedule_ell(cfg, f_x0_f, t)?;
        let r_min = rect.min_side().to_f64_lossy();
        let delta_f = schedule_delta(cfg, t, ell, r_min);
        let delta = S::lit(delta_f);

        if let Some(inst) = cfg.instrument {
            check_trap(obj, &rect, &x, f_x, S::lit(eps_t), cube, inst.samples_per_iter, &mut rng, &mut report);
        }
        if !(eps / 4.0 <= eps_t && eps_t <= eps / 2.0) {
            report.eps_range_violations += 1;
        }

        let slices = barrier_slices(&rect, ell)?;
        let planned: f64 = slices.iter().map(|s| nice_net_size(s, delta)).sum();
        if !(planned <= cfg.net_cap as f64) {
            return Err(Error::ResourceLimit {
                what: format!("round {} ({} slices, delta = {delta_f:e})", t + 1, slices.len()),
                size: planned,
                cap: cfg.net_cap as f64,
            });
        }
        let nets: Vec<Net<S>> = slices
            .iter()
            .map(|s| nice_delta_net(s, delta, cfg.net_cap))
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(nets.len() + 1);
        offsets.push(0usize);
        for n in &nets {
            offsets.push(offsets.last().unwrap() + n.len());
        }
        let total = *offsets.last().unwrap();
        if total as f64 != planned {
            report.query_count_mismatches += 1;
        }
        if total as f64 > query_bound(d, k, lip, eps, t, ell, r_min) {
            report.query_bound_violations += 1;
        }

        let mut sel = Selector::new(&x, f_x, S::lit(eps_t));
        let mut negative = None;
        let fill = |i: usize, p: &mut [S]| {
            let s = offsets.partition_point(|&o| o <= i) - 1;
            nets[s].point_into(i - offsets[s], p);
        };
        session.stream_round(total, fill, |_, z, fz| {
            if !cube && fz < S::zero() && negative.is_none() {
                negative = Some((z.to_vec(), fz));
            }
            sel.offer(z, fz);
        })?;
        if let Some((z, fz)) = negative {
            return Err(Error::ContractViolation(format!(
                "queried value f({z:?}) = {fz} < 0 but unconstrained mode needs f >= 0"
            )));
        }

        let cum = session.ledger().total_queries();
        records.push(IterRecord {
            t,
            lo: rect.lo().to_vec(),
            hi: rect.hi().to_vec(),
            x: x.coords().to_vec(),
            f_x,
            eps_t,
            ell,
            delta: delta_f,
            queries: total as u64,
            cum_queries: cum,
            f_best,
            diam: rect.max_side().to_f64_lossy(),
            euclidean_diam: rect.diameter().to_f64_lossy(),
        });
        f_best = f_best.min(sel.f_min);
        if let Some((z, fz)) = sel.best {
            x = Point::new(z)?;
            f_x = fz;
        }

        let next = compress(&rect, &x, ell)?;
        for j in 0..d {
            let (old, new) = (rect.side(j).to_f64_lossy(), next.side(j).to_f64_lossy());
            if new > 3.0 * old / ell as f64 * (1.0 + ROUNDING_SLACK) {
                report.shrink_violations += 1;
            }
        }
        let guard = r_min / ell as f64;
        let mut nearest_new_face = f64::INFINITY;
        for j in 0..d {
            let xj = x[j].to_f64_lossy();
            if next.lo()[j] != rect.lo()[j] {
                nearest_new_face = nearest_new_face.min(xj - next.lo()[j].to_f64_lossy());
            }
            if next.hi()[j] != rect.hi()[j] {
                nearest_new_face = nearest_new_face.min(next.hi()[j].to_f64_lossy() - xj);
            }
        }
        if nearest_new_face < guard * (1.0 - ROUNDING_SLACK) {
            report.distance_guard_violations += 1;
        }
        let guard_target = eps / (3f64.powi(k as i32) * 2.0 * df.sqrt() * lip);
        report.min_guard_ratio = report.min_guard_ratio.min(nearest_new_face.min(f64::MAX) / guard_target);

        let eps_next = update_eps(eps_t, t, d, eps);
        if lift_slack(delta_f, guard, lip, eps_t) > (eps_next - eps_t) * (1.0 + ROUNDING_SLACK) {
            report.lift_slack_violations += 1;
        }
        if eps_next < eps_t {
            report.eps_monotone_violations += 1;
        }
        eps_t = eps_next;
        rect = next;
    }

    if let Some(inst) = cfg.instrument {
        check_trap(obj, &rect, &x, f_x, S::lit(eps_t), cube, inst.samples_per_iter, &mut rng, &mut report);
    }
    if !(eps / 4.0 <= eps_t && eps_t <= eps / 2.0) {
        report.eps_range_violations += 1;
    }
    report.final_side = rect.max_side().to_f64_lossy();
    report.final_side_bound = eps / (2.0 * df.sqrt() * lip);

    let before = session.ledger().total_queries();
    let extraction = if cube {
        Some(extract_kkt_corner(&rect, session, cfg.eps, cfg.lipschitz)?)
    } else {
        None
    };
    let extra = session.ledger().total_queries() - before;
    records.push(final_record(k, &rect, &x, f_x, eps_t, extra, session, f_best));

    let (out, f_out) = match &extraction {
        Some(e) => {
            let v = session.verification_value(&e.point);
            (e.point.clone(), v)
        }
        None => (x, f_x),
    };
    Ok(finish(cfg, session, out, f_out, records, report, extraction))
}

#[allow(clippy::too_many_arguments)]
fn final_record<S: Scalar>(
    k: usize,
    rect: &HyperRectangle<S>,
    x: &Point<S>,
    f_x: S,
    eps_t: f64,
    queries: u64,
    session: &BatchSession<'_, S>,
    f_best: S,
) -> IterRecord<S> {
    IterRecord {
        t: k,
        lo: rect.lo().to_vec(),
        hi: rect.hi().to_vec(),
        x: x.coords().to_vec(),
        f_x,
        eps_t,
        ell: 0,
        delta: 0.0,
        queries,
        cum_queries: session.ledger().total_queries(),
        f_best,
        diam: rect.max_side().to_f64_lossy(),
        euclidean_diam: rect.diameter().to_f64_lossy(),
    }
}

fn finish<S: Scalar>(
    cfg: &GfgtConfig<S>,
    session: &BatchSession<'_, S>,
    x: Point<S>,
    f_x: S,
    records: Vec<IterRecord<S>>,
    invariants: InvariantReport,
    extraction: Option<Extraction<S>>,
) -> GfgtOutput<S> {
    let ledger = session.ledger();
    GfgtOutput {
        x,
        f_x,
        trace: RunTrace {
            d: cfg.d,
            k: cfg.k,
            eps: cfg.eps_f64(),
            records,
            invariants,
        },
        extraction,
        rounds: ledger.round_count(),
        rounds_with_initial: ledger.round_count_with_initial(),
        total_queries: ledger.total_queries(),
    }
}

/// Norm of the true (projected, in cube mode) gradient at `x`, from the analytic gradient.
pub fn stationarity<S: Scalar>(obj: &dyn Objective<S>, x: &[S], mode: Mode) -> Result<f64> {
    let g = obj
        .gradient(x)
        .ok_or_else(|| Error::Unsupported(format!("{} has no analytic gradient", obj.name())))?;
    let g = match mode {
        Mode::Cube => projected_gradient(x, &g),
        Mode::Unconstrained => g,
    };
    Ok(norm(&g).to_f64_lossy())
}
