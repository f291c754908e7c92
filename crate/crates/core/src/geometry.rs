//! Axis-aligned hyperrectangles, barrier slices, nice δ-nets and the
//! ε-unreachability predicate.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{dist, Scalar};

/// Default cap on the cardinality of a single net (or one round of nets).
pub const DEFAULT_NET_CAP: usize = 100_000_000;

/// Environment variable overriding [`DEFAULT_NET_CAP`].
pub const NET_CAP_ENV: &str = "GFGT_NET_CAP";

/// Net cap taken from `GFGT_NET_CAP` when set and parseable, else the default.
pub fn net_cap_from_env() -> usize {
    std::env::var(NET_CAP_ENV)
        .ok()
        .and_then(|v| v.trim().replace('_', "").parse::<f64>().ok())
        .filter(|v| *v >= 1.0)
        .map(|v| v as usize)
        .unwrap_or(DEFAULT_NET_CAP)
}

/// A point of ℝ^d with finite coordinates.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<S>(Vec<S>);

impl<S: Scalar> Point<S> {
    pub fn new(coords: Vec<S>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("point must have dimension >= 1"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Point(coords))
    }

    pub fn zeros(d: usize) -> Self {
        Point(vec![S::zero(); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[S] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }

    pub fn distance(&self, other: &Point<S>) -> S {
        dist(&self.0, &other.0)
    }
}

impl<S> std::ops::Deref for Point<S> {
    type Target = [S];
    fn deref(&self) -> &[S] {
        &self.0
    }
}

impl<S: fmt::Debug> fmt::Debug for Point<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// `[lo_1, hi_1] × … × [lo_d, hi_d]` with `lo_i <= hi_i`.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperRectangle<S> {
    lo: Vec<S>,
    hi: Vec<S>,
}

impl<S: Scalar> HyperRectangle<S> {
    pub fn new(lo: Vec<S>, hi: Vec<S>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::invalid(format!(
                "rectangle bounds differ in dimension: {} vs {}",
                lo.len(),
                hi.len()
            )));
        }
        if lo.is_empty() {
            return Err(Error::invalid("rectangle must have dimension >= 1"));
        }
        for (i, (&a, &b)) in lo.iter().zip(&hi).enumerate() {
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::invalid(format!("axis {i}: non-finite bound")));
            }
            if a > b {
                return Err(Error::invalid(format!("axis {i}: lo {a} > hi {b}")));
            }
        }
        Ok(HyperRectangle { lo, hi })
    }

    /// `[0,1]^d`.
    pub fn unit_cube(d: usize) -> Self {
        HyperRectangle {
            lo: vec![S::zero(); d],
            hi: vec![S::one(); d],
        }
    }

    /// Degenerate rectangle `{p}`.
    pub fn point(p: &Point<S>) -> Self {
        HyperRectangle {
            lo: p.coords().to_vec(),
            hi: p.coords().to_vec(),
        }
    }

    /// `{x : ‖x − c‖_∞ <= half}`.
    pub fn centered_cube(center: &Point<S>, half: S) -> Result<Self> {
        Self::new(
            center.iter().map(|&c| c - half).collect(),
            center.iter().map(|&c| c + half).collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[S] {
        &self.lo
    }

    pub fn hi(&self) -> &[S] {
        &self.hi
    }

    pub fn side(&self, axis: usize) -> S {
        self.hi[axis] - self.lo[axis]
    }

    pub fn sides(&self) -> Vec<S> {
        (0..self.dim()).map(|i| self.side(i)).collect()
    }

    /// Number of axes with `lo_i < hi_i`.
    pub fn effective_dim(&self) -> usize {
        self.lo.iter().zip(&self.hi).filter(|(a, b)| a < b).count()
    }

    pub fn is_full_dimensional(&self) -> bool {
        self.effective_dim() == self.dim()
    }

    pub fn min_side(&self) -> S {
        self.sides().into_iter().fold(S::infinity(), S::min)
    }

    pub fn max_side(&self) -> S {
        self.sides().into_iter().fold(S::zero(), S::max)
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> S {
        dist(&self.lo, &self.hi)
    }

    pub fn contains(&self, x: &[S]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&a, &b))| a <= v && v <= b)
    }

    pub fn is_subset_of(&self, other: &HyperRectangle<S>) -> bool {
        self.dim() == other.dim()
            && (0..self.dim()).all(|i| other.lo[i] <= self.lo[i] && self.hi[i] <= other.hi[i])
    }

    /// Euclidean distance from `x` to the closest point of the rectangle.
    pub fn distance_to(&self, x: &[S]) -> S {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&v, (&a, &b))| {
                let gap = if v < a {
                    a - v
                } else if v > b {
                    v - b
                } else {
                    S::zero()
                };
                gap * gap
            })
            .sum::<S>()
            .sqrt()
    }

    /// The `2^d` corners (fewer when degenerate axes collapse), ordered as
    /// binary counters with axis 0 least significant.
    pub fn corners(&self) -> Vec<Point<S>> {
        let d = self.dim();
        let mut out: Vec<Point<S>> = Vec::with_capacity(1 << d.min(20));
        for mask in 0u64..(1u64 << d) {
            let c: Vec<S> = (0..d)
                .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                .collect();
            if !out.iter().any(|p| p.coords() == c.as_slice()) {
                out.push(Point(c));
            }
        }
        out
    }

    /// The facet obtained by pinning `axis` to its lower (`upper = false`) or upper bound.
    pub fn facet(&self, axis: usize, upper: bool) -> HyperRectangle<S> {
        let v = if upper { self.hi[axis] } else { self.lo[axis] };
        let mut lo = self.lo.clone();
        let mut hi = self.hi.clone();
        lo[axis] = v;
        hi[axis] = v;
        HyperRectangle { lo, hi }
    }

    /// Every face of every dimension (including the rectangle itself).
    ///
    /// Each axis is either free, pinned low or pinned high; `3^d` combinations.
    pub fn faces(&self) -> Vec<HyperRectangle<S>> {
        let d = self.dim();
        let total = 3usize.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        for mut code in 0..total {
            let mut lo = self.lo.clone();
            let mut hi = self.hi.clone();
            for i in 0..d {
                match code % 3 {
                    1 => hi[i] = self.lo[i],
                    2 => lo[i] = self.hi[i],
                    _ => {}
                }
                code /= 3;
            }
            let f = HyperRectangle { lo, hi };
            if !out.contains(&f) {
                out.push(f);
            }
        }
        out
    }

    /// `lo_j + m·(r_j/ℓ)`, with the two ends returned exactly.
    pub fn barrier(&self, axis: usize, m: usize, ell: usize) -> S {
        barrier_coordinate(self.lo[axis], self.hi[axis], m, ell)
    }
}

impl<S: fmt::Debug> fmt::Debug for HyperRectangle<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axes: Vec<String> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| format!("[{a:?}, {b:?}]"))
            .collect();
        write!(f, "{}", axes.join("×"))
    }
}

/// Barrier position `lo + m·((hi − lo)/ℓ)` on one axis.
///
/// The cell width is computed once and multiplied, so the same `(lo, hi, ℓ, m)`
/// always produces the same bits; `m = 0` and `m = ℓ` return `lo` and `hi`.
pub fn barrier_coordinate<S: Scalar>(lo: S, hi: S, m: usize, ell: usize) -> S {
    if m == 0 {
        lo
    } else if m >= ell {
        hi
    } else {
        let width = (hi - lo) / S::from_usize_lossy(ell);
        lo + S::from_usize_lossy(m) * width
    }
}

/// `y` is ε-unreachable from `x` iff `f(y) > f(x) − ε‖x − y‖₂`.
pub fn is_unreachable<S: Scalar>(f_x: S, f_y: S, x: &[S], y: &[S], eps: S) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if eps < S::zero() {
        return Err(Error::invalid("eps must be nonnegative"));
    }
    Ok(unreachable_unchecked(f_x, f_y, x, y, eps))
}

#[inline]
pub(crate) fn unreachable_unchecked<S: Scalar>(f_x: S, f_y: S, x: &[S], y: &[S], eps: S) -> bool {
    f_y > f_x - eps * dist(x, y)
}

/// The `d·(ℓ−1)` interior axis-aligned slices of a full-dimensional rectangle,
/// ordered by axis, then by barrier index `m = 1..ℓ−1`.
pub fn barrier_slices<S: Scalar>(rect: &HyperRectangle<S>, ell: usize) -> Result<Vec<HyperRectangle<S>>> {
    if ell < 2 {
        return Err(Error::invalid(format!("ell must be >= 2, got {ell}")));
    }
    if !rect.is_full_dimensional() {
        return Err(Error::invalid("barrier slices need a full-dimensional rectangle"));
    }
    let d = rect.dim();
    let mut out = Vec::with_capacity(d * (ell - 1));
    for j in 0..d {
        for m in 1..ell {
            let v = rect.barrier(j, m, ell);
            let mut lo = rect.lo.clone();
            let mut hi = rect.hi.clone();
            lo[j] = v;
            hi[j] = v;
            out.push(HyperRectangle { lo, hi });
        }
    }
    Ok(out)
}

/// Per-axis point counts of the nice δ-net: `⌈√k·(b_i − a_i)/(2δ)⌉ + 1` on
/// non-degenerate axes and `1` on degenerate ones.
fn axis_counts<S: Scalar>(rect: &HyperRectangle<S>, delta: S) -> Vec<f64> {
    let k = rect.effective_dim() as f64;
    let delta = delta.to_f64_lossy();
    (0..rect.dim())
        .map(|i| {
            let side = rect.side(i).to_f64_lossy();
            if side > 0.0 {
                (k.sqrt() * side / (2.0 * delta)).ceil() + 1.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Closed-form cardinality `∏_i (⌈√k(b_i−a_i)/(2δ)⌉ + 1)` of the nice δ-net, as `f64`
/// so infeasible sizes can be reported without overflow.
pub fn nice_net_size<S: Scalar>(rect: &HyperRectangle<S>, delta: S) -> f64 {
    axis_counts(rect, delta).into_iter().product()
}

/// A nice δ-net: a tensor grid including both endpoints on every axis.
///
/// Points are not stored; they are decoded on demand in lexicographic order
/// (axis 0 most significant).
#[derive(Clone, Debug)]
pub struct Net<S> {
    host: HyperRectangle<S>,
    spacing: S,
    counts: Vec<usize>,
    len: usize,
}

impl<S: Scalar> Net<S> {
    pub fn host(&self) -> &HyperRectangle<S> {
        &self.host
    }

    pub fn spacing(&self) -> S {
        self.spacing
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn axis_value(&self, axis: usize, j: usize) -> S {
        let n = self.counts[axis];
        let (a, b) = (self.host.lo[axis], self.host.hi[axis]);
        if n == 1 || j == 0 {
            a
        } else if j == n - 1 {
            b
        } else {
            a + S::from_usize_lossy(j) * ((b - a) / S::from_usize_lossy(n - 1))
        }
    }

    /// Writes the `index`-th point into `out`.
    pub fn point_into(&self, mut index: usize, out: &mut [S]) {
        debug_assert!(index < self.len);
        for axis in (0..self.counts.len()).rev() {
            let n = self.counts[axis];
            out[axis] = self.axis_value(axis, index % n);
            index /= n;
        }
    }

    pub fn point(&self, index: usize) -> Point<S> {
        let mut v = vec![S::zero(); self.host.dim()];
        self.point_into(index, &mut v);
        Point(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = Point<S>> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    pub fn points(&self) -> Vec<Point<S>> {
        self.iter().collect()
    }
}

/// Builds the nice δ-net of `rect`, failing fast when it would exceed `cap` points.
pub fn nice_delta_net<S: Scalar>(rect: &HyperRectangle<S>, delta: S, cap: usize) -> Result<Net<S>> {
    if !(delta > S::zero()) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    let counts = axis_counts(rect, delta);
    let size: f64 = counts.iter().product();
    if !size.is_finite() || size > cap as f64 {
        return Err(Error::ResourceLimit {
            what: format!("nice {delta}-net of {rect:?}"),
            size,
            cap: cap as f64,
        });
    }
    Ok(Net {
        host: rect.clone(),
        spacing: delta,
        counts: counts.iter().map(|&c| c as usize).collect(),
        len: size as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rect(lo: &[f64], hi: &[f64]) -> HyperRectangle<f64> {
        HyperRectangle::new(lo.to_vec(), hi.to_vec()).unwrap()
    }

    #[test]
    fn segment_net_in_plane() {
        let r = rect(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(r.effective_dim(), 1);
        let net = nice_delta_net(&r, 0.25, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net.len(), 3);
        assert_eq!(nice_net_size(&r, 0.25), 3.0);
        let pts: Vec<Vec<f64>> = net.iter().map(|p| p.coords().to_vec()).collect();
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn degenerate_rectangle_net_is_single_point() {
        let p = Point::new(vec![0.3, -2.0, 7.0]).unwrap();
        let r = HyperRectangle::point(&p);
        assert_eq!(r.effective_dim(), 0);
        for delta in [1e-6, 0.5, 10.0] {
            let net = nice_delta_net(&r, delta, DEFAULT_NET_CAP).unwrap();
            assert_eq!(net.points(), vec![p.clone()]);
        }
    }

    #[test]
    fn square_in_space_net() {
        let r = rect(&[0.0, 0.0, 0.0], &[1.0, 1.0, 0.0]);
        let net = nice_delta_net(&r, 0.5, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net.counts(), &[3, 3, 1]);
        assert_eq!(net.len(), 9);
    }

    #[test]
    fn net_errors() {
        let r = rect(&[0.0, 0.0], &[1.0, 1.0]);
        assert!(matches!(nice_delta_net(&r, 0.0, 10), Err(Error::InvalidArgument(_))));
        assert!(matches!(nice_delta_net(&r, -1.0, 10), Err(Error::InvalidArgument(_))));
        match nice_delta_net(&r, 1e-3, 1000) {
            Err(Error::ResourceLimit { size, .. }) => assert!(size > 1000.0),
            other => panic!("expected resource limit, got {other:?}"),
        }
    }

    #[test]
    fn unreachability_cases() {
        let x = [0.0, 0.0];
        let y = [1.0, 0.0];
        assert!(is_unreachable(1.0, 1.0, &x, &y, 0.1).unwrap());
        assert!(!is_unreachable(1.0, 0.0, &x, &y, 0.5).unwrap());
        for eps in [0.0, 0.3, 5.0] {
            assert!(!is_unreachable(2.0, 2.0, &x, &x, eps).unwrap());
        }
        assert!(is_unreachable(1.0, 1.0, &x, &[1.0], 0.1).is_err());
    }

    #[test]
    fn slices_of_unit_square() {
        let r = rect(&[0.0, 0.0], &[1.0, 1.0]);
        let s = barrier_slices(&r, 2).unwrap();
        assert_eq!(s, vec![rect(&[0.5, 0.0], &[0.5, 1.0]), rect(&[0.0, 0.5], &[1.0, 0.5])]);
        let s = barrier_slices(&r, 4).unwrap();
        assert_eq!(s.len(), 6);
        let fixed: Vec<f64> = s[..3].iter().map(|e| e.lo()[0]).collect();
        assert_eq!(fixed, vec![0.25, 0.5, 0.75]);
        let fixed: Vec<f64> = s[3..].iter().map(|e| e.lo()[1]).collect();
        assert_eq!(fixed, vec![0.25, 0.5, 0.75]);
        assert!(s.iter().all(|e| e.effective_dim() == 1));
        assert!(barrier_slices(&r, 1).is_err());
        assert!(barrier_slices(&rect(&[0.0, 0.0], &[1.0, 0.0]), 3).is_err());
    }

    fn nearest(net: &Net<f64>, y: &[f64]) -> f64 {
        net.iter().map(|p| dist(p.coords(), y)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn net_covers_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = rect(&[-0.3, 1.0, 2.0], &[0.9, 1.7, 2.4]);
        let delta = 0.11;
        let net = nice_delta_net(&r, delta, DEFAULT_NET_CAP).unwrap();
        for _ in 0..100 {
            let y: Vec<f64> = (0..3).map(|i| rng.random_range(r.lo()[i]..=r.hi()[i])).collect();
            assert!(nearest(&net, &y) <= delta);
        }
        assert!(net.iter().all(|p| r.contains(&p)));
    }

    #[test]
    fn face_restriction_is_a_net_of_the_face() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = rect(&[0.0, 0.0, 0.0], &[1.0, 0.6, 0.35]);
        let delta = 0.13;
        let net = nice_delta_net(&r, delta, DEFAULT_NET_CAP).unwrap();
        for face in r.faces() {
            let on_face: Vec<Point<f64>> = net.iter().filter(|p| face.contains(p)).collect();
            assert!(!on_face.is_empty(), "face {face:?} has no net point");
            for _ in 0..40 {
                let y: Vec<f64> = (0..3)
                    .map(|i| {
                        if face.side(i) > 0.0 {
                            rng.random_range(face.lo()[i]..=face.hi()[i])
                        } else {
                            face.lo()[i]
                        }
                    })
                    .collect();
                let best = on_face
                    .iter()
                    .map(|p| dist(p.coords(), &y))
                    .fold(f64::INFINITY, f64::min);
                assert!(best <= delta, "face {face:?}: probe {y:?} at {best}");
            }
        }
    }

    #[test]
    fn barrier_ends_are_exact() {
        let r = rect(&[0.1], &[0.7]);
        assert_eq!(r.barrier(0, 0, 7), 0.1);
        assert_eq!(r.barrier(0, 7, 7), 0.7);
    }

    #[test]
    fn corners_and_faces_count() {
        let r = rect(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]);
        assert_eq!(r.corners().len(), 8);
        assert_eq!(r.faces().len(), 27);
        let flat = rect(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(flat.corners().len(), 2);
    }

    #[test]
    fn works_in_single_precision() {
        let r = HyperRectangle::<f32>::unit_cube(2);
        // ⌈√2·1/0.5⌉ + 1 = 4 points per axis.
        let net = nice_delta_net(&r, 0.25f32, DEFAULT_NET_CAP).unwrap();
        assert_eq!(net.len(), 16);
        assert_eq!(net.point(15).coords(), &[1.0f32, 1.0]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn net_size_matches_closed_form(
                sides in proptest::collection::vec(0.0f64..3.0, 1..4),
                delta in 0.05f64..1.0,
            ) {
                let lo = vec![0.0; sides.len()];
                let r = HyperRectangle::new(lo, sides).unwrap();
                let net = nice_delta_net(&r, delta, DEFAULT_NET_CAP).unwrap();
                prop_assert_eq!(net.len() as f64, nice_net_size(&r, delta));
                prop_assert_eq!(net.iter().count(), net.len());
            }

            #[test]
            fn unreachability_monotone_in_eps(
                fx in -5.0f64..5.0, fy in -5.0f64..5.0,
                x in proptest::collection::vec(-3.0f64..3.0, 2),
                y in proptest::collection::vec(-3.0f64..3.0, 2),
                eps in 0.0f64..3.0, grow in 1.0f64..4.0,
            ) {
                // A larger slack only makes the threshold f(x) − ε‖x − y‖ lower.
                if is_unreachable(fx, fy, &x, &y, eps).unwrap() {
                    prop_assert!(is_unreachable(fx, fy, &x, &y, eps * grow).unwrap());
                }
            }
        }
    }
}
