//! The one-dimensional building blocks Ψ and Φ of the chain function.

use crate::scalar::Scalar;

/// `√(2πe)`, the supremum of Φ.
pub const PHI_SUP: f64 = 4.132731354122493;

/// `√(54/e)`, the supremum of Ψ′.
pub const PSI_PRIME_SUP: f64 = 4.457071888948829;

/// `Ψ(x) = exp(1 − 1/(2x − 1)²)` for `x > 1/2`, else 0.
#[inline]
pub fn psi<S: Scalar>(x: S) -> S {
    let half = S::lit(0.5);
    if x <= half {
        return S::zero();
    }
    let u = S::lit(2.0) * x - S::one();
    // exp underflows long before 1/u² overflows; returning 0 early avoids inf·0 later.
    let inv = S::one() / (u * u);
    if !(inv < S::lit(800.0)) {
        return S::zero();
    }
    (S::one() - inv).exp()
}

/// `Ψ′(x) = Ψ(x)·4/(2x − 1)³`.
#[inline]
pub fn psi_prime<S: Scalar>(x: S) -> S {
    let p = psi(x);
    if p == S::zero() {
        return S::zero();
    }
    let u = S::lit(2.0) * x - S::one();
    p * S::lit(4.0) / (u * u * u)
}

/// `Φ(x) = √e ∫_{−∞}^x e^{−t²/2} dt = √(2πe)·NormalCDF(x)`.
#[inline]
pub fn phi<S: Scalar>(x: S) -> S {
    let xf = x.to_f64_lossy();
    S::lit(PHI_SUP * 0.5 * libm::erfc(-xf / std::f64::consts::SQRT_2))
}

/// `Φ′(x) = √e·e^{−x²/2}`.
#[inline]
pub fn phi_prime<S: Scalar>(x: S) -> S {
    (S::lit(0.5) - x * x / S::lit(2.0)).exp()
}

/// Function table, so that property suites can be pointed at altered components.
#[derive(Clone, Copy)]
pub struct Components {
    pub psi: fn(f64) -> f64,
    pub psi_prime: fn(f64) -> f64,
    pub phi: fn(f64) -> f64,
    pub phi_prime: fn(f64) -> f64,
}

impl Default for Components {
    fn default() -> Self {
        Components {
            psi: psi::<f64>,
            psi_prime: psi_prime::<f64>,
            phi: phi::<f64>,
            phi_prime: phi_prime::<f64>,
        }
    }
}

/// Outcome of one property family.
#[derive(Clone, Debug, serde::Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub points: usize,
    pub violations: usize,
    pub first_violation: Option<f64>,
}

impl PropertyCheck {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn check(name: &str, xs: impl Iterator<Item = f64>, ok: impl Fn(f64) -> bool) -> PropertyCheck {
    let mut points = 0;
    let mut violations = 0;
    let mut first = None;
    for x in xs {
        points += 1;
        if !ok(x) {
            violations += 1;
            first.get_or_insert(x);
        }
    }
    PropertyCheck {
        name: name.into(),
        points,
        violations,
        first_violation: first,
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Exact-threshold checks of the component properties:
/// vanishing of Ψ, Ψ′ on `x ≤ 1/2`; `Ψ(x)Φ′(y) > 1` for `x ≥ 1, |y| < 1`;
/// `0 ≤ Ψ < e`, `0 ≤ Ψ′ ≤ √(54/e)`, `0 < Φ < √(2πe)`, `0 < Φ′ ≤ √e` on 10⁴ points each.
///
/// Φ is checked on `[−6, 6]` only: outside that range `0 < Φ` or `Φ < √(2πe)` can no
/// longer be resolved in double precision.
pub fn component_suite(c: &Components) -> Vec<PropertyCheck> {
    let e = std::f64::consts::E;
    let mut out = Vec::new();
    out.push(check("psi vanishes for x <= 1/2", grid(-50.0, 0.5, 10_000), |x| (c.psi)(x) == 0.0));
    out.push(check("psi' vanishes for x <= 1/2", grid(-50.0, 0.5, 10_000), |x| {
        (c.psi_prime)(x) == 0.0
    }));
    let ys: Vec<f64> = (1..200).map(|i| -1.0 + 2.0 * i as f64 / 200.0).collect();
    let mut viol = 0;
    let mut pts = 0;
    let mut first = None;
    for x in grid(1.0, 5.0, 200) {
        for &y in &ys {
            pts += 1;
            if !((c.psi)(x) * (c.phi_prime)(y) > 1.0) {
                viol += 1;
                first.get_or_insert(x);
            }
        }
    }
    out.push(PropertyCheck {
        name: "psi(x) phi'(y) > 1 for x >= 1, |y| < 1".into(),
        points: pts,
        violations: viol,
        first_violation: first,
    });
    let wide = || grid(-20.0, 20.0, 10_000);
    out.push(check("0 <= psi < e", wide(), |x| {
        let v = (c.psi)(x);
        (0.0..e).contains(&v)
    }));
    out.push(check("0 <= psi' <= sqrt(54/e)", wide(), |x| {
        let v = (c.psi_prime)(x);
        v >= 0.0 && v <= PSI_PRIME_SUP
    }));
    out.push(check("0 < phi < sqrt(2 pi e)", grid(-6.0, 6.0, 10_000), |x| {
        let v = (c.phi)(x);
        v > 0.0 && v < PHI_SUP
    }));
    out.push(check("0 < phi' <= sqrt(e)", wide(), |x| {
        let v = (c.phi_prime)(x);
        v > 0.0 && v <= e.sqrt()
    }));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(psi(0.5f64), 0.0);
        assert_eq!(psi_prime(0.5f64), 0.0);
        assert_eq!(psi(1.0f64), 1.0);
        assert!((phi(0.0f64) - 2.0663656770612464).abs() < 1e-12);
        assert!((phi_prime(0.0f64) - std::f64::consts::E.sqrt()).abs() < 1e-15);
        assert!(phi(-40.0f64) < 1e-300);
        assert!((phi(40.0f64) - PHI_SUP).abs() < 1e-12);
        assert!((PHI_SUP - (2.0 * std::f64::consts::PI * std::f64::consts::E).sqrt()).abs() < 1e-15);
        assert!((PSI_PRIME_SUP - (54.0 / std::f64::consts::E).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn psi_prime_peak() {
        // Attained where (2x − 1)² = 2/3; equal to the supremum up to rounding.
        let argmax = 0.5 * (1.0 + (2.0f64 / 3.0).sqrt());
        assert!((psi_prime(argmax) - PSI_PRIME_SUP).abs() < 1e-14);
        assert!(psi_prime(argmax + 1e-4) < psi_prime(argmax));
        assert!(psi_prime(argmax - 1e-4) < psi_prime(argmax));
    }

    #[test]
    fn psi_near_half_has_no_nan() {
        for x in [0.5f64 + 1e-300, 0.5 + 1e-17, 0.5 + 1e-9, 0.5 + 1e-3] {
            assert!(psi(x).is_finite());
            assert!(psi_prime(x).is_finite());
        }
    }

    #[test]
    fn derivatives_match_differences() {
        let h = 1e-6;
        for i in 0..400 {
            let x = -3.0 + i as f64 * 0.0173;
            let fd = (psi(x + h) - psi(x - h)) / (2.0 * h);
            assert!((fd - psi_prime(x)).abs() < 1e-6, "psi' at {x}");
            let fd = (phi(x + h) - phi(x - h)) / (2.0 * h);
            assert!((fd - phi_prime(x)).abs() < 1e-6, "phi' at {x}");
        }
    }

    #[test]
    fn suite_passes() {
        for c in component_suite(&Components::default()) {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn suite_catches_a_tampered_psi() {
        fn bad_psi(x: f64) -> f64 {
            if x <= 0.5 {
                0.0
            } else {
                (1.1 - 1.0 / (2.0 * x - 1.0).powi(2)).exp()
            }
        }
        let c = Components {
            psi: bad_psi,
            ..Components::default()
        };
        assert!(component_suite(&c).iter().any(|r| !r.passed()));
    }
}
