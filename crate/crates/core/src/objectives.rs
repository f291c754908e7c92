//! Builtin smooth test objectives.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::oracle::{Domain, Objective};
use crate::scalar::Scalar;

/// `(L/2)‖x − c‖²`.
#[derive(Clone, Debug)]
pub struct Quadratic<S> {
    center: Vec<S>,
    lipschitz: S,
    domain: Domain,
}

impl<S: Scalar> Quadratic<S> {
    pub fn new(center: Point<S>, lipschitz: S, domain: Domain) -> Result<Self> {
        if !(lipschitz > S::zero()) {
            return Err(Error::invalid("lipschitz constant must be positive"));
        }
        Ok(Quadratic {
            center: center.into_inner(),
            lipschitz,
            domain,
        })
    }

    pub fn center(&self) -> &[S] {
        &self.center
    }
}

impl<S: Scalar> Objective<S> for Quadratic<S> {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[S]) -> S {
        let s: S = x
            .iter()
            .zip(&self.center)
            .map(|(&a, &c)| (a - c) * (a - c))
            .sum();
        self.lipschitz * s / S::lit(2.0)
    }

    fn lipschitz(&self) -> S {
        self.lipschitz
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn gradient(&self, x: &[S]) -> Option<Vec<S>> {
        Some(
            x.iter()
                .zip(&self.center)
                .map(|(&a, &c)| self.lipschitz * (a - c))
                .collect(),
        )
    }

    fn name(&self) -> String {
        "quadratic".into()
    }
}

/// Separable `Σ (1 − cos(π x_i))·L/π²`; nonnegative with Hessian bounded by `L`.
#[derive(Clone, Debug)]
pub struct Cosine<S> {
    d: usize,
    lipschitz: S,
    domain: Domain,
}

impl<S: Scalar> Cosine<S> {
    pub fn new(d: usize, lipschitz: S, domain: Domain) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("dimension must be >= 1"));
        }
        if !(lipschitz > S::zero()) {
            return Err(Error::invalid("lipschitz constant must be positive"));
        }
        Ok(Cosine { d, lipschitz, domain })
    }
}

impl<S: Scalar> Objective<S> for Cosine<S> {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[S]) -> S {
        let pi = S::PI();
        let s: S = x.iter().map(|&v| S::one() - (pi * v).cos()).sum();
        s * self.lipschitz / (pi * pi)
    }

    fn lipschitz(&self) -> S {
        self.lipschitz
    }

    fn domain(&self) -> Domain {
        self.domain
    }

    fn gradient(&self, x: &[S]) -> Option<Vec<S>> {
        let pi = S::PI();
        Some(x.iter().map(|&v| self.lipschitz / pi * (pi * v).sin()).collect())
    }

    fn name(&self) -> String {
        "cosine".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::verify_gradient;

    #[test]
    fn builtins_match_finite_differences() {
        let q = Quadratic::new(Point::new(vec![0.3, 0.7]).unwrap(), 2.5, Domain::UnitCube).unwrap();
        let c = Cosine::new(3, 1.0, Domain::Whole).unwrap();
        let p2 = vec![Point::new(vec![0.1, 0.9]).unwrap(), Point::new(vec![0.5, 0.5]).unwrap()];
        let p3 = vec![Point::new(vec![0.1, -0.4, 2.2]).unwrap()];
        assert!(verify_gradient(&q, &p2, 1e-5).unwrap() < 1e-8);
        assert!(verify_gradient(&c, &p3, 1e-5).unwrap() < 1e-8);
    }

    #[test]
    fn cosine_is_nonnegative_and_zero_at_origin() {
        let c = Cosine::new(2, 1.0, Domain::Whole).unwrap();
        assert_eq!(c.value(&[0.0, 0.0]), 0.0);
        assert!(c.value(&[1.0, 1.0]) > 0.0);
        assert!((c.value(&[1.0, 0.0]) - 2.0 / std::f64::consts::PI.powi(2)).abs() < 1e-15);
    }
}
