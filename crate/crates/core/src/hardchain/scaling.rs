use serde::Serialize;

use super::chain::ChainOracle;
use super::partition::ChainPartition;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// σ, r and the amplitude `L_p σ^{p+1}/l_p` for a target accuracy and initial gap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaledParameters {
    pub sigma: f64,
    pub r: usize,
    pub amplitude: f64,
}

/// `σ = (l_p ε/(0.08 L_p))^{1/p}`, `r = ⌊(Δ/1857)(L_p/l_p)^{1/p} ε^{−(1+p)/p}⌋`.
pub fn scaled_parameters(eps: f64, delta: f64, l_cap: f64, p: usize, l_p: f64) -> Result<ScaledParameters> {
    for (name, v) in [("eps", eps), ("Delta", delta), ("L_p", l_cap), ("l_p", l_p)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
        }
    }
    if p == 0 {
        return Err(Error::invalid("p must be at least 1"));
    }
    let pf = p as f64;
    let sigma = (l_p * eps / (0.08 * l_cap)).powf(1.0 / pf);
    let r_real = delta / 1857.0 * (l_cap / l_p).powf(1.0 / pf) * eps.powf(-(1.0 + pf) / pf);
    // A relative nudge keeps exact integers such as 43 from landing on 42.999….
    let r = (r_real * (1.0 + 1e-12)).floor();
    if r < 1.0 {
        return Err(Error::invalid(format!(
            "r = {r} < 1: the instance is degenerate at eps = {eps}, Delta = {delta}"
        )));
    }
    Ok(ScaledParameters {
        sigma,
        r: r as usize,
        amplitude: l_cap * sigma.powi(p as i32 + 1) / l_p,
    })
}

/// `16²·230²(r+1)²`, the constant `C` in the gate `C ln² d ≤ d`.
pub fn gate_constant(r: usize) -> f64 {
    let q = 16.0 * 230.0 * (r + 1) as f64;
    q * q
}

pub fn dimension_gate(d: usize, r: usize) -> bool {
    let l = (d as f64).ln();
    gate_constant(r) * l * l <= d as f64
}

/// Smallest real `d` with `C ln² d ≤ d`, by the fixed-point iteration `d ← C ln² d`.
pub fn min_dimension(r: usize) -> f64 {
    let c = gate_constant(r);
    let mut d = c * 1e3;
    for _ in 0..200 {
        let l = d.ln();
        let next = c * l * l;
        if (next - d).abs() <= 1e-12 * d {
            return next;
        }
        d = next;
    }
    d
}

/// The scaled oracle `f⁰ = A·f_P(x/σ)` on `d` coordinates.
///
/// Parts have size `⌊d/(r+2)⌋`; the remaining `d mod (r+2)` coordinates are inert.
pub fn make_scaled_oracle<S: Scalar>(
    eps: f64,
    delta: f64,
    l_cap: f64,
    p: usize,
    l_p: f64,
    d: usize,
    seed: u64,
) -> Result<ChainOracle<S>> {
    let par = scaled_parameters(eps, delta, l_cap, p, l_p)?;
    if !dimension_gate(d, par.r) {
        return Err(Error::DimensionTooSmall {
            d,
            min_d: min_dimension(par.r),
        });
    }
    let d0 = d / (par.r + 2);
    let partition = ChainPartition::sample_with_parts(d, d0, par.r + 2, seed)?;
    Ok(ChainOracle::with_scaling(
        partition,
        p,
        S::lit(par.sigma),
        S::lit(par.amplitude),
        S::lit(l_p),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_r_is_rejected() {
        assert!(matches!(
            scaled_parameters(0.1, 1.0, 1.0, 1, 1.0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn example_parameters() {
        let p = scaled_parameters(0.05, 200.0, 1.0, 1, 1.0).unwrap();
        assert_eq!(p.r, 43);
        assert!((p.sigma - 0.625).abs() < 1e-15);
        assert!((p.amplitude - 0.390625).abs() < 1e-15);
        // The initial gap bound is A·12r = 12/0.08² · ε² r = 1875 ε² r, which the
        // choice of r only keeps below (1875/1857)·Δ.
        let gap = p.amplitude * 12.0 * p.r as f64;
        assert!((gap - 1875.0 * 0.05f64.powi(2) * 43.0).abs() < 1e-9);
        assert!(gap <= 1875.0 / 1857.0 * 200.0);
    }

    #[test]
    fn higher_order_parameters() {
        let p = scaled_parameters(0.01, 50.0, 2.0, 2, 3.0).unwrap();
        let sigma = (3.0 * 0.01 / 0.16f64).sqrt();
        assert!((p.sigma - sigma).abs() < 1e-15);
        let r = (50.0 / 1857.0 * (2.0f64 / 3.0).sqrt() * 0.01f64.powf(-1.5)).floor() as usize;
        assert_eq!(p.r, r);
    }

    #[test]
    fn gate_reports_minimal_dimension() {
        let m = min_dimension(1);
        assert!(m > gate_constant(1));
        assert!(dimension_gate(m.ceil() as usize + 1, 1) || m > 1e18);
        let l = m.ln();
        assert!((gate_constant(1) * l * l - m).abs() <= 1e-9 * m);
        match make_scaled_oracle::<f64>(0.05, 200.0, 1.0, 1, 1.0, 1 << 20, 0) {
            Err(Error::DimensionTooSmall { d, min_d }) => {
                assert_eq!(d, 1 << 20);
                assert!((min_d - min_dimension(43)).abs() <= 1e-9 * min_d);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn nonpositive_inputs_are_rejected() {
        assert!(scaled_parameters(0.0, 1.0, 1.0, 1, 1.0).is_err());
        assert!(scaled_parameters(0.1, -1.0, 1.0, 1, 1.0).is_err());
        assert!(scaled_parameters(0.1, 1.0, 1.0, 0, 1.0).is_err());
    }
}
