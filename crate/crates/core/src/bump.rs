//! Plateau bump functions: η, β, χ, ρ, ζ.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpKind {
    /// Ramps built from `e^{−1/x}`; C^∞.
    SmoothExp,
    /// Raised-cosine ramps; C¹ only but cheap.
    CosineWindow,
}

/// `1` on the plateau, `0` off the support, monotone ramps in between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub kind: BumpKind,
    pub support: (f64, f64),
    pub plateau: (f64, f64),
}

/// Smooth step: 0 for x ≤ 0, 1 for x ≥ 1.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / x).exp();
    let b = (-1.0 / (1.0 - x)).exp();
    a / (a + b)
}

fn cosine_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        0.5 * (1.0 - (std::f64::consts::PI * x).cos())
    }
}

impl BumpSpec {
    pub fn new(kind: BumpKind, support: (f64, f64), plateau: (f64, f64)) -> Result<BumpSpec> {
        if !(support.0 < plateau.0 && plateau.0 <= plateau.1 && plateau.1 < support.1) {
            return Err(Error::InvalidArgument(format!(
                "plateau {plateau:?} must lie strictly inside support {support:?}"
            )));
        }
        Ok(BumpSpec { kind, support, plateau })
    }

    /// Symmetric smooth bump: 1 on `[−p, p]`, supported in `[−q, q]`.
    pub fn symmetric(p: f64, q: f64) -> BumpSpec {
        BumpSpec { kind: BumpKind::SmoothExp, support: (-q, q), plateau: (-p, p) }
    }

    /// The Littlewood–Paley η: 1 on [−1,1], supported in [−2,2].
    pub fn eta() -> BumpSpec {
        BumpSpec::symmetric(1.0, 2.0)
    }

    /// Time cutoff ρ: 1 on [1,2], supported in [1/2,4].
    pub fn rho() -> BumpSpec {
        BumpSpec { kind: BumpKind::SmoothExp, support: (0.5, 4.0), plateau: (1.0, 2.0) }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.support;
        let (c, d) = self.plateau;
        if x <= a || x >= b {
            return 0.0;
        }
        if x >= c && x <= d {
            return 1.0;
        }
        let step = match self.kind {
            BumpKind::SmoothExp => smooth_step,
            BumpKind::CosineWindow => cosine_step,
        };
        if x < c {
            step((x - a) / (c - a))
        } else {
            step((b - x) / (b - d))
        }
    }

    /// `∫ bump` by composite Gauss–Legendre (the ramps are smooth).
    pub fn integral(&self) -> f64 {
        let (a, b) = self.support;
        let (c, d) = self.plateau;
        let ramp = |lo: f64, hi: f64| crate::quadrature::integrate_real(|x| self.eval(x), lo, hi, 32);
        ramp(a, c) + (d - c) + ramp(d, b)
    }
}

/// The partition-of-unity profile ζ: supported in [−1,1] with
/// `Σ_l ζ(y − l) = 1`.
#[inline]
pub fn zeta(y: f64) -> f64 {
    smooth_step(1.0 - y.abs())
}

/// η evaluated at `|x|`.
#[inline]
pub fn eta(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        0.0
    } else {
        smooth_step(2.0 - a)
    }
}

/// `β^k(r) = η(2^{−k}r) − η(2^{−k+1}r)`.
#[inline]
pub fn beta_k(k: i32, r: f64) -> f64 {
    eta(r * 2f64.powi(-k)) - eta(r * 2f64.powi(-k + 1))
}

/// Shell cutoff of the `u` decomposition, `β_u(r) = η(r) − η(4r)`,
/// supported in `1/4 ≤ |r| ≤ 2`.
#[inline]
pub fn beta_u(r: f64) -> f64 {
    eta(r) - eta(4.0 * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn plateau_and_support() {
        let b = BumpSpec::eta();
        assert_eq!(b.eval(0.5), 1.0);
        assert_eq!(b.eval(-1.0), 1.0);
        assert_eq!(b.eval(2.0), 0.0);
        assert!(b.eval(1.5) > 0.0 && b.eval(1.5) < 1.0);
        assert_eq!(b.eval(1.5), eta(1.5));
        assert!(BumpSpec::new(BumpKind::SmoothExp, (0.0, 1.0), (0.5, 2.0)).is_err());
    }

    #[test]
    fn symmetric_ramps_integrate_to_midpoint() {
        // ramp(x) + ramp(1−x) = 1, so ∫η = 3
        assert!((BumpSpec::eta().integral() - 3.0).abs() < 1e-12);
        let c = BumpSpec { kind: BumpKind::CosineWindow, ..BumpSpec::eta() };
        assert!((c.integral() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_step_derivatives_continuous() {
        // six finite-difference derivatives stay bounded at the junctions
        let h = 1e-3;
        for x0 in [0.0, 1.0] {
            let d6 = |x: f64| {
                let c = [1.0, -6.0, 15.0, -20.0, 15.0, -6.0, 1.0];
                c.iter().enumerate().map(|(i, ci)| ci * smooth_step(x + (i as f64 - 3.0) * h)).sum::<f64>() / h.powi(6)
            };
            assert!(d6(x0).abs() < 1e6);
        }
    }

    proptest! {
        #[test]
        fn zeta_partition(y in -50.0f64..50.0) {
            let base = y.floor() as i64;
            let sum: f64 = (base - 2..=base + 2).map(|l| zeta(y - l as f64)).sum();
            prop_assert!((sum - 1.0).abs() < 1e-15);
        }

        #[test]
        fn lp_partition(r in 1.0f64..1e6) {
            let sum: f64 = eta(r) + (1..30).map(|k| beta_k(k, r)).sum::<f64>();
            prop_assert!((sum - 1.0).abs() < 1e-15);
        }

        #[test]
        fn bump_range(x in -5.0f64..5.0) {
            let v = BumpSpec::eta().eval(x);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
