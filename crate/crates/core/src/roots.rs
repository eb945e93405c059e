//! Implicit root functions θ₂(ξ), u(ξ), θ₁±(ξ), v±(ξ) of curves in ℝ³.

use serde::Serialize;

use crate::curve::Curve;
use crate::error::{Error, Result};

pub const ROOT_TOL: f64 = 1e-13;
pub const MAX_ITER: usize = 200;
/// Below this value of `|u|/|ξ|` the two θ₁ roots are reported as one.
pub const COINCIDENT_U: f64 = 1e-10;

/// A nonzero frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyPoint {
    pub xi: Vec<f64>,
    pub norm: f64,
}

impl FrequencyPoint {
    pub fn new(xi: Vec<f64>) -> Result<FrequencyPoint> {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::InvalidArgument("frequency must be nonzero and finite".into()));
        }
        Ok(FrequencyPoint { xi, norm })
    }

    pub fn normalized(&self) -> FrequencyPoint {
        FrequencyPoint { xi: self.xi.iter().map(|v| v / self.norm).collect(), norm: 1.0 }
    }

    pub fn scaled(&self, lambda: f64) -> FrequencyPoint {
        FrequencyPoint { xi: self.xi.iter().map(|v| v * lambda).collect(), norm: self.norm * lambda.abs() }
    }

    /// Cone region `ξ₃ ≥ (9/10)|ξ|`, `|ξ₁|,|ξ₂| ≤ 8δ₀|ξ|`.
    pub fn is_admissible(&self, delta0: f64) -> bool {
        self.xi.len() == 3
            && self.xi[2] >= 0.9 * self.norm
            && self.xi[0].abs() <= 8.0 * delta0 * self.norm
            && self.xi[1].abs() <= 8.0 * delta0 * self.norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootData {
    pub theta2: f64,
    pub u: f64,
    pub theta1_minus: Option<f64>,
    pub theta1_plus: Option<f64>,
    pub v_minus: Option<f64>,
    pub v_plus: Option<f64>,
}

impl RootData {
    pub fn root_count(&self) -> usize {
        match (self.theta1_minus, self.theta1_plus) {
            (Some(a), Some(b)) if a == b => 1,
            (Some(_), Some(_)) => 2,
            _ => 0,
        }
    }
}

/// Hybrid Newton–bisection for a monotone function on a bracket with a
/// sign change; `f` returns the value and the derivative.
fn solve_monotone(
    f: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    increasing: bool,
    what: &'static str,
) -> Result<f64> {
    let orient = |v: f64| if increasing { v } else { -v };
    let mut x = 0.5 * (lo + hi);
    let mut converged = false;
    let mut best = (f64::INFINITY, x);
    for _ in 0..MAX_ITER {
        let (fx, dfx) = f(x);
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if orient(fx) > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx != 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let step = (next - x).abs();
        x = next;
        if fx.abs() <= ROOT_TOL {
            converged = true;
        }
        // keep polishing to machine precision once the residual is small
        if converged && step <= 4.0 * f64::EPSILON * x.abs().max(1e-3) {
            break;
        }
        if hi - lo <= 2.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
    }
    let (fx, _) = f(x);
    let (r, x) = if fx.abs() <= best.0 { (fx.abs(), x) } else { best };
    if r > ROOT_TOL {
        return Err(Error::NoConvergence { what, residual: r });
    }
    Ok(x)
}

/// θ₂ and u only; the θ₁± fields stay empty.
pub fn theta2_and_u(curve: &Curve, xi: &FrequencyPoint) -> Result<RootData> {
    if curve.dim() != 3 || xi.xi.len() != 3 {
        return Err(Error::OutOfRegion("root geometry is defined for curves in R^3".into()));
    }
    let (a, b) = curve.domain();
    let w = curve.pairing(&xi.xi);
    let n = xi.norm;
    // convexity precondition ⟨γ'''(s),ξ⟩ ≥ |ξ|/2
    for q in 0..=64 {
        let s = a + (b - a) * q as f64 / 64.0;
        if w.eval(3, s) < 0.5 * n {
            return Err(Error::OutOfRegion(format!("<gamma'''({s}), xi> < |xi|/2")));
        }
    }
    let f2 = |s: f64| (w.eval(2, s) / n, w.eval(3, s) / n);
    if f2(a).0 > 0.0 || f2(b).0 < 0.0 {
        return Err(Error::OutOfRegion("<gamma''(s), xi> has no zero on the domain".into()));
    }
    let theta2 = solve_monotone(f2, a, b, true, "theta2")?;
    let u = w.eval(1, theta2);
    Ok(RootData { theta2, u, theta1_minus: None, theta1_plus: None, v_minus: None, v_plus: None })
}

/// θ₂, u and, when u < 0, θ₁± with v±.
pub fn compute_roots(curve: &Curve, xi: &FrequencyPoint) -> Result<RootData> {
    let mut out = theta2_and_u(curve, xi)?;
    let (a, b) = curve.domain();
    let w = curve.pairing(&xi.xi);
    let n = xi.norm;
    let (theta2, u) = (out.theta2, out.u);
    if u.abs() / n < COINCIDENT_U {
        out.theta1_minus = Some(theta2);
        out.theta1_plus = Some(theta2);
        out.v_minus = Some(0.0);
        out.v_plus = Some(0.0);
        return Ok(out);
    }
    if u > 0.0 {
        return Ok(out);
    }
    let f1 = |s: f64| (w.eval(1, s) / n, w.eval(2, s) / n);
    if f1(a).0 < 0.0 || f1(b).0 < 0.0 {
        return Err(Error::OutOfRegion("theta1 roots leave the domain".into()));
    }
    let tm = solve_monotone(f1, a, theta2, false, "theta1-")?;
    let tp = solve_monotone(f1, theta2, b, true, "theta1+")?;
    out.theta1_minus = Some(tm);
    out.theta1_plus = Some(tp);
    out.v_minus = Some(w.eval(2, tm));
    out.v_plus = Some(w.eval(2, tp));
    Ok(out)
}

/// Number of sign changes of `⟨γ'(·),ξ⟩` on a uniform grid (root-count oracle).
pub fn sign_change_scan(curve: &Curve, xi: &[f64], points: usize) -> usize {
    let (a, b) = curve.domain();
    let w = curve.pairing(xi);
    let mut count = 0;
    let mut prev = w.eval(1, a);
    for q in 1..points {
        let s = a + (b - a) * q as f64 / (points - 1) as f64;
        let v = w.eval(1, s);
        if (prev < 0.0) != (v < 0.0) {
            count += 1;
        }
        prev = v;
    }
    count
}

/// Spread statistics of one comparability pairing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparabilityFamily {
    pub pairing: &'static str,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub n_samples: usize,
    pub pass: bool,
}

impl ComparabilityFamily {
    pub fn spread(&self) -> f64 {
        self.max_ratio / self.min_ratio
    }
}

pub const COMPARABILITY_BUDGET: f64 = 10.0;

/// Ratios of `|v^±|`, `|θ₁^± − θ₂|` and `|θ₁⁺ − θ₁⁻|` against `|u(ξ/|ξ|)|^{1/2}`.
pub fn comparability_survey(
    curve: &Curve,
    sample: &[FrequencyPoint],
    budget: f64,
) -> Result<Vec<ComparabilityFamily>> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let names = ["v_plus", "v_minus", "theta1_offset", "theta1_gap"];
    let mut lo = [f64::INFINITY; 4];
    let mut hi = [0.0f64; 4];
    for xi in sample {
        let r = compute_roots(curve, &xi.normalized())?;
        if r.u >= 0.0 || r.root_count() != 2 {
            return Err(Error::InvalidArgument("comparability survey needs u < 0".into()));
        }
        let su = r.u.abs().sqrt();
        let (tm, tp) = (r.theta1_minus.unwrap(), r.theta1_plus.unwrap());
        // the offset family pools both sides of θ₂
        let off = [(tp - r.theta2) / su, (r.theta2 - tm) / su];
        let vals = [
            (r.v_plus.unwrap().abs() / su, r.v_plus.unwrap().abs() / su),
            (r.v_minus.unwrap().abs() / su, r.v_minus.unwrap().abs() / su),
            (off[0].min(off[1]), off[0].max(off[1])),
            ((tp - tm) / su, (tp - tm) / su),
        ];
        for q in 0..4 {
            lo[q] = lo[q].min(vals[q].0);
            hi[q] = hi[q].max(vals[q].1);
        }
    }
    Ok((0..4)
        .map(|q| ComparabilityFamily {
            pairing: names[q],
            min_ratio: lo[q],
            max_ratio: hi[q],
            n_samples: sample.len(),
            pass: hi[q] / lo[q] <= budget,
        })
        .collect())
}

/// Indices needed to evaluate the derivative scale predictions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeScales {
    pub k: u32,
    pub ell: u32,
    pub eps: f64,
    /// Frenet index `j` of the differentiation direction `e_j(s_ν)`.
    pub j: u32,
}

impl DerivativeScales {
    /// `M₁ = 2^{−(j(k−ℓ)/2 ∧ k)} 2^{εℓ}`.
    pub fn m1(&self) -> f64 {
        let e = (self.j as f64 * (self.k - self.ell) as f64 / 2.0).min(self.k as f64);
        2f64.powf(-e + self.eps * self.ell as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RootDerivativeRecord {
    pub order: u32,
    pub d_theta2: f64,
    pub predicted_theta2: f64,
    pub d_theta1_plus: Option<f64>,
    pub predicted_theta1: f64,
    /// measured / predicted for θ₂ and θ₁⁺.
    pub ratio_theta2: f64,
    pub ratio_theta1: Option<f64>,
}

/// Central-difference directional derivatives of θ₂ and θ₁⁺ against the
/// implicit-function scale predictions `M₁ᴺ M₂⁻¹`.
pub fn root_derivative_check(
    curve: &Curve,
    xi: &FrequencyPoint,
    direction: &[f64],
    order: u32,
    scales: DerivativeScales,
) -> Result<RootDerivativeRecord> {
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidArgument(format!("order {order} not in 1..=3")));
    }
    let dn = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = xi.norm * [1e-5, 1e-3, 1e-2][order as usize - 1];
    let at = |m: f64| -> Result<RootData> {
        let p: Vec<f64> = xi.xi.iter().zip(direction).map(|(a, d)| a + m * h * d / dn).collect();
        compute_roots(curve, &FrequencyPoint::new(p)?)
    };
    let stencil: &[(f64, f64)] = match order {
        1 => &[(1.0, 0.5), (-1.0, -0.5)],
        2 => &[(1.0, 1.0), (0.0, -2.0), (-1.0, 1.0)],
        _ => &[(2.0, 0.5), (1.0, -1.0), (-1.0, 1.0), (-2.0, -0.5)],
    };
    let mut d2 = 0.0;
    let mut d1 = Some(0.0);
    for &(m, c) in stencil {
        let r = at(m)?;
        d2 += c * r.theta2;
        d1 = match (d1, r.theta1_plus, r.u < 0.0) {
            (Some(acc), Some(t), true) => Some(acc + c * t),
            _ => None,
        };
    }
    let hn = h.powi(order as i32);
    let (d2, d1) = (d2 / hn, d1.map(|v| v / hn));
    let m1n = scales.m1().powi(order as i32);
    let predicted_theta2 = m1n * 2f64.powi(-(scales.ell as i32));
    let e1 = (scales.j as f64 * (scales.k - scales.ell) as f64 / 2.0).min(scales.k as f64);
    let predicted_theta1 =
        2f64.powf(-e1 * order as f64) * 2f64.powf(-((scales.k - scales.ell) as f64) / 2.0);
    Ok(RootDerivativeRecord {
        order,
        d_theta2: d2,
        predicted_theta2,
        d_theta1_plus: d1,
        predicted_theta1,
        ratio_theta2: d2.abs() / predicted_theta2,
        ratio_theta1: d1.map(|v| v.abs() / predicted_theta1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fp(x: [f64; 3]) -> FrequencyPoint {
        FrequencyPoint::new(x.to_vec()).unwrap()
    }

    #[test]
    fn closed_forms_moment() {
        let c = Curve::moment(3);
        let r = compute_roots(&c, &fp([0.0, 0.1, 1.0])).unwrap();
        assert!((r.theta2 + 0.1).abs() < 1e-15);
        assert!((r.u + 0.005).abs() < 1e-15);
        let r = compute_roots(&c, &fp([-0.02, 0.0, 1.0])).unwrap();
        assert!((r.theta1_plus.unwrap() - 0.2).abs() < 1e-14);
        assert!((r.theta1_minus.unwrap() + 0.2).abs() < 1e-14);
        assert!((r.v_plus.unwrap() - 0.2).abs() < 1e-14);
        assert!((r.v_minus.unwrap() + 0.2).abs() < 1e-14);
        // scan oracle: the roots are the sign changes at ±0.2
        assert_eq!(sign_change_scan(&c, &[-0.02, 0.0, 1.0], 100_001), 2);
        let r = compute_roots(&c, &fp([0.3, 0.2, 1.0])).unwrap();
        assert!((r.u - 0.28).abs() < 1e-15);
        assert_eq!(r.root_count(), 0);
        let w = c.pairing(&[0.3, 0.2, 1.0]);
        let min = (0..100_000).map(|q| w.eval(1, -1.0 + 2.0 * q as f64 / 99_999.0)).fold(f64::INFINITY, f64::min);
        assert!(min > 0.0);
    }

    #[test]
    fn rejects_non_convex_frequency() {
        assert!(matches!(compute_roots(&Curve::moment(3), &fp([0.0, 0.0, -1.0])), Err(Error::OutOfRegion(_))));
    }

    #[test]
    fn coincident_pair_near_zero_u() {
        let r = compute_roots(&Curve::moment(3), &fp([1e-12, 0.0, 1.0])).unwrap();
        assert_eq!(r.root_count(), 1);
        assert_eq!(r.theta1_plus, Some(r.theta2));
    }

    #[test]
    fn single_point_gap_ratio() {
        let x = fp([-0.02, 0.0, 1.0]);
        let fam = comparability_survey(&Curve::moment(3), &[x], 10.0).unwrap();
        let gap = fam.iter().find(|f| f.pairing == "theta1_gap").unwrap();
        let want = 2.0 * 2f64.sqrt() * 1.0004f64.sqrt().sqrt();
        assert!((gap.min_ratio - want).abs() < 1e-9, "{} {}", gap.min_ratio, want);
    }

    #[test]
    fn ratios_bounded_as_u_vanishes() {
        let sample: Vec<_> = (2..=8).map(|e| fp([-(10f64.powi(-e)), 0.0, 1.0])).collect();
        let fam = comparability_survey(&Curve::moment(3), &sample, 10.0).unwrap();
        assert!(fam.iter().all(|f| f.pass), "{fam:?}");
    }

    #[test]
    fn derivative_of_theta2_and_theta1() {
        let c = Curve::moment(3);
        let x = fp([-0.02, 0.01, 1.0]);
        let sc = DerivativeScales { k: 0, ell: 0, eps: 0.0, j: 1 };
        let rec = root_derivative_check(&c, &x, &[0.0, 1.0, 0.0], 1, sc).unwrap();
        assert!((rec.d_theta2 + 1.0).abs() < 1e-8);
        let r = compute_roots(&c, &x).unwrap();
        let rec = root_derivative_check(&c, &x, &[1.0, 0.0, 0.0], 1, sc).unwrap();
        let want = -1.0 / (r.theta1_plus.unwrap() - r.theta2);
        assert!((rec.d_theta1_plus.unwrap() - want).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn homogeneity_and_invariants(a in -0.079f64..0.079, b in -0.079f64..0.079, lam in 0.01f64..100.0) {
            let c = Curve::moment(3);
            let x = fp([a, b, 1.0]);
            let r = compute_roots(&c, &x).unwrap();
            let rs = compute_roots(&c, &x.scaled(lam)).unwrap();
            prop_assert!((r.theta2 - rs.theta2).abs() <= 1e-10 * r.theta2.abs().max(1e-3));
            prop_assert!((lam * r.u - rs.u).abs() <= 1e-10 * (lam * r.u).abs().max(1e-12 * lam));
            let w = c.pairing(&x.xi);
            prop_assert!(w.eval(2, r.theta2).abs() <= 1e-12 * x.norm);
            if let (Some(m), Some(p)) = (r.theta1_minus, r.theta1_plus) {
                prop_assert!(m <= r.theta2 && r.theta2 <= p);
                prop_assert!(w.eval(1, m).abs() <= 1e-12 * x.norm);
                prop_assert!(w.eval(1, p).abs() <= 1e-12 * x.norm);
            }
            for q in 0..1000 {
                let s = -1.0 + 2.0 * q as f64 / 999.0;
                prop_assert!(w.eval(1, s) >= r.u - 1e-15);
            }
        }
    }
}
