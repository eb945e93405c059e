//! Curves with exact derivatives, Frenet frames, the model class and the
//! affine rescaling / lifting maps.
//!
//! Every component of a curve is stored as a polynomial plus a finite sum of
//! harmonics `c cos(ws) + d sin(ws)`. That class is closed under
//! differentiation, integration, translation, dilation and linear
//! combination, which is all the constructions below need, so no derivative
//! is ever approximated by differencing.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute determinant threshold below which a curve is declared degenerate.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Number of uniform samples used for the model-class sup norm.
pub const MODEL_CLASS_SAMPLES: usize = 1001;

/// Declarative description of a curve family, as it appears in configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Family {
    Moment { n: usize },
    Helix { radius: f64, pitch: f64 },
    /// `coefficients[i][m]` is the coefficient of `s^m` in component `i`.
    Polynomial { coefficients: Vec<Vec<f64>> },
    /// Moment curve plus a polynomial perturbation in the same layout.
    PerturbedMoment { n: usize, perturbation: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Harmonic {
    cos: f64,
    sin: f64,
    freq: f64,
}

/// One scalar component: polynomial part plus harmonics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Component {
    poly: Vec<f64>,
    harmonics: Vec<Harmonic>,
}

impl Component {
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Component { poly: coeffs, harmonics: Vec::new() }
    }

    fn zero() -> Self {
        Component::default()
    }

    pub fn is_polynomial(&self) -> bool {
        self.harmonics.is_empty()
    }

    pub fn poly_coeffs(&self) -> &[f64] {
        &self.poly
    }

    /// `order`-th derivative at `s`.
    pub fn eval(&self, order: usize, s: f64) -> f64 {
        let mut acc = 0.0;
        let deg = self.poly.len();
        if order < deg {
            // Horner on the differentiated coefficients.
            for m in (order..deg).rev() {
                acc = acc * s + self.poly[m] * falling(m, order);
            }
        }
        for h in &self.harmonics {
            let (c, d) = rotate(h.cos, h.sin, order);
            let scale = h.freq.powi(order as i32);
            let (sn, cs) = (h.freq * s).sin_cos();
            acc += scale * (c * cs + d * sn);
        }
        acc
    }

    fn add_scaled(&mut self, other: &Component, factor: f64) {
        if self.poly.len() < other.poly.len() {
            self.poly.resize(other.poly.len(), 0.0);
        }
        for (a, b) in self.poly.iter_mut().zip(&other.poly) {
            *a += factor * b;
        }
        for h in &other.harmonics {
            match self.harmonics.iter_mut().find(|g| g.freq == h.freq) {
                Some(g) => {
                    g.cos += factor * h.cos;
                    g.sin += factor * h.sin;
                }
                None => self.harmonics.push(Harmonic {
                    cos: factor * h.cos,
                    sin: factor * h.sin,
                    freq: h.freq,
                }),
            }
        }
    }

    /// `s ↦ f(σ + λ s) − f(σ)`.
    fn recentred(&self, sigma: f64, lambda: f64) -> Component {
        let deg = self.poly.len();
        let mut poly = vec![0.0; deg];
        // Exact Taylor expansion of the polynomial part at σ.
        let mut fact = 1.0;
        for m in 0..deg {
            if m > 0 {
                fact *= m as f64;
            }
            let mut d = 0.0;
            for q in (m..deg).rev() {
                d = d * sigma + self.poly[q] * falling(q, m);
            }
            poly[m] = d * lambda.powi(m as i32) / fact;
        }
        let mut harmonics = Vec::with_capacity(self.harmonics.len());
        for h in &self.harmonics {
            let (sa, ca) = (h.freq * sigma).sin_cos();
            let c = h.cos * ca + h.sin * sa;
            let d = -h.cos * sa + h.sin * ca;
            harmonics.push(Harmonic { cos: c, sin: d, freq: h.freq * lambda });
            // constant offset removed below through the polynomial part
        }
        let mut out = Component { poly, harmonics };
        let at0 = out.eval(0, 0.0);
        if out.poly.is_empty() {
            out.poly.push(0.0);
        }
        out.poly[0] -= at0;
        out
    }

    /// The primitive vanishing at 0.
    fn primitive(&self) -> Component {
        let mut poly = vec![0.0; self.poly.len() + 1];
        for (m, c) in self.poly.iter().enumerate() {
            poly[m + 1] = c / (m + 1) as f64;
        }
        let mut harmonics = Vec::new();
        for h in &self.harmonics {
            // ∫ c cos + d sin = (c sin − d cos)/w, shifted to vanish at 0.
            harmonics.push(Harmonic { cos: -h.sin / h.freq, sin: h.cos / h.freq, freq: h.freq });
            poly[0] += h.sin / h.freq;
        }
        Component { poly, harmonics }
    }
}

fn falling(m: usize, j: usize) -> f64 {
    let mut p = 1.0;
    for q in 0..j {
        p *= (m - q) as f64;
    }
    p
}

fn rotate(c: f64, d: f64, order: usize) -> (f64, f64) {
    match order % 4 {
        0 => (c, d),
        1 => (d, -c),
        2 => (-c, -d),
        _ => (-d, c),
    }
}

/// An analytic curve `γ: [a,b] → ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    label: String,
    domain: (f64, f64),
    comps: Vec<Component>,
}

impl Curve {
    pub fn from_family(family: &Family) -> Result<Curve> {
        let curve = match family {
            Family::Moment { n } => Curve::moment(*n),
            Family::Helix { radius, pitch } => Curve::helix(*radius, *pitch),
            Family::Polynomial { coefficients } => Curve::polynomial(coefficients.clone())?,
            Family::PerturbedMoment { n, perturbation } => {
                Curve::perturbed_moment(*n, perturbation.clone())?
            }
        };
        check_dim(curve.dim())?;
        Ok(curve)
    }

    /// The moment curve `(s, s²/2, …, sⁿ/n!)`.
    pub fn moment(n: usize) -> Curve {
        let mut comps = Vec::with_capacity(n);
        let mut fact = 1.0;
        for j in 1..=n {
            fact *= j as f64;
            let mut c = vec![0.0; j + 1];
            c[j] = 1.0 / fact;
            comps.push(Component::polynomial(c));
        }
        Curve { label: format!("moment({n})"), domain: (-1.0, 1.0), comps }
    }

    /// `(R cos s, R sin s, p s)`.
    pub fn helix(radius: f64, pitch: f64) -> Curve {
        let h = |cos, sin| Component {
            poly: Vec::new(),
            harmonics: vec![Harmonic { cos, sin, freq: 1.0 }],
        };
        Curve {
            label: format!("helix({radius},{pitch})"),
            domain: (-1.0, 1.0),
            comps: vec![h(radius, 0.0), h(0.0, radius), Component::polynomial(vec![0.0, pitch])],
        }
    }

    pub fn polynomial(coefficients: Vec<Vec<f64>>) -> Result<Curve> {
        check_dim(coefficients.len())?;
        Ok(Curve {
            label: "polynomial".into(),
            domain: (-1.0, 1.0),
            comps: coefficients.into_iter().map(Component::polynomial).collect(),
        })
    }

    pub fn perturbed_moment(n: usize, perturbation: Vec<Vec<f64>>) -> Result<Curve> {
        if perturbation.len() != n {
            return Err(Error::InvalidArgument(format!(
                "perturbation has {} components, expected {n}",
                perturbation.len()
            )));
        }
        let mut c = Curve::moment(n);
        for (comp, p) in c.comps.iter_mut().zip(perturbation) {
            comp.add_scaled(&Component::polynomial(p), 1.0);
        }
        c.label = format!("perturbed_moment({n})");
        Ok(c)
    }

    pub fn from_components(label: impl Into<String>, comps: Vec<Component>) -> Curve {
        Curve { label: label.into(), domain: (-1.0, 1.0), comps }
    }

    pub fn with_domain(mut self, a: f64, b: f64) -> Result<Curve> {
        if !(-1.0..=1.0).contains(&a) || !(-1.0..=1.0).contains(&b) || a >= b {
            return Err(Error::InvalidArgument(format!("domain [{a},{b}] not inside [-1,1]")));
        }
        self.domain = (a, b);
        Ok(self)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn components(&self) -> &[Component] {
        &self.comps
    }

    /// True when every component is a polynomial.
    pub fn is_polynomial(&self) -> bool {
        self.comps.iter().all(Component::is_polynomial)
    }

    /// Writes `γ^{(order)}(s)` into `out`.
    pub fn eval_into(&self, order: usize, s: f64, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(order, s);
        }
    }

    pub fn derivative(&self, order: usize, s: f64) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.comps.iter().map(|c| c.eval(order, s)))
    }

    pub fn point(&self, s: f64) -> DVector<f64> {
        self.derivative(0, s)
    }

    /// Scalar function `s ↦ ⟨γ(s), ξ⟩` as a component.
    pub fn pairing(&self, xi: &[f64]) -> Component {
        let mut acc = Component::zero();
        for (c, x) in self.comps.iter().zip(xi) {
            if *x != 0.0 {
                acc.add_scaled(c, *x);
            }
        }
        acc
    }

    /// `[γ]_s`, the matrix of derivatives 1..n as columns.
    pub fn derivative_matrix(&self, s: f64) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| self.comps[i].eval(j + 1, s))
    }

    pub fn det(&self, s: f64) -> f64 {
        self.derivative_matrix(s).determinant()
    }

    /// Linear image `s ↦ A γ(s)`.
    pub fn linear_image(&self, label: impl Into<String>, a: &DMatrix<f64>) -> Curve {
        let comps = (0..a.nrows())
            .map(|i| {
                let mut acc = Component::zero();
                for (j, c) in self.comps.iter().enumerate() {
                    if a[(i, j)] != 0.0 {
                        acc.add_scaled(c, a[(i, j)]);
                    }
                }
                acc
            })
            .collect();
        Curve { label: label.into(), domain: (-1.0, 1.0), comps }
    }
}

fn check_dim(n: usize) -> Result<()> {
    if (2..=4).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dimension {n} not in 2..=4")))
    }
}

/// Orthonormal Frenet basis and generalised curvatures at a parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FrenetFrame {
    pub s: f64,
    pub basis: Vec<DVector<f64>>,
    /// `κ̃_j(s) = ⟨e_j'(s), e_{j+1}(s)⟩`, j = 1..n−1.
    pub curvatures: Vec<f64>,
}

impl FrenetFrame {
    /// Columns `e_1 … e_n`.
    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_columns(&self.basis)
    }

    /// `⟨e_j, ξ⟩` for all j (1-based j maps to index j−1).
    pub fn coordinates(&self, xi: &[f64]) -> Vec<f64> {
        self.basis
            .iter()
            .map(|e| e.iter().zip(xi).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// Gram–Schmidt on `γ'(s), …, γ^{(n)}(s)`.
///
/// The curvature `κ̃_j` equals `|w_{j+1}|/|w_j|`, where `w_j` is the
/// Gram–Schmidt residual of `γ^{(j)}`: differentiating `e_j = w_j/|w_j|`
/// leaves only the `γ^{(j+1)}` term in the `e_{j+1}` direction.
pub fn frenet_frame(curve: &Curve, s: f64) -> Result<FrenetFrame> {
    let n = curve.dim();
    let det = curve.det(s);
    if det.abs() < DEGENERACY_TOL {
        return Err(Error::DegenerateCurve { s, det });
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut norms = Vec::with_capacity(n);
    for j in 1..=n {
        let mut w = curve.derivative(j, s);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for e in &basis {
                let c = w.dot(e);
                w.axpy(-c, e, 1.0);
            }
        }
        let nw = w.norm();
        norms.push(nw);
        basis.push(w / nw);
    }
    let curvatures = (0..n - 1).map(|j| norms[j + 1] / norms[j]).collect();
    Ok(FrenetFrame { s, basis, curvatures })
}

/// Minimum of `|det[γ]_s|` over a grid, with a pass flag against `c0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NondegeneracyReport {
    pub min_abs_det: f64,
    pub pass: bool,
}

pub fn check_nondegeneracy(curve: &Curve, grid: &[f64], c0: f64) -> NondegeneracyReport {
    let min_abs_det = grid.iter().map(|&s| curve.det(s).abs()).fold(f64::INFINITY, f64::min);
    NondegeneracyReport { min_abs_det, pass: min_abs_det >= c0 }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelClassVerdict {
    pub member: bool,
    /// `max_{1≤j≤n+1} sup_s |γ^{(j)}(s) − γ_∘^{(j)}(s)|` on the sample grid.
    pub deviation: f64,
    /// Whether `γ(0) = 0` and `γ^{(j)}(0) = ē_j` hold.
    pub normalised_at_zero: bool,
}

/// Membership in the model class 𝔊_n(δ).
pub fn model_class_check(curve: &Curve, delta: f64) -> Result<ModelClassVerdict> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta = {delta} not in (0,1)")));
    }
    let n = curve.dim();
    let moment = Curve::moment(n);
    const TOL: f64 = 1e-12;
    let mut normalised = curve.point(0.0).amax() <= TOL;
    for j in 1..=n {
        let d = curve.derivative(j, 0.0);
        for i in 0..n {
            let target = if i + 1 == j { 1.0 } else { 0.0 };
            normalised &= (d[i] - target).abs() <= TOL;
        }
    }
    let (a, b) = (-1.0, 1.0);
    let mut deviation: f64 = 0.0;
    for q in 0..MODEL_CLASS_SAMPLES {
        let s = a + (b - a) * q as f64 / (MODEL_CLASS_SAMPLES - 1) as f64;
        for j in 1..=n + 1 {
            let diff = curve.derivative(j, s) - moment.derivative(j, s);
            deviation = deviation.max(diff.norm());
        }
    }
    Ok(ModelClassVerdict { member: normalised && deviation <= delta, deviation, normalised_at_zero: normalised })
}

/// The affine map behind the `(σ,λ)`-rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct RescalingMap {
    pub sigma: f64,
    pub lambda: f64,
    /// `[γ]_{σ,λ} = [γ]_σ · D_λ`.
    pub matrix: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
}

impl RescalingMap {
    pub fn new(curve: &Curve, sigma: f64, lambda: f64) -> Result<RescalingMap> {
        let n = curve.dim();
        let base = curve.derivative_matrix(sigma);
        let det = base.determinant();
        if det.abs() < DEGENERACY_TOL {
            return Err(Error::DegenerateCurve { s: sigma, det });
        }
        let d = DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| lambda.powi(i as i32 + 1)));
        let matrix = base * d;
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(Error::DegenerateCurve { s: sigma, det })?;
        Ok(RescalingMap { sigma, lambda, matrix, inverse })
    }
}

/// `γ_{σ,λ}(s) = [γ]_{σ,λ}^{-1}(γ(σ + λs) − γ(σ))` on `[−1,1]`.
pub fn rescale_curve(curve: &Curve, sigma: f64, lambda: f64) -> Result<(Curve, RescalingMap)> {
    let (a, b) = curve.domain();
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} not in (0,1]")));
    }
    if sigma - lambda < a - 1e-12 || sigma + lambda > b + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "[{}, {}] not inside the domain",
            sigma - lambda,
            sigma + lambda
        )));
    }
    let map = RescalingMap::new(curve, sigma, lambda)?;
    let shifted: Vec<Component> = curve.comps.iter().map(|c| c.recentred(sigma, lambda)).collect();
    let tmp = Curve::from_components("", shifted);
    let out = tmp.linear_image(format!("{}@({sigma},{lambda})", curve.label), &map.inverse);
    Ok((out, map))
}

/// Primitive lift `γ̄(s) = (∫₀ˢ γ, s)` and vertical lift `γ↑(s) = (γ(s), 1)`.
pub fn lift_curve(curve: &Curve) -> Result<(Curve, Curve)> {
    if curve.dim() != 3 {
        return Err(Error::UnsupportedFamily(format!(
            "lift needs a curve in R^3, got dimension {}",
            curve.dim()
        )));
    }
    let mut prim: Vec<Component> = curve.comps.iter().map(Component::primitive).collect();
    prim.push(Component::polynomial(vec![0.0, 1.0]));
    let mut vert = curve.comps.clone();
    vert.push(Component::polynomial(vec![1.0]));
    let bar = Curve { label: format!("{}-primitive", curve.label), domain: curve.domain, comps: prim };
    let up = Curve { label: format!("{}-vertical", curve.label), domain: curve.domain, comps: vert };
    for q in 0..=8 {
        let s = curve.domain.0 + (curve.domain.1 - curve.domain.0) * q as f64 / 8.0;
        let (d4, d3) = (bar.det(s).abs(), curve.det(s).abs());
        if (d4 - d3).abs() > 1e-9 * (1.0 + d3) {
            return Err(Error::InvalidArgument(format!(
                "lift determinant mismatch at s = {s}: {d4} vs {d3}"
            )));
        }
    }
    Ok((bar, up))
}

/// Empirical constants for the off-diagonal Frenet bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrenetDecayEntry {
    pub i: usize,
    pub j: usize,
    /// `sup |⟨γ^{(i)}(s₁), e_j(s₂)⟩| / |s₁−s₂|^{(j−i)∨0}`.
    pub c_curve: f64,
    /// `sup |⟨e_i(s₁), e_j(s₂)⟩| / |s₁−s₂|^{|i−j|}`.
    pub c_frame: f64,
    pub samples: usize,
}

/// Fits the constants in `|⟨γ^{(i)}(s₁), e_j(s₂)⟩| ≤ C|s₁−s₂|^{(j−i)∨0}`.
pub fn frenet_decay_check(curve: &Curve, pairs: &[(usize, usize, f64, f64)]) -> Result<Vec<FrenetDecayEntry>> {
    let n = curve.dim();
    let mut out: Vec<FrenetDecayEntry> = Vec::new();
    for &(i, j, s1, s2) in pairs {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::InvalidArgument(format!("index pair ({i},{j}) out of range")));
        }
        let f1 = frenet_frame(curve, s1)?;
        let f2 = frenet_frame(curve, s2)?;
        let h = (s1 - s2).abs();
        let e_curve = j.saturating_sub(i) as i32;
        let e_frame = (i as i32 - j as i32).abs();
        let gi = curve.derivative(i, s1);
        let a = gi.dot(&f2.basis[j - 1]).abs();
        let b = f1.basis[i - 1].dot(&f2.basis[j - 1]).abs();
        let ratio = |v: f64, e: i32| if e == 0 { v } else if h == 0.0 { 0.0 } else { v / h.powi(e) };
        let (rc, rf) = (ratio(a, e_curve), if i == j { b } else { ratio(b, e_frame) });
        match out.iter_mut().find(|e| e.i == i && e.j == j) {
            Some(e) => {
                e.c_curve = e.c_curve.max(rc);
                e.c_frame = e.c_frame.max(rf);
                e.samples += 1;
            }
            None => out.push(FrenetDecayEntry { i, j, c_curve: rc, c_frame: rf, samples: 1 }),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ortho_err(f: &FrenetFrame) -> f64 {
        let e = f.matrix();
        let g = e.transpose() * &e - DMatrix::identity(e.ncols(), e.ncols());
        g.amax()
    }

    #[test]
    fn moment_frame_at_zero_is_standard() {
        let f = frenet_frame(&Curve::moment(3), 0.0).unwrap();
        for (j, e) in f.basis.iter().enumerate() {
            for i in 0..3 {
                assert_eq!(e[i], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn curvature_matches_finite_difference_of_frame() {
        let c = Curve::moment(3);
        let h = 1e-5;
        let fp = frenet_frame(&c, h).unwrap();
        let fm = frenet_frame(&c, -h).unwrap();
        let f0 = frenet_frame(&c, 0.0).unwrap();
        let de1 = (&fp.basis[0] - &fm.basis[0]) / (2.0 * h);
        let fd = de1.dot(&f0.basis[1]);
        assert!((fd - 1.0).abs() < 1e-8, "{fd}");
        assert!((f0.curvatures[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn helix_curvatures_constant() {
        let c = Curve::helix(1.0, 1.0);
        let ks: Vec<_> = (0..10).map(|q| frenet_frame(&c, -0.9 + 0.2 * q as f64).unwrap().curvatures).collect();
        for j in 0..2 {
            let lo = ks.iter().map(|k| k[j]).fold(f64::INFINITY, f64::min);
            let hi = ks.iter().map(|k| k[j]).fold(f64::NEG_INFINITY, f64::max);
            assert!(hi - lo < 1e-9);
        }
        // κ = R/(R²+p²), parameter speed √2
        assert!((ks[0][0] - 0.5 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn nondegeneracy_examples() {
        let grid: Vec<f64> = (0..100).map(|q| -1.0 + 2.0 * q as f64 / 99.0).collect();
        let r = check_nondegeneracy(&Curve::moment(3), &grid, 0.5);
        assert_eq!(r.min_abs_det, 1.0);
        let planar = Curve::polynomial(vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.5], vec![0.0]]).unwrap();
        assert_eq!(check_nondegeneracy(&planar, &grid, 0.1).min_abs_det, 0.0);
        // helix: det(γ',γ'',γ''') = R² p
        let h = check_nondegeneracy(&Curve::helix(1.0, 1.0), &grid, 0.5);
        assert!((h.min_abs_det - 1.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_frame_rejected() {
        let planar = Curve::polynomial(vec![vec![0.0, 1.0], vec![0.0, 0.0, 0.5], vec![0.0]]).unwrap();
        assert!(matches!(frenet_frame(&planar, 0.0), Err(Error::DegenerateCurve { .. })));
    }

    #[test]
    fn model_class_examples() {
        let v = model_class_check(&Curve::moment(3), 0.1).unwrap();
        assert!(v.member && v.deviation == 0.0);
        let delta = 0.05;
        let p = vec![vec![0.0], vec![0.0], vec![0.0, 0.0, 0.0, 0.0, delta / 2.0 / 24.0]];
        let v = model_class_check(&Curve::perturbed_moment(3, p).unwrap(), delta).unwrap();
        // the fourth derivative of the perturbation is δ/2 everywhere
        assert!(v.member);
        assert!((v.deviation - delta / 2.0).abs() < 1e-15);
        assert!(!model_class_check(&Curve::helix(1.0, 1.0), 0.01).unwrap().member);
    }

    #[test]
    fn moment_is_rescaling_fixed_point() {
        let c = Curve::moment(3);
        let (r, map) = rescale_curve(&c, 0.3, 0.1).unwrap();
        for q in 0..50 {
            let s = -1.0 + 2.0 * q as f64 / 49.0;
            assert!((r.point(s) - c.point(s)).amax() < 1e-12);
        }
        let det = map.matrix.determinant();
        assert!((det - 0.1f64.powi(6)).abs() < 1e-10 * 0.1f64.powi(6));
        assert!((&map.matrix * &map.inverse - DMatrix::identity(3, 3)).amax() < 1e-10);
    }

    #[test]
    fn helix_rescaling_normalises() {
        let c = Curve::helix(1.0, 1.0);
        let (r, _) = rescale_curve(&c, 0.0, 0.5).unwrap();
        assert!(r.point(0.0).amax() < 1e-15);
        for j in 1..=3 {
            let d = r.derivative(j, 0.0);
            for i in 0..3 {
                assert!((d[i] - if i + 1 == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lift_of_moment() {
        let (bar, up) = lift_curve(&Curve::moment(3)).unwrap();
        let s = 0.2;
        let p = bar.point(s);
        let want = [s * s / 2.0, s.powi(3) / 6.0, s.powi(4) / 24.0, s];
        for i in 0..4 {
            assert!((p[i] - want[i]).abs() < 1e-16);
        }
        assert!((bar.det(s).abs() - 1.0).abs() < 1e-14);
        for q in 0..20 {
            let s = -0.95 + 0.1 * q as f64;
            assert!((bar.derivative(1, s) - up.point(s)).amax() < 1e-15);
        }
    }

    #[test]
    fn lift_of_helix_has_closed_form() {
        let c = Curve::helix(1.0, 0.5);
        let (bar, _) = lift_curve(&c).unwrap();
        let s = 0.7;
        let p = bar.point(s);
        assert!((p[0] - s.sin()).abs() < 1e-15);
        assert!((p[1] - (1.0 - s.cos())).abs() < 1e-15);
        assert!((p[2] - 0.25 * s * s).abs() < 1e-15);
    }

    #[test]
    fn frame_is_orthonormal_and_solves_frenet_ode() {
        for c in [Curve::moment(3), Curve::helix(1.0, 1.0), Curve::moment(4)] {
            for q in 0..7 {
                let s = -0.9 + 0.3 * q as f64;
                let f = frenet_frame(&c, s).unwrap();
                assert!(ortho_err(&f) < 1e-12);
                let h = 1e-5;
                let fp = frenet_frame(&c, s + h).unwrap();
                let fm = frenet_frame(&c, s - h).unwrap();
                let n = c.dim();
                for j in 0..n {
                    let de = (&fp.basis[j] - &fm.basis[j]) / (2.0 * h);
                    let mut want = DVector::zeros(n);
                    if j > 0 {
                        want -= f.curvatures[j - 1] * &f.basis[j - 1];
                    }
                    if j + 1 < n {
                        want += f.curvatures[j] * &f.basis[j + 1];
                    }
                    assert!((de - want).amax() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn frenet_decay_moment() {
        let c = Curve::moment(3);
        let hs: Vec<f64> = (0..12).map(|q| 1e-4 * 10f64.powf(q as f64 / 11.0 * 3.0)).collect();
        let vals: Vec<f64> = hs
            .iter()
            .map(|&h| {
                let e3 = &frenet_frame(&c, 0.1).unwrap().basis[2];
                c.derivative(1, 0.1 + h).dot(e3).abs()
            })
            .collect();
        let fit = crate::fit::loglog(&hs, &vals).unwrap();
        assert!(fit.slope >= 1.9, "{}", fit.slope);
        let pairs: Vec<_> = hs.iter().map(|&h| (1, 3, 0.1 + h, 0.1)).chain([(3, 1, 0.2, -0.3)]).collect();
        let rep = frenet_decay_check(&c, &pairs).unwrap();
        assert!(rep.iter().all(|e| e.c_curve.is_finite() && e.c_frame.is_finite()));
    }
}
