//! The oscillatory multiplier `m[a](ξ;t) = ∫ e^{−it⟨γ(s),ξ⟩} a(ξ;t;s) χ(s) ρ(t) ds`
//! and its symbol decompositions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bump::{beta_k, beta_u, eta, zeta, BumpSpec};
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::fit::{loglog, FitResult};
use crate::quadrature::{composite_nodes, panels_for, KahanSum};
use crate::roots::{compute_roots, theta2_and_u, FrequencyPoint, RootData};

pub const MIN_NODES: usize = 64;
/// Relative tolerance of the doubling gate.
pub const GATE_REL: f64 = 1e-9;
/// Absolute floor of the gate, relative to `∫|aχ|`.
pub const GATE_ABS: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PieceKind {
    Unit,
    AK,
    AKl,
    AKlEps,
    AKlNuEps,
    AKlStarMuEps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

/// A localised multiplier piece.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolPiece {
    pub kind: PieceKind,
    pub k: u32,
    pub ell: u32,
    pub nu: Option<i64>,
    pub mu: Option<i64>,
    pub eps: f64,
    pub sign: Option<Sign>,
    /// Fine-tuning constant of the `s` localisation.
    pub rho_tune: f64,
    /// Half-opening `δ₀` of the conic base symbol; `None` for `a ≡ 1`.
    pub cone_delta0: Option<f64>,
}

pub const DEFAULT_EPS: f64 = 0.1;
pub const DEFAULT_RHO_TUNE: f64 = 1e-3;
pub const DEFAULT_DELTA0: f64 = 1e-2;

/// `⌊k/3⌋`.
pub fn floor_k3(k: u32) -> u32 {
    k / 3
}

/// `⌊(1−ε)k/3⌋`.
pub fn floor_k3_eps(k: u32, eps: f64) -> u32 {
    ((1.0 - eps) / 3.0 * k as f64 + 1e-12).floor().max(0.0) as u32
}

/// `ν ∈ 𝔑_ℓ(μ)`: nearest-block assignment, a partition of ℤ with
/// `|ν − 2^{(k−3ℓ)/2}μ| ≤ 2^{(k−3ℓ)/2}/2`.
pub fn block_of(k: u32, ell: u32, nu: i64) -> i64 {
    let w = 2f64.powf((k as f64 - 3.0 * ell as f64) / 2.0);
    (nu as f64 / w + 0.5).floor() as i64
}

/// Members of 𝔑_ℓ(μ).
pub fn block_members(k: u32, ell: u32, mu: i64) -> Vec<i64> {
    let w = 2f64.powf((k as f64 - 3.0 * ell as f64) / 2.0);
    let lo = ((mu as f64 - 1.0) * w).floor() as i64;
    let hi = ((mu as f64 + 1.0) * w).ceil() as i64;
    (lo..=hi).filter(|&nu| block_of(k, ell, nu) == mu).collect()
}

impl SymbolPiece {
    pub fn new(kind: PieceKind, k: u32, ell: u32) -> SymbolPiece {
        SymbolPiece {
            kind,
            k,
            ell,
            nu: None,
            mu: None,
            eps: DEFAULT_EPS,
            sign: None,
            rho_tune: DEFAULT_RHO_TUNE,
            cone_delta0: Some(DEFAULT_DELTA0),
        }
    }

    pub fn with_nu(mut self, nu: i64) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn with_mu(mut self, mu: i64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_sign(mut self, sign: Sign) -> Self {
        self.sign = Some(sign);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    /// `ℓ < ⌊k/3⌋_ε`: the pieces are localised around θ₁±.
    pub fn small_regime(&self) -> bool {
        self.ell < floor_k3_eps(self.k, self.eps)
    }

    /// Centre parameter `s_ν` (or `s_μ` for grouped pieces).
    pub fn centre(&self) -> Option<f64> {
        match self.kind {
            PieceKind::AKlNuEps => self.nu.map(|nu| {
                if self.small_regime() {
                    2f64.powf(-((self.k - self.ell) as f64) / 2.0) * nu as f64
                } else {
                    2f64.powi(-(self.ell as i32)) * nu as f64
                }
            }),
            PieceKind::AKlStarMuEps => self.mu.map(|mu| 2f64.powi(-(self.ell as i32)) * mu as f64),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ell > floor_k3(self.k) {
            return Err(Error::InvalidArgument(format!(
                "ell = {} exceeds floor(k/3) = {}",
                self.ell,
                floor_k3(self.k)
            )));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.rho_tune > 0.0) {
            return Err(Error::InvalidArgument("eps must be in (0,1) and rho_tune > 0".into()));
        }
        match self.kind {
            PieceKind::AKlNuEps if self.nu.is_none() => {
                Err(Error::InvalidArgument("a_kl_nu_eps needs nu".into()))
            }
            PieceKind::AKlStarMuEps if self.mu.is_none() => {
                Err(Error::InvalidArgument("a_kl_star_mu_eps needs mu".into()))
            }
            _ => {
                if let (Some(nu), Some(mu)) = (self.nu, self.mu) {
                    if self.small_regime() && block_of(self.k, self.ell, nu) != mu {
                        return Err(Error::InvalidArgument(format!("nu = {nu} not in N_l({mu})")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluates every `s`-independent factor at `ξ` and records the
    /// remaining `s` windows.
    pub fn prepare(&self, curve: &Curve, xi: &[f64]) -> Result<PreparedSymbol> {
        let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut base = 1.0;
        if self.kind == PieceKind::Unit {
            return Ok(PreparedSymbol::constant(1.0));
        }
        if let Some(d0) = self.cone_delta0 {
            // homogeneous conic cutoff: 1 for |ξ_j| ≤ 4δ₀|ξ|, 0 beyond 8δ₀|ξ|
            if xi.len() != 3 || !(xi[2] > 0.0) {
                return Ok(PreparedSymbol::constant(0.0));
            }
            base *= eta(xi[0] / (4.0 * d0 * norm)) * eta(xi[1] / (4.0 * d0 * norm));
        }
        base *= if self.k == 0 { eta(norm) } else { beta_k(self.k as i32, norm) };
        if base == 0.0 || self.kind == PieceKind::AK {
            return Ok(PreparedSymbol::constant(base));
        }
        let point = FrequencyPoint::new(xi.to_vec())?;
        let partial = theta2_and_u(curve, &point)?;
        let (k, ell) = (self.k as i32, self.ell as i32);
        let big_l = floor_k3(self.k) as i32;
        let u = partial.u;
        base *= if ell < big_l {
            beta_u(2f64.powi(-k + 2 * ell) * u)
        } else {
            eta(2f64.powi(-k + 2 * big_l) * u)
        };
        // θ₁± are only needed by the s windows
        if base == 0.0 || self.kind == PieceKind::AKl {
            return Ok(PreparedSymbol { base, windows: None, roots: Some(partial) });
        }
        let roots = compute_roots(curve, &point)?;
        let small = self.small_regime();
        let mut windows = Vec::new();
        if small {
            // a^{<0}: only negative u survives
            if u >= 0.0 {
                return Ok(PreparedSymbol { base: 0.0, windows: None, roots: Some(roots) });
            }
            let scale = 2f64.powf((k - ell) as f64 / 2.0 - self.k as f64 * self.eps) / self.rho_tune;
            let signs: &[Sign] = match self.sign {
                Some(Sign::Plus) => &[Sign::Plus],
                Some(Sign::Minus) => &[Sign::Minus],
                None => &[Sign::Plus, Sign::Minus],
            };
            for &sg in signs {
                let th = match sg {
                    Sign::Plus => roots.theta1_plus,
                    Sign::Minus => roots.theta1_minus,
                }
                .ok_or_else(|| Error::OutOfRegion("theta1 missing for u < 0".into()))?;
                let y = 2f64.powf((k - ell) as f64 / 2.0) * th;
                let weight = match self.kind {
                    PieceKind::AKlEps => 1.0,
                    PieceKind::AKlNuEps => zeta(y - self.nu.unwrap() as f64),
                    _ => {
                        let mu = self.mu.unwrap();
                        let c = y.floor() as i64;
                        (c - 1..=c + 2)
                            .filter(|&nu| block_of(self.k, self.ell, nu) == mu)
                            .map(|nu| zeta(y - nu as f64))
                            .sum()
                    }
                };
                if weight > 0.0 {
                    windows.push(Window { centre: th, scale, weight });
                }
            }
        } else {
            let scale = self.rho_tune * 2f64.powf(ell as f64 * (1.0 - self.eps));
            let y = 2f64.powi(ell) * roots.theta2;
            let weight = match self.kind {
                PieceKind::AKlEps => 1.0,
                PieceKind::AKlNuEps => zeta(y - self.nu.unwrap() as f64),
                _ => zeta(y - self.mu.unwrap() as f64),
            };
            if weight > 0.0 {
                windows.push(Window { centre: roots.theta2, scale, weight });
            }
        }
        Ok(PreparedSymbol { base, windows: Some(windows), roots: Some(roots) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Window {
    centre: f64,
    scale: f64,
    weight: f64,
}

/// A symbol frozen at one frequency: `base · Σ_w weight·η(scale·|s − centre|)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSymbol {
    base: f64,
    windows: Option<Vec<Window>>,
    pub roots: Option<RootData>,
}

impl PreparedSymbol {
    pub fn constant(base: f64) -> Self {
        PreparedSymbol { base, windows: None, roots: None }
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        match &self.windows {
            None => self.base,
            Some(ws) => {
                self.base * ws.iter().map(|w| w.weight * eta(w.scale * (s - w.centre))).sum::<f64>()
            }
        }
    }

    /// True when the symbol vanishes for every `s`.
    pub fn is_zero(&self) -> bool {
        self.base == 0.0 || matches!(&self.windows, Some(w) if w.is_empty())
    }

    /// Sup over `s` of the symbol.
    pub fn sup(&self) -> f64 {
        match &self.windows {
            None => self.base.abs(),
            Some(ws) => self.base.abs() * ws.iter().map(|w| w.weight).sum::<f64>(),
        }
    }

    /// Disjoint intervals outside of which the symbol vanishes, clipped to `[a,b]`.
    pub fn s_support(&self, a: f64, b: f64) -> Vec<(f64, f64)> {
        if self.is_zero() {
            return Vec::new();
        }
        let mut iv: Vec<(f64, f64)> = match &self.windows {
            None => vec![(a, b)],
            Some(ws) => ws
                .iter()
                .map(|w| (w.centre - 2.0 / w.scale, w.centre + 2.0 / w.scale))
                .map(|(lo, hi)| (lo.max(a), hi.min(b)))
                .filter(|(lo, hi)| lo < hi)
                .collect(),
        };
        iv.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in iv {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }
}

/// Pointwise symbol value `a(ξ;t;s)` (the symbols here do not depend on t).
pub fn symbol_value(symbol: &SymbolPiece, curve: &Curve, xi: &[f64], _t: f64, s: f64) -> Result<f64> {
    symbol.validate()?;
    Ok(symbol.prepare(curve, xi)?.eval(s))
}

/// Cutoffs shared by every multiplier evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierSetup {
    pub chi: BumpSpec,
    pub rho: BumpSpec,
}

impl MultiplierSetup {
    /// χ with plateau `[−1/2, 1/2]` and support `[−1, 1]`.
    pub fn wide() -> Self {
        MultiplierSetup { chi: BumpSpec::symmetric(0.5, 1.0), rho: BumpSpec::rho() }
    }

    /// χ supported in `I₀ = [−δ₀, δ₀]` with plateau of half the width.
    pub fn localised(delta0: f64) -> Self {
        MultiplierSetup { chi: BumpSpec::symmetric(0.5 * delta0, delta0), rho: BumpSpec::rho() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiplierSample {
    pub xi: Vec<f64>,
    pub t: f64,
    #[serde(serialize_with = "ser_complex")]
    pub value: Complex64,
    pub node_count: usize,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

fn integrate_pieces(
    phase: &crate::curve::Component,
    sym: &PreparedSymbol,
    chi: &BumpSpec,
    t: f64,
    intervals: &[(f64, f64)],
    nodes_per_unit: f64,
    factor: usize,
) -> (Complex64, f64, usize) {
    let mut re = KahanSum::default();
    let mut im = KahanSum::default();
    let mut abs = 0.0;
    let mut total = 0;
    for &(a, b) in intervals {
        let n = ((nodes_per_unit * (b - a)).ceil() as usize).max(MIN_NODES) * factor;
        let (x, w) = composite_nodes(a, b, panels_for(n));
        total += x.len();
        for (s, wq) in x.iter().zip(&w) {
            let amp = sym.eval(*s) * chi.eval(*s) * wq;
            if amp == 0.0 {
                continue;
            }
            let (sn, cs) = (t * phase.eval(0, *s)).sin_cos();
            re.add(amp * cs);
            im.add(-amp * sn);
            abs += amp.abs();
        }
    }
    (Complex64::new(re.value(), im.value()), abs, total)
}

/// Composite Gauss–Legendre evaluation of `m[a](ξ;t)` with the doubling gate.
pub fn evaluate_multiplier(
    curve: &Curve,
    symbol: Option<&SymbolPiece>,
    xi: &[f64],
    t: f64,
    setup: &MultiplierSetup,
) -> Result<MultiplierSample> {
    if !(0.5..=4.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t = {t} not in [1/2, 4]")));
    }
    if xi.len() != curve.dim() {
        return Err(Error::InvalidArgument("frequency dimension mismatch".into()));
    }
    let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sym = match symbol {
        Some(p) => {
            p.validate()?;
            if norm == 0.0 {
                return Err(Error::InvalidArgument("zero frequency for a localised symbol".into()));
            }
            p.prepare(curve, xi)?
        }
        None => PreparedSymbol::constant(1.0),
    };
    let (ca, cb) = setup.chi.support;
    let (da, db) = curve.domain();
    let intervals = sym.s_support(ca.max(da), cb.min(db));
    let rho = setup.rho.eval(t);
    if intervals.is_empty() || rho == 0.0 {
        return Ok(MultiplierSample { xi: xi.to_vec(), t, value: Complex64::new(0.0, 0.0), node_count: 0 });
    }
    let phase = curve.pairing(xi);
    let per_unit = 8.0 * t * norm;
    let (mut prev, abs, mut nodes) = integrate_pieces(&phase, &sym, &setup.chi, t, &intervals, per_unit, 1);
    let mut factor = 1;
    let mut change = f64::INFINITY;
    for _ in 0..3 {
        factor *= 2;
        let (next, _, n2) = integrate_pieces(&phase, &sym, &setup.chi, t, &intervals, per_unit, factor);
        let diff = (next - prev).norm();
        change = diff / next.norm().max(f64::MIN_POSITIVE);
        if diff <= GATE_REL * next.norm() + GATE_ABS * abs {
            return Ok(MultiplierSample { xi: xi.to_vec(), t, value: prev * rho, node_count: nodes });
        }
        prev = next;
        nodes = n2;
    }
    Err(Error::QuadratureNotConverged { nodes, change })
}

/// `∫ aχ` for the modulus bound `|m| ≤ ρ(t)∫χ sup|a|`.
pub fn modulus_bound(curve: &Curve, symbol: Option<&SymbolPiece>, xi: &[f64], t: f64, setup: &MultiplierSetup) -> Result<f64> {
    let sup = match symbol {
        Some(p) => p.prepare(curve, xi)?.sup(),
        None => 1.0,
    };
    Ok(setup.rho.eval(t) * setup.chi.integral() * sup)
}

/// Fixed quadrature nodes for bulk evaluation of `m` over many frequencies
/// and an arithmetic progression of times.
///
/// The node count follows eight nodes per oscillation period of the phase,
/// which is cheaper than the single-point rule; [`TimeSeriesQuadrature::gate`]
/// re-checks accuracy by doubling.
pub struct TimeSeriesQuadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    points: Vec<[f64; 4]>,
    dim: usize,
}

impl TimeSeriesQuadrature {
    /// Nodes on `[a,b]` for frequencies with `sup_s |⟨γ'(s),ξ⟩| ≤ slope_bound`
    /// and times up to `t_max`.
    pub fn new(curve: &Curve, chi: &BumpSpec, a: f64, b: f64, slope_bound: f64, t_max: f64, factor: usize) -> Self {
        let periods = t_max * slope_bound * (b - a) / (2.0 * std::f64::consts::PI);
        let n = ((8.0 * periods).ceil() as usize).max(MIN_NODES) * factor;
        let (x, w) = composite_nodes(a, b, panels_for(n));
        let dim = curve.dim();
        let mut nodes = Vec::with_capacity(x.len());
        let mut weights = Vec::with_capacity(x.len());
        let mut points = Vec::with_capacity(x.len());
        let mut buf = [0.0; 4];
        for (s, wq) in x.iter().zip(&w) {
            let c = chi.eval(*s);
            if c == 0.0 {
                continue;
            }
            curve.eval_into(0, *s, &mut buf[..dim]);
            nodes.push(*s);
            weights.push(wq * c);
            points.push(buf);
        }
        TimeSeriesQuadrature { nodes, weights, points, dim }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `∫ e^{−it⟨γ(s),ξ⟩} a(s) χ(s) ds` for `t = t0 + j·dt`, `j < count`.
    pub fn series(&self, xi: &[f64], sym: &PreparedSymbol, t0: f64, dt: f64, count: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        const RESYNC: usize = 64;
        for ((s, w), p) in self.nodes.iter().zip(&self.weights).zip(&self.points) {
            let amp = w * sym.eval(*s);
            if amp == 0.0 {
                continue;
            }
            let phi: f64 = (0..self.dim).map(|i| p[i] * xi[i]).sum();
            let step = Complex64::from_polar(1.0, -dt * phi);
            let mut z = Complex64::from_polar(amp, -t0 * phi);
            for (j, o) in out.iter_mut().enumerate() {
                if j % RESYNC == 0 && j > 0 {
                    z = Complex64::from_polar(amp, -(t0 + j as f64 * dt) * phi);
                }
                *o += z;
                z *= step;
            }
        }
        out
    }
}

/// Doubling check for a bulk rule: compares against a rule with twice the
/// nodes at one probe frequency.
pub fn gate_time_series(
    coarse: &TimeSeriesQuadrature,
    fine: &TimeSeriesQuadrature,
    xi: &[f64],
    sym: &PreparedSymbol,
    t0: f64,
    dt: f64,
    count: usize,
) -> f64 {
    let a = coarse.series(xi, sym, t0, dt, count);
    let b = fine.series(xi, sym, t0, dt, count);
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// One row of a decay survey.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayPoint {
    pub r: f64,
    pub abs_m: f64,
    pub node_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub fit: FitResult,
    pub points: Vec<DecayPoint>,
}

/// Log-log slope of `|m[a](Rω;t)|` against `R`.
pub fn fit_decay(
    curve: &Curve,
    direction: &[f64],
    t: f64,
    r_values: &[f64],
    symbol: Option<&SymbolPiece>,
    setup: &MultiplierSetup,
) -> Result<DecayFit> {
    let dn = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(dn > 0.0) {
        return Err(Error::InvalidArgument("decay direction must be nonzero".into()));
    }
    let mut points = Vec::with_capacity(r_values.len());
    for &r in r_values {
        let xi: Vec<f64> = direction.iter().map(|v| v / dn * r).collect();
        let m = evaluate_multiplier(curve, symbol, &xi, t, setup)?;
        points.push(DecayPoint { r, abs_m: m.value.norm(), node_count: m.node_count });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.r).collect();
    // exact zeros (non-stationary phase at machine precision) are clamped
    let ys: Vec<f64> = points.iter().map(|p| p.abs_m.max(1e-300)).collect();
    Ok(DecayFit { fit: loglog(&xs, &ys)?, points })
}

/// Dyadic `R` list `2^lo, …, 2^hi`.
pub fn dyadic_range(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

/// Kernel estimate record: max of `|K| / (2^{−(k−ℓ)/2} ψ ρ)` over probes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelWeightReport {
    pub max_ratio: f64,
    pub peak_abs_kernel: f64,
    pub peak_weight: f64,
    pub probes: usize,
    pub box_nodes: usize,
}

/// The weight `ψ_{𝒯_{k,ℓ}(s_ν)}(x,t)`.
pub fn plate_weight(curve: &Curve, k: u32, ell: u32, s_nu: f64, x: &[f64], t: f64) -> Result<f64> {
    let frame = crate::curve::frenet_frame(curve, s_nu)?;
    let g = curve.point(s_nu);
    let y: Vec<f64> = x.iter().zip(g.iter()).map(|(a, b)| a - t * b).collect();
    let c = frame.coordinates(&y);
    let mut acc = 1.0;
    for (j, cj) in c.iter().enumerate() {
        let e = ((j + 1) as f64 * (k - ell) as f64 / 2.0).min(k as f64);
        acc += 2f64.powf(e) * cj.abs();
    }
    Ok(2f64.powf((5.0 * k as f64 - 3.0 * ell as f64) / 2.0) * acc.powi(-100))
}

/// Kernel `K[a](x,t) = (2π)^{−3} ∫ e^{i⟨x,ξ⟩} m[a](ξ;t) dξ` by tensor
/// Gauss–Legendre over the frame-aligned bounding box of the symbol
/// support, compared with the plate weight.
pub fn kernel_weight_check(
    curve: &Curve,
    piece: &SymbolPiece,
    setup: &MultiplierSetup,
    probes: &[(Vec<f64>, f64)],
    nodes_per_axis: usize,
) -> Result<KernelWeightReport> {
    piece.validate()?;
    let s_c = piece.centre().ok_or_else(|| Error::InvalidArgument("kernel check needs nu or mu".into()))?;
    let frame = crate::curve::frenet_frame(curve, s_c)?;
    let (k, ell) = (piece.k as f64, piece.ell as f64);
    // frame-coordinate half widths of the support box, from the support lemma
    let dil = 2f64.powf(k);
    let c = 4.0;
    let half = [c * dil * 2f64.powf(-2.0 * ell), c * dil * 2f64.powf(-ell)];
    let e3 = (dil / (2.0 * c), 2.0 * c * dil);
    let (g1, w1) = crate::quadrature::gauss_legendre(nodes_per_axis);
    let mut samples: Vec<(Vec<f64>, f64, Vec<Complex64>)> = Vec::new();
    let g = curve.point(s_c);
    for (a1, wa) in g1.iter().zip(&w1) {
        for (a2, wb) in g1.iter().zip(&w1) {
            for (a3, wc) in g1.iter().zip(&w1) {
                let c1 = a1 * half[0];
                let c2 = a2 * half[1];
                let c3 = e3.0 + 0.5 * (a3 + 1.0) * (e3.1 - e3.0);
                let xi: Vec<f64> = (0..3)
                    .map(|i| c1 * frame.basis[0][i] + c2 * frame.basis[1][i] + c3 * frame.basis[2][i])
                    .collect();
                let sym = piece.prepare(curve, &xi)?;
                if sym.is_zero() {
                    continue;
                }
                let w = wa * wb * wc * half[0] * half[1] * 0.5 * (e3.1 - e3.0);
                let vals: Vec<Complex64> = probes
                    .iter()
                    .map(|(_, t)| evaluate_multiplier(curve, Some(piece), &xi, *t, setup).map(|m| m.value))
                    .collect::<Result<_>>()?;
                samples.push((xi, w, vals));
            }
        }
    }
    let norm = (2.0 * std::f64::consts::PI).powi(-3);
    let mut max_ratio: f64 = 0.0;
    let mut peak_k: f64 = 0.0;
    let mut peak_w: f64 = 0.0;
    for (pi, (x, t)) in probes.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (xi, w, vals) in &samples {
            let ph: f64 = x.iter().zip(xi).map(|(a, b)| a * b).sum();
            acc += vals[pi] * Complex64::from_polar(*w, ph);
        }
        let kv = (acc * norm).norm();
        let psi = plate_weight(curve, piece.k, piece.ell, s_c, x, *t)?;
        let _ = &g;
        let bound = 2f64.powf(-(k - ell) / 2.0) * psi * setup.rho.eval(*t);
        peak_k = peak_k.max(kv);
        peak_w = peak_w.max(psi);
        if bound > 0.0 {
            max_ratio = max_ratio.max(kv / bound);
        }
    }
    Ok(KernelWeightReport {
        max_ratio,
        peak_abs_kernel: peak_k,
        peak_weight: peak_w,
        probes: probes.len(),
        box_nodes: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_frequency() {
        let s = MultiplierSetup::wide();
        let m = evaluate_multiplier(&Curve::moment(3), None, &[0.0; 3], 1.0, &s).unwrap();
        assert!((m.value.re - s.chi.integral()).abs() < 1e-12 && m.value.im.abs() < 1e-15);
        let m = evaluate_multiplier(&Curve::moment(3), None, &[0.0; 3], 0.75, &s).unwrap();
        assert!((m.value.re - s.rho.eval(0.75) * s.chi.integral()).abs() < 1e-12);
    }

    #[test]
    fn block_partition() {
        for (k, ell) in [(9u32, 1u32), (12, 2), (10, 0)] {
            let mut seen = std::collections::HashSet::new();
            let w = 2f64.powf((k as f64 - 3.0 * ell as f64) / 2.0);
            for mu in -4..=4 {
                for nu in block_members(k, ell, mu) {
                    assert!(seen.insert(nu));
                    assert!((nu as f64 - w * mu as f64).abs() <= w);
                }
            }
        }
    }

    #[test]
    fn conjugate_symmetry() {
        let c = Curve::moment(3);
        let s = MultiplierSetup::wide();
        let xi = [3.0, -7.0, 40.0];
        let neg = [-3.0, 7.0, -40.0];
        let a = evaluate_multiplier(&c, None, &xi, 1.3, &s).unwrap().value;
        let b = evaluate_multiplier(&c, None, &neg, 1.3, &s).unwrap().value;
        assert!((a - b.conj()).norm() < 1e-12);
    }

    fn admissible(rng: &mut ChaCha8Rng, k: u32) -> Vec<f64> {
        let r = 2f64.powf(k as f64 - 1.0 + 2.0 * rng.random::<f64>());
        let a = rng.random_range(-0.079..0.079);
        let b = rng.random_range(-0.079..0.079);
        let n = (1.0f64 + a * a + b * b).sqrt();
        vec![r * a / n, r * b / n, r / n]
    }

    #[test]
    fn ell_partition_of_unity() {
        let c = Curve::moment(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let k = rng.random_range(3..=14);
            let xi = admissible(&mut rng, k);
            let ak = SymbolPiece::new(PieceKind::AK, k, 0).prepare(&c, &xi).unwrap().eval(0.0);
            let sum: f64 = (0..=floor_k3(k))
                .map(|ell| SymbolPiece::new(PieceKind::AKl, k, ell).prepare(&c, &xi).unwrap().eval(0.0))
                .sum();
            assert!((sum - ak).abs() < 1e-12, "k={k} sum={sum} ak={ak}");
        }
    }

    #[test]
    fn plus_minus_disjoint_and_u_shells() {
        let c = Curve::moment(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut nonzero = 0;
        for _ in 0..3000 {
            let k = rng.random_range(6..=14);
            let lk = floor_k3_eps(k, 0.1);
            if lk == 0 {
                continue;
            }
            let ell = rng.random_range(0..lk);
            let xi = admissible(&mut rng, k);
            let p = SymbolPiece::new(PieceKind::AKlEps, k, ell).with_sign(Sign::Plus).prepare(&c, &xi).unwrap();
            let m = SymbolPiece::new(PieceKind::AKlEps, k, ell).with_sign(Sign::Minus).prepare(&c, &xi).unwrap();
            if let Some(r) = &p.roots {
                for q in 0..200 {
                    let s = -1.0 + 2.0 * q as f64 / 199.0;
                    assert_eq!(p.eval(s) * m.eval(s), 0.0);
                }
                // and exactly at the two roots
                if let (Some(a), Some(b)) = (r.theta1_minus, r.theta1_plus) {
                    for s in [a, b] {
                        assert_eq!(p.eval(s) * m.eval(s), 0.0);
                    }
                }
            }
            if let Some(r) = &p.roots {
                let th = r.theta1_plus.unwrap_or(0.0);
                let y = 2f64.powf((k - ell) as f64 / 2.0) * th;
                let nu = y.round() as i64;
                let piece = SymbolPiece::new(PieceKind::AKlNuEps, k, ell).with_nu(nu).with_sign(Sign::Plus);
                let v = piece.prepare(&c, &xi).unwrap();
                if !v.is_zero() {
                    nonzero += 1;
                    let u = r.u.abs();
                    let lo = 2f64.powi(k as i32 - 2 * ell as i32 - 2);
                    let hi = 2f64.powi(k as i32 - 2 * ell as i32 + 2);
                    assert!(u >= lo && u <= hi, "|u| = {u} outside [{lo},{hi}]");
                }
            }
        }
        assert!(nonzero > 0);
    }

    #[test]
    fn doubling_gate_reports_nodes() {
        let c = Curve::moment(3);
        let m = evaluate_multiplier(&c, None, &[0.0, 0.0, 4096.0], 1.0, &MultiplierSetup::wide()).unwrap();
        assert!(m.node_count >= 8 * 4096 * 2);
    }

    #[test]
    fn time_series_matches_direct() {
        let c = Curve::moment(3);
        let setup = MultiplierSetup::wide();
        let xi = [10.0, -20.0, 300.0];
        let q = TimeSeriesQuadrature::new(&c, &setup.chi, -1.0, 1.0, 400.0, 2.0, 1);
        let sym = PreparedSymbol::constant(1.0);
        let series = q.series(&xi, &sym, 1.0, 0.01, 101);
        for j in [0, 17, 64, 100] {
            let t = 1.0 + 0.01 * j as f64;
            let m = evaluate_multiplier(&c, None, &xi, t, &setup).unwrap();
            assert!((series[j] - m.value / setup.rho.eval(t)).norm() < 1e-10);
        }
    }

    #[test]
    fn van_der_corput_exponents() {
        let c = Curve::moment(3);
        let r = dyadic_range(6, 14);
        let s = MultiplierSetup::wide();
        let bi = fit_decay(&c, &[0.0, 0.0, 1.0], 1.0, &r, None, &s).unwrap();
        assert!((-0.38..=-0.28).contains(&bi.fit.slope), "{:?}", bi.fit);
        let nd = fit_decay(&c, &[0.0, 1.0, 0.0], 1.0, &r, None, &s).unwrap();
        assert!((-0.55..=-0.45).contains(&nd.fit.slope), "{:?}", nd.fit);
        // ⟨γ',ξ⟩ = 1 everywhere: faster than any power
        let fast = fit_decay(&c, &[1.0, 0.0, 0.0], 1.0, &dyadic_range(2, 6), None, &s).unwrap();
        assert!(fast.fit.slope <= -2.0, "{:?}", fast.fit);
        assert!(fit_decay(&c, &[0.0; 3], 1.0, &r, None, &s).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn modulus_bound_holds(x1 in -50.0f64..50.0, x2 in -50.0f64..50.0, x3 in -200.0f64..200.0, t in 0.5f64..4.0) {
            let c = Curve::moment(3);
            let s = MultiplierSetup::wide();
            let xi = [x1, x2, x3];
            let m = evaluate_multiplier(&c, None, &xi, t, &s).unwrap();
            prop_assert!(m.value.norm() <= modulus_bound(&c, None, &xi, t, &s).unwrap() * (1.0 + 1e-12));
        }
    }
}
