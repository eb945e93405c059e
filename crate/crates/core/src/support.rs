//! Rejection-sampling checks of the frequency support of the symbol pieces.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::curve::{lift_curve, Curve};
use crate::error::{Error, Result};
use crate::frequency::FrenetBox;
use crate::oscillatory::{
    block_of, floor_k3, MultiplierSetup, PieceKind, Sign, SymbolPiece, TimeSeriesQuadrature,
};
use num_complex::Complex64;

/// Which containment is tested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SupportPart {
    /// `2^k·π₁(s_μ; 2^{−ℓ})`.
    A,
    /// `2^{k−ℓ}·π₀(s_ν; 2^{−(k−ℓ)/2}, 2^ℓ)`.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupportReport {
    pub part: SupportPart,
    pub k: u32,
    pub ell: u32,
    pub accepted: usize,
    pub proposals: usize,
    /// Smallest C for which every accepted sample lies in the C-dilated box.
    pub fitted_c: f64,
    pub violations: usize,
    pub c_budget: f64,
    pub solver_failures: usize,
}

impl SupportReport {
    pub fn pass(&self) -> bool {
        self.accepted > 0 && self.violations == 0
    }
}

/// Solves `⟨γ''(θ),ξ⟩ = 0`, `⟨γ'(θ),ξ⟩ = u` for `(ξ₁, ξ₂)` at fixed `ξ₃`,
/// so that the critical point of `⟨γ'(·),ξ⟩` is `θ` and its value `u`.
pub fn frequency_with_roots(curve: &Curve, theta2: f64, u: f64, xi3: f64) -> Option<[f64; 3]> {
    let d1 = curve.derivative(1, theta2);
    let d2 = curve.derivative(2, theta2);
    let (a11, a12, b1) = (d2[0], d2[1], -d2[2] * xi3);
    let (a21, a22, b2) = (d1[0], d1[1], u - d1[2] * xi3);
    let det = a11 * a22 - a12 * a21;
    if det.abs() < 1e-12 {
        return None;
    }
    Some([(b1 * a22 - a12 * b2) / det, (a11 * b2 - a21 * b1) / det, xi3])
}

fn u_range(k: u32, ell: u32) -> (f64, f64) {
    let big_l = floor_k3(k);
    if ell < big_l {
        (2f64.powi(k as i32 - 2 * ell as i32 - 2), 2f64.powi(k as i32 - 2 * ell as i32 + 1))
    } else {
        (0.0, 2f64.powi(k as i32 - 2 * big_l as i32 + 1))
    }
}

/// Draws one proposal aimed at the support of `piece`.
fn propose<R: Rng>(curve: &Curve, piece: &SymbolPiece, rng: &mut R) -> Option<[f64; 3]> {
    let (k, ell) = (piece.k, piece.ell);
    let xi3 = rng.random_range(2f64.powi(k as i32 - 1)..2f64.powi(k as i32 + 1));
    let (ulo, uhi) = u_range(k, ell);
    let mag = rng.random_range(ulo..uhi);
    if piece.small_regime() {
        let u = -mag.max(f64::MIN_POSITIVE);
        let centre = piece.centre().unwrap_or(0.0);
        let w = 2f64.powf(-((k - ell) as f64) / 2.0);
        let sign = match piece.sign {
            Some(Sign::Plus) => 1.0,
            Some(Sign::Minus) => -1.0,
            None => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
        };
        // θ₁ = θ₂ ± √(−2u/ξ₃) on the moment curve; other curves are
        // corrected by the acceptance step, which uses the real solver
        let theta1 = centre + rng.random_range(-2.0 * w..2.0 * w);
        let theta2 = theta1 - sign * (-2.0 * u / xi3).sqrt();
        frequency_with_roots(curve, theta2, u, xi3)
    } else {
        let u = if rng.random::<bool>() { mag } else { -mag };
        let centre = piece.centre().unwrap_or(0.0);
        let lam = 2f64.powi(-(ell as i32));
        let theta2 = centre + rng.random_range(-lam..lam);
        frequency_with_roots(curve, theta2, u, xi3)
    }
}

fn part_box(curve: &Curve, piece: &SymbolPiece, part: SupportPart) -> Result<FrenetBox> {
    let (k, ell) = (piece.k, piece.ell);
    match part {
        SupportPart::A => {
            let mu = match (piece.mu, piece.nu) {
                (Some(mu), _) => mu,
                (None, Some(nu)) if piece.small_regime() => block_of(k, ell, nu),
                (None, Some(nu)) => nu,
                _ => return Err(Error::InvalidArgument("support check needs nu or mu".into())),
            };
            let lam = 2f64.powi(-(ell as i32));
            FrenetBox::new(curve, 2, lam * mu as f64, lam, 2f64.powi(k as i32))
        }
        SupportPart::B => {
            if !piece.small_regime() || piece.kind != PieceKind::AKlNuEps {
                return Err(Error::InvalidArgument("part b) needs a small-regime a_kl_nu_eps piece".into()));
            }
            let s_nu = piece.centre().unwrap();
            Ok(FrenetBox::new(curve, 1, s_nu, 2f64.powf(-((k - ell) as f64) / 2.0), 2f64.powi((k - ell) as i32))?
                .with_outer(2f64.powi(ell as i32)))
        }
    }
}

/// Rejection-samples `n_samples` points of `supp_ξ piece` and fits the
/// smallest box constant; violations are counted at `c_budget`.
pub fn support_lemma_check(
    curve: &Curve,
    piece: &SymbolPiece,
    part: SupportPart,
    n_samples: usize,
    c_budget: f64,
    seed: u64,
) -> Result<SupportReport> {
    piece.validate()?;
    if !matches!(piece.kind, PieceKind::AKlNuEps | PieceKind::AKlStarMuEps) {
        return Err(Error::InvalidArgument("support check needs a nu or mu piece".into()));
    }
    let bx = part_box(curve, piece, part)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut accepted, mut proposals, mut failures, mut violations) = (0usize, 0usize, 0usize, 0usize);
    let mut fitted: f64 = 1.0;
    let max_proposals = 400 * n_samples.max(1);
    while accepted < n_samples && proposals < max_proposals {
        proposals += 1;
        let Some(xi) = propose(curve, piece, &mut rng) else { continue };
        let sym = match piece.prepare(curve, &xi) {
            Ok(s) => s,
            Err(_) => {
                failures += 1;
                continue;
            }
        };
        if sym.is_zero() {
            continue;
        }
        accepted += 1;
        let c = bx.min_constant(&xi);
        fitted = fitted.max(c);
        if c > c_budget {
            violations += 1;
        }
    }
    Ok(SupportReport {
        part,
        k: piece.k,
        ell: piece.ell,
        accepted,
        proposals,
        fitted_c: fitted,
        violations,
        c_budget,
        solver_failures: failures,
    })
}

/// Pools the check over every ν (or μ) index reachable inside the cone.
pub fn support_survey(
    curve: &Curve,
    k: u32,
    ell: u32,
    eps: f64,
    part: SupportPart,
    n_samples: usize,
    c_budget: f64,
    seed: u64,
) -> Result<SupportReport> {
    let base = SymbolPiece::new(PieceKind::AKlNuEps, k, ell).with_eps(eps);
    let indices: Vec<(i64, Option<Sign>)> = if base.small_regime() {
        // θ₁± reach |s| ≲ 0.5 inside the cone
        let w = 2f64.powf((k - ell) as f64 / 2.0);
        let top = (0.5 * w).ceil() as i64;
        (-top..=top).flat_map(|nu| [(nu, Some(Sign::Plus)), (nu, Some(Sign::Minus))]).collect()
    } else {
        let top = ((0.1 * 2f64.powi(ell as i32)).ceil() as i64).max(1);
        (-top..=top).map(|mu| (mu, None)).collect()
    };
    // first pass: acceptance rates, so that the budget goes to reachable pieces
    let mut rates = HashMap::new();
    for (i, &(nu, sg)) in indices.iter().enumerate() {
        let mut p = base.clone().with_nu(nu);
        p.sign = sg;
        let r = support_lemma_check(curve, &p, part, 20, c_budget, seed ^ (0x9e37 * i as u64))?;
        if r.accepted > 0 {
            rates.insert(i, r.accepted as f64 / r.proposals as f64);
        }
    }
    if rates.is_empty() {
        return Err(Error::EmptySample);
    }
    let per = n_samples.div_ceil(rates.len());
    let mut total = SupportReport {
        part,
        k,
        ell,
        accepted: 0,
        proposals: 0,
        fitted_c: 1.0,
        violations: 0,
        c_budget,
        solver_failures: 0,
    };
    let mut keys: Vec<usize> = rates.keys().copied().collect();
    keys.sort_unstable();
    for i in keys {
        let (nu, sg) = indices[i];
        let mut p = base.clone().with_nu(nu);
        p.sign = sg;
        let r = support_lemma_check(curve, &p, part, per, c_budget, seed.wrapping_add(1 + i as u64))?;
        total.accepted += r.accepted;
        total.proposals += r.proposals;
        total.fitted_c = total.fitted_c.max(r.fitted_c);
        total.violations += r.violations;
        total.solver_failures += r.solver_failures;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftedReport {
    pub k: u32,
    pub ell: u32,
    pub mu: i64,
    pub eps: f64,
    pub box_scale: f64,
    pub c_budget: f64,
    pub samples: usize,
    pub tail_fraction: f64,
    pub gate_change: f64,
}

/// `F_t m(ξ;·)` sampled on `τ_j = 2πj/T` from `m` on `[0, T)`.
fn t_spectrum(values: &[Complex64], dt: f64) -> Vec<(f64, Complex64)> {
    let n = values.len();
    let mut buf = values.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let period = n as f64 * dt;
    buf.into_iter()
        .enumerate()
        .map(|(j, z)| {
            let jj = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
            (2.0 * std::f64::consts::PI * jj / period, z * dt)
        })
        .collect()
}

/// Fraction of pooled `|F_t m|²` outside the C-dilated lifted box
/// `2^k·π_{2,γ̄}(s_μ; 2^{4εk}2^{−ℓ})`, with χ localised to `I₀`.
pub fn lifted_support_check(
    curve: &Curve,
    k: u32,
    ell: u32,
    mu: i64,
    eps: f64,
    delta0: f64,
    n_xi: usize,
    c_budget: f64,
    seed: u64,
) -> Result<LiftedReport> {
    if (ell as f64) < (4.0 * eps * k as f64).ceil() || ell > floor_k3(k) {
        return Err(Error::InvalidArgument(format!("lifted check needs ceil(4 eps k) <= ell <= floor(k/3), got ell = {ell}")));
    }
    let piece = SymbolPiece::new(PieceKind::AKlStarMuEps, k, ell).with_mu(mu).with_eps(eps);
    piece.validate()?;
    let setup = MultiplierSetup::localised(delta0);
    let (bar, _) = lift_curve(curve)?;
    let s_mu = 2f64.powi(-(ell as i32)) * mu as f64;
    let r = (2f64.powf(4.0 * eps * k as f64 - ell as f64)).min(1.0);
    let bx = FrenetBox::new(&bar, 3, s_mu, r, 2f64.powi(k as i32))?;
    let (a, b) = setup.chi.support;
    let slope = 2f64.powi(k as i32 + 1) * 2.0;
    let quad = TimeSeriesQuadrature::new(curve, &setup.chi, a, b, slope, 4.0, 1);
    let fine = TimeSeriesQuadrature::new(curve, &setup.chi, a, b, slope, 4.0, 2);
    // t ∈ [0, 8): ρ is supported in [1/2, 4]; Nyquist well above |⟨γ,ξ⟩| on I₀
    let (m_pts, period) = (2048usize, 8.0);
    let dt = period / m_pts as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inside, mut outside) = (0.0, 0.0);
    let mut samples = 0;
    let mut tries = 0;
    let mut gate: f64 = 0.0;
    while samples < n_xi && tries < 1000 * n_xi {
        tries += 1;
        let Some(xi) = propose(curve, &piece, &mut rng) else { continue };
        let sym = piece.prepare(curve, &xi)?;
        if sym.is_zero() {
            continue;
        }
        let raw = quad.series(&xi, &sym, 0.0, dt, m_pts);
        if samples == 0 {
            gate = crate::oscillatory::gate_time_series(&quad, &fine, &xi, &sym, 0.0, dt, m_pts);
        }
        let vals: Vec<Complex64> =
            raw.iter().enumerate().map(|(j, z)| z * setup.rho.eval(j as f64 * dt)).collect();
        for (tau, f) in t_spectrum(&vals, dt) {
            let w = f.norm_sqr();
            let big = [xi[0], xi[1], xi[2], tau];
            if bx.min_constant(&big) <= c_budget {
                inside += w;
            } else {
                outside += w;
            }
        }
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    Ok(LiftedReport {
        k,
        ell,
        mu,
        eps,
        box_scale: r,
        c_budget,
        samples,
        tail_fraction: outside / (inside + outside),
        gate_change: gate,
    })
}

/// Fraction of `|F_t m[a^{ν,(ε)}]|²` outside `|τ + q(ξ)| ≤ 2^{k−3ℓ+4εk}`,
/// where `q(ξ) = ⟨γ(θ₂(ξ)),ξ⟩`.
pub fn spatio_temporal_tail(curve: &Curve, piece: &SymbolPiece, delta0: f64, n_xi: usize, seed: u64) -> Result<f64> {
    piece.validate()?;
    let setup = MultiplierSetup::localised(delta0);
    let (a, b) = setup.chi.support;
    let quad = TimeSeriesQuadrature::new(curve, &setup.chi, a, b, 2f64.powi(piece.k as i32 + 2), 4.0, 1);
    let (m_pts, period) = (2048usize, 8.0);
    let dt = period / m_pts as f64;
    let width = 2f64.powf(piece.k as f64 - 3.0 * piece.ell as f64 + 4.0 * piece.eps * piece.k as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut inside, mut outside) = (0.0, 0.0);
    let (mut samples, mut tries) = (0, 0);
    while samples < n_xi && tries < 1000 * n_xi {
        tries += 1;
        let Some(xi) = propose(curve, piece, &mut rng) else { continue };
        let sym = piece.prepare(curve, &xi)?;
        if sym.is_zero() {
            continue;
        }
        let th = sym.roots.as_ref().map(|r| r.theta2).unwrap_or(0.0);
        let g = curve.point(th);
        let q: f64 = (0..3).map(|i| g[i] * xi[i]).sum();
        let raw = quad.series(&xi, &sym, 0.0, dt, m_pts);
        let vals: Vec<Complex64> =
            raw.iter().enumerate().map(|(j, z)| z * setup.rho.eval(j as f64 * dt)).collect();
        for (tau, f) in t_spectrum(&vals, dt) {
            if (tau + q).abs() <= width {
                inside += f.norm_sqr();
            } else {
                outside += f.norm_sqr();
            }
        }
        samples += 1;
    }
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    Ok(outside / (inside + outside))
}
