//! Knapp-type lower bound for the planar maximal operator
//! `ℳ_h f(x) = sup_t |∫ f(x₁ − t(s + a₁), x₂ − t(h(s) + a₂)) χ(s) ds|`.
//!
//! `f_r` is the indicator of `K(r) = {|y₁ − a₁| ≤ r, |y₂ − a₂| ≤ D_h rⁿ}`,
//! whose `Lⁿ` norm is exact. `ℳ_h f_r` is evaluated exactly for each `t`
//! (an integral of χ over an explicit set of `s`) and integrated over the
//! wedges `E_λ(r)` where the lower bound lives.

use serde::Serialize;

use crate::bump::BumpSpec;
use crate::curve::Component;
use crate::error::{Error, Result};
use crate::fit::{self, FitResult};
use crate::quadrature::{gauss_legendre, integrate_real};

/// Allowed relative change of the wedge integral under node doubling.
pub const WEDGE_GATE: f64 = 0.01;
const MAX_WEDGE_NODES: usize = 64;
const SIGMA_SCAN: usize = 256;

/// The planar phase `h` with its degeneracy order `n` and `D_h`.
#[derive(Debug, Clone)]
pub struct KnappSetup {
    pub h: Component,
    pub n: usize,
    pub d_h: f64,
    pub a: (f64, f64),
    pub chi: BumpSpec,
    /// Parameters in `[−1,1]` where `h'` changes sign, with both ends.
    breaks: Vec<f64>,
}

impl KnappSetup {
    /// Checks `h^{(j)}(0) = 0` for `j < n`, `h^{(n)}(0) ≠ 0` and `a₂ ≠ 0`.
    pub fn new(h: Component, n: usize, a: (f64, f64)) -> Result<KnappSetup> {
        if n < 2 {
            return Err(Error::InvalidArgument("degeneracy order n must be at least 2".into()));
        }
        for j in 0..n {
            if h.eval(j, 0.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!("h^({j})(0) = {} ≠ 0", h.eval(j, 0.0))));
            }
        }
        if h.eval(n, 0.0).abs() < 1e-12 {
            return Err(Error::InvalidArgument(format!("h^({n})(0) vanishes")));
        }
        if a.1 == 0.0 {
            return Err(Error::InvalidArgument("a₂ must be nonzero".into()));
        }
        let fact: f64 = (1..=n).map(|j| j as f64).product();
        let d_h = (0..=2000)
            .map(|q| h.eval(n, -1.0 + q as f64 / 1000.0).abs())
            .fold(0.0, f64::max)
            / fact;
        let mut breaks = vec![-1.0];
        let grid: Vec<f64> = (0..=512).map(|q| -1.0 + q as f64 / 256.0).collect();
        for w in grid.windows(2) {
            let (fa, fb) = (h.eval(1, w[0]), h.eval(1, w[1]));
            if fa * fb < 0.0 {
                let (mut lo, mut hi) = (w[0], w[1]);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if h.eval(1, lo) * h.eval(1, mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                breaks.push(0.5 * (lo + hi));
            }
        }
        breaks.push(1.0);
        Ok(KnappSetup { h, n, d_h, a, chi: BumpSpec::symmetric(0.5, 1.0), breaks })
    }

    /// The helical model `h(s) = s³/6`.
    pub fn cubic(a: (f64, f64)) -> Result<KnappSetup> {
        KnappSetup::new(Component::polynomial(vec![0.0, 0.0, 0.0, 1.0 / 6.0]), 3, a)
    }

    /// `‖f_r‖_n = (4 D_h r^{n+1})^{1/n}`.
    pub fn norm_f(&self, r: f64) -> f64 {
        (4.0 * self.d_h * r.powi(self.n as i32 + 1)).powf(1.0 / self.n as f64)
    }

    /// `∫_a^b χ`, exact on the plateau.
    fn chi_integral(&self, a: f64, b: f64) -> f64 {
        let (sa, sb) = self.chi.support;
        let (pa, pb) = self.chi.plateau;
        let (a, b) = (a.max(sa), b.min(sb));
        if a >= b {
            return 0.0;
        }
        let mut total = (b.min(pb) - a.max(pa)).max(0.0);
        let ramp = |lo: f64, hi: f64| -> f64 {
            if lo >= hi {
                0.0
            } else {
                integrate_real(|s| self.chi.eval(s), lo, hi, 2)
            }
        };
        total += ramp(a, b.min(pa));
        total += ramp(a.max(pb), b);
        total
    }

    /// `∫ χ` over `{s ∈ [lo,hi] : c − w ≤ h(s) ≤ c + w}`.
    fn level_band_integral(&self, lo: f64, hi: f64, c: f64, w: f64) -> f64 {
        let mut total = 0.0;
        for piece in self.breaks.windows(2) {
            let (pa, pb) = (piece[0].max(lo), piece[1].min(hi));
            if pa >= pb {
                continue;
            }
            let (ha, hb) = (self.h.eval(0, pa), self.h.eval(0, pb));
            let increasing = hb >= ha;
            let solve = |level: f64| -> f64 {
                // parameter where h crosses `level` on the monotone piece
                let (mut x0, mut x1) = (pa, pb);
                for _ in 0..80 {
                    let mid = 0.5 * (x0 + x1);
                    if (self.h.eval(0, mid) < level) == increasing {
                        x0 = mid;
                    } else {
                        x1 = mid;
                    }
                }
                0.5 * (x0 + x1)
            };
            let (hmin, hmax) = if increasing { (ha, hb) } else { (hb, ha) };
            let (l0, l1) = ((c - w).max(hmin), (c + w).min(hmax));
            if l0 > l1 {
                continue;
            }
            let (s0, s1) = (solve(l0), solve(l1));
            let (s0, s1) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
            total += self.chi_integral(s0, s1);
        }
        total
    }

    /// The average at `(x, t)` with `t` parametrised by `σ` through
    /// `h(σ) = (x₂ − a₂)/t − a₂`.
    fn average_at_sigma(&self, x: (f64, f64), r: f64, sigma: f64) -> f64 {
        let (a1, a2) = self.a;
        let c = self.h.eval(0, sigma);
        let t = (x.1 - a2) / (c + a2);
        if !(t > 0.0) || !t.is_finite() {
            return 0.0;
        }
        let lo = (x.0 - a1 - r) / t - a1;
        let hi = (x.0 - a1 + r) / t - a1;
        let w = self.d_h * r.powi(self.n as i32) / t;
        self.level_band_integral(lo, hi, c, w)
    }

    /// `ℳ_h f_r(x)`: scan over `σ` (uniform, plus the fixed point of the
    /// `y₁` constraint and a log-spaced cluster at 0) then golden-section.
    pub fn maximal_value(&self, x: (f64, f64), r: f64) -> f64 {
        let a1 = self.a.0;
        let mut cands: Vec<f64> = (0..=SIGMA_SCAN).map(|q| -1.0 + 2.0 * q as f64 / SIGMA_SCAN as f64).collect();
        let mut sc = 0.0;
        for _ in 0..8 {
            let c = self.h.eval(0, sc);
            let t = (x.1 - self.a.1) / (c + self.a.1);
            if !(t > 0.0) {
                break;
            }
            sc = ((x.0 - a1) / t - a1).clamp(-1.0, 1.0);
        }
        let width = 4.0 * r.max(1e-300);
        cands.extend((0..=64).map(|q| sc + width * (q as f64 / 32.0 - 1.0)));
        for j in 0..40 {
            let d = r * 2f64.powf(j as f64 / 2.0 - 4.0);
            if d < 1.0 {
                cands.push(d);
                cands.push(-d);
            }
        }
        cands.push(0.0);
        cands.sort_by(f64::total_cmp);
        let vals: Vec<f64> = cands.iter().map(|&s| self.average_at_sigma(x, r, s)).collect();
        let (best, vbest) = vals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        let lo = cands[best.saturating_sub(1)];
        let hi = cands[(best + 1).min(cands.len() - 1)];
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (lo, hi);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (self.average_at_sigma(x, r, c), self.average_at_sigma(x, r, d));
        for _ in 0..40 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = self.average_at_sigma(x, r, c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = self.average_at_sigma(x, r, d);
            }
        }
        vbest.max(fc).max(fd)
    }

    /// Point of `E_λ(r)` for wedge coordinates `u ∈ [−r/2, r/2]`,
    /// `v ∈ [λ, 2λ)`.
    pub fn wedge_point(&self, u: f64, v: f64) -> (f64, f64) {
        let (a1, a2) = self.a;
        let x2 = a2 * (1.0 + v);
        (a1 / a2 * x2 + u, x2)
    }
}

/// One wedge of the lower bound.
#[derive(Debug, Clone, Serialize)]
pub struct WedgeRecord {
    pub lambda: f64,
    /// `∫_{E_λ(r)} (ℳ_h f_r)ⁿ`.
    pub integral: f64,
    /// `min ℳ_h f_r / (λ^{−1/n} r)` over the wedge nodes.
    pub witness_min: f64,
    pub witness_max: f64,
}

/// A row of the Knapp table.
#[derive(Debug, Clone, Serialize)]
pub struct KnappRow {
    pub r: f64,
    pub norm_f: f64,
    /// Lower bound `(Σ_λ ∫_{E_λ} (ℳf_r)ⁿ)^{1/n}`.
    pub norm_mf: f64,
    pub ratio: f64,
    pub nodes_per_axis: usize,
    pub gate_change: f64,
    pub wedges: Vec<WedgeRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct KnappReport {
    pub n: usize,
    pub d_h: f64,
    pub a: (f64, f64),
    pub rows: Vec<KnappRow>,
    /// Linear fit of `ratioⁿ` against `log(1/r)`.
    pub fit: FitResult,
    /// `ratioⁿ` at the smallest r over `ratioⁿ` at the largest.
    pub growth: f64,
    /// Max over min of the witness constant across all wedges and scales.
    pub witness_spread: f64,
}

fn wedge_integrals(setup: &KnappSetup, r: f64, lambdas: &[f64], nodes: usize) -> Vec<WedgeRecord> {
    let (x, w) = gauss_legendre(nodes);
    let n = setup.n as i32;
    let a2 = setup.a.1.abs();
    lambdas
        .iter()
        .map(|&lambda| {
            let mut integral = 0.0;
            let (mut wmin, mut wmax) = (f64::INFINITY, 0.0f64);
            let scale = lambda.powf(-1.0 / setup.n as f64) * r;
            for (xu, wu) in x.iter().zip(&w) {
                let u = 0.5 * r * xu;
                for (xv, wv) in x.iter().zip(&w) {
                    let v = lambda * (1.5 + 0.5 * xv);
                    let m = setup.maximal_value(setup.wedge_point(u, v), r);
                    integral += wu * wv * (0.5 * r) * (0.5 * lambda) * a2 * m.powi(n);
                    wmin = wmin.min(m / scale);
                    wmax = wmax.max(m / scale);
                }
            }
            WedgeRecord { lambda, integral, witness_min: wmin, witness_max: wmax }
        })
        .collect()
}

/// Dyadic `λ` with `rⁿ ≤ λ ≤ 1`.
pub fn dyadic_lambdas(r: f64, n: usize) -> Vec<f64> {
    let jmax = (n as f64 * (1.0 / r).log2() + 1e-9).floor() as i32;
    (0..=jmax).map(|j| 2f64.powi(-j)).collect()
}

/// Ratio row at one `r`, refined until the wedge integral is stable.
pub fn knapp_row(setup: &KnappSetup, r: f64) -> Result<KnappRow> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::InvalidArgument(format!("r = {r} not in (0,1)")));
    }
    let lambdas = dyadic_lambdas(r, setup.n);
    let mut nodes = 4;
    let mut prev = wedge_integrals(setup, r, &lambdas, nodes);
    loop {
        let next = wedge_integrals(setup, r, &lambdas, 2 * nodes);
        let (a, b): (f64, f64) =
            (prev.iter().map(|w| w.integral).sum(), next.iter().map(|w| w.integral).sum());
        let change = if b > 0.0 { (a - b).abs() / b } else { 0.0 };
        nodes *= 2;
        if change < WEDGE_GATE {
            let total = b;
            let norm_f = setup.norm_f(r);
            let norm_mf = total.powf(1.0 / setup.n as f64);
            return Ok(KnappRow {
                r,
                norm_f,
                norm_mf,
                ratio: norm_mf / norm_f,
                nodes_per_axis: nodes,
                gate_change: change,
                wedges: next,
            });
        }
        if nodes >= MAX_WEDGE_NODES {
            return Err(Error::RefinementNotConverged { what: "Knapp wedge integral", change });
        }
        prev = next;
    }
}

/// The full table with the fitted growth of `ratioⁿ` against `log(1/r)`.
pub fn knapp_experiment(setup: &KnappSetup, r_list: &[f64]) -> Result<KnappReport> {
    if r_list.len() < 2 {
        return Err(Error::InvalidArgument("need at least two values of r".into()));
    }
    let rows: Vec<KnappRow> = r_list.iter().map(|&r| knapp_row(setup, r)).collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|row| (1.0 / row.r).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|row| row.ratio.powi(setup.n as i32)).collect();
    let fit = fit::linear(&x, &y)?;
    let (imin, imax) = (
        rows.iter().enumerate().min_by(|a, b| a.1.r.total_cmp(&b.1.r)).unwrap().0,
        rows.iter().enumerate().max_by(|a, b| a.1.r.total_cmp(&b.1.r)).unwrap().0,
    );
    let growth = y[imin] / y[imax];
    let witnesses = rows.iter().flat_map(|row| row.wedges.iter());
    let (lo, hi) = witnesses.fold((f64::INFINITY, 0.0f64), |(lo, hi), w| (lo.min(w.witness_min), hi.max(w.witness_max)));
    Ok(KnappReport { n: setup.n, d_h: setup.d_h, a: setup.a, rows, fit, growth, witness_spread: hi / lo })
}
