//! Frequency-side geometry: Frenet boxes, plates over generated cones,
//! sectors, the rescaling image check and the Brascamp–Lieb checker.

use nalgebra::{DMatrix, DVector, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::curve::{frenet_frame, rescale_curve, Curve, FrenetFrame};
use crate::error::{Error, Result};

/// Anisotropic slab `D·π_{d−1}(s;r)`:
/// `|⟨e_j,ξ⟩| ≤ D r^{d+1−j}` for `j ≤ d`, `|⟨e_{d+1},ξ⟩| ∈ [D/2, 2D]` and
/// `|⟨e_j,ξ⟩| ≤ D·outer` beyond.
#[derive(Debug, Clone, PartialEq)]
pub struct FrenetBox {
    pub d: usize,
    pub s: f64,
    pub r: f64,
    pub frame: FrenetFrame,
    pub dilation: f64,
    /// Bound on the trailing coordinates (1 in the standard definition).
    pub outer: f64,
}

impl FrenetBox {
    pub fn new(curve: &Curve, d: usize, s: f64, r: f64, dilation: f64) -> Result<FrenetBox> {
        if d == 0 || d >= curve.dim() {
            return Err(Error::InvalidArgument(format!(
                "box index d = {d} needs 1 ≤ d < {}",
                curve.dim()
            )));
        }
        if !(r > 0.0 && r <= 1.0) || !(dilation > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box scale r = {r} not in (0,1]"
            )));
        }
        Ok(FrenetBox {
            d,
            s,
            r,
            frame: frenet_frame(curve, s)?,
            dilation,
            outer: 1.0,
        })
    }

    pub fn with_outer(mut self, outer: f64) -> Self {
        self.outer = outer;
        self
    }

    /// Side bounds `b_j` with the `e_{d+1}` axis reported as its upper end.
    pub fn half_widths(&self) -> Vec<f64> {
        let n = self.frame.basis.len();
        (1..=n)
            .map(|j| {
                self.dilation
                    * if j <= self.d {
                        self.r.powi((self.d + 1 - j) as i32)
                    } else if j == self.d + 1 {
                        2.0
                    } else {
                        self.outer
                    }
            })
            .collect()
    }

    /// Smallest `C ≥ 1` with ξ in the `C`-dilate: every small side and the
    /// upper end scale by `C`, the lower end `D/2` by `1/C`.
    pub fn min_constant(&self, xi: &[f64]) -> f64 {
        self.min_constant_coords(&self.frame.coordinates(xi))
    }

    pub fn min_constant_coords(&self, c: &[f64]) -> f64 {
        let mut need: f64 = 1.0;
        for (j, cj) in c.iter().enumerate() {
            let j1 = j + 1;
            let a = cj.abs();
            if j1 == self.d + 1 {
                if a == 0.0 {
                    return f64::INFINITY;
                }
                need = need
                    .max(a / (2.0 * self.dilation))
                    .max(self.dilation / (2.0 * a));
            } else {
                let w = if j1 <= self.d {
                    self.dilation * self.r.powi((self.d + 1 - j1) as i32)
                } else {
                    self.dilation * self.outer
                };
                need = need.max(a / w);
            }
        }
        need
    }

    pub fn contains(&self, xi: &[f64], c: f64) -> bool {
        self.min_constant(xi) <= c
    }

    /// Membership of a lattice cell: the box is enlarged by `slack` in every
    /// frame coordinate (used when the box is thinner than the lattice).
    pub fn contains_inflated(&self, xi: &[f64], slack: f64) -> bool {
        let c = self.frame.coordinates(xi);
        let hw = self.half_widths();
        c.iter().enumerate().all(|(j, cj)| {
            let a = cj.abs();
            if j + 1 == self.d + 1 {
                a + slack >= 0.5 * self.dilation && a - slack <= hw[j]
            } else {
                a - slack <= hw[j]
            }
        })
    }

    /// Uniform sample from the box (frame coordinates), positive orientation
    /// on the `e_{d+1}` axis.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let hw = self.half_widths();
        let n = hw.len();
        let mut xi = vec![0.0; n];
        for j in 0..n {
            let c = if j == self.d {
                rng.random_range(0.5 * self.dilation..2.0 * self.dilation)
            } else {
                rng.random_range(-hw[j]..hw[j])
            };
            for (x, e) in xi.iter_mut().zip(self.frame.basis[j].iter()) {
                *x += c * e;
            }
        }
        xi
    }
}

/// Box centres `s_j = j·r` covering the curve's domain.
pub fn lattice_centres(curve: &Curve, r: f64) -> Vec<f64> {
    let (a, b) = curve.domain();
    let lo = (a / r - 1e-9).ceil() as i64;
    let hi = (b / r + 1e-9).floor() as i64;
    (lo..=hi).map(|j| j as f64 * r).collect()
}

/// The `(d−1, r)`-Frenet box decomposition over the maximal `r`-separated lattice.
pub fn build_decomposition(curve: &Curve, d: usize, r: f64) -> Result<Vec<FrenetBox>> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "decomposition scale r = {r} not in (0,1]"
        )));
    }
    lattice_centres(curve, r)
        .into_iter()
        .map(|s| FrenetBox::new(curve, d, s, r, 1.0))
        .collect()
}

/// Number of boxes containing ξ at constant `c`.
pub fn overlap_count(boxes: &[FrenetBox], xi: &[f64], c: f64) -> usize {
    boxes.iter().filter(|b| b.contains(xi, c)).count()
}

/// `[g]_{𝒞,s,r}` data for the cone generated by `g: I → ℝ³`.
#[derive(Debug, Clone, PartialEq)]
pub struct Plate {
    pub s: f64,
    pub r: f64,
    pub generator_map: Matrix4<f64>,
    inverse: Matrix4<f64>,
}

/// Region `ℛ = [−2,2]³ × [1/4,4]`.
pub fn in_plate_region(xi: &[f64]) -> bool {
    xi[..3].iter().all(|v| v.abs() <= 2.0) && (0.25..=4.0).contains(&xi[3])
}

impl Plate {
    /// From the value and first three derivatives of `g` at `s`.
    pub fn from_jet(s: f64, r: f64, jet: [[f64; 3]; 4]) -> Result<Plate> {
        let mut m = Matrix4::zeros();
        for i in 0..3 {
            for j in 0..3 {
                m[(i, j)] = r.powi(j as i32 + 1) * jet[j + 1][i];
            }
            m[(i, 3)] = jet[0][i];
        }
        m[(3, 3)] = 1.0;
        let inverse = m
            .try_inverse()
            .ok_or(Error::DegenerateCurve { s, det: 0.0 })?;
        Ok(Plate {
            s,
            r,
            generator_map: m,
            inverse,
        })
    }

    pub fn from_curve(g: &Curve, s: f64, r: f64) -> Result<Plate> {
        if g.dim() != 3 {
            return Err(Error::InvalidArgument(
                "plates need a generating curve in R^3".into(),
            ));
        }
        let mut jet = [[0.0; 3]; 4];
        for (o, row) in jet.iter_mut().enumerate() {
            g.eval_into(o, s, row);
        }
        Plate::from_jet(s, r, jet)
    }

    /// `max_{i≤3} |η_i|` for `η = [g]^{-1}ξ`; the last entry of η is ξ₄
    /// itself and does not depend on r.
    pub fn coefficient_norm(&self, xi: &[f64]) -> f64 {
        let v = self.inverse * Vector4::new(xi[0], xi[1], xi[2], xi[3]);
        v[0].abs().max(v[1].abs()).max(v[2].abs())
    }

    pub fn contains(&self, xi: &[f64]) -> bool {
        in_plate_region(xi) && xi[3] <= 2.0 && self.coefficient_norm(xi) <= 2.0
    }
}

/// Jet of `g = (e₄₁, e₄₂, e₄₃)/e₄₄` for the last Frenet vector of a curve in
/// ℝ⁴, by central differences of the frame.
pub fn cone_generator_jet(curve4: &Curve, s: f64) -> Result<[[f64; 3]; 4]> {
    let g = |t: f64| -> Result<[f64; 3]> {
        let f = frenet_frame(curve4, t)?;
        let e = &f.basis[3];
        Ok([e[0] / e[3], e[1] / e[3], e[2] / e[3]])
    };
    let h = 2e-3;
    let v: Vec<[f64; 3]> = (-3..=3)
        .map(|i| g(s + i as f64 * h))
        .collect::<Result<_>>()?;
    let mut jet = [[0.0; 3]; 4];
    for i in 0..3 {
        let f = |k: i32| v[(k + 3) as usize][i];
        jet[0][i] = f(0);
        jet[1][i] = (-f(2) + 8.0 * f(1) - 8.0 * f(-1) + f(-2)) / (12.0 * h);
        jet[2][i] = (-f(2) + 16.0 * f(1) - 30.0 * f(0) + 16.0 * f(-1) - f(-2)) / (12.0 * h * h);
        jet[3][i] = (-f(3) + 8.0 * f(2) - 13.0 * f(1) + 13.0 * f(-1) - 8.0 * f(-2) + f(-3))
            / (8.0 * h * h * h);
    }
    Ok(jet)
}

/// `Δ_{k,ℓ}(m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sector {
    pub k: u32,
    pub ell: u32,
    pub m: i64,
    pub c: f64,
}

pub const DEFAULT_SECTOR_C: f64 = 16.0;

impl Sector {
    pub fn contains(&self, xi: &[f64]) -> bool {
        let lam = 2f64.powi(-(self.ell as i32));
        let h = 2f64.powi(self.k as i32);
        (xi[1] - xi[2] * lam * self.m as f64).abs() <= self.c * lam * xi[2]
            && xi[2] >= h / self.c
            && xi[2] <= self.c * h
    }

    /// Sectors at angular distance beyond `2C` cannot meet.
    pub fn provably_disjoint(&self, other: &Sector) -> bool {
        self.k == other.k && self.ell == other.ell && (self.m - other.m).abs() as f64 > 2.0 * self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SectorReport {
    pub m: i64,
    pub g2: f64,
    pub samples: usize,
    pub violations: usize,
    /// Largest number of μ ∈ [−2^ℓ, 2^ℓ] sharing one sector index.
    pub max_fibre: usize,
}

fn sector_index(curve: &Curve, ell: u32, s: f64) -> Result<(i64, f64)> {
    let f = frenet_frame(curve, s)?;
    let e3 = &f.basis[2];
    let g2 = e3[1] / e3[2];
    Ok(((g2 * 2f64.powi(ell as i32)).round() as i64, g2))
}

/// `m(μ)` with a containment test of `2^k π₁(s_μ;2^{−ℓ})` in `Δ_{k,ℓ}(m(μ))`
/// and the fibre size of `μ ↦ m(μ)`.
pub fn sector_assignment(
    curve: &Curve,
    k: u32,
    ell: u32,
    mu: i64,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<SectorReport> {
    let lam = 2f64.powi(-(ell as i32));
    let s_mu = lam * mu as f64;
    let (m, g2) = sector_index(curve, ell, s_mu)?;
    let sector = Sector { k, ell, m, c };
    let bx = FrenetBox::new(curve, 2, s_mu, lam, 2f64.powi(k as i32))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let violations = (0..samples)
        .filter(|_| !sector.contains(&bx.sample(&mut rng)))
        .count();
    let span = 1i64 << ell;
    let (a, b) = curve.domain();
    let mut counts = std::collections::BTreeMap::new();
    for q in -span..=span {
        let s = lam * q as f64;
        if s < a || s > b {
            continue;
        }
        *counts
            .entry(sector_index(curve, ell, s)?.0)
            .or_insert(0usize) += 1;
    }
    Ok(SectorReport {
        m,
        g2,
        samples,
        violations,
        max_fibre: counts.values().copied().max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescalingReport {
    pub samples: usize,
    pub fitted_c: f64,
    pub violations: usize,
    pub s_tilde: f64,
}

/// Image of `2^{k−ℓ}π₀(s_ν; 2^{−(k−ℓ)/2}, 2^ℓ)` under `[γ]_{σ,λ}ᵀ` against
/// `2^{k−3ℓ}π_{0,γ̃}(s̃_ν; C·2^{−(k−3ℓ)/2})`; violations counted at `c`.
pub fn rescaling_image_check(
    curve: &Curve,
    k: u32,
    ell: u32,
    mu: i64,
    nu: i64,
    c: f64,
    samples: usize,
    seed: u64,
) -> Result<RescalingReport> {
    let lam = 2f64.powi(-(ell as i32));
    let sigma = lam * mu as f64;
    let s_nu = 2f64.powf(-((k - ell) as f64) / 2.0) * nu as f64;
    let (gt, map) = rescale_curve(curve, sigma, lam)?;
    let s_tilde = (s_nu - sigma) / lam;
    let src = FrenetBox::new(
        curve,
        1,
        s_nu,
        2f64.powf(-((k - ell) as f64) / 2.0),
        2f64.powi((k - ell) as i32),
    )?
    .with_outer(2f64.powi(ell as i32));
    let dst = FrenetBox::new(
        &gt,
        1,
        s_tilde,
        2f64.powf(-((k - 3 * ell) as f64) / 2.0).min(1.0),
        2f64.powi(k as i32 - 3 * ell as i32),
    )?;
    let mt = map.matrix.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fitted: f64 = 1.0;
    let mut violations = 0;
    for _ in 0..samples {
        let xi = DVector::from_vec(src.sample(&mut rng));
        let img = &mt * xi;
        let need = dst.min_constant(img.as_slice());
        fitted = fitted.max(need);
        if need > c {
            violations += 1;
        }
    }
    Ok(RescalingReport {
        samples,
        fitted_c: fitted,
        violations,
        s_tilde,
    })
}

/// Brascamp–Lieb verdict for four points on the cone generated by `g`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrascampLiebVerdict {
    pub lambda: f64,
    pub min_pair_det: f64,
    /// `min |det| / λ⁴`.
    pub fitted_c: f64,
    pub transversal: bool,
    pub condition_ii: bool,
    /// Smallest `½Σ dim π_ℓV − dim V` over tested subspaces.
    pub worst_margin: f64,
    pub subspaces_tested: usize,
    pub degenerate: bool,
}

pub const RANK_TOL: f64 = 1e-9;
pub const BL_SUBSPACE_SAMPLES: usize = 10_000;

fn rank(m: &DMatrix<f64>) -> usize {
    if m.ncols() == 0 || m.nrows() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let top = sv.iter().cloned().fold(0.0, f64::max);
    if top == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&v| v > RANK_TOL * top.max(1.0)).count()
}

fn orth_basis(cols: &[DVector<f64>]) -> DMatrix<f64> {
    if cols.is_empty() {
        return DMatrix::zeros(4, 0);
    }
    let m = DMatrix::from_columns(cols);
    let svd = m.svd(true, false);
    let u = svd.u.unwrap();
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > RANK_TOL * top.max(1.0))
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if keep.is_empty() {
        DMatrix::zeros(4, 0)
    } else {
        DMatrix::from_columns(&keep)
    }
}

fn complement(b: &DMatrix<f64>) -> DMatrix<f64> {
    // basis of the orthogonal complement of span(b) in ℝ⁴
    let p = if b.ncols() == 0 {
        DMatrix::zeros(4, 4)
    } else {
        b * b.transpose()
    };
    let q = DMatrix::<f64>::identity(4, 4) - p;
    orth_basis(&(0..4).map(|i| q.column(i).into_owned()).collect::<Vec<_>>())
}

/// Checks transversality and the dimension condition for the tangent
/// planes of `Γ(ρ,s) = ρ(g(s),1)` at the four `(ρ_ℓ, s_ℓ)`.
pub fn brascamp_lieb_check(
    g: &Curve,
    params: &[(f64, f64); 4],
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<BrascampLiebVerdict> {
    if g.dim() != 3 {
        return Err(Error::InvalidArgument(
            "generating curve must lie in R^3".into(),
        ));
    }
    for i in 0..4 {
        for j in i + 1..4 {
            let gap = (params[i].1 - params[j].1).abs();
            if gap < lambda {
                return Err(Error::SeparationViolated {
                    lambda,
                    detail: format!("|s_{} − s_{}| = {gap}", i + 1, j + 1),
                });
            }
        }
    }
    let tangent: Vec<(DVector<f64>, DVector<f64>)> = params
        .iter()
        .map(|&(rho, s)| {
            let p = g.point(s);
            let d = g.derivative(1, s);
            (
                DVector::from_vec(vec![p[0], p[1], p[2], 1.0]),
                DVector::from_vec(vec![rho * d[0], rho * d[1], rho * d[2], 0.0]),
            )
        })
        .collect();
    let mut min_det = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            let m = DMatrix::from_columns(&[
                tangent[i].0.clone(),
                tangent[i].1.clone(),
                tangent[j].0.clone(),
                tangent[j].1.clone(),
            ]);
            min_det = min_det.min(m.determinant().abs());
        }
    }
    let planes: Vec<DMatrix<f64>> = tangent
        .iter()
        .map(|(a, b)| orth_basis(&[a.clone(), b.clone()]))
        .collect();
    let degenerate = planes.iter().any(|p| p.ncols() < 2) || min_det <= f64::EPSILON;
    let projectors: Vec<DMatrix<f64>> = planes.iter().map(|p| p * p.transpose()).collect();
    let margin = |v: &DMatrix<f64>| -> f64 {
        let dim = v.ncols();
        if dim == 0 || dim == 4 {
            return 0.0;
        }
        let sum: usize = projectors.iter().map(|p| rank(&(p * v))).sum();
        0.5 * sum as f64 - dim as f64
    };
    let mut worst = f64::INFINITY;
    let mut tested = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for dim in 1..=3 {
        for _ in 0..samples {
            let cols: Vec<DVector<f64>> = (0..dim)
                .map(|_| DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal)))
                .collect();
            worst = worst.min(margin(&orth_basis(&cols)));
            tested += 1;
        }
    }
    let perps: Vec<DMatrix<f64>> = planes.iter().map(complement).collect();
    for i in 0..4 {
        worst = worst.min(margin(&perps[i]));
        worst = worst.min(margin(&planes[i]));
        tested += 2;
        for j in i + 1..4 {
            let cols: Vec<DVector<f64>> = perps[i]
                .column_iter()
                .chain(perps[j].column_iter())
                .map(|c| c.into_owned())
                .collect();
            worst = worst.min(margin(&orth_basis(&cols)));
            tested += 1;
        }
    }
    let fitted_c = if lambda > 0.0 {
        min_det / lambda.powi(4)
    } else {
        0.0
    };
    Ok(BrascampLiebVerdict {
        lambda,
        min_pair_det: min_det,
        fitted_c,
        transversal: !degenerate,
        condition_ii: !degenerate && worst >= 0.0,
        worst_margin: worst,
        subspaces_tested: tested,
        degenerate,
    })
}

/// The symmetric four-point configuration `s ∈ {−3λ/2, −λ/2, λ/2, 3λ/2}`.
pub fn symmetric_tuple(lambda: f64) -> [(f64, f64); 4] {
    [
        (1.0, -1.5 * lambda),
        (1.0, -0.5 * lambda),
        (1.0, 0.5 * lambda),
        (1.0, 1.5 * lambda),
    ]
}

/// `−∫_{s₁}^{s₂} det[g'(s₁) g'(s) g'(s₂)] ds`, which equals the plane
/// determinant `det[G(s₁) g'(s₁) G(s₂) g'(s₂)]` at `ρ = 1`.
pub fn det_integral(g: &Curve, s1: f64, s2: f64) -> f64 {
    let a = g.derivative(1, s1);
    let b = g.derivative(1, s2);
    -crate::quadrature::integrate_real(
        |s| {
            let m = DMatrix::from_columns(&[a.clone(), g.derivative(1, s), b.clone()]);
            m.determinant()
        },
        s1,
        s2,
        8,
    )
}
