//! Sampled fields on grids and the physical-space average `A_t f` and
//! maximal function `M_γ f`, computed on the Fourier side.

use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bump::BumpSpec;
use crate::curve::Curve;
use crate::error::{Error, Result};
use crate::oscillatory::{PreparedSymbol, SymbolPiece, TimeSeriesQuadrature};

/// Relative mass allowed near the boundary before wrap-around is reported.
pub const PERIODIZATION_TOL: f64 = 1e-6;
/// Absolute accuracy demanded of the lattice multiplier, relative to `∫χ`.
pub const LATTICE_GATE: f64 = 1e-10;
/// Allowed relative change of `‖M f‖` when the t-grid density doubles.
pub const T_REFINEMENT_TOL: f64 = 0.01;

/// Rectangular lattice `lower_a + i·h_a`, `0 ≤ i < N_a`, row-major.
///
/// FFT grids are cubic and periodic (`lower = −L`, `h = 2L/N`); anisotropic
/// grids appear where the natural cell is a plate-shaped box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub points: Vec<usize>,
    pub spacing: Vec<f64>,
    pub lower: Vec<f64>,
}

impl GridSpec {
    /// Periodic box `[−L, L)^dim` with `N` points per axis.
    pub fn cubic(dim: usize, n: usize, half_width: f64) -> Result<GridSpec> {
        if !(2..=4).contains(&dim) {
            return Err(Error::InvalidArgument(format!("grid dimension {dim} not in 2..=4")));
        }
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("N = {n} must be a power of two ≥ 16")));
        }
        if !(half_width > 0.0) {
            return Err(Error::InvalidArgument("box half-width must be positive".into()));
        }
        Ok(GridSpec {
            points: vec![n; dim],
            spacing: vec![2.0 * half_width / n as f64; dim],
            lower: vec![-half_width; dim],
        })
    }

    /// Box with the given points and spacings, centred so that index
    /// `N_a/2` sits at the origin.
    pub fn centred(points: Vec<usize>, spacing: Vec<f64>) -> Result<GridSpec> {
        if points.len() != spacing.len() || points.is_empty() || points.contains(&0) {
            return Err(Error::InvalidArgument("grid axes mismatch or empty".into()));
        }
        if spacing.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::InvalidArgument("grid spacing must be positive".into()));
        }
        let lower = points.iter().zip(&spacing).map(|(n, h)| -((n / 2) as f64) * h).collect();
        Ok(GridSpec { points, spacing, lower })
    }

    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    /// `(N, L)` when the grid is a cubic periodic box.
    pub fn cubic_params(&self) -> Option<(usize, f64)> {
        let n = self.points[0];
        let h = self.spacing[0];
        let l = 0.5 * n as f64 * h;
        let same = self.points.iter().all(|&m| m == n)
            && self.spacing.iter().all(|&g| g == h)
            && self.lower.iter().all(|&a| a == -l);
        same.then_some((n, l))
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.lower[axis] + i as f64 * self.spacing[axis]
    }

    /// Multi-index of a flat index.
    pub fn unravel(&self, mut flat: usize, out: &mut [usize]) {
        for a in (0..self.dim()).rev() {
            out[a] = flat % self.points[a];
            flat /= self.points[a];
        }
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 4];
        self.unravel(flat, &mut idx[..self.dim()]);
        for a in 0..self.dim() {
            out[a] = self.coord(a, idx[a]);
        }
    }

    /// Discrete Fourier frequency `2πk/(N h)` of index `i` (signed `k`).
    pub fn frequency(&self, axis: usize, i: usize) -> f64 {
        let n = self.points[axis];
        let k = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
        2.0 * std::f64::consts::PI * k / (n as f64 * self.spacing[axis])
    }

    pub fn frequency_of(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; 4];
        self.unravel(flat, &mut idx[..self.dim()]);
        for a in 0..self.dim() {
            out[a] = self.frequency(a, idx[a]);
        }
    }

    /// Largest lattice frequency norm.
    pub fn max_frequency(&self) -> f64 {
        self.spacing
            .iter()
            .map(|h| (std::f64::consts::PI / h).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Complex samples on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: GridSpec,
    pub values: Vec<Complex64>,
    pub tag: String,
}

impl SampledField {
    pub fn zeros(grid: GridSpec, tag: impl Into<String>) -> SampledField {
        let n = grid.len();
        SampledField { grid, values: vec![Complex64::new(0.0, 0.0); n], tag: tag.into() }
    }

    pub fn from_fn(grid: GridSpec, tag: impl Into<String>, f: impl Fn(&[f64]) -> f64) -> SampledField {
        let mut field = SampledField::zeros(grid, tag);
        let d = field.grid.dim();
        let mut x = [0.0; 4];
        for (i, v) in field.values.iter_mut().enumerate() {
            field.grid.point(i, &mut x[..d]);
            *v = Complex64::new(f(&x[..d]), 0.0);
        }
        field
    }

    pub fn constant(grid: GridSpec, value: f64) -> SampledField {
        SampledField::from_fn(grid, "constant", |_| value)
    }

    pub fn from_real(grid: GridSpec, tag: impl Into<String>, values: &[f64]) -> Result<SampledField> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument("value count does not match the grid".into()));
        }
        let values = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Ok(SampledField { grid, values, tag: tag.into() })
    }

    /// Riemann-sum `L^p` norm; `p = ∞` gives the max modulus.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        let mut acc = crate::quadrature::KahanSum::default();
        for v in &self.values {
            acc.add(v.norm().powf(p));
        }
        (self.grid.cell_volume() * acc.value()).powf(1.0 / p)
    }

    pub fn abs(&self) -> SampledField {
        let values = self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
        SampledField { grid: self.grid.clone(), values, tag: format!("|{}|", self.tag) }
    }

    fn check_same_grid(&self, other: &SampledField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::InvalidArgument("fields live on different grids".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &SampledField) -> Result<SampledField> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(SampledField { grid: self.grid.clone(), values, tag: format!("{}+{}", self.tag, other.tag) })
    }

    pub fn max_abs_diff(&self, other: &SampledField) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Writes the field in the HLXF layout.
    ///
    /// Header (16 bytes): `"HLXF"`, version `u8`, dimension `u8`, `N` as
    /// `u32` LE, then the six high-order bytes of `L` as an LE `f64` (the
    /// two low mantissa bytes are dropped). Body: `(re, im)` `f32` LE pairs.
    pub fn write_hlxf(&self, mut w: impl Write) -> Result<()> {
        let (n, l) = self
            .grid
            .cubic_params()
            .ok_or_else(|| Error::Format("only cubic periodic grids can be stored".into()))?;
        let mut header = [0u8; 16];
        header[..4].copy_from_slice(b"HLXF");
        header[4] = HLXF_VERSION;
        header[5] = self.grid.dim() as u8;
        header[6..10].copy_from_slice(&(n as u32).to_le_bytes());
        header[10..16].copy_from_slice(&l.to_le_bytes()[2..8]);
        w.write_all(&header)?;
        let mut body = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            body.extend_from_slice(&(v.re as f32).to_le_bytes());
            body.extend_from_slice(&(v.im as f32).to_le_bytes());
        }
        w.write_all(&body)?;
        Ok(())
    }

    pub fn read_hlxf(mut r: impl Read, tag: impl Into<String>) -> Result<SampledField> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|e| Error::Format(format!("short header: {e}")))?;
        if &header[..4] != b"HLXF" {
            return Err(Error::Format("bad magic".into()));
        }
        if header[4] != HLXF_VERSION {
            return Err(Error::Format(format!("unsupported version {}", header[4])));
        }
        let dim = header[5] as usize;
        let n = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
        let mut lb = [0u8; 8];
        lb[2..8].copy_from_slice(&header[10..16]);
        let l = f64::from_le_bytes(lb);
        let grid = GridSpec::cubic(dim, n, l).map_err(|e| Error::Format(e.to_string()))?;
        let mut body = Vec::new();
        r.read_to_end(&mut body)?;
        if body.len() != 8 * grid.len() {
            return Err(Error::Format(format!(
                "body holds {} bytes, expected {}",
                body.len(),
                8 * grid.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| {
                let re = f32::from_le_bytes(c[..4].try_into().unwrap());
                let im = f32::from_le_bytes(c[4..].try_into().unwrap());
                Complex64::new(re as f64, im as f64)
            })
            .collect();
        Ok(SampledField { grid, values, tag: tag.into() })
    }
}

const HLXF_VERSION: u8 = 1;

/// In-place multi-dimensional FFT over a row-major array; the inverse is
/// normalised by `1/len`.
pub fn fft_nd(data: &mut [Complex64], dims: &[usize], inverse: bool) {
    let total: usize = dims.iter().product();
    assert_eq!(data.len(), total, "fft_nd: data length does not match dims");
    let mut planner = FftPlanner::<f64>::new();
    let mut stride = 1;
    for a in (0..dims.len()).rev() {
        let n = dims[a];
        if n > 1 {
            let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            if stride == 1 {
                fft.process_with_scratch(data, &mut scratch);
            } else {
                let block = n * stride;
                let mut line = vec![Complex64::new(0.0, 0.0); n];
                for base in (0..total).step_by(block) {
                    for off in 0..stride {
                        for (j, v) in line.iter_mut().enumerate() {
                            *v = data[base + off + j * stride];
                        }
                        fft.process_with_scratch(&mut line, &mut scratch);
                        for (j, v) in line.iter().enumerate() {
                            data[base + off + j * stride] = *v;
                        }
                    }
                }
            }
        }
        stride *= n;
    }
    if inverse {
        let s = 1.0 / total as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }
}

fn sup_speed(curve: &Curve, a: f64, b: f64) -> f64 {
    let mut best: f64 = 0.0;
    for q in 0..=256 {
        let s = a + (b - a) * q as f64 / 256.0;
        best = best.max(curve.derivative(1, s).norm());
    }
    1.05 * best
}

fn sup_radius(curve: &Curve, a: f64, b: f64) -> f64 {
    (0..=256)
        .map(|q| curve.point(a + (b - a) * q as f64 / 256.0).norm())
        .fold(0.0, f64::max)
}

/// `∫ e^{−it⟨γ(s),ξ⟩} a(ξ;s) χ(s) ds` at every lattice frequency for
/// `t = t0 + j·dt`, `j < count`; indexed `[j][flat frequency]`.
///
/// This is the multiplier of `A_t` without the time cutoff ρ. One node set
/// serves every frequency; its accuracy is gated by doubling at the lattice
/// corner, where the phase oscillates fastest.
pub fn lattice_multipliers(
    curve: &Curve,
    grid: &GridSpec,
    symbol: Option<&SymbolPiece>,
    chi: &BumpSpec,
    t0: f64,
    dt: f64,
    count: usize,
) -> Result<Vec<Vec<Complex64>>> {
    if grid.dim() != curve.dim() {
        return Err(Error::InvalidArgument("grid and curve dimensions differ".into()));
    }
    if let Some(p) = symbol {
        p.validate()?;
    }
    let (da, db) = curve.domain();
    let (a, b) = (chi.support.0.max(da), chi.support.1.min(db));
    let t_max = t0.abs().max((t0 + dt * count.saturating_sub(1) as f64).abs());
    let slope = grid.max_frequency() * sup_speed(curve, a, b);
    let prepare = |xi: &[f64]| -> Result<PreparedSymbol> {
        match symbol {
            Some(p) => p.prepare(curve, xi),
            None => Ok(PreparedSymbol::constant(1.0)),
        }
    };
    // probe at the corner frequency (every axis at its Nyquist index)
    let d = grid.dim();
    let probe: Vec<f64> = (0..d).map(|ax| grid.frequency(ax, grid.points[ax] / 2)).collect();
    let probe_sym = prepare(&probe)?;
    let scale = chi.integral();
    let mut factor = 1;
    let quad = loop {
        let coarse = TimeSeriesQuadrature::new(curve, chi, a, b, slope, t_max, factor);
        let fine = TimeSeriesQuadrature::new(curve, chi, a, b, slope, t_max, 2 * factor);
        let x = coarse.series(&probe, &probe_sym, t0, dt, count);
        let y = fine.series(&probe, &probe_sym, t0, dt, count);
        let diff = x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max);
        if diff <= LATTICE_GATE * scale {
            break coarse;
        }
        if factor >= 8 {
            return Err(Error::QuadratureNotConverged { nodes: fine.node_count(), change: diff / scale });
        }
        factor *= 2;
    };
    let mut out = vec![vec![Complex64::new(0.0, 0.0); grid.len()]; count];
    let mut xi = [0.0; 4];
    for flat in 0..grid.len() {
        grid.frequency_of(flat, &mut xi[..d]);
        let sym = prepare(&xi[..d])?;
        if sym.is_zero() {
            continue;
        }
        let series = quad.series(&xi[..d], &sym, t0, dt, count);
        for (j, v) in series.into_iter().enumerate() {
            out[j][flat] = v;
        }
    }
    Ok(out)
}

/// Fails when more than [`PERIODIZATION_TOL`] of the mass of `f` lies within
/// `t·max|γ| + 1` of the boundary of the periodic box.
pub fn periodization_guard(curve: &Curve, f: &SampledField, t: f64, chi: &BumpSpec) -> Result<()> {
    let (da, db) = curve.domain();
    let reach = t.abs() * sup_radius(curve, chi.support.0.max(da), chi.support.1.min(db)) + 1.0;
    let g = &f.grid;
    let d = g.dim();
    let mut idx = [0usize; 4];
    let (mut total, mut near) = (0.0, 0.0);
    for (flat, v) in f.values.iter().enumerate() {
        g.unravel(flat, &mut idx[..d]);
        let m = v.norm();
        total += m;
        let close = (0..d).any(|a| {
            let x = g.coord(a, idx[a]);
            let lo = g.lower[a];
            let hi = g.lower[a] + g.points[a] as f64 * g.spacing[a];
            x - lo < reach || hi - x < reach
        });
        if close {
            near += m;
        }
    }
    if total > 0.0 && near > PERIODIZATION_TOL * total {
        return Err(Error::PeriodizationRisk { mass: near / total });
    }
    Ok(())
}

fn apply_multiplier(f_hat: &[Complex64], m: &[Complex64], grid: &GridSpec, tag: String) -> SampledField {
    let mut data: Vec<Complex64> = f_hat.iter().zip(m).map(|(a, b)| a * b).collect();
    fft_nd(&mut data, &grid.points, true);
    SampledField { grid: grid.clone(), values: data, tag }
}

fn forward(f: &SampledField) -> Vec<Complex64> {
    let mut data = f.values.clone();
    fft_nd(&mut data, &f.grid.points, false);
    data
}

fn check_fft_grid(curve: &Curve, f: &SampledField) -> Result<()> {
    if f.grid.cubic_params().is_none() {
        return Err(Error::InvalidArgument("averages need a cubic periodic grid".into()));
    }
    if f.grid.dim() != curve.dim() {
        return Err(Error::InvalidArgument("field and curve dimensions differ".into()));
    }
    Ok(())
}

/// `A_t f(x) = ∫ f(x − tγ(s)) a(D;s) χ(s) ds` via the lattice multiplier.
pub fn average(
    curve: &Curve,
    f: &SampledField,
    t: f64,
    symbol: Option<&SymbolPiece>,
    chi: &BumpSpec,
) -> Result<SampledField> {
    check_fft_grid(curve, f)?;
    periodization_guard(curve, f, t, chi)?;
    average_unguarded(curve, f, t, symbol, chi)
}

/// [`average`] without the periodization guard; the result is the periodic
/// convolution.
pub fn average_unguarded(
    curve: &Curve,
    f: &SampledField,
    t: f64,
    symbol: Option<&SymbolPiece>,
    chi: &BumpSpec,
) -> Result<SampledField> {
    check_fft_grid(curve, f)?;
    let m = lattice_multipliers(curve, &f.grid, symbol, chi, t, 0.0, 1)?;
    Ok(apply_multiplier(&forward(f), &m[0], &f.grid, format!("A_{t}{}", f.tag)))
}

/// Direct-space quadrature of `∫ f(x − tγ(s)) χ(s) ds` for a closed-form `f`.
pub fn average_direct(curve: &Curve, f: impl Fn(&[f64]) -> f64, x: &[f64], t: f64, chi: &BumpSpec) -> f64 {
    let (da, db) = curve.domain();
    let (a, b) = (chi.support.0.max(da), chi.support.1.min(db));
    let d = curve.dim();
    let mut p = [0.0; 4];
    let mut y = [0.0; 4];
    crate::quadrature::integrate_real(
        |s| {
            curve.eval_into(0, s, &mut p[..d]);
            for i in 0..d {
                y[i] = x[i] - t * p[i];
            }
            f(&y[..d]) * chi.eval(s)
        },
        a,
        b,
        64,
    )
}

/// Dyadically organised times: each octave `[2^o t_min, 2^{o+1} t_min)`
/// carries `per_octave` equally spaced points, and `t_max` is included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub per_octave: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, per_octave: usize) -> Result<TimeGrid> {
        if !(t_min > 0.0 && t_max >= t_min && per_octave >= 1) {
            return Err(Error::InvalidArgument("time grid needs 0 < t_min ≤ t_max and per_octave ≥ 1".into()));
        }
        Ok(TimeGrid { t_min, t_max, per_octave })
    }

    pub fn refined(&self) -> TimeGrid {
        TimeGrid { per_octave: 2 * self.per_octave, ..*self }
    }

    /// Arithmetic runs `(t0, dt, count)` making up the grid.
    pub fn runs(&self) -> Vec<(f64, f64, usize)> {
        let mut runs = Vec::new();
        let mut lo = self.t_min;
        while lo < self.t_max * (1.0 - 1e-12) {
            let hi = (2.0 * lo).min(self.t_max);
            let dt = lo / self.per_octave as f64;
            let count = (((hi - lo) / dt) - 1e-9).ceil().max(1.0) as usize;
            runs.push((lo, dt, count));
            lo = hi;
        }
        runs.push((self.t_max, 0.0, 1));
        runs
    }

    pub fn points(&self) -> Vec<f64> {
        self.runs()
            .into_iter()
            .flat_map(|(t0, dt, c)| (0..c).map(move |j| t0 + j as f64 * dt))
            .collect()
    }
}

/// Maximal function with the record of its t-refinement check.
#[derive(Debug, Clone)]
pub struct MaximalResult {
    pub field: SampledField,
    pub t_count: usize,
    /// Relative change of `‖M f‖₂` when the per-octave density doubles.
    pub gate_change: f64,
}

/// Pointwise `sup_{t ∈ ts} |A_t f|` for an explicit list of times.
pub fn maximal_over(curve: &Curve, f: &SampledField, ts: &[f64], chi: &BumpSpec) -> Result<SampledField> {
    let runs: Vec<(f64, f64, usize)> = ts.iter().map(|&t| (t, 0.0, 1)).collect();
    maximal_runs(curve, f, &runs, chi)
}

const T_CHUNK: usize = 16;

fn maximal_runs(curve: &Curve, f: &SampledField, runs: &[(f64, f64, usize)], chi: &BumpSpec) -> Result<SampledField> {
    check_fft_grid(curve, f)?;
    if runs.is_empty() {
        return Err(Error::EmptySample);
    }
    let t_far = runs
        .iter()
        .map(|(t0, dt, c)| (t0 + dt * (*c as f64 - 1.0)).abs().max(t0.abs()))
        .fold(0.0, f64::max);
    periodization_guard(curve, f, t_far, chi)?;
    let f_hat = forward(f);
    let mut out = vec![0.0f64; f.grid.len()];
    for &(t0, dt, count) in runs {
        let mut j0 = 0;
        while j0 < count {
            let c = T_CHUNK.min(count - j0);
            let ms = lattice_multipliers(curve, &f.grid, None, chi, t0 + j0 as f64 * dt, dt, c)?;
            for m in &ms {
                let a = apply_multiplier(&f_hat, m, &f.grid, String::new());
                for (o, v) in out.iter_mut().zip(&a.values) {
                    *o = o.max(v.norm());
                }
            }
            j0 += c;
        }
    }
    SampledField::from_real(f.grid.clone(), format!("M{}", f.tag), &out)
}

/// `M_γ f` over a dyadic [`TimeGrid`], gated by doubling the t density.
pub fn maximal_function(curve: &Curve, f: &SampledField, t_grid: &TimeGrid, chi: &BumpSpec) -> Result<MaximalResult> {
    let field = maximal_runs(curve, f, &t_grid.runs(), chi)?;
    let fine = maximal_runs(curve, f, &t_grid.refined().runs(), chi)?;
    let (a, b) = (field.lp_norm(2.0), fine.lp_norm(2.0));
    let gate_change = if b > 0.0 { (b - a).abs() / b } else { 0.0 };
    if gate_change > T_REFINEMENT_TOL {
        return Err(Error::RefinementNotConverged { what: "maximal function t-grid", change: gate_change });
    }
    Ok(MaximalResult { field, t_count: t_grid.points().len(), gate_change })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(sigma: f64) -> impl Fn(&[f64]) -> f64 {
        move |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / (2.0 * sigma * sigma)).exp()
    }

    fn chi() -> BumpSpec {
        BumpSpec::symmetric(0.5, 1.0)
    }

    #[test]
    fn fft_roundtrip_and_frequencies() {
        let g = GridSpec::cubic(2, 16, 3.0).unwrap();
        let f = SampledField::from_fn(g.clone(), "x", |x| (x[0] * 2.0).sin() + x[1]);
        let mut data = f.values.clone();
        fft_nd(&mut data, &g.points, false);
        fft_nd(&mut data, &g.points, true);
        let err = data.iter().zip(&f.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!((g.frequency(0, 1) - 2.0 * std::f64::consts::PI / 6.0).abs() < 1e-14);
        assert!(g.frequency(0, 15) < 0.0);
    }

    #[test]
    fn hlxf_roundtrip() {
        let g = GridSpec::cubic(3, 16, 6.0).unwrap();
        let f = SampledField::from_fn(g, "bump", gaussian(1.0));
        let mut buf = Vec::new();
        f.write_hlxf(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"HLXF");
        assert_eq!(buf.len(), 16 + 8 * 16usize.pow(3));
        let back = SampledField::read_hlxf(&buf[..], "bump").unwrap();
        assert_eq!(back.grid, f.grid);
        assert!(back.max_abs_diff(&f).unwrap() < 1e-7);
        buf[0] = b'X';
        assert!(SampledField::read_hlxf(&buf[..], "bad").is_err());
        let aniso = GridSpec::centred(vec![16, 8], vec![1.0, 0.5]).unwrap();
        assert!(SampledField::zeros(aniso, "a").write_hlxf(Vec::new()).is_err());
    }

    #[test]
    fn constant_field_averages_to_chi_mass() {
        let curve = Curve::moment(3);
        let g = GridSpec::cubic(3, 16, 6.0).unwrap();
        let one = SampledField::constant(g, 1.0);
        let a = average_unguarded(&curve, &one, 1.0, None, &chi()).unwrap();
        let mass = chi().integral();
        assert!(a.values.iter().all(|v| (v - Complex64::new(mass, 0.0)).norm() < 1e-12));
        // the guard rejects a field that fills the box
        assert!(matches!(average(&curve, &one, 1.0, None, &chi()), Err(Error::PeriodizationRisk { .. })));
    }

    #[test]
    fn fft_matches_direct_quadrature() {
        let curve = Curve::moment(3);
        let g = GridSpec::cubic(3, 64, 6.0).unwrap();
        let fg = gaussian(0.5);
        let f = SampledField::from_fn(g.clone(), "gauss", &fg);
        let a = average(&curve, &f, 1.0, None, &chi()).unwrap();
        // positivity on a resolved nonnegative field
        assert!(a.values.iter().all(|v| v.re >= -1e-12));
        let mut rng_state = 7u64;
        for _ in 0..20 {
            // lcg probe indices near the centre
            let mut idx = [0usize; 3];
            for v in idx.iter_mut() {
                rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                *v = 24 + ((rng_state >> 33) % 16) as usize;
            }
            let flat = (idx[0] * 64 + idx[1]) * 64 + idx[2];
            let mut x = [0.0; 3];
            g.point(flat, &mut x);
            let direct = average_direct(&curve, &fg, &x, 1.0, &chi());
            assert!((a.values[flat].re - direct).abs() < 1e-6, "{} vs {direct}", a.values[flat].re);
            assert!(a.values[flat].im.abs() < 1e-6);
        }
    }

    #[test]
    fn linearity_and_plancherel() {
        let curve = Curve::moment(3);
        let g = GridSpec::cubic(3, 32, 8.0).unwrap();
        let f = SampledField::from_fn(g.clone(), "f", gaussian(0.7));
        let h = SampledField::from_fn(g.clone(), "g", |x| gaussian(0.5)(&[x[0] - 0.5, x[1], x[2] + 0.3]));
        let af = average(&curve, &f, 1.5, None, &chi()).unwrap();
        let ah = average(&curve, &h, 1.5, None, &chi()).unwrap();
        let asum = average(&curve, &f.add(&h).unwrap(), 1.5, None, &chi()).unwrap();
        assert!(asum.max_abs_diff(&af.add(&ah).unwrap()).unwrap() < 1e-12);
        let m = lattice_multipliers(&curve, &g, None, &chi(), 1.5, 0.0, 1).unwrap();
        let sup = m[0].iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(af.lp_norm(2.0) <= sup * f.lp_norm(2.0) * (1.0 + 1e-12));
    }

    #[test]
    fn oracle_suite_fields_and_times() {
        let curve = Curve::moment(3);
        let g = GridSpec::cubic(3, 64, 6.0).unwrap();
        let fields: Vec<Box<dyn Fn(&[f64]) -> f64>> = vec![
            Box::new(gaussian(0.5)),
            Box::new(gaussian(0.6)),
            Box::new(|x: &[f64]| gaussian(0.5)(&[x[0] - 0.4, x[1] + 0.2, x[2]])),
            Box::new(|x: &[f64]| x[0] * gaussian(0.55)(x)),
            Box::new(|x: &[f64]| gaussian(0.5)(&[x[0], 1.3 * x[1], 0.8 * x[2]])),
        ];
        for fg in &fields {
            let f = SampledField::from_fn(g.clone(), "f", fg);
            for &t in &[0.75, 1.0, 1.5] {
                let a = average(&curve, &f, t, None, &chi()).unwrap();
                for flat in [(32 * 64 + 32) * 64 + 32, (30 * 64 + 34) * 64 + 31, (35 * 64 + 29) * 64 + 33] {
                    let mut x = [0.0; 3];
                    g.point(flat, &mut x);
                    let direct = average_direct(&curve, fg, &x, t, &chi());
                    assert!((a.values[flat].re - direct).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn maximal_function_basics() {
        let curve = Curve::moment(3);
        let g = GridSpec::cubic(3, 32, 8.0).unwrap();
        let f = SampledField::from_fn(g.clone(), "bump", gaussian(0.6));
        let a1 = average(&curve, &f, 1.0, None, &chi()).unwrap();
        let single = maximal_over(&curve, &f, &[1.0], &chi()).unwrap();
        assert!(single.max_abs_diff(&a1.abs()).unwrap() < 1e-12);
        let tg = TimeGrid::new(1.0, 2.0, 16).unwrap();
        let m = maximal_function(&curve, &f, &tg, &chi()).unwrap();
        assert!(m.gate_change < T_REFINEMENT_TOL);
        for (mv, av) in m.field.values.iter().zip(&a1.values) {
            assert!(mv.re >= av.norm() - 1e-12);
        }
        // enlarging the t set never lowers the sup
        let coarse = maximal_over(&curve, &f, &[1.0, 1.5], &chi()).unwrap();
        let finer = maximal_over(&curve, &f, &[1.0, 1.25, 1.5], &chi()).unwrap();
        for (c, d) in coarse.values.iter().zip(&finer.values) {
            assert!(d.re >= c.re);
        }
    }

    #[test]
    fn maximal_scaling_covariance() {
        // f(·/2) on the doubled box has the same samples as f on the box, and
        // M_{[1,2]}[f(·/2)](2x) = M_{[1/2,1]} f(x).
        let curve = Curve::moment(3);
        let g = GridSpec::cubic(3, 32, 8.0).unwrap();
        let g2 = GridSpec::cubic(3, 32, 16.0).unwrap();
        let f = SampledField::from_fn(g, "f", gaussian(0.6));
        let f2 = SampledField { grid: g2, values: f.values.clone(), tag: "f(./2)".into() };
        let lhs = maximal_over(&curve, &f2, &[1.0, 1.5, 2.0], &chi()).unwrap();
        let rhs = maximal_over(&curve, &f, &[0.5, 0.75, 1.0], &chi()).unwrap();
        let diff = lhs.values.iter().zip(&rhs.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn time_grid_runs() {
        let tg = TimeGrid::new(1.0, 4.0, 4).unwrap();
        let pts = tg.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], 1.0);
        assert_eq!(*pts.last().unwrap(), 4.0);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }
}
