//! Orchestration of experiments, artifact emission and run summaries.
//!
//! Every experiment writes into its own subdirectory of the output
//! directory: CSV tables, JSON fits or certificates, and a `summary.json`
//! holding the per-check verdicts. Artifacts depend only on the config and
//! the seed; only the summary carries wall-clock timestamps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::broad_narrow::{broad_narrow_decompose, ham_lee_pointwise, DyadicDecomposition, HamLeeCase};
use crate::config::{Experiment, ExperimentConfig};
use crate::curve::{check_nondegeneracy, frenet_frame, lift_curve, model_class_check, rescale_curve, Curve, Family};
use crate::fit::FitResult;
use crate::frequency::{brascamp_lieb_check, symmetric_tuple};
use crate::knapp::{knapp_experiment, KnappSetup};
use crate::nikodym::{frame_survey, scaling_lemma_check, singular_survey, NikodymScale};
use crate::oscillatory::{dyadic_range, fit_decay, MultiplierSetup};
use crate::roots::{comparability_survey, compute_roots, FrequencyPoint, RootData};
use crate::support::{lifted_support_check, support_survey, SupportPart};
use crate::testbench::{
    forward_sf_survey, local_smoothing_slopes, reverse_boxes, reverse_sf_survey, BoxRandomField, ForwardSfSetup,
    LocalSmoothingSetup, RatioSurvey, ReverseAccumulator, ReverseSfSetup,
};
use crate::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const ACCEPTANCE_FILE: &str = "acceptance.json";
pub const BUNDLE_DIR: &str = "bundle";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    pub detail: String,
    /// The statement of the underlying analysis that this check probes.
    pub reference: String,
}

impl Check {
    fn new(name: &str, pass: bool, reference: &str, detail: String) -> Check {
        let verdict = if pass { Verdict::Pass } else { Verdict::Fail };
        Check { name: name.into(), verdict, detail, reference: reference.into() }
    }

    fn skipped(name: &str, reference: &str, detail: impl Into<String>) -> Check {
        Check { name: name.into(), verdict: Verdict::Skipped, detail: detail.into(), reference: reference.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub experiment: String,
    pub seed: u64,
    pub started_ms: u64,
    pub finished_ms: u64,
    pub checks: Vec<Check>,
    /// Artifact paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl RunSummary {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.verdict != Verdict::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.verdict == Verdict::Fail)
    }
}

fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Shortest round-trip decimal; exponent form only at extreme magnitudes.
fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Writes artifacts of one experiment and records their paths.
struct Artifacts {
    root: PathBuf,
    sub: String,
    files: Vec<String>,
}

impl Artifacts {
    fn new(root: &Path, sub: &str) -> Result<Artifacts> {
        fs::create_dir_all(root.join(sub))?;
        Ok(Artifacts { root: root.to_path_buf(), sub: sub.into(), files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let rel = format!("{}/{name}", self.sub);
        let p = self.root.join(&rel);
        self.files.push(rel);
        p
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

/// Fit record in the layout the plotting side reads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRecord {
    pub id: String,
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub n_points: usize,
}

impl FitRecord {
    fn new(id: impl Into<String>, fit: &FitResult) -> FitRecord {
        FitRecord { id: id.into(), slope: fit.slope, intercept: fit.intercept, residual: fit.residual, n_points: fit.n_points }
    }
}

/// Runs every experiment the config selects, sequentially or on a small
/// worker pool, and writes one summary per experiment.
pub fn run(config: &ExperimentConfig, parallel: bool, threads: usize) -> Result<Vec<RunSummary>> {
    let diagnostics = config.diagnostics();
    if !diagnostics.is_empty() {
        return Err(Error::ConfigInvalid(diagnostics));
    }
    let curve = config.curve()?;
    let list = config.experiment.expand();
    fs::create_dir_all(&config.output)?;
    let workers = if parallel { threads.clamp(1, list.len()) } else { 1 };
    let slots: Vec<Mutex<Option<Result<RunSummary>>>> = list.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= list.len() {
                    break;
                }
                let out = run_one(config, &curve, list[i]);
                *slots[i].lock().unwrap() = Some(out);
            });
        }
    });
    slots.into_iter().map(|s| s.into_inner().unwrap().expect("every slot is filled")).collect()
}

/// Runs a single experiment and writes its summary.
pub fn run_one(config: &ExperimentConfig, curve: &Curve, experiment: Experiment) -> Result<RunSummary> {
    let started_ms = now_ms();
    let seed = experiment.seed(config.seed);
    let mut art = Artifacts::new(&config.output, experiment.id())?;
    let outcome = match experiment {
        Experiment::Frenet => frenet(config, curve, &mut art),
        Experiment::Roots => roots(config, curve, seed, &mut art),
        Experiment::Decay => decay(config, curve, &mut art),
        Experiment::Knapp => knapp(config, &mut art),
        Experiment::SqfnReverse => sqfn_reverse(config, curve, seed, &mut art),
        Experiment::SqfnForward => sqfn_forward(config, curve, seed, &mut art),
        Experiment::Nikodym => nikodym(config, curve, seed, &mut art),
        Experiment::LocalSmoothing => local_smoothing(config, curve, seed, &mut art),
        Experiment::BroadNarrow => broad_narrow(config, seed, &mut art),
        Experiment::BrascampLieb => brascamp_lieb(config, curve, seed, &mut art),
        Experiment::All => unreachable!("expanded before dispatch"),
    };
    // a numerical failure fails the experiment, not the whole run
    let checks = match outcome {
        Ok(c) => c,
        Err(e @ (Error::Io(_) | Error::Csv(_) | Error::Json(_))) => return Err(e),
        Err(e) => vec![Check::new("execution", false, "the experiment runs to completion", e.to_string())],
    };
    let summary = RunSummary {
        experiment: experiment.id().into(),
        seed,
        started_ms,
        finished_ms: now_ms(),
        checks,
        artifacts: art.files.clone(),
    };
    art.json(SUMMARY_FILE, &summary)?;
    Ok(summary)
}

fn frenet(config: &ExperimentConfig, curve: &Curve, art: &mut Artifacts) -> Result<Vec<Check>> {
    let f = &config.frenet;
    let (a, b) = curve.domain();
    let grid: Vec<f64> = (0..f.samples).map(|q| a + (b - a) * q as f64 / (f.samples - 1) as f64).collect();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &s in &grid {
        let frame = frenet_frame(curve, s)?;
        let n = frame.basis.len();
        let mut err = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { 1.0 } else { 0.0 };
                err = err.max((frame.basis[i].dot(&frame.basis[j]) - want).abs());
            }
        }
        worst = worst.max(err);
        let mut row = vec![num(s), num(err), num(curve.det(s))];
        row.extend(frame.curvatures.iter().map(|k| num(*k)));
        rows.push(row);
    }
    let n = curve.dim();
    let mut header = vec!["s".to_string(), "orthonormality_error".into(), "det".into()];
    header.extend((1..n).map(|j| format!("kappa{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    art.csv("frenet.csv", &header, rows)?;

    let nondeg = check_nondegeneracy(curve, &grid, f.c0);
    let (sigma, lambda) = (f.rescale[0], f.rescale[1]);
    let (rescaled, _) = rescale_curve(curve, sigma, lambda)?;
    let model = model_class_check(&rescaled, 0.5)?;
    let is_moment = matches!(config.curve, Family::Moment { .. });
    let rescale_check = if is_moment {
        Check::new(
            "rescaling fixed point",
            model.normalised_at_zero && model.deviation <= f.tolerance,
            "the moment curve is invariant under its own rescaling",
            format!("deviation from the moment curve {:.2e} at (σ, λ) = ({sigma}, {lambda})", model.deviation),
        )
    } else {
        Check::new(
            "rescaling normalisation",
            model.normalised_at_zero,
            "rescaled curves are normalised at the origin",
            format!("deviation from the moment curve {:.2e} (member of the δ = 1/2 class: {})", model.deviation, model.member),
        )
    };
    art.json("frenet.json", &serde_json::json!({ "nondegeneracy": nondeg, "rescaling": model, "sigma": sigma, "lambda": lambda }))?;
    Ok(vec![
        Check::new(
            "orthonormality",
            worst <= f.tolerance,
            "the Frenet frame is an orthonormal basis",
            format!("max |⟨e_i, e_j⟩ − δ_ij| = {worst:.2e} over {} points", grid.len()),
        ),
        Check::new(
            "nondegeneracy",
            nondeg.pass,
            "nonvanishing torsion of the curve",
            format!("min |det| = {:.4e} (threshold {})", nondeg.min_abs_det, f.c0),
        ),
        rescale_check,
    ])
}

fn read_samples(path: &Path) -> Result<Vec<[f64; 3]>> {
    #[derive(Deserialize)]
    struct Row {
        xi1: f64,
        xi2: f64,
        xi3: f64,
    }
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: Row = row?;
        out.push([row.xi1, row.xi2, row.xi3]);
    }
    if out.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(out)
}

/// Rejection sample of the admissible cone `ξ₃ ≥ 0.9|ξ|`, `|ξ₁|, |ξ₂| ≤ 8δ₀|ξ|`.
pub fn admissible_sample(count: usize, delta0: f64, seed: u64) -> Result<Vec<[f64; 3]>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x3: f64 = rng.random_range(0.5..2.0);
        let b = 8.0 * delta0 * x3;
        let xi = [rng.random_range(-b..b), rng.random_range(-b..b), x3];
        if FrequencyPoint::new(xi.to_vec())?.is_admissible(delta0) {
            out.push(xi);
        }
    }
    Ok(out)
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn roots(config: &ExperimentConfig, curve: &Curve, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let rc = &config.roots;
    let sample = match &rc.samples_csv {
        Some(p) => read_samples(p)?,
        None => admissible_sample(rc.samples, rc.delta0, seed)?,
    };
    let closed_form = matches!(config.curve, Family::Moment { n: 3 });
    let mut rows = Vec::with_capacity(sample.len());
    let (mut worst, mut mismatches, mut solved) = (0.0f64, 0usize, Vec::new());
    for xi in &sample {
        let point = FrequencyPoint::new(xi.to_vec())?;
        let r: RootData = compute_roots(curve, &point)?;
        // residual oracle: ⟨γ''(θ₂),ξ⟩ = 0 and ⟨γ'(θ₁±),ξ⟩ = 0, scaled by |ξ|
        let pair = |order: usize, s: f64| curve.derivative(order, s).iter().zip(xi).map(|(a, b)| a * b).sum::<f64>() / point.norm;
        let mut err = pair(2, r.theta2).abs();
        for t in [r.theta1_minus, r.theta1_plus].into_iter().flatten() {
            err = err.max(pair(1, t).abs());
        }
        let mut want = if r.u < 0.0 { 2 } else { 0 };
        if closed_form {
            let theta2 = -xi[1] / xi[2];
            let u = xi[0] - xi[1] * xi[1] / (2.0 * xi[2]);
            err = err.max((r.theta2 - theta2).abs()).max((r.u - u).abs());
            if u < 0.0 {
                let d = (-2.0 * u / xi[2]).sqrt();
                if let (Some(m), Some(p)) = (r.theta1_minus, r.theta1_plus) {
                    err = err.max((m - (theta2 - d)).abs()).max((p - (theta2 + d)).abs());
                }
            }
            want = if u < 0.0 { 2 } else { 0 };
            if u.abs() < 1e-10 && r.root_count() == 1 {
                want = 1;
            }
        }
        if r.root_count() != want {
            mismatches += 1;
        }
        worst = worst.max(err);
        rows.push(vec![
            num(xi[0]),
            num(xi[1]),
            num(xi[2]),
            num(r.theta2),
            num(r.u),
            opt(r.theta1_minus),
            opt(r.theta1_plus),
            r.root_count().to_string(),
        ]);
        if r.u < 0.0 && solved.len() < rc.comparability_samples {
            solved.push(point);
        }
    }
    art.csv("roots.csv", &["xi1", "xi2", "xi3", "theta2", "u", "theta1_minus", "theta1_plus", "root_count"], rows)?;
    let mut checks = vec![Check::new(
        "root oracle",
        worst <= rc.tolerance && mismatches == 0,
        "the critical points of the phase and the sign-of-u trichotomy",
        format!(
            "{} frequencies, max error {worst:.2e} (tolerance {:e}{}), root-count mismatches {mismatches}",
            sample.len(),
            rc.tolerance,
            if closed_form { ", closed forms" } else { ", residuals" }
        ),
    )];

    if solved.len() < rc.comparability_samples && rc.samples_csv.is_none() {
        // top up with u < 0 frequencies
        for round in 0..64u64 {
            if solved.len() >= rc.comparability_samples {
                break;
            }
            for xi in admissible_sample(rc.comparability_samples, rc.delta0, seed ^ (0x5555 + round))? {
                let p = FrequencyPoint::new(xi.to_vec())?;
                if solved.len() < rc.comparability_samples && compute_roots(curve, &p)?.u < 0.0 {
                    solved.push(p);
                }
            }
        }
    }
    if solved.is_empty() {
        checks.push(Check::skipped("root comparability", "comparability of the root gaps with |u|^{1/2}", "no frequency with u < 0"));
    } else {
        let fam = comparability_survey(curve, &solved, rc.comparability_budget)?;
        art.csv(
            "comparability.csv",
            &["pairing", "min_ratio", "max_ratio", "n_samples"],
            fam.iter().map(|f| vec![f.pairing.to_string(), num(f.min_ratio), num(f.max_ratio), f.n_samples.to_string()]),
        )?;
        let spreads: Vec<String> = fam.iter().map(|f| format!("{} {:.3}", f.pairing, f.max_ratio / f.min_ratio)).collect();
        checks.push(Check::new(
            "root comparability",
            fam.iter().all(|f| f.pass),
            "comparability of the root gaps with |u|^{1/2}",
            format!("max/min per pairing (budget {}): {}", rc.comparability_budget, spreads.join(", ")),
        ));
    }

    let sc = &config.support;
    let mut rows = Vec::new();
    let mut ok = true;
    let mut detail = Vec::new();
    for (part, pairs) in [(SupportPart::A, &sc.pairs_a), (SupportPart::B, &sc.pairs_b)] {
        for &[k, ell] in pairs.iter() {
            let r = support_survey(curve, k, ell, sc.eps, part, sc.samples, sc.c_budget, seed.wrapping_add((k * 100 + ell) as u64))?;
            ok &= r.pass() && r.fitted_c <= sc.c_budget;
            detail.push(format!("{part:?}({k},{ell}) C = {:.3}, {} violations", r.fitted_c, r.violations));
            rows.push(vec![
                format!("{part:?}"),
                k.to_string(),
                ell.to_string(),
                r.accepted.to_string(),
                r.proposals.to_string(),
                num(r.fitted_c),
                r.violations.to_string(),
            ]);
        }
    }
    art.csv("support.csv", &["part", "k", "ell", "accepted", "proposals", "fitted_c", "violations"], rows)?;
    checks.push(Check::new(
        "support containment",
        ok,
        "Frenet-box support of the frequency-localised pieces",
        format!("{} (budget C ≤ {})", detail.join("; "), sc.c_budget),
    ));
    let [k, ell] = sc.lifted;
    let lifted = lifted_support_check(curve, k, ell, 0, sc.lifted_eps, rc.delta0, sc.lifted_frequencies, sc.c_budget, seed ^ 0x1f)?;
    art.json("lifted_support.json", &lifted)?;
    checks.push(Check::new(
        "lifted support tail",
        lifted.tail_fraction < sc.max_tail,
        "space-time Fourier support of the lifted pieces",
        format!("tail fraction {:.3e} (< {:e}) at (k, ℓ) = ({k}, {ell})", lifted.tail_fraction, sc.max_tail),
    ));
    Ok(checks)
}

fn decay(config: &ExperimentConfig, curve: &Curve, art: &mut Artifacts) -> Result<Vec<Check>> {
    let dc = &config.decay;
    let rs = dyadic_range(dc.log2_r[0], dc.log2_r[1]);
    let setup = MultiplierSetup::wide();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let mut checks = Vec::new();
    for (id, (dir, window)) in dc.directions.iter().zip(&dc.slope_windows).enumerate() {
        let res = fit_decay(curve, dir, dc.t, &rs, None, &setup)?;
        for p in &res.points {
            rows.push(vec![id.to_string(), num(p.r), num(p.abs_m), p.node_count.to_string()]);
        }
        let slope = res.fit.slope;
        checks.push(Check::new(
            &format!("decay direction {id}"),
            window[0] <= slope && slope <= window[1],
            "decay rate of the averaging multiplier along a direction",
            format!("direction {dir:?}: slope {slope:.4} in [{}, {}]", window[0], window[1]),
        ));
        fits.push(FitRecord::new(id.to_string(), &res.fit));
    }
    art.csv("decay.csv", &["direction_id", "R", "abs_m", "node_count"], rows)?;
    art.json("decay_fit.json", &fits)?;
    Ok(checks)
}

fn knapp(config: &ExperimentConfig, art: &mut Artifacts) -> Result<Vec<Check>> {
    let kc = &config.knapp;
    let setup = KnappSetup::cubic((kc.a[0], kc.a[1]))?;
    let rs: Vec<f64> = (kc.log2_inv_r[0]..=kc.log2_inv_r[1]).map(|j| 2f64.powi(-j)).collect();
    let rep = knapp_experiment(&setup, &rs)?;
    art.csv(
        "knapp.csv",
        &["r", "norm_f", "norm_Mf", "ratio", "ratio_pow_n", "log_inv_r"],
        rep.rows.iter().map(|r| {
            vec![num(r.r), num(r.norm_f), num(r.norm_mf), num(r.ratio), num(r.ratio.powi(rep.n as i32)), num((1.0 / r.r).ln())]
        }),
    )?;
    art.json("knapp_fit.json", &serde_json::json!({
        "fit": FitRecord::new("ratio_pow_n_vs_log_inv_r", &rep.fit),
        "growth": rep.growth,
        "witness_spread": rep.witness_spread,
        "a": rep.a,
        "n": rep.n,
    }))?;
    let ok = rep.fit.slope > 0.0 && rep.fit.relative_residual < kc.max_relative_residual && rep.growth >= kc.min_growth;
    Ok(vec![Check::new(
        "knapp growth",
        ok,
        "unboundedness of the maximal operator at the critical exponent",
        format!(
            "ratio^n against log(1/r): slope {:.4}, relative residual {:.3} (< {}), growth {:.3} (≥ {})",
            rep.fit.slope, rep.fit.relative_residual, kc.max_relative_residual, rep.growth, kc.min_growth
        ),
    )])
}

fn survey_artifacts(art: &mut Artifacts, stem: &str, survey: &RatioSurvey) -> Result<()> {
    art.csv(
        &format!("{stem}.csv"),
        &["scale", "trial", "ratio"],
        survey.rows().into_iter().map(|(s, t, r)| vec![num(s), t.to_string(), num(r)]),
    )?;
    art.json(&format!("{stem}_fit.json"), &FitRecord::new(format!("{stem}_max_ratio_vs_inv_r"), &survey.fit))
}

fn sqfn_reverse(config: &ExperimentConfig, curve: &Curve, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let rc = &config.sqfn_reverse;
    let setup = ReverseSfSetup { n: rc.grid, dilation: rc.dilation, slack: rc.slack };
    let lifted = lift_curve(curve)?.0;
    let survey = reverse_sf_survey(&lifted, &rc.r, rc.trials, seed, &setup)?;
    survey_artifacts(art, "reverse", &survey)?;
    let mut checks = vec![Check::new(
        "reverse square function exponent",
        survey.fit.slope <= rc.max_exponent,
        "reverse square function estimate for the lifted curve",
        format!("growth exponent {:.4} (≤ {}) over r = {:?}", survey.fit.slope, rc.max_exponent, rc.r),
    )];
    let coarse = rc.r.iter().copied().fold(0.0, f64::max);
    let boxes = reverse_boxes(&lifted, coarse, &setup)?;
    if boxes.len() >= 2 {
        let mut acc = ReverseAccumulator::new(setup.n)?;
        let (i, j) = (boxes.len() / 2 - 1, boxes.len() / 2);
        let single = acc.ratio(&[BoxRandomField::generate(&boxes[j], j, seed)]);
        let pair = acc.ratio(&[BoxRandomField::generate(&boxes[i], i, seed), BoxRandomField::generate(&boxes[j], j, seed)]);
        checks.push(Check::new(
            "reverse square function sanity",
            (single - 1.0).abs() < 1e-12 && pair <= 2f64.sqrt() + 1e-12,
            "exact small cases of the reverse square function ratio",
            format!("single box {single:.12}, two boxes {pair:.4} (≤ √2)"),
        ));
    }
    Ok(checks)
}

fn sqfn_forward(config: &ExperimentConfig, curve: &Curve, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let fc = &config.sqfn_forward;
    let setup = ForwardSfSetup { n: fc.grid, eps: fc.eps, stages: fc.stages, exponent: fc.weight_exponent };
    let res = forward_sf_survey(curve, &fc.r, fc.trials, seed, &setup)?;
    survey_artifacts(art, "forward", &res.survey)?;
    let mut rows = Vec::new();
    for (scale, stages) in fc.r.iter().zip(&res.stages) {
        for st in stages {
            rows.push(vec![
                num(*scale),
                st.index.to_string(),
                st.label.clone(),
                num(st.r[0]),
                num(st.r[1]),
                num(st.r[2]),
                st.s_count.to_string(),
                num(st.mean),
                num(st.max),
            ]);
        }
    }
    art.csv("forward_stages.csv", &["scale", "index", "label", "r1", "r2", "r3", "s_count", "mean", "max"], rows)?;
    Ok(vec![Check::new(
        "forward square function exponent",
        res.survey.fit.slope <= fc.max_exponent,
        "forward square function estimate through the iterated Nikodym operator",
        format!("growth exponent {:.4} (≤ {}), {} stages", res.survey.fit.slope, fc.max_exponent, setup.iterations()),
    )])
}

fn nikodym_rows(scales: &[NikodymScale]) -> Vec<Vec<String>> {
    scales
        .iter()
        .map(|s| vec![num(s.scale), num(s.max_ratio), num(s.mean_ratio), s.trials.to_string(), s.s_count.to_string()])
        .collect()
}

fn nikodym(config: &ExperimentConfig, curve: &Curve, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let nc = &config.nikodym;
    let header = ["scale", "max_ratio", "mean_ratio", "trials", "s_count"];
    let r3: Vec<f64> = (nc.log2_inv_r3[0]..=nc.log2_inv_r3[1]).map(|j| 2f64.powi(-j)).collect();
    let sing = singular_survey(curve, &r3, nc.trials, nc.support, nc.s_range, seed)?;
    art.csv("nikodym_singular.csv", &header, nikodym_rows(&sing.scales))?;
    art.json("nikodym_singular_fit.json", &[FitRecord::new("loglog", &sing.loglog_fit), FitRecord::new("cubic_log", &sing.cubic_log_fit)])?;
    let eccs: Vec<f64> = (nc.log2_ecc[0]..=nc.log2_ecc[1]).map(|j| 2f64.powi(j)).collect();
    let frame = frame_survey(curve, &eccs, nc.frame_trials, nc.frame_s_range, seed ^ 0x2)?;
    art.csv("nikodym_frame.csv", &header, nikodym_rows(&frame.scales))?;
    art.json("nikodym_frame_fit.json", &FitRecord::new("frame", &frame.fit))?;
    let lam = nc.scaling_lambda;
    let sc = scaling_lemma_check(curve, nc.scaling_sigma, lam, [lam * lam * 0.25, lam * 0.5, 1.0], nc.scaling_probes, nc.scaling_exponent, seed ^ 0x3)?;
    art.json("nikodym_scaling.json", &sc)?;
    Ok(vec![
        Check::new(
            "singular Nikodym polylog",
            sing.loglog_fit.slope <= nc.max_degree,
            "polylogarithmic bound for the singular Nikodym maximal function",
            format!("fitted polylog degree {:.3} (≤ {})", sing.loglog_fit.slope, nc.max_degree),
        ),
        Check::new(
            "frame Nikodym eccentricity",
            frame.fit.slope < nc.max_frame_exponent,
            "eccentricity-uniform bound for the Frenet-plate Nikodym maximal function",
            format!("eccentricity exponent {:.3} (< {})", frame.fit.slope, nc.max_frame_exponent),
        ),
        Check::new(
            "plate scaling",
            sc.pass,
            "rescaled plates contain comparable Frenet plates",
            format!("c0 {:.3}, log10 C {:.1}", sc.c0, sc.log10_fitted_c),
        ),
    ])
}

fn local_smoothing(config: &ExperimentConfig, curve: &Curve, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let lc = &config.local_smoothing;
    let setup = LocalSmoothingSetup { delta0: lc.delta0, ..LocalSmoothingSetup::default() };
    let reps = local_smoothing_slopes(curve, &lc.k, &lc.p, lc.trials, seed, &setup)?;
    let mut rows = Vec::new();
    for rep in &reps {
        for rec in &rep.records {
            for (t, r) in rec.ratios.iter().enumerate() {
                rows.push(vec![num(rec.p), rec.k.to_string(), rec.ell.to_string(), t.to_string(), num(*r), num(rec.predicted_exponent)]);
            }
        }
    }
    art.csv("local_smoothing.csv", &["p", "k", "ell", "trial", "ratio", "predicted_log2"], rows)?;
    let fits: Vec<_> = reps
        .iter()
        .map(|r| {
            serde_json::json!({
                "fit": FitRecord::new(format!("p{}", r.p), &r.measured),
                "predicted_slope": r.predicted_slope,
                "alternative_slope": r.alternative_slope,
                "tolerance": r.tolerance,
            })
        })
        .collect();
    art.json("local_smoothing_fit.json", &fits)?;
    Ok(reps
        .iter()
        .map(|r| {
            Check::new(
                &format!("local smoothing p = {}", r.p),
                r.pass,
                "local smoothing decay of the frequency-localised pieces",
                format!("slope {:.4} against predicted {:.4} (± {})", r.measured.slope, r.predicted_slope, r.tolerance),
            )
        })
        .collect())
}

fn broad_narrow(config: &ExperimentConfig, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let bc = &config.broad_narrow;
    let mut certs = Vec::with_capacity(bc.instances);
    let mut telescoping = true;
    for i in 0..bc.instances {
        let d = DyadicDecomposition::random(bc.points, bc.depth, seed.wrapping_add(i as u64))?;
        telescoping &= d.telescoping_holds();
        certs.push(broad_narrow_decompose(&d, bc.k, bc.eps, bc.p)?);
    }
    art.json("certificates.json", &certs)?;
    let passing = certs.iter().filter(|c| c.pass && c.lhs <= c.iterated_rhs && c.rn_over_r <= c.rn_bound).count();
    let eps_eff = certs.iter().map(|c| c.scales.eps_effective).fold(0.0, f64::max);

    let toy = |vals: [f64; 4]| {
        let leaves = vals.iter().map(|v| vec![num_complex::Complex64::new(*v, 0.0)]).collect();
        DyadicDecomposition::from_leaves(vec![1.0], 2, leaves)
    };
    let narrow = ham_lee_pointwise(&toy([5.0, 0.0, 1.0, 0.0])?, 2, 0, 0, 0)?;
    let broad = ham_lee_pointwise(&toy([4.0, 0.0, 0.0, 4.0])?, 2, 0, 0, 0)?;
    art.json("toy.json", &[&narrow, &broad])?;
    let toy_ok = narrow.case == HamLeeCase::NarrowSpread && narrow.pass && broad.case == HamLeeCase::Broad && broad.pass;
    Ok(vec![
        Check::new(
            "broad/narrow certificates",
            passing == certs.len() && telescoping,
            "broad/narrow decomposition of the iterated Ham–Lee scheme",
            format!(
                "{passing}/{} certificates pass at k = {}, nominal ε = {}, effective ε ≤ {eps_eff:.2}; telescoping exact: {telescoping}",
                certs.len(),
                bc.k,
                bc.eps
            ),
        ),
        Check::new(
            "pointwise dichotomy",
            toy_ok,
            "pointwise narrow-or-broad dichotomy",
            format!("k = 2 toy: narrow branch {:?}, broad branch {:?}", narrow.case, broad.case),
        ),
    ])
}

fn brascamp_lieb(config: &ExperimentConfig, curve: &Curve, seed: u64, art: &mut Artifacts) -> Result<Vec<Check>> {
    let bc = &config.brascamp_lieb;
    let mut verdicts = Vec::new();
    for (i, &lam) in bc.lambdas.iter().enumerate() {
        verdicts.push(brascamp_lieb_check(curve, &symmetric_tuple(lam), lam, bc.samples, seed.wrapping_add(i as u64))?);
    }
    let degenerate = brascamp_lieb_check(curve, &[(1.0, 0.1), (1.0, 0.1), (1.0, 0.3), (1.0, 0.5)], 0.0, 100, seed)?;
    art.csv(
        "brascamp_lieb.csv",
        &["lambda", "min_pair_det", "fitted_c", "transversal", "condition_ii", "worst_margin"],
        verdicts.iter().map(|v| {
            vec![num(v.lambda), num(v.min_pair_det), num(v.fitted_c), v.transversal.to_string(), v.condition_ii.to_string(), num(v.worst_margin)]
        }),
    )?;
    art.json("brascamp_lieb.json", &serde_json::json!({ "separated": verdicts, "coincident": degenerate }))?;
    let all = verdicts.iter().all(|v| v.transversal && v.condition_ii);
    let (lo, hi) = verdicts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(v.fitted_c), b.max(v.fitted_c)));
    Ok(vec![
        Check::new(
            "transversality",
            all && hi / lo <= bc.max_spread,
            "Brascamp–Lieb finiteness for separated parameter tuples",
            format!("{} tuples transversal with condition ii); constant spread {:.3} (≤ {})", verdicts.len(), hi / lo, bc.max_spread),
        ),
        Check::new(
            "degenerate rejection",
            degenerate.degenerate && !degenerate.transversal,
            "coincident parameters break transversality",
            format!("coincident tuple: degenerate {}, transversal {}", degenerate.degenerate, degenerate.transversal),
        ),
    ])
}

/// The consolidated acceptance record written by [`report`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Consolidated {
    pub verdict: Verdict,
    pub experiments: Vec<RunSummary>,
    pub superseded: Vec<Superseded>,
    /// CSV files of the plot bundle, relative to the bundle directory.
    pub bundle: Vec<BundleEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Superseded {
    pub experiment: String,
    pub finished_ms: u64,
    pub path: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BundleEntry {
    pub experiment: String,
    pub file: String,
}

fn find_summaries(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<Vec<_>>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            if p.file_name().is_some_and(|n| n != BUNDLE_DIR) {
                find_summaries(&p, out)?;
            }
        } else if p.file_name().is_some_and(|n| n == SUMMARY_FILE) {
            out.push(p);
        }
    }
    Ok(())
}

/// Merges every summary below `dir` into `acceptance.json` and copies the
/// CSV and fit artifacts into `bundle/`. For a repeated experiment id the
/// later finish time wins and the earlier one is listed as superseded.
pub fn report(dir: &Path) -> Result<Consolidated> {
    if !dir.is_dir() {
        return Err(Error::NoSummaries(dir.display().to_string()));
    }
    let mut paths = Vec::new();
    find_summaries(dir, &mut paths)?;
    if paths.is_empty() {
        return Err(Error::NoSummaries(dir.display().to_string()));
    }
    let mut latest: BTreeMap<String, (RunSummary, PathBuf)> = BTreeMap::new();
    let mut superseded = Vec::new();
    for p in paths {
        let s: RunSummary = serde_json::from_str(&fs::read_to_string(&p)?)?;
        let rel = p.strip_prefix(dir).unwrap_or(&p).display().to_string();
        match latest.get(&s.experiment) {
            Some((old, old_path)) if old.finished_ms > s.finished_ms => {
                superseded.push(Superseded { experiment: s.experiment.clone(), finished_ms: s.finished_ms, path: rel });
                let _ = old_path;
            }
            Some((old, old_path)) => {
                let old_rel = old_path.strip_prefix(dir).unwrap_or(old_path).display().to_string();
                superseded.push(Superseded { experiment: old.experiment.clone(), finished_ms: old.finished_ms, path: old_rel });
                latest.insert(s.experiment.clone(), (s, p));
            }
            None => {
                latest.insert(s.experiment.clone(), (s, p));
            }
        }
    }
    let bundle_dir = dir.join(BUNDLE_DIR);
    fs::create_dir_all(&bundle_dir)?;
    let mut bundle = Vec::new();
    let mut experiments = Vec::new();
    for (id, (summary, path)) in latest {
        let base = path.parent().and_then(Path::parent).unwrap_or(dir);
        for a in &summary.artifacts {
            let name = Path::new(a).file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
            if name.ends_with(".csv") || name.ends_with("_fit.json") {
                let target = format!("{id}__{name}");
                fs::copy(base.join(a), bundle_dir.join(&target))?;
                bundle.push(BundleEntry { experiment: id.clone(), file: target });
            }
        }
        experiments.push(summary);
    }
    let verdict = if experiments.iter().all(RunSummary::pass) { Verdict::Pass } else { Verdict::Fail };
    let out = Consolidated { verdict, experiments, superseded, bundle };
    let mut text = serde_json::to_string_pretty(&out)?;
    text.push('\n');
    fs::write(dir.join(ACCEPTANCE_FILE), text)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(id: &str, finished: u64, pass: bool) -> RunSummary {
        RunSummary {
            experiment: id.into(),
            seed: 1,
            started_ms: finished - 1,
            finished_ms: finished,
            checks: vec![Check::new("c", pass, "r", String::new())],
            artifacts: vec![],
        }
    }

    fn write(dir: &Path, sub: &str, s: &RunSummary) {
        fs::create_dir_all(dir.join(sub)).unwrap();
        fs::write(dir.join(sub).join(SUMMARY_FILE), serde_json::to_string(s).unwrap()).unwrap();
    }

    #[test]
    fn single_summary_is_wrapped_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let s = summary("frenet", 10, true);
        write(dir.path(), "frenet", &s);
        let c = report(dir.path()).unwrap();
        assert_eq!(c.experiments, vec![s]);
        assert_eq!(c.verdict, Verdict::Pass);
        assert!(c.superseded.is_empty());
    }

    #[test]
    fn later_summary_wins() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "a/roots", &summary("roots", 20, true));
        write(dir.path(), "b/roots", &summary("roots", 10, true));
        let c = report(dir.path()).unwrap();
        assert_eq!(c.experiments.len(), 1);
        assert_eq!(c.experiments[0].finished_ms, 20);
        assert_eq!(c.superseded.len(), 1);
        assert_eq!(c.superseded[0].finished_ms, 10);
    }

    #[test]
    fn mixed_verdicts_fail() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "frenet", &summary("frenet", 10, true));
        write(dir.path(), "decay", &summary("decay", 10, false));
        assert_eq!(report(dir.path()).unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn empty_directory_has_no_summaries() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(report(dir.path()), Err(Error::NoSummaries(_))));
    }

    #[test]
    fn skipped_does_not_fail() {
        let mut s = summary("x", 5, true);
        s.checks.push(Check::skipped("y", "r", "n/a"));
        assert!(s.pass());
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.25, 1e-12, 3.0, -0.3303, 1e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }
}
