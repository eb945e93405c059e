//! Experiment configuration: schema, defaults and validation.
//!
//! A config is one JSON document. Every section is optional and falls back
//! to the defaults below, which are the acceptance-run parameters. Unknown
//! keys are rejected with a did-you-mean hint.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::curve::{Curve, Family};
use crate::oscillatory::floor_k3;
use crate::testbench::MAX_SMOOTHING_K;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Frenet,
    Roots,
    Decay,
    Knapp,
    SqfnReverse,
    SqfnForward,
    Nikodym,
    LocalSmoothing,
    BroadNarrow,
    BrascampLieb,
    All,
}

impl Experiment {
    pub const EACH: [Experiment; 10] = [
        Experiment::Frenet,
        Experiment::Roots,
        Experiment::Decay,
        Experiment::Knapp,
        Experiment::SqfnReverse,
        Experiment::SqfnForward,
        Experiment::Nikodym,
        Experiment::LocalSmoothing,
        Experiment::BroadNarrow,
        Experiment::BrascampLieb,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Experiment::Frenet => "frenet",
            Experiment::Roots => "roots",
            Experiment::Decay => "decay",
            Experiment::Knapp => "knapp",
            Experiment::SqfnReverse => "sqfn-reverse",
            Experiment::SqfnForward => "sqfn-forward",
            Experiment::Nikodym => "nikodym",
            Experiment::LocalSmoothing => "local-smoothing",
            Experiment::BroadNarrow => "broad-narrow",
            Experiment::BrascampLieb => "brascamp-lieb",
            Experiment::All => "all",
        }
    }

    /// The concrete experiments this selection expands to.
    pub fn expand(self) -> Vec<Experiment> {
        match self {
            Experiment::All => Experiment::EACH.to_vec(),
            e => vec![e],
        }
    }

    /// Per-experiment seed derived from the top-level one.
    pub fn seed(self, top: u64) -> u64 {
        let tag = self.id().bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        let mut z = top ^ tag;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrenetConfig {
    pub samples: usize,
    pub tolerance: f64,
    /// Nondegeneracy threshold on `|det|`.
    pub c0: f64,
    /// `(σ, λ)` of the rescaling fixed-point check.
    pub rescale: [f64; 2],
}

impl Default for FrenetConfig {
    fn default() -> Self {
        FrenetConfig { samples: 21, tolerance: 1e-12, c0: 1e-6, rescale: [0.3, 0.25] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RootsConfig {
    pub samples: usize,
    pub delta0: f64,
    pub tolerance: f64,
    pub comparability_samples: usize,
    pub comparability_budget: f64,
    /// Optional sample set with columns `xi1,xi2,xi3`, replacing the random one.
    pub samples_csv: Option<PathBuf>,
}

impl Default for RootsConfig {
    fn default() -> Self {
        RootsConfig {
            samples: 10_000,
            delta0: 1e-2,
            tolerance: 1e-10,
            comparability_samples: 1000,
            comparability_budget: 10.0,
            samples_csv: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportConfig {
    /// `(k, ℓ)` pairs for the large-`ℓ` containment.
    pub pairs_a: Vec<[u32; 2]>,
    /// `(k, ℓ)` pairs for the small-`ℓ` containment.
    pub pairs_b: Vec<[u32; 2]>,
    pub eps: f64,
    pub samples: usize,
    pub c_budget: f64,
    /// `(k, ℓ)` of the lifted-support tail check.
    pub lifted: [u32; 2],
    pub lifted_eps: f64,
    pub lifted_frequencies: usize,
    pub max_tail: f64,
}

impl Default for SupportConfig {
    fn default() -> Self {
        SupportConfig {
            pairs_a: vec![[9, 3], [12, 4]],
            pairs_b: vec![[9, 1], [12, 2]],
            eps: 0.1,
            samples: 10_000,
            c_budget: 4.0,
            lifted: [9, 3],
            lifted_eps: 0.05,
            lifted_frequencies: 16,
            max_tail: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    pub directions: Vec<[f64; 3]>,
    /// Admissible slope window per direction.
    pub slope_windows: Vec<[f64; 2]>,
    pub log2_r: [i32; 2],
    pub t: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            directions: vec![[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
            slope_windows: vec![[-0.38, -0.28], [-0.55, -0.45]],
            log2_r: [6, 14],
            t: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnappConfig {
    pub a: [f64; 2],
    /// `r` runs over `2^{-j}` for `j` in this inclusive range.
    pub log2_inv_r: [i32; 2],
    pub min_growth: f64,
    pub max_relative_residual: f64,
}

impl Default for KnappConfig {
    fn default() -> Self {
        KnappConfig { a: [0.5, 1.0], log2_inv_r: [4, 12], min_growth: 2.1, max_relative_residual: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReverseConfig {
    pub r: Vec<f64>,
    pub trials: usize,
    pub grid: usize,
    pub dilation: f64,
    pub slack: f64,
    pub max_exponent: f64,
}

impl Default for ReverseConfig {
    fn default() -> Self {
        ReverseConfig {
            r: vec![0.25, 0.125, 0.0625, 0.03125],
            trials: 10,
            grid: 64,
            dilation: 12.0,
            slack: 0.5,
            max_exponent: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardConfig {
    pub r: Vec<f64>,
    pub trials: usize,
    pub grid: usize,
    pub eps: f64,
    pub stages: Option<usize>,
    pub weight_exponent: f64,
    pub max_exponent: f64,
}

impl Default for ForwardConfig {
    fn default() -> Self {
        ForwardConfig {
            r: vec![0.25, 0.125, 0.0625, 0.03125],
            trials: 10,
            grid: 64,
            eps: 0.5,
            stages: None,
            weight_exponent: 300.0,
            max_exponent: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NikodymConfig {
    /// `r₃` runs over `2^{-j}` for `j` in this inclusive range.
    pub log2_inv_r3: [i32; 2],
    pub trials: usize,
    pub support: usize,
    pub s_range: f64,
    pub max_degree: f64,
    /// Eccentricities `2^j` for `j` in this inclusive range.
    pub log2_ecc: [i32; 2],
    pub frame_trials: usize,
    pub frame_s_range: f64,
    pub max_frame_exponent: f64,
    pub scaling_sigma: f64,
    pub scaling_lambda: f64,
    pub scaling_probes: usize,
    pub scaling_exponent: f64,
}

impl Default for NikodymConfig {
    fn default() -> Self {
        NikodymConfig {
            log2_inv_r3: [4, 9],
            trials: 20,
            support: 16,
            s_range: 0.25,
            max_degree: 3.0,
            log2_ecc: [1, 6],
            frame_trials: 20,
            frame_s_range: 0.125,
            max_frame_exponent: 0.3,
            scaling_sigma: 0.3,
            scaling_lambda: 0.25,
            scaling_probes: 1000,
            scaling_exponent: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalSmoothingConfig {
    pub k: Vec<u32>,
    pub p: Vec<f64>,
    pub trials: usize,
    pub delta0: f64,
}

impl Default for LocalSmoothingConfig {
    fn default() -> Self {
        LocalSmoothingConfig { k: vec![6, 8, 10, 12], p: vec![2.0, 4.0], trials: 4, delta0: 1.0 / 32.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BroadNarrowConfig {
    pub instances: usize,
    pub k: usize,
    pub eps: f64,
    pub points: usize,
    pub depth: u32,
    pub p: f64,
}

impl Default for BroadNarrowConfig {
    fn default() -> Self {
        BroadNarrowConfig { instances: 100, k: 4, eps: 0.1, points: 64, depth: 8, p: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BrascampLiebConfig {
    pub lambdas: Vec<f64>,
    pub samples: usize,
    pub max_spread: f64,
}

impl Default for BrascampLiebConfig {
    fn default() -> Self {
        BrascampLiebConfig { lambdas: vec![0.25, 0.125, 0.0625, 0.03125], samples: 10_000, max_spread: 4.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: PathBuf,
    pub curve: Family,
    pub frenet: FrenetConfig,
    pub roots: RootsConfig,
    pub support: SupportConfig,
    pub decay: DecayConfig,
    pub knapp: KnappConfig,
    pub sqfn_reverse: ReverseConfig,
    pub sqfn_forward: ForwardConfig,
    pub nikodym: NikodymConfig,
    pub local_smoothing: LocalSmoothingConfig,
    pub broad_narrow: BroadNarrowConfig,
    pub brascamp_lieb: BrascampLiebConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::All,
            seed: 1,
            output: PathBuf::from("out"),
            curve: Family::Moment { n: 3 },
            frenet: FrenetConfig::default(),
            roots: RootsConfig::default(),
            support: SupportConfig::default(),
            decay: DecayConfig::default(),
            knapp: KnappConfig::default(),
            sqfn_reverse: ReverseConfig::default(),
            sqfn_forward: ForwardConfig::default(),
            nikodym: NikodymConfig::default(),
            local_smoothing: LocalSmoothingConfig::default(),
            broad_narrow: BroadNarrowConfig::default(),
            brascamp_lieb: BrascampLiebConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn curve(&self) -> Result<Curve> {
        Curve::from_family(&self.curve)
    }

    /// Reads and fully validates a config file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let (config, diagnostics) = parse_file(path)?;
        match config {
            Some(c) if diagnostics.is_empty() => Ok(c),
            _ => Err(Error::ConfigInvalid(diagnostics)),
        }
    }

    /// Semantic checks on a config that parsed.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut d = Vec::new();
        let mut need = |ok: bool, msg: String| {
            if !ok {
                d.push(msg);
            }
        };
        let curve = Curve::from_family(&self.curve);
        match &curve {
            Err(e) => need(false, format!("curve: {e}")),
            Ok(c) => {
                let needs_3d = self.experiment.expand().iter().any(|e| *e != Experiment::Frenet && *e != Experiment::Knapp);
                need(!needs_3d || c.dim() == 3, format!("curve: experiment {} needs a curve in R^3, got dimension {}", self.experiment.id(), c.dim()));
            }
        }

        let f = &self.frenet;
        need(f.samples >= 2, "frenet.samples: need at least 2".into());
        need(f.tolerance > 0.0, "frenet.tolerance: must be positive".into());
        need(f.c0 > 0.0, "frenet.c0: must be positive".into());
        need(f.rescale[1] > 0.0 && f.rescale[1] <= 1.0, "frenet.rescale: λ must lie in (0, 1]".into());

        let r = &self.roots;
        need(r.samples > 0, "roots.samples: must be positive".into());
        need(r.comparability_samples > 0, "roots.comparability_samples: must be positive".into());
        need(r.delta0 > 0.0 && r.delta0 < 0.05, "roots.delta0: must lie in (0, 0.05)".into());
        need(r.tolerance > 0.0, "roots.tolerance: must be positive".into());
        need(r.comparability_budget >= 1.0, "roots.comparability_budget: must be at least 1".into());

        let s = &self.support;
        for (name, pairs) in [("pairs_a", &s.pairs_a), ("pairs_b", &s.pairs_b)] {
            for &[k, ell] in pairs.iter() {
                need(
                    ell <= floor_k3(k),
                    format!("support.{name}: (k, ell) = ({k}, {ell}) violates 0 <= ell <= floor(k/3) = {}", floor_k3(k)),
                );
            }
        }
        need(s.eps > 0.0 && s.eps < 1.0, "support.eps: must lie in (0, 1)".into());
        need(s.samples > 0, "support.samples: must be positive".into());
        need(s.c_budget >= 1.0, "support.c_budget: must be at least 1".into());
        let [lk, lell] = s.lifted;
        let lo = (4.0 * s.lifted_eps * lk as f64).ceil() as u32;
        need(
            lo <= lell && lell <= floor_k3(lk),
            format!("support.lifted: (k, ell) = ({lk}, {lell}) violates ceil(4 eps k) = {lo} <= ell <= floor(k/3) = {}", floor_k3(lk)),
        );
        need(s.lifted_frequencies > 0, "support.lifted_frequencies: must be positive".into());
        need(s.max_tail > 0.0, "support.max_tail: must be positive".into());

        let dc = &self.decay;
        need(!dc.directions.is_empty(), "decay.directions: need at least one direction".into());
        need(dc.directions.len() == dc.slope_windows.len(), "decay.slope_windows: need one window per direction".into());
        need(dc.directions.iter().all(|v| v.iter().any(|x| *x != 0.0)), "decay.directions: zero direction".into());
        need(dc.slope_windows.iter().all(|w| w[0] <= w[1]), "decay.slope_windows: lower end exceeds upper end".into());
        need(dc.log2_r[1] > dc.log2_r[0], "decay.log2_r: need at least two dyadic radii".into());
        need(dc.t >= 1.0 && dc.t <= 2.0, "decay.t: must lie in [1, 2]".into());

        let kn = &self.knapp;
        need(kn.a[0] > 0.0 && kn.a[0] < kn.a[1], "knapp.a: need 0 < a1 < a2".into());
        need(kn.log2_inv_r[0] >= 1 && kn.log2_inv_r[1] > kn.log2_inv_r[0], "knapp.log2_inv_r: need 1 <= j_min < j_max".into());

        let rv = &self.sqfn_reverse;
        check_scales(&mut d, "sqfn_reverse.r", &rv.r);
        let mut need = |ok: bool, msg: String| {
            if !ok {
                d.push(msg);
            }
        };
        need(rv.trials >= 10, "sqfn_reverse.trials: need at least 10 trials per scale".into());
        need(rv.grid.is_power_of_two() && rv.grid >= 8, "sqfn_reverse.grid: must be a power of two >= 8".into());
        need(rv.dilation > 0.0 && rv.slack >= 0.0, "sqfn_reverse: dilation must be positive and slack non-negative".into());

        let fw = &self.sqfn_forward;
        need(fw.trials >= 10, "sqfn_forward.trials: need at least 10 trials per scale".into());
        need(fw.grid.is_power_of_two() && fw.grid >= 8, "sqfn_forward.grid: must be a power of two >= 8".into());
        need(fw.eps > 0.0 && fw.eps <= 1.0, "sqfn_forward.eps: must lie in (0, 1]".into());
        need(fw.weight_exponent > 0.0, "sqfn_forward.weight_exponent: must be positive".into());

        let nk = &self.nikodym;
        need(nk.log2_inv_r3[1] > nk.log2_inv_r3[0] && nk.log2_inv_r3[0] >= 1, "nikodym.log2_inv_r3: need 1 <= j_min < j_max".into());
        need(nk.log2_ecc[1] > nk.log2_ecc[0] && nk.log2_ecc[0] >= 0, "nikodym.log2_ecc: need 0 <= j_min < j_max".into());
        need(nk.trials > 0 && nk.frame_trials > 0 && nk.scaling_probes > 0, "nikodym: trial and probe counts must be positive".into());
        need(nk.s_range > 0.0 && nk.frame_s_range > 0.0, "nikodym: s ranges must be positive".into());
        need(nk.scaling_lambda > 0.0 && nk.scaling_lambda <= 1.0, "nikodym.scaling_lambda: must lie in (0, 1]".into());

        let ls = &self.local_smoothing;
        need(ls.k.len() >= 2, "local_smoothing.k: need at least two frequency scales".into());
        for &k in &ls.k {
            need((3..=MAX_SMOOTHING_K).contains(&k), format!("local_smoothing.k: {k} outside [3, {MAX_SMOOTHING_K}]"));
        }
        for &p in &ls.p {
            need([2.0, 4.0, 6.0].contains(&p), format!("local_smoothing.p: {p} not in {{2, 4, 6}}"));
        }
        need(ls.trials > 0, "local_smoothing.trials: must be positive".into());
        need(ls.delta0 > 0.0 && ls.delta0 <= 0.125, "local_smoothing.delta0: must lie in (0, 1/8]".into());

        let bn = &self.broad_narrow;
        need(bn.k >= 2, "broad_narrow.k: need k >= 2".into());
        need(bn.eps > 0.0, "broad_narrow.eps: must be positive".into());
        need(bn.instances > 0 && bn.points > 0, "broad_narrow: instance and point counts must be positive".into());
        need((2..=16).contains(&bn.depth), "broad_narrow.depth: must lie in [2, 16]".into());
        need(bn.p >= 2.0, "broad_narrow.p: must be at least 2".into());

        let bl = &self.brascamp_lieb;
        check_scales(&mut d, "brascamp_lieb.lambdas", &bl.lambdas);
        if bl.samples == 0 || bl.max_spread < 1.0 {
            d.push("brascamp_lieb: samples must be positive and max_spread at least 1".into());
        }
        d
    }
}

fn check_scales(d: &mut Vec<String>, name: &str, r: &[f64]) {
    if r.len() < 2 {
        d.push(format!("{name}: need at least two scales"));
    }
    for &x in r {
        if !(x > 0.0 && x <= 1.0) {
            d.push(format!("{name}: scale {x} outside (0, 1]"));
        }
    }
}

/// Parses a config file into the config (if it deserialises) and the list
/// of diagnostics. An empty list means the config is valid.
pub fn parse_file(path: &Path) -> Result<(Option<ExperimentConfig>, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::FileUnreadable { path: path.display().to_string(), source })?;
    Ok(parse_str(&text))
}

pub fn parse_str(text: &str) -> (Option<ExperimentConfig>, Vec<String>) {
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return (None, vec![format!("syntax: {e}")]),
    };
    let schema = serde_json::to_value(ExperimentConfig::default()).expect("defaults serialise");
    let mut diagnostics = Vec::new();
    unknown_keys(&value, &schema, "", &mut diagnostics);
    if !diagnostics.is_empty() {
        return (None, diagnostics);
    }
    match serde_json::from_value::<ExperimentConfig>(value) {
        Ok(c) => {
            let d = c.diagnostics();
            (Some(c), d)
        }
        Err(e) => (None, vec![format!("schema: {e}")]),
    }
}

/// Lists the keys of `value` that the schema does not know, section by
/// section. The curve section is a tagged union and is left to serde.
fn unknown_keys(value: &Value, schema: &Value, prefix: &str, out: &mut Vec<String>) {
    let (Value::Object(v), Value::Object(s)) = (value, schema) else {
        if prefix.is_empty() {
            out.push("config must be a JSON object".into());
        }
        return;
    };
    for (key, sub) in v {
        let path = if prefix.is_empty() { key.clone() } else { format!("{prefix}.{key}") };
        match s.get(key) {
            Some(known) if key != "curve" => unknown_keys(sub, known, &path, out),
            Some(_) => {}
            None => {
                let hint = s
                    .keys()
                    .map(|k| (strsim::levenshtein(k, key), k))
                    .filter(|(dist, k)| *dist <= 2.max(key.len() / 3) || key.starts_with(k.as_str()) || k.starts_with(key.as_str()))
                    .min()
                    .map(|(_, k)| format!("; did you mean \"{k}\"?"))
                    .unwrap_or_default();
                out.push(format!("unknown key \"{path}\"{hint}"));
            }
        }
    }
}
