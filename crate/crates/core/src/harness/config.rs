//! JSON experiment configuration and its validation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::bank::{build_bank, BankSpec};
use crate::heat::InitialKind;
use crate::lattice::TorusGrid;
use crate::noise::Mollifier;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    Lattice,
    Mollifier,
    NoiseCheck,
    Qv,
    Heat,
    Kpz,
    Burgers,
    Pairing,
    Converge,
    Section,
    FkCheck,
}

impl StudyKind {
    pub const ALL: [StudyKind; 11] = [
        StudyKind::Lattice,
        StudyKind::Mollifier,
        StudyKind::NoiseCheck,
        StudyKind::Qv,
        StudyKind::Heat,
        StudyKind::Kpz,
        StudyKind::Burgers,
        StudyKind::Pairing,
        StudyKind::Converge,
        StudyKind::Section,
        StudyKind::FkCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::Lattice => "lattice",
            StudyKind::Mollifier => "mollifier",
            StudyKind::NoiseCheck => "noise-check",
            StudyKind::Qv => "qv",
            StudyKind::Heat => "heat",
            StudyKind::Kpz => "kpz",
            StudyKind::Burgers => "burgers",
            StudyKind::Pairing => "pairing",
            StudyKind::Converge => "converge",
            StudyKind::Section => "section",
            StudyKind::FkCheck => "fk-check",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            StudyKind::Lattice => "gradient/divergence duality and Laplacian symmetry on random fields",
            StudyKind::Mollifier => "unit mass, support and autocorrelation of the bump mollifier",
            StudyKind::NoiseCheck => "pairing variance and spatial covariance of the noise over many seeds",
            StudyKind::Qv => "quadratic variation of one mollified path and convergence of c_n",
            StudyKind::Heat => "noiseless solver against the exact single-mode solution",
            StudyKind::Kpz => "KPZ-form residual of log Z under coupled refinement",
            StudyKind::Burgers => "weak Burgers identity for the test-function bank",
            StudyKind::Pairing => "mollified noise pairing approaching the white-noise pairing as n grows",
            StudyKind::Converge => "1-D distributional limit of the velocity pairings in n",
            StudyKind::Section => "time section at t = 0 through a delta net",
            StudyKind::FkCheck => "Feynman-Kac Monte Carlo against the solver",
        }
    }

    /// Studies that coarse-grain one master realization.
    pub fn uses_refinement(self) -> bool {
        matches!(self, StudyKind::Heat | StudyKind::Kpz | StudyKind::Burgers)
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::config("study", format!("unknown study `{s}`; see --list-studies")))
    }
}

/// A single mollifier scale or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScaleSpec {
    One(u32),
    Many(Vec<u32>),
}

impl ScaleSpec {
    pub fn values(&self) -> Vec<u32> {
        match self {
            ScaleSpec::One(n) => vec![*n],
            ScaleSpec::Many(v) => v.clone(),
        }
    }
}

/// Pass/fail thresholds. Defaults follow the acceptance levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative duality defect of gradient and divergence.
    pub duality_rel: f64,
    /// Absolute error of the high-resolution mollifier mass.
    pub mass_abs: f64,
    /// Relative error of `h_n(0)` against `c_n`.
    pub h0_rel: f64,
    /// Relative error of Monte Carlo variances and of QV.
    pub variance_rel: f64,
    /// Standard-error multiple for statistical checks.
    pub std_errors: f64,
    /// Target and half-width for the order of `c_n_discrete -> C_n`.
    pub cn_order: f64,
    pub cn_order_tol: f64,
    /// Constant `C` in `error <= C (dt + dx²)`.
    pub heat_constant: f64,
    pub spatial_order: f64,
    pub spatial_order_tol: f64,
    /// Lower bound for refinement orders.
    pub min_order: f64,
    /// Bound on `gap / |rhs|` for the weak identity.
    pub weak_rel_gap: f64,
    /// Allowed max/min spread of the normalized pairing error across `n`.
    pub limit_ratio_factor: f64,
    /// Multiple of `(dx² + dt) |reference|` for the 1-D limit.
    pub limit_constant: f64,
    /// Bound on `|z|` between Monte Carlo and solver.
    pub fk_z: f64,
    pub stderr_exponent: f64,
    pub stderr_exponent_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            duality_rel: 1e-12,
            mass_abs: 1e-8,
            h0_rel: 1e-6,
            variance_rel: 0.05,
            std_errors: 4.0,
            cn_order: 2.0,
            cn_order_tol: 0.3,
            heat_constant: 100.0,
            spatial_order: 2.0,
            spatial_order_tol: 0.2,
            min_order: 0.9,
            weak_rel_gap: 0.1,
            limit_ratio_factor: 3.0,
            limit_constant: 5.0,
            fk_z: 3.0,
            stderr_exponent: -0.5,
            stderr_exponent_tol: 0.1,
        }
    }
}

impl Tolerances {
    fn entries(&self) -> [(&'static str, f64); 17] {
        [
            ("duality_rel", self.duality_rel),
            ("mass_abs", self.mass_abs),
            ("h0_rel", self.h0_rel),
            ("variance_rel", self.variance_rel),
            ("std_errors", self.std_errors),
            ("cn_order", self.cn_order),
            ("cn_order_tol", self.cn_order_tol),
            ("heat_constant", self.heat_constant),
            ("spatial_order", self.spatial_order),
            ("spatial_order_tol", self.spatial_order_tol),
            ("min_order", self.min_order),
            ("weak_rel_gap", self.weak_rel_gap),
            ("limit_ratio_factor", self.limit_ratio_factor),
            ("limit_constant", self.limit_constant),
            ("fk_z", self.fk_z),
            ("stderr_exponent", self.stderr_exponent),
            ("stderr_exponent_tol", self.stderr_exponent_tol),
        ]
    }
}

fn default_d() -> usize {
    1
}
fn default_nodes() -> usize {
    128
}
fn default_side() -> f64 {
    1.0
}
fn default_horizon() -> f64 {
    0.1
}
fn default_lambda() -> f64 {
    1.0
}
fn default_paths() -> usize {
    10_000
}
fn default_levels() -> usize {
    3
}
fn default_ensemble() -> usize {
    10_000
}
fn default_eps() -> Vec<u32> {
    vec![8, 16, 32]
}
fn default_probes() -> usize {
    5
}

/// One experiment. Unset `M` means `2 N²`; unset `n` means 8, or
/// `[4, 8, 16, 32]` for the studies that sweep the scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyKind>,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(rename = "N", default = "default_nodes")]
    pub nodes: usize,
    #[serde(rename = "M", default)]
    pub steps: Option<usize>,
    #[serde(rename = "L", default = "default_side")]
    pub side: f64,
    #[serde(rename = "T", default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub n: Option<ScaleSpec>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub seed: u64,
    /// Initial potential; unset means 0, or `0.5 cos(2πx/L)` per axis for the section study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<InitialKind>,
    #[serde(default)]
    pub bank: BankSpec,
    /// Monte Carlo paths per Feynman-Kac estimate.
    #[serde(default = "default_paths")]
    pub num_paths: usize,
    /// Feynman-Kac probe points.
    #[serde(default = "default_probes")]
    pub probes: usize,
    /// Resolutions in refinement studies, finest = the configured grid.
    /// The burgers study also accepts 1, which skips the refinement.
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Seeds in ensemble checks.
    #[serde(default = "default_ensemble")]
    pub ensemble: usize,
    /// Delta-net widths `T / k` for the section study.
    #[serde(default = "default_eps")]
    pub eps_divisors: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn for_study(study: StudyKind) -> Self {
        Self { study: Some(study), ..Self::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(json_field(&e), e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn study(&self) -> Result<StudyKind> {
        self.study.ok_or_else(|| Error::config("study", "no study selected"))
    }

    pub fn steps(&self) -> usize {
        self.steps.unwrap_or(2 * self.nodes * self.nodes)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.d, self.nodes, self.side, self.horizon, self.steps())
    }

    pub fn scales(&self) -> Vec<u32> {
        match (&self.n, self.study) {
            (Some(s), _) => s.values(),
            (None, Some(StudyKind::Converge | StudyKind::Pairing)) => vec![4, 8, 16, 32],
            (None, _) => vec![8],
        }
    }

    /// The single scale for studies that use one.
    pub fn scale(&self) -> u32 {
        self.scales()[0]
    }

    /// Copy with `M` and `n` filled in, as echoed in reports.
    pub fn initial_kind(&self) -> InitialKind {
        self.f.clone().unwrap_or(match self.study {
            Some(StudyKind::Section) => InitialKind::Cosine { amplitude: 0.5, wavenumber: 1 },
            _ => InitialKind::Zero,
        })
    }

    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.steps = Some(self.steps());
        out.f = Some(self.initial_kind());
        out.n = Some(match self.scales().as_slice() {
            [one] => ScaleSpec::One(*one),
            many => ScaleSpec::Many(many.to_vec()),
        });
        out
    }

    /// Checks every field and reports all problems by name.
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        let study = self.study;
        if study.is_none() {
            errs.push(Error::config("study", "no study selected"));
        }
        if !(1..=3).contains(&self.d) {
            errs.push(Error::config("d", format!("must be 1, 2 or 3, got {}", self.d)));
        }
        if self.nodes < 8 {
            errs.push(Error::config("N", format!("need at least 8 nodes per axis, got {}", self.nodes)));
        }
        if self.steps() < 2 {
            errs.push(Error::config("M", format!("need at least 2 steps, got {}", self.steps())));
        }
        if !(self.side.is_finite() && self.side > 0.0) {
            errs.push(Error::config("L", "must be positive and finite"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            errs.push(Error::config("T", "must be positive and finite"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            errs.push(Error::config("lambda", "must be finite and non-negative"));
        }
        for (name, v) in self.tolerances.entries() {
            let ok = if name == "stderr_exponent" { v.is_finite() } else { v.is_finite() && v > 0.0 };
            if !ok {
                errs.push(Error::config(format!("tolerances.{name}"), "must be positive and finite"));
            }
        }
        let scales = self.scales();
        if scales.is_empty() || scales.contains(&0) {
            errs.push(Error::config("n", "scales must be positive"));
        }
        match study {
            Some(StudyKind::Converge) if scales.len() < 3 => {
                errs.push(Error::config("n", "the converge study needs at least 3 scales"))
            }
            Some(StudyKind::Pairing) if scales.len() < 2 => {
                errs.push(Error::config("n", "the pairing study needs at least 2 scales"))
            }
            Some(StudyKind::Converge | StudyKind::Pairing) => {}
            Some(_) if scales.len() != 1 => errs.push(Error::config("n", "this study takes a single scale")),
            _ => {}
        }
        if study == Some(StudyKind::Converge) && self.d != 1 {
            errs.push(Error::config("d", "the converge study is one-dimensional"));
        }
        if study == Some(StudyKind::FkCheck) && self.num_paths < 100 {
            errs.push(Error::config("num_paths", format!("need at least 100, got {}", self.num_paths)));
        }
        if study == Some(StudyKind::FkCheck) && self.probes == 0 {
            errs.push(Error::config("probes", "need at least one probe"));
        }
        let needs_noise = matches!(study, Some(StudyKind::NoiseCheck | StudyKind::Qv | StudyKind::Pairing));
        if needs_noise && self.lambda == 0.0 {
            errs.push(Error::config("lambda", "this study measures noise statistics and needs lambda > 0"));
        }
        if study == Some(StudyKind::Burgers) && self.levels == 2 {
            errs.push(Error::config("levels", "use 1 (no refinement) or at least 3"));
        }
        if study == Some(StudyKind::NoiseCheck) && self.ensemble < 100 {
            errs.push(Error::config("ensemble", format!("need at least 100 seeds, got {}", self.ensemble)));
        }
        if study == Some(StudyKind::Section) {
            if self.eps_divisors.len() < 3 {
                errs.push(Error::config("eps_divisors", "need at least 3 widths"));
            }
            if self.eps_divisors.iter().any(|&k| k <= 2) {
                errs.push(Error::config("eps_divisors", "each T/k needs k > 2 so that 2 eps < T"));
            }
        }
        if let Err(e) = self.initial_kind().validate_for_dim(self.d) {
            errs.push(e);
        }
        if errs.is_empty() {
            self.validate_grid(&scales, &mut errs);
        }
        match errs.len() {
            0 => Ok(()),
            1 => Err(errs.pop().expect("one error")),
            count => Err(Error::Aggregate { count, first: Box::new(errs.swap_remove(0)) }),
        }
    }

    fn validate_grid(&self, scales: &[u32], errs: &mut Vec<Error>) {
        let grid = match self.grid() {
            Ok(g) => g,
            Err(e) => return errs.push(Error::config("grid", e.to_string())),
        };
        if grid.stability_margin() < 0.0 {
            errs.push(Error::config(
                "M",
                format!("dt = {} exceeds dx²/(2d) = {}", grid.dt(), grid.dx().powi(2) / (2 * self.d) as f64),
            ));
        }
        if let Err(e) = build_bank(&self.bank, &grid) {
            errs.push(Error::config("bank", e.to_string()));
        }
        let study = self.study.expect("checked");
        let mut check_scales = |g: &TorusGrid, what: &str| {
            for &n in scales {
                if let Err(e) = Mollifier::new(n, *g) {
                    errs.push(Error::config("n", format!("n = {n} on the {what} grid: {e}")));
                }
            }
        };
        if matches!(study, StudyKind::Lattice | StudyKind::Mollifier) {
            return;
        }
        check_scales(&grid, "configured");
        if study.uses_refinement() && !(study == StudyKind::Burgers && self.levels == 1) {
            if self.levels < 3 {
                errs.push(Error::config("levels", "order fits need at least 3 levels"));
                return;
            }
            let sf = 1usize << (self.levels - 1);
            match grid.coarsen(sf, sf * sf) {
                Ok(coarse) if study != StudyKind::Heat => {
                    let mut cs = |g: &TorusGrid| {
                        for &n in scales {
                            if let Err(e) = Mollifier::new(n, *g) {
                                errs.push(Error::config("n", format!("n = {n} on the coarsest grid: {e}")));
                            }
                        }
                    };
                    cs(&coarse)
                }
                Ok(_) => {}
                Err(e) => errs.push(Error::config("levels", format!("cannot coarsen {} times: {e}", self.levels - 1))),
            }
        }
    }
}

impl InitialKind {
    fn validate_for_dim(&self, d: usize) -> Result<()> {
        let dummy = TorusGrid::unit(d.clamp(1, 3), 8, 1.0, 2)?;
        self.validate(&dummy)
    }
}

fn json_field(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    // serde reports unknown or missing fields as "... field `name` ..."
    msg.split('`').nth(1).map(str::to_owned).unwrap_or_else(|| "config".to_owned())
}
