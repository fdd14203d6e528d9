//! Experiment runner: JSON configs in, CSV/JSON/SVG artifacts plus a hashed
//! manifest out. Identical config and seed reproduce byte-identical numeric
//! outputs.

use crate::collapse::{self, ModulusFamily};
use crate::modulus::{DegeneracyLaw, DiniVerdict, Modulus};
use crate::pde::{self, Dimension, ProblemSpec, SolveOptions};
use crate::renorm::{self, CaseOverride, RenormParams};
use crate::sequences::{self, SummableSequence, VanishingSequence};
use crate::svg;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Exit codes: 2 validation, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) => 2,
            ExperimentError::Numeric(_) => 3,
            ExperimentError::Io(_) => 4,
        }
    }
}

macro_rules! numeric_from {
    ($t:ty) => {
        impl From<$t> for ExperimentError {
            fn from(e: $t) -> Self {
                ExperimentError::Numeric(e.to_string())
            }
        }
    };
}
numeric_from!(crate::modulus::ModulusError);
numeric_from!(crate::sequences::SequenceError);
numeric_from!(crate::collapse::CollapseError);
numeric_from!(crate::renorm::RenormError);
numeric_from!(crate::pde::PdeError);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Dini,
    Modulator,
    Adversary,
    Collapse,
    Renorm,
    Pde,
    Pipeline,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

/// Top-level experiment description (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub modulus: Option<ModulusConfig>,
    #[serde(default)]
    pub dini: Option<DiniConfig>,
    #[serde(default)]
    pub sequence: Option<SequenceConfig>,
    #[serde(default)]
    pub modulator: Option<ModulatorConfig>,
    #[serde(default)]
    pub adversary: Option<AdversaryConfig>,
    #[serde(default)]
    pub collapse: Option<CollapseConfig>,
    #[serde(default)]
    pub renorm: Option<RenormConfig>,
    #[serde(default)]
    pub pde: Option<PdeConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModulusConfig {
    Power {
        alpha: f64,
        #[serde(default = "one")]
        domain_end: f64,
    },
    LogPower {
        alpha: f64,
        #[serde(default = "one")]
        domain_end: f64,
    },
    PowerSeries {
        coefficients: Vec<f64>,
        exponents: Vec<f64>,
        #[serde(default)]
        tail_bound: f64,
        #[serde(default = "one")]
        domain_end: f64,
    },
    RootSeries {
        terms: usize,
    },
    TildePhi {
        terms: usize,
    },
    Constant {
        level: f64,
    },
    Tabulated {
        csv: PathBuf,
        #[serde(default)]
        monotone_tol: f64,
    },
}

impl ModulusConfig {
    pub fn build(&self, base: &Path) -> Result<Modulus, ExperimentError> {
        let m = match self {
            ModulusConfig::Power { alpha, domain_end } => Modulus::power(*alpha, *domain_end),
            ModulusConfig::LogPower { alpha, domain_end } => Modulus::log_power(*alpha, *domain_end),
            ModulusConfig::PowerSeries { coefficients, exponents, tail_bound, domain_end } => {
                Modulus::power_series(coefficients.clone(), exponents.clone(), *tail_bound, *domain_end)
            }
            ModulusConfig::RootSeries { terms } => Modulus::root_series(*terms),
            ModulusConfig::TildePhi { terms } => Modulus::tilde_phi(*terms),
            ModulusConfig::Constant { level } => Modulus::constant(*level),
            ModulusConfig::Tabulated { csv, monotone_tol } => {
                let path = if csv.is_absolute() { csv.clone() } else { base.join(csv) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
                Modulus::tabulated_from_csv(&text, *monotone_tol)
            }
        };
        m.map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceConfig {
    Geometric { ratio: f64 },
    Power { exponent: f64 },
    Finite { terms: Vec<f64> },
    Tabulated { csv: PathBuf },
}

impl SequenceConfig {
    pub fn build(&self, base: &Path) -> Result<SummableSequence, ExperimentError> {
        let s = match self {
            SequenceConfig::Geometric { ratio } => SummableSequence::geometric(*ratio),
            SequenceConfig::Power { exponent } => SummableSequence::power_decay(*exponent),
            SequenceConfig::Finite { terms } => SummableSequence::finite(terms.clone()),
            SequenceConfig::Tabulated { csv } => {
                let path = if csv.is_absolute() { csv.clone() } else { base.join(csv) };
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
                let mut terms = Vec::new();
                for line in text.lines() {
                    let line = line.trim();
                    if line.is_empty() {
                        continue;
                    }
                    let last = line.split(',').next_back().unwrap_or("").trim();
                    match last.parse::<f64>() {
                        Ok(v) => terms.push(v),
                        Err(_) if terms.is_empty() => continue, // header
                        Err(e) => return Err(ExperimentError::Config(format!("bad sequence line {line:?}: {e}"))),
                    }
                }
                SummableSequence::finite(terms)
            }
        };
        s.map_err(|e| ExperimentError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiniConfig {
    #[serde(default = "one")]
    pub tau: f64,
    #[serde(default = "DiniConfig::default_theta")]
    pub theta: f64,
    #[serde(default = "DiniConfig::default_cap")]
    pub cap: f64,
    #[serde(default = "DiniConfig::default_tol")]
    pub tol: f64,
}

impl DiniConfig {
    fn default_theta() -> f64 {
        0.5
    }
    fn default_cap() -> f64 {
        1e6
    }
    fn default_tol() -> f64 {
        1e-6
    }
}

impl Default for DiniConfig {
    fn default() -> Self {
        Self { tau: 1.0, theta: 0.5, cap: 1e6, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModulatorConfig {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "ModulatorConfig::default_rows")]
    pub csv_rows: usize,
}

impl ModulatorConfig {
    fn default_rows() -> usize {
        64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VanishingConfig {
    Reciprocal,
    Geometric { ratio: f64 },
    ReciprocalLog,
}

impl VanishingConfig {
    fn build(&self) -> VanishingSequence {
        match self {
            VanishingConfig::Reciprocal => VanishingSequence::reciprocal(),
            VanishingConfig::Geometric { ratio } => VanishingSequence::geometric(*ratio),
            VanishingConfig::ReciprocalLog => VanishingSequence::reciprocal_log(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub c: VanishingConfig,
    #[serde(default = "AdversaryConfig::default_target")]
    pub target: f64,
}

impl AdversaryConfig {
    fn default_target() -> f64 {
        1e3
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyConfig {
    PowerLadder { count: usize },
    List { members: Vec<ModulusConfig> },
}

impl FamilyConfig {
    fn build(&self, base: &Path) -> Result<ModulusFamily, ExperimentError> {
        match self {
            FamilyConfig::PowerLadder { count } => {
                ModulusFamily::power_ladder(*count).map_err(|e| ExperimentError::Config(e.to_string()))
            }
            FamilyConfig::List { members } => {
                let ms: Result<Vec<_>, _> = members.iter().map(|m| m.build(base)).collect();
                ModulusFamily::finite(ms?).map_err(|e| ExperimentError::Config(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseConfig {
    pub family: FamilyConfig,
    #[serde(default = "CollapseConfig::default_grid")]
    pub grid_points: usize,
    #[serde(default = "CollapseConfig::default_budget")]
    pub member_budget: usize,
    #[serde(default = "CollapseConfig::default_threshold")]
    pub zero_threshold: f64,
}

impl CollapseConfig {
    fn default_grid() -> usize {
        1000
    }
    fn default_budget() -> usize {
        200
    }
    fn default_threshold() -> f64 {
        1e-9
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenormConfig {
    #[serde(default = "RenormConfig::default_l")]
    pub l: f64,
    #[serde(default = "RenormConfig::default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "RenormConfig::default_delta")]
    pub delta: f64,
    #[serde(default = "RenormConfig::default_depth")]
    pub depth: usize,
    #[serde(default = "RenormConfig::default_root_tol")]
    pub root_tol: f64,
    #[serde(default = "RenormConfig::default_override")]
    pub case_override: CaseOverride,
    #[serde(default = "RenormConfig::default_gamma_samples")]
    pub gamma_samples: usize,
}

impl RenormConfig {
    fn default_l() -> f64 {
        2.0
    }
    fn default_beta() -> f64 {
        0.5
    }
    fn default_delta() -> f64 {
        1.0 / 20.0
    }
    fn default_depth() -> usize {
        40
    }
    fn default_root_tol() -> f64 {
        1e-12
    }
    fn default_override() -> CaseOverride {
        CaseOverride::Auto
    }
    fn default_gamma_samples() -> usize {
        64
    }

    fn params(&self, sigma: DegeneracyLaw) -> Result<RenormParams, ExperimentError> {
        let mut p = RenormParams::new(
            sigma,
            self.l,
            self.beta,
            self.alpha.unwrap_or(self.beta / 2.0),
            self.delta,
            self.depth,
        )
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
        p.root_tol = self.root_tol;
        p.case_override = self.case_override;
        p.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
        Ok(p)
    }
}

impl Default for RenormConfig {
    fn default() -> Self {
        Self {
            l: 2.0,
            beta: 0.5,
            alpha: None,
            delta: 1.0 / 20.0,
            depth: 40,
            root_tol: 1e-12,
            case_override: CaseOverride::Auto,
            gamma_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BoundaryConfig {
    #[serde(default)]
    pub offset: f64,
    #[serde(default)]
    pub slope: Vec<f64>,
}

impl BoundaryConfig {
    fn eval(&self, x: &[f64]) -> f64 {
        self.offset + self.slope.iter().zip(x).map(|(s, c)| s * c).sum::<f64>()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeConfig {
    #[serde(default = "PdeConfig::default_dimension")]
    pub dimension: usize,
    #[serde(default = "PdeConfig::default_source")]
    pub source: f64,
    #[serde(default)]
    pub xi: Vec<f64>,
    #[serde(default)]
    pub xi_sweep: Vec<f64>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default = "PdeConfig::default_mesh")]
    pub mesh: f64,
    #[serde(default = "PdeConfig::default_floor")]
    pub floor: f64,
    #[serde(default = "PdeConfig::default_relax")]
    pub relax: f64,
    #[serde(default = "PdeConfig::default_tol")]
    pub tol: f64,
    #[serde(default = "PdeConfig::default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub probe: Vec<f64>,
    #[serde(default = "PdeConfig::default_fit_ratio")]
    pub fit_ratio: f64,
    #[serde(default = "PdeConfig::default_fit_depth")]
    pub fit_depth: usize,
}

impl PdeConfig {
    fn default_dimension() -> usize {
        1
    }
    fn default_source() -> f64 {
        1.0
    }
    fn default_mesh() -> f64 {
        4e-3
    }
    fn default_floor() -> f64 {
        1e-8
    }
    fn default_relax() -> f64 {
        0.5
    }
    fn default_tol() -> f64 {
        1e-10
    }
    fn default_max_iter() -> usize {
        50_000
    }
    fn default_fit_ratio() -> f64 {
        0.25
    }
    fn default_fit_depth() -> usize {
        4
    }

    fn problem(&self, sigma: DegeneracyLaw, xi_override: Option<f64>) -> Result<ProblemSpec, ExperimentError> {
        let b = self.boundary.clone();
        let f = self.source;
        if !(self.mesh > 0.0 && self.mesh < 1.0) {
            return Err(ExperimentError::Config(format!("pde mesh must lie in (0,1), got {}", self.mesh)));
        }
        if !(self.relax > 0.0 && self.relax <= 1.0) {
            return Err(ExperimentError::Config(format!("pde relax must lie in (0,1], got {}", self.relax)));
        }
        if !(self.floor > 0.0) {
            return Err(ExperimentError::Config(format!("pde floor must be positive, got {}", self.floor)));
        }
        let spec = match self.dimension {
            1 => {
                let xi = xi_override.or_else(|| self.xi.first().copied()).unwrap_or(0.0);
                let left = b.eval(&[-1.0]);
                let right = b.eval(&[1.0]);
                ProblemSpec::one_d(sigma, move |_| f, xi, left, right, self.mesh)
            }
            2 => {
                let xi0 = self.xi.first().copied().unwrap_or(0.0);
                let xi1 = self.xi.get(1).copied().unwrap_or(0.0);
                let xi = [xi_override.unwrap_or(xi0), xi1];
                ProblemSpec::two_d(sigma, move |_, _| f, xi, move |x, y| b.eval(&[x, y]), self.mesh)
            }
            d => return Err(ExperimentError::Config(format!("dimension must be 1 or 2, got {d}"))),
        };
        Ok(spec
            .map_err(|e| ExperimentError::Config(e.to_string()))?
            .with_floor(self.floor)
            .with_relax(self.relax))
    }

    fn solve_options(&self) -> SolveOptions {
        SolveOptions { tol: self.tol, max_iter: self.max_iter, ..SolveOptions::default() }
    }
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            dimension: 1,
            source: 1.0,
            xi: vec![],
            xi_sweep: vec![],
            boundary: BoundaryConfig { offset: 0.0, slope: vec![] },
            mesh: Self::default_mesh(),
            floor: 1e-8,
            relax: 0.5,
            tol: 1e-10,
            max_iter: 50_000,
            probe: vec![],
            fit_ratio: 0.25,
            fit_depth: 4,
        }
    }
}

/// One produced artifact with its content hash.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Written alongside every run: the config echo, version, timing, and the
/// hashed list of every output file.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: Command,
    pub seed: u64,
    pub version: String,
    pub wall_time_secs: f64,
    pub config: serde_json::Value,
    pub outputs: Vec<ManifestEntry>,
}

struct Workspace {
    dir: PathBuf,
    outputs: Vec<ManifestEntry>,
}

impl Workspace {
    fn new(dir: &Path) -> Result<Self, ExperimentError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), outputs: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), ExperimentError> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        let mut hasher = Sha256::new();
        hasher.update(bytes);
        self.outputs.push(ManifestEntry {
            path: name.to_string(),
            sha256: format!("{:x}", hasher.finalize()),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), ExperimentError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::Numeric(e.to_string()))?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn fnum(v: f64) -> String {
    format!("{v:e}")
}

/// Runs one experiment; returns the manifest after writing all artifacts.
pub fn run(config: &ExperimentConfig, base_dir: &Path) -> Result<Manifest, ExperimentError> {
    let start = std::time::Instant::now();
    let out_dir = if config.output_dir.is_absolute() {
        config.output_dir.clone()
    } else {
        base_dir.join(&config.output_dir)
    };
    let mut ws = Workspace::new(&out_dir)?;

    match config.command {
        Command::Dini => run_dini(config, base_dir, &mut ws)?,
        Command::Modulator => run_modulator(config, base_dir, &mut ws)?,
        Command::Adversary => run_adversary(config, &mut ws)?,
        Command::Collapse => run_collapse(config, base_dir, &mut ws)?,
        Command::Renorm => {
            run_renorm(config, base_dir, &mut ws)?;
        }
        Command::Pde => {
            run_pde(config, base_dir, &mut ws, None)?;
        }
        Command::Pipeline => run_pipeline(config, base_dir, &mut ws)?,
    }

    let manifest = Manifest {
        command: config.command,
        seed: config.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        config: serde_json::to_value(config).map_err(|e| ExperimentError::Numeric(e.to_string()))?,
        outputs: ws.outputs.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| ExperimentError::Numeric(e.to_string()))?;
    text.push('\n');
    std::fs::write(out_dir.join("manifest.json"), text)?;
    Ok(manifest)
}

fn require<'a, T>(section: &'a Option<T>, name: &str) -> Result<&'a T, ExperimentError> {
    section
        .as_ref()
        .ok_or_else(|| ExperimentError::Config(format!("missing config section \"{name}\"")))
}

fn run_dini(config: &ExperimentConfig, base: &Path, ws: &mut Workspace) -> Result<(), ExperimentError> {
    let modulus = require(&config.modulus, "modulus")?.build(base)?;
    let d = config.dini.clone().unwrap_or_default();
    if !(d.theta > 0.0 && d.theta < 1.0) || !(d.tau > 0.0) || !(d.cap > 0.0) || !(d.tol > 0.0) {
        return Err(ExperimentError::Config(format!(
            "dini section needs theta in (0,1) and positive tau/cap/tol, got theta={}, tau={}, cap={}, tol={}",
            d.theta, d.tau, d.cap, d.tol
        )));
    }
    let cert = modulus.dini_integral(d.tau, d.theta, d.cap, d.tol)?;
    ws.write_json("dini_certificate.json", &cert)?;
    if cert.verdict == DiniVerdict::Inconclusive {
        return Err(ExperimentError::Numeric(
            "Dini certification inconclusive within the term budget".into(),
        ));
    }
    Ok(())
}

fn run_modulator(config: &ExperimentConfig, base: &Path, ws: &mut Workspace) -> Result<(), ExperimentError> {
    let seq = require(&config.sequence, "sequence")?.build(base)?;
    let mc = require(&config.modulator, "modulator")?;
    if !(mc.epsilon > 0.0) || !(mc.delta > 0.0 && mc.delta < 1.0) {
        return Err(ExperimentError::Config(format!(
            "modulator section needs epsilon > 0 and delta in (0,1), got epsilon={}, delta={}",
            mc.epsilon, mc.delta
        )));
    }
    let res = sequences::modulator(&seq, mc.epsilon, mc.delta)?;
    let mut csv = String::from("j,c_j,block_index\n");
    let limit = (mc.csv_rows as u64).min(res.modulator.coverage().saturating_sub(1)).max(1);
    for j in 1..=limit {
        let c = res.modulator.c(j)?;
        csv.push_str(&format!("{j},{},{}\n", fnum(c), res.modulator.block_index(j)));
    }
    ws.write("modulator.csv", csv.as_bytes())?;
    #[derive(Serialize)]
    struct Summary<'a> {
        epsilon: f64,
        delta: f64,
        block_starts: &'a [u64],
        a_norm: crate::sequences::Certified,
        b_norm: crate::sequences::Certified,
        b_norm_bounds: (f64, f64),
        max_c: f64,
    }
    ws.write_json(
        "modulator.json",
        &Summary {
            epsilon: res.epsilon,
            delta: res.delta,
            block_starts: res.modulator.block_starts(),
            a_norm: res.a_norm,
            b_norm: res.b_norm,
            b_norm_bounds: res.b_norm_bounds,
            max_c: res.modulator.max_c(),
        },
    )
}

fn run_adversary(config: &ExperimentConfig, ws: &mut Workspace) -> Result<(), ExperimentError> {
    let ac = require(&config.adversary, "adversary")?;
    let res = sequences::adversarial_for(&ac.c.build(), ac.target)?;
    let mut csv = String::from("k,ln_start,ln_end,mass,value,divergence_contribution\n");
    for b in &res.blocks {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            b.k,
            fnum(b.ln_start),
            fnum(b.ln_end),
            fnum(b.mass),
            fnum(b.value),
            fnum(b.divergence_contribution)
        ));
    }
    ws.write("adversary_blocks.csv", csv.as_bytes())?;
    #[derive(Serialize)]
    struct Summary {
        target: f64,
        certified_partial_sum: f64,
        divergence_index_ln: f64,
        divergence_index: Option<u64>,
        norm: crate::sequences::Certified,
    }
    let norm = res.sequence.l1_norm_best_effort()?;
    ws.write_json(
        "adversary.json",
        &Summary {
            target: ac.target,
            certified_partial_sum: res.certified_partial_sum,
            divergence_index_ln: res.divergence_index_ln,
            divergence_index: res.divergence_index,
            norm,
        },
    )
}

fn run_collapse(config: &ExperimentConfig, base: &Path, ws: &mut Workspace) -> Result<(), ExperimentError> {
    let cc = require(&config.collapse, "collapse")?;
    let family = cc.family.build(base)?;
    let grid: Vec<f64> = (1..=cc.grid_points)
        .map(|i| family.interval_end() * i as f64 / cc.grid_points as f64)
        .collect();
    let report = collapse::collapsing_measure_estimate(&family, &grid, cc.member_budget, cc.zero_threshold)?;
    let mut csv = String::from("s,inf_value\n");
    for (s, v) in report.grid.iter().zip(&report.inf_values) {
        csv.push_str(&format!("{},{}\n", fnum(*s), fnum(*v)));
    }
    ws.write("collapse.csv", csv.as_bytes())?;
    #[derive(Serialize)]
    struct Summary {
        mu_estimate: f64,
        members_evaluated: usize,
        zero_threshold: f64,
        grid_points: usize,
    }
    ws.write_json(
        "collapse.json",
        &Summary {
            mu_estimate: report.mu_estimate,
            members_evaluated: report.members_evaluated,
            zero_threshold: report.zero_threshold,
            grid_points: report.grid.len(),
        },
    )
}

fn run_renorm(
    config: &ExperimentConfig,
    base: &Path,
    ws: &mut Workspace,
) -> Result<renorm::RenormalizationTrace, ExperimentError> {
    let modulus = require(&config.modulus, "modulus")?.build(base)?;
    let sigma = DegeneracyLaw::normalized(modulus).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let rc = config.renorm.clone().unwrap_or_default();
    let params = rc.params(sigma)?;
    let trace = renorm::run_shoring_algorithm(&params)?;
    trace.verify(1e-8).map_err(|e| ExperimentError::Numeric(e.to_string()))?;

    let mut csv = String::from("k,mu_k,tau_k,c_k,sigma_k_at_c_k,branch\n");
    for s in &trace.steps {
        let branch = match s.branch {
            renorm::Branch::Initial => "initial",
            renorm::Branch::Kept => "kept",
            renorm::Branch::Raised => "raised",
            renorm::Branch::Clamped => "clamped",
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{branch}\n",
            s.k,
            fnum(s.mu),
            fnum(s.tau),
            fnum(s.c),
            fnum(s.sigma_at_c)
        ));
    }
    ws.write("renorm_trace.csv", csv.as_bytes())?;

    #[derive(Serialize)]
    struct Summary {
        case_tag: renorm::CaseTag,
        r: f64,
        mu1: f64,
        theta: f64,
        sigma1_at_one: f64,
        clamp_count: usize,
        tau_l1_bound: Option<f64>,
        tail_bound: Option<f64>,
    }
    ws.write_json(
        "renorm.json",
        &Summary {
            case_tag: trace.scale.case_tag,
            r: trace.scale.r,
            mu1: trace.scale.mu1,
            theta: trace.scale.theta,
            sigma1_at_one: trace.scale.sigma1_at_one,
            clamp_count: trace.clamp_count,
            tau_l1_bound: trace.tau_l1_bound,
            tail_bound: trace.tail_bound,
        },
    )?;

    // sampled C^1 modulus, deepest certified scale up to t ~ 1
    if trace.clamp_count == 0 {
        let samples = rc.gamma_samples.max(2);
        let deepest = (trace.depth() as f64).min(60.0);
        let mut csv = String::from("t,gamma\n");
        let mut pts = Vec::new();
        for i in 0..samples {
            let expo = deepest * (1.0 - i as f64 / (samples - 1) as f64);
            let t = (-expo).exp().min(1.0 - 1e-9);
            let g = trace.c1_modulus(1.0, t)?;
            csv.push_str(&format!("{},{}\n", fnum(t), fnum(g)));
            pts.push((t, g));
        }
        ws.write("c1_modulus.csv", csv.as_bytes())?;
        let mut buf = Vec::new();
        svg::line_plot(&mut buf, "C1 modulus gamma(t)", &[("gamma".to_string(), pts)], true)?;
        ws.write("c1_modulus.svg", &buf)?;
    }
    Ok(trace)
}

fn run_pde(
    config: &ExperimentConfig,
    base: &Path,
    ws: &mut Workspace,
    taus: Option<&[f64]>,
) -> Result<pde::DecayReport, ExperimentError> {
    let modulus = require(&config.modulus, "modulus")?.build(base)?;
    let sigma = DegeneracyLaw::normalized(modulus).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let pc = config.pde.clone().unwrap_or_default();
    let opts = pc.solve_options();

    // optional sweep over gradient shifts, fanned out over worker threads
    if !pc.xi_sweep.is_empty() {
        let workers = config.threads.max(1);
        let jobs: Vec<(usize, f64)> = pc.xi_sweep.iter().copied().enumerate().collect();
        let mut results: Vec<Option<Result<pde::GridSolution, ExperimentError>>> =
            (0..jobs.len()).map(|_| None).collect();
        let chunks: Vec<Vec<(usize, f64)>> = jobs.chunks(jobs.len().div_ceil(workers)).map(|c| c.to_vec()).collect();
        let sigma_ref = &sigma;
        let pc_ref = &pc;
        let results_mutex = std::sync::Mutex::new(&mut results);
        std::thread::scope(|scope| {
            for chunk in chunks {
                let results_mutex = &results_mutex;
                scope.spawn(move || {
                    for (idx, xi) in chunk {
                        let out = pc_ref
                            .problem(sigma_ref.clone(), Some(xi))
                            .and_then(|p| pde::solve(&p, &opts).map_err(ExperimentError::from));
                        results_mutex.lock().unwrap()[idx] = Some(out);
                    }
                });
            }
        });
        for (i, slot) in results.into_iter().enumerate() {
            let sol = slot.expect("worker filled every slot")?;
            let name = format!("solution_xi{i}.csv");
            ws.write(&name, solution_csv(&sol).as_bytes())?;
        }
    }

    let problem = pc.problem(sigma, None)?;
    let sol = pde::solve(&problem, &opts)?;
    ws.write("solution.csv", solution_csv(&sol).as_bytes())?;

    let probe: Vec<f64> = if pc.probe.is_empty() { vec![0.0, 0.0] } else { pc.probe.clone() };
    let report = pde::fit_tangent_planes(&sol, &probe, pc.fit_ratio, pc.fit_depth, taus)?;

    let mut csv = String::from("n,radius,E_n,A_n,B_n,tau_n,predicted_n\n");
    let mut decay_pts = Vec::new();
    let mut predicted_pts = Vec::new();
    for s in &report.scales {
        let predicted = s.tau.map(|t| t * s.radius);
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            s.n,
            fnum(s.radius),
            fnum(s.e),
            fnum(s.a),
            fnum(s.b[0]),
            s.tau.map(fnum).unwrap_or_default(),
            predicted.map(fnum).unwrap_or_default()
        ));
        decay_pts.push((s.n as f64, s.e));
        if let Some(p) = predicted {
            predicted_pts.push((s.n as f64, p));
        }
    }
    ws.write("decay.csv", csv.as_bytes())?;
    let mut series = vec![("E_n".to_string(), decay_pts)];
    if !predicted_pts.is_empty() {
        series.push(("tau_n r^n".to_string(), predicted_pts));
    }
    let mut buf = Vec::new();
    svg::line_plot(&mut buf, "tangent-plane decay", &series, true)?;
    ws.write("decay.svg", &buf)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        residual_norm: f64,
        iterations: usize,
        floor_activations: usize,
        h: f64,
        holder_exponent: Option<f64>,
        fitted_c: Option<f64>,
        induction_c: Option<f64>,
        truncated: bool,
        probe: &'a [f64],
    }
    ws.write_json(
        "pde.json",
        &Summary {
            residual_norm: sol.residual_norm,
            iterations: sol.iterations,
            floor_activations: sol.floor_activations,
            h: sol.h,
            holder_exponent: report.holder_exponent,
            fitted_c: report.fitted_c,
            induction_c: report.induction_c,
            truncated: report.truncated,
            probe: &probe,
        },
    )?;
    Ok(report)
}

fn run_pipeline(config: &ExperimentConfig, base: &Path, ws: &mut Workspace) -> Result<(), ExperimentError> {
    let trace = run_renorm(config, base, ws)?;
    let taus: Vec<f64> = trace.steps.iter().map(|s| s.tau).collect();
    let report = run_pde(config, base, ws, Some(&taus))?;

    // shoring check of the renormalized family at its own pin points
    let gammas = trace.shoring_points();
    let shoring = collapse::is_shored_up(
        |n, t| {
            trace
                .renormalized_sigma_eval(n, t)
                .map_err(|e| collapse::CollapseError::Invalid(e.to_string()))
        },
        &gammas,
        1.0 - 1e-9,
    )?;

    #[derive(Serialize)]
    struct CrossCheck {
        shored_up: bool,
        shoring_min_value: f64,
        shoring_witness: usize,
        fitted_c: Option<f64>,
        induction_c: Option<f64>,
        scales_measured: usize,
    }
    ws.write_json(
        "pipeline.json",
        &CrossCheck {
            shored_up: shoring.shored_up,
            shoring_min_value: shoring.min_value,
            shoring_witness: shoring.witness,
            fitted_c: report.fitted_c,
            induction_c: report.induction_c,
            scales_measured: report.scales.len(),
        },
    )?;
    if !shoring.shored_up {
        return Err(ExperimentError::Numeric(format!(
            "renormalized family failed the shoring check: min value {} at step {}",
            shoring.min_value, shoring.witness
        )));
    }
    Ok(())
}

fn solution_csv(sol: &pde::GridSolution) -> String {
    let mut csv = String::new();
    match sol.dimension {
        Dimension::One => {
            csv.push_str("x,u\n");
            for (p, v) in sol.points.iter().zip(&sol.values) {
                csv.push_str(&format!("{},{}\n", fnum(p[0]), fnum(*v)));
            }
        }
        Dimension::Two => {
            csv.push_str("x,y,u\n");
            for (p, v) in sol.points.iter().zip(&sol.values) {
                csv.push_str(&format!("{},{},{}\n", fnum(p[0]), fnum(p[1]), fnum(*v)));
            }
        }
    }
    csv
}

/// Convenience wrapper: make the identity degeneracy law available to
/// examples and tests without spelling the construction.
pub fn identity_law() -> DegeneracyLaw {
    DegeneracyLaw::normalized(Modulus::power(1.0, f64::INFINITY).expect("valid power law"))
        .expect("identity law is normalized")
}

/// FieldFn from a plain closure, for example code.
pub fn field(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> pde::FieldFn {
    Arc::new(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn dini_config_runs_and_writes_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(
            r#"{
                "command": "dini",
                "output_dir": "run",
                "modulus": {"family": "log_power", "alpha": 2.0, "domain_end": 1.0}
            }"#,
        )
        .unwrap();
        let manifest = run(&cfg, tmp.path()).unwrap();
        assert_eq!(manifest.outputs.len(), 1);
        let text = std::fs::read_to_string(tmp.path().join("run/dini_certificate.json")).unwrap();
        assert!(text.contains("\"verdict\": \"dini\""), "{text}");
        // manifest lists the output with its hash
        let mtext = std::fs::read_to_string(tmp.path().join("run/manifest.json")).unwrap();
        assert!(mtext.contains("dini_certificate.json"));
        assert!(mtext.contains("sha256"));
    }

    #[test]
    fn manifest_covers_every_artifact_with_correct_hashes() {
        use sha2::{Digest, Sha256};
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(
            r#"{
                "command": "renorm",
                "output_dir": "run",
                "modulus": {"family": "power", "alpha": 1.0, "domain_end": 1e300},
                "renorm": {"beta": 0.75, "depth": 15}
            }"#,
        )
        .unwrap();
        let manifest = run(&cfg, tmp.path()).unwrap();
        let dir = tmp.path().join("run");
        let mut on_disk: Vec<String> = std::fs::read_dir(&dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().to_string())
            .filter(|n| n != "manifest.json")
            .collect();
        on_disk.sort();
        let mut listed: Vec<String> = manifest.outputs.iter().map(|o| o.path.clone()).collect();
        listed.sort();
        assert_eq!(on_disk, listed, "manifest must list every artifact");
        for entry in &manifest.outputs {
            let bytes = std::fs::read(dir.join(&entry.path)).unwrap();
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            assert_eq!(format!("{:x}", hasher.finalize()), entry.sha256, "{}", entry.path);
            assert_eq!(bytes.len() as u64, entry.bytes);
        }
    }

    #[test]
    fn invalid_delta_is_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(
            r#"{
                "command": "renorm",
                "modulus": {"family": "power", "alpha": 1.0, "domain_end": 1e308},
                "renorm": {"beta": 0.75, "delta": 0.5}
            }"#,
        )
        .unwrap();
        let err = run(&cfg, tmp.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("(0, 1/10)"), "{err}");
    }

    #[test]
    fn missing_section_is_config_error() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(r#"{"command": "modulator"}"#).unwrap();
        let err = run(&cfg, tmp.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn modulator_outputs_blocks() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::from_json(
            r#"{
                "command": "modulator",
                "sequence": {"kind": "geometric", "ratio": 0.5},
                "modulator": {"epsilon": 0.5, "delta": 0.1}
            }"#,
        )
        .unwrap();
        run(&cfg, tmp.path()).unwrap();
        let csv = std::fs::read_to_string(tmp.path().join("out/modulator.csv")).unwrap();
        assert!(csv.starts_with("j,c_j,block_index\n"));
        assert!(csv.lines().count() > 10);
    }

    #[test]
    fn tabulated_modulus_from_csv_file() {
        let tmp = tempfile::tempdir().unwrap();
        write_tmp(tmp.path(), "mod.csv", "t,w\n0.25,0.3\n0.5,0.6\n1.0,1.2\n");
        let cfg = ExperimentConfig::from_json(
            r#"{
                "command": "dini",
                "modulus": {"family": "tabulated", "csv": "mod.csv"},
                "dini": {"tol": 1e-6}
            }"#,
        )
        .unwrap();
        let manifest = run(&cfg, tmp.path()).unwrap();
        assert_eq!(manifest.outputs.len(), 1);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let mk = |out: &str| {
            ExperimentConfig::from_json(&format!(
                r#"{{
                    "command": "pipeline",
                    "seed": 7,
                    "output_dir": "{out}",
                    "modulus": {{"family": "power", "alpha": 1.0, "domain_end": 1e308}},
                    "renorm": {{"beta": 0.75, "depth": 20}},
                    "pde": {{"mesh": 0.01, "boundary": {{"offset": 0.9428090415820634}}, "fit_depth": 3}}
                }}"#
            ))
            .unwrap()
        };
        run(&mk("a"), tmp.path()).unwrap();
        run(&mk("b"), tmp.path()).unwrap();
        for name in ["renorm_trace.csv", "c1_modulus.csv", "solution.csv", "decay.csv"] {
            let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
            let b = std::fs::read(tmp.path().join("b").join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }
}
