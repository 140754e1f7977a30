//! Experiment configuration files.
//!
//! One JSON object per file. The `kind` field selects the experiment, an
//! optional `output` names the artifact directory, and every other key
//! belongs to the experiment body.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Upper limit on expanded sweep lengths.
pub const MAX_GRID_LEN: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SpectrumSweep,
    QuadraticSim,
    HypocoercivityReport,
    PreconditionSweep,
    MeanfieldRun,
    CouplingRun,
    RatesReport,
    AveragingRun,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::SpectrumSweep,
        ExperimentKind::QuadraticSim,
        ExperimentKind::HypocoercivityReport,
        ExperimentKind::PreconditionSweep,
        ExperimentKind::MeanfieldRun,
        ExperimentKind::CouplingRun,
        ExperimentKind::RatesReport,
        ExperimentKind::AveragingRun,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::SpectrumSweep => "spectrum-sweep",
            ExperimentKind::QuadraticSim => "quadratic-sim",
            ExperimentKind::HypocoercivityReport => "hypocoercivity-report",
            ExperimentKind::PreconditionSweep => "precondition-sweep",
            ExperimentKind::MeanfieldRun => "meanfield-run",
            ExperimentKind::CouplingRun => "coupling-run",
            ExperimentKind::RatesReport => "rates-report",
            ExperimentKind::AveragingRun => "averaging-run",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Experiments that draw random numbers and therefore need seeds.
    pub fn stochastic(&self) -> bool {
        matches!(self, ExperimentKind::MeanfieldRun | ExperimentKind::CouplingRun)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sweep values: a scalar, an explicit list, or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Scalar(f64),
    List(Vec<f64>),
    Range { start: f64, step: f64, stop: f64 },
}

impl Grid {
    /// Expanded values; a range includes `stop` when it lies on the lattice
    /// up to rounding.
    pub fn values(&self) -> Result<Vec<f64>, String> {
        match self {
            Grid::Scalar(v) => Ok(vec![*v]),
            Grid::List(v) => Ok(v.clone()),
            Grid::Range { start, step, stop } => {
                if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
                    return Err("range bounds must be finite".into());
                }
                if !(*step > 0.0) || stop < start {
                    return Err("range needs step > 0 and stop >= start".into());
                }
                let count = ((stop - start) / step + 1e-9).floor() + 1.0;
                if count > MAX_GRID_LEN as f64 {
                    return Err(format!("range expands to more than {MAX_GRID_LEN} points"));
                }
                Ok((0..count as usize).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomGameSpec {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    /// Inner dimension of the Gram factors; `inner < n` makes `Q` singular.
    #[serde(default)]
    pub inner: Option<usize>,
}

/// Game matrices given row by row, or a seed-fixed random game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GameSpec {
    Explicit {
        q: Vec<Vec<f64>>,
        r: Vec<Vec<f64>>,
        p: Vec<Vec<f64>>,
    },
    Random {
        random: RandomGameSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kappa_x: f64,
    pub kappa_y: f64,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub eps: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MneGridSpec {
    #[serde(default = "neg_six")]
    pub lo: f64,
    #[serde(default = "six")]
    pub hi: f64,
    #[serde(default = "default_mne_points")]
    pub points: usize,
    #[serde(default = "default_mne_tol")]
    pub tol: f64,
    #[serde(default = "half")]
    pub damping: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorName {
    Exact,
    Rk4,
    Euler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub game: GameSpec,
    pub eta: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub game: GameSpec,
    pub eta: Grid,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    /// Horizon in rescaled time `s = sqrt(eta) t`.
    pub horizon: f64,
    /// Samples per trajectory.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorName,
    #[serde(default)]
    pub lyapunov: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypoConfig {
    pub game: GameSpec,
    pub eta: Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrecondConfig {
    pub game: GameSpec,
    pub eta: Grid,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub xi0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanfieldConfig {
    pub kernel: KernelSpec,
    pub n: usize,
    pub beta: f64,
    #[serde(default = "one")]
    pub eta: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub center: (f64, f64),
    #[serde(default = "one")]
    pub spread: f64,
    #[serde(default)]
    pub mne: Option<MneGridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub kernel: KernelSpec,
    pub n: usize,
    pub beta: f64,
    pub eta: Grid,
    /// Defaults to `1 / eta` per grid point.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_primary")]
    pub primary: (f64, f64),
    #[serde(default = "default_mirror")]
    pub mirror: (f64, f64),
    #[serde(default = "one")]
    pub spread: f64,
    #[serde(default)]
    pub mne: Option<MneGridSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProfileSpec {
    Constant { k: f64 },
    Piecewise { m: f64, k: f64, radius: f64 },
    Benchmark { kappa: f64, eps: f64, omega: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub profile: ProfileSpec,
    #[serde(default = "four")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingConfig {
    pub game: GameSpec,
    pub gamma: Grid,
    #[serde(default)]
    pub v0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Experiment {
    Spectrum(SpectrumConfig),
    Sim(SimConfig),
    Hypo(HypoConfig),
    Precond(PrecondConfig),
    Meanfield(MeanfieldConfig),
    Coupling(CouplingConfig),
    Rates(RatesConfig),
    Averaging(AveragingConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output: Option<String>,
    pub experiment: Experiment,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn half() -> f64 {
    0.5
}
fn four() -> f64 {
    4.0
}
fn six() -> f64 {
    6.0
}
fn neg_six() -> f64 {
    -6.0
}
fn default_mne_points() -> usize {
    512
}
fn default_mne_tol() -> f64 {
    1e-10
}
fn default_samples() -> usize {
    400
}
fn default_integrator() -> IntegratorName {
    IntegratorName::Exact
}
fn default_steps() -> usize {
    50
}
fn default_record_every() -> usize {
    10
}
fn default_delta() -> f64 {
    0.1
}
fn default_primary() -> (f64, f64) {
    (2.0, 2.0)
}
fn default_mirror() -> (f64, f64) {
    (-2.0, -2.0)
}

/// Why a configuration was rejected.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Not valid JSON.
    Parse { line: usize, column: usize, message: String },
    /// Valid JSON with the wrong shape.
    Schema { path: String, message: String },
    /// Well-formed values outside the allowed ranges.
    Precondition(Vec<Issue>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Schema { path, message } => write!(f, "schema error at {path}: {message}"),
            ConfigError::Precondition(issues) => {
                let parts: Vec<String> = issues.iter().map(|i| format!("{}: {}", i.path, i.message)).collect();
                write!(f, "precondition violated: {}", parts.join("; "))
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ConfigError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Field path of the first problem, or `$` for whole-file errors.
    pub fn path(&self) -> String {
        match self {
            ConfigError::Parse { .. } => "$".into(),
            ConfigError::Schema { path, .. } => path.clone(),
            ConfigError::Precondition(issues) => issues.first().map(|i| i.path.clone()).unwrap_or_default(),
        }
    }
}

fn body<T: DeserializeOwned>(map: Map<String, Value>) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." { "$".to_string() } else { path };
        ConfigError::schema(path, e.into_inner().to_string())
    })
}

/// Parse the text of a configuration file. `fallback` supplies the kind
/// when the file has no `kind` field.
pub fn parse_config(text: &str, fallback: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(mut map) = value else {
        return Err(ConfigError::schema("$", "top level must be an object"));
    };
    let kind = match map.remove("kind") {
        Some(Value::String(s)) => ExperimentKind::from_name(&s).ok_or_else(|| {
            let names: Vec<&str> = ExperimentKind::ALL.iter().map(|k| k.name()).collect();
            ConfigError::schema("kind", format!("unknown kind `{s}`, expected one of {}", names.join(", ")))
        })?,
        Some(_) => return Err(ConfigError::schema("kind", "must be a string")),
        None => fallback.ok_or_else(|| ConfigError::schema("kind", "missing field `kind`"))?,
    };
    let output = match map.remove("output") {
        Some(Value::String(s)) => Some(s),
        Some(Value::Null) | None => None,
        Some(_) => return Err(ConfigError::schema("output", "must be a string")),
    };
    let experiment = match kind {
        ExperimentKind::SpectrumSweep => Experiment::Spectrum(body(map)?),
        ExperimentKind::QuadraticSim => Experiment::Sim(body(map)?),
        ExperimentKind::HypocoercivityReport => Experiment::Hypo(body(map)?),
        ExperimentKind::PreconditionSweep => Experiment::Precond(body(map)?),
        ExperimentKind::MeanfieldRun => Experiment::Meanfield(body(map)?),
        ExperimentKind::CouplingRun => Experiment::Coupling(body(map)?),
        ExperimentKind::RatesReport => Experiment::Rates(body(map)?),
        ExperimentKind::AveragingRun => Experiment::Averaging(body(map)?),
    };
    Ok(ExperimentConfig {
        kind,
        output,
        experiment,
    })
}

/// Parse and check every precondition without running anything.
pub fn load_config(text: &str, fallback: Option<ExperimentKind>) -> Result<ExperimentConfig, ConfigError> {
    let cfg = parse_config(text, fallback)?;
    let issues = validate_config(&cfg);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Precondition(issues))
    }
}

struct Checker {
    issues: Vec<Issue>,
}

impl Checker {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            path: path.into(),
            message: message.into(),
        });
    }

    fn finite(&mut self, path: &str, v: f64) -> bool {
        if !v.is_finite() {
            self.push(path, "must be finite");
            return false;
        }
        true
    }

    fn positive(&mut self, path: &str, v: f64, name: &str) {
        if self.finite(path, v) && v <= 0.0 {
            self.push(path, format!("{name} > 0 required, got {v}"));
        }
    }

    fn nonneg(&mut self, path: &str, v: f64, name: &str) {
        if self.finite(path, v) && v < 0.0 {
            self.push(path, format!("{name} >= 0 required, got {v}"));
        }
    }

    fn at_least(&mut self, path: &str, v: usize, min: usize) {
        if v < min {
            self.push(path, format!("must be at least {min}, got {v}"));
        }
    }

    /// Expanded grid with every value checked by `each`.
    fn grid(&mut self, path: &str, grid: &Grid, name: &str, ascending: bool) -> Vec<f64> {
        let values = match grid.values() {
            Ok(v) => v,
            Err(e) => {
                self.push(path, e);
                return Vec::new();
            }
        };
        if values.is_empty() {
            self.push(path, "grid is empty");
        }
        if values.len() > MAX_GRID_LEN {
            self.push(path, format!("more than {MAX_GRID_LEN} values"));
        }
        for (i, v) in values.iter().enumerate() {
            let p = match grid {
                Grid::List(_) => format!("{path}[{i}]"),
                _ => path.to_string(),
            };
            self.positive(&p, *v, name);
        }
        if ascending && values.windows(2).any(|w| w[1] <= w[0]) {
            self.push(path, "values must be strictly ascending");
        }
        values
    }

    fn matrix(&mut self, path: &str, rows: &[Vec<f64>]) -> Option<(usize, usize)> {
        if rows.is_empty() || rows[0].is_empty() {
            self.push(path, "matrix must be nonempty");
            return None;
        }
        let cols = rows[0].len();
        let mut ok = true;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                self.push(format!("{path}[{i}]"), format!("row has {} entries, expected {cols}", row.len()));
                ok = false;
            }
            for (j, v) in row.iter().enumerate() {
                ok &= self.finite(&format!("{path}[{i}][{j}]"), *v);
            }
        }
        ok.then_some((rows.len(), cols))
    }

    /// Shape checks only; symmetry and semidefiniteness are left to the
    /// library, which reports them as numerical errors.
    fn game(&mut self, path: &str, game: &GameSpec) -> Option<(usize, usize)> {
        match game {
            GameSpec::Explicit { q, r, p } => {
                let sq = self.matrix(&format!("{path}.q"), q);
                let sr = self.matrix(&format!("{path}.r"), r);
                let sp = self.matrix(&format!("{path}.p"), p);
                let (sq, sr, sp) = (sq?, sr?, sp?);
                let mut ok = true;
                if sq.0 != sq.1 {
                    self.push(format!("{path}.q"), "must be square");
                    ok = false;
                }
                if sr.0 != sr.1 {
                    self.push(format!("{path}.r"), "must be square");
                    ok = false;
                }
                if sp != (sq.0, sr.0) {
                    self.push(format!("{path}.p"), format!("must be {} x {}", sq.0, sr.0));
                    ok = false;
                }
                ok.then_some((sq.0, sr.0))
            }
            GameSpec::Random { random } => {
                let p = format!("{path}.random");
                self.at_least(&format!("{p}.n"), random.n, 1);
                self.at_least(&format!("{p}.m"), random.m, 1);
                if let Some(k) = random.inner {
                    self.at_least(&format!("{p}.inner"), k, 1);
                }
                if random.n > 200 || random.m > 200 {
                    self.push(p, "dense games are limited to 200 x 200 blocks");
                    return None;
                }
                Some((random.n, random.m))
            }
        }
    }

    fn vector(&mut self, path: &str, v: &Option<Vec<f64>>, len: Option<usize>) {
        if let Some(v) = v {
            for (i, x) in v.iter().enumerate() {
                self.finite(&format!("{path}[{i}]"), *x);
            }
            if let Some(len) = len {
                if v.len() != len {
                    self.push(path, format!("expected {len} entries, got {}", v.len()));
                }
            }
            if v.iter().all(|x| *x == 0.0) {
                self.push(path, "must be nonzero");
            }
        }
    }

    fn kernel(&mut self, path: &str, k: &KernelSpec) {
        self.positive(&format!("{path}.kappa_x"), k.kappa_x, "kappa_x");
        self.positive(&format!("{path}.kappa_y"), k.kappa_y, "kappa_y");
        self.nonneg(&format!("{path}.a"), k.a, "a");
        self.nonneg(&format!("{path}.eps"), k.eps, "eps");
        self.nonneg(&format!("{path}.omega"), k.omega, "omega");
        if k.dim == 0 || k.dim > 64 {
            self.push(format!("{path}.dim"), "1 <= dim <= 64 required");
        }
    }

    fn mne(&mut self, path: &str, m: &Option<MneGridSpec>, dim: usize) {
        let Some(m) = m else { return };
        if !(m.lo.is_finite() && m.hi.is_finite() && m.hi > m.lo) {
            self.push(format!("{path}.hi"), "hi > lo required");
        }
        self.at_least(&format!("{path}.points"), m.points, 2);
        if (m.points as f64).powi(dim as i32) > 4096.0 {
            self.push(format!("{path}.points"), "grid MNE is limited to 4096 points per side");
        }
        self.positive(&format!("{path}.tol"), m.tol, "tol");
        if !(m.damping > 0.0 && m.damping <= 1.0) {
            self.push(format!("{path}.damping"), "0 < damping <= 1 required");
        }
    }

    fn seeds(&mut self, seeds: &[u64]) {
        if seeds.is_empty() {
            self.push("seeds", "at least one seed required");
        }
        if seeds.len() > 4096 {
            self.push("seeds", "at most 4096 seeds");
        }
    }

    fn particles(&mut self, n: usize, beta: f64, dt: f64, horizon: f64, record_every: usize) {
        self.at_least("n", n, 1);
        if n > 100_000 {
            self.push("n", "at most 100000 particles");
        }
        self.positive("beta", beta, "beta");
        self.positive("dt", dt, "dt");
        self.positive("horizon", horizon, "horizon");
        self.at_least("record_every", record_every, 1);
        if dt > 0.0 && horizon / dt > 1e8 {
            self.push("dt", "more than 1e8 steps");
        }
    }
}

/// Every precondition violation in `cfg`; empty when the run may start.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Issue> {
    let mut c = Checker { issues: Vec::new() };
    let eta_name = "η";
    match &cfg.experiment {
        Experiment::Spectrum(s) => {
            c.game("game", &s.game);
            c.grid("eta", &s.eta, eta_name, false);
        }
        Experiment::Sim(s) => {
            let dims = c.game("game", &s.game);
            c.grid("eta", &s.eta, eta_name, false);
            c.vector("x0", &s.x0, dims.map(|d| d.0));
            c.vector("y0", &s.y0, dims.map(|d| d.1));
            c.positive("horizon", s.horizon, "horizon");
            c.at_least("samples", s.samples, 10);
            if s.samples > 1_000_000 {
                c.push("samples", "at most 1000000 samples");
            }
        }
        Experiment::Hypo(h) => {
            c.game("game", &h.game);
            c.grid("eta", &h.eta, eta_name, false);
        }
        Experiment::Precond(p) => {
            let dims = c.game("game", &p.game);
            c.grid("eta", &p.eta, eta_name, false);
            c.at_least("steps", p.steps, 1);
            if p.steps > 1_000_000 {
                c.push("steps", "at most 1000000 steps");
            }
            c.vector("xi0", &p.xi0, dims.map(|d| d.0 + d.1));
        }
        Experiment::Meanfield(m) => {
            c.kernel("kernel", &m.kernel);
            c.particles(m.n, m.beta, m.dt, m.horizon, m.record_every);
            c.positive("eta", m.eta, eta_name);
            c.seeds(&m.seeds);
            c.finite("center[0]", m.center.0);
            c.finite("center[1]", m.center.1);
            c.nonneg("spread", m.spread, "spread");
            c.mne("mne", &m.mne, m.kernel.dim);
            if m.mne.is_some() && m.n > 2000 && m.kernel.dim > 1 {
                c.push("n", "W1 against the MNE in dim > 1 is limited to 2000 particles");
            }
        }
        Experiment::Coupling(k) => {
            c.kernel("kernel", &k.kernel);
            c.particles(k.n, k.beta, k.dt, k.horizon, k.record_every);
            c.grid("eta", &k.eta, eta_name, false);
            if let Some(g) = k.gamma {
                c.positive("gamma", g, "γ");
            }
            c.positive("delta", k.delta, "δ");
            c.seeds(&k.seeds);
            for (p, v) in [("primary", k.primary), ("mirror", k.mirror)] {
                c.finite(&format!("{p}[0]"), v.0);
                c.finite(&format!("{p}[1]"), v.1);
            }
            c.nonneg("spread", k.spread, "spread");
            c.mne("mne", &k.mne, k.kernel.dim);
            if k.mne.is_some() && k.n > 2000 && k.kernel.dim > 1 {
                c.push("n", "W1 against the MNE in dim > 1 is limited to 2000 particles");
            }
        }
        Experiment::Rates(r) => {
            c.positive("a", r.a, "a");
            c.positive("b", r.b, "b");
            match &r.profile {
                ProfileSpec::Constant { k } => c.positive("profile.constant.k", *k, "K"),
                ProfileSpec::Piecewise { m, k, radius } => {
                    c.nonneg("profile.piecewise.m", *m, "m");
                    c.positive("profile.piecewise.k", *k, "K");
                    c.nonneg("profile.piecewise.radius", *radius, "R");
                }
                ProfileSpec::Benchmark { kappa, eps, omega } => {
                    c.positive("profile.benchmark.kappa", *kappa, "kappa");
                    c.nonneg("profile.benchmark.eps", *eps, "eps");
                    c.nonneg("profile.benchmark.omega", *omega, "omega");
                }
            }
        }
        Experiment::Averaging(a) => {
            let dims = c.game("game", &a.game);
            if let Some((n, m)) = dims {
                if n != m {
                    c.push("game.p", "averaging needs a square interaction block");
                }
            }
            c.grid("gamma", &a.gamma, "γ", true);
            c.vector("v0", &a.v0, dims.map(|d| d.0 + d.1));
        }
    }
    c.issues
}
