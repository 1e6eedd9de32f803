//! Flat `key = value` experiment configs.
//!
//! ```text
//! # pure bilinear run
//! experiment = quad_bilinear
//! c_q = 0
//! solvers = rhm_sd, rgda
//! rhm_sd.step = fixed
//! rhm_sd.eta = 0.001
//! ```
//!
//! Problem keys only apply to the experiments that use them; anything else
//! is rejected. Keys of the form `<solver>.<field>` tune one solver; they
//! are checked but ignored when that solver is not in `solvers`.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rhm_core::solvers::RcegPoints;
use rhm_core::{Method, SolverConfig, StepRule};

use crate::format::fmt_f64;
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Self { key: key.into(), reason: reason.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    QuadBilinear,
    Tracelog,
    Rgpca,
    Srwd,
    StochasticQb,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::QuadBilinear,
        Experiment::Tracelog,
        Experiment::Rgpca,
        Experiment::Srwd,
        Experiment::StochasticQb,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Experiment::QuadBilinear => "quad_bilinear",
            Experiment::Tracelog => "tracelog",
            Experiment::Rgpca => "rgpca",
            Experiment::Srwd => "srwd",
            Experiment::StochasticQb => "stochastic_qb",
        }
    }

    /// Problem keys this experiment reads.
    pub fn problem_keys(&self) -> &'static [&'static str] {
        match self {
            Experiment::QuadBilinear => &["d", "c_q", "c_l"],
            Experiment::StochasticQb => &["d", "c_q", "c_l", "n", "spread"],
            Experiment::Tracelog => &["d", "anchors", "mu0", "mu1"],
            Experiment::Rgpca => &["d", "n", "alpha", "mu0", "mu1"],
            Experiment::Srwd => &["n", "d", "k", "r", "eps"],
        }
    }

    pub fn default_solvers(&self) -> Vec<Method> {
        match self {
            Experiment::StochasticQb => vec![Method::RhmSgd],
            _ => vec![Method::RhmSd],
        }
    }

    /// Whether `method` can run on this experiment.
    pub fn supports(&self, method: Method) -> Result<(), String> {
        match (self, method) {
            (Experiment::Srwd, Method::Rceg) => {
                Err("rceg needs a logarithm map, which the doubly stochastic factor lacks".into())
            }
            (e, m) if m.is_stochastic() && *e != Experiment::StochasticQb => {
                Err(format!("{m} needs a finite-sum experiment (stochastic_qb)"))
            }
            _ => Ok(()),
        }
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// Trace-log anchor matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchors {
    Identity,
    /// Random SPD anchors with spectrum in `[mu0, mu1]`.
    Random,
}

/// Problem parameters. Fields outside the experiment's key set keep their
/// defaults and are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub d: usize,
    pub c_q: f64,
    pub c_l: f64,
    pub n: usize,
    pub alpha: f64,
    pub mu0: f64,
    pub mu1: f64,
    pub r: usize,
    pub k: usize,
    pub eps: f64,
    pub spread: f64,
    pub anchors: Anchors,
}

impl ProblemParams {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            d: 30,
            c_q: 1.0,
            c_l: 1.0,
            n: 8,
            alpha: 0.1,
            mu0: 0.2,
            mu1: 4.5,
            r: 5,
            k: 2,
            eps: 0.2,
            spread: 0.3,
            anchors: Anchors::Identity,
        };
        match experiment {
            Experiment::QuadBilinear => base,
            Experiment::StochasticQb => Self { d: 5, n: 16, ..base },
            Experiment::Tracelog => Self { d: 5, mu0: 0.5, mu1: 2.0, ..base },
            Experiment::Rgpca => Self { d: 10, ..base },
            Experiment::Srwd => Self { n: 100, ..base },
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "d" => self.d = parse(key, value)?,
            "c_q" => self.c_q = parse(key, value)?,
            "c_l" => self.c_l = parse(key, value)?,
            "n" => self.n = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "mu0" => self.mu0 = parse(key, value)?,
            "mu1" => self.mu1 = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "eps" => self.eps = parse(key, value)?,
            "spread" => self.spread = parse(key, value)?,
            "anchors" => {
                self.anchors = match value {
                    "identity" => Anchors::Identity,
                    "random" => Anchors::Random,
                    _ => return Err(ConfigError::new(key, format!("expected identity or random, got `{value}`"))),
                }
            }
            _ => unreachable!("problem key sets are checked by the caller"),
        }
        Ok(())
    }

    fn get(&self, key: &str) -> String {
        match key {
            "d" => self.d.to_string(),
            "c_q" => fmt_f64(self.c_q),
            "c_l" => fmt_f64(self.c_l),
            "n" => self.n.to_string(),
            "alpha" => fmt_f64(self.alpha),
            "mu0" => fmt_f64(self.mu0),
            "mu1" => fmt_f64(self.mu1),
            "r" => self.r.to_string(),
            "k" => self.k.to_string(),
            "eps" => fmt_f64(self.eps),
            "spread" => fmt_f64(self.spread),
            "anchors" => match self.anchors {
                Anchors::Identity => "identity".into(),
                Anchors::Random => "random".into(),
            },
            _ => unreachable!(),
        }
    }

    fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        let keys = experiment.problem_keys();
        let check = |key: &str, ok: bool, reason: &str| -> Result<(), ConfigError> {
            if keys.contains(&key) && !ok {
                Err(ConfigError::new(key, format!("{reason} (got {})", self.get(key))))
            } else {
                Ok(())
            }
        };
        check("d", self.d >= 1, "must be at least 1")?;
        check("c_q", self.c_q >= 0.0 && self.c_q.is_finite(), "must be nonnegative")?;
        check("c_l", self.c_l >= 0.0 && self.c_l.is_finite(), "must be nonnegative")?;
        if keys.contains(&"c_q") && self.c_q == 0.0 && self.c_l == 0.0 {
            return Err(ConfigError::new("c_l", "c_q and c_l cannot both be zero"));
        }
        check("n", self.n >= 1, "must be at least 1")?;
        check("alpha", self.alpha >= 0.0 && self.alpha.is_finite(), "must be nonnegative")?;
        check("mu0", self.mu0 > 0.0 && self.mu0.is_finite(), "must be positive")?;
        check("mu1", self.mu1 >= self.mu0 && self.mu1.is_finite(), "must be at least mu0")?;
        check("k", self.k >= 1 && self.k <= self.d, "must lie in 1..=d")?;
        check("r", self.r >= 1 && self.r <= self.d, "must lie in 1..=d")?;
        check("eps", self.eps > 0.0 && self.eps.is_finite(), "must be positive")?;
        check("spread", self.spread >= 0.0 && self.spread < 1.0, "must lie in [0, 1)")?;
        Ok(())
    }
}

/// Which Hessian-vector product the oracle uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HvpChoice {
    /// Analytic when the problem has one, finite differences otherwise.
    Auto,
    Analytic,
    Fd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: ProblemParams,
    pub solvers: Vec<SolverConfig>,
    pub seed: u64,
    pub hvp: HvpChoice,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Defaults for `experiment`.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            params: ProblemParams::defaults(experiment),
            solvers: experiment.default_solvers().into_iter().map(SolverConfig::new).collect(),
            seed: 0,
            hvp: HvpChoice::Auto,
            out: None,
        }
    }

    pub fn solver(&self, method: Method) -> Option<&SolverConfig> {
        self.solvers.iter().find(|s| s.method == method)
    }

    /// Writes every setting in the format `parse_str` reads.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.tag());
        let _ = writeln!(s, "seed = {}", self.seed);
        let hvp = match self.hvp {
            HvpChoice::Auto => "auto",
            HvpChoice::Analytic => "analytic",
            HvpChoice::Fd => "fd",
        };
        let _ = writeln!(s, "hvp = {hvp}");
        if let Some(out) = &self.out {
            let _ = writeln!(s, "out = {}", out.display());
        }
        for key in self.experiment.problem_keys() {
            let _ = writeln!(s, "{key} = {}", self.params.get(key));
        }
        let tags: Vec<_> = self.solvers.iter().map(|c| c.method.tag()).collect();
        let _ = writeln!(s, "solvers = {}", tags.join(", "));
        for c in &self.solvers {
            for (field, value) in solver_fields(c) {
                let _ = writeln!(s, "{}.{field} = {value}", c.method);
            }
        }
        s
    }
}

fn solver_fields(c: &SolverConfig) -> Vec<(&'static str, String)> {
    let mut out = Vec::new();
    match c.step {
        StepRule::Fixed { eta } => {
            out.push(("step", "fixed".into()));
            out.push(("eta", fmt_f64(eta)));
        }
        StepRule::Decaying { delta } => {
            out.push(("step", "decaying".into()));
            out.push(("delta", fmt_f64(delta)));
        }
        StepRule::Armijo { eta_bar, r1, rho } => {
            out.push(("step", "armijo".into()));
            out.push(("eta", fmt_f64(eta_bar)));
            out.push(("r1", fmt_f64(r1)));
            out.push(("rho", fmt_f64(rho)));
        }
        StepRule::StrongWolfe { eta0, r1, r2 } => {
            out.push(("step", "strong_wolfe".into()));
            out.push(("eta", fmt_f64(eta0)));
            out.push(("r1", fmt_f64(r1)));
            out.push(("r2", fmt_f64(r2)));
        }
    }
    out.push(("max_iters", c.max_iters.to_string()));
    out.push(("grad_tol", fmt_f64(c.grad_tol)));
    out.push(("gamma", fmt_f64(c.gamma)));
    out.push(("batch", c.batch_size.to_string()));
    out.push(("batch_prime", c.batch_size_prime.to_string()));
    out.push(("retraction", c.use_retraction.to_string()));
    let points = match c.rceg_points {
        RcegPoints::Extrapolated => "extrapolated",
        RcegPoints::Mixed => "mixed",
    };
    out.push(("rceg_points", points.into()));
    let tr = &c.trust_region;
    out.push(("tr_delta0", fmt_f64(tr.delta0)));
    out.push(("tr_delta_max", fmt_f64(tr.delta_max)));
    out.push(("tr_rho_accept", fmt_f64(tr.rho_accept)));
    out.push(("tr_max_inner", tr.max_inner.map_or("auto".into(), |m| m.to_string())));
    out
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| ConfigError::new(key, format!("cannot parse `{value}`")))
}

/// Splits config text into `(key, value)` pairs; duplicates are errors.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::new(line, format!("line {} is not `key = value`", lineno + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if pairs.iter().any(|(k, _)| k == key) {
            return Err(ConfigError::new(key, format!("set twice (line {})", lineno + 1)));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

/// Builds a config from file pairs with `overrides` applied on top.
pub fn build_config(pairs: &[(String, String)], overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut map: BTreeMap<&str, &str> = BTreeMap::new();
    for (k, v) in pairs.iter().chain(overrides) {
        map.insert(k, v);
    }
    let experiment: Experiment = map
        .remove("experiment")
        .ok_or_else(|| ConfigError::new("experiment", "missing"))?
        .parse()
        .map_err(|e: String| ConfigError::new("experiment", e))?;
    let mut cfg = ExperimentConfig::new(experiment);

    if let Some(v) = map.remove("seed") {
        cfg.seed = parse("seed", v)?;
    }
    if let Some(v) = map.remove("out") {
        cfg.out = Some(PathBuf::from(v));
    }
    if let Some(v) = map.remove("hvp") {
        cfg.hvp = match v {
            "auto" => HvpChoice::Auto,
            "analytic" => HvpChoice::Analytic,
            "fd" => HvpChoice::Fd,
            _ => return Err(ConfigError::new("hvp", format!("expected auto, analytic or fd, got `{v}`"))),
        };
    }
    for key in experiment.problem_keys() {
        if let Some(v) = map.remove(key) {
            cfg.params.set(key, v)?;
        }
    }
    cfg.params.validate(experiment)?;

    if let Some(v) = map.remove("solvers") {
        let mut methods: Vec<Method> = Vec::new();
        for tag in v.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let m: Method = tag.parse().map_err(|_| ConfigError::new("solvers", format!("unknown solver `{tag}`")))?;
            if methods.contains(&m) {
                return Err(ConfigError::new("solvers", format!("`{tag}` listed twice")));
            }
            methods.push(m);
        }
        if methods.is_empty() {
            return Err(ConfigError::new("solvers", "empty solver list"));
        }
        cfg.solvers = methods.into_iter().map(SolverConfig::new).collect();
    }
    for c in &cfg.solvers {
        experiment.supports(c.method).map_err(|r| ConfigError::new("solvers", r))?;
    }

    // Shared solver settings, then per-solver ones.
    for key in ["max_iters", "grad_tol", "retraction"] {
        if let Some(v) = map.remove(key) {
            for c in &mut cfg.solvers {
                set_solver_field(c, key, key, v)?;
            }
        }
    }
    for c in &mut cfg.solvers {
        let prefix = format!("{}.", c.method);
        let mut own: Vec<(&str, &str)> = map
            .iter()
            .filter(|(k, _)| k.starts_with(&prefix))
            .map(|(k, v)| (*k, *v))
            .collect();
        // The step kind resets the rule, so it goes first.
        own.sort_by_key(|(k, _)| !k.ends_with(".step"));
        for (key, v) in own {
            set_solver_field(c, key, &key[prefix.len()..], v)?;
            map.remove(key);
        }
        c.seed = cfg.seed;
        c.validate().map_err(|e| ConfigError::new(c.method.tag(), e.to_string()))?;
    }
    // Settings for solvers that are known but not selected are checked and
    // dropped, so one file can carry tuned values for a superset of solvers.
    for (key, v) in map {
        let parsed = key.split_once('.').and_then(|(tag, field)| Some((tag.parse::<Method>().ok()?, field)));
        match parsed {
            Some((method, field)) => set_solver_field(&mut SolverConfig::new(method), key, field, v)?,
            None => return Err(ConfigError::new(key, "unknown key")),
        }
    }
    Ok(cfg)
}

fn set_solver_field(c: &mut SolverConfig, key: &str, field: &str, v: &str) -> Result<(), ConfigError> {
    let unused = |what: &str| Err(ConfigError::new(key, format!("not used by the {what} step rule")));
    match field {
        "step" => {
            c.step = match v {
                "fixed" => StepRule::Fixed { eta: 1e-2 },
                "decaying" => StepRule::Decaying { delta: 1.0 },
                "armijo" => StepRule::armijo(1.0),
                "strong_wolfe" => StepRule::strong_wolfe(1.0),
                _ => {
                    return Err(ConfigError::new(
                        key,
                        format!("expected fixed, decaying, armijo or strong_wolfe, got `{v}`"),
                    ))
                }
            }
        }
        "eta" => match &mut c.step {
            StepRule::Fixed { eta } | StepRule::Armijo { eta_bar: eta, .. } | StepRule::StrongWolfe { eta0: eta, .. } => {
                *eta = parse(key, v)?
            }
            StepRule::Decaying { .. } => return unused("decaying"),
        },
        "delta" => match &mut c.step {
            StepRule::Decaying { delta } => *delta = parse(key, v)?,
            _ => return unused("current"),
        },
        "r1" => match &mut c.step {
            StepRule::Armijo { r1, .. } | StepRule::StrongWolfe { r1, .. } => *r1 = parse(key, v)?,
            _ => return unused("current"),
        },
        "r2" => match &mut c.step {
            StepRule::StrongWolfe { r2, .. } => *r2 = parse(key, v)?,
            _ => return unused("current"),
        },
        "rho" => match &mut c.step {
            StepRule::Armijo { rho, .. } => *rho = parse(key, v)?,
            _ => return unused("current"),
        },
        "max_iters" => c.max_iters = parse(key, v)?,
        "grad_tol" => c.grad_tol = parse(key, v)?,
        "gamma" => c.gamma = parse(key, v)?,
        "batch" => c.batch_size = parse(key, v)?,
        "batch_prime" => c.batch_size_prime = parse(key, v)?,
        "retraction" => c.use_retraction = parse(key, v)?,
        "rceg_points" => {
            c.rceg_points = match v {
                "extrapolated" => RcegPoints::Extrapolated,
                "mixed" => RcegPoints::Mixed,
                _ => return Err(ConfigError::new(key, format!("expected extrapolated or mixed, got `{v}`"))),
            }
        }
        "tr_delta0" => c.trust_region.delta0 = parse(key, v)?,
        "tr_delta_max" => c.trust_region.delta_max = parse(key, v)?,
        "tr_rho_accept" => c.trust_region.rho_accept = parse(key, v)?,
        "tr_max_inner" => {
            c.trust_region.max_inner = if v == "auto" { None } else { Some(parse(key, v)?) };
        }
        _ => return Err(ConfigError::new(key, "unknown key")),
    }
    Ok(())
}

/// Parses config text with `overrides` taking precedence.
pub fn parse_str(text: &str, overrides: &[(String, String)]) -> Result<ExperimentConfig, ConfigError> {
    build_config(&parse_pairs(text)?, overrides)
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path, overrides: &[(String, String)]) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(parse_str(&text, overrides)?)
}

