//! Experiment configuration: a flat, sectioned `key = value` format.
//!
//! ```text
//! # comment
//! experiment = pinn-decay
//! preset = singular
//!
//! [train]
//! epochs = 1500
//! hidden = 32, 32
//!
//! [problem]
//! rate = fuzzy(-0.6, -0.5, -0.4)
//! ```
//!
//! Keys before the first section header are top-level. Every key is
//! checked against the experiment's schema, every number is range-checked,
//! and all problems are reported at once, each with its line number.

use std::fmt;

use prinn_core::controlsim::{LoopConfig, PlantKind, Reference};
use prinn_core::fuzzy::{MembershipFunction, Rule, RuleSet, SNorm, TNorm, TriangularFuzzyNumber};
use prinn_core::losses::{ImpreciseOde, PerceptionProblem, Preset, Uncertain};
use prinn_core::train::{Collocation, CollocationStrategy, TrainConfig};
use prinn_core::Normal;

use crate::registry::Experiment;

const SECTIONS: [&str; 5] = ["train", "problem", "oracle", "controller", "output"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based; `None` for whole-file and command-line problems.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in one config.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Clone, Debug)]
struct Entry {
    section: String,
    key: String,
    value: String,
    /// 0 marks a command-line override.
    line: usize,
}

impl Entry {
    fn path(&self) -> String {
        if self.section.is_empty() {
            self.key.clone()
        } else {
            format!("{}.{}", self.section, self.key)
        }
    }

    fn line(&self) -> Option<usize> {
        (self.line > 0).then_some(self.line)
    }
}

fn lex(text: &str, errors: &mut Vec<ConfigError>) -> Vec<Entry> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                errors.push(ConfigError { line: Some(line), message: format!("malformed section header `{content}`") });
                continue;
            };
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                errors.push(ConfigError {
                    line: Some(line),
                    message: format!("unknown section `[{name}]` (expected one of {})", SECTIONS.join(", ")),
                });
            }
            section = name.to_string();
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            errors.push(ConfigError { line: Some(line), message: format!("expected `key = value`, got `{content}`") });
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            errors.push(ConfigError { line: Some(line), message: format!("invalid key `{key}`") });
            continue;
        }
        if value.is_empty() {
            errors.push(ConfigError { line: Some(line), message: format!("key `{key}` has an empty value") });
            continue;
        }
        let entry = Entry { section: section.clone(), key: key.to_string(), value: value.to_string(), line };
        if let Some(first) = entries.iter().find(|e| e.section == entry.section && e.key == entry.key) {
            errors.push(ConfigError {
                line: Some(line),
                message: format!("duplicate key `{}` (lines {} and {line})", entry.path(), first.line),
            });
            continue;
        }
        entries.push(entry);
    }
    entries
}

/// `name(a, b, ...)` with numeric arguments.
fn call(s: &str) -> Result<(&str, Vec<f64>), String> {
    let open = s.find('(').ok_or_else(|| format!("expected `name(...)`, got `{s}`"))?;
    let inner = s[open + 1..].strip_suffix(')').ok_or_else(|| format!("missing `)` in `{s}`"))?;
    let args = if inner.trim().is_empty() { Vec::new() } else { inner.split(',').map(number).collect::<Result<_, _>>()? };
    Ok((s[..open].trim(), args))
}

fn arity(name: &str, args: &[f64], n: usize) -> Result<(), String> {
    if args.len() == n {
        Ok(())
    } else {
        Err(format!("`{name}` takes {n} argument(s), got {}", args.len()))
    }
}

pub(crate) fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{}` is not a number", s.trim()))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{}` is not finite", s.trim()))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive, got {v}"))
    }
}

fn unit(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1], got {v}"))
    }
}

fn count(s: &str) -> Result<usize, String> {
    s.trim().parse().map_err(|_| format!("`{}` is not a nonnegative integer", s.trim()))
}

fn at_least(min: usize) -> impl Fn(&str) -> Result<usize, String> {
    move |s| {
        let v = count(s)?;
        if v >= min {
            Ok(v)
        } else {
            Err(format!("must be at least {min}, got {v}"))
        }
    }
}

fn seed(s: &str) -> Result<u64, String> {
    s.trim().parse().map_err(|_| format!("`{}` is not a valid seed", s.trim()))
}

fn list<T>(item: impl Fn(&str) -> Result<T, String>) -> impl Fn(&str) -> Result<Vec<T>, String> {
    move |s| s.split(',').map(&item).collect()
}

fn widths(s: &str) -> Result<Vec<usize>, String> {
    list(at_least(1))(s)
}

fn fuzzy(a: f64, b: f64, c: f64) -> Result<TriangularFuzzyNumber<f64>, String> {
    TriangularFuzzyNumber::new(a, b, c).map_err(|e| e.to_string())
}

fn normal(m: f64, v: f64) -> Result<Normal<f64>, String> {
    Normal::new(m, v).map_err(|e| e.to_string())
}

/// `5`, `fuzzy(a, b, c)`, `normal(mean, variance)`, `z(a, b, c, mean,
/// variance)` or `unknown(guess)`.
pub fn uncertain(s: &str) -> Result<Uncertain<f64>, String> {
    if !s.trim_start().starts_with(|c: char| c.is_ascii_alphabetic()) {
        return number(s).map(Uncertain::Crisp);
    }
    let (name, a) = call(s)?;
    match name {
        "fuzzy" => arity(name, &a, 3).and_then(|_| Ok(Uncertain::Fuzzy(fuzzy(a[0], a[1], a[2])?))),
        "normal" => arity(name, &a, 2).and_then(|_| Ok(Uncertain::Random(normal(a[0], a[1])?))),
        "z" => arity(name, &a, 5).and_then(|_| Ok(Uncertain::Z(fuzzy(a[0], a[1], a[2])?, normal(a[3], a[4])?))),
        "unknown" => arity(name, &a, 1).map(|_| Uncertain::Unknown(a[0])),
        _ => Err(format!("unknown distribution `{name}` (expected fuzzy, normal, z or unknown)")),
    }
}

/// `tri(a, b, c)`, `trap(a, b, c, d)` or `gauss(center, width)`.
pub fn membership(s: &str) -> Result<MembershipFunction<f64>, String> {
    let (name, a) = call(s.trim())?;
    let r = match name {
        "tri" => arity(name, &a, 3).and_then(|_| MembershipFunction::triangular(a[0], a[1], a[2]).map_err(|e| e.to_string())),
        "trap" => {
            arity(name, &a, 4).and_then(|_| MembershipFunction::trapezoidal(a[0], a[1], a[2], a[3]).map_err(|e| e.to_string()))
        }
        "gauss" => arity(name, &a, 2).and_then(|_| MembershipFunction::gaussian(a[0], a[1]).map_err(|e| e.to_string())),
        _ => Err(format!("unknown membership shape `{name}` (expected tri, trap or gauss)")),
    };
    r
}

/// `A & B -> C`.
pub fn rule(s: &str) -> Result<Rule<f64>, String> {
    let (lhs, rhs) = s.split_once("->").ok_or_else(|| format!("expected `antecedent -> consequent`, got `{s}`"))?;
    let antecedents = lhs.split('&').map(membership).collect::<Result<Vec<_>, _>>()?;
    Ok(Rule::new(antecedents, membership(rhs)?))
}

/// `t:x, t:x, ...`.
pub fn data(s: &str) -> Result<Vec<(f64, f64)>, String> {
    s.split(',')
        .map(|p| {
            let (t, x) = p.split_once(':').ok_or_else(|| format!("expected `t:x`, got `{}`", p.trim()))?;
            Ok((number(t)?, number(x)?))
        })
        .collect()
}

fn plant(s: &str) -> Result<PlantKind<f64>, String> {
    let (name, a) = call(s.trim())?;
    let kind = match name {
        "first-order" => arity(name, &a, 2).map(|_| PlantKind::FirstOrder { gain: a[0], tau: a[1] })?,
        "second-order" => arity(name, &a, 2).map(|_| PlantKind::SecondOrder { omega: a[0], zeta: a[1] })?,
        _ => return Err(format!("unknown plant `{name}` (expected first-order or second-order)")),
    };
    match kind {
        PlantKind::FirstOrder { tau, .. } if tau <= 0.0 => Err("time constant must be positive".into()),
        PlantKind::SecondOrder { omega, zeta } if omega <= 0.0 || zeta < 0.0 => {
            Err("second-order plant needs omega > 0 and zeta >= 0".into())
        }
        k => Ok(k),
    }
}

fn reference(s: &str) -> Result<Reference<f64>, String> {
    let (name, a) = call(s.trim())?;
    match name {
        "step" => arity(name, &a, 1).map(|_| Reference::Step { amplitude: a[0] }),
        "sine" => arity(name, &a, 2).map(|_| Reference::Sine { frequency: a[0], amplitude: a[1] }),
        "ramp" => arity(name, &a, 1).map(|_| Reference::Ramp { slope: a[0] }),
        _ => Err(format!("unknown reference `{name}` (expected step, sine or ramp)")),
    }
}

fn preset(s: &str) -> Result<Preset, String> {
    s.trim().parse::<Preset>().map_err(|e| e.to_string())
}

fn strategy(s: &str) -> Result<CollocationStrategy, String> {
    CollocationStrategy::parse(s.trim()).ok_or_else(|| format!("unknown strategy `{}` (expected uniform-grid or uniform-random)", s.trim()))
}

fn tnorm(s: &str) -> Result<TNorm, String> {
    match s.trim() {
        "min" => Ok(TNorm::Min),
        "product" => Ok(TNorm::Product),
        other => Err(format!("unknown t-norm `{other}` (expected min or product)")),
    }
}

fn snorm(s: &str) -> Result<SNorm, String> {
    match s.trim() {
        "max" => Ok(SNorm::Max),
        "bounded-sum" => Ok(SNorm::BoundedSum),
        other => Err(format!("unknown s-norm `{other}` (expected max or bounded-sum)")),
    }
}

/// Consumes entries, recording errors and which keys were read.
struct Reader {
    entries: Vec<Entry>,
    used: Vec<bool>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn find(&mut self, section: &str, key: &str) -> Option<Entry> {
        let i = self.entries.iter().position(|e| e.section == section && e.key == key)?;
        self.used[i] = true;
        Some(self.entries[i].clone())
    }

    fn get<T>(&mut self, section: &str, key: &str, default: T, parse: impl Fn(&str) -> Result<T, String>) -> T {
        match self.find(section, key) {
            None => default,
            Some(e) => match parse(&e.value) {
                Ok(v) => v,
                Err(msg) => {
                    self.errors.push(ConfigError { line: e.line(), message: format!("`{}`: {msg}", e.path()) });
                    default
                }
            },
        }
    }

    fn error(&mut self, line: Option<usize>, message: String) {
        self.errors.push(ConfigError { line, message });
    }

    /// Keys of `section` with the given prefix, in file order.
    fn with_prefix(&mut self, section: &str, prefix: &str) -> Vec<Entry> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.section == section && e.key.starts_with(prefix) {
                self.used[i] = true;
                out.push(e.clone());
            }
        }
        out
    }
}

/// Numerical settings of the verification oracles.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleSettings {
    pub rk4_step: f64,
    pub envelope_density: usize,
    /// Points in the evaluation grid over the training domain.
    pub check_points: usize,
    pub mc_samples: usize,
    pub mc_workers: usize,
    pub mc_seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        OracleSettings { rk4_step: 1e-3, envelope_density: 9, check_points: 301, mc_samples: 2000, mc_workers: 4, mc_seed: 0 }
    }
}

/// A fully validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub preset: Option<Preset>,
    pub train: TrainConfig<f64>,
    pub hidden: Vec<usize>,
    /// Training problem; `None` for the controller.
    pub problem: Option<PerceptionProblem<f64>>,
    /// Pinned `(μ, α)` levels for envelope experiments.
    pub levels: Vec<f64>,
    pub alphas: Vec<f64>,
    pub controller: Option<LoopConfig<f64>>,
    pub oracle: OracleSettings,
    /// Directory under the output root.
    pub output_dir: String,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigErrors> {
        Self::parse_with_overrides(text, &[])
    }

    /// Parses `text`, then applies `section.key = value` overrides (which
    /// may add keys).
    pub fn parse_with_overrides(text: &str, overrides: &[(String, String)]) -> Result<Self, ConfigErrors> {
        let mut errors = Vec::new();
        let mut entries = lex(text, &mut errors);
        for (path, value) in overrides {
            let (section, key) = path.split_once('.').unwrap_or(("", path.as_str()));
            if !section.is_empty() && !SECTIONS.contains(&section) {
                errors.push(ConfigError { line: None, message: format!("override `{path}`: unknown section `{section}`") });
                continue;
            }
            entries.retain(|e| !(e.section == section && e.key == key));
            entries.push(Entry { section: section.into(), key: key.into(), value: value.clone(), line: 0 });
        }
        let used = vec![false; entries.len()];
        let mut r = Reader { entries, used, errors };

        let experiment = match r.find("", "experiment") {
            None => {
                r.error(None, "missing top-level key `experiment`".into());
                None
            }
            Some(e) => match e.value.parse::<Experiment>() {
                Ok(x) => Some(x),
                Err(msg) => {
                    r.error(e.line(), msg);
                    None
                }
            },
        };
        let Some(experiment) = experiment else {
            return Err(ConfigErrors(r.errors));
        };
        let cfg = build(experiment, &mut r);
        for (i, e) in r.entries.iter().enumerate() {
            if !r.used[i] {
                r.errors.push(ConfigError {
                    line: e.line(),
                    message: format!("unknown key `{}` for experiment {}", e.path(), experiment.name()),
                });
            }
        }
        r.errors.sort_by_key(|e| e.line.unwrap_or(usize::MAX));
        if r.errors.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigErrors(r.errors))
        }
    }
}

fn build(x: Experiment, r: &mut Reader) -> ExperimentConfig {
    let d = x.defaults();
    let preset_line = r.find("", "preset").map(|e| (e.line(), e.value));
    let preset = match (&preset_line, d.preset) {
        (None, p) => p,
        (Some((line, _)), None) => {
            r.error(*line, format!("experiment {} takes no preset", x.name()));
            None
        }
        (Some((line, v)), Some(_)) => match preset(v) {
            Ok(p) if x.presets().contains(&p) => Some(p),
            Ok(p) => {
                let allowed: Vec<_> = x.presets().iter().map(|p| p.name()).collect();
                r.error(*line, format!("preset `{}` does not fit {} (allowed: {})", p.name(), x.name(), allowed.join(", ")));
                Some(p)
            }
            Err(msg) => {
                r.error(*line, msg);
                None
            }
        },
    };

    let output_dir = r.get("output", "dir", x.name().to_string(), |s| {
        let s = s.trim();
        if s.is_empty() || s.contains("..") || s.starts_with('/') {
            Err(format!("`{s}` must be a relative path without `..`"))
        } else {
            Ok(s.to_string())
        }
    });
    let oracle = OracleSettings {
        rk4_step: r.get("oracle", "rk4_step", 1e-3, positive),
        envelope_density: r.get("oracle", "envelope_density", 9, at_least(2)),
        check_points: r.get("oracle", "check_points", 301, at_least(2)),
        mc_samples: r.get("oracle", "mc_samples", 2000, at_least(100)),
        mc_workers: r.get("oracle", "mc_workers", 4, at_least(1)),
        mc_seed: r.get("oracle", "mc_seed", 0, seed),
    };

    if x == Experiment::FinnController {
        let c = controller(r);
        return ExperimentConfig {
            experiment: x,
            preset: None,
            train: TrainConfig { seed: c.seed, learning_rate: c.learning_rate, ..TrainConfig::default() },
            hidden: c.hidden.clone(),
            problem: None,
            levels: Vec::new(),
            alphas: Vec::new(),
            controller: Some(c),
            oracle,
            output_dir,
        };
    }

    let lo = r.get("train", "domain_lo", d.domain.0, number);
    let hi = r.get("train", "domain_hi", d.domain.1, number);
    if lo >= hi {
        r.error(None, format!("training domain [{lo}, {hi}] is empty"));
    }
    let collocation = Collocation {
        count: r.get("train", "collocation_count", 101, at_least(2)),
        lo,
        hi,
        strategy: r.get("train", "collocation_strategy", CollocationStrategy::UniformGrid, strategy),
    };
    let train = TrainConfig {
        epochs: r.get("train", "epochs", d.epochs, at_least(1)),
        learning_rate: r.get("train", "learning_rate", d.learning_rate, positive),
        beta1: r.get("train", "beta1", 0.9, beta),
        beta2: r.get("train", "beta2", 0.999, beta),
        collocation,
        seed: r.get("train", "seed", 0, seed),
        early_stop: r.get("train", "early_stop", 1e-6, |s| {
            let v = number(s)?;
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(format!("must be nonnegative, got {v}"))
            }
        }),
    };
    let hidden = r.get("train", "hidden", d.hidden.clone(), widths);
    let points = collocation.sample(train.seed).unwrap_or_else(|_| vec![lo]);
    let preset = preset.expect("trained experiments have a preset");
    let mut problem = PerceptionProblem::new(preset, points);
    problem.t0 = r.get("problem", "t0", lo, number);
    if problem.t0 < lo || problem.t0 > hi {
        r.error(None, format!("t0 = {} lies outside the training domain", problem.t0));
    }
    problem.possibility_m = r.get("problem", "possibility_m", 10.0, |s| {
        let v = number(s)?;
        if v > 1.0 {
            Ok(v)
        } else {
            Err(format!("must exceed 1, got {v}"))
        }
    });
    problem.rule_m = r.get("problem", "rule_m", 5.0, |s| {
        let v = number(s)?;
        if v >= 1.0 {
            Ok(v)
        } else {
            Err(format!("must be at least 1, got {v}"))
        }
    });
    problem.data = r.get("problem", "data", d.data.clone(), data);
    for e in r.with_prefix("problem", "weight_") {
        match number(&e.value) {
            Ok(w) if w >= 0.0 => problem.weights.push((e.key["weight_".len()..].to_string(), w)),
            _ => r.error(e.line(), format!("`{}` must be a nonnegative number", e.path())),
        }
    }
    let mut levels = Vec::new();
    let mut alphas = Vec::new();

    match x {
        Experiment::PinnDecay | Experiment::FcinnDecay => {
            let rate = r.get("problem", "rate", d.rate, uncertain);
            let x0 = r.get("problem", "x0", Uncertain::Crisp(5.0), uncertain);
            problem.ode = Some(ImpreciseOde::ExpDecay { rate, x0 });
            if x == Experiment::FcinnDecay {
                levels = r.get("problem", "levels", vec![0.0, 0.5, 1.0], list(unit));
                alphas = r.get("problem", "alphas", vec![0.0, 1.0], list(unit));
            } else {
                problem.pin_mu = r.get("problem", "mu", None, |s| unit(s).map(Some));
            }
        }
        Experiment::SinnetOscillator => {
            let zeta = r.get("problem", "zeta", d.rate, uncertain);
            let omega = r.get("problem", "omega", 2.0, positive);
            let x0 = r.get("problem", "x0", Uncertain::Crisp(2.0), uncertain);
            let v0 = r.get("problem", "v0", Uncertain::Crisp(0.0), uncertain);
            problem.ode = Some(ImpreciseOde::DampedOscillator { zeta, omega, x0, v0 });
            problem.pin_mu = r.get("problem", "mu", None, |s| unit(s).map(Some));
            let n = r.get("problem", "data_points", 11, count);
            if problem.data.is_empty() && n > 0 {
                if let Some(ImpreciseOde::DampedOscillator { zeta, omega, x0, v0 }) = problem.ode {
                    problem.data = modal_oscillator_data(zeta.modal(), omega, x0.modal(), v0.modal(), problem.t0, lo, hi, n);
                }
            }
        }
        Experiment::FinnCase1 | Experiment::FinnDerivativeCase2 => {
            let mut rules = Vec::new();
            let entries = r.with_prefix("problem", "rule");
            for e in entries.iter().filter(|e| e.key != "rule_m") {
                if e.key.len() == 4 || !e.key[4..].chars().all(|c| c.is_ascii_digit()) {
                    r.error(e.line(), format!("unknown key `{}` (rules are named rule1, rule2, ...)", e.path()));
                    continue;
                }
                match rule(&e.value) {
                    Ok(rule) => rules.push(rule),
                    Err(msg) => r.error(e.line(), format!("`{}`: {msg}", e.path())),
                }
            }
            if entries.iter().all(|e| e.key == "rule_m") {
                rules = d.rules.clone();
            }
            let t = r.get("problem", "tnorm", d.tnorm, tnorm);
            let s = r.get("problem", "snorm", d.snorm, snorm);
            match RuleSet::new(rules, t, s) {
                Ok(rs) if rs.arity() == 1 => problem.rules = Some(rs),
                Ok(rs) => r.error(None, format!("rules must have exactly one antecedent (time), got {}", rs.arity())),
                Err(e) => r.error(None, format!("rule set: {e}")),
            }
        }
        Experiment::FinnController => unreachable!("handled above"),
    }
    if let Some(mu) = problem.pin_mu {
        // a pinned μ only matters for μ-aware presets
        if !preset.uses_mu() {
            r.error(None, format!("`problem.mu = {mu}` needs a preset that learns mu"));
        }
    }
    if let Err(e) = problem.validate() {
        r.error(None, format!("problem: {e}"));
    }
    ExperimentConfig { experiment: x, preset: Some(preset), train, hidden, problem: Some(problem), levels, alphas, controller: None, oracle, output_dir }
}

fn beta(s: &str) -> Result<f64, String> {
    let v = number(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1), got {v}"))
    }
}

#[allow(clippy::too_many_arguments)]
fn modal_oscillator_data(zeta: f64, omega: f64, x0: f64, v0: f64, t0: f64, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
    let ode = prinn_core::CrispOde::Oscillator { zeta, omega, x0, v0 };
    (0..n)
        .filter_map(|i| {
            let t = if n == 1 { lo } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
            ode.analytic(t0, t).ok().map(|x| (t, x))
        })
        .collect()
}

fn controller(r: &mut Reader) -> LoopConfig<f64> {
    let d = LoopConfig::<f64>::default();
    let c = LoopConfig {
        plant: r.get("controller", "plant", d.plant, plant),
        dt: r.get("controller", "dt", d.dt, positive),
        steps: r.get("controller", "steps", d.steps, at_least(1)),
        reference: r.get("controller", "reference", d.reference, reference),
        y0: r.get("controller", "y0", d.y0, number),
        error_gain: r.get("controller", "error_gain", d.error_gain, positive),
        derivative_gain: r.get("controller", "derivative_gain", d.derivative_gain, positive),
        control_gain: r.get("controller", "control_gain", d.control_gain, positive),
        penalty: r.get("controller", "penalty", d.penalty, |s| {
            let v = number(s)?;
            if v >= 1.0 {
                Ok(v)
            } else {
                Err(format!("must be at least 1, got {v}"))
            }
        }),
        hidden: r.get("controller", "hidden", d.hidden.clone(), widths),
        learning_rate: r.get("controller", "learning_rate", d.learning_rate, positive),
        beta1: r.get("controller", "beta1", d.beta1, beta),
        beta2: r.get("controller", "beta2", d.beta2, beta),
        updates_per_step: r.get("controller", "updates_per_step", d.updates_per_step, at_least(1)),
        seed: r.get("controller", "seed", d.seed, seed),
        divergence_bound: r.get("controller", "divergence_bound", d.divergence_bound, positive),
    };
    if let Err(e) = c.validate() {
        r.error(None, format!("controller: {e}"));
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_grammar() {
        assert_eq!(uncertain("5").unwrap(), Uncertain::Crisp(5.0));
        assert!(matches!(uncertain("fuzzy(-0.6, -0.5, -0.4)").unwrap(), Uncertain::Fuzzy(_)));
        assert!(matches!(uncertain("z(0.15,0.2,0.25,0.2,0.01)").unwrap(), Uncertain::Z(..)));
        assert_eq!(uncertain("unknown(1.5)").unwrap(), Uncertain::Unknown(1.5));
        assert!(uncertain("fuzzy(0.05, 0.65, 0.1)").unwrap_err().contains("not nondecreasing"));
        assert!(uncertain("normal(0, -1)").unwrap_err().contains("variance must be positive"));
        assert!(uncertain("normal(0)").unwrap_err().contains("takes 2"));
        assert!(uncertain("beta(1, 2)").is_err());
        assert!(uncertain("nan").is_err());
        assert_eq!(data("0:8, 10:4").unwrap(), vec![(0.0, 8.0), (10.0, 4.0)]);
        assert!(data("0-8").is_err());
        let rl = rule("tri(0, 0, 10) -> gauss(8, 2)").unwrap();
        assert_eq!(rl.arity(), 1);
        assert_eq!(rule("tri(0,0,1) & tri(0,1,1) -> tri(0,1,1)").unwrap().arity(), 2);
        assert!(rule("tri(0, 0, 10)").is_err());
        assert_eq!(list(unit)("0, 0.5, 1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(list(unit)("0, 1.5").is_err());
    }

    #[test]
    fn lexer_reports_structure_errors() {
        let mut errors = Vec::new();
        let entries = lex("a = 1\n[bogus]\nno equals\n[train]\nepochs = \nepochs = 3\nepochs = 4\n", &mut errors);
        assert_eq!(entries.len(), 2);
        let msgs: Vec<String> = errors.iter().map(|e| e.to_string()).collect();
        assert!(msgs[0].starts_with("line 2: unknown section"));
        assert!(msgs[1].starts_with("line 3: expected `key = value`"));
        assert!(msgs[2].starts_with("line 5:") && msgs[2].contains("empty value"));
        assert_eq!(msgs[3], "line 7: duplicate key `train.epochs` (lines 6 and 7)");
    }
}
