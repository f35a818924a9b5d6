//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use qwalk_core::lorentz::FrameSpec;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    AtLine { line: usize, msg: String },
    #[error("override '{text}': {msg}")]
    AtOverride { text: String, msg: String },
    #[error("{0}")]
    Document(String),
}

/// Where a key's value came from, for error messages.
#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Line(usize),
    Override(String),
}

impl Origin {
    fn error(&self, msg: impl Into<String>) -> ConfigError {
        match self {
            Origin::Line(line) => ConfigError::AtLine { line: *line, msg: msg.into() },
            Origin::Override(text) => ConfigError::AtOverride { text: text.clone(), msg: msg.into() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Conserve,
    Extended,
    Lorentz,
    Continuum,
    Mechanics,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Conserve => "conserve",
            Experiment::Extended => "extended",
            Experiment::Lorentz => "lorentz",
            Experiment::Continuum => "continuum",
            Experiment::Mechanics => "mechanics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoinSpec {
    Hadamard,
    Identity,
    /// θ, ξ, ζ, δ of the standard U(2) parametrization.
    Angles([f64; 4]),
    /// One Haar coin shared by all sites.
    Random(u64),
    /// Independent Haar coin per site.
    RandomField(u64),
    /// Independent Haar coin per site and step.
    Schedule(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Minus,
    Plus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Delta { site: Option<usize>, component: Polarization },
    PlaneWave { mode: i64, component: Polarization },
    Gaussian { center: f64, width: f64, mode: i64 },
    Random(u64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialSpec {
    Free,
    Constant(f64),
    Harmonic(f64),
    Quartic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub experiment: Experiment,
    pub n_sites: usize,
    pub steps: usize,
    pub coin: CoinSpec,
    pub initial_state: InitialState,
    pub frame: FrameSpec,
    pub epsilon_list: Vec<f64>,
    pub mass: f64,
    pub k: f64,
    pub t_final: f64,
    pub potential: PotentialSpec,
    pub q0: f64,
    pub p0: f64,
    pub v0: f64,
    pub solver_tol: f64,
    pub output_path: PathBuf,
}

pub const KEYS: [&str; 17] = [
    "experiment",
    "n_sites",
    "steps",
    "coin",
    "initial_state",
    "rapidity",
    "lambda",
    "epsilon_list",
    "mass",
    "k",
    "t_final",
    "potential",
    "q0",
    "p0",
    "v0",
    "solver_tol",
    "output_path",
];

/// Raw key/value pairs with their origin, before validation.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let origin = Origin::Line(line_no);
            let (key, value) = split_pair(content).map_err(|m| origin.error(m))?;
            if raw.entries.contains_key(key) {
                return Err(origin.error(format!("duplicate key '{key}'")));
            }
            raw.insert(key, value, origin)?;
        }
        Ok(raw)
    }

    /// Applies a `key=value` override, replacing any earlier value.
    pub fn apply_override(&mut self, text: &str) -> Result<(), ConfigError> {
        let origin = Origin::Override(text.to_string());
        let (key, value) = split_pair(text.trim()).map_err(|m| origin.error(m))?;
        self.insert(key, value, origin)
    }

    fn insert(&mut self, key: &str, value: &str, origin: Origin) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(origin.error(format!("unknown key '{key}'")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), origin));
        Ok(())
    }

    fn get(&self, key: &str) -> Option<(&str, &Origin)> {
        self.entries.get(key).map(|(v, o)| (v.as_str(), o))
    }

    /// Only called for keys that are present; defaults always validate.
    fn origin(&self, key: &str) -> Origin {
        self.get(key).map(|(_, o)| o.clone()).unwrap_or(Origin::Line(0))
    }

    fn parsed<T>(&self, key: &str, default: T, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        match self.get(key) {
            Some((v, origin)) => f(v).map_err(|m| origin.error(format!("{key}: {m}"))),
            None => Ok(default),
        }
    }

    pub fn validate(&self) -> Result<RunSpec, ConfigError> {
        let (exp_text, exp_origin) =
            self.get("experiment").ok_or_else(|| ConfigError::Document("experiment required".into()))?;
        let experiment = match exp_text {
            "simulate" => Experiment::Simulate,
            "conserve" => Experiment::Conserve,
            "extended" => Experiment::Extended,
            "lorentz" => Experiment::Lorentz,
            "continuum" => Experiment::Continuum,
            "mechanics" => Experiment::Mechanics,
            other => return Err(exp_origin.error(format!("unknown experiment '{other}'"))),
        };

        let n_sites = self.parsed("n_sites", 64, parse_usize)?;
        if n_sites < 4 || n_sites % 2 != 0 {
            return Err(self.origin("n_sites").error("n_sites must be even and ≥ 4"));
        }
        let steps = self.parsed("steps", 32, parse_usize)?;
        if steps < 1 {
            return Err(self.origin("steps").error("steps must be ≥ 1"));
        }

        let frame = self.frame(experiment)?;
        let epsilon_list = self.parsed("epsilon_list", vec![0.1, 0.05, 0.025], parse_list)?;
        if experiment == Experiment::Continuum && self.get("epsilon_list").is_none() {
            return Err(ConfigError::Document("epsilon_list required for the continuum experiment".into()));
        }

        Ok(RunSpec {
            experiment,
            n_sites,
            steps,
            coin: self.parsed("coin", CoinSpec::Random(1), parse_coin)?,
            initial_state: self.parsed("initial_state", InitialState::Random(1), |v| parse_initial(v, n_sites))?,
            frame,
            epsilon_list,
            mass: self.parsed("mass", 1.0, parse_f64)?,
            k: self.parsed("k", PI / 8.0, parse_f64)?,
            t_final: self.parsed("t_final", 4.0, positive)?,
            potential: self.parsed("potential", PotentialSpec::Harmonic(1.0), parse_potential)?,
            q0: self.parsed("q0", 0.6, parse_f64)?,
            p0: self.parsed("p0", 0.8, parse_f64)?,
            v0: self.parsed("v0", 0.1, positive)?,
            solver_tol: self.parsed("solver_tol", 1e-12, positive)?,
            output_path: self.parsed("output_path", PathBuf::from("qwalk-out"), |v| Ok(PathBuf::from(v)))?,
        })
    }

    fn frame(&self, experiment: Experiment) -> Result<FrameSpec, ConfigError> {
        let rapidity = self
            .get("rapidity")
            .map(|(v, o)| parse_f64(v).map_err(|m| o.error(format!("rapidity: {m}"))).map(|x| (x, o)));
        let lambda =
            self.get("lambda").map(|(v, o)| positive(v).map_err(|m| o.error(format!("lambda: {m}"))).map(|x| (x, o)));
        match (rapidity.transpose()?, lambda.transpose()?) {
            (Some((r, _)), Some((l, o))) => FrameSpec::new(r, l).map_err(|e| o.error(e.to_string())),
            (Some((r, _)), None) => Ok(FrameSpec::from_rapidity(r)),
            (None, Some((l, o))) => FrameSpec::from_lambda(l).map_err(|e| o.error(e.to_string())),
            (None, None) if experiment == Experiment::Lorentz => {
                Err(ConfigError::Document("rapidity or lambda required for the lorentz experiment".into()))
            }
            (None, None) => Ok(FrameSpec::identity()),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunSpec, ConfigError> {
    RawConfig::parse(text)?.validate()
}

fn split_pair(s: &str) -> Result<(&str, &str), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got '{s}'"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err("empty key".into());
    }
    if v.is_empty() {
        return Err(format!("empty value for '{k}'"));
    }
    Ok((k, v))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got '{v}'"))
}

fn parse_u64(v: &str) -> Result<u64, String> {
    v.parse().map_err(|_| format!("expected an unsigned seed, got '{v}'"))
}

fn parse_i64(v: &str) -> Result<i64, String> {
    v.parse().map_err(|_| format!("expected an integer, got '{v}'"))
}

fn parse_f64(v: &str) -> Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got '{v}'")),
    }
}

fn positive(v: &str) -> Result<f64, String> {
    let x = parse_f64(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be positive, got {x}"))
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>, String> {
    v.split(',').map(|s| positive(s.trim())).collect()
}

fn numbers<const N: usize>(v: &str) -> Result<[f64; N], String> {
    let xs: Vec<f64> = v.split(',').map(|s| parse_f64(s.trim())).collect::<Result<_, _>>()?;
    xs.try_into().map_err(|xs: Vec<f64>| format!("expected {N} comma-separated numbers, got {}", xs.len()))
}

fn parse_component(v: &str) -> Result<Polarization, String> {
    match v {
        "minus" | "-" => Ok(Polarization::Minus),
        "plus" | "+" => Ok(Polarization::Plus),
        _ => Err(format!("component must be minus or plus, got '{v}'")),
    }
}

fn parse_coin(v: &str) -> Result<CoinSpec, String> {
    let (kind, arg) = v.split_once(':').unwrap_or((v, ""));
    match (kind, arg) {
        ("hadamard", "") => Ok(CoinSpec::Hadamard),
        ("identity", "") => Ok(CoinSpec::Identity),
        ("angles", a) => Ok(CoinSpec::Angles(numbers::<4>(a)?)),
        ("random", s) => Ok(CoinSpec::Random(parse_u64(s)?)),
        ("random_field", s) => Ok(CoinSpec::RandomField(parse_u64(s)?)),
        ("schedule", s) => Ok(CoinSpec::Schedule(parse_u64(s)?)),
        _ => Err(format!(
            "unknown coin '{v}' (hadamard, identity, angles:θ,ξ,ζ,δ, random:SEED, random_field:SEED, schedule:SEED)"
        )),
    }
}

fn parse_initial(v: &str, n_sites: usize) -> Result<InitialState, String> {
    let mut parts = v.split(':');
    let kind = parts.next().unwrap_or("");
    let args: Vec<&str> = parts.collect();
    match (kind, args.as_slice()) {
        ("delta", []) => Ok(InitialState::Delta { site: None, component: Polarization::Minus }),
        ("delta", [site]) | ("delta", [site, _]) => {
            let site = parse_usize(site)?;
            if site >= n_sites {
                return Err(format!("delta site {site} outside 0..{n_sites}"));
            }
            let component = args.get(1).map(|c| parse_component(c)).transpose()?.unwrap_or(Polarization::Minus);
            Ok(InitialState::Delta { site: Some(site), component })
        }
        ("plane_wave", [mode]) => Ok(InitialState::PlaneWave { mode: parse_i64(mode)?, component: Polarization::Minus }),
        ("plane_wave", [mode, c]) => Ok(InitialState::PlaneWave { mode: parse_i64(mode)?, component: parse_component(c)? }),
        ("gaussian", [a]) => {
            let [center, width, mode] = numbers::<3>(a)?;
            if width <= 0.0 {
                return Err("gaussian width must be positive".into());
            }
            if mode.fract() != 0.0 {
                return Err(format!("gaussian mode must be an integer, got {mode}"));
            }
            Ok(InitialState::Gaussian { center, width, mode: mode as i64 })
        }
        ("random", [s]) => Ok(InitialState::Random(parse_u64(s)?)),
        _ => Err(format!(
            "unknown initial_state '{v}' (delta[:SITE[:minus|plus]], plane_wave:MODE[:minus|plus], gaussian:CENTER,WIDTH,MODE, random:SEED)"
        )),
    }
}

fn parse_potential(v: &str) -> Result<PotentialSpec, String> {
    let (kind, arg) = v.split_once(':').unwrap_or((v, ""));
    match (kind, arg) {
        ("free", "") => Ok(PotentialSpec::Free),
        ("quartic", "") => Ok(PotentialSpec::Quartic),
        ("constant", c) => Ok(PotentialSpec::Constant(parse_f64(c)?)),
        ("harmonic", "") => Ok(PotentialSpec::Harmonic(1.0)),
        ("harmonic", k) => Ok(PotentialSpec::Harmonic(positive(k)?)),
        _ => Err(format!("unknown potential '{v}' (free, constant:C, harmonic[:K], quartic)")),
    }
}
