//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`, `# comment` or `[section]`. Keys may appear
//! before any section header or under their own section; anything else is an
//! error. Lists are comma separated.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(line: usize, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Command {
    Dilation,
    Coherence,
    Precision,
    Measurement,
    Verify,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Dilation,
        Command::Coherence,
        Command::Precision,
        Command::Measurement,
        Command::Verify,
        Command::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Dilation => "dilation",
            Command::Coherence => "coherence",
            Command::Precision => "precision",
            Command::Measurement => "measurement",
            Command::Verify => "verify",
            Command::Sweep => "sweep",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClockSpec {
    Swp {
        d: usize,
        omega: f64,
    },
    QuasiIdeal {
        d: usize,
        omega: f64,
        sigma_bar: Option<f64>,
        m0: Option<f64>,
        n0: Option<f64>,
    },
    QubitPhase {
        omega: f64,
    },
    Idealised {
        sigma_nr: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StateSpec {
    Gaussian,
    Cat { delta_x0: f64, alpha: f64, theta: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinematicSpec {
    pub state: StateSpec,
    pub mass: f64,
    pub sigma_x: f64,
    pub x0: f64,
    pub p0: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicsSpec {
    pub g: f64,
    /// Multiplies the speed of light.
    pub c_scale: f64,
    pub times: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSpec {
    pub qs: Vec<f64>,
    pub bin: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyQuantity {
    MeanTime,
    Sigma,
    CoherenceIdentity,
}

impl VerifyQuantity {
    pub fn name(self) -> &'static str {
        match self {
            VerifyQuantity::MeanTime => "mean_time",
            VerifyQuantity::Sigma => "sigma",
            VerifyQuantity::CoherenceIdentity => "coherence_identity",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifySpec {
    pub quantity: VerifyQuantity,
    pub c_scalings: Vec<f64>,
    /// Random draws for `coherence_identity`.
    pub samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    /// `delta_x0 / sigma_x`
    DeltaRatio,
    Alpha,
    Theta,
    Time,
    Gravity,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::DeltaRatio => "delta_ratio",
            SweepParameter::Alpha => "alpha",
            SweepParameter::Theta => "theta",
            SweepParameter::Time => "t",
            SweepParameter::Gravity => "g",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        (0..n)
            .map(|k| {
                if k + 1 == n {
                    self.to
                } else {
                    self.from + (self.to - self.from) * k as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub clock: ClockSpec,
    pub kinematics: KinematicSpec,
    pub physics: PhysicsSpec,
    pub measurement: Option<MeasurementSpec>,
    pub verify: Option<VerifySpec>,
    pub sweep: Option<SweepSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Top,
    Clock,
    Kinematics,
    Physics,
    Measurement,
    Verify,
    Sweep,
}

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Top => "top level",
            Section::Clock => "clock",
            Section::Kinematics => "kinematics",
            Section::Physics => "physics",
            Section::Measurement => "measurement",
            Section::Verify => "verify",
            Section::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Section::Clock,
            Section::Kinematics,
            Section::Physics,
            Section::Measurement,
            Section::Verify,
            Section::Sweep,
        ]
        .into_iter()
        .find(|x| x.name() == s)
    }
}

const KEYS: &[(&str, Section)] = &[
    ("command", Section::Top),
    ("seed", Section::Top),
    ("clock", Section::Clock),
    ("d", Section::Clock),
    ("omega", Section::Clock),
    ("sigma_bar", Section::Clock),
    ("m0", Section::Clock),
    ("n0", Section::Clock),
    ("sigma_nr", Section::Clock),
    ("kstate", Section::Kinematics),
    ("mass", Section::Kinematics),
    ("sigma_x", Section::Kinematics),
    ("x0", Section::Kinematics),
    ("p0", Section::Kinematics),
    ("delta_x0", Section::Kinematics),
    ("alpha", Section::Kinematics),
    ("theta", Section::Kinematics),
    ("g", Section::Physics),
    ("c_scale", Section::Physics),
    ("t", Section::Physics),
    ("q", Section::Measurement),
    ("bin", Section::Measurement),
    ("quantity", Section::Verify),
    ("c_scalings", Section::Verify),
    ("samples", Section::Verify),
    ("parameter", Section::Sweep),
    ("from", Section::Sweep),
    ("to", Section::Sweep),
    ("points", Section::Sweep),
];

fn home(key: &str) -> Option<Section> {
    KEYS.iter().find(|(k, _)| *k == key).map(|&(_, s)| s)
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Raw {
    entries: BTreeMap<&'static str, Entry>,
    headers: BTreeMap<Section, usize>,
    last_line: usize,
}

impl Raw {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut headers = BTreeMap::new();
        let mut section = Section::Top;
        let mut last_line = 0;
        for (i, full) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let body = full.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return err(line, format!("malformed section header `{body}`"));
                };
                let name = name.trim();
                let Some(s) = Section::parse(name) else {
                    return err(line, format!("unknown section `[{name}]`"));
                };
                if headers.insert(s, line).is_some() {
                    return err(line, format!("duplicate section `[{name}]`"));
                }
                section = s;
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return err(line, format!("expected `key = value`, got `{body}`"));
            };
            let (key, value) = (key.trim(), value.trim());
            let Some((&name, _)) = KEYS.iter().find(|(k, _)| *k == key).map(|(k, s)| (k, s)) else {
                return err(line, format!("unknown key `{key}`"));
            };
            let h = home(name).expect("key table");
            if section != Section::Top && section != h {
                return err(
                    line,
                    format!("key `{key}` belongs in [{}], not [{}]", h.name(), section.name()),
                );
            }
            if value.is_empty() {
                return err(line, format!("key `{key}` has no value"));
            }
            if entries.contains_key(name) {
                return err(line, format!("duplicate key `{key}`"));
            }
            entries.insert(
                name,
                Entry {
                    value: value.to_string(),
                    line,
                    used: false,
                },
            );
        }
        Ok(Raw {
            entries,
            headers,
            last_line: last_line.max(1),
        })
    }

    fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn has_section(&self, s: Section) -> bool {
        self.headers.contains_key(&s) || KEYS.iter().any(|&(k, h)| h == s && self.has(k))
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn missing(&self, key: &str) -> ConfigError {
        let s = home(key).expect("key table");
        let line = self.headers.get(&s).copied().unwrap_or(self.last_line);
        ConfigError {
            line,
            message: format!("missing required key `{key}` in [{}]", s.name()),
        }
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map(|e| e.line).unwrap_or(self.last_line)
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => parse_f64(key, &v, line).map(Some),
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.opt_f64(key)?.ok_or_else(|| self.missing(key))
    }

    fn f64_list(&mut self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let (v, line) = self.take(key).ok_or_else(|| self.missing(key))?;
        v.split(',')
            .map(|s| parse_f64(key, s.trim(), line))
            .collect()
    }

    fn opt_int<T: FromStr>(&mut self, key: &str) -> Result<Option<(T, usize)>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((v, line)) => match v.parse::<T>() {
                Ok(x) => Ok(Some((x, line))),
                Err(_) => err(line, format!("key `{key}`: expected an integer, got `{v}`")),
            },
        }
    }

    fn int<T: FromStr>(&mut self, key: &str) -> Result<(T, usize), ConfigError> {
        self.opt_int(key)?.ok_or_else(|| self.missing(key))
    }

    fn word(&mut self, key: &str) -> Result<(String, usize), ConfigError> {
        self.take(key).ok_or_else(|| self.missing(key))
    }

    fn reject_unused(&self, why: impl Fn(&str) -> String) -> Result<(), ConfigError> {
        match self.entries.iter().find(|(_, e)| !e.used) {
            Some((k, e)) => err(e.line, why(k)),
            None => Ok(()),
        }
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64, ConfigError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        Ok(_) => err(line, format!("key `{key}`: non-finite value `{v}`")),
        Err(_) => err(line, format!("key `{key}`: expected a number, got `{v}`")),
    }
}

fn check(ok: bool, key: &str, line: usize, what: &str, value: impl fmt::Display) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        err(line, format!("key `{key}` out of range: {what}, got {value}"))
    }
}

fn positive(raw: &mut Raw, key: &str) -> Result<f64, ConfigError> {
    let x = raw.f64(key)?;
    check(x > 0.0, key, raw.line_of(key), "must be positive", x)?;
    Ok(x)
}

fn parse_clock(raw: &mut Raw) -> Result<ClockSpec, ConfigError> {
    let (model, line) = raw.word("clock")?;
    let dim = |raw: &mut Raw| -> Result<usize, ConfigError> {
        let (d, line) = raw.int::<usize>("d")?;
        check(d >= 2, "d", line, "must be at least 2", d)?;
        Ok(d)
    };
    let spec = match model.as_str() {
        "swp" => ClockSpec::Swp {
            d: dim(raw)?,
            omega: positive(raw, "omega")?,
        },
        "quasi_ideal" => {
            let d = dim(raw)?;
            let omega = positive(raw, "omega")?;
            let sigma_bar = raw.opt_f64("sigma_bar")?;
            if let Some(s) = sigma_bar {
                let what = format!("must lie in (0, {d})");
                check(s > 0.0 && s < d as f64, "sigma_bar", raw.line_of("sigma_bar"), &what, s)?;
            }
            ClockSpec::QuasiIdeal {
                d,
                omega,
                sigma_bar,
                m0: raw.opt_f64("m0")?,
                n0: raw.opt_f64("n0")?,
            }
        }
        "qubit_phase" => ClockSpec::QubitPhase {
            omega: positive(raw, "omega")?,
        },
        "idealised" => {
            let s = raw.f64("sigma_nr")?;
            check(s >= 0.0, "sigma_nr", raw.line_of("sigma_nr"), "must be non-negative", s)?;
            ClockSpec::Idealised { sigma_nr: s }
        }
        other => {
            return err(
                line,
                format!("unknown clock `{other}` (expected swp, quasi_ideal, qubit_phase or idealised)"),
            )
        }
    };
    let taken = ["d", "omega", "sigma_bar", "m0", "n0", "sigma_nr"];
    for k in taken {
        if let Some(e) = raw.entries.get(k) {
            if !e.used {
                return err(e.line, format!("key `{k}` does not apply to clock = {model}"));
            }
        }
    }
    Ok(spec)
}

fn parse_kinematics(raw: &mut Raw) -> Result<KinematicSpec, ConfigError> {
    let (kind, line) = raw.word("kstate")?;
    let mass = positive(raw, "mass")?;
    let sigma_x = positive(raw, "sigma_x")?;
    let x0 = raw.opt_f64("x0")?.unwrap_or(0.0);
    let p0 = raw.opt_f64("p0")?.unwrap_or(0.0);
    let state = match kind.as_str() {
        "gaussian" => {
            for k in ["delta_x0", "alpha", "theta"] {
                if raw.has(k) {
                    return err(raw.line_of(k), format!("key `{k}` does not apply to kstate = gaussian"));
                }
            }
            StateSpec::Gaussian
        }
        "cat" => {
            let delta_x0 = raw.f64("delta_x0")?;
            check(delta_x0 >= 0.0, "delta_x0", raw.line_of("delta_x0"), "must be non-negative", delta_x0)?;
            let alpha = raw.opt_f64("alpha")?.unwrap_or(0.5);
            check(
                alpha > 0.0 && alpha <= 1.0,
                "alpha",
                raw.line_of("alpha"),
                "must lie in (0, 1]",
                alpha,
            )?;
            let theta = raw.opt_f64("theta")?.unwrap_or(0.0);
            StateSpec::Cat {
                delta_x0,
                alpha,
                theta,
            }
        }
        other => return err(line, format!("unknown kstate `{other}` (expected gaussian or cat)")),
    };
    Ok(KinematicSpec {
        state,
        mass,
        sigma_x,
        x0,
        p0,
    })
}

fn parse_physics(raw: &mut Raw) -> Result<PhysicsSpec, ConfigError> {
    let g = raw.f64("g")?;
    let c_scale = match raw.opt_f64("c_scale")? {
        Some(c) => {
            check(c > 0.0, "c_scale", raw.line_of("c_scale"), "must be positive", c)?;
            c
        }
        None => 1.0,
    };
    let times = raw.f64_list("t")?;
    let line = raw.line_of("t");
    for &t in &times {
        check(t >= 0.0, "t", line, "times must be non-negative", t)?;
    }
    Ok(PhysicsSpec { g, c_scale, times })
}

fn parse_measurement(raw: &mut Raw) -> Result<MeasurementSpec, ConfigError> {
    let qs = raw.f64_list("q")?;
    for &q in &qs {
        check(q > 0.0, "q", raw.line_of("q"), "must be positive", q)?;
    }
    let bin = raw.opt_int::<i64>("bin")?.map(|(b, _)| b).unwrap_or(0);
    Ok(MeasurementSpec { qs, bin })
}

fn parse_verify(raw: &mut Raw) -> Result<VerifySpec, ConfigError> {
    let quantity = match raw.take("quantity") {
        None => VerifyQuantity::MeanTime,
        Some((q, line)) => match q.as_str() {
            "mean_time" => VerifyQuantity::MeanTime,
            "sigma" => VerifyQuantity::Sigma,
            "coherence_identity" => VerifyQuantity::CoherenceIdentity,
            other => {
                return err(
                    line,
                    format!("unknown quantity `{other}` (expected mean_time, sigma or coherence_identity)"),
                )
            }
        },
    };
    let c_scalings = if raw.has("c_scalings") {
        let v = raw.f64_list("c_scalings")?;
        let line = raw.line_of("c_scalings");
        for &l in &v {
            check(l > 0.0, "c_scalings", line, "must be positive", l)?;
        }
        check(v.len() >= 3, "c_scalings", line, "need at least three scalings", v.len())?;
        v
    } else if quantity == VerifyQuantity::CoherenceIdentity {
        vec![1.0]
    } else {
        return Err(raw.missing("c_scalings"));
    };
    let samples = match raw.opt_int::<usize>("samples")? {
        Some((n, line)) => {
            check(n >= 1, "samples", line, "must be at least 1", n)?;
            n
        }
        None => 100,
    };
    Ok(VerifySpec {
        quantity,
        c_scalings,
        samples,
    })
}

fn parse_sweep(raw: &mut Raw) -> Result<SweepSpec, ConfigError> {
    let (p, line) = raw.word("parameter")?;
    let parameter = match p.as_str() {
        "delta_ratio" => SweepParameter::DeltaRatio,
        "alpha" => SweepParameter::Alpha,
        "theta" => SweepParameter::Theta,
        "t" => SweepParameter::Time,
        "g" => SweepParameter::Gravity,
        other => {
            return err(
                line,
                format!("unknown sweep parameter `{other}` (expected delta_ratio, alpha, theta, t or g)"),
            )
        }
    };
    let from = raw.f64("from")?;
    let to = raw.f64("to")?;
    check(to > from, "to", raw.line_of("to"), &format!("must exceed from = {from}"), to)?;
    let (points, pl) = raw.int::<usize>("points")?;
    check(points >= 2, "points", pl, "must be at least 2", points)?;
    match parameter {
        SweepParameter::DeltaRatio | SweepParameter::Time => {
            check(from >= 0.0, "from", raw.line_of("from"), "must be non-negative", from)?
        }
        SweepParameter::Alpha => {
            check(from > 0.0, "from", raw.line_of("from"), "alpha must lie in (0, 1]", from)?;
            check(to <= 1.0, "to", raw.line_of("to"), "alpha must lie in (0, 1]", to)?;
        }
        _ => {}
    }
    Ok(SweepSpec {
        parameter,
        from,
        to,
        points,
    })
}

/// Strict parse of a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut raw = Raw::parse(text)?;
    let command = match raw.take("command") {
        None => None,
        Some((c, line)) => Some(c.parse::<Command>().or_else(|e| err(line, e))?),
    };
    let seed = raw.opt_int::<u64>("seed")?.map(|(s, _)| s).unwrap_or(0);
    let clock = parse_clock(&mut raw)?;
    let kinematics = parse_kinematics(&mut raw)?;
    let physics = parse_physics(&mut raw)?;
    let measurement = if raw.has_section(Section::Measurement) {
        Some(parse_measurement(&mut raw)?)
    } else {
        None
    };
    let verify = if raw.has_section(Section::Verify) {
        Some(parse_verify(&mut raw)?)
    } else {
        None
    };
    let sweep = if raw.has_section(Section::Sweep) {
        Some(parse_sweep(&mut raw)?)
    } else {
        None
    };
    raw.reject_unused(|k| format!("key `{k}` is not used by this configuration"))?;
    let config = RunConfig {
        command,
        seed,
        clock,
        kinematics,
        physics,
        measurement,
        verify,
        sweep,
    };
    if let Some(c) = command {
        requirements(&config, c).map_err(|m| {
            let line = raw.line_of("command");
            ConfigError { line, message: m }
        })?;
    }
    Ok(config)
}

/// Section or state the command needs beyond the common keys.
pub(crate) fn requirements(config: &RunConfig, command: Command) -> Result<(), String> {
    let cat = matches!(config.kinematics.state, StateSpec::Cat { .. });
    let model = !matches!(config.clock, ClockSpec::Idealised { .. });
    match command {
        Command::Dilation | Command::Precision => Ok(()),
        Command::Coherence if !cat => Err("coherence needs kstate = cat".into()),
        Command::Coherence => Ok(()),
        Command::Measurement if cat => Err("measurement needs kstate = gaussian".into()),
        Command::Measurement if config.measurement.is_none() => {
            Err("measurement needs a [measurement] section".into())
        }
        Command::Measurement => Ok(()),
        Command::Verify => match &config.verify {
            None => Err("verify needs a [verify] section".into()),
            Some(v) if v.quantity == VerifyQuantity::CoherenceIdentity => Ok(()),
            Some(_) if !model => Err("verify needs a matrix clock (swp, quasi_ideal or qubit_phase)".into()),
            Some(_) => Ok(()),
        },
        Command::Sweep if !cat => Err("sweep needs kstate = cat".into()),
        Command::Sweep if config.sweep.is_none() => Err("sweep needs a [sweep] section".into()),
        Command::Sweep if config.physics.times.len() != 1 => {
            Err("sweep needs a single time `t`".into())
        }
        Command::Sweep => Ok(()),
    }
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn list(v: &[f64]) -> String {
    v.iter().map(|&x| num(x)).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Canonical text form; `parse_config` of it gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(c) = self.command {
            kv(&mut s, "command", c.name().to_string());
        }
        kv(&mut s, "seed", self.seed.to_string());
        s.push_str("[clock]\n");
        match &self.clock {
            ClockSpec::Swp { d, omega } => {
                kv(&mut s, "clock", "swp".into());
                kv(&mut s, "d", d.to_string());
                kv(&mut s, "omega", num(*omega));
            }
            ClockSpec::QuasiIdeal {
                d,
                omega,
                sigma_bar,
                m0,
                n0,
            } => {
                kv(&mut s, "clock", "quasi_ideal".into());
                kv(&mut s, "d", d.to_string());
                kv(&mut s, "omega", num(*omega));
                for (k, v) in [("sigma_bar", sigma_bar), ("m0", m0), ("n0", n0)] {
                    if let Some(v) = v {
                        kv(&mut s, k, num(*v));
                    }
                }
            }
            ClockSpec::QubitPhase { omega } => {
                kv(&mut s, "clock", "qubit_phase".into());
                kv(&mut s, "omega", num(*omega));
            }
            ClockSpec::Idealised { sigma_nr } => {
                kv(&mut s, "clock", "idealised".into());
                kv(&mut s, "sigma_nr", num(*sigma_nr));
            }
        }
        let k = &self.kinematics;
        s.push_str("[kinematics]\n");
        match k.state {
            StateSpec::Gaussian => kv(&mut s, "kstate", "gaussian".into()),
            StateSpec::Cat { .. } => kv(&mut s, "kstate", "cat".into()),
        }
        kv(&mut s, "mass", num(k.mass));
        kv(&mut s, "sigma_x", num(k.sigma_x));
        kv(&mut s, "x0", num(k.x0));
        kv(&mut s, "p0", num(k.p0));
        if let StateSpec::Cat {
            delta_x0,
            alpha,
            theta,
        } = k.state
        {
            kv(&mut s, "delta_x0", num(delta_x0));
            kv(&mut s, "alpha", num(alpha));
            kv(&mut s, "theta", num(theta));
        }
        s.push_str("[physics]\n");
        kv(&mut s, "g", num(self.physics.g));
        kv(&mut s, "c_scale", num(self.physics.c_scale));
        kv(&mut s, "t", list(&self.physics.times));
        if let Some(m) = &self.measurement {
            s.push_str("[measurement]\n");
            kv(&mut s, "q", list(&m.qs));
            kv(&mut s, "bin", m.bin.to_string());
        }
        if let Some(v) = &self.verify {
            s.push_str("[verify]\n");
            kv(&mut s, "quantity", v.quantity.name().into());
            kv(&mut s, "c_scalings", list(&v.c_scalings));
            kv(&mut s, "samples", v.samples.to_string());
        }
        if let Some(w) = &self.sweep {
            s.push_str("[sweep]\n");
            kv(&mut s, "parameter", w.parameter.name().into());
            kv(&mut s, "from", num(w.from));
            kv(&mut s, "to", num(w.to));
            kv(&mut s, "points", w.points.to_string());
        }
        s
    }
}
