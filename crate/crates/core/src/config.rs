//! Flat key-value configuration files for [`ModelSpec`].
//!
//! ```text
//! # toxicity reverts
//! scenario = reversion        # optional base preset
//! a = -0.4
//! b = [(0, -0.2), (1, -0.3)]  # sampled table
//! c = linear(0, 0.01)         # value0 + slope * t
//! sigma = 0.1
//! signal.kappa = 0.02         # any signal.* key enables the signal
//! initial.theta0 = 0.1
//! ```
//!
//! Without a `scenario` line every field must be given. `signal = none`
//! removes a preset's signal.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{CoefFn, InitialState, ModelSpec, Scenario, SignalSpec};

const REQUIRED: [&str; 16] = [
    "a", "b", "c", "d", "sigma", "sigma_m", "epsilon", "beta", "lambda", "alpha", "horizon",
    "initial.x", "initial.z", "initial.theta0", "initial.y", "initial.p",
];

pub fn load_config(path: &Path) -> Result<ModelSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Invalid(m) => Error::Data { path: path.display().to_string(), message: m },
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<ModelSpec> {
    let mut entries = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("line {}: expected 'key = value'", lineno + 1)))?;
        entries.push((lineno + 1, key.trim().to_string(), value.trim().to_string()));
    }

    let base = entries.iter().find(|(_, k, _)| k == "scenario");
    let mut spec = match base {
        Some((_, _, v)) => ModelSpec::preset(v.parse::<Scenario>()?),
        None => {
            let missing: Vec<&str> = REQUIRED
                .iter()
                .copied()
                .filter(|r| !entries.iter().any(|(_, k, _)| k == r))
                .collect();
            if !missing.is_empty() {
                return Err(Error::invalid(format!("missing keys: {}", missing.join(", "))));
            }
            placeholder()
        }
    };

    for (lineno, key, value) in &entries {
        let at = |e: Error| match e {
            Error::Invalid(m) => Error::invalid(format!("line {lineno} ({key}): {m}")),
            other => other,
        };
        apply(&mut spec, key, value).map_err(at)?;
    }
    spec.validate()?;
    Ok(spec)
}

fn placeholder() -> ModelSpec {
    let zero = CoefFn::Constant(0.0);
    ModelSpec {
        a: zero.clone(),
        b: zero.clone(),
        c: zero.clone(),
        d: zero,
        sigma: 0.0,
        sigma_m: 0.0,
        epsilon: 0.0,
        beta: 0.0,
        lambda: 0.0,
        alpha: 0.0,
        horizon: 0.0,
        signal: None,
        initial: InitialState { x: 0.0, z: 0.0, theta0: 0.0, y: 0.0, p: 0.0 },
    }
}

fn apply(spec: &mut ModelSpec, key: &str, value: &str) -> Result<()> {
    let num = || parse_number(value);
    match key {
        "scenario" => {}
        "a" => spec.a = parse_coef(value)?,
        "b" => spec.b = parse_coef(value)?,
        "c" => spec.c = parse_coef(value)?,
        "d" => spec.d = parse_coef(value)?,
        "sigma" => spec.sigma = num()?,
        "sigma_m" => spec.sigma_m = num()?,
        "epsilon" => spec.epsilon = num()?,
        "beta" => spec.beta = num()?,
        "lambda" => spec.lambda = num()?,
        "alpha" => spec.alpha = num()?,
        "horizon" | "T" => spec.horizon = num()?,
        "signal" if value == "none" => spec.signal = None,
        "signal.kappa" | "signal.ell" | "signal.nu" => {
            let s = spec.signal.get_or_insert(SignalSpec { kappa: 0.0, ell: 0.0, nu: 0.0 });
            let v = num()?;
            match key {
                "signal.kappa" => s.kappa = v,
                "signal.ell" => s.ell = v,
                _ => s.nu = v,
            }
        }
        "initial.x" => spec.initial.x = num()?,
        "initial.z" => spec.initial.z = num()?,
        "initial.theta0" => spec.initial.theta0 = num()?,
        "initial.y" => spec.initial.y = num()?,
        "initial.p" => spec.initial.p = num()?,
        _ => return Err(Error::invalid(format!("unknown key '{key}'"))),
    }
    Ok(())
}

fn parse_number(s: &str) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::invalid(format!("not a number: '{s}'")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::invalid(format!("non-finite value '{s}'")))
    }
}

fn parse_coef(s: &str) -> Result<CoefFn> {
    let s = s.trim();
    if let Some(body) = s.strip_prefix("linear(").and_then(|r| r.strip_suffix(')')) {
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::invalid("linear(value0, slope) takes two numbers"));
        }
        return Ok(CoefFn::Linear { value0: parse_number(parts[0])?, slope: parse_number(parts[1])? });
    }
    if let Some(body) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        let mut pts = Vec::new();
        for pair in body.split(')') {
            let pair = pair.trim().trim_start_matches(',').trim();
            if pair.is_empty() {
                continue;
            }
            let inner = pair
                .strip_prefix('(')
                .ok_or_else(|| Error::invalid(format!("bad table entry '{pair}'")))?;
            let (t, v) = inner
                .split_once(',')
                .ok_or_else(|| Error::invalid(format!("bad table entry '{pair}'")))?;
            pts.push((parse_number(t)?, parse_number(v)?));
        }
        return Ok(CoefFn::Table(pts));
    }
    parse_number(s).map(CoefFn::Constant)
}

fn format_coef(f: &CoefFn) -> String {
    match f {
        CoefFn::Constant(v) => format!("{v:?}"),
        CoefFn::Linear { value0, slope } => format!("linear({value0:?}, {slope:?})"),
        CoefFn::Table(pts) => {
            let body: Vec<String> = pts.iter().map(|(t, v)| format!("({t:?}, {v:?})")).collect();
            format!("[{}]", body.join(", "))
        }
    }
}

/// Serialize every field. Numbers use the shortest representation that
/// parses back to the same bits.
pub fn to_config_string(spec: &ModelSpec) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    line("a", format_coef(&spec.a));
    line("b", format_coef(&spec.b));
    line("c", format_coef(&spec.c));
    line("d", format_coef(&spec.d));
    line("sigma", format!("{:?}", spec.sigma));
    line("sigma_m", format!("{:?}", spec.sigma_m));
    line("epsilon", format!("{:?}", spec.epsilon));
    line("beta", format!("{:?}", spec.beta));
    line("lambda", format!("{:?}", spec.lambda));
    line("alpha", format!("{:?}", spec.alpha));
    line("horizon", format!("{:?}", spec.horizon));
    if let Some(s) = &spec.signal {
        line("signal.kappa", format!("{:?}", s.kappa));
        line("signal.ell", format!("{:?}", s.ell));
        line("signal.nu", format!("{:?}", s.nu));
    }
    let i = &spec.initial;
    line("initial.x", format!("{:?}", i.x));
    line("initial.z", format!("{:?}", i.z));
    line("initial.theta0", format!("{:?}", i.theta0));
    line("initial.y", format!("{:?}", i.y));
    line("initial.p", format!("{:?}", i.p));
    out
}
