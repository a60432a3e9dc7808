//! Field and problem specification parsing.
//!
//! Format: semicolon-separated sections `name=<id>; params={k:v,...};
//! domain={k:v,...}`. A bare identifier is shorthand for `name=<id>`.
//! Values inside braces are bare words or numbers.

use anyhow::{anyhow, bail, Context, Result};
use std::collections::BTreeMap;
use std::sync::Arc;
use steady2d::catalog;
use steady2d::domain::Domain;
use steady2d::field::FieldRef;
use steady2d::tube::{build_fermi_chart, export_field, solve_tube_series, CurveSpec, JordanCurve};

#[derive(Clone, Debug, Default)]
pub struct FieldSpec {
    pub name: String,
    pub params: BTreeMap<String, String>,
    pub domain: BTreeMap<String, String>,
    /// The raw spec string (hashed into reports).
    pub raw: String,
}

pub fn parse_field_spec(input: &str) -> Result<FieldSpec> {
    let raw = input.trim().to_string();
    let body = if let Some(path) = raw.strip_prefix('@') {
        std::fs::read_to_string(path).with_context(|| format!("reading field spec {path}"))?
    } else {
        raw.clone()
    };
    let body = body.trim();
    if !body.contains('=') {
        return Ok(FieldSpec { name: body.to_string(), raw, ..Default::default() });
    }
    let mut spec = FieldSpec { raw, ..Default::default() };
    for section in body.split(';') {
        let section = section.trim();
        if section.is_empty() {
            continue;
        }
        let (key, value) = section
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{section}`"))?;
        match key.trim() {
            "name" => spec.name = value.trim().to_string(),
            "params" => spec.params = parse_braces(value)?,
            "domain" => spec.domain = parse_braces(value)?,
            other => bail!("unknown spec section `{other}`"),
        }
    }
    if spec.name.is_empty() {
        bail!("field spec has no name");
    }
    Ok(spec)
}

fn parse_braces(value: &str) -> Result<BTreeMap<String, String>> {
    let v = value.trim();
    let inner = v
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| anyhow!("expected {{k:v,...}}, got `{v}`"))?;
    let mut out = BTreeMap::new();
    for item in inner.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (k, val) = item
            .split_once(':')
            .ok_or_else(|| anyhow!("expected k:v, got `{item}`"))?;
        out.insert(k.trim().to_string(), val.trim().to_string());
    }
    Ok(out)
}

fn numeric_params(params: &BTreeMap<String, String>) -> Result<catalog::Params> {
    let mut out = catalog::Params::new();
    for (k, v) in params {
        let parsed: f64 = v
            .parse()
            .with_context(|| format!("parameter `{k}` must be numeric, got `{v}`"))?;
        out.insert(k.clone(), parsed);
    }
    Ok(out)
}

fn get_num(map: &BTreeMap<String, String>, key: &str, default: f64) -> Result<f64> {
    match map.get(key) {
        Some(v) => v
            .parse::<f64>()
            .with_context(|| format!("`{key}` must be numeric, got `{v}`")),
        None => Ok(default),
    }
}

/// Build the curve for tube fields and the counterexample subcommand.
pub fn build_curve(kind: &str, params: &BTreeMap<String, String>) -> Result<JordanCurve> {
    let spec = match kind {
        "circle" => CurveSpec::circle(get_num(params, "r", 1.0)?),
        "ellipse" => {
            CurveSpec::ellipse(get_num(params, "a", 1.3)?, get_num(params, "b", 0.8)?)
        }
        other => {
            // fourier coefficient file: lines `m x_cos x_sin y_cos y_sin`
            let path = other
                .strip_prefix("fourier:")
                .ok_or_else(|| anyhow!("unknown curve `{other}` (circle|ellipse|fourier:FILE)"))?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading curve file {path}"))?;
            let mut xc = Vec::new();
            let mut xs = Vec::new();
            let mut yc = Vec::new();
            let mut ys = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let nums: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .with_context(|| format!("bad curve line `{line}`"))?;
                if nums.len() != 5 {
                    bail!("curve lines are `m x_cos x_sin y_cos y_sin`");
                }
                let m = nums[0] as usize;
                for v in [&mut xc, &mut xs, &mut yc, &mut ys] {
                    if v.len() <= m {
                        v.resize(m + 1, 0.0);
                    }
                }
                xc[m] = nums[1];
                xs[m] = nums[2];
                yc[m] = nums[3];
                ys[m] = nums[4];
            }
            CurveSpec { x_cos: xc, x_sin: xs, y_cos: yc, y_sin: ys }
        }
    };
    Ok(JordanCurve::build(&spec, 256)?)
}

/// Instantiate a field from its parsed spec.
pub fn build_field(spec: &FieldSpec) -> Result<FieldRef> {
    match spec.name.as_str() {
        "tube" => {
            let curve_kind = spec
                .params
                .get("curve")
                .map(String::as_str)
                .unwrap_or("ellipse");
            let curve = build_curve(curve_kind, &spec.params)?;
            let delta = get_num(&spec.params, "delta", 0.2)?;
            let nn = get_num(&spec.params, "nn", 16.0)? as usize;
            let ns = get_num(&spec.params, "ns", 64.0)? as usize;
            let chart = build_fermi_chart(curve, delta)?;
            let sol = solve_tube_series(&chart, (nn, ns))?;
            Ok(Arc::new(export_field(Arc::new(sol))))
        }
        name => {
            let mut params = numeric_params(&spec.params)?;
            if !spec.domain.is_empty() {
                // only the polynomial entry takes a configurable domain
                if name != "poly" {
                    bail!("catalog field `{name}` has a fixed domain");
                }
                let kind = spec.domain.get("kind").map(String::as_str).unwrap_or("disk");
                if kind != "disk" {
                    bail!("polynomial fields support disk domains only");
                }
                params.insert("r".into(), get_num(&spec.domain, "r", 1.0)?);
                let d = Domain::Disk {
                    cx: get_num(&spec.domain, "cx", 0.0)?,
                    cy: get_num(&spec.domain, "cy", 0.0)?,
                    r: get_num(&spec.domain, "r", 1.0)?,
                };
                d.validate()?;
            }
            Ok(catalog::field(name, &params)?)
        }
    }
}

/// A semilinear problem file for the `solve` subcommand.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub flux_kind: String,
    pub flux_params: BTreeMap<String, String>,
    pub mode: String,
    pub radius: f64,
    pub boundary_value: f64,
    pub psi0: f64,
    pub nr: usize,
    pub ntheta: usize,
    pub raw: String,
}

pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let mut flux_kind = String::new();
    let mut flux_params = BTreeMap::new();
    let mut mode = "radial-shoot".to_string();
    let mut radius = 1.0;
    let mut boundary_value = 0.0;
    let mut psi0 = 1.0;
    let mut nr = 96;
    let mut ntheta = 32;
    for section in text.split(';') {
        let section = section.trim();
        if section.is_empty() || section.starts_with('#') {
            continue;
        }
        let (key, value) = section
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{section}`"))?;
        match key.trim() {
            "flux" => {
                let map = parse_braces(value)?;
                flux_kind = map
                    .get("kind")
                    .ok_or_else(|| anyhow!("flux needs a kind"))?
                    .clone();
                flux_params = map;
            }
            "mode" => mode = value.trim().to_string(),
            "radius" => radius = value.trim().parse()?,
            "boundary" => boundary_value = value.trim().parse()?,
            "psi0" => psi0 = value.trim().parse()?,
            "nr" => nr = value.trim().parse()?,
            "ntheta" => ntheta = value.trim().parse()?,
            "domain" => {
                let map = parse_braces(value)?;
                radius = get_num(&map, "r", radius)?;
            }
            other => bail!("unknown problem key `{other}`"),
        }
    }
    if flux_kind.is_empty() {
        bail!("problem file needs a flux={{kind:...}} section");
    }
    Ok(ProblemSpec {
        flux_kind,
        flux_params,
        mode,
        radius,
        boundary_value,
        psi0,
        nr,
        ntheta,
        raw: text.to_string(),
    })
}

/// Profile table read from a CSV of `s,F` rows (piecewise-linear).
pub struct TableProfile {
    pub s: Vec<f64>,
    pub f: Vec<f64>,
}

impl steady2d::elliptic::Profile for TableProfile {
    fn value(&self, s: f64) -> f64 {
        let n = self.s.len();
        let s = s.clamp(self.s[0], self.s[n - 1]);
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.s[mid] <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (s - self.s[lo]) / (self.s[hi] - self.s[lo]).max(1e-300);
        self.f[lo] * (1.0 - t) + self.f[hi] * t
    }
}

pub fn build_profile(
    kind: &str,
    params: &BTreeMap<String, String>,
) -> Result<Box<dyn steady2d::elliptic::Profile + Send>> {
    match kind {
        "const" => {
            let c = get_num(params, "c", 4.0)?;
            Ok(Box::new(catalog::FluxForm::Const { c }))
        }
        "linear" => {
            let c = get_num(params, "c", -1.0)?;
            Ok(Box::new(catalog::FluxForm::Linear { c }))
        }
        "radial-poly" => {
            let p = get_num(params, "p", 2.0)? as u32;
            Ok(Box::new(catalog::FluxForm::RadialPoly { p }))
        }
        "radial-even" => {
            let m = get_num(params, "m", 2.0)? as u32;
            Ok(Box::new(catalog::FluxForm::RadialEven { m }))
        }
        "table" => {
            let path = params
                .get("file")
                .ok_or_else(|| anyhow!("table flux needs file:PATH"))?;
            let text = std::fs::read_to_string(path)?;
            let mut s = Vec::new();
            let mut f = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (a, b) = line
                    .split_once(',')
                    .ok_or_else(|| anyhow!("table rows are `s,F`"))?;
                s.push(a.trim().parse::<f64>()?);
                f.push(b.trim().parse::<f64>()?);
            }
            if s.len() < 2 {
                bail!("table flux needs at least two rows");
            }
            Ok(Box::new(TableProfile { s, f }))
        }
        other => bail!("unknown flux kind `{other}`"),
    }
}
