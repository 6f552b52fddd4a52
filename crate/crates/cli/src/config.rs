//! Run configuration files.
//!
//! ```text
//! preset = nominal          # optional, before any section
//!
//! [source]
//! vin = 12
//!
//! [components]
//! l1 = 250e-6
//! r_load = 114.1
//!
//! [switching]
//! fs = 50e3
//! duty = 0.55
//!
//! [sim]
//! periods = 400
//!
//! [control]
//! ki = 0.1
//!
//! [design]
//! vo = 151
//! po = 200
//! ```
//!
//! Values not given come from the preset (or `nominal` when no preset is
//! named); `[sim]` defaults are derived from the resolved switching period.

use std::collections::HashMap;

use hgvm_core::{ConverterParams, DesignSpec, Error as CoreError, PiConfig, SimConfig};
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignTarget {
    pub vo: f64,
    pub po: f64,
    pub ripple: f64,
    pub inductor_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: String,
    pub params: ConverterParams,
    pub sim: SimConfig,
    pub control: PiConfig,
    pub design: Option<DesignTarget>,
    /// Whether `[sim] record_stride` was given explicitly.
    #[serde(skip)]
    pub record_stride_set: bool,
}

impl RunConfig {
    pub fn design_spec(&self) -> Option<DesignSpec> {
        self.design.map(|d| DesignSpec {
            vin: self.params.vin,
            vo: d.vo,
            po: d.po,
            fs: self.params.fs,
            ripple: d.ripple,
            inductor_margin: d.inductor_margin,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Value {
    Number(f64),
    Bool(bool),
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("source", &["vin"]),
    (
        "components",
        &[
            "preset", "l1", "l2", "l3", "c1", "c2", "c3", "c4", "c5", "c6", "r_load",
        ],
    ),
    ("switching", &["fs", "duty"]),
    (
        "sim",
        &[
            "dt",
            "periods",
            "warm_start",
            "shooting",
            "event_tol",
            "r_on",
            "record_stride",
        ],
    ),
    ("control", &["kp", "ki", "duty_min", "duty_max"]),
    ("design", &["vo", "po", "ripple", "inductor_margin"]),
];

fn parse_value(raw: &str) -> Option<Value> {
    match raw {
        "true" => Some(Value::Bool(true)),
        "false" => Some(Value::Bool(false)),
        _ => raw
            .parse::<f64>()
            .ok()
            .filter(|_| looks_numeric(raw))
            .map(Value::Number),
    }
}

// `f64::from_str` also takes "inf" and "NaN"; config values must be plain
// decimal or scientific notation.
fn looks_numeric(raw: &str) -> bool {
    raw.bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'e' | b'E' | b'+' | b'-'))
        && raw.bytes().any(|b| b.is_ascii_digit())
}

struct Entry {
    line: usize,
    value: Value,
}

struct Entries {
    map: HashMap<&'static str, Entry>,
}

impl Entries {
    fn number(&self, key: &'static str) -> Result<Option<f64>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Entry {
                value: Value::Number(v),
                ..
            }) => Ok(Some(*v)),
            Some(Entry { line, .. }) => Err(CliError::config(
                Some(*line),
                format!("`{key}` expects a number"),
            )),
        }
    }

    fn flag(&self, key: &'static str) -> Result<Option<bool>, CliError> {
        match self.map.get(key) {
            None => Ok(None),
            Some(Entry {
                value: Value::Bool(b),
                ..
            }) => Ok(Some(*b)),
            Some(Entry { line, .. }) => Err(CliError::config(
                Some(*line),
                format!("`{key}` expects `true` or `false`"),
            )),
        }
    }

    fn count(&self, key: &'static str) -> Result<Option<usize>, CliError> {
        let Some(v) = self.number(key)? else {
            return Ok(None);
        };
        if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(Some(v as usize))
        } else {
            Err(CliError::config(
                Some(self.map[key].line),
                format!("`{key}` = {v}: must be a whole number >= 0"),
            ))
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|e| e.line)
    }

    /// Attaches the line of the offending key to a validation error.
    fn locate(&self, err: CoreError) -> CliError {
        let line = match &err {
            CoreError::InvalidParameter { name, .. } => self.line(name),
            CoreError::DutyOutOfRange(_) => self.line("duty"),
            _ => None,
        };
        CliError::config(line, err.to_string())
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut section: Option<&'static str> = None;
    let mut preset: Option<(usize, String)> = None;
    let mut entries = Entries {
        map: HashMap::new(),
    };

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| {
                    CliError::config(Some(line), format!("malformed section header `{content}`"))
                })?
                .trim();
            let known = SECTIONS.iter().find(|(s, _)| *s == name).map(|(s, _)| *s);
            section = Some(known.ok_or_else(|| {
                CliError::config(Some(line), format!("unknown section `[{name}]`"))
            })?);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| {
                CliError::config(
                    Some(line),
                    format!("expected `key = value`, found `{content}`"),
                )
            })?;
        if value.is_empty() {
            return Err(CliError::config(
                Some(line),
                format!("`{key}` has no value"),
            ));
        }

        if key == "preset" && matches!(section, None | Some("components")) {
            if let Some((first, _)) = &preset {
                return Err(CliError::config(
                    Some(line),
                    format!("preset already set on line {first}"),
                ));
            }
            if ConverterParams::preset(value).is_none() {
                return Err(CliError::config(
                    Some(line),
                    format!(
                        "unknown preset `{value}` (known: {})",
                        ConverterParams::PRESETS.join(", ")
                    ),
                ));
            }
            preset = Some((line, value.to_string()));
            continue;
        }

        let Some(current) = section else {
            return Err(CliError::config(
                Some(line),
                format!("`{key}` must appear inside a section"),
            ));
        };
        let allowed = SECTIONS
            .iter()
            .find(|(s, _)| *s == current)
            .map(|(_, keys)| *keys)
            .unwrap_or(&[]);
        let Some(&key) = allowed.iter().find(|k| **k == key) else {
            return Err(CliError::config(
                Some(line),
                format!("unknown key `{key}` in [{current}]"),
            ));
        };
        let value = parse_value(value).ok_or_else(|| {
            CliError::config(
                Some(line),
                format!("`{key}`: cannot parse `{value}` as a number or boolean"),
            )
        })?;
        if let Some(prev) = entries.map.insert(key, Entry { line, value }) {
            return Err(CliError::config(
                Some(line),
                format!("`{key}` already set on line {}", prev.line),
            ));
        }
    }

    let preset_name = preset.map_or_else(|| "nominal".to_string(), |(_, name)| name);
    let mut p = ConverterParams::preset(&preset_name).expect("preset name checked while parsing");
    let fields: [(&'static str, &mut f64); 13] = [
        ("vin", &mut p.vin),
        ("l1", &mut p.l1),
        ("l2", &mut p.l2),
        ("l3", &mut p.l3),
        ("c1", &mut p.c1),
        ("c2", &mut p.c2),
        ("c3", &mut p.c3),
        ("c4", &mut p.c4),
        ("c5", &mut p.c5),
        ("c6", &mut p.c6),
        ("r_load", &mut p.r_load),
        ("fs", &mut p.fs),
        ("duty", &mut p.duty),
    ];
    for (key, slot) in fields {
        if let Some(v) = entries.number(key)? {
            *slot = v;
        }
    }
    p.validate().map_err(|e| entries.locate(e))?;

    let mut sim = SimConfig::for_params(&p);
    if let Some(v) = entries.number("dt")? {
        sim.dt = v;
    }
    if let Some(v) = entries.count("periods")? {
        sim.periods = v;
    }
    if let Some(v) = entries.flag("warm_start")? {
        sim.warm_start = v;
    }
    if let Some(v) = entries.flag("shooting")? {
        sim.shooting = v;
    }
    if let Some(v) = entries.number("event_tol")? {
        sim.event_tol = v;
    }
    if let Some(v) = entries.number("r_on")? {
        sim.r_on = Some(v);
    }
    if let Some(v) = entries.count("record_stride")? {
        sim.record_stride = v;
    }
    sim.validate(&p).map_err(|e| entries.locate(e))?;

    let mut control = PiConfig::default();
    let gains: [(&'static str, &mut f64); 4] = [
        ("kp", &mut control.kp),
        ("ki", &mut control.ki),
        ("duty_min", &mut control.duty_min),
        ("duty_max", &mut control.duty_max),
    ];
    for (key, slot) in gains {
        if let Some(v) = entries.number(key)? {
            *slot = v;
        }
    }
    control.validate().map_err(|e| entries.locate(e))?;

    let design = match (entries.number("vo")?, entries.number("po")?) {
        (Some(vo), Some(po)) => {
            let defaults = DesignSpec::new(p.vin, vo, po, p.fs);
            Some(DesignTarget {
                vo,
                po,
                ripple: entries.number("ripple")?.unwrap_or(defaults.ripple),
                inductor_margin: entries
                    .number("inductor_margin")?
                    .unwrap_or(defaults.inductor_margin),
            })
        }
        (None, None)
            if entries
                .line("ripple")
                .or(entries.line("inductor_margin"))
                .is_none() =>
        {
            None
        }
        _ => {
            let line = ["vo", "po", "ripple", "inductor_margin"]
                .iter()
                .filter_map(|k| entries.line(k))
                .min();
            return Err(CliError::config(
                line,
                "[design] needs both `vo` and `po`".to_string(),
            ));
        }
    };

    let record_stride_set = entries.line("record_stride").is_some();
    Ok(RunConfig {
        preset: preset_name,
        params: p,
        sim,
        control,
        design,
        record_stride_set,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_forms() {
        assert_eq!(parse_value("2.5e-6"), Some(Value::Number(2.5e-6)));
        assert_eq!(parse_value("-1"), Some(Value::Number(-1.0)));
        assert_eq!(parse_value("1E3"), Some(Value::Number(1000.0)));
        assert_eq!(parse_value("true"), Some(Value::Bool(true)));
        assert_eq!(parse_value("inf"), None);
        assert_eq!(parse_value("NaN"), None);
        assert_eq!(parse_value("12V"), None);
        assert_eq!(parse_value("e"), None);
    }
}
