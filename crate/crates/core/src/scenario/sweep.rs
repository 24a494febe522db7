use std::io::Write;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{run, RunOptions, Scenario};
use crate::error::{Error, Result};

/// Headline numbers of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub min_cold_energy: f64,
    pub t_min: f64,
    pub dwell: f64,
    pub max_squid_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    /// `Err` holds the failure message; the sweep carries on.
    pub outcome: std::result::Result<SweepSummary, String>,
}

enum Segment<'a> {
    Key(&'a str),
    Index(usize),
}

fn segments(path: &str) -> Result<Vec<Segment<'_>>> {
    let bad = || Error::InvalidArgument(format!("malformed parameter path `{path}`"));
    let mut out = Vec::new();
    for part in path.split('.') {
        let (key, mut rest) = match part.find('[') {
            Some(i) => (&part[..i], &part[i..]),
            None => (part, ""),
        };
        if key.is_empty() {
            return Err(bad());
        }
        out.push(Segment::Key(key));
        while !rest.is_empty() {
            let close = rest.find(']').ok_or_else(bad)?;
            if !rest.starts_with('[') {
                return Err(bad());
            }
            out.push(Segment::Index(rest[1..close].parse().map_err(|_| bad())?));
            rest = &rest[close + 1..];
        }
    }
    Ok(out)
}

fn locate<'v>(doc: &'v mut Value, path: &str) -> Result<&'v mut Value> {
    let mut node = doc;
    for seg in segments(path)? {
        let missing = || Error::config(path, "no such parameter in the scenario");
        node = match seg {
            Segment::Key(k) => node.get_mut(k).ok_or_else(missing)?,
            Segment::Index(i) => node.get_mut(i).ok_or_else(missing)?,
        };
    }
    if !node.is_number() {
        return Err(Error::config(path, "only numeric parameters can be swept"));
    }
    Ok(node)
}

fn split_paths(paths: &str) -> impl Iterator<Item = &str> {
    paths.split(',').map(str::trim).filter(|p| !p.is_empty())
}

/// Sets every comma-separated path (e.g. `modes[3].temperature,modes[4].temperature`)
/// to `value` and revalidates.
pub fn set_parameter(template: &Scenario, paths: &str, value: f64) -> Result<Scenario> {
    let mut doc = serde_json::to_value(template)?;
    for path in split_paths(paths) {
        let node = locate(&mut doc, path)?;
        *node = if node.is_u64() && value >= 0.0 && value.fract() == 0.0 {
            Value::from(value as u64)
        } else {
            serde_json::Number::from_f64(value)
                .map(Value::Number)
                .ok_or_else(|| Error::config(path, format!("cannot represent {value}")))?
        };
    }
    let text = serde_json::to_string(&doc)?;
    super::parse_scenario(&text)
}

fn run_point(template: &Scenario, paths: &str, value: f64, options: &RunOptions) -> Result<SweepSummary> {
    let mut scenario = set_parameter(template, paths, value)?;
    scenario.name = format!("{}[{paths}={value}]", template.name);
    let out = run(&scenario, options)?;
    let report = out
        .report
        .ok_or_else(|| Error::InvalidArgument("sweeps need refrigerator roles".into()))?;
    Ok(SweepSummary {
        min_cold_energy: report.min_cold_energy,
        t_min: report.t_min,
        dwell: report.dwell,
        max_squid_energy: report.max_squid_energy,
    })
}

/// Runs the template once per value; rows come back in input order.
pub fn sweep(template: &Scenario, paths: &str, values: &[f64], options: &RunOptions) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one value".into()));
    }
    let mut doc = serde_json::to_value(template)?;
    if split_paths(paths).next().is_none() {
        return Err(Error::InvalidArgument("sweep needs a parameter path".into()));
    }
    for path in split_paths(paths) {
        locate(&mut doc, path)?;
    }
    let inner = RunOptions { threads: None, ..*options };
    options.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let outcome = run_point(template, paths, value, &inner).map_err(|e| {
                    warn!("sweep point {value} failed: {e}");
                    e.to_string()
                });
                SweepRow { value, outcome }
            })
            .collect()
    })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "value,min_E_cold,t_min,dwell,max_E_f,status")?;
    for row in rows {
        match &row.outcome {
            Ok(s) => writeln!(
                w,
                "{},{:.11e},{:.11e},{:.11e},{:.11e},ok",
                row.value, s.min_cold_energy, s.t_min, s.dwell, s.max_squid_energy
            )?,
            Err(msg) => writeln!(w, "{},NaN,NaN,NaN,NaN,\"failed: {}\"", row.value, msg.replace('"', "'"))?,
        }
    }
    Ok(())
}
