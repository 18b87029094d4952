//! One experiment per value of a config setting, with a slope fit.

use std::path::Path;

use gossipfpp::stats::{fit_line, fit_loglog};
use rayon::prelude::*;
use serde_json::json;

use crate::config::{set_path, ConfigError, ExperimentConfig, Fit};
use crate::output::{num, Outcome, Table};
use crate::{prepare, run as run_one, Failure, Overrides};

fn as_number(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

/// The config of grid point `i`: `base` with the parameter set, and the
/// sweep's seed and replicates where `base` has none.
pub fn point_config(cfg: &ExperimentConfig, i: usize) -> Result<ExperimentConfig, ConfigError> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::new("sweep", "missing table"))?;
    let mut base = s.base.clone();
    set_path(&mut base, &s.parameter, s.values[i].clone())?;
    let seed = i64::try_from(cfg.seed())
        .map_err(|_| ConfigError::new("seed", "must be < 2^63 in a sweep"))?;
    base.entry("seed").or_insert(toml::Value::Integer(seed));
    base.entry("replicates")
        .or_insert(toml::Value::Integer(cfg.replicates as i64));
    let point = ExperimentConfig::from_table(base)
        .map_err(|e| ConfigError::new(format!("sweep.values[{i}]"), e.message))?;
    prepare(point, None, Overrides::default())
        .map_err(|e| ConfigError::new(format!("sweep.base.{}", e.field), e.message))
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, Failure> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| ConfigError::new("sweep", "missing table"))?;
    let results: Vec<Result<Option<f64>, String>> = (0..s.values.len())
        .into_par_iter()
        .map(|i| {
            let point = point_config(cfg, i).map_err(|e| e.to_string())?;
            let dir = out.join("points").join(format!("{i:03}"));
            run_one(&point, &dir).map_err(|e| e.to_string())?;
            let text =
                std::fs::read_to_string(dir.join("summary.json")).map_err(|e| e.to_string())?;
            let summary: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| e.to_string())?;
            Ok(summary.pointer(&s.response).and_then(|v| v.as_f64()))
        })
        .collect();

    let mut table = Table::new("sweep", &["index", "value", "response", "status"]);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut failed = 0;
    for (i, (v, r)) in s.values.iter().zip(&results).enumerate() {
        let x = as_number(v);
        let value = x
            .map(num)
            .unwrap_or_else(|| v.to_string().replace(',', ";"));
        let (response, status) = match r {
            Ok(Some(y)) => {
                if let Some(x) = x {
                    xs.push(x);
                    ys.push(*y);
                }
                (num(*y), "ok".to_string())
            }
            Ok(None) => (String::new(), format!("no number at {}", s.response)),
            Err(e) => {
                failed += 1;
                (
                    String::new(),
                    format!("failed: {}", e.replace([',', '\n'], " ")),
                )
            }
        };
        if let Err(e) = r {
            log::warn!("sweep point {i} failed: {e}");
        }
        table.row(vec![i.to_string(), value, response, status]);
    }
    let fit = match s.fit {
        Fit::None => None,
        Fit::Linear if xs.len() >= 3 => Some(fit_line(&xs, &ys)),
        Fit::Loglog if xs.len() >= 3 && xs.iter().chain(&ys).all(|v| *v > 0.0) => {
            Some(fit_loglog(&xs, &ys))
        }
        _ => None,
    };
    let summary = json!({
        "parameter": s.parameter,
        "response": s.response,
        "points": s.values.len(),
        "failed": failed,
        "fit": s.fit,
        "slope": fit.map(|f| f.slope),
        "slope_stderr": fit.map(|f| f.slope_stderr),
        "intercept": fit.map(|f| f.intercept),
    });
    Ok(Outcome::new(summary)?.with(table))
}
