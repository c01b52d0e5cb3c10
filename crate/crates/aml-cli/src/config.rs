//! Flat `key=value` training configuration files.

use anyhow::{anyhow, bail, Context, Result};
use aml::sparse::{BatchSchedule, TrainConfig};

pub fn parse_schedule(s: &str) -> Result<BatchSchedule> {
    let s = s.trim();
    if s == "full" {
        return Ok(BatchSchedule::Full);
    }
    if let Some(n) = s.strip_prefix("fixed:") {
        return Ok(BatchSchedule::Fixed(n.trim().parse().context("fixed batch size")?));
    }
    if let Some(rest) = s.strip_prefix("linear:") {
        let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            bail!("linear schedule needs start,end_fraction,ramp");
        }
        return Ok(BatchSchedule::Linear {
            start: parts[0].parse().context("linear start")?,
            end_fraction: parts[1].parse().context("linear end fraction")?,
            ramp: parts[2].parse().context("linear ramp")?,
        });
    }
    Err(anyhow!("unknown schedule {s:?} (expected full, fixed:N or linear:START,FRACTION,RAMP)"))
}

pub fn apply(config: &mut TrainConfig, key: &str, value: &str) -> Result<()> {
    let v = value.trim();
    let bad = || format!("bad value {v:?} for {key}");
    match key.trim() {
        "gamma" => config.gamma = v.parse().with_context(bad)?,
        "kappa" => config.kappa = v.parse().with_context(bad)?,
        "delta" => config.delta = v.parse().with_context(bad)?,
        "schedule" => config.schedule = parse_schedule(v)?,
        "max_batches" => config.max_batches = v.parse().with_context(bad)?,
        "stop_on_zero_training_error" => config.stop_on_zero_training_error = v.parse().with_context(bad)?,
        "error_every" => config.error_every = v.parse().with_context(bad)?,
        "reduce_dual" => config.reduce_dual = v.parse().with_context(bad)?,
        "seed" => config.seed = v.parse().with_context(bad)?,
        other => bail!("unknown configuration key {other:?}"),
    }
    Ok(())
}

/// Applies every `key=value` line of `text` on top of `config`. Blank lines
/// and `#` comments are skipped.
pub fn parse_into(config: &mut TrainConfig, text: &str) -> Result<()> {
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key=value", no + 1))?;
        apply(config, k, v).with_context(|| format!("line {}", no + 1))?;
    }
    Ok(())
}
