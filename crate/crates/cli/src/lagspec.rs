//! Lag-set notation: comma-separated items `k`, `a-b` or `a-b:step`, e.g.
//! `1-10,12-20:2`. The names `eeg1` to `eeg4` and `default` select built-in
//! sets.

use anyhow::{bail, Context, Result};
use sobi::presets::{default_lags, eeg_lag_set};

pub fn parse_lags(spec: &str) -> Result<Vec<usize>> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("default") {
        return Ok(default_lags());
    }
    if let Some(n) = spec.strip_prefix("eeg").and_then(|n| n.parse::<usize>().ok()) {
        return eeg_lag_set(n).with_context(|| format!("no built-in lag set eeg{n}; use eeg1 to eeg4"));
    }
    let mut lags = Vec::new();
    for item in spec.split(',').map(str::trim) {
        if item.is_empty() {
            bail!("empty item in lag set '{spec}'");
        }
        let (range, step) = match item.split_once(':') {
            Some((r, s)) => (r, s.parse::<usize>().with_context(|| format!("bad step in '{item}'"))?),
            None => (item, 1),
        };
        if step == 0 {
            bail!("step must be positive in '{item}'");
        }
        let (from, to) = match range.split_once('-') {
            Some((a, b)) => (parse_lag(a)?, parse_lag(b)?),
            None => {
                let k = parse_lag(range)?;
                (k, k)
            }
        };
        if from > to {
            bail!("empty range '{item}'");
        }
        lags.extend((from..=to).step_by(step));
    }
    for (i, k) in lags.iter().enumerate() {
        if lags[..i].contains(k) {
            bail!("lag {k} listed twice in '{spec}'");
        }
    }
    Ok(lags)
}

fn parse_lag(s: &str) -> Result<usize> {
    let k: usize = s.trim().parse().with_context(|| format!("'{s}' is not a lag"))?;
    if k == 0 {
        bail!("lags must be positive");
    }
    Ok(k)
}

/// Space-separated lag list for reports.
pub fn format_lags(lags: &[usize]) -> String {
    lags.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}
