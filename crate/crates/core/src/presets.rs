//! Built-in source models and lag sets.

use crate::signal_model::SourceSpec;

/// Source models of the efficiency comparison, selected by letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Three MA(10) series.
    A,
    /// Three AR series with a single coefficient 0.6 at lags 1, 2 and 3.
    B,
    /// Three ARMA(3, 6) series.
    C,
    /// Three AR(1) series with coefficients 0.6, 0.4, 0.2.
    D,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::A, Preset::B, Preset::C, Preset::D];

    pub fn name(self) -> &'static str {
        match self {
            Preset::A => "a",
            Preset::B => "b",
            Preset::C => "c",
            Preset::D => "d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s.trim()))
    }

    pub fn specs(self) -> Vec<SourceSpec> {
        match self {
            Preset::A => vec![
                SourceSpec::ma(vec![0.8, 3.8, 1.2, 1.4, 1.1, 0.5, 0.7, 0.3, 0.5, 1.8]),
                SourceSpec::ma(vec![-0.6, 1.3, -0.1, 1.3, 1.6, 0.4, 0.5, -0.4, 0.1, 2.8]),
                SourceSpec::ma(vec![-0.4, -1.5, 0.0, -1.1, -1.9, 0.0, -0.7, -0.4, -0.2, 0.4]),
            ],
            Preset::B => vec![
                SourceSpec::ar(vec![0.6]),
                SourceSpec::ar(vec![0.0, 0.6]),
                SourceSpec::ar(vec![0.0, 0.0, 0.6]),
            ],
            Preset::C => vec![
                SourceSpec::arma(vec![0.3, 0.3, -0.4], vec![-0.6, 0.3, 1.1, 1.0, -1.1, -0.3]),
                SourceSpec::arma(vec![0.2, 0.1, -0.4], vec![1.2, 2.8, -1.0, -1.0, 0.1, 0.1]),
                SourceSpec::arma(vec![0.2, 0.2, 0.4], vec![-1.4, -1.9, -0.5, -0.3, -0.4, 0.4]),
            ],
            Preset::D => vec![
                SourceSpec::ar(vec![0.6]),
                SourceSpec::ar(vec![0.4]),
                SourceSpec::ar(vec![0.2]),
            ],
        }
    }
}

/// Lags `1..=10`.
pub fn default_lags() -> Vec<usize> {
    (1..=10).collect()
}

fn steps(from: usize, to: usize, by: usize) -> impl Iterator<Item = usize> {
    (from..=to).step_by(by)
}

/// The four artifact-separation lag sets, numbered 1 to 4.
pub fn eeg_lag_set(n: usize) -> Option<Vec<usize>> {
    let short = || steps(1, 10, 1).chain(steps(12, 20, 2));
    let mid = || steps(25, 100, 5);
    let long = || steps(120, 300, 20);
    Some(match n {
        1 => short().chain(mid()).chain(long()).collect(),
        2 => short().collect(),
        3 => short().chain(mid()).collect(),
        4 => mid().chain(long()).collect(),
        _ => return None,
    })
}
