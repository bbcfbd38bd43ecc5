//! Model files: `{"components": [...], "omega": [[...]], "mu": [...]}` with
//! `omega` given row by row. Both `omega` and `mu` are optional.

use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sobi::presets::Preset;
use sobi::signal_model::{MixingModel, SourceSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub components: Vec<SourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
}

impl ModelFile {
    pub fn from_preset(preset: Preset) -> Self {
        Self { components: preset.specs(), omega: None, mu: None }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).context("invalid model JSON")?;
        model.validate()?;
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Either a model file or a built-in preset letter.
    pub fn resolve(path: Option<&Path>, preset: Option<&str>) -> Result<Self> {
        match (path, preset) {
            (Some(p), None) => Self::load(p),
            (None, Some(name)) => Preset::parse(name)
                .map(Self::from_preset)
                .with_context(|| format!("unknown preset '{name}'; use a, b, c or d")),
            (Some(_), Some(_)) => bail!("give either a model file or a preset, not both"),
            (None, None) => bail!("a model file or a preset is required"),
        }
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            bail!("model has no components");
        }
        for (i, c) in self.components.iter().enumerate() {
            c.validate().with_context(|| format!("component {i}"))?;
        }
        self.mixing()?;
        Ok(())
    }

    pub fn mixing(&self) -> Result<MixingModel> {
        let p = self.p();
        let omega = match &self.omega {
            None => DMatrix::identity(p, p),
            Some(rows) => {
                if rows.len() != p || rows.iter().any(|r| r.len() != p) {
                    bail!("omega must be {p}x{p}");
                }
                DMatrix::from_fn(p, p, |r, c| rows[r][c])
            }
        };
        let mu = self.mu.as_ref().map(|m| DVector::from_column_slice(m));
        Ok(MixingModel::new(omega, mu)?)
    }
}
