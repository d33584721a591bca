//! Experiment configuration: a JSON document, optionally overridden by
//! command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use qvi_core::{NewtonConfig, PdeParams, RewardFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Case {
    TwoRegime,
    ThreeRegime,
    Custom,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::TwoRegime => "two-regime",
            Case::ThreeRegime => "three-regime",
            Case::Custom => "custom",
        }
    }

    /// Penalty parameters of the reference sweep for this case.
    pub fn default_rhos(self) -> Vec<f64> {
        let base = match self {
            Case::ThreeRegime => 4e3,
            _ => 1e3,
        };
        (0..6).map(|k| base * f64::from(1u32 << k)).collect()
    }

    pub fn default_costs(self) -> Vec<f64> {
        let (first, step, count) = match self {
            Case::ThreeRegime => (4.0, 4.0, 7),
            _ => (2.0, 4.0, 6),
        };
        let mut costs: Vec<f64> = (0..count)
            .map(|k| 1.0 / (first * f64::powi(step, k)))
            .collect();
        costs.push(0.0);
        costs
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// The on-disk form; every field but `case` is optional.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    case: Case,
    #[serde(default)]
    rho_list: Option<Vec<f64>>,
    #[serde(default)]
    cost_list: Option<Vec<f64>>,
    #[serde(default)]
    probe_point: Option<f64>,
    #[serde(default)]
    newton: Option<NewtonConfig>,
    #[serde(default)]
    output_path: Option<PathBuf>,
    #[serde(default)]
    format: Option<OutputFormat>,
    #[serde(default)]
    pde: Option<PdeParams>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub case: Case,
    pub rho_list: Vec<f64>,
    pub cost_list: Vec<f64>,
    pub probe_point: f64,
    pub newton: NewtonConfig,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    pub pde: PdeParams,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub case: Option<Case>,
    pub rho_list: Option<Vec<f64>>,
    pub cost_list: Option<Vec<f64>>,
    pub tol: Option<f64>,
    pub output_path: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

impl ExperimentConfig {
    /// Defaults of the reference experiment for `case` (not available for
    /// the custom case, which needs grid parameters).
    pub fn for_case(case: Case) -> Result<Self> {
        let pde = match case {
            Case::TwoRegime => PdeParams::two_regime(),
            Case::ThreeRegime => PdeParams::three_regime(),
            Case::Custom => bail!("the custom case needs a config file with a `pde` section"),
        };
        let cfg = Self {
            case,
            rho_list: case.default_rhos(),
            cost_list: case.default_costs(),
            probe_point: pde.default_probe(),
            newton: NewtonConfig::default(),
            output_path: None,
            format: OutputFormat::Csv,
            pde,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ConfigFile = serde_json::from_str(text).context("malformed experiment config")?;
        Self::from_raw(raw, &Overrides::default())
    }

    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let raw: ConfigFile = serde_json::from_str(&text)
            .with_context(|| format!("malformed experiment config {}", path.display()))?;
        Self::from_raw(raw, overrides)
    }

    /// Config from flags alone.
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        let case = overrides.case.unwrap_or(Case::TwoRegime);
        let mut cfg = Self::for_case(case)?;
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_raw(raw: ConfigFile, overrides: &Overrides) -> Result<Self> {
        let case = overrides.case.unwrap_or(raw.case);
        let pde = match (case, raw.pde) {
            (_, Some(p)) => p,
            (Case::TwoRegime, None) => PdeParams::two_regime(),
            (Case::ThreeRegime, None) => PdeParams::three_regime(),
            (Case::Custom, None) => bail!("the custom case needs a `pde` section"),
        };
        let mut cfg = Self {
            case,
            rho_list: raw.rho_list.unwrap_or_else(|| case.default_rhos()),
            cost_list: raw.cost_list.unwrap_or_else(|| case.default_costs()),
            probe_point: raw.probe_point.unwrap_or_else(|| pde.default_probe()),
            newton: raw.newton.unwrap_or_default(),
            output_path: raw.output_path,
            format: raw.format.unwrap_or_default(),
            pde,
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(r) = &o.rho_list {
            self.rho_list = r.clone();
        }
        if let Some(c) = &o.cost_list {
            self.cost_list = c.clone();
        }
        if let Some(t) = o.tol {
            self.newton.tol = t;
        }
        if let Some(p) = &o.output_path {
            self.output_path = Some(p.clone());
        }
        if let Some(f) = o.format {
            self.format = f;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pde.validate()?;
        self.newton.validate()?;
        let expected_regimes = match self.case {
            Case::TwoRegime => Some(2),
            Case::ThreeRegime => Some(3),
            Case::Custom => None,
        };
        if let Some(d) = expected_regimes {
            if self.pde.regimes != d {
                bail!("case {} needs {d} regimes, pde has {}", self.case.name(), self.pde.regimes);
            }
        }
        if self.case == Case::Custom && !matches!(self.pde.reward, RewardFunction::Custom(_)) {
            bail!("the custom case needs a custom reward table");
        }
        if self.rho_list.is_empty() {
            bail!("rho_list is empty");
        }
        if let Some(r) = self.rho_list.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            bail!("penalty parameter {r} must be finite and non-negative");
        }
        if self.rho_list.windows(2).any(|w| w[1] <= w[0]) {
            bail!("rho_list must be strictly increasing");
        }
        if self.cost_list.is_empty() {
            bail!("cost_list is empty");
        }
        if let Some(c) = self.cost_list.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
            bail!("switching cost {c} must be finite and non-negative");
        }
        if self.pde.node_index(self.probe_point).is_none() {
            bail!(
                "probe point {} is not a grid node (h = {})",
                self.probe_point,
                self.pde.h()
            );
        }
        Ok(())
    }

    pub fn probe_index(&self) -> usize {
        self.pde.node_index(self.probe_point).expect("validated")
    }
}

/// Parses a comma-separated list of numbers; entries may be fractions such
/// as `1/2048`.
pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(parse_number)
        .collect()
}

fn parse_number(s: &str) -> Result<f64> {
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().with_context(|| format!("bad number {s:?}"))?;
            let den: f64 = den.trim().parse().with_context(|| format!("bad number {s:?}"))?;
            if den == 0.0 {
                bail!("zero denominator in {s:?}");
            }
            Ok(num / den)
        }
        None => s.parse().with_context(|| format!("bad number {s:?}")),
    }
}
