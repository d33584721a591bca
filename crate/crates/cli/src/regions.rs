//! Switching-region reports over the configured `(c, rho)` grid.

use std::io::Write;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use qvi_core::{extract_regions, Costs, MonotoneSystem, RegionReport};

use crate::config::ExperimentConfig;
use crate::experiment::Experiment;

#[derive(Debug, Clone, Serialize)]
pub struct RegionEntry {
    pub c: f64,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<RegionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionRun {
    pub case: String,
    pub entries: Vec<RegionEntry>,
}

impl RegionRun {
    /// Every solve succeeded and every exact region sits inside its estimate.
    pub fn ok(&self) -> bool {
        self.entries
            .iter()
            .all(|e| e.report.as_ref().is_some_and(|r| r.inclusion))
    }

    pub fn entry(&self, c: f64, rho: f64) -> Option<&RegionEntry> {
        self.entries.iter().find(|e| e.c == c && e.rho == rho)
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

/// Region reports for every positive cost and every `rho > 1` of the
/// config; `c0` is estimated per cell when absent.
pub fn run_regions(config: &ExperimentConfig, c0: Option<f64>) -> Result<RegionRun> {
    let exp = Experiment::new(config.clone())?;
    let d = exp.system.regimes();
    let cells: Vec<(f64, f64)> = config
        .cost_list
        .iter()
        .filter(|c| **c > 0.0)
        .flat_map(|&c| config.rho_list.iter().filter(|r| **r > 1.0).map(move |&r| (c, r)))
        .collect();
    let entries = cells
        .par_iter()
        .map(|&(c, rho)| {
            let res = Costs::uniform(d, c)
                .map_err(anyhow::Error::from)
                .and_then(|costs| Ok(extract_regions(&exp.system, &costs, rho, c0, &config.newton)?));
            match res {
                Ok(report) => RegionEntry {
                    c,
                    rho,
                    report: Some(report),
                    error: None,
                },
                Err(e) => {
                    log::error!("regions at c = {c}, rho = {rho}: {e:#}");
                    RegionEntry {
                        c,
                        rho,
                        report: None,
                        error: Some(format!("{e:#}")),
                    }
                }
            }
        })
        .collect();
    Ok(RegionRun {
        case: config.case.name().to_string(),
        entries,
    })
}
