//! The zero-cost limit over the configured penalty schedule.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use qvi_core::hjb_limit_solve;

use crate::config::ExperimentConfig;
use crate::experiment::Experiment;
use crate::format::{seconds, sig};

pub const CSV_HEADER: [&str; 8] = [
    "case",
    "rho",
    "probe_x",
    "value",
    "regime_gap",
    "iterations",
    "runtime_s",
    "converged",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HjbRow {
    pub case: String,
    pub rho: f64,
    pub probe_x: f64,
    pub value: f64,
    /// `max_{i,j} ||u^{rho,i} - u^{rho,j}||`.
    pub regime_gap: f64,
    pub iterations: usize,
    pub runtime_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HjbRun {
    pub rows: Vec<HjbRow>,
    /// Regime-wise maximum of the last solve.
    pub collapsed: Vec<f64>,
}

impl HjbRun {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.case.clone(),
                sig(r.rho, 6),
                sig(r.probe_x, 6),
                sig(r.value, 6),
                sig(r.regime_gap, 6),
                r.iterations.to_string(),
                seconds(r.runtime_s),
                r.converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

pub fn run_hjb(config: &ExperimentConfig) -> Result<HjbRun> {
    let exp = Experiment::new(config.clone())?;
    let probe = config.probe_index();
    let cfg = exp.newton_at(*config.rho_list.last().expect("validated"));
    let sol = hjb_limit_solve(&exp.system, &config.rho_list, &cfg)?;
    let rows = sol
        .rhos
        .iter()
        .zip(&sol.solutions)
        .zip(&sol.reports)
        .zip(&sol.regime_gaps)
        .map(|(((&rho, u), rep), &gap)| HjbRow {
            case: config.case.name().to_string(),
            rho,
            probe_x: config.probe_point,
            value: u.get(0, probe),
            regime_gap: gap,
            iterations: rep.iterations,
            runtime_s: rep.elapsed_seconds,
            converged: rep.converged,
        })
        .collect();
    Ok(HjbRun {
        rows,
        collapsed: sol.collapsed,
    })
}
