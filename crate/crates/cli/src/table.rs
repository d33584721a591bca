//! The `(c, rho)` sweep.

use std::io::Write;

use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use qvi_core::Field;

use crate::config::ExperimentConfig;
use crate::experiment::Experiment;
use crate::format::{seconds, sig};

pub const CSV_HEADER: [&str; 9] = [
    "case",
    "c",
    "rho",
    "probe_x",
    "value",
    "increment",
    "iterations",
    "runtime_s",
    "converged",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub case: String,
    pub c: f64,
    pub rho: f64,
    pub probe_x: f64,
    /// Regime-1 value at the probe node.
    pub value: Option<f64>,
    /// `||u^{c,rho} - u^{c,rho'}||` for the previous `rho'` of the row.
    pub increment: Option<f64>,
    pub iterations: Option<usize>,
    pub runtime_s: f64,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRun {
    pub config: ExperimentConfig,
    pub rows: Vec<TableRow>,
    /// Solutions in row order; `None` where the solve failed.
    #[serde(skip)]
    pub solutions: Vec<Option<Field>>,
}

impl TableRun {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    /// The row for `(c, rho)`, matched exactly.
    pub fn cell(&self, c: f64, rho: f64) -> Option<(&TableRow, Option<&Field>)> {
        self.rows
            .iter()
            .position(|r| r.c == c && r.rho == rho)
            .map(|k| (&self.rows[k], self.solutions[k].as_ref()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            let opt = |x: Option<f64>| x.map(|v| sig(v, 6)).unwrap_or_default();
            w.write_record([
                r.case.clone(),
                sig(r.c, 6),
                sig(r.rho, 6),
                sig(r.probe_x, 6),
                opt(r.value),
                opt(r.increment),
                r.iterations.map(|i| i.to_string()).unwrap_or_default(),
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

/// Solves every cell (in parallel) and assembles the rows in `(c, rho)`
/// order of the config.
pub fn run_table(config: &ExperimentConfig) -> Result<TableRun> {
    let exp = Experiment::new(config.clone())?;
    let probe = config.probe_index();
    let cells: Vec<(f64, f64)> = config
        .cost_list
        .iter()
        .flat_map(|&c| config.rho_list.iter().map(move |&rho| (c, rho)))
        .collect();
    let results: Vec<_> = cells
        .par_iter()
        .map(|&(c, rho)| (c, rho, exp.solve(c, rho)))
        .collect();

    let mut rows = Vec::with_capacity(results.len());
    let mut solutions: Vec<Option<Field>> = Vec::with_capacity(results.len());
    for (k, (c, rho, res)) in results.into_iter().enumerate() {
        let first_in_row = k % config.rho_list.len() == 0;
        let mut row = TableRow {
            case: config.case.name().to_string(),
            c,
            rho,
            probe_x: config.probe_point,
            value: None,
            increment: None,
            iterations: None,
            runtime_s: 0.0,
            converged: false,
            error: None,
        };
        match res {
            Ok((u, report)) => {
                row.value = Some(u.get(0, probe));
                row.iterations = Some(report.iterations);
                row.runtime_s = report.elapsed_seconds;
                row.converged = report.converged;
                if !first_in_row {
                    row.increment = solutions[k - 1].as_ref().map(|prev| u.sup_dist(prev));
                }
                solutions.push(Some(u));
            }
            Err(e) => {
                log::error!("c = {c}, rho = {rho}: {e:#}");
                row.error = Some(format!("{e:#}"));
                solutions.push(None);
            }
        }
        rows.push(row);
    }
    Ok(TableRun {
        config: config.clone(),
        rows,
        solutions,
    })
}
