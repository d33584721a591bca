//! A single penalized solve: the first cost and first `rho` of the config.

use std::io::Write;

use anyhow::Result;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::table::{run_table, TableRow, TableRun};

#[derive(Debug, Clone, Serialize)]
pub struct SolveOutput {
    pub row: TableRow,
    pub grid: Vec<f64>,
    /// Solution values, one vector per regime.
    pub solution: Option<Vec<Vec<f64>>>,
}

pub fn run_solve(config: &ExperimentConfig) -> Result<(TableRun, SolveOutput)> {
    let mut one = config.clone();
    one.cost_list.truncate(1);
    one.rho_list.truncate(1);
    let run = run_table(&one)?;
    let solution = run.solutions[0].as_ref().map(|u| {
        (0..u.regimes()).map(|i| u.regime(i).to_vec()).collect()
    });
    let out = SolveOutput {
        row: run.rows[0].clone(),
        grid: config.pde.grid(),
        solution,
    };
    Ok((run, out))
}

impl SolveOutput {
    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}
