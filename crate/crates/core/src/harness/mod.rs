//! Experiment drivers behind the `samlab` CLI. Each experiment returns a
//! [`RunSummary`] of checked claims plus CSV tables.

pub mod config;
pub mod emit;
pub mod explicit;
pub mod flow;
pub mod minimize;
pub mod quadratic;
pub mod scan;
pub mod selftest;
pub mod summary;
pub mod toy;

pub use config::{Experiment, ExperimentConfig, Overrides};
pub use emit::Table;
pub use summary::{Claim, RunSummary};

use std::path::PathBuf;

use crate::error::Result;

pub struct Outcome {
    pub summary: RunSummary,
    pub tables: Vec<Table>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    Ok(match cfg.experiment {
        Experiment::Quadratic => {
            let r = quadratic::run_quadratic(cfg)?;
            Outcome { summary: r.summary, tables: vec![emit::trajectory_table(&r.trajectory)] }
        }
        Experiment::Toy4d => {
            let r = toy::run_toy4d(cfg)?;
            Outcome { summary: r.summary, tables: vec![emit::trajectory_table(&r.trajectory)] }
        }
        Experiment::FlowCompare => {
            let r = flow::run_flow_compare(cfg)?;
            let dim = r.trajectory.dim;
            Outcome {
                tables: vec![
                    emit::trajectory_table(&r.trajectory),
                    emit::curve_table("flow", dim, &r.flow.samples),
                    emit::curve_table("control", dim, &r.control.samples),
                ],
                summary: r.summary,
            }
        }
        Experiment::SharpnessScan => {
            let r = scan::run_sharpness_scan(cfg)?;
            Outcome { summary: r.summary, tables: vec![r.table] }
        }
        Experiment::ExplicitBias => {
            let r = explicit::run_explicit_bias(cfg)?;
            let dim = cfg.box_lo.len();
            let mut header = vec!["start".to_string()];
            header.extend((1..=dim).map(|i| format!("x{i}")));
            header.extend(["objective".to_string(), "iterations".to_string()]);
            let mut t = Table { name: "starts".into(), header, rows: vec![] };
            for (i, s) in r.starts.iter().enumerate() {
                let mut row = vec![i.to_string()];
                match s {
                    Some(m) => {
                        row.extend(m.x.iter().copied().map(emit::fmt));
                        row.push(emit::fmt(m.value));
                        row.push(m.iterations.to_string());
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), dim + 2)),
                }
                t.push(row);
            }
            Outcome { summary: r.summary, tables: vec![t] }
        }
        Experiment::Selftest => Outcome { summary: selftest::run_selftest(cfg)?, tables: vec![] },
    })
}

/// Checks the output directory, runs the experiment and writes its files.
pub fn execute(cfg: &ExperimentConfig) -> Result<(Outcome, PathBuf)> {
    let dir = cfg.prepare_out_dir()?;
    let outcome = run_experiment(cfg)?;
    emit::write_all(&dir, &outcome.summary, &outcome.tables)?;
    Ok((outcome, dir))
}
