//! Sharpness functionals against their limiting values as ρ shrinks.

use crate::densela::{Vector, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::losses;
use crate::sharpness::{ascent_sharpness, avg_sharpness, limiting_regularizers, worst_sharpness, AscentSharpness, WorstOptions};

use super::config::ExperimentConfig;
use super::emit::{fmt, Table};
use super::summary::{Claim, RunSummary};

/// Required error ratio when ρ halves.
pub const SHRINK_RATIO: f64 = 0.7;

/// One `(point, ρ)` cell of the scan; values are divided by `ρ²`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanRow {
    pub point: usize,
    pub rho: f64,
    pub r_max: f64,
    pub s_max: f64,
    pub r_avg: f64,
    pub r_avg_stderr: f64,
    pub s_avg: f64,
    pub r_asc: Option<f64>,
    pub s_asc: f64,
}

impl ScanRow {
    pub fn max_error(&self) -> f64 {
        (self.r_max - self.s_max).abs()
    }

    /// `|R^Avg/ρ² − S^Avg|` beyond three standard errors.
    pub fn avg_excess(&self) -> f64 {
        ((self.r_avg - self.s_avg).abs() - 3.0 * self.r_avg_stderr).max(0.0)
    }
}

/// Worst ratio `err(ρ_{i+1}) / err(ρ_i)` over consecutive ρ, counting a pair
/// as `0` when the later error is at most `floor`.
pub fn worst_shrink(errors: &[f64], floor: f64) -> f64 {
    errors
        .windows(2)
        .map(|w| if w[1] <= floor { 0.0 } else { w[1] / w[0] })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `ln err` against `ln ρ` over positive errors.
pub fn log_slope(rhos: &[f64], errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rhos.iter().zip(errors).filter(|(_, e)| **e > 0.0).map(|(r, e)| (r.ln(), e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub struct ScanRun {
    pub summary: RunSummary,
    pub rows: Vec<ScanRow>,
    pub table: Table,
}

pub fn run_sharpness_scan(cfg: &ExperimentConfig) -> Result<ScanRun> {
    let loss = cfg.build_loss()?;
    let mut rhos = cfg.rhos.clone();
    rhos.sort_by(|a, b| b.total_cmp(a));
    let mut summary = RunSummary::new(cfg);
    let mut rows = Vec::new();
    let mut table = Table::new(
        "scan",
        &["point", "rho", "r_max_over_rho2", "s_max", "r_avg_over_rho2", "r_avg_stderr_over_rho2", "s_avg", "r_asc_over_rho2", "s_asc"],
    );
    if cfg.points.is_empty() {
        return Err(Error::Config("sharpness-scan needs at least one point".into()));
    }
    for (i, p) in cfg.points.iter().enumerate() {
        let x = Vector::from(p.clone());
        x.check_dim(loss.dim())?;
        let lim = limiting_regularizers(loss.as_ref(), &x, DEFAULT_RANK_TOL)?;
        let grad_norm = losses::evaluate(loss.as_ref(), &x)?.1.norm();
        let mut point_rows = Vec::new();
        for &rho in &rhos {
            let r2 = rho * rho;
            let worst = worst_sharpness(loss.as_ref(), &x, rho, &WorstOptions { seed: cfg.seed, ..WorstOptions::default() })?;
            let avg = avg_sharpness(loss.as_ref(), &x, rho, cfg.mc_samples, cfg.seed)?;
            let asc = ascent_sharpness(loss.as_ref(), &x, rho)?;
            let row = ScanRow {
                point: i,
                rho,
                r_max: worst.value / r2,
                s_max: lim.s_max,
                r_avg: avg.mean / r2,
                r_avg_stderr: avg.stderr / r2,
                s_avg: lim.s_avg,
                r_asc: asc.finite().map(|v| v / r2),
                s_asc: lim.s_asc,
            };
            table.push(vec![
                i.to_string(),
                fmt(rho),
                fmt(row.r_max),
                fmt(row.s_max),
                fmt(row.r_avg),
                fmt(row.r_avg_stderr),
                fmt(row.s_avg),
                row.r_asc.map_or("undefined".into(), fmt),
                fmt(row.s_asc),
            ]);
            point_rows.push(row);
            if let AscentSharpness::Undefined = asc {
                if rho == rhos[0] {
                    summary.push(Claim::label(
                        &format!("scan.p{i}.asc_undefined"),
                        &format!("R^Asc at point {i} (‖∇L‖ = {grad_norm:e})"),
                        "undefined",
                        "undefined",
                        "definition: the ascent direction needs a nonzero gradient",
                    ));
                }
            }
        }

        let max_err: Vec<f64> = point_rows.iter().map(ScanRow::max_error).collect();
        let floor = 1e-9 * lim.s_max.abs().max(1.0);
        summary.push(Claim::at_most(
            &format!("scan.p{i}.max_shrink"),
            &format!("|R^Max/ρ² − λ₁/2| shrinks by ≤ {SHRINK_RATIO} per ρ step (errors {max_err:?}; zero-error pairs count as 0)"),
            worst_shrink(&max_err, floor),
            SHRINK_RATIO,
            "oracle: Taylor remainder O(ρ) around λ₁/2",
        ));
        let avg_excess: Vec<f64> = point_rows.iter().map(ScanRow::avg_excess).collect();
        summary.push(Claim::at_most(
            &format!("scan.p{i}.avg_shrink"),
            &format!("|R^Avg/ρ² − Tr/(2D)| beyond 3·stderr shrinks by ≤ {SHRINK_RATIO} per ρ step (excess {avg_excess:?})"),
            worst_shrink(&avg_excess, 0.0),
            SHRINK_RATIO,
            "oracle: Tr/(2D) from the analytic Hessian, Monte-Carlo error 3·stderr",
        ));
        let above: Vec<f64> = max_err.iter().map(|e| if *e > floor { *e } else { 0.0 }).collect();
        if let Some(s) = log_slope(&rhos, &above) {
            summary.note(format!("point {i}: slope of ln|R^Max/ρ² − λ₁/2| against ln ρ is {s:.3}"));
        }
        let avg_err: Vec<f64> = point_rows.iter().map(|r| (r.r_avg - r.s_avg).abs()).collect();
        if let Some(s) = log_slope(&rhos, &avg_err) {
            summary.note(format!("point {i}: slope of ln|R^Avg/ρ² − Tr/(2D)| against ln ρ is {s:.3}"));
        }
        rows.extend(point_rows);
    }
    Ok(ScanRun { summary, rows, table })
}
