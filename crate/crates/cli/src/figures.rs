//! Figure data as CSV.

use clap::ValueEnum;
use pairlink::optimize::{sweep_efficiency_optimum, sweep_lambda};
use pairlink::{Objective, ParametricSource};

use crate::{csv_line, fmt_num, CliError};

pub const DEFAULT_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigureName {
    Fig1,
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig5,
    FibreArray,
}

/// A set of lambda sweeps sharing one dark-count probability.
struct LambdaFigure {
    q: f64,
    columns: &'static [(Objective, f64)],
    log10_range: (f64, f64),
}

impl FigureName {
    fn lambda_figure(self) -> Option<LambdaFigure> {
        use Objective::*;
        let (q, columns, log10_range): (f64, &'static [(Objective, f64)], _) = match self {
            FigureName::Fig1 => (
                3.9e-8,
                &[(MutualInfo, 0.8), (MutualInfo, 0.7), (MutualInfo, 0.6)],
                (-3.0, 5f64.log10()),
            ),
            FigureName::Fig2a => (3.9e-6, &[(PerGenerated, 0.85), (PerGenerated, 0.6)], (-9.0, -1.0)),
            FigureName::Fig2b => (3.9e-8, &[(PerGenerated, 0.8), (PerGenerated, 0.6)], (-9.0, -1.0)),
            FigureName::Fig3a => (3.9e-6, &[(PerDetected, 0.8), (PerDetected, 0.4)], (-9.0, -1.0)),
            FigureName::Fig3b => (3.9e-8, &[(PerDetected, 0.8), (PerDetected, 0.4)], (-9.0, -1.0)),
            FigureName::FibreArray => (3e-7, &[(MutualInfo, 0.4), (PerGenerated, 0.4)], (-9.0, 0.0)),
            FigureName::Fig5 => return None,
        };
        Some(LambdaFigure {
            q,
            columns,
            log10_range,
        })
    }

    /// Default sweep range in log10(lambda); `None` for the efficiency sweep.
    pub fn default_log10_range(self) -> Option<(f64, f64)> {
        self.lambda_figure().map(|f| f.log10_range)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FigureOptions {
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub points: Option<usize>,
}

/// Efficiency grid 0.05, 0.06, ..., 1.00 without accumulated rounding.
pub fn efficiency_grid() -> Vec<f64> {
    (5..=100).map(|i| i as f64 / 100.0).collect()
}

pub fn render(name: FigureName, options: FigureOptions) -> Result<String, CliError> {
    let Some(figure) = name.lambda_figure() else {
        if options.lambda_min.is_some() || options.lambda_max.is_some() || options.points.is_some() {
            return Err(CliError::Usage(
                "fig5 sweeps the efficiency; lambda range and point flags do not apply".into(),
            ));
        }
        return render_efficiency();
    };
    let (mut lo, mut hi) = figure.log10_range;
    for (value, slot, flag) in [
        (options.lambda_min, &mut lo, "--lambda-min"),
        (options.lambda_max, &mut hi, "--lambda-max"),
    ] {
        if let Some(v) = value {
            if !(v.is_finite() && v > 0.0) {
                return Err(CliError::Usage(format!("{flag} must be a positive number, got {v}")));
            }
            *slot = v.log10();
        }
    }
    if lo >= hi {
        return Err(CliError::Usage(format!(
            "empty lambda range [{}, {}]",
            10f64.powf(lo),
            10f64.powf(hi)
        )));
    }
    let points = options.points.unwrap_or(DEFAULT_POINTS);
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }

    let curves = figure
        .columns
        .iter()
        .map(|&(objective, eta)| {
            sweep_lambda(ParametricSource::Poissonian, eta, figure.q, objective, (lo, hi), points)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut header = vec!["lambda".to_string()];
    if name == FigureName::FibreArray {
        header.extend(figure.columns.iter().map(|(o, _)| o.label().to_string()));
    } else {
        header.extend(figure.columns.iter().map(|(o, eta)| format!("{}_eta{eta}", o.label())));
    }
    let mut out = csv_line(&header);
    for i in 0..points {
        let mut row = vec![fmt_num(curves[0].points[i].0)];
        row.extend(curves.iter().map(|c| fmt_num(c.points[i].1)));
        out.push_str(&csv_line(&row));
    }
    Ok(out)
}

fn render_efficiency() -> Result<String, CliError> {
    let grid = efficiency_grid();
    let q = 3.9e-8;
    let ig = sweep_efficiency_optimum(q, &grid, Objective::PerGenerated)?;
    let id = sweep_efficiency_optimum(q, &grid, Objective::PerDetected)?;
    let mut out = csv_line(&["eta", "Ig_max", "Id_max"]);
    for ((eta, g), (_, d)) in ig.points.iter().zip(&id.points) {
        out.push_str(&csv_line(&[fmt_num(*eta), fmt_num(*g), fmt_num(*d)]));
    }
    Ok(out)
}
