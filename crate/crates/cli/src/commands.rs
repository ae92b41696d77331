//! `eval` and `optimize`.

use std::fmt::Write as _;

use pairlink::detection::{dark_count_probability, fold_crosstalk};
use pairlink::optimize::{maximize_log10, objective_value, DEFAULT_LOG10_BRACKET};
use pairlink::{InfoReport, LinkParams, Objective, OptimizationResult, ParametricSource};

use crate::config::{ScenarioConfig, SourceSpec};
use crate::{csv_line, fmt_num, CliError};

/// Efficiency and dark-count probability before crosstalk.
pub fn base_link(config: &ScenarioConfig) -> Result<(f64, f64), CliError> {
    let eta = config.detector_efficiency * config.transmission_efficiency;
    let q = dark_count_probability(config.dark_rate, config.bin_width)?;
    Ok((eta, q))
}

#[derive(Debug, Clone)]
pub struct EvalOutput {
    pub name: String,
    pub report: InfoReport,
    pub outcome_count: u64,
    pub key_bits: f64,
}

impl EvalOutput {
    pub const CSV_HEADER: [&'static str; 10] = [
        "name",
        "source",
        "mean_pairs",
        "eta",
        "q",
        "mutual_info_bits",
        "info_per_generated_bits",
        "info_per_detected_bits",
        "outcome_count",
        "key_bits",
    ];

    pub fn render_csv(&self) -> String {
        let r = &self.report;
        let row = [
            self.name.clone(),
            r.source.kind().to_string(),
            fmt_num(r.mean_pairs()),
            fmt_num(r.link.eta()),
            fmt_num(r.link.q()),
            fmt_num(r.mutual_info_bits),
            fmt_num(r.info_per_generated_bits),
            fmt_num(r.info_per_detected_bits),
            self.outcome_count.to_string(),
            fmt_num(self.key_bits),
        ];
        csv_line(&Self::CSV_HEADER) + &csv_line(&row)
    }

    pub fn render_text(&self) -> String {
        let r = &self.report;
        let mut out = String::new();
        let rows: [(&str, String); 10] = [
            ("scenario", self.name.clone()),
            ("source", r.source.kind().to_string()),
            ("mean pairs per slot", fmt_num(r.mean_pairs())),
            ("efficiency eta", fmt_num(r.link.eta())),
            ("dark-count probability q", fmt_num(r.link.q())),
            ("H(A:B) bits per slot", fmt_num(r.mutual_info_bits)),
            ("Ig bits per generated pair", fmt_num(r.info_per_generated_bits)),
            ("Id bits per detected pair", fmt_num(r.info_per_detected_bits)),
            ("outcome slots M", self.outcome_count.to_string()),
            ("key bits M*H", fmt_num(self.key_bits)),
        ];
        for (label, value) in rows {
            let _ = writeln!(out, "{label:<28} {value}");
        }
        out
    }
}

pub fn eval(config: &ScenarioConfig) -> Result<EvalOutput, CliError> {
    let source = config.distribution()?;
    let (eta, q) = base_link(config)?;
    let link = if config.crosstalk_fraction > 0.0 {
        fold_crosstalk(eta, q, config.crosstalk_fraction, source.mean_pairs())?
    } else {
        LinkParams::new(eta, q)?
    };
    let report = InfoReport::evaluate(&source, &link)?;
    let key_bits = report.key_bits(config.outcome_count);
    Ok(EvalOutput {
        name: config.name.clone(),
        report,
        outcome_count: config.outcome_count,
        key_bits,
    })
}

fn parametric(config: &ScenarioConfig) -> Result<ParametricSource, CliError> {
    match config.source {
        SourceSpec::Poissonian { .. } => Ok(ParametricSource::Poissonian),
        SourceSpec::Thermal { .. } => Ok(ParametricSource::Thermal),
        SourceSpec::Empirical { .. } => Err(CliError::Runtime(
            "an empirical source has no brightness parameter to optimize; \
             use a poissonian or thermal source"
                .into(),
        )),
    }
}

/// Maximizes the scenario objective over lambda. Crosstalk, when present,
/// is re-folded at every trial brightness.
pub fn optimize(
    config: &ScenarioConfig,
    objective: Option<Objective>,
    log10_bracket: Option<(f64, f64)>,
) -> Result<OptimizationResult, CliError> {
    let source = parametric(config)?;
    let objective = objective.unwrap_or(config.objective);
    let bracket = log10_bracket.unwrap_or(DEFAULT_LOG10_BRACKET);
    let (eta, q) = base_link(config)?;
    let fraction = config.crosstalk_fraction;
    let f = |lam: f64| {
        let link = fold_crosstalk(eta, q, fraction, lam)?;
        objective_value(source, link.eta(), link.q(), objective, lam)
    };
    let (lambda_star, value, iterations) = maximize_log10(f, bracket)?;
    Ok(OptimizationResult {
        lambda_star,
        objective_value: value,
        objective,
        iterations,
        bracket,
    })
}

pub const OPTIMIZE_CSV_HEADER: [&str; 6] = [
    "objective",
    "lambda_star",
    "objective_value",
    "iterations",
    "log10_bracket_low",
    "log10_bracket_high",
];

pub fn render_optimization(result: &OptimizationResult, csv: bool) -> String {
    if csv {
        let row = [
            result.objective.label().to_string(),
            fmt_num(result.lambda_star),
            fmt_num(result.objective_value),
            result.iterations.to_string(),
            fmt_num(result.bracket.0),
            fmt_num(result.bracket.1),
        ];
        return csv_line(&OPTIMIZE_CSV_HEADER) + &csv_line(&row);
    }
    let mut out = String::new();
    let _ = writeln!(out, "{:<18} {}", "objective", result.objective.label());
    let _ = writeln!(out, "{:<18} {}", "lambda*", fmt_num(result.lambda_star));
    let _ = writeln!(out, "{:<18} {}", "value (bits)", fmt_num(result.objective_value));
    let _ = writeln!(out, "{:<18} {}", "iterations", result.iterations);
    let _ = writeln!(
        out,
        "{:<18} [1e{}, 1e{}]",
        "bracket",
        result.bracket.0,
        result.bracket.1
    );
    out
}
