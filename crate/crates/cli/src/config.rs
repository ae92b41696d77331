//! Scenario files.
//!
//! Flat `key = value` text, one pair per line, `#` starts a comment. Keys:
//!
//! | key                       | meaning                                        | default  |
//! |---------------------------|------------------------------------------------|----------|
//! | `name`                    | label echoed in the output                     | `scenario` |
//! | `source`                  | `poissonian`, `thermal` or `empirical`         | required |
//! | `lambda`                  | mean pairs per slot (poissonian / thermal)     | required for those |
//! | `probabilities`           | probability file (empirical), relative to the scenario file | required for empirical |
//! | `detector_efficiency`     | eta_d in [0, 1]                                | required |
//! | `transmission_efficiency` | eta_l in [0, 1]                                | required |
//! | `dark_rate`               | dark counts per second                         | required |
//! | `bin_width`               | slot width in seconds                          | required |
//! | `crosstalk_fraction`      | fraction of signal exchanged with a neighbour  | `0` |
//! | `outcome_count`           | number of slots M                              | `1` |
//! | `objective`               | `H`, `Ig` or `Id`                              | `H` |
//!
//! Unknown or repeated keys are rejected.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pairlink::{Objective, PairDistribution};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub origin: String,
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.origin)?;
        if let Some(line) = self.line {
            write!(f, ":{line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": {field}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Poissonian { lambda: f64 },
    Thermal { lambda: f64 },
    Empirical { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub source: SourceSpec,
    pub detector_efficiency: f64,
    pub transmission_efficiency: f64,
    pub dark_rate: f64,
    pub bin_width: f64,
    pub crosstalk_fraction: f64,
    pub outcome_count: u64,
    pub objective: Objective,
}

const KEYS: [&str; 11] = [
    "name",
    "source",
    "lambda",
    "probabilities",
    "detector_efficiency",
    "transmission_efficiency",
    "dark_rate",
    "bin_width",
    "crosstalk_fraction",
    "outcome_count",
    "objective",
];

pub fn parse_objective(text: &str) -> Option<Objective> {
    match text {
        "H" | "h" => Some(Objective::MutualInfo),
        "Ig" | "ig" => Some(Objective::PerGenerated),
        "Id" | "id" => Some(Objective::PerDetected),
        _ => None,
    }
}

struct Entries<'a> {
    origin: &'a str,
    values: HashMap<&'a str, (usize, &'a str)>,
}

impl<'a> Entries<'a> {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            origin: self.origin.to_string(),
            line: self.values.get(key).map(|(line, _)| *line),
            field: Some(key.to_string()),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&'a str> {
        self.values.get(key).map(|(_, v)| *v)
    }

    fn required(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.raw(key).ok_or_else(|| self.err(key, "missing required key"))
    }

    fn number(&self, key: &str, text: &str) -> Result<f64, ConfigError> {
        let v: f64 = text
            .parse()
            .map_err(|_| self.err(key, format!("cannot parse {text:?} as a number")))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err(key, format!("value {text} is not finite")))
        }
    }

    fn unit(&self, key: &str, text: &str) -> Result<f64, ConfigError> {
        let v = self.number(key, text)?;
        if (0.0..=1.0).contains(&v) {
            Ok(v)
        } else {
            Err(self.err(key, format!("value {v} is outside [0, 1]")))
        }
    }

    fn nonnegative(&self, key: &str, text: &str) -> Result<f64, ConfigError> {
        let v = self.number(key, text)?;
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(self.err(key, format!("value {v} is negative")))
        }
    }
}

impl ScenarioConfig {
    /// Parses scenario text. `base_dir` resolves relative probability paths.
    pub fn parse(text: &str, origin: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut entries = Entries {
            origin,
            values: HashMap::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let line_err = |field: Option<&str>, message: String| ConfigError {
                origin: origin.to_string(),
                line: Some(line_no),
                field: field.map(str::to_string),
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| line_err(None, format!("expected `key = value`, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(line_err(Some(key), "unknown key".into()));
            }
            if value.is_empty() {
                return Err(line_err(Some(key), "empty value".into()));
            }
            if let Some((first, _)) = entries.values.insert(key, (line_no, value)) {
                return Err(line_err(Some(key), format!("repeats line {first}")));
            }
        }

        let name = entries.raw("name").unwrap_or("scenario").to_string();
        if name.contains([',', '"', '\n', '\r']) {
            return Err(entries.err("name", "must not contain commas or quotes"));
        }

        let kind = entries.required("source")?;
        let needs_lambda = |e: &Entries<'_>| -> Result<f64, ConfigError> {
            if e.raw("probabilities").is_some() {
                return Err(e.err("probabilities", format!("not used by a {kind} source")));
            }
            e.nonnegative("lambda", e.required("lambda")?)
        };
        let source = match kind {
            "poissonian" => SourceSpec::Poissonian {
                lambda: needs_lambda(&entries)?,
            },
            "thermal" => SourceSpec::Thermal {
                lambda: needs_lambda(&entries)?,
            },
            "empirical" => {
                if entries.raw("lambda").is_some() {
                    return Err(entries.err("lambda", "not used by an empirical source"));
                }
                SourceSpec::Empirical {
                    path: base_dir.join(entries.required("probabilities")?),
                }
            }
            other => {
                return Err(entries.err(
                    "source",
                    format!("unknown source {other:?}; expected poissonian, thermal or empirical"),
                ))
            }
        };

        let detector_efficiency =
            entries.unit("detector_efficiency", entries.required("detector_efficiency")?)?;
        let transmission_efficiency = entries.unit(
            "transmission_efficiency",
            entries.required("transmission_efficiency")?,
        )?;
        let dark_rate = entries.nonnegative("dark_rate", entries.required("dark_rate")?)?;
        let bin_width = entries.nonnegative("bin_width", entries.required("bin_width")?)?;
        if dark_rate * bin_width > 1.0 {
            return Err(entries.err(
                "dark_rate",
                format!("dark_rate * bin_width = {} exceeds 1", dark_rate * bin_width),
            ));
        }
        let crosstalk_fraction = match entries.raw("crosstalk_fraction") {
            Some(v) => entries.unit("crosstalk_fraction", v)?,
            None => 0.0,
        };
        let outcome_count = match entries.raw("outcome_count") {
            Some(v) => match v.parse::<u64>() {
                Ok(m) if m >= 1 => m,
                _ => return Err(entries.err("outcome_count", format!("expected a positive integer, got {v:?}"))),
            },
            None => 1,
        };
        let objective = match entries.raw("objective") {
            Some(v) => parse_objective(v)
                .ok_or_else(|| entries.err("objective", format!("expected H, Ig or Id, got {v:?}")))?,
            None => Objective::MutualInfo,
        };

        Ok(Self {
            name,
            source,
            detector_efficiency,
            transmission_efficiency,
            dark_rate,
            bin_width,
            crosstalk_fraction,
            outcome_count,
            objective,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            origin: origin.clone(),
            line: None,
            field: None,
            message: format!("cannot read: {e}"),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &origin, base)
    }

    /// Builds the pair distribution, reading the probability file if any.
    pub fn distribution(&self) -> Result<PairDistribution, ConfigError> {
        let field_err = |field: &str, e: pairlink::Error| ConfigError {
            origin: "scenario".into(),
            line: None,
            field: Some(field.into()),
            message: e.to_string(),
        };
        match &self.source {
            SourceSpec::Poissonian { lambda } => {
                PairDistribution::poissonian(*lambda).map_err(|e| field_err("lambda", e))
            }
            SourceSpec::Thermal { lambda } => {
                PairDistribution::thermal(*lambda).map_err(|e| field_err("lambda", e))
            }
            SourceSpec::Empirical { path } => {
                PairDistribution::from_file(path).map_err(|e| field_err("probabilities", e))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIBRE: &str = "\
# fibre array, 8 inputs on one detector
name = fibre-array
source = poissonian
lambda = 1e-6
detector_efficiency = 0.4
transmission_efficiency = 1
dark_rate = 300
bin_width = 1e-9
outcome_count = 8
objective = Ig
";

    fn parse(text: &str) -> Result<ScenarioConfig, ConfigError> {
        ScenarioConfig::parse(text, "test.cfg", Path::new("/data"))
    }

    #[test]
    fn parses_full_scenario() {
        let c = parse(FIBRE).unwrap();
        assert_eq!(c.name, "fibre-array");
        assert_eq!(c.source, SourceSpec::Poissonian { lambda: 1e-6 });
        assert_eq!(c.detector_efficiency, 0.4);
        assert_eq!(c.outcome_count, 8);
        assert_eq!(c.objective, Objective::PerGenerated);
        assert_eq!(c.crosstalk_fraction, 0.0);
    }

    #[test]
    fn rejects_out_of_range_efficiency() {
        let text = FIBRE.replace("detector_efficiency = 0.4", "detector_efficiency = 1.2");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("detector_efficiency"));
        assert_eq!(err.line, Some(5));
        assert!(err.to_string().contains("detector_efficiency"), "{err}");
    }

    #[test]
    fn rejects_unknown_and_repeated_keys() {
        let err = parse(&format!("{FIBRE}detector_eficiency = 0.3\n")).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("detector_eficiency"));
        assert_eq!(err.line, Some(11));
        let err = parse(&format!("{FIBRE}lambda = 0.3\n")).unwrap_err();
        assert!(err.message.contains("repeats line 4"), "{err}");
        assert!(parse("source poissonian\n").is_err());
    }

    #[test]
    fn validates_values() {
        let cases = [
            ("outcome_count = 8", "outcome_count = 0", "outcome_count"),
            ("dark_rate = 300", "dark_rate = 2e9", "dark_rate"),
            ("lambda = 1e-6", "lambda = -1", "lambda"),
            ("objective = Ig", "objective = bits", "objective"),
            ("source = poissonian", "source = laser", "source"),
            ("bin_width = 1e-9", "bin_width = abc", "bin_width"),
            ("name = fibre-array", "name = a,b", "name"),
        ];
        for (from, to, field) in cases {
            let err = parse(&FIBRE.replace(from, to)).unwrap_err();
            assert_eq!(err.field.as_deref(), Some(field), "{err}");
        }
        let err = parse(&FIBRE.replace("lambda = 1e-6\n", "")).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("lambda"));
        assert_eq!(err.message, "missing required key");
    }

    #[test]
    fn empirical_paths_are_relative_to_the_file() {
        let text = FIBRE
            .replace("source = poissonian", "source = empirical")
            .replace("lambda = 1e-6", "probabilities = probs.txt");
        let c = parse(&text).unwrap();
        assert_eq!(c.source, SourceSpec::Empirical { path: PathBuf::from("/data/probs.txt") });
        let both = format!("{text}lambda = 0.1\n");
        assert_eq!(parse(&both).unwrap_err().field.as_deref(), Some("lambda"));
    }
}
