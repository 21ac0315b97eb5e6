//! The experiment config format.
//!
//! A flat, human-writable key = value file with sectioned tables:
//!
//! ```text
//! # comment
//! [experiment]
//! name = demo
//! seed = 42
//! trials = 50
//! mc_points = 20000
//! suites = passive_bound active_bound
//! assert_gates = true
//!
//! [distribution]
//! family = uniform1d_linear        # or uniform1d_piecewise,
//!                                  # uniform1d_constant, uniform2d_linear
//! slope = 8.0                      # family parameters as needed
//! plateau = 0.35
//!
//! [hyperparams]
//! delta = 0.2
//! pi = 0.1
//! zeta = 0.0
//! c0 = 1.0
//! c1 = 1.0
//! c2 = 1.0
//!
//! [options]
//! witness_pool = 10000
//! positivity_budget = 1000
//! proposal_cap = 10000000
//! grid_points = 1000
//!
//! [diagnostics]
//! event_x = 0.5
//! event_margin = 0.1
//! event_gamma = 0.5
//! event_trials = 200
//!
//! [schedule]
//! n m k
//! 2000 0 60
//! ```
//!
//! Unknown sections or keys are errors; every trial seed derives from the
//! single `seed` value, so there is no implicit entropy anywhere.

use active_knn::oracle::OracleDistribution;
use active_knn::region::HyperParams;
use active_knn::sampling::RunOptions;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing required key: {0}")]
    Missing(String),

    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        message: message.into(),
    }
}

/// Distribution family selection by name plus a parameter map.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

impl DistributionSpec {
    pub fn build(&self) -> Result<OracleDistribution, ConfigError> {
        let get = |key: &str, default: f64| self.params.get(key).copied().unwrap_or(default);
        let check_keys = |allowed: &[&str]| -> Result<(), ConfigError> {
            for key in self.params.keys() {
                if !allowed.contains(&key.as_str()) {
                    return Err(ConfigError::Value {
                        key: key.clone(),
                        message: format!("unknown parameter for family {}", self.family),
                    });
                }
            }
            Ok(())
        };
        match self.family.as_str() {
            "uniform1d_linear" => {
                check_keys(&[])?;
                Ok(OracleDistribution::uniform1d_linear())
            }
            "uniform1d_piecewise" => {
                check_keys(&["slope", "plateau"])?;
                OracleDistribution::uniform1d_piecewise(get("slope", 1.0), get("plateau", 0.25))
                    .map_err(|e| ConfigError::Value {
                        key: "slope/plateau".into(),
                        message: e.to_string(),
                    })
            }
            "uniform1d_constant" => {
                check_keys(&["eta"])?;
                OracleDistribution::uniform1d_constant(get("eta", 0.5)).map_err(|e| {
                    ConfigError::Value {
                        key: "eta".into(),
                        message: e.to_string(),
                    }
                })
            }
            "uniform2d_linear" => {
                check_keys(&[])?;
                Ok(OracleDistribution::uniform2d_linear())
            }
            other => Err(ConfigError::Value {
                key: "family".into(),
                message: format!("unknown family {other}"),
            }),
        }
    }
}

/// Analysis parameters shared across a schedule (n, m, k come per row).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperTemplate {
    pub delta: f64,
    pub pi: f64,
    pub zeta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for HyperTemplate {
    fn default() -> Self {
        HyperTemplate {
            delta: 0.2,
            pi: 0.1,
            zeta: 0.0,
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

/// Event-rate diagnostic knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub event_x: f64,
    pub event_margin: f64,
    pub event_gamma: f64,
    pub event_trials: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            event_x: 0.5,
            event_margin: 0.1,
            event_gamma: 0.5,
            event_trials: 200,
        }
    }
}

/// A fully parsed experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub trials: usize,
    pub mc_points: usize,
    pub suites: Vec<String>,
    pub threads: usize,
    pub assert_gates: bool,
    pub distribution: DistributionSpec,
    pub hyper: HyperTemplate,
    pub options: RunOptions,
    pub grid_points: usize,
    pub diagnostics: Diagnostics,
    /// (n, m, k) rows.
    pub schedule: Vec<(usize, usize, usize)>,
    /// The raw config text, for provenance hashing.
    pub raw_text: String,
}

impl ExperimentConfig {
    /// Hyper-parameters for one schedule row; d_vc comes from the
    /// distribution descriptor.
    pub fn params_for(&self, row: (usize, usize, usize), d_vc: usize) -> HyperParams {
        HyperParams {
            n: row.0,
            m: row.1,
            k: row.2,
            delta: self.hyper.delta,
            pi: self.hyper.pi,
            zeta: self.hyper.zeta,
            c0: self.hyper.c0,
            c1: self.hyper.c1,
            c2: self.hyper.c2,
            d_vc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Experiment,
    Distribution,
    Hyperparams,
    Options,
    Diagnostics,
    Schedule,
}

/// Parse a config from its textual form.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut section = Section::None;
    let mut name = String::from("experiment");
    let mut seed: Option<u64> = None;
    let mut trials: Option<usize> = None;
    let mut mc_points: Option<usize> = None;
    let mut suites: Vec<String> = Vec::new();
    let mut threads = 0usize;
    let mut assert_gates = false;
    let mut family: Option<String> = None;
    let mut dist_params: BTreeMap<String, f64> = BTreeMap::new();
    let mut hyper = HyperTemplate::default();
    let mut options = RunOptions::default();
    let mut grid_points = 1000usize;
    let mut diagnostics = Diagnostics::default();
    let mut schedule: Vec<(usize, usize, usize)> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(section_name) = rest.strip_suffix(']') else {
                return Err(parse_err(line_no, "unterminated section header"));
            };
            section = match section_name.trim() {
                "experiment" => Section::Experiment,
                "distribution" => Section::Distribution,
                "hyperparams" => Section::Hyperparams,
                "options" => Section::Options,
                "diagnostics" => Section::Diagnostics,
                "schedule" => Section::Schedule,
                other => return Err(parse_err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        if section == Section::Schedule {
            // Tolerate a literal header row.
            let squashed: String = line.split([' ', '\t', ',']).collect::<Vec<_>>().join("");
            if squashed == "nmk" {
                continue;
            }
            let fields: Vec<&str> = line
                .split([' ', '\t', ','])
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() != 3 {
                return Err(parse_err(
                    line_no,
                    format!("schedule row needs 3 fields (n m k), got {}", fields.len()),
                ));
            }
            let mut parsed = [0usize; 3];
            for (slot, field) in parsed.iter_mut().zip(fields.iter()) {
                *slot = field
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("bad integer {field:?}")))?;
            }
            schedule.push((parsed[0], parsed[1], parsed[2]));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(line_no, "expected key = value"));
        };
        let key = key.trim();
        let value = value.trim();
        let fnum = || -> Result<f64, ConfigError> {
            value
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad number {value:?} for {key}")))
        };
        let unum = || -> Result<usize, ConfigError> {
            value
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad integer {value:?} for {key}")))
        };
        match section {
            Section::None => {
                return Err(parse_err(line_no, "key outside any section"));
            }
            Section::Experiment => match key {
                "name" => name = value.to_string(),
                "seed" => {
                    seed = Some(value.parse().map_err(|_| {
                        parse_err(line_no, format!("bad seed {value:?}"))
                    })?)
                }
                "trials" => trials = Some(unum()?),
                "mc_points" => mc_points = Some(unum()?),
                "threads" => threads = unum()?,
                "assert_gates" => {
                    assert_gates = match value {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(parse_err(
                                line_no,
                                format!("assert_gates must be true/false, got {other:?}"),
                            ))
                        }
                    }
                }
                "suites" => {
                    suites = value
                        .split([' ', ',', '\t'])
                        .filter(|s| !s.is_empty())
                        .map(str::to_string)
                        .collect();
                }
                other => return Err(parse_err(line_no, format!("unknown experiment key {other}"))),
            },
            Section::Distribution => match key {
                "family" => family = Some(value.to_string()),
                param => {
                    if dist_params.insert(param.to_string(), fnum()?).is_some() {
                        return Err(parse_err(line_no, format!("duplicate parameter {param}")));
                    }
                }
            },
            Section::Hyperparams => match key {
                "delta" => hyper.delta = fnum()?,
                "pi" => hyper.pi = fnum()?,
                "zeta" => hyper.zeta = fnum()?,
                "c0" => hyper.c0 = fnum()?,
                "c1" => hyper.c1 = fnum()?,
                "c2" => hyper.c2 = fnum()?,
                other => return Err(parse_err(line_no, format!("unknown hyperparam {other}"))),
            },
            Section::Options => match key {
                "witness_pool" => options.witness_pool_size = unum()?,
                "positivity_budget" => options.positivity_budget = unum()?,
                "proposal_cap" => options.proposal_cap = unum()?,
                "grid_points" => grid_points = unum()?,
                other => return Err(parse_err(line_no, format!("unknown option {other}"))),
            },
            Section::Diagnostics => match key {
                "event_x" => diagnostics.event_x = fnum()?,
                "event_margin" => diagnostics.event_margin = fnum()?,
                "event_gamma" => diagnostics.event_gamma = fnum()?,
                "event_trials" => diagnostics.event_trials = unum()?,
                other => return Err(parse_err(line_no, format!("unknown diagnostic {other}"))),
            },
            Section::Schedule => unreachable!("handled above"),
        }
    }

    let seed = seed.ok_or_else(|| ConfigError::Missing("seed".into()))?;
    let trials = trials.ok_or_else(|| ConfigError::Missing("trials".into()))?;
    let mc_points = mc_points.ok_or_else(|| ConfigError::Missing("mc_points".into()))?;
    let family = family.ok_or_else(|| ConfigError::Missing("distribution family".into()))?;
    if suites.is_empty() {
        return Err(ConfigError::Missing("suites".into()));
    }
    if schedule.is_empty() {
        return Err(ConfigError::Missing("schedule rows".into()));
    }
    let distribution = DistributionSpec {
        family,
        params: dist_params,
    };
    // Fail fast on a bad family or family parameters.
    distribution.build()?;
    Ok(ExperimentConfig {
        name,
        seed,
        trials,
        mc_points,
        suites,
        threads,
        assert_gates,
        distribution,
        hyper,
        options,
        grid_points,
        diagnostics,
        schedule,
        raw_text: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = "\
# demo config
[experiment]
name = demo
seed = 42
trials = 3
mc_points = 500
suites = passive_bound, active_bound

[distribution]
family = uniform1d_piecewise
slope = 8.0
plateau = 0.35

[hyperparams]
delta = 0.2
pi = 0.1

[schedule]
n m k
1000 1000 60
2000,2000,80
";

    #[test]
    fn parses_sections_and_schedule() {
        let cfg = parse_config_str(GOOD).unwrap();
        assert_eq!(cfg.name, "demo");
        assert_eq!(cfg.seed, 42);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.suites, vec!["passive_bound", "active_bound"]);
        assert_eq!(cfg.schedule, vec![(1000, 1000, 60), (2000, 2000, 80)]);
        assert_eq!(cfg.distribution.family, "uniform1d_piecewise");
        assert_eq!(cfg.hyper.delta, 0.2);
        cfg.distribution.build().unwrap();
    }

    #[test]
    fn missing_seed_is_an_error() {
        let text = GOOD.replace("seed = 42", "");
        assert!(matches!(
            parse_config_str(&text),
            Err(ConfigError::Missing(_))
        ));
    }

    #[test]
    fn unknown_key_is_an_error_with_line() {
        let text = GOOD.replace("pi = 0.1", "pie = 0.1");
        match parse_config_str(&text) {
            Err(ConfigError::Parse { line, .. }) => assert!(line > 0),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_schedule_row_is_an_error() {
        let text = GOOD.replace("2000,2000,80", "2000,2000");
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn unknown_family_is_an_error() {
        let text = GOOD.replace("uniform1d_piecewise", "gaussian_mixture");
        assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn parser_never_panics_on_junk() {
        for junk in [
            "",
            "[",
            "]]",
            "[experiment]\nseed",
            "[schedule]\n1 2 3",
            "\u{0}\u{1}garbage",
            "[experiment]\nseed = -1",
        ] {
            let _ = parse_config_str(junk);
        }
    }
}
