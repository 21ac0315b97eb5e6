//! The suite runner: dispatches seeded trials to a worker pool, collects
//! rows order-independently, and evaluates the acceptance gates.

use crate::config::ExperimentConfig;
use crate::results::{fnv1a64, ProvenanceBlock, ResultsBundle, Tri, TrialRow};
use crate::HarnessError;
use active_knn::classify::ClassifierBundle;
use active_knn::eval::{
    bootstrap_prob_mean_nonpositive, check_containment_augmented, check_containment_round1,
    estimate_both, estimate_event_rates, run_passive_baseline, ContainmentOutcome,
};
use active_knn::metric::Point;
use active_knn::oracle::OracleDistribution;
use active_knn::region::{c_delta, derive_constants, HyperParams};
use active_knn::rng::child_seed;
use active_knn::sampling::{rejection_budget, run_algorithm_with, run_round1_with};
use rayon::prelude::*;
use std::time::{SystemTime, UNIX_EPOCH};

/// The experiment suites the runner knows how to execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    /// Plain k-NN on the full budget versus the oracle boundary bound.
    PassiveBound,
    /// The two-round algorithm versus its oracle boundary bound.
    ActiveBound,
    /// Matched-budget active and passive runs on shared seeds.
    Paired,
    /// Grid audits of the two region containments.
    Containment,
    /// Vote-deviation and locality event frequencies at a fixed point.
    EventRates,
    /// Excess risk of the active classifier across a growing schedule.
    Consistency,
}

impl Suite {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "passive_bound" => Suite::PassiveBound,
            "active_bound" => Suite::ActiveBound,
            "paired" => Suite::Paired,
            "containment" => Suite::Containment,
            "event_rates" => Suite::EventRates,
            "consistency" => Suite::Consistency,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::PassiveBound => "passive_bound",
            Suite::ActiveBound => "active_bound",
            Suite::Paired => "paired",
            Suite::Containment => "containment",
            Suite::EventRates => "event_rates",
            Suite::Consistency => "consistency",
        }
    }
}

fn parse_suites(config: &ExperimentConfig) -> Result<Vec<Suite>, HarnessError> {
    config
        .suites
        .iter()
        .map(|name| {
            Suite::parse(name)
                .ok_or_else(|| HarnessError::Other(format!("unknown suite {name:?}")))
        })
        .collect()
}

/// Trial seed derivation: one process-wide seed, one counter per
/// (schedule row, trial) cell.
pub fn trial_seed(master: u64, schedule_index: usize, trial_index: usize) -> u64 {
    child_seed(master, ((schedule_index as u64) << 32) | trial_index as u64)
}

fn blank_row(
    suite: Suite,
    schedule_index: usize,
    trial_index: usize,
    seed: u64,
    row: (usize, usize, usize),
) -> TrialRow {
    TrialRow {
        suite: suite.name().to_string(),
        schedule_index,
        trial_index,
        seed,
        n: row.0,
        m: row.1,
        k: row.2,
        ..TrialRow::default()
    }
}

/// The oracle-side quantities a schedule row needs once, shared by all
/// of its trials.
struct ScheduleOracle {
    /// mu(X \ easy region) and the active-suite bound
    /// mu(boundary at p', Delta) + delta. Unavailable (with a reason)
    /// when the tighter c_(delta/sqrt 2) constant is undefined at this k.
    active: Result<(f64, f64), String>,
    /// Bound for the passive suite at budget n + m.
    passive_bound: f64,
}

fn schedule_oracle(
    dist: &OracleDistribution,
    params: &HyperParams,
) -> Result<ScheduleOracle, HarnessError> {
    let consts = derive_constants(params)?;
    let budget = params.n + params.m;
    let p_passive = consts.c_delta * params.k as f64 / budget as f64;
    let passive_bound =
        dist.margin_region_measure(p_passive.min(1.0), consts.big_delta)?.value + params.delta;
    let active = match c_delta(params.k, params.delta / std::f64::consts::SQRT_2) {
        Err(e) => Err(e.to_string()),
        Ok(c_small) => {
            let easy_complement = dist.easy_complement_measure(&consts)?.value;
            let denom = rejection_budget(params).max(1) as f64;
            let p_active = c_small * params.k as f64 * easy_complement / denom;
            let bound = dist
                .margin_region_measure(p_active.min(1.0), consts.big_delta)?
                .value
                + params.delta;
            Ok((easy_complement, bound))
        }
    };
    Ok(ScheduleOracle {
        active,
        passive_bound,
    })
}

fn run_active_trial(
    dist: &OracleDistribution,
    params: &HyperParams,
    config: &ExperimentConfig,
    oracle: &ScheduleOracle,
    seed: u64,
    row: &mut TrialRow,
) -> Result<(), HarnessError> {
    let (easy_complement, active_bound) = oracle
        .active
        .as_ref()
        .map_err(|e| HarnessError::Other(e.clone()))?;
    let out = run_algorithm_with(dist, params, &config.options, seed)?;
    let labels_used = out.ledger.labels_used;
    let bundle = ClassifierBundle::from_outcome(out, params.k)?;
    let (dis, excess) = estimate_both(&bundle, dist, config.mc_points, seed)?;
    row.disagreement_active = Some(dis.value);
    row.excess_risk_active = Some(excess.value);
    row.boundary_mass_bound = Some(*active_bound);
    row.easy_mass = Some(1.0 - easy_complement);
    row.labels_used = Some(labels_used as u64);
    Ok(())
}

fn run_passive_trial(
    dist: &OracleDistribution,
    params: &HyperParams,
    config: &ExperimentConfig,
    oracle: &ScheduleOracle,
    seed: u64,
    row: &mut TrialRow,
) -> Result<(), HarnessError> {
    let trial = run_passive_baseline(
        dist,
        params.n + params.m,
        params.k,
        params.delta,
        config.mc_points,
        seed,
    )?;
    row.disagreement_passive = Some(trial.disagreement.value);
    row.boundary_mass_bound = Some(oracle.passive_bound);
    row.labels_used = Some(trial.labels_used as u64);
    Ok(())
}

fn tri_of(outcome: ContainmentOutcome) -> Tri {
    match outcome {
        ContainmentOutcome::Holds => Tri::True,
        ContainmentOutcome::Violated => Tri::False,
        ContainmentOutcome::NotApplicable => Tri::NotApplicable,
    }
}

fn run_trial(
    suite: Suite,
    dist: &OracleDistribution,
    params: &HyperParams,
    config: &ExperimentConfig,
    oracle: &ScheduleOracle,
    row: &mut TrialRow,
) -> Result<(), HarnessError> {
    let seed = row.seed;
    match suite {
        Suite::PassiveBound => run_passive_trial(dist, params, config, oracle, seed, row),
        Suite::ActiveBound | Suite::Consistency => {
            run_active_trial(dist, params, config, oracle, seed, row)
        }
        Suite::Paired => {
            run_active_trial(dist, params, config, oracle, seed, row)?;
            run_passive_trial(dist, params, config, oracle, seed, row)?;
            // The paired bound column reports the active-side bound.
            if let Ok((_, active_bound)) = &oracle.active {
                row.boundary_mass_bound = Some(*active_bound);
            }
            Ok(())
        }
        Suite::Containment => {
            let (_, handle) = run_round1_with(dist, params, &config.options, seed)?;
            let per_axis = if dist.dim == 1 {
                config.grid_points
            } else {
                (config.grid_points as f64).sqrt().ceil() as usize
            };
            let grid = dist.support_grid(per_axis.max(2));
            row.containment_lemma1 = Some(tri_of(check_containment_round1(&handle, dist, &grid)?));
            row.containment_lemma9 =
                Some(tri_of(check_containment_augmented(&handle, dist, &grid)?));
            row.labels_used = Some(params.n as u64);
            Ok(())
        }
        Suite::EventRates => {
            let x = if dist.dim == 1 {
                Point::one_d(config.diagnostics.event_x)
            } else {
                Point::new(vec![config.diagnostics.event_x; dist.dim])?
            };
            let rates = estimate_event_rates(
                dist,
                params,
                &x,
                config.diagnostics.event_trials,
                config.diagnostics.event_margin,
                config.diagnostics.event_gamma,
                seed,
            )?;
            row.bv_event_rate = Some(rates.bad_vote);
            row.nl_event_rate = Some(rates.non_local);
            Ok(())
        }
    }
}

/// Run every requested suite over every schedule row and trial seed.
///
/// Trials execute on a worker pool and are collected order-independently;
/// rows are sorted by (suite order, schedule index, trial index) before
/// aggregation, so the output is byte-identical across thread counts.
/// Per-trial failures are recorded in the row's skip reason and never
/// abort the suite.
pub fn run_suite(config: &ExperimentConfig) -> Result<ResultsBundle, HarnessError> {
    let suites = parse_suites(config)?;
    let dist = config.distribution.build()?;

    // Per (suite, schedule) work descriptors, validated up front.
    enum Plan {
        Skip {
            reason: String,
        },
        Run {
            params: HyperParams,
            oracle: ScheduleOracle,
        },
    }
    let mut plans: Vec<(Suite, usize, Plan)> = Vec::new();
    for &suite in &suites {
        for (schedule_index, &row) in config.schedule.iter().enumerate() {
            let params = config.params_for(row, dist.d_vc);
            let plan = match derive_constants(&params) {
                Err(e) => Plan::Skip {
                    reason: e.to_string().replace(',', ";"),
                },
                Ok(_) => match schedule_oracle(&dist, &params) {
                    Err(e) => Plan::Skip {
                        reason: e.to_string().replace(',', ";"),
                    },
                    Ok(oracle) => Plan::Run { params, oracle },
                },
            };
            plans.push((suite, schedule_index, plan));
        }
    }

    let jobs: Vec<(Suite, usize, usize)> = plans
        .iter()
        .flat_map(|(suite, schedule_index, plan)| match plan {
            Plan::Skip { .. } => vec![(*suite, *schedule_index, 0usize)],
            Plan::Run { .. } => (0..config.trials)
                .map(|t| (*suite, *schedule_index, t))
                .collect(),
        })
        .collect();

    let execute = |&(suite, schedule_index, trial_index): &(Suite, usize, usize)| -> TrialRow {
        let sched_row = config.schedule[schedule_index];
        let seed = trial_seed(config.seed, schedule_index, trial_index);
        let mut row = blank_row(suite, schedule_index, trial_index, seed, sched_row);
        let plan = plans
            .iter()
            .find(|(s, idx, _)| *s == suite && *idx == schedule_index)
            .map(|(_, _, p)| p)
            .expect("plan exists for every job");
        match plan {
            Plan::Skip { reason } => {
                row.skip_reason = reason.clone();
            }
            Plan::Run { params, oracle } => {
                if let Err(e) = run_trial(suite, &dist, params, config, oracle, &mut row) {
                    row.skip_reason = e.to_string().replace(',', ";");
                }
            }
        }
        row
    };

    let mut rows: Vec<TrialRow> = if config.threads == 1 {
        jobs.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| HarnessError::Other(e.to_string()))?;
        pool.install(|| jobs.par_iter().map(execute).collect())
    };

    let suite_rank = |name: &str| {
        suites
            .iter()
            .position(|s| s.name() == name)
            .unwrap_or(usize::MAX)
    };
    rows.sort_by(|a, b| {
        suite_rank(&a.suite)
            .cmp(&suite_rank(&b.suite))
            .then(a.schedule_index.cmp(&b.schedule_index))
            .then(a.trial_index.cmp(&b.trial_index))
    });

    let provenance = ProvenanceBlock {
        config_hash: format!("{:016x}", fnv1a64(config.raw_text.as_bytes())),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        threads: config.threads,
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    Ok(ResultsBundle::from_rows(rows, provenance))
}

/// One acceptance gate's verdict.
#[derive(Debug, Clone)]
pub struct GateResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn binomial_slack(p: f64, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    3.0 * (p * (1.0 - p) / count as f64).sqrt()
}

fn violation_gate(
    name: String,
    rows: &[&TrialRow],
    value: impl Fn(&TrialRow) -> Option<(f64, f64)>,
    budget: f64,
) -> GateResult {
    let outcomes: Vec<bool> = rows
        .iter()
        .filter_map(|r| value(r).map(|(v, bound)| v > bound))
        .collect();
    if outcomes.is_empty() {
        return GateResult {
            name,
            passed: true,
            detail: "no decided trials".into(),
        };
    }
    let violations = outcomes.iter().filter(|&&v| v).count();
    let fraction = violations as f64 / outcomes.len() as f64;
    let allowed = budget + binomial_slack(budget, outcomes.len());
    GateResult {
        name,
        passed: fraction <= allowed,
        detail: format!(
            "{violations}/{} violations ({fraction:.4}) vs allowance {allowed:.4}",
            outcomes.len()
        ),
    }
}

/// Evaluate the built-in acceptance gates against a results bundle.
pub fn evaluate_gates(config: &ExperimentConfig, bundle: &ResultsBundle) -> Vec<GateResult> {
    let mut gates = Vec::new();
    let delta = config.hyper.delta;
    let schedules: Vec<usize> = (0..config.schedule.len()).collect();

    // Label conservation is always in force.
    let over_budget = bundle
        .rows
        .iter()
        .filter(|r| r.labels_used.is_some_and(|used| used as usize > r.n + r.m))
        .count();
    gates.push(GateResult {
        name: "label_ledger".into(),
        passed: over_budget == 0,
        detail: format!("{over_budget} rows over the n+m cap"),
    });

    for suite_name in &config.suites {
        let Some(suite) = Suite::parse(suite_name) else {
            continue;
        };
        match suite {
            Suite::PassiveBound => {
                for &s in &schedules {
                    let rows: Vec<&TrialRow> = bundle
                        .rows
                        .iter()
                        .filter(|r| r.suite == *suite_name && r.schedule_index == s)
                        .collect();
                    gates.push(violation_gate(
                        format!("passive_bound[{s}]"),
                        &rows,
                        |r| r.disagreement_passive.zip(r.boundary_mass_bound),
                        delta,
                    ));
                }
            }
            Suite::ActiveBound => {
                for &s in &schedules {
                    let rows: Vec<&TrialRow> = bundle
                        .rows
                        .iter()
                        .filter(|r| r.suite == *suite_name && r.schedule_index == s)
                        .collect();
                    gates.push(violation_gate(
                        format!("active_bound[{s}]"),
                        &rows,
                        |r| r.disagreement_active.zip(r.boundary_mass_bound),
                        delta,
                    ));
                }
            }
            Suite::Paired => {
                for &s in &schedules {
                    let diffs: Vec<f64> = bundle
                        .rows
                        .iter()
                        .filter(|r| r.suite == *suite_name && r.schedule_index == s)
                        .filter_map(|r| {
                            r.disagreement_active
                                .zip(r.disagreement_passive)
                                .map(|(a, p)| a - p)
                        })
                        .collect();
                    if diffs.is_empty() {
                        gates.push(GateResult {
                            name: format!("paired[{s}]"),
                            passed: true,
                            detail: "no decided trials".into(),
                        });
                        continue;
                    }
                    let p = bootstrap_prob_mean_nonpositive(&diffs, 10_000, config.seed);
                    gates.push(GateResult {
                        name: format!("paired[{s}]"),
                        passed: p >= 0.95,
                        detail: format!(
                            "bootstrap P(mean active <= passive) = {p:.4} over {} pairs",
                            diffs.len()
                        ),
                    });
                }
            }
            Suite::Containment => {
                for &s in &schedules {
                    let rows: Vec<&TrialRow> = bundle
                        .rows
                        .iter()
                        .filter(|r| r.suite == *suite_name && r.schedule_index == s)
                        .collect();
                    let tally = |pick: fn(&TrialRow) -> Option<Tri>| -> (usize, usize) {
                        let decided: Vec<Tri> = rows
                            .iter()
                            .filter_map(|r| pick(r))
                            .filter(|t| *t != Tri::NotApplicable)
                            .collect();
                        let violations =
                            decided.iter().filter(|t| **t == Tri::False).count();
                        (violations, decided.len())
                    };
                    let (v1, d1) = tally(|r| r.containment_lemma1);
                    let budget1 = delta * delta / 16.0;
                    let allowed1 = budget1 + binomial_slack(budget1, d1);
                    gates.push(GateResult {
                        name: format!("containment_round1[{s}]"),
                        passed: d1 == 0 || (v1 as f64 / d1 as f64) <= allowed1,
                        detail: format!("{v1}/{d1} violations vs allowance {allowed1:.4}"),
                    });
                    let (v9, d9) = tally(|r| r.containment_lemma9);
                    let budget9 = 3.0 * delta * delta / 32.0;
                    let allowed9 = budget9 + binomial_slack(budget9, d9);
                    gates.push(GateResult {
                        name: format!("containment_augmented[{s}]"),
                        passed: d9 == 0 || (v9 as f64 / d9 as f64) <= allowed9,
                        detail: format!("{v9}/{d9} violations vs allowance {allowed9:.4}"),
                    });
                }
            }
            Suite::EventRates => {
                for &s in &schedules {
                    let k = config.schedule[s].2 as f64;
                    let margin = config.diagnostics.event_margin;
                    let gamma = config.diagnostics.event_gamma;
                    let bv_bound = 2.0 * (-2.0 * k * margin * margin).exp();
                    let nl_bound = (-k * gamma * gamma / 2.0).exp();
                    let trials = config.diagnostics.event_trials;
                    let rows: Vec<&TrialRow> = bundle
                        .rows
                        .iter()
                        .filter(|r| r.suite == *suite_name && r.schedule_index == s)
                        .collect();
                    let bv_ok = rows.iter().all(|r| {
                        r.bv_event_rate
                            .map(|v| v <= bv_bound + binomial_slack(bv_bound.min(1.0), trials))
                            .unwrap_or(true)
                    });
                    let nl_ok = rows.iter().all(|r| {
                        r.nl_event_rate
                            .map(|v| v <= nl_bound + binomial_slack(nl_bound.min(1.0), trials))
                            .unwrap_or(true)
                    });
                    gates.push(GateResult {
                        name: format!("event_rates[{s}]"),
                        passed: bv_ok && nl_ok,
                        detail: format!("bounds bv <= {bv_bound:.4}, nl <= {nl_bound:.4}"),
                    });
                }
            }
            Suite::Consistency => {
                let mut medians = Vec::new();
                for &s in &schedules {
                    let agg = bundle.aggregates.iter().find(|a| {
                        a.suite == *suite_name
                            && a.schedule_index == s
                            && a.metric == "excess_risk_active"
                    });
                    if let Some(a) = agg {
                        medians.push(a.median);
                    }
                }
                let decreasing = medians.windows(2).all(|w| w[1] < w[0]);
                gates.push(GateResult {
                    name: "consistency_trend".into(),
                    passed: medians.len() < 2 || decreasing,
                    detail: format!("medians {medians:?}"),
                });
            }
        }
    }
    gates
}
