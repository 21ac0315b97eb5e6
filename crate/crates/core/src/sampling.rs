//! The two-round sampling algorithm.
//!
//! Round one draws n labeled points i.i.d. from the data distribution and
//! freezes the region estimate. If the augmented region has positive mass
//! (checked with unlabeled draws only), the bulk of the second-round
//! budget is spent rejection sampling from it; the remaining floor(pi m)
//! labels are drawn from the data distribution to keep the method
//! consistent. When the positivity check fails the rejection loop is
//! skipped entirely and the unused budget stays unspent.

use crate::classify::ClassifierBundle;
use crate::error::Error;
use crate::metric::{AugmentedPoint, LabeledSample, Metric, Point, Pool, Provenance};
use crate::oracle::OracleDistribution;
use crate::region::{derive_constants, region_measure_positive, HyperParams, RegionHandle};
use crate::rng::{stream, Stream};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Knobs that are not part of the analysis: sizes of the unlabeled pools
/// and the stall guard for the rejection loop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOptions {
    /// Unlabeled points frozen into the region handle as witnesses.
    pub witness_pool_size: usize,
    /// Unlabeled draws spent deciding whether the augmented region has
    /// positive mass.
    pub positivity_budget: usize,
    /// Abort the rejection loop after this many proposals.
    pub proposal_cap: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            witness_pool_size: 10_000,
            positivity_budget: 1_000,
            proposal_cap: 10_000_000,
        }
    }
}

/// Label and unlabeled-draw accounting for one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetLedger {
    pub labels_used: usize,
    pub labels_cap: usize,
    pub unlabeled_used: usize,
    pub rejected_proposals: usize,
}

impl BudgetLedger {
    pub fn new(labels_cap: usize) -> Self {
        BudgetLedger {
            labels_used: 0,
            labels_cap,
            unlabeled_used: 0,
            rejected_proposals: 0,
        }
    }

    fn charge_label(&mut self) -> Result<()> {
        if self.labels_used >= self.labels_cap {
            return Err(Error::LabelBudgetExhausted { cap: self.labels_cap });
        }
        self.labels_used += 1;
        Ok(())
    }
}

/// Everything a single run produces.
#[derive(Debug)]
pub struct SamplingOutcome {
    /// All labeled samples, in ingestion order (round 1, rejection
    /// round, round-2 draws from the data distribution).
    pub dataset: Vec<LabeledSample>,
    /// The frozen region when the positivity check succeeded; absent in
    /// fallback mode.
    pub region: Option<RegionHandle>,
    pub metric: Metric,
    pub ledger: BudgetLedger,
    pub positivity: bool,
    /// Non-fatal precondition violations (e.g. the speedup condition).
    pub warnings: Vec<String>,
}

/// A decidable acceptance region for rejection sampling.
pub trait AcceptRegion {
    fn accepts(&self, x: &Point) -> Result<bool>;
}

impl AcceptRegion for RegionHandle {
    fn accepts(&self, x: &Point) -> Result<bool> {
        self.augmented_member(x)
    }
}

/// An axis-aligned closed box; an oracle-known acceptance region for
/// calibrating the rejection sampler.
#[derive(Debug, Clone)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AcceptRegion for BoxRegion {
    fn accepts(&self, x: &Point) -> Result<bool> {
        if x.dim() != self.lo.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lo.len(),
                got: x.dim(),
            });
        }
        Ok(x.coords()
            .iter()
            .zip(self.lo.iter().zip(self.hi.iter()))
            .all(|(&c, (&lo, &hi))| c >= lo && c <= hi))
    }
}

fn bernoulli_label(eta: f64, rng: &mut ChaCha8Rng) -> u8 {
    u8::from(rng.random::<f64>() < eta)
}

/// Draw `count` labeled i.i.d. samples from the distribution.
fn draw_labeled(
    dist: &OracleDistribution,
    count: usize,
    provenance: Provenance,
    draw_rng: &mut ChaCha8Rng,
    tie_rng: &mut ChaCha8Rng,
    label_rng: &mut ChaCha8Rng,
    ledger: &mut BudgetLedger,
) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let x = dist
            .sample_instance_rng(1, draw_rng)
            .pop()
            .expect("one draw requested");
        let eta = dist.eta(&x)?;
        ledger.charge_label()?;
        let label = bernoulli_label(eta, label_rng);
        let tiebreak = tie_rng.random::<f64>();
        out.push(LabeledSample::new(
            AugmentedPoint::new(x, tiebreak)?,
            label,
            provenance,
        )?);
    }
    Ok(out)
}

/// Labeled i.i.d. sample of the given size, seed-addressed. Uses the same
/// stream layout as a full run, so a run and a standalone sample with the
/// same seed share their first draws.
pub fn sample_labeled(
    dist: &OracleDistribution,
    count: usize,
    provenance: Provenance,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let mut ledger = BudgetLedger::new(count);
    draw_labeled(
        dist,
        count,
        provenance,
        &mut stream(seed, Stream::Round1Draws),
        &mut stream(seed, Stream::TieBreaks),
        &mut stream(seed, Stream::LabelFlips),
        &mut ledger,
    )
}

/// Round one: n labeled draws plus the frozen region handle.
pub fn run_round1(
    dist: &OracleDistribution,
    params: &HyperParams,
    seed: u64,
) -> Result<(Vec<LabeledSample>, RegionHandle)> {
    run_round1_with(dist, params, &RunOptions::default(), seed)
}

pub fn run_round1_with(
    dist: &OracleDistribution,
    params: &HyperParams,
    opts: &RunOptions,
    seed: u64,
) -> Result<(Vec<LabeledSample>, RegionHandle)> {
    derive_constants(params)?;
    let mut ledger = BudgetLedger::new(params.n);
    let samples = draw_labeled(
        dist,
        params.n,
        Provenance::Round1,
        &mut stream(seed, Stream::Round1Draws),
        &mut stream(seed, Stream::TieBreaks),
        &mut stream(seed, Stream::LabelFlips),
        &mut ledger,
    )?;
    let witnesses = dist.sample_instance_rng(
        opts.witness_pool_size,
        &mut stream(seed, Stream::WitnessPool),
    );
    let handle = RegionHandle::build(dist.metric, samples.clone(), params, &witnesses)?;
    Ok((samples, handle))
}

/// What the rejection loop produced.
#[derive(Debug)]
pub struct RejectionOutcome {
    pub samples: Vec<LabeledSample>,
    pub proposals: usize,
    pub rejected: usize,
}

#[allow(clippy::too_many_arguments)]
fn rejection_loop(
    dist: &OracleDistribution,
    region: &dyn AcceptRegion,
    budget: usize,
    proposal_cap: usize,
    prop_rng: &mut ChaCha8Rng,
    tie_rng: &mut ChaCha8Rng,
    label_rng: &mut ChaCha8Rng,
    ledger: &mut BudgetLedger,
) -> Result<RejectionOutcome> {
    let mut samples = Vec::with_capacity(budget);
    let mut proposals = 0usize;
    while samples.len() < budget {
        if proposals >= proposal_cap {
            return Err(Error::RejectionStalled {
                proposals,
                accepted: samples.len(),
                wanted: budget,
            });
        }
        let x = dist
            .sample_instance_rng(1, prop_rng)
            .pop()
            .expect("one draw requested");
        proposals += 1;
        if region.accepts(&x)? {
            let eta = dist.eta(&x)?;
            ledger.charge_label()?;
            let label = bernoulli_label(eta, label_rng);
            let tiebreak = tie_rng.random::<f64>();
            samples.push(LabeledSample::new(
                AugmentedPoint::new(x, tiebreak)?,
                label,
                Provenance::Round2Rejection,
            )?);
        } else {
            ledger.unlabeled_used += 1;
            ledger.rejected_proposals += 1;
        }
    }
    Ok(RejectionOutcome {
        samples,
        proposals,
        rejected: proposals - budget,
    })
}

/// Rejection sample `budget` accepted points from the region; rejected
/// proposals consume no labels.
pub fn run_rejection_round(
    dist: &OracleDistribution,
    region: &dyn AcceptRegion,
    budget: usize,
    seed: u64,
) -> Result<RejectionOutcome> {
    run_rejection_round_with(dist, region, budget, RunOptions::default().proposal_cap, seed)
}

pub fn run_rejection_round_with(
    dist: &OracleDistribution,
    region: &dyn AcceptRegion,
    budget: usize,
    proposal_cap: usize,
    seed: u64,
) -> Result<RejectionOutcome> {
    let mut ledger = BudgetLedger::new(budget);
    rejection_loop(
        dist,
        region,
        budget,
        proposal_cap,
        &mut stream(seed, Stream::RejectionProposals),
        &mut stream(seed, Stream::TieBreaks),
        &mut stream(seed, Stream::LabelFlips),
        &mut ledger,
    )
}

/// Number of second-round draws taken from the data distribution.
pub fn round2_p_budget(params: &HyperParams) -> usize {
    (params.pi * params.m as f64).floor() as usize
}

/// Number of accepted samples the rejection round aims for.
pub fn rejection_budget(params: &HyperParams) -> usize {
    ((1.0 - params.pi) * params.m as f64).floor() as usize
}

/// The full two-round run.
pub fn run_algorithm(
    dist: &OracleDistribution,
    params: &HyperParams,
    seed: u64,
) -> Result<SamplingOutcome> {
    run_algorithm_with(dist, params, &RunOptions::default(), seed)
}

pub fn run_algorithm_with(
    dist: &OracleDistribution,
    params: &HyperParams,
    opts: &RunOptions,
    seed: u64,
) -> Result<SamplingOutcome> {
    let consts = derive_constants(params)?;
    let mut warnings = Vec::new();
    // Speedup precondition: m (1 - pi) c_delta >= n c_{delta/sqrt 2}.
    // Violations only weaken the guarantee, so they warn rather than abort.
    match crate::region::c_delta(params.k, params.delta / std::f64::consts::SQRT_2) {
        Ok(c_small) => {
            let lhs = params.m as f64 * (1.0 - params.pi) * consts.c_delta;
            let rhs = params.n as f64 * c_small;
            if lhs < rhs {
                warnings.push(format!(
                    "speedup precondition violated: m(1-pi) c_delta = {lhs:.3} < n c_(delta/sqrt2) = {rhs:.3}"
                ));
            }
        }
        Err(e) => warnings.push(format!("speedup precondition not evaluable: {e}")),
    }

    let mut ledger = BudgetLedger::new(params.n + params.m);
    let mut tie_rng = stream(seed, Stream::TieBreaks);
    let mut label_rng = stream(seed, Stream::LabelFlips);

    let mut dataset = draw_labeled(
        dist,
        params.n,
        Provenance::Round1,
        &mut stream(seed, Stream::Round1Draws),
        &mut tie_rng,
        &mut label_rng,
        &mut ledger,
    )?;
    let witnesses = dist.sample_instance_rng(
        opts.witness_pool_size,
        &mut stream(seed, Stream::WitnessPool),
    );
    ledger.unlabeled_used += witnesses.len();
    let handle = RegionHandle::build(dist.metric, dataset.clone(), params, &witnesses)?;

    let (positivity, probes) = region_measure_positive(
        &handle,
        dist,
        opts.positivity_budget,
        &mut stream(seed, Stream::PositivityProbe),
    )?;
    ledger.unlabeled_used += probes;

    if positivity {
        let rejection = rejection_loop(
            dist,
            &handle,
            rejection_budget(params),
            opts.proposal_cap,
            &mut stream(seed, Stream::RejectionProposals),
            &mut tie_rng,
            &mut label_rng,
            &mut ledger,
        )?;
        dataset.extend(rejection.samples);
    }

    let round2 = draw_labeled(
        dist,
        round2_p_budget(params),
        Provenance::Round2FromP,
        &mut stream(seed, Stream::Round2Draws),
        &mut tie_rng,
        &mut label_rng,
        &mut ledger,
    )?;
    dataset.extend(round2);

    debug_assert!(ledger.labels_used <= ledger.labels_cap);
    Ok(SamplingOutcome {
        dataset,
        region: positivity.then_some(handle),
        metric: dist.metric,
        ledger,
        positivity,
        warnings,
    })
}

impl ClassifierBundle {
    /// Assemble the modified classifier from a run: samples drawn from
    /// the data distribution in one pool, rejection samples in the other,
    /// routed by the run's region (plain k-NN over everything when the
    /// positivity check failed).
    pub fn from_outcome(outcome: SamplingOutcome, k: usize) -> Result<Self> {
        let metric = outcome.metric;
        let mut main = Vec::new();
        let mut rejection = Vec::new();
        for s in outcome.dataset {
            match s.provenance {
                Provenance::Round2Rejection => rejection.push(s),
                _ => main.push(s),
            }
        }
        ClassifierBundle::new(
            Pool::new(metric, main)?,
            Pool::new(metric, rejection)?,
            outcome.region,
            k,
        )
    }
}
