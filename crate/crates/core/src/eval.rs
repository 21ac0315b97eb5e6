//! Statistical estimators and diagnostic checkers.
//!
//! Turns the guarantees into desk-scale measurements: Monte-Carlo
//! disagreement and excess-risk estimates against the Bayes classifier,
//! grid-based containment audits of the region estimates, per-point event
//! rates for the vote-deviation and non-locality events, and a brute-force
//! shattering search for the augmented neighbor balls.

use crate::classify::{classify_standard, ClassifierBundle};
use crate::error::Error;
use crate::metric::{Metric, Point, Pool, Provenance};
use crate::oracle::OracleDistribution;
use crate::region::{c_delta, vote_margin, HyperParams, RegionHandle};
use crate::rng::{child_seed, stream, Stream};
use crate::sampling::sample_labeled;
use crate::Result;
use rand::Rng;

/// A Monte-Carlo estimate with its binomial / sample standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

/// Anything that predicts a binary label at a point.
pub trait Classifier: Sync {
    fn classify_point(&self, x: &Point) -> Result<u8>;
}

impl Classifier for ClassifierBundle {
    fn classify_point(&self, x: &Point) -> Result<u8> {
        self.classify(x)
    }
}

/// Plain k-NN over a fixed pool.
#[derive(Debug, Clone)]
pub struct StandardKnn {
    pub pool: Pool,
    pub k: usize,
}

impl Classifier for StandardKnn {
    fn classify_point(&self, x: &Point) -> Result<u8> {
        classify_standard(&self.pool, x, self.k)
    }
}

impl<F> Classifier for F
where
    F: Fn(&Point) -> Result<u8> + Sync,
{
    fn classify_point(&self, x: &Point) -> Result<u8> {
        self(x)
    }
}

/// Disagreement with the Bayes classifier and pointwise excess risk,
/// estimated on one shared stream of fresh draws so the dominance
/// excess <= disagreement holds sample by sample.
pub fn estimate_both(
    classifier: &dyn Classifier,
    dist: &OracleDistribution,
    mc_points: usize,
    seed: u64,
) -> Result<(Estimate, Estimate)> {
    let mut rng = stream(seed, Stream::MonteCarlo);
    let mut disagreements = 0usize;
    let mut excess_sum = 0.0f64;
    let mut excess_sq = 0.0f64;
    for _ in 0..mc_points {
        let x = dist.sample_instance_rng(1, &mut rng).pop().expect("one draw");
        let predicted = classifier.classify_point(&x)?;
        let bayes = dist.bayes_classify(&x)?;
        if predicted != bayes {
            disagreements += 1;
            let e = (2.0 * dist.eta(&x)? - 1.0).abs();
            excess_sum += e;
            excess_sq += e * e;
        }
    }
    let n = mc_points as f64;
    let dis = disagreements as f64 / n;
    let dis_se = (dis * (1.0 - dis) / n).sqrt();
    let ex = excess_sum / n;
    let ex_var = (excess_sq / n - ex * ex).max(0.0);
    let ex_se = (ex_var / n).sqrt();
    Ok((
        Estimate {
            value: dis,
            std_error: dis_se,
        },
        Estimate {
            value: ex,
            std_error: ex_se,
        },
    ))
}

/// Monte-Carlo fraction of fresh draws where the classifier disagrees with
/// the Bayes classifier.
pub fn estimate_disagreement(
    classifier: &dyn Classifier,
    dist: &OracleDistribution,
    mc_points: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(estimate_both(classifier, dist, mc_points, seed)?.0)
}

/// Monte-Carlo estimate of E[|2 eta(X) - 1| 1{classifier(X) != bayes(X)}],
/// the exact pointwise excess risk.
pub fn estimate_excess_risk(
    classifier: &dyn Classifier,
    dist: &OracleDistribution,
    mc_points: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(estimate_both(classifier, dist, mc_points, seed)?.1)
}

/// Verdict of a grid containment audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainmentOutcome {
    Holds,
    Violated,
    /// The smoothness precondition fails for these constants, so the
    /// statement is not in force; excluded from frequency tallies.
    NotApplicable,
}

/// Audit the round-1 containment: no grid point may lie in the effective
/// boundary at scale c_delta k / n yet escape the hard region.
///
/// In force only when 2 L (p'_n)^alpha <= Delta_UC.
pub fn check_containment_round1(
    handle: &RegionHandle,
    dist: &OracleDistribution,
    grid: &[Point],
) -> Result<ContainmentOutcome> {
    let consts = handle.constants();
    if 2.0 * dist.smooth_l * consts.p_n_prime.powf(dist.alpha) > consts.delta_uc {
        return Ok(ContainmentOutcome::NotApplicable);
    }
    let p = consts.p_n.min(1.0 - f64::EPSILON);
    for x in grid {
        if dist.boundary_member(x, p, consts.big_delta)? && !handle.hard_region_member(x)? {
            return Ok(ContainmentOutcome::Violated);
        }
    }
    Ok(ContainmentOutcome::Holds)
}

/// Audit the augmented-region containment: no grid point may lie in the
/// augmented region yet be easy.
///
/// In force only when 3 L (p''_n)^alpha <= Delta_UC.
pub fn check_containment_augmented(
    handle: &RegionHandle,
    dist: &OracleDistribution,
    grid: &[Point],
) -> Result<ContainmentOutcome> {
    let consts = handle.constants();
    if 3.0 * dist.smooth_l * consts.p_n_dprime.powf(dist.alpha) > consts.delta_uc {
        return Ok(ContainmentOutcome::NotApplicable);
    }
    for x in grid {
        // Easy membership is the cheap oracle test; only easy points can
        // witness a violation.
        if dist.easy_member(x, consts)? && handle.augmented_member(x)? {
            return Ok(ContainmentOutcome::Violated);
        }
    }
    Ok(ContainmentOutcome::Holds)
}

/// Event frequencies at a fixed point across fresh samplings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRates {
    /// Fraction of trials where |vote - eta(neighbor ball)| >= margin.
    pub bad_vote: f64,
    /// Fraction of trials where the (k+1)-th neighbor sits outside the
    /// probability-radius ball.
    pub non_local: f64,
    /// Draws per trial (n + floor(pi m)).
    pub samples_per_trial: usize,
}

/// Estimate the vote-deviation and non-locality event rates at `fixed_x`.
///
/// Each trial draws n + floor(pi m) labeled points from the distribution.
/// The vote event compares the k-NN vote against the oracle conditional
/// mean of the realized (k+1)-neighbor ball (closed-ball value; the
/// open/closed distinction is mass-null for the built-ins). The locality
/// event uses the radius scale p = min(1, k / ((1-gamma) N)); at gamma = 1
/// that is the full-support radius and the event is vacuous.
pub fn estimate_event_rates(
    dist: &OracleDistribution,
    params: &HyperParams,
    fixed_x: &Point,
    trials: usize,
    margin: f64,
    gamma: f64,
    seed: u64,
) -> Result<EventRates> {
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be positive".into()));
    }
    if gamma.is_nan() || gamma <= 0.0 || gamma > 1.0 {
        return Err(Error::InvalidParams(format!(
            "gamma must be in (0,1], got {gamma}"
        )));
    }
    let n_draws = params.n + (params.pi * params.m as f64).floor() as usize;
    if params.k + 1 > n_draws {
        return Err(Error::KTooLarge {
            k: params.k + 1,
            pool: n_draws,
        });
    }
    let p = if gamma < 1.0 {
        (params.k as f64 / ((1.0 - gamma) * n_draws as f64)).min(1.0)
    } else {
        1.0
    };
    let r_p = dist.prob_radius(fixed_x, p)?;
    let mut bad_votes = 0usize;
    let mut non_local = 0usize;
    for t in 0..trials {
        let sample = sample_labeled(dist, n_draws, Provenance::Round1, child_seed(seed, t as u64))?;
        let pool = Pool::new(dist.metric, sample)?;
        let nn = pool.knn(fixed_x, params.k + 1)?;
        let ones = nn[..params.k]
            .iter()
            .filter(|nb| pool.sample(nb.index).label == 1)
            .count();
        let vote = ones as f64 / params.k as f64;
        let rho = nn[params.k].distance;
        if rho > 0.0 {
            let ball = dist.ball_eta(fixed_x, rho)?;
            if (vote - ball).abs() >= margin {
                bad_votes += 1;
            }
        }
        if rho > r_p {
            non_local += 1;
        }
    }
    Ok(EventRates {
        bad_vote: bad_votes as f64 / trials as f64,
        non_local: non_local as f64 / trials as f64,
        samples_per_trial: n_draws,
    })
}

/// One trial of the passive protocol: train plain k-NN on the full budget
/// and compare its disagreement against the oracle bound.
#[derive(Debug, Clone)]
pub struct PassiveTrial {
    pub disagreement: Estimate,
    /// mu(boundary at c_delta k / N, Delta) + delta.
    pub bound: f64,
    pub violated: bool,
    pub labels_used: usize,
}

pub fn run_passive_baseline(
    dist: &OracleDistribution,
    n_plus_m: usize,
    k: usize,
    delta: f64,
    mc_points: usize,
    seed: u64,
) -> Result<PassiveTrial> {
    if k >= n_plus_m {
        return Err(Error::KTooLarge { k, pool: n_plus_m });
    }
    let sample = sample_labeled(dist, n_plus_m, Provenance::Round1, seed)?;
    let pool = Pool::new(dist.metric, sample)?;
    let knn = StandardKnn { pool, k };
    let disagreement = estimate_disagreement(&knn, dist, mc_points, seed)?;
    // The radius scale can exceed 1 for aggressive (k, N) pairs; the
    // boundary then covers everything and the bound saturates.
    let p = (c_delta(k, delta)? * k as f64 / n_plus_m as f64).min(1.0);
    let big_delta = vote_margin(k, delta);
    let bound = dist.margin_region_measure(p, big_delta)?.value + delta;
    Ok(PassiveTrial {
        disagreement,
        bound,
        violated: disagreement.value > bound,
        labels_used: n_plus_m,
    })
}

/// Two-sided Kolmogorov-Smirnov distance between an empirical sample and
/// a reference CDF.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = ((i + 1) as f64 / n - f).abs();
        let below = (f - i as f64 / n).abs();
        worst = worst.max(above).max(below);
    }
    worst
}

/// Bootstrap probability that the mean of `diffs` is <= 0.
pub fn bootstrap_prob_mean_nonpositive(diffs: &[f64], resamples: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, Stream::Auxiliary);
    let n = diffs.len();
    let mut hits = 0usize;
    for _ in 0..resamples {
        let mut total = 0.0;
        for _ in 0..n {
            total += diffs[rng.random_range(0..n)];
        }
        if total / n as f64 <= 0.0 {
            hits += 1;
        }
    }
    hits as f64 / resamples as f64
}

/// Augmented-ball membership in the tie-broken instance space: strictly
/// inside the radius, or exactly on it with a tie coordinate below the
/// ball's threshold.
fn augmented_ball_contains(center: &[f64], radius: f64, z_cut: f64, x: &[f64], z: f64) -> bool {
    let rho = Metric::Linf.distance_unchecked(center, x);
    rho < radius || (rho == radius && z < z_cut)
}

/// Search for a shattered set of `num_points` points in `[0,1]`^dim x `[0,1]`
/// under augmented l-infinity balls.
///
/// Candidate balls are canonical: centers at the points and their pairwise
/// midpoints, radii at the realized center-to-point distances (with tiny
/// perturbations for the strictly-inside / strictly-outside cases), and
/// tie thresholds at the point tie values (again with perturbations).
/// Any labeling realizable at all is realizable by one of these.
pub fn vc_shatter_check(
    dim: usize,
    num_points: usize,
    trials: usize,
    seed: u64,
) -> Result<bool> {
    if dim == 0 || dim > 2 {
        return Err(Error::UnsupportedDimension(dim));
    }
    if num_points == 0 || num_points > 8 {
        return Err(Error::InvalidParams(format!(
            "shattering search supports 1..=8 points, got {num_points}"
        )));
    }
    let mut rng = stream(seed, Stream::Auxiliary);
    for _ in 0..trials {
        let points: Vec<(Vec<f64>, f64)> = (0..num_points)
            .map(|_| {
                let coords: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                (coords, rng.random::<f64>())
            })
            .collect();
        if set_is_shattered(&points) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Exhaustive canonical-candidate test of a single point set.
pub fn set_is_shattered(points: &[(Vec<f64>, f64)]) -> bool {
    let k = points.len();
    let want = 1usize << k;
    let mut seen = vec![false; want];
    let mut found = 0usize;
    let register = |mask: usize, seen: &mut Vec<bool>, found: &mut usize| -> bool {
        if !seen[mask] {
            seen[mask] = true;
            *found += 1;
        }
        *found == want
    };
    // The empty set: a zero-radius ball with a zero tie threshold.
    if register(0, &mut seen, &mut found) {
        return true;
    }

    let dim = points[0].0.len();
    let mut centers: Vec<Vec<f64>> = points.iter().map(|(c, _)| c.clone()).collect();
    for i in 0..k {
        for j in (i + 1)..k {
            let mid: Vec<f64> = (0..dim)
                .map(|a| (points[i].0[a] + points[j].0[a]) / 2.0)
                .collect();
            centers.push(mid);
        }
    }

    const EPS: f64 = 1e-9;
    for center in &centers {
        let mut radii: Vec<f64> = Vec::new();
        for (coords, _) in points {
            let d = Metric::Linf.distance_unchecked(center, coords);
            radii.push(d);
            radii.push(d + EPS);
            radii.push((d - EPS).max(0.0));
        }
        let mut cuts: Vec<f64> = vec![0.0, 1.0];
        for (_, z) in points {
            cuts.push(*z);
            cuts.push((z + EPS).min(1.0));
            cuts.push((z - EPS).max(0.0));
        }
        for &r in &radii {
            for &z_cut in &cuts {
                let mut mask = 0usize;
                for (i, (coords, z)) in points.iter().enumerate() {
                    if augmented_ball_contains(center, r, z_cut, coords, *z) {
                        mask |= 1 << i;
                    }
                }
                if register(mask, &mut seen, &mut found) {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bayes_classifier_has_zero_disagreement() {
        let dist = OracleDistribution::uniform1d_linear();
        let d = dist.clone();
        let bayes = move |x: &Point| d.bayes_classify(x);
        let est = estimate_disagreement(&bayes, &dist, 2000, 4).unwrap();
        assert_eq!(est.value, 0.0);
    }

    #[test]
    fn constant_one_classifier_disagrees_half_the_time() {
        let dist = OracleDistribution::uniform1d_linear();
        let one = |_: &Point| Ok(1u8);
        let est = estimate_disagreement(&one, &dist, 20_000, 4).unwrap();
        assert!((est.value - 0.5).abs() < 3.0 * est.std_error.max(0.004));
    }

    #[test]
    fn constant_zero_vs_high_eta_always_disagrees() {
        let dist = OracleDistribution::uniform1d_constant(0.9).unwrap();
        let zero = |_: &Point| Ok(0u8);
        let est = estimate_disagreement(&zero, &dist, 2000, 4).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn excess_risk_of_constant_one_is_quarter() {
        // integral of (1 - 2x) over [0, 1/2] = 1/4.
        let dist = OracleDistribution::uniform1d_linear();
        let one = |_: &Point| Ok(1u8);
        let est = estimate_excess_risk(&one, &dist, 40_000, 4).unwrap();
        assert!((est.value - 0.25).abs() < 3.0 * est.std_error.max(0.002), "{est:?}");
    }

    #[test]
    fn excess_never_exceeds_disagreement() {
        let dist = OracleDistribution::uniform1d_linear();
        let one = |_: &Point| Ok(1u8);
        for seed in 0..5 {
            let (dis, ex) = estimate_both(&one, &dist, 5000, seed).unwrap();
            assert!(ex.value <= dis.value + 1e-12);
        }
    }

    #[test]
    fn two_points_shatter_in_1d() {
        assert!(vc_shatter_check(1, 2, 50, 7).unwrap());
    }

    #[test]
    fn three_points_never_shatter_in_1d() {
        assert!(!vc_shatter_check(1, 3, 2000, 7).unwrap());
    }

    #[test]
    fn coincident_points_do_not_shatter() {
        let p = (vec![0.5], 0.25);
        assert!(!set_is_shattered(&[p.clone(), p]));
    }

    #[test]
    fn same_position_distinct_ties_cannot_isolate_higher_tie() {
        // Tie-ball membership at equal distance is downward closed in the
        // tie coordinate, so {higher} without {lower} is unrealizable.
        let a = (vec![0.5], 0.2);
        let b = (vec![0.5], 0.8);
        assert!(!set_is_shattered(&[a, b]));
    }

    #[test]
    fn ks_distance_of_exact_cdf_is_small() {
        let n = 1000;
        let samples: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&samples, |x| x.clamp(0.0, 1.0));
        assert!(d <= 0.5 / n as f64 + 1e-12, "{d}");
    }

    #[test]
    fn event_rates_zero_for_deterministic_labels() {
        let dist = OracleDistribution::uniform1d_constant(1.0).unwrap();
        let params = HyperParams {
            k: 20,
            n: 300,
            m: 100,
            delta: 0.2,
            pi: 0.1,
            zeta: 0.0,
            c0: 1.0,
            c1: 1.0,
            c2: 1.0,
            d_vc: 2,
        };
        let rates =
            estimate_event_rates(&dist, &params, &Point::one_d(0.5), 50, 0.1, 1.0, 3).unwrap();
        assert_eq!(rates.bad_vote, 0.0);
        assert_eq!(rates.non_local, 0.0);
    }

    #[test]
    fn passive_baseline_on_deterministic_distribution() {
        let dist = OracleDistribution::uniform1d_constant(1.0).unwrap();
        let trial = run_passive_baseline(&dist, 300, 15, 0.2, 2000, 5).unwrap();
        assert_eq!(trial.disagreement.value, 0.0);
        assert!(!trial.violated);
        assert_eq!(trial.labels_used, 300);
    }

    #[test]
    fn bootstrap_detects_clear_improvement() {
        let diffs = vec![-0.05, -0.04, -0.06, -0.03, -0.05, -0.02, -0.04, -0.05];
        let p = bootstrap_prob_mean_nonpositive(&diffs, 2000, 1);
        assert!(p > 0.99);
        let worse = vec![0.05, 0.04, 0.06, 0.03, 0.05, 0.02, 0.04, 0.05];
        let q = bootstrap_prob_mean_nonpositive(&worse, 2000, 1);
        assert!(q < 0.01);
    }
}
