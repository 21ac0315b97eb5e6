//! Derived-value checks: every expected value here is computed by an
//! independent route (definitional brute force, closed forms, dense
//! grids, binomial arithmetic) and compared against the library path.

use active_knn::classify::ClassifierBundle;
use active_knn::eval::{
    check_containment_augmented, check_containment_round1, estimate_disagreement,
    estimate_event_rates, ks_distance, run_passive_baseline, ContainmentOutcome, StandardKnn,
};
use active_knn::metric::{
    count_within, knn_query, LabeledSample, Point, Pool, Provenance,
};
use active_knn::oracle::OracleDistribution;
use active_knn::region::{
    derive_constants, region_measure_positive, DerivedConstants, HyperParams, RegionHandle,
};
use active_knn::rng::{child_seed, stream, Stream};
use active_knn::sampling::{
    run_algorithm_with, run_rejection_round, run_round1_with, sample_labeled, BoxRegion,
    RunOptions,
};

fn base_params(n: usize, m: usize, k: usize) -> HyperParams {
    HyperParams {
        k,
        n,
        m,
        delta: 0.2,
        pi: 0.1,
        zeta: 0.0,
        c0: 1.0,
        c1: 1.0,
        c2: 1.0,
        d_vc: 2,
    }
}

/// Definitional vote at x: sort-then-average over the raw sample list.
fn brute_vote(samples: &[LabeledSample], x: &Point, k: usize) -> f64 {
    let metric = active_knn::metric::Metric::Linf;
    let mut ranked: Vec<(f64, f64, u8)> = samples
        .iter()
        .map(|s| {
            (
                metric.distance(x, s.point()).unwrap(),
                s.tiebreak(),
                s.label,
            )
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    ranked[..k].iter().map(|r| r.2 as f64).sum::<f64>() / k as f64
}

#[test]
fn vote_fraction_matches_sort_then_average() {
    let dist = OracleDistribution::uniform1d_linear();
    let samples = sample_labeled(&dist, 50, Provenance::Round1, 17).unwrap();
    let pool = Pool::new(dist.metric, samples.clone()).unwrap();
    let mut rng = stream(4, Stream::Auxiliary);
    for _ in 0..20 {
        let x = dist.sample_instance_rng(1, &mut rng).pop().unwrap();
        let vote = active_knn::classify::vote_fraction(&pool, &x, 7).unwrap();
        assert_eq!(vote.fraction_ones, brute_vote(&samples, &x, 7));
    }
}

#[test]
fn count_within_matches_explicit_loop() {
    let dist = OracleDistribution::uniform1d_linear();
    let samples = sample_labeled(&dist, 100, Provenance::Round1, 23).unwrap();
    let center = Point::one_d(0.5);
    let explicit = samples
        .iter()
        .filter(|s| (s.point().coord(0) - 0.5).abs() <= 0.1)
        .count();
    assert_eq!(
        count_within(dist.metric, &samples, &center, 0.1).unwrap(),
        explicit
    );
}

#[test]
fn hard_region_membership_equals_definitional_vote() {
    // eta(x) = x, n = 2000, k = 60, with c0 small enough that the hard
    // region is a strip: membership at each grid point must equal the
    // brute-force vote test, and the strip must concentrate around 1/2.
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(2000, 100, 60);
    params.c0 = 0.1;
    let consts = derive_constants(&params).unwrap();
    let samples = sample_labeled(&dist, 2000, Provenance::Round1, 5).unwrap();
    let witnesses = vec![Point::one_d(0.5)];
    let handle = RegionHandle::build(dist.metric, samples.clone(), &params, &witnesses).unwrap();

    let mut members = Vec::new();
    for i in 0..1000 {
        let x = Point::one_d((i as f64 + 0.5) / 1000.0);
        let expected = (brute_vote(&samples, &x, 60) - 0.5).abs() < 3.0 * consts.delta_uc;
        let got = handle.hard_region_member(&x).unwrap();
        assert_eq!(got, expected, "disagreement at {:?}", x.coords());
        if got {
            members.push(x.coord(0));
        }
    }
    // The strip contains the crossing and stays away from the edges
    // (vote noise at k = 60 blurs the cut by a few sigma).
    assert!(!members.is_empty());
    assert!(members.iter().all(|&c| (c - 0.5).abs() < 0.4));
    assert!(members.iter().any(|&c| (c - 0.5).abs() < 0.05));
    assert!(!handle.hard_region_member(&Point::one_d(0.05)).unwrap());
    assert!(!handle.hard_region_member(&Point::one_d(0.95)).unwrap());
}

#[test]
fn augmented_membership_agrees_with_dense_grid_oracle() {
    // Handle path (precomputed witness radii) versus the definitional
    // count-based oracle over the same witness set: the open-ball
    // equivalence makes them two routes to the same predicate.
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(500, 100, 30);
    params.c0 = 0.12;
    let consts = derive_constants(&params).unwrap();
    let samples = sample_labeled(&dist, 500, Provenance::Round1, 8).unwrap();
    let witnesses: Vec<Point> = (0..10_000)
        .map(|i| Point::one_d((i as f64 + 0.5) / 10_000.0))
        .collect();
    let handle = RegionHandle::build(dist.metric, samples.clone(), &params, &witnesses).unwrap();

    let hard = |w: &Point| (brute_vote(&samples, w, params.k) - 0.5).abs() < 3.0 * consts.delta_uc;
    let hard_witnesses: Vec<&Point> = witnesses.iter().filter(|w| hard(w)).collect();
    assert!(!hard_witnesses.is_empty());

    let mut rng = stream(9, Stream::Auxiliary);
    let mut agreements_true = 0;
    for _ in 0..100 {
        let x = dist.sample_instance_rng(1, &mut rng).pop().unwrap();
        let self_ok = hard(&x) && {
            let nn = knn_query(dist.metric, &samples, &x, consts.k_bar + 1).unwrap();
            nn[consts.k_bar].distance > 0.0
        };
        let witness_ok = hard_witnesses.iter().any(|w| {
            let rho = dist.metric.distance(w, &x).unwrap();
            count_within(dist.metric, &samples, w, rho).unwrap() <= consts.k_bar
        });
        let expected = self_ok || witness_ok;
        let got = handle.augmented_member(&x).unwrap();
        assert_eq!(got, expected, "disagreement at {:?}", x.coords());
        if got {
            agreements_true += 1;
        }
    }
    assert!(agreements_true > 0, "test never exercised the member branch");
}

#[test]
fn self_witness_containment_hard_implies_augmented() {
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(500, 100, 30);
    params.c0 = 0.12;
    let samples = sample_labeled(&dist, 500, Provenance::Round1, 8).unwrap();
    let witnesses = vec![Point::one_d(0.0)];
    let handle = RegionHandle::build(dist.metric, samples, &params, &witnesses).unwrap();
    for i in 0..500 {
        let x = Point::one_d((i as f64 + 0.5) / 500.0);
        if handle.hard_region_member(&x).unwrap() {
            assert!(handle.augmented_member(&x).unwrap());
        }
    }
}

#[test]
fn positivity_check_finds_interval_mass() {
    // The augmented region covers a strip of mass well above 0.1, so 200
    // probes miss it with probability below 0.9^200; over 50 seeds every
    // verdict must be positive.
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(1000, 100, 60);
    params.c0 = 0.1;
    let samples = sample_labeled(&dist, 1000, Provenance::Round1, 77).unwrap();
    let witnesses: Vec<Point> = (0..2000)
        .map(|i| Point::one_d((i as f64 + 0.5) / 2000.0))
        .collect();
    let handle = RegionHandle::build(dist.metric, samples, &params, &witnesses).unwrap();
    for seed in 0..50 {
        let mut rng = stream(seed, Stream::PositivityProbe);
        let (positive, _) = region_measure_positive(&handle, &dist, 200, &mut rng).unwrap();
        assert!(positive, "seed {seed} missed the region");
    }
}

#[test]
fn positivity_check_empty_region_and_zero_budget() {
    // Constant eta = 1 with a small c0: every vote is 1, nothing is hard,
    // the augmented region is empty.
    let dist = OracleDistribution::uniform1d_constant(1.0).unwrap();
    let mut params = base_params(300, 100, 20);
    params.c0 = 0.05;
    let samples = sample_labeled(&dist, 300, Provenance::Round1, 3).unwrap();
    let witnesses: Vec<Point> = (0..500)
        .map(|i| Point::one_d((i as f64 + 0.5) / 500.0))
        .collect();
    let handle = RegionHandle::build(dist.metric, samples, &params, &witnesses).unwrap();
    let mut rng = stream(1, Stream::PositivityProbe);
    let (positive, _) = region_measure_positive(&handle, &dist, 500, &mut rng).unwrap();
    assert!(!positive);
    let (zero_budget, _) = region_measure_positive(&handle, &dist, 0, &mut rng).unwrap();
    assert!(!zero_budget);
}

#[test]
fn fallback_run_uses_only_p_labels_and_matches_standard_knn() {
    // Positivity false: the rejection loop is skipped, labels_used is
    // n + floor(pi m), and the classifier is plain k-NN on the union.
    let dist = OracleDistribution::uniform1d_constant(1.0).unwrap();
    let mut params = base_params(300, 100, 20);
    params.c0 = 0.05;
    let opts = RunOptions {
        witness_pool_size: 500,
        positivity_budget: 300,
        proposal_cap: 10_000,
    };
    let out = run_algorithm_with(&dist, &params, &opts, 41).unwrap();
    assert!(!out.positivity);
    assert!(out.region.is_none());
    assert_eq!(out.ledger.labels_used, 300 + 10);
    assert!(out
        .dataset
        .iter()
        .all(|s| s.provenance != Provenance::Round2Rejection));

    let union = Pool::new(dist.metric, out.dataset.clone()).unwrap();
    let bundle = ClassifierBundle::from_outcome(out, 20).unwrap();
    let mut rng = stream(2, Stream::Auxiliary);
    for _ in 0..20 {
        let x = dist.sample_instance_rng(1, &mut rng).pop().unwrap();
        assert_eq!(
            bundle.classify(&x).unwrap(),
            active_knn::classify::classify_standard(&union, &x, 20).unwrap()
        );
    }
}

#[test]
fn rejection_sampler_matches_conditional_cdf() {
    // Acceptance region [0.4, 0.6] under uniform mu: accepted samples are
    // uniform on the interval; KS distance below 0.02 at 10^4 accepted
    // samples, acceptance rate within 0.02 of the interval mass.
    let dist = OracleDistribution::uniform1d_linear();
    let region = BoxRegion {
        lo: vec![0.4],
        hi: vec![0.6],
    };
    let out = run_rejection_round(&dist, &region, 10_000, 99).unwrap();
    let values: Vec<f64> = out.samples.iter().map(|s| s.point().coord(0)).collect();
    let ks = ks_distance(&values, |t| ((t - 0.4) / 0.2).clamp(0.0, 1.0));
    assert!(ks < 0.02, "KS distance {ks}");
    let rate = 10_000.0 / out.proposals as f64;
    assert!((rate - 0.2).abs() < 0.02, "acceptance rate {rate}");
}

#[test]
fn smoothness_certificate_on_random_pairs() {
    let fams = vec![
        OracleDistribution::uniform1d_linear(),
        OracleDistribution::uniform1d_piecewise(8.0, 0.35).unwrap(),
        OracleDistribution::uniform1d_constant(0.7).unwrap(),
        OracleDistribution::uniform2d_linear(),
    ];
    for dist in fams {
        let mut rng = stream(31, Stream::Auxiliary);
        for _ in 0..10_000 {
            let a = dist.sample_instance_rng(1, &mut rng).pop().unwrap();
            let b = dist.sample_instance_rng(1, &mut rng).pop().unwrap();
            let rho = dist.metric.distance(&a, &b).unwrap();
            if rho == 0.0 {
                continue;
            }
            let gap = (dist.eta(&a).unwrap() - dist.eta(&b).unwrap()).abs();
            let mass = dist.ball_mass(&a, rho).unwrap();
            assert!(
                gap <= dist.smooth_l * mass.powf(dist.alpha) + 1e-12,
                "{}: smoothness violated at {:?} / {:?}",
                dist.name,
                a.coords(),
                b.coords()
            );
        }
    }
}

#[test]
fn margin_certificate_on_threshold_grid() {
    let fams = vec![
        OracleDistribution::uniform1d_linear(),
        OracleDistribution::uniform1d_piecewise(8.0, 0.35).unwrap(),
        OracleDistribution::uniform1d_constant(0.7).unwrap(),
        OracleDistribution::uniform2d_linear(),
    ];
    for dist in fams {
        for i in 1..=100 {
            let t = i as f64 / 200.0;
            let mass = dist.eta_margin_mass(t);
            assert!(
                mass <= dist.c_margin * t.powf(dist.beta) + 1e-12,
                "{}: margin condition violated at t = {t}: {mass}",
                dist.name
            );
        }
    }
}

#[test]
fn zeta_regularity_on_random_probes() {
    let fams = vec![
        OracleDistribution::uniform1d_linear(),
        OracleDistribution::uniform2d_linear(),
    ];
    for dist in fams {
        let mut rng = stream(37, Stream::Auxiliary);
        for _ in 0..10_000 {
            let x = dist.sample_instance_rng(1, &mut rng).pop().unwrap();
            let p: f64 = rand::Rng::random_range(&mut rng, 0.001..0.999);
            let r = dist.prob_radius(&x, p).unwrap();
            let mass = dist.ball_mass(&x, r).unwrap();
            assert!(
                mass <= (1.0 + dist.zeta) * p + 1e-9,
                "{}: regularity violated at {:?}, p = {p}",
                dist.name,
                x.coords()
            );
        }
    }
}

#[test]
fn boundary_nesting_in_p_and_delta() {
    let dist = OracleDistribution::uniform1d_piecewise(8.0, 0.35).unwrap();
    let grid: Vec<Point> = (0..1000)
        .map(|i| Point::one_d((i as f64 + 0.5) / 1000.0))
        .collect();
    let configs = [((0.05, 0.05), (0.1, 0.05)), ((0.05, 0.05), (0.05, 0.2)), ((0.1, 0.1), (0.3, 0.3))];
    for ((p1, d1), (p2, d2)) in configs {
        for x in &grid {
            if dist.boundary_member(x, p1, d1).unwrap() {
                assert!(
                    dist.boundary_member(x, p2, d2).unwrap(),
                    "nesting violated at {:?} for ({p1},{d1}) vs ({p2},{d2})",
                    x.coords()
                );
            }
        }
    }
}

#[test]
fn easy_complement_measure_cross_check() {
    // Route A: scan-plus-bisection measure. Route B: indicator counting
    // of easy membership on a fine midpoint grid.
    let dist = OracleDistribution::uniform1d_piecewise(8.0, 0.35).unwrap();
    let mut params = base_params(1000, 1000, 60);
    params.c0 = 0.1;
    let consts = derive_constants(&params).unwrap();
    let scan = dist.easy_complement_measure(&consts).unwrap().value;
    let n = 200_000;
    let mut not_easy = 0usize;
    for i in 0..n {
        let x = Point::one_d((i as f64 + 0.5) / n as f64);
        if !dist.easy_member(&x, &consts).unwrap() {
            not_easy += 1;
        }
    }
    let grid_estimate = not_easy as f64 / n as f64;
    assert!(
        (scan - grid_estimate).abs() < 1e-4,
        "scan {scan} vs grid {grid_estimate}"
    );
}

#[test]
fn linear_easy_complement_closed_form_cross_check() {
    // For the linear family both routes are independent: the closed form
    // versus pointwise membership on a fine grid, to 1e-6 (the boundary
    // points of the interval land between grid midpoints).
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(2000, 1000, 200);
    params.c0 = 0.02;
    let consts = derive_constants(&params).unwrap();
    let t = 5.0 * consts.delta_uc;
    let closed = dist.easy_complement_measure(&consts).unwrap().value;
    let p = consts.p_n_dprime;
    let expected = if t <= (1.0 - p) / 2.0 { 2.0 * t } else { 1.0 };
    assert!((closed - expected).abs() < 1e-12);
    let scan = dist
        .clone()
        .with_margin_grid(512)
        .margin_region_measure(p, t)
        .unwrap()
        .value;
    assert!((scan - expected).abs() < 1e-6, "scan {scan} vs {expected}");
}

#[test]
fn uniform2d_marginals_are_uniform() {
    let dist = OracleDistribution::uniform2d_linear();
    let points = dist.sample_instance(10_000, 64);
    for axis in 0..2 {
        let coords: Vec<f64> = points.iter().map(|p| p.coord(axis)).collect();
        let ks = ks_distance(&coords, |t| t.clamp(0.0, 1.0));
        assert!(ks < 0.02, "axis {axis}: KS {ks}");
    }
}

#[test]
fn easy_membership_pointwise() {
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(2000, 1000, 200);
    params.c0 = 0.02;
    let consts = derive_constants(&params).unwrap();
    let threshold = 5.0 * consts.delta_uc;
    assert!(threshold < 0.4, "config must leave a nonempty easy region");
    // The crossing is never easy; deep interior points with margin above
    // the threshold are (the ball mean stays at the point value there).
    assert!(!dist.easy_member(&Point::one_d(0.5), &consts).unwrap());
    assert!(dist
        .easy_member(&Point::one_d(0.5 + threshold + 0.15), &consts)
        .unwrap());
    assert!(dist
        .easy_member(&Point::one_d(0.5 - threshold - 0.15), &consts)
        .unwrap());
}

#[test]
fn containment_vacuous_on_constant_families() {
    // Empty effective boundary: the round-1 containment holds for any
    // region estimate. Empty hard region: the augmented containment
    // holds with nothing to contain.
    let off_half = OracleDistribution::uniform1d_constant(0.9).unwrap();
    let params = base_params(400, 100, 20);
    let opts = RunOptions {
        witness_pool_size: 200,
        ..RunOptions::default()
    };
    let grid: Vec<Point> = (0..300)
        .map(|i| Point::one_d((i as f64 + 0.5) / 300.0))
        .collect();
    let (_, handle) = run_round1_with(&off_half, &params, &opts, 3).unwrap();
    assert_eq!(
        check_containment_round1(&handle, &off_half, &grid).unwrap(),
        ContainmentOutcome::Holds
    );

    let deterministic = OracleDistribution::uniform1d_constant(1.0).unwrap();
    let mut tight = base_params(400, 100, 20);
    tight.c0 = 0.05;
    let (_, handle) = run_round1_with(&deterministic, &tight, &opts, 3).unwrap();
    assert_eq!(handle.hard_witness_count(), 0, "hard region must be empty");
    assert_eq!(
        check_containment_augmented(&handle, &deterministic, &grid).unwrap(),
        ContainmentOutcome::Holds
    );
}

#[test]
fn augmented_membership_stable_under_witness_doubling() {
    // The witness search under-approximates the region monotonically; a
    // doubled pool may only add members, and on a nontrivial region the
    // flip fraction stays small.
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(1000, 100, 60);
    params.c0 = 0.1;
    let samples = sample_labeled(&dist, 1000, Provenance::Round1, 51).unwrap();
    let witnesses_2k = dist.sample_instance(2000, 500);
    let witnesses_4k = dist.sample_instance(4000, 500);
    let small =
        RegionHandle::build(dist.metric, samples.clone(), &params, &witnesses_2k).unwrap();
    let big = RegionHandle::build(dist.metric, samples, &params, &witnesses_4k).unwrap();
    let mut member_small = 0usize;
    let mut flips = 0usize;
    for i in 0..1000 {
        let x = Point::one_d((i as f64 + 0.5) / 1000.0);
        let a = small.augmented_member(&x).unwrap();
        let b = big.augmented_member(&x).unwrap();
        member_small += usize::from(a);
        flips += usize::from(a != b);
    }
    assert!(member_small > 0);
    assert!(flips <= 20, "{flips} of 1000 verdicts flipped under doubling");
}

#[test]
fn containment_verdicts_stable_under_grid_refinement() {
    let dist = OracleDistribution::uniform1d_linear();
    let mut params = base_params(1000, 100, 60);
    params.c0 = 0.1;
    let opts = RunOptions {
        witness_pool_size: 500,
        ..RunOptions::default()
    };
    let coarse: Vec<Point> = (0..1000)
        .map(|i| Point::one_d((i as f64 + 0.5) / 1000.0))
        .collect();
    let fine: Vec<Point> = (0..2000)
        .map(|i| Point::one_d((i as f64 + 0.5) / 2000.0))
        .collect();
    let trials = 20u64;
    let mut flips = 0usize;
    for s in 0..trials {
        let (_, handle) = run_round1_with(&dist, &params, &opts, child_seed(71, s)).unwrap();
        let a = check_containment_round1(&handle, &dist, &coarse).unwrap();
        let b = check_containment_round1(&handle, &dist, &fine).unwrap();
        flips += usize::from(a != b);
    }
    assert!(
        flips <= 1,
        "{flips}/{trials} verdicts flipped under 2x grid refinement"
    );
}

#[test]
fn containment_power_check_with_shrunk_c0() {
    // A near-flat conditional keeps the smoothness precondition in force
    // while c0 / 100 makes the hard region far too small: the audit must
    // detect violations.
    let dist = OracleDistribution::uniform1d_piecewise(0.02, 0.01).unwrap();
    let mut params = base_params(2000, 100, 60);
    params.c0 = 0.01;
    let opts = RunOptions {
        witness_pool_size: 1,
        ..RunOptions::default()
    };
    let grid: Vec<Point> = (0..1000)
        .map(|i| Point::one_d((i as f64 + 0.5) / 1000.0))
        .collect();
    let mut violated = 0;
    for seed in 0..5 {
        let (_, handle) = run_round1_with(&dist, &params, &opts, seed).unwrap();
        match check_containment_round1(&handle, &dist, &grid).unwrap() {
            ContainmentOutcome::Violated => violated += 1,
            ContainmentOutcome::Holds => {}
            ContainmentOutcome::NotApplicable => panic!("precondition unexpectedly out of force"),
        }
    }
    assert!(violated >= 4, "only {violated}/5 seeds violated");
}

#[test]
fn event_rate_bounds_at_k100() {
    // Vote-deviation frequency at x = 1/2 stays under 2 exp(-2 k Delta^2)
    // plus 3 sigma; with gamma = 1 the locality event never fires.
    let dist = OracleDistribution::uniform1d_linear();
    let params = base_params(2000, 1000, 100);
    let trials = 300;
    let rates = estimate_event_rates(
        &dist,
        &params,
        &Point::one_d(0.5),
        trials,
        0.1,
        1.0,
        13,
    )
    .unwrap();
    let bound = 2.0 * (-2.0 * 100.0 * 0.1f64 * 0.1).exp();
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    assert!(
        rates.bad_vote <= bound + 3.0 * sigma,
        "bad vote rate {} vs bound {}",
        rates.bad_vote,
        bound
    );
    assert_eq!(rates.non_local, 0.0);
}

#[test]
fn passive_bound_holds_on_small_ensemble() {
    let dist = OracleDistribution::uniform1d_linear();
    for seed in 0..10 {
        let trial = run_passive_baseline(&dist, 2000, 60, 0.2, 4000, child_seed(60, seed)).unwrap();
        assert!(
            !trial.violated,
            "seed {seed}: disagreement {} above bound {}",
            trial.disagreement.value, trial.bound
        );
    }
}

#[test]
fn passive_disagreement_trend_nonincreasing() {
    // Budgets 500 / 1000 / 2000 with k tied to N^(2/3): the median
    // disagreement over seeds must not increase.
    let dist = OracleDistribution::uniform1d_linear();
    let schedule = [(500usize, 24usize), (1000, 38), (2000, 60)];
    let mut medians = Vec::new();
    for (idx, (n, k)) in schedule.iter().enumerate() {
        let mut values: Vec<f64> = (0..5)
            .map(|s| {
                let sample =
                    sample_labeled(&dist, *n, Provenance::Round1, child_seed(idx as u64, s)).unwrap();
                let knn = StandardKnn {
                    pool: Pool::new(dist.metric, sample).unwrap(),
                    k: *k,
                };
                estimate_disagreement(&knn, &dist, 5000, child_seed(100 + idx as u64, s))
                    .unwrap()
                    .value
            })
            .collect();
        values.sort_by(|a, b| a.total_cmp(b));
        medians.push(values[2]);
    }
    assert!(
        medians[0] >= medians[1] - 0.01 && medians[1] >= medians[2] - 0.01,
        "medians {medians:?}"
    );
}

#[test]
fn estimator_pooling_is_seed_exchangeable() {
    // One 20k-point run and the pool of two 10k-point runs must produce
    // overlapping 3-sigma intervals.
    let dist = OracleDistribution::uniform1d_linear();
    let sample = sample_labeled(&dist, 1000, Provenance::Round1, 55).unwrap();
    let knn = StandardKnn {
        pool: Pool::new(dist.metric, sample).unwrap(),
        k: 40,
    };
    let full = estimate_disagreement(&knn, &dist, 20_000, 1).unwrap();
    let half_a = estimate_disagreement(&knn, &dist, 10_000, 2).unwrap();
    let half_b = estimate_disagreement(&knn, &dist, 10_000, 3).unwrap();
    let pooled = (half_a.value + half_b.value) / 2.0;
    let spread = 3.0 * (full.std_error + half_a.std_error.max(half_b.std_error));
    assert!(
        (full.value - pooled).abs() <= spread,
        "full {} vs pooled {pooled} (spread {spread})",
        full.value
    );
}

#[test]
fn two_dimensional_family_end_to_end() {
    // Full run on the square under the l-infinity metric: budgets hold,
    // accepted samples re-check, and the resulting classifier clearly
    // beats chance against the oracle.
    let dist = OracleDistribution::uniform2d_linear();
    let params = HyperParams {
        k: 20,
        n: 400,
        m: 200,
        delta: 0.2,
        pi: 0.1,
        zeta: 0.0,
        c0: 1.0,
        c1: 1.0,
        c2: 1.0,
        d_vc: dist.d_vc,
    };
    let opts = RunOptions {
        witness_pool_size: 300,
        positivity_budget: 200,
        proposal_cap: 1_000_000,
    };
    let out = run_algorithm_with(&dist, &params, &opts, 29).unwrap();
    assert!(out.ledger.labels_used <= 600);
    if out.positivity {
        let region = out.region.as_ref().unwrap();
        for s in out
            .dataset
            .iter()
            .filter(|s| s.provenance == Provenance::Round2Rejection)
        {
            assert!(region.augmented_member(s.point()).unwrap());
        }
    }
    let bundle = ClassifierBundle::from_outcome(out, params.k).unwrap();
    let dis = estimate_disagreement(&bundle, &dist, 4000, 29).unwrap();
    assert!(dis.value < 0.35, "disagreement {}", dis.value);
}

#[test]
fn derived_constants_spec_points() {
    // Frozen closed-form evaluations of the constants block.
    let delta = 2.0 / std::f64::consts::E;
    let p = HyperParams {
        k: 16,
        n: 100,
        m: 10,
        delta,
        pi: 0.5,
        zeta: 0.0,
        c0: 1.0,
        c1: 1.0,
        c2: 1.0,
        d_vc: 1,
    };
    let c: DerivedConstants = derive_constants(&p).unwrap();
    assert!((c.c_delta - 2.0).abs() < 1e-12);
    assert_eq!(c.k_bar, 48);
    assert!((c.p_n - 2.0 * 16.0 / 100.0).abs() < 1e-12);
    let spread = ((1.0 + (1.0f64 / delta).ln()) / 100.0).sqrt();
    assert!((c.p_n_prime - (0.16 + spread)).abs() < 1e-12);
    assert!((c.p_n_dprime - (0.48 + spread)).abs() < 1e-12);
}
