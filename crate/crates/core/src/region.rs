//! Derived constants and the estimated hard / augmented regions.
//!
//! The hard region collects the points whose k-NN vote on the round-1
//! sample is still close to 1/2; the augmented region dilates it by one
//! open neighbor ball per hard point so that rejection sampling covers the
//! neighbors its votes will use. Membership in the (uncountable) union is
//! decided by a witness search over the query point itself plus a frozen
//! unlabeled witness pool, which under-approximates the region
//! monotonically and is exact on the hard region itself.

use crate::error::Error;
use crate::metric::{LabeledSample, Metric, Point, Pool};
use crate::oracle::OracleDistribution;
use crate::Result;
use rand_chacha::ChaCha8Rng;

/// Algorithm parameters plus the universal constants left free by the
/// analysis (c0 in Delta_UC, c1 in the k-enlargement, c2 in the radius
/// scales). All logarithms are natural.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub delta: f64,
    pub pi: f64,
    pub zeta: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    /// VC dimension of the augmented neighbor balls; supplied by the
    /// distribution descriptor (2d for l-infinity balls in d dimensions).
    pub d_vc: usize,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 {
            return Err(Error::InvalidParams("k and n must be positive".into()));
        }
        if self.k >= self.n {
            return Err(Error::InvalidParams(format!(
                "need k < n, got k = {}, n = {}",
                self.k, self.n
            )));
        }
        if self.delta.is_nan() || self.delta <= 0.0 || self.delta >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        if self.pi.is_nan() || self.pi <= 0.0 || self.pi >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "pi must be in (0,1), got {}",
                self.pi
            )));
        }
        if self.zeta.is_nan() || self.zeta < 0.0 {
            return Err(Error::InvalidParams(format!(
                "zeta must be nonnegative, got {}",
                self.zeta
            )));
        }
        for (name, c) in [("c0", self.c0), ("c1", self.c1), ("c2", self.c2)] {
            if c <= 0.0 || !c.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {c}")));
            }
        }
        if self.d_vc == 0 {
            return Err(Error::InvalidParams("d_vc must be positive".into()));
        }
        Ok(())
    }
}

/// The near-constant 1 / (1 - sqrt((4/k) ln(2/delta))).
///
/// Defined only when k > 4 ln(2/delta).
pub fn c_delta(k: usize, delta: f64) -> Result<f64> {
    let threshold = 4.0 * (2.0 / delta).ln();
    if (k as f64) <= threshold {
        return Err(Error::CDeltaUndefined { k, threshold });
    }
    Ok(1.0 / (1.0 - (threshold / k as f64).sqrt()))
}

/// The fixed vote margin min(1/2, sqrt(ln(2/delta)/k)).
pub fn vote_margin(k: usize, delta: f64) -> f64 {
    (((2.0 / delta).ln() / k as f64).sqrt()).min(0.5)
}

/// All constants derived from a parameter set. Pure function of its
/// inputs: identical parameters give bit-identical outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// c_delta at the run's delta.
    pub c_delta: f64,
    /// The fixed vote margin Delta.
    pub big_delta: f64,
    /// Uniform-convergence margin for votes: c0 sqrt((d ln n + ln(1/delta))/k).
    pub delta_uc: f64,
    /// The k-enlargement used for the augmented region.
    pub k_bar: usize,
    /// Boundary scale of the round-1 containment: c_delta k / n.
    pub p_n: f64,
    /// Radius scale k/n + c2 sqrt((d + ln(1/delta))/n).
    pub p_n_prime: f64,
    /// Radius scale k_bar/n + c2 sqrt((d + ln(1/delta))/n).
    pub p_n_dprime: f64,
}

/// Derive the constants, checking the c_delta and k-enlargement
/// preconditions.
pub fn derive_constants(params: &HyperParams) -> Result<DerivedConstants> {
    params.validate()?;
    let k = params.k as f64;
    let n = params.n as f64;
    let d = params.d_vc as f64;
    let c_delta = c_delta(params.k, params.delta)?;
    let big_delta = vote_margin(params.k, params.delta);
    let delta_uc = params.c0 * ((d * n.ln() + (1.0 / params.delta).ln()) / k).sqrt();
    let raw = c_delta * (1.0 + params.zeta) * k
        + params.c1 * (n * ((4.0 / params.delta).ln() + d)).sqrt();
    let k_bar_f = raw.ceil() - 1.0;
    if !k_bar_f.is_finite() || k_bar_f < 0.0 {
        return Err(Error::InvalidParams(format!("k_bar derivation overflowed: {raw}")));
    }
    let k_bar = k_bar_f as usize;
    if k_bar >= params.n {
        return Err(Error::KBarTooLarge { k_bar, n: params.n });
    }
    debug_assert!(k_bar >= params.k);
    let spread = params.c2 * ((d + (1.0 / params.delta).ln()) / n).sqrt();
    Ok(DerivedConstants {
        c_delta,
        big_delta,
        delta_uc,
        k_bar,
        p_n: c_delta * k / n,
        p_n_prime: k / n + spread,
        p_n_dprime: k_bar as f64 / n + spread,
    })
}

/// A hard-region witness: a point known to be in the hard region together
/// with the distance to its (k_bar + 1)-th round-1 neighbor (the radius of
/// its open neighbor ball).
#[derive(Debug, Clone)]
struct HardWitness {
    point: Point,
    radius: f64,
}

/// A decidable membership predicate for the estimated hard region and its
/// augmentation, bound to a frozen round-1 sample.
///
/// Immutable after construction; membership queries are safe concurrently.
#[derive(Debug, Clone)]
pub struct RegionHandle {
    round1: Pool,
    params: HyperParams,
    consts: DerivedConstants,
    witness_count: usize,
    hard_witnesses: Vec<HardWitness>,
}

impl RegionHandle {
    /// Freeze a round-1 sample and witness pool into a membership oracle.
    ///
    /// Precomputes, for every witness in the pool, whether it lies in the
    /// hard region and (if so) its open-ball radius, so that membership
    /// queries reduce to one k-NN query plus a witness scan.
    pub fn build(
        metric: Metric,
        round1: Vec<LabeledSample>,
        params: &HyperParams,
        witness_pool: &[Point],
    ) -> Result<Self> {
        let consts = derive_constants(params)?;
        if round1.len() != params.n {
            return Err(Error::InvalidParams(format!(
                "round-1 sample size {} does not match n = {}",
                round1.len(),
                params.n
            )));
        }
        if witness_pool.is_empty() {
            return Err(Error::EmptyWitnessPool);
        }
        let pool = Pool::new(metric, round1)?;
        let mut hard_witnesses = Vec::new();
        for w in witness_pool {
            let nn = pool.knn(w, consts.k_bar + 1)?;
            if Self::vote_is_hard(&pool, &nn, params.k, consts.delta_uc) {
                hard_witnesses.push(HardWitness {
                    point: w.clone(),
                    radius: nn[consts.k_bar].distance,
                });
            }
        }
        Ok(RegionHandle {
            round1: pool,
            params: params.clone(),
            consts,
            witness_count: witness_pool.len(),
            hard_witnesses,
        })
    }

    fn vote_is_hard(pool: &Pool, nn: &[crate::metric::Neighbor], k: usize, delta_uc: f64) -> bool {
        let ones = nn[..k]
            .iter()
            .filter(|nb| pool.sample(nb.index).label == 1)
            .count();
        (ones as f64 / k as f64 - 0.5).abs() < 3.0 * delta_uc
    }

    pub fn params(&self) -> &HyperParams {
        &self.params
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn round1(&self) -> &Pool {
        &self.round1
    }

    pub fn metric(&self) -> Metric {
        self.round1.metric()
    }

    /// Number of witness-pool points that landed in the hard region.
    pub fn hard_witness_count(&self) -> usize {
        self.hard_witnesses.len()
    }

    /// Size of the witness pool the handle was built with.
    pub fn witness_count(&self) -> usize {
        self.witness_count
    }

    /// Is `x` in the estimated hard region: |vote(x) - 1/2| < 3 Delta_UC?
    pub fn hard_region_member(&self, x: &Point) -> Result<bool> {
        let nn = self.round1.knn(x, self.params.k)?;
        let ones = nn
            .iter()
            .filter(|nb| self.round1.sample(nb.index).label == 1)
            .count();
        Ok((ones as f64 / self.params.k as f64 - 0.5).abs() < 3.0 * self.consts.delta_uc)
    }

    /// Is `x` in the augmented hard region (the union of open
    /// (k_bar + 1)-neighbor balls over the hard region)?
    ///
    /// Witness search over {x} plus the frozen pool. The count-based ball
    /// test is equivalent to comparing against the witness's
    /// (k_bar + 1)-th neighbor distance, which is what is stored; the
    /// self-witness branch additionally requires that distance to be
    /// positive so a point whose k_bar + 1 nearest round-1 samples all
    /// coincide with it is excluded.
    pub fn augmented_member(&self, x: &Point) -> Result<bool> {
        let nn = self.round1.knn(x, self.consts.k_bar + 1)?;
        if Self::vote_is_hard(&self.round1, &nn, self.params.k, self.consts.delta_uc)
            && nn[self.consts.k_bar].distance > 0.0
        {
            return Ok(true);
        }
        let metric = self.round1.metric();
        for w in &self.hard_witnesses {
            if metric.distance(&w.point, x)? < w.radius {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

/// Decide whether the augmented region has positive mass by drawing fresh
/// unlabeled points until one lands inside (or the budget runs out).
///
/// Unlabeled draws consume no label budget; the caller accounts for them
/// separately. Returns the verdict and the number of draws consumed.
pub fn region_measure_positive(
    handle: &RegionHandle,
    dist: &OracleDistribution,
    unlabeled_budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(bool, usize)> {
    for i in 0..unlabeled_budget {
        let x = dist
            .sample_instance_rng(1, rng)
            .pop()
            .expect("one draw requested");
        if handle.augmented_member(&x)? {
            return Ok((true, i + 1));
        }
    }
    Ok((false, unlabeled_budget))
}
