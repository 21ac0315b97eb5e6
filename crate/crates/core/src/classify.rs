//! Vote statistics, the standard k-NN classifier, and the two-pool
//! modified classifier with region routing.

use crate::error::Error;
use crate::metric::{Point, Pool, Provenance};
use crate::region::RegionHandle;
use crate::Result;

/// Outcome of a k-NN vote.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    /// Number of label-1 neighbors among the k used.
    pub ones: usize,
    pub k_used: usize,
    /// ones / k_used; exact as a float for desk-scale k.
    pub fraction_ones: f64,
    /// Pool indices of the neighbors, nearest first.
    pub neighbor_ids: Vec<usize>,
}

impl VoteResult {
    /// The classifier case split: predict 1 exactly when the vote is at
    /// least 1/2 (exact integer comparison, ties go to 1).
    pub fn predicts_one(&self) -> bool {
        2 * self.ones >= self.k_used
    }
}

/// Mean label of the k nearest (tie-broken) neighbors of `x`.
pub fn vote_fraction(pool: &Pool, x: &Point, k: usize) -> Result<VoteResult> {
    let nn = pool.knn(x, k)?;
    let ones = nn.iter().filter(|nb| pool.sample(nb.index).label == 1).count();
    Ok(VoteResult {
        ones,
        k_used: k,
        fraction_ones: ones as f64 / k as f64,
        neighbor_ids: nn.iter().map(|nb| nb.index).collect(),
    })
}

/// The standard k-NN prediction at `x`.
pub fn classify_standard(pool: &Pool, x: &Point, k: usize) -> Result<u8> {
    Ok(u8::from(vote_fraction(pool, x, k)?.predicts_one()))
}

/// Which pool the modified classifier voted over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RouteBranch {
    /// x in the hard region: vote over the rejection pool.
    HardRegion,
    /// x outside the hard region: vote over the samples drawn from the
    /// data distribution (both rounds).
    Complement,
    /// No region (the augmented region had zero mass): vote over all
    /// samples.
    Fallback,
}

/// The modified k-NN classifier: a frozen pair of sample pools plus the
/// region that routes queries between them.
///
/// Immutable after assembly; classification queries are safe concurrently.
#[derive(Debug, Clone)]
pub struct ClassifierBundle {
    /// Samples drawn from the data distribution (Round1 and Round2FromP).
    main: Pool,
    /// Samples accepted by the rejection sampler (Round2Rejection).
    rejection: Pool,
    region: Option<RegionHandle>,
    k: usize,
}

impl ClassifierBundle {
    pub fn new(
        main: Pool,
        rejection: Pool,
        region: Option<RegionHandle>,
        k: usize,
    ) -> Result<Self> {
        for s in main.samples() {
            if s.provenance == Provenance::Round2Rejection {
                return Err(Error::Invalid(
                    "rejection-sampled point in the main pool".into(),
                ));
            }
        }
        for s in rejection.samples() {
            if s.provenance != Provenance::Round2Rejection {
                return Err(Error::Invalid(
                    "non-rejection point in the rejection pool".into(),
                ));
            }
        }
        match &region {
            Some(_) => {
                if rejection.len() < k {
                    return Err(Error::KTooLarge {
                        k,
                        pool: rejection.len(),
                    });
                }
                if main.len() < k {
                    return Err(Error::KTooLarge { k, pool: main.len() });
                }
            }
            None => {
                if !rejection.is_empty() {
                    return Err(Error::Invalid(
                        "fallback bundle must have an empty rejection pool".into(),
                    ));
                }
                if main.len() < k {
                    return Err(Error::KTooLarge { k, pool: main.len() });
                }
            }
        }
        Ok(ClassifierBundle {
            main,
            rejection,
            region,
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn main_pool(&self) -> &Pool {
        &self.main
    }

    pub fn rejection_pool(&self) -> &Pool {
        &self.rejection
    }

    pub fn region(&self) -> Option<&RegionHandle> {
        self.region.as_ref()
    }

    /// Predict at `x`, reporting which pool was voted over and the vote.
    pub fn classify_traced(&self, x: &Point) -> Result<(u8, RouteBranch, VoteResult)> {
        let (branch, pool) = match &self.region {
            Some(region) => {
                if region.hard_region_member(x)? {
                    (RouteBranch::HardRegion, &self.rejection)
                } else {
                    (RouteBranch::Complement, &self.main)
                }
            }
            // Zero-mass region: plain k-NN over the union of all samples
            // (the rejection pool is empty here by construction).
            None => (RouteBranch::Fallback, &self.main),
        };
        let vote = vote_fraction(pool, x, self.k)?;
        Ok((u8::from(vote.predicts_one()), branch, vote))
    }

    /// Predict at `x`.
    pub fn classify(&self, x: &Point) -> Result<u8> {
        Ok(self.classify_traced(x)?.0)
    }
}
