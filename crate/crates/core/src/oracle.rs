//! Synthetic distributions with closed-form oracles.
//!
//! Every built-in family is a uniform measure on the unit cube with a
//! conditional probability function that is piecewise linear in the first
//! coordinate. That is enough to make every quantity the guarantees are
//! stated in exactly computable: probability radii, ball-conditional means,
//! effective-boundary membership and mass, easy-region mass, and the
//! smoothness / margin / regularity certificates.

use crate::error::Error;
use crate::metric::{Metric, Point};
use crate::region::DerivedConstants;
use crate::rng::{stream, Stream};
use crate::Result;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Built-in family descriptors.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// mu = Uniform`[0,1]`, eta(x) = x.
    Linear1d,
    /// mu = Uniform`[0,1]`; eta crosses 1/2 with the given slope and is
    /// clamped to the plateaus 1/2 +- plateau.
    Piecewise1d { slope: f64, plateau: f64 },
    /// mu = Uniform`[0,1]`, eta constant.
    Constant1d { eta: f64 },
    /// mu = Uniform`[0,1]`^2, eta(x) = x_1, l-infinity metric.
    Linear2d,
}

/// A value together with its Monte-Carlo standard error (zero when the
/// value is exact).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measure {
    pub value: f64,
    pub std_error: f64,
}

impl Measure {
    fn exact(value: f64) -> Self {
        Measure {
            value,
            std_error: 0.0,
        }
    }
}

/// A synthetic (mu, eta) pair with its certified constants.
///
/// `alpha`/`smooth_l` certify the mass-based smoothness condition,
/// `beta`/`c_margin` the margin condition, and `zeta` the ball-regularity
/// condition; all three certificates are re-checked by property tests.
#[derive(Debug, Clone)]
pub struct OracleDistribution {
    pub name: String,
    pub dim: usize,
    pub d_vc: usize,
    pub alpha: f64,
    pub smooth_l: f64,
    pub beta: f64,
    pub c_margin: f64,
    pub zeta: f64,
    pub metric: Metric,
    pub kind: FamilyKind,
    /// eta as a piecewise-linear function of the first coordinate.
    knots: Vec<(f64, f64)>,
    /// Resolution of the radius grid used to decide the for-all-radii
    /// quantifier. Doubling it must not change any verdict (self-check).
    margin_grid: usize,
}

const DEFAULT_MARGIN_GRID: usize = 256;

/// Internal seed for the 2-D Monte-Carlo mass estimates; fixed so that
/// reported measures are reproducible.
const MEASURE_MC_SEED: u64 = 0xACCE55;
const MEASURE_MC_POINTS: usize = 200_000;

impl OracleDistribution {
    pub fn uniform1d_linear() -> Self {
        OracleDistribution {
            name: "uniform1d_linear".into(),
            dim: 1,
            d_vc: 2,
            alpha: 1.0,
            smooth_l: 1.0,
            beta: 1.0,
            c_margin: 2.0,
            zeta: 0.0,
            metric: Metric::Linf,
            kind: FamilyKind::Linear1d,
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
            margin_grid: DEFAULT_MARGIN_GRID,
        }
    }

    /// eta(x) = clamp(1/2 + slope (x - 1/2), 1/2 - plateau, 1/2 + plateau).
    ///
    /// Requires plateau <= slope/2 so the plateaus are reached inside the
    /// support, and plateau <= 1/2 so eta stays in `[0, 1]`.
    pub fn uniform1d_piecewise(slope: f64, plateau: f64) -> Result<Self> {
        if slope <= 0.0 || !slope.is_finite() {
            return Err(Error::InvalidParams(format!("slope must be positive, got {slope}")));
        }
        if plateau.is_nan() || plateau <= 0.0 || plateau > 0.5 {
            return Err(Error::InvalidParams(format!(
                "plateau must be in (0, 1/2], got {plateau}"
            )));
        }
        let half_width = plateau / slope;
        if half_width > 0.5 {
            return Err(Error::InvalidParams(format!(
                "plateau/slope = {half_width} > 1/2: plateaus unreachable in [0,1]"
            )));
        }
        let lo = 0.5 - plateau;
        let hi = 0.5 + plateau;
        let mut knots = vec![(0.0, lo)];
        if half_width < 0.5 {
            knots.push((0.5 - half_width, lo));
            knots.push((0.5, 0.5));
            knots.push((0.5 + half_width, hi));
        } else {
            knots.push((0.5, 0.5));
        }
        knots.push((1.0, hi));
        Ok(OracleDistribution {
            name: format!("uniform1d_piecewise(s={slope},h={plateau})"),
            dim: 1,
            d_vc: 2,
            alpha: 1.0,
            smooth_l: slope,
            beta: 1.0,
            c_margin: (2.0 / slope).max(1.0 / plateau),
            zeta: 0.0,
            metric: Metric::Linf,
            kind: FamilyKind::Piecewise1d { slope, plateau },
            knots,
            margin_grid: DEFAULT_MARGIN_GRID,
        })
    }

    pub fn uniform1d_constant(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParams(format!("eta must be in [0,1], got {eta}")));
        }
        Ok(OracleDistribution {
            name: format!("uniform1d_constant(eta={eta})"),
            dim: 1,
            d_vc: 2,
            alpha: 1.0,
            // |eta(x) - eta(x')| = 0, so any positive L certifies the
            // smoothness condition; a tiny one keeps the smoothness-gated
            // audits in force.
            smooth_l: 1e-12,
            // mu(|eta - 1/2| <= t) is a step function; beta = 0, C = 1
            // certifies it for every eta level.
            beta: 0.0,
            c_margin: 1.0,
            zeta: 0.0,
            metric: Metric::Linf,
            kind: FamilyKind::Constant1d { eta },
            knots: vec![(0.0, eta), (1.0, eta)],
            margin_grid: DEFAULT_MARGIN_GRID,
        })
    }

    pub fn uniform2d_linear() -> Self {
        OracleDistribution {
            name: "uniform2d_linear".into(),
            dim: 2,
            d_vc: 4,
            // |eta(x) - eta(x')| <= rho_inf(x, x') and the ball mass is at
            // least rho^2 anywhere in the square, so alpha = 1/2, L = 1.
            alpha: 0.5,
            smooth_l: 1.0,
            beta: 1.0,
            c_margin: 2.0,
            zeta: 0.0,
            metric: Metric::Linf,
            kind: FamilyKind::Linear2d,
            knots: vec![(0.0, 0.0), (1.0, 1.0)],
            margin_grid: DEFAULT_MARGIN_GRID,
        }
    }

    /// Override the radius-grid resolution (refinement self-checks).
    pub fn with_margin_grid(mut self, grid: usize) -> Self {
        self.margin_grid = grid.max(2);
        self
    }

    pub fn support_contains(&self, x: &Point) -> bool {
        x.dim() == self.dim && x.coords().iter().all(|&c| (0.0..=1.0).contains(&c))
    }

    fn check_support(&self, x: &Point) -> Result<()> {
        if !self.support_contains(x) {
            return Err(Error::OutOfSupport(x.coords().to_vec()));
        }
        Ok(())
    }

    /// i.i.d. draws from mu.
    pub fn sample_instance_rng(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<Point> {
        (0..count)
            .map(|_| {
                let coords: Vec<f64> = (0..self.dim).map(|_| rng.random::<f64>()).collect();
                Point::new(coords).expect("uniform draws are finite")
            })
            .collect()
    }

    /// Seed-addressed variant of [`Self::sample_instance_rng`].
    pub fn sample_instance(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = stream(seed, Stream::MonteCarlo);
        self.sample_instance_rng(count, &mut rng)
    }

    /// The conditional probability of label 1 at `x`.
    pub fn eta(&self, x: &Point) -> Result<f64> {
        self.check_support(x)?;
        Ok(self.eta_coord(x.coord(0)))
    }

    fn eta_coord(&self, c: f64) -> f64 {
        let ks = &self.knots;
        if c <= ks[0].0 {
            return ks[0].1;
        }
        if c >= ks[ks.len() - 1].0 {
            return ks[ks.len() - 1].1;
        }
        let mut i = 0;
        while ks[i + 1].0 < c {
            i += 1;
        }
        let (x0, v0) = ks[i];
        let (x1, v1) = ks[i + 1];
        // Exact at the knots themselves.
        if c == x0 {
            return v0;
        }
        if c == x1 || x1 == x0 {
            return v1;
        }
        v0 + (v1 - v0) * (c - x0) / (x1 - x0)
    }

    /// Exact integral of eta over the first-coordinate interval [lo, hi].
    fn eta_integral(&self, lo: f64, hi: f64) -> f64 {
        debug_assert!(lo <= hi);
        let mut total = 0.0;
        for w in self.knots.windows(2) {
            let (x0, _) = w[0];
            let (x1, _) = w[1];
            let a = lo.max(x0);
            let b = hi.min(x1);
            if b > a {
                total += (b - a) * (self.eta_coord(a) + self.eta_coord(b)) / 2.0;
            }
        }
        total
    }

    /// The Bayes optimal prediction at `x`: 1 exactly when eta(x) >= 1/2.
    pub fn bayes_classify(&self, x: &Point) -> Result<u8> {
        Ok(if self.eta(x)? >= 0.5 { 1 } else { 0 })
    }

    /// Support window of the closed metric ball along one axis.
    fn window(c: f64, r: f64) -> (f64, f64) {
        ((c - r).max(0.0), (c + r).min(1.0))
    }

    /// mu(B(x, r)) for the closed ball (equals the open-ball mass).
    pub fn ball_mass(&self, x: &Point, r: f64) -> Result<f64> {
        self.check_support(x)?;
        if r < 0.0 {
            return Ok(0.0);
        }
        let mut mass = 1.0;
        for axis in 0..self.dim {
            let (lo, hi) = Self::window(x.coord(axis), r);
            mass *= (hi - lo).max(0.0);
        }
        Ok(mass)
    }

    /// The probability radius r(x; p): the smallest radius whose closed
    /// ball around `x` has mass at least `p`.
    pub fn prob_radius(&self, x: &Point, p: f64) -> Result<f64> {
        self.check_support(x)?;
        if p.is_nan() || p <= 0.0 || p > 1.0 {
            return Err(Error::InvalidParams(format!("p must be in (0,1], got {p}")));
        }
        match self.dim {
            1 => {
                let c = x.coord(0);
                let a = c.min(1.0 - c);
                Ok(if p <= 2.0 * a { p / 2.0 } else { p - a })
            }
            2 => Ok(self.prob_radius_2d(x, p)),
            d => Err(Error::UnsupportedDimension(d)),
        }
    }

    /// Piecewise-quadratic inversion of r -> mass for the square.
    fn prob_radius_2d(&self, x: &Point, p: f64) -> f64 {
        let (c1, c2) = (x.coord(0), x.coord(1));
        let mut brk: Vec<f64> = vec![
            c1.min(1.0 - c1),
            c1.max(1.0 - c1),
            c2.min(1.0 - c2),
            c2.max(1.0 - c2),
        ];
        brk.retain(|&b| b > 0.0);
        brk.sort_by(|a, b| a.total_cmp(b));
        brk.dedup();
        let mut lo = 0.0f64;
        for &hi in &brk {
            let mass_hi = self.ball_mass(x, hi).expect("in support");
            if mass_hi >= p {
                return Self::solve_segment(c1, c2, lo, hi, p);
            }
            lo = hi;
        }
        // p = 1 lands exactly on the last breakpoint.
        *brk.last().expect("square has positive extent")
    }

    /// Solve mass(r) = p on a segment where both axis windows are affine
    /// in r: mass(r) = (a1 + b1 r)(a2 + b2 r).
    fn solve_segment(c1: f64, c2: f64, lo: f64, hi: f64, p: f64) -> f64 {
        let mid = (lo + hi) / 2.0;
        let affine = |c: f64| -> (f64, f64) {
            let near = c.min(1.0 - c);
            let far = c.max(1.0 - c);
            if mid < near {
                (0.0, 2.0)
            } else if mid < far {
                (near, 1.0)
            } else {
                (1.0, 0.0)
            }
        };
        let (a1, b1) = affine(c1);
        let (a2, b2) = affine(c2);
        let qa = b1 * b2;
        let qb = a1 * b2 + a2 * b1;
        let qc = a1 * a2 - p;
        let root = if qa.abs() > 0.0 {
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
            (-qb + disc.sqrt()) / (2.0 * qa)
        } else if qb.abs() > 0.0 {
            -qc / qb
        } else {
            hi
        };
        root.clamp(lo, hi)
    }

    /// Exact conditional mean of eta over the closed ball B(x, r)
    /// intersected with the support.
    pub fn ball_eta(&self, x: &Point, r: f64) -> Result<f64> {
        self.check_support(x)?;
        if r.is_nan() || r <= 0.0 {
            return Err(Error::ZeroMassBall { radius: r });
        }
        // Only the first coordinate carries eta; the others integrate out.
        let (lo, hi) = Self::window(x.coord(0), r);
        if hi <= lo {
            return Err(Error::ZeroMassBall { radius: r });
        }
        Ok(self.eta_integral(lo, hi) / (hi - lo))
    }

    /// Signed-margin extrema of r -> eta(B(x,r)) - 1/2 over r in (0, R],
    /// R = r(x; p), including the r -> 0 limit eta(x) - 1/2.
    ///
    /// Decided on a log-spaced radius grid joined with the radii where the
    /// ball window meets a knot or a support edge; for the built-in
    /// families the margin is monotone in r between those radii, so the
    /// grid extrema are the true extrema.
    fn margin_extrema(&self, x: &Point, p: f64) -> Result<(f64, f64)> {
        let r_max = self.prob_radius(x, p)?;
        let c = x.coord(0);
        let limit = self.eta_coord(c) - 0.5;
        let mut min_m = limit;
        let mut max_m = limit;
        if r_max <= 0.0 {
            return Ok((min_m, max_m));
        }
        let mut radii: Vec<f64> = Vec::with_capacity(self.margin_grid + 8);
        radii.push(r_max);
        let lo = r_max * 1e-6;
        let steps = self.margin_grid.max(2) - 1;
        let ratio = (r_max / lo).ln();
        for i in 0..=steps {
            radii.push(lo * (ratio * i as f64 / steps as f64).exp());
        }
        for &(kx, _) in &self.knots {
            let r = (c - kx).abs();
            if r > 0.0 && r <= r_max {
                radii.push(r);
            }
        }
        for edge in [c, 1.0 - c] {
            if edge > 0.0 && edge <= r_max {
                radii.push(edge);
            }
        }
        for r in radii {
            let m = self.ball_eta(x, r)? - 0.5;
            if m < min_m {
                min_m = m;
            }
            if m > max_m {
                max_m = m;
            }
        }
        Ok((min_m, max_m))
    }

    /// The margin score at scale p: the largest t such that either
    /// "all ball means within r(x;p) sit at least t above 1/2" or
    /// "... at least t below 1/2" holds.
    ///
    /// `x` is in the effective interior at (p, t) exactly when the score
    /// is >= t, and in the easy region at threshold t likewise.
    pub fn margin_score(&self, x: &Point, p: f64) -> Result<f64> {
        let p = p.min(1.0);
        let (min_m, max_m) = self.margin_extrema(x, p)?;
        Ok(min_m.max(-max_m))
    }

    /// Membership in the effective decision boundary at scale p and
    /// margin `delta`.
    pub fn boundary_member(&self, x: &Point, p: f64, delta: f64) -> Result<bool> {
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidParams(format!("p must be in (0,1), got {p}")));
        }
        if delta.is_nan() || delta <= 0.0 || delta > 0.5 {
            return Err(Error::InvalidParams(format!(
                "delta must be in (0, 1/2], got {delta}"
            )));
        }
        Ok(self.margin_score(x, p)? < delta)
    }

    /// Membership in the easy region for the given derived constants:
    /// every ball mean within r(x; p''_n) sits at least 5 Delta_UC away
    /// from 1/2, with a consistent sign.
    pub fn easy_member(&self, x: &Point, consts: &DerivedConstants) -> Result<bool> {
        Ok(self.margin_score(x, consts.p_n_dprime)? >= 5.0 * consts.delta_uc)
    }

    /// mu of the set where the margin score at scale p is below t.
    ///
    /// Exact (closed form or refined 1-D scan) in one dimension;
    /// Monte-Carlo with a reported standard error in two.
    pub fn margin_region_measure(&self, p: f64, t: f64) -> Result<Measure> {
        let p = p.min(1.0);
        if p.is_nan() || p <= 0.0 {
            return Err(Error::InvalidParams(format!("p must be positive, got {p}")));
        }
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidParams(format!("t must be positive, got {t}")));
        }
        match &self.kind {
            FamilyKind::Constant1d { eta } => {
                Ok(Measure::exact(if (eta - 0.5).abs() < t { 1.0 } else { 0.0 }))
            }
            FamilyKind::Linear1d => {
                // margin(x) = min(|x - 1/2|, (1-p)/2), so the sublevel set
                // is the strip of width 2t while t stays below the cap.
                Ok(Measure::exact(if t <= (1.0 - p) / 2.0 { 2.0 * t } else { 1.0 }))
            }
            FamilyKind::Piecewise1d { .. } => Ok(Measure::exact(self.sublevel_measure_1d(p, t)?)),
            FamilyKind::Linear2d => self.sublevel_measure_mc(p, t, MEASURE_MC_POINTS, MEASURE_MC_SEED),
        }
    }

    /// Effective-boundary mass at (p, delta).
    pub fn boundary_measure(&self, p: f64, delta: f64) -> Result<Measure> {
        if p.is_nan() || p <= 0.0 || p >= 1.0 {
            return Err(Error::InvalidParams(format!("p must be in (0,1), got {p}")));
        }
        if delta.is_nan() || delta <= 0.0 || delta > 0.5 {
            return Err(Error::InvalidParams(format!(
                "delta must be in (0, 1/2], got {delta}"
            )));
        }
        self.margin_region_measure(p, delta)
    }

    /// mu(X \ easy region) for the given constants.
    pub fn easy_complement_measure(&self, consts: &DerivedConstants) -> Result<Measure> {
        self.margin_region_measure(consts.p_n_dprime, 5.0 * consts.delta_uc)
    }

    /// Scan-plus-bisection measure of {x : score(x) < t} on `[0, 1]`.
    fn sublevel_measure_1d(&self, p: f64, t: f64) -> Result<f64> {
        const CELLS: usize = 2048;
        let score = |c: f64| -> Result<f64> { self.margin_score(&Point::one_d(c), p) };
        let mut nodes: Vec<f64> = Vec::with_capacity(CELLS + 1);
        let mut values: Vec<f64> = Vec::with_capacity(CELLS + 1);
        for i in 0..=CELLS {
            let c = i as f64 / CELLS as f64;
            nodes.push(c);
            values.push(score(c)?);
        }
        let mut cuts: Vec<f64> = vec![0.0];
        for i in 0..CELLS {
            let below_l = values[i] < t;
            let below_r = values[i + 1] < t;
            if below_l != below_r {
                // Invariant: (score(a) < t) == below_l, (score(b) < t) != below_l.
                let (mut a, mut b) = (nodes[i], nodes[i + 1]);
                for _ in 0..50 {
                    let m = (a + b) / 2.0;
                    if (score(m)? < t) == below_l {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                cuts.push((a + b) / 2.0);
            }
        }
        cuts.push(1.0);
        cuts.sort_by(|a, b| a.total_cmp(b));
        let mut mass = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b > a && score((a + b) / 2.0)? < t {
                mass += b - a;
            }
        }
        Ok(mass)
    }

    fn sublevel_measure_mc(&self, p: f64, t: f64, points: usize, seed: u64) -> Result<Measure> {
        let mut rng = stream(seed, Stream::MonteCarlo);
        let mut hits = 0usize;
        for _ in 0..points {
            let x = self.sample_instance_rng(1, &mut rng).pop().expect("one draw");
            if self.margin_score(&x, p)? < t {
                hits += 1;
            }
        }
        let value = hits as f64 / points as f64;
        let std_error = (value * (1.0 - value) / points as f64).sqrt();
        Ok(Measure { value, std_error })
    }

    /// Exact mu({x : |eta(x) - 1/2| <= t}) for the margin certificate.
    pub fn eta_margin_mass(&self, t: f64) -> f64 {
        let mut mass = 0.0;
        for w in self.knots.windows(2) {
            let (x0, v0) = w[0];
            let (x1, v1) = w[1];
            if x1 <= x0 {
                continue;
            }
            if v0 == v1 {
                if (v0 - 0.5).abs() <= t {
                    mass += x1 - x0;
                }
                continue;
            }
            // Linear segment: solve |v(x) - 1/2| <= t for x.
            let inv = |v: f64| x0 + (v - v0) * (x1 - x0) / (v1 - v0);
            let (mut a, mut b) = (inv(0.5 - t), inv(0.5 + t));
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            let lo = a.max(x0);
            let hi = b.min(x1);
            if hi > lo {
                mass += hi - lo;
            }
        }
        mass
    }

    /// A uniform grid of support midpoints, `per_axis` per dimension.
    pub fn support_grid(&self, per_axis: usize) -> Vec<Point> {
        let axis: Vec<f64> = (0..per_axis)
            .map(|i| (i as f64 + 0.5) / per_axis as f64)
            .collect();
        match self.dim {
            1 => axis.iter().map(|&c| Point::one_d(c)).collect(),
            2 => {
                let mut grid = Vec::with_capacity(per_axis * per_axis);
                for &c1 in &axis {
                    for &c2 in &axis {
                        grid.push(Point::new(vec![c1, c2]).expect("finite"));
                    }
                }
                grid
            }
            _ => Vec::new(),
        }
    }
}
