//! Bounded user-parameter distributions.
//!
//! Every random user parameter (demand, impatience, desired dwell) lives
//! on a finite interval. The dwell time may additionally carry a
//! probability atom at zero for users with no desire to stay at the
//! location; demand and impatience are purely continuous.

use crate::quad::{self, integrate};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::fmt;
use std::sync::Arc;

/// Relative tolerance used by expectation quadrature.
pub const EXPECT_REL_TOL: f64 = quad::DEFAULT_REL_TOL;

/// Tolerance on the total probability mass of a distribution.
pub const MASS_TOL: f64 = 1e-8;

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Reproducible generator for the stream `stream` derived from a master
/// seed. Distinct streams of the same seed are statistically independent,
/// which gives each Monte-Carlo shard or simulation replication its own
/// generator without coordination.
pub fn stream_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistKind {
    Uniform,
    Custom,
}

/// A random variable supported on a finite interval, optionally with a
/// probability atom at zero.
///
/// `density` is the density of the continuous part scaled so that
/// `atom_at_zero + integral(density) = 1`; `cdf` is the CDF of the full
/// mixture (including the atom).
#[derive(Clone)]
pub struct BoundedDistribution {
    lower: f64,
    upper: f64,
    atom_at_zero: f64,
    kind: DistKind,
    density: ScalarFn,
    cdf: ScalarFn,
}

impl fmt::Debug for BoundedDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BoundedDistribution")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("atom_at_zero", &self.atom_at_zero)
            .field("kind", &self.kind)
            .finish()
    }
}

impl BoundedDistribution {
    /// Uniform distribution on `[lower, upper]`, `0 <= lower < upper`.
    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::invalid("uniform support must be finite"));
        }
        if lower < 0.0 {
            return Err(Error::invalid(format!(
                "uniform lower bound must be nonnegative, got {lower}"
            )));
        }
        if lower >= upper {
            return Err(Error::invalid(format!(
                "uniform support requires lower < upper, got [{lower}, {upper}]"
            )));
        }
        let w = upper - lower;
        Ok(Self {
            lower,
            upper,
            atom_at_zero: 0.0,
            kind: DistKind::Uniform,
            density: Arc::new(move |t| {
                if (lower..=upper).contains(&t) {
                    1.0 / w
                } else {
                    0.0
                }
            }),
            cdf: Arc::new(move |t| ((t - lower) / w).clamp(0.0, 1.0)),
        })
    }

    /// Distribution from a caller-supplied density and CDF on
    /// `[lower, upper]`. The density must integrate to one within
    /// [`MASS_TOL`]; the CDF must be its antiderivative with
    /// `cdf(lower) = 0` and `cdf(upper) = 1`.
    pub fn custom<D, C>(lower: f64, upper: f64, density: D, cdf: C) -> Result<Self>
    where
        D: Fn(f64) -> f64 + Send + Sync + 'static,
        C: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !lower.is_finite() || !upper.is_finite() || lower < 0.0 || lower >= upper {
            return Err(Error::invalid(format!(
                "custom support must satisfy 0 <= lower < upper < inf, got [{lower}, {upper}]"
            )));
        }
        let mass = integrate(&density, lower, upper, &[], 1e-10)?;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!(
                "custom density mass is {mass}, expected 1 within {MASS_TOL:e}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            atom_at_zero: 0.0,
            kind: DistKind::Custom,
            density: Arc::new(density),
            cdf: Arc::new(cdf),
        })
    }

    /// Mixture placing probability `p0` at zero and `1 - p0` on the
    /// continuous part of `self`. Requires `lower == 0` and
    /// `0 <= p0 < 1`.
    pub fn with_atom_at_zero(&self, p0: f64) -> Result<Self> {
        if self.lower != 0.0 {
            return Err(Error::invalid(format!(
                "an atom at zero requires lower = 0, got lower = {}",
                self.lower
            )));
        }
        if !(0.0..1.0).contains(&p0) {
            return Err(Error::invalid(format!(
                "atom probability must lie in [0, 1), got {p0}"
            )));
        }
        if p0 == 0.0 {
            return Ok(self.clone());
        }
        let base_density = Arc::clone(&self.density);
        let base_cdf = Arc::clone(&self.cdf);
        let keep = 1.0 - p0;
        Ok(Self {
            lower: self.lower,
            upper: self.upper,
            atom_at_zero: p0 + keep * self.atom_at_zero,
            kind: self.kind,
            density: Arc::new(move |t| keep * base_density(t)),
            cdf: Arc::new(move |t| p0 + keep * base_cdf(t)),
        })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn atom_at_zero(&self) -> f64 {
        self.atom_at_zero
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    /// Density of the continuous part (already scaled by `1 - atom`).
    pub fn density_at(&self, t: f64) -> f64 {
        if t < self.lower || t > self.upper {
            0.0
        } else {
            (self.density)(t)
        }
    }

    /// Mixture CDF, `P(X <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        if t < self.lower {
            0.0
        } else if t >= self.upper {
            1.0
        } else {
            (self.cdf)(t).clamp(0.0, 1.0)
        }
    }

    /// `P(lo < X < hi)`. The atom at zero is excluded whenever `lo >= 0`,
    /// matching the open interval.
    pub fn prob_open_interval(&self, lo: f64, hi: f64) -> f64 {
        if !(hi > lo) {
            return 0.0;
        }
        (self.cdf(hi) - self.cdf(lo)).max(0.0)
    }

    /// Numerical total mass: atom plus the integral of the continuous
    /// density. Equals one for every valid distribution.
    pub fn total_mass(&self) -> Result<f64> {
        let cont = integrate(
            |t| self.density_at(t),
            self.lower,
            self.upper,
            &[],
            1e-10,
        )?;
        Ok(self.atom_at_zero + cont)
    }

    /// Expectation `E[f(X)]` by adaptive quadrature; the atom contributes
    /// `f(0) * atom_at_zero` analytically.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        self.expect_with_breakpoints(f, &[])
    }

    /// Expectation with mandatory quadrature split points, for integrands
    /// with kinks at known locations.
    pub fn expect_with_breakpoints<F: Fn(f64) -> f64>(
        &self,
        f: F,
        breakpoints: &[f64],
    ) -> Result<f64> {
        let cont = integrate(
            |t| f(t) * self.density_at(t),
            self.lower,
            self.upper,
            breakpoints,
            EXPECT_REL_TOL,
        )?;
        // Skip the atom term entirely at zero mass: f may be undefined
        // at 0 (e.g. 1/x on a positive support).
        if self.atom_at_zero > 0.0 {
            Ok(self.atom_at_zero * f(0.0) + cont)
        } else {
            Ok(cont)
        }
    }

    pub fn mean(&self) -> Result<f64> {
        match self.kind {
            DistKind::Uniform => {
                Ok((1.0 - self.atom_at_zero) * 0.5 * (self.lower + self.upper))
            }
            DistKind::Custom => self.expect(|t| t),
        }
    }

    /// One draw. Uses inverse-transform sampling: uniform distributions
    /// invert in closed form, custom ones by bisection on the CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        if u < self.atom_at_zero {
            return 0.0;
        }
        match self.kind {
            DistKind::Uniform => {
                let v = (u - self.atom_at_zero) / (1.0 - self.atom_at_zero);
                self.lower + v * (self.upper - self.lower)
            }
            DistKind::Custom => {
                let (mut lo, mut hi) = (self.lower, self.upper);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// `n >= 1` deterministic draws from stream 0 of `seed`.
    pub fn sample_n(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let mut rng = stream_rng(seed, 0);
        Ok((0..n).map(|_| self.sample(&mut rng)).collect())
    }
}

/// The arriving user population: Poisson arrivals plus i.i.d. parameter
/// distributions for each user.
#[derive(Debug, Clone)]
pub struct UserPopulation {
    pub arrival_rate_per_hr: f64,
    pub demand_kwh: BoundedDistribution,
    pub impatience_per_hr: BoundedDistribution,
    pub dwell_hr: BoundedDistribution,
}

impl UserPopulation {
    pub fn new(
        arrival_rate_per_hr: f64,
        demand_kwh: BoundedDistribution,
        impatience_per_hr: BoundedDistribution,
        dwell_hr: BoundedDistribution,
    ) -> Result<Self> {
        if !(arrival_rate_per_hr > 0.0) || !arrival_rate_per_hr.is_finite() {
            return Err(Error::invalid(format!(
                "arrival rate must be positive and finite, got {arrival_rate_per_hr}"
            )));
        }
        if demand_kwh.lower() <= 0.0 {
            return Err(Error::invalid(
                "demand distribution must have a strictly positive lower bound",
            ));
        }
        if impatience_per_hr.atom_at_zero() != 0.0 {
            return Err(Error::invalid(
                "impatience must be a continuous distribution (no atom at zero)",
            ));
        }
        Ok(Self {
            arrival_rate_per_hr,
            demand_kwh,
            impatience_per_hr,
            dwell_hr,
        })
    }
}

/// Samples of a derived random variable, possibly with a point mass at
/// +inf (a demand ratio whose denominator can be exactly zero).
///
/// The infinite mass is kept out of all moment computations; consumers
/// branch on it explicitly.
#[derive(Debug, Clone)]
pub struct EmpiricalDistribution {
    finite: Vec<f64>,
    infinite_count: usize,
}

impl EmpiricalDistribution {
    pub fn from_samples(mut finite: Vec<f64>, infinite_count: usize) -> Result<Self> {
        if finite.is_empty() && infinite_count == 0 {
            return Err(Error::invalid("empirical distribution needs at least one sample"));
        }
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "finite samples must be finite; record infinities via infinite_count",
            ));
        }
        finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(Self {
            finite,
            infinite_count,
        })
    }

    pub fn total_count(&self) -> usize {
        self.finite.len() + self.infinite_count
    }

    pub fn finite(&self) -> &[f64] {
        &self.finite
    }

    pub fn infinite_count(&self) -> usize {
        self.infinite_count
    }

    /// Fraction of draws at +inf.
    pub fn infinite_mass(&self) -> f64 {
        self.infinite_count as f64 / self.total_count() as f64
    }

    /// Sample mean; `None` when any +inf mass would contribute.
    pub fn mean(&self) -> Option<f64> {
        if self.infinite_count > 0 || self.finite.is_empty() {
            return None;
        }
        Some(self.finite.iter().sum::<f64>() / self.finite.len() as f64)
    }

    /// Mean of the finite part only (conditional on being finite).
    pub fn mean_finite(&self) -> Option<f64> {
        if self.finite.is_empty() {
            return None;
        }
        Some(self.finite.iter().sum::<f64>() / self.finite.len() as f64)
    }

    /// Kolmogorov-Smirnov distance between the empirical CDF (over all
    /// draws, counting +inf mass as lying above every finite threshold)
    /// and a reference CDF.
    pub fn ks_distance<F: Fn(f64) -> f64>(&self, cdf: F) -> f64 {
        let n = self.total_count() as f64;
        let mut worst = 0.0f64;
        for (i, x) in self.finite.iter().enumerate() {
            let target = cdf(*x);
            let below = i as f64 / n;
            let at_or_below = (i + 1) as f64 / n;
            worst = worst.max((target - below).abs()).max((target - at_or_below).abs());
        }
        worst
    }
}

/// Empirical distribution of `numerator / denominator` from `n` paired
/// draws. Draws with a zero denominator are recorded as the +inf mass.
pub fn ratio_distribution(
    numerator: &BoundedDistribution,
    denominator: &BoundedDistribution,
    seed: u64,
    n: usize,
) -> Result<EmpiricalDistribution> {
    if numerator.lower() <= 0.0 {
        return Err(Error::invalid(
            "ratio numerator must have a strictly positive lower bound",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let mut finite = Vec::with_capacity(n);
    let mut infinite = 0usize;
    for _ in 0..n {
        let num = numerator.sample(&mut rng);
        let den = denominator.sample(&mut rng);
        if den == 0.0 {
            infinite += 1;
        } else {
            finite.push(num / den);
        }
    }
    EmpiricalDistribution::from_samples(finite, infinite)
}

/// Uniform total-mass check used by validators: `|mass - 1|`.
pub fn mass_defect(dist: &BoundedDistribution) -> Result<f64> {
    Ok((dist.total_mass()? - 1.0).abs())
}

/// Expectation helper mirroring [`BoundedDistribution::expect`] as a free
/// function.
pub fn expect<F: Fn(f64) -> f64>(dist: &BoundedDistribution, f: F) -> Result<f64> {
    dist.expect(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn uniform_mean_by_symmetry() {
        let d = BoundedDistribution::uniform(0.0, 10.0).unwrap();
        assert_relative_eq!(d.mean().unwrap(), 5.0, epsilon = 1e-12);
        assert_relative_eq!(d.expect(|t| t).unwrap(), 5.0, epsilon = 1e-10);
    }

    #[test]
    fn uniform_rejects_bad_support() {
        assert!(BoundedDistribution::uniform(5.0, 5.0).is_err());
        assert!(BoundedDistribution::uniform(7.0, 2.0).is_err());
        assert!(BoundedDistribution::uniform(-1.0, 2.0).is_err());
    }

    #[test]
    fn case_study_supports_construct() {
        let demand = BoundedDistribution::uniform(10.0, 100.0).unwrap();
        assert_relative_eq!(demand.mean().unwrap(), 55.0);
        let dwell = BoundedDistribution::uniform(0.0, 3.5).unwrap();
        assert_relative_eq!(dwell.mean().unwrap(), 1.75);
    }

    #[test]
    fn atom_mixture_mean_and_cdf() {
        let base = BoundedDistribution::uniform(0.0, 2.0).unwrap();
        let d = base.with_atom_at_zero(0.5).unwrap();
        assert_relative_eq!(d.mean().unwrap(), 0.5, epsilon = 1e-12);
        let q = base.with_atom_at_zero(0.25).unwrap();
        assert_relative_eq!(q.cdf(0.0), 0.25, epsilon = 1e-12);
        // Zero-mass atom leaves the distribution unchanged.
        let z = base.with_atom_at_zero(0.0).unwrap();
        assert_eq!(z.atom_at_zero(), 0.0);
        assert_relative_eq!(z.mean().unwrap(), 1.0);
    }

    #[test]
    fn atom_rejected_off_zero_or_out_of_range() {
        let base = BoundedDistribution::uniform(1.0, 2.0).unwrap();
        assert!(base.with_atom_at_zero(0.3).is_err());
        let zero = BoundedDistribution::uniform(0.0, 2.0).unwrap();
        assert!(zero.with_atom_at_zero(1.0).is_err());
        assert!(zero.with_atom_at_zero(-0.1).is_err());
    }

    #[test]
    fn expect_reciprocal_matches_closed_form() {
        let d = BoundedDistribution::uniform(10.0, 100.0).unwrap();
        let v = d.expect(|x| 1.0 / x).unwrap();
        assert_relative_eq!(v, 10f64.ln() / 90.0, epsilon = 1e-9);
    }

    #[test]
    fn expect_handles_atom_analytically() {
        let d = BoundedDistribution::uniform(0.0, 2.0)
            .unwrap()
            .with_atom_at_zero(0.5)
            .unwrap();
        assert_relative_eq!(d.expect(|t| t).unwrap(), 0.5, epsilon = 1e-10);
        // Indicator of {0} picks up exactly the atom.
        let ind = d
            .expect(|t| if t == 0.0 { 1.0 } else { 0.0 })
            .unwrap();
        assert_relative_eq!(ind, 0.5, epsilon = 1e-8);
    }

    #[test]
    fn expect_is_linear() {
        let d = BoundedDistribution::uniform(1.0, 4.0).unwrap();
        let f = |t: f64| t * t;
        let g = |t: f64| (1.0 + t).ln();
        let lhs = d.expect(|t| 2.5 * f(t) - 0.75 * g(t)).unwrap();
        let rhs = 2.5 * d.expect(f).unwrap() - 0.75 * d.expect(g).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-8);
    }

    #[test]
    fn total_mass_is_one() {
        let cases = [
            BoundedDistribution::uniform(0.0, 3.5).unwrap(),
            BoundedDistribution::uniform(10.0, 100.0).unwrap(),
            BoundedDistribution::uniform(0.0, 2.0)
                .unwrap()
                .with_atom_at_zero(0.3)
                .unwrap(),
        ];
        for d in cases {
            assert!((d.total_mass().unwrap() - 1.0).abs() < MASS_TOL);
        }
    }

    #[test]
    fn custom_density_validated() {
        // Triangular density on [0, 2].
        let d = BoundedDistribution::custom(
            0.0,
            2.0,
            |t| if t <= 1.0 { t } else { 2.0 - t },
            |t| {
                if t <= 1.0 {
                    0.5 * t * t
                } else {
                    0.5 + (2.0 * t - 0.5 * t * t) - 1.5
                }
            },
        )
        .unwrap();
        assert_relative_eq!(d.mean().unwrap(), 1.0, epsilon = 1e-8);
        // Density not integrating to one is rejected.
        assert!(BoundedDistribution::custom(0.0, 2.0, |_| 1.0, |t| t / 2.0).is_err());
    }

    #[test]
    fn sampling_is_deterministic_and_consistent() {
        let d = BoundedDistribution::uniform(0.0, 10.0).unwrap();
        let a = d.sample_n(42, 1000).unwrap();
        let b = d.sample_n(42, 1000).unwrap();
        assert_eq!(a, b);
        assert!(d.sample_n(42, 0).is_err());
    }

    #[test]
    fn sample_mean_within_clt_band() {
        let d = BoundedDistribution::uniform(0.0, 10.0).unwrap();
        let xs = d.sample_n(7, 1_000_000).unwrap();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        // 3 sigma band: 3 * (10 / sqrt(12)) / 1000.
        assert!((mean - 5.0).abs() < 0.02, "sample mean {mean}");
    }

    #[test]
    fn atom_fraction_within_binomial_band() {
        let d = BoundedDistribution::uniform(0.0, 2.0)
            .unwrap()
            .with_atom_at_zero(0.3)
            .unwrap();
        let xs = d.sample_n(11, 1_000_000).unwrap();
        let zeros = xs.iter().filter(|v| **v == 0.0).count() as f64;
        let frac = zeros / xs.len() as f64;
        assert!((frac - 0.3).abs() < 0.002, "zero fraction {frac}");
    }

    #[test]
    fn custom_sampling_matches_cdf() {
        let d = BoundedDistribution::custom(
            0.0,
            1.0,
            |t| 2.0 * t,
            |t| t * t,
        )
        .unwrap();
        let xs = d.sample_n(3, 100_000).unwrap();
        let emp = EmpiricalDistribution::from_samples(xs, 0).unwrap();
        assert!(emp.ks_distance(|t| (t * t).clamp(0.0, 1.0)) < 0.01);
    }

    #[test]
    fn ratio_of_uniform_and_near_degenerate_scales() {
        let x = BoundedDistribution::uniform(10.0, 100.0).unwrap();
        let xi = BoundedDistribution::uniform(2.0 - 1e-9, 2.0 + 1e-9).unwrap();
        let rho = ratio_distribution(&x, &xi, 5, 100_000).unwrap();
        assert_eq!(rho.infinite_count(), 0);
        let ks = rho.ks_distance(|t| ((t - 5.0) / 45.0).clamp(0.0, 1.0));
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn ratio_records_infinite_mass() {
        let x = BoundedDistribution::uniform(10.0, 100.0).unwrap();
        let xi = BoundedDistribution::uniform(0.0, 3.5)
            .unwrap()
            .with_atom_at_zero(0.25)
            .unwrap();
        let rho = ratio_distribution(&x, &xi, 9, 1_000_000).unwrap();
        assert!((rho.infinite_mass() - 0.25).abs() < 0.005);
        assert!(rho.mean().is_none());
        assert!(rho.mean_finite().is_some());
    }

    #[test]
    fn ratio_rejects_zero_capable_numerator() {
        let x = BoundedDistribution::uniform(0.0, 1.0).unwrap();
        let xi = BoundedDistribution::uniform(1.0, 2.0).unwrap();
        assert!(ratio_distribution(&x, &xi, 1, 10).is_err());
    }

    #[test]
    fn population_validation() {
        let demand = BoundedDistribution::uniform(10.0, 100.0).unwrap();
        let imp = BoundedDistribution::uniform(0.0, 10.0).unwrap();
        let dwell = BoundedDistribution::uniform(0.0, 3.5).unwrap();
        assert!(UserPopulation::new(20.0, demand.clone(), imp.clone(), dwell.clone()).is_ok());
        assert!(UserPopulation::new(0.0, demand.clone(), imp.clone(), dwell.clone()).is_err());
        let zero_demand = BoundedDistribution::uniform(0.0, 10.0).unwrap();
        assert!(UserPopulation::new(20.0, zero_demand, imp.clone(), dwell.clone()).is_err());
        let atom_imp = BoundedDistribution::uniform(0.0, 10.0)
            .unwrap()
            .with_atom_at_zero(0.2)
            .unwrap();
        assert!(UserPopulation::new(20.0, demand, atom_imp, dwell).is_err());
    }
}
