//! High-confidence tail bounds on facility occupancy and power draw.
//!
//! At steady state the number of present users of an infinite-server
//! system with Poisson arrivals is Poisson with mean `lambda E[theta]`,
//! where `theta` is the per-user service time. A Bernstein-type bound on
//! that Poisson variable gives the occupancy bound `delta(M)`; combining
//! it with Bernstein's inequality applied to the sum of per-user rates,
//! conditioned on the active-user count, gives the power bound
//! `gamma(R)`.

use crate::{Error, Result};
use statrs::function::gamma::ln_gamma;

/// Everything the bounds need to know about a facility/population pair.
#[derive(Debug, Clone, Copy)]
pub struct QueueParameters {
    /// Poisson arrival rate, EVs/hr.
    pub arrival_rate_per_hr: f64,
    /// `E[theta]`: expected time a user occupies a spot, hr.
    pub e_dwell_hr: f64,
    /// `E[theta_act]`: expected time a user draws power, hr.
    pub e_active_hr: f64,
    /// `E[r]`, kW.
    pub e_r_kw: f64,
    /// `E[r^2]`, kW^2.
    pub e_r2_kw2: f64,
    /// Per-user rate ceiling, kW.
    pub r_max_kw: f64,
}

impl QueueParameters {
    pub fn new(
        arrival_rate_per_hr: f64,
        e_dwell_hr: f64,
        e_active_hr: f64,
        e_r_kw: f64,
        e_r2_kw2: f64,
        r_max_kw: f64,
    ) -> Result<Self> {
        let all = [
            arrival_rate_per_hr,
            e_dwell_hr,
            e_active_hr,
            e_r_kw,
            e_r2_kw2,
            r_max_kw,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid(
                "queue parameters must all be positive and finite",
            ));
        }
        if e_active_hr > e_dwell_hr * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "active time {e_active_hr} cannot exceed dwell time {e_dwell_hr}"
            )));
        }
        if e_r_kw > r_max_kw * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "mean rate {e_r_kw} cannot exceed the rate ceiling {r_max_kw}"
            )));
        }
        if e_r2_kw2 < e_r_kw * e_r_kw * (1.0 - 1e-12) {
            return Err(Error::invalid(format!(
                "second moment {e_r2_kw2} below the squared mean {}",
                e_r_kw * e_r_kw
            )));
        }
        Ok(Self {
            arrival_rate_per_hr,
            e_dwell_hr,
            e_active_hr,
            e_r_kw,
            e_r2_kw2,
            r_max_kw,
        })
    }

    /// Mean number of present users, `lambda E[theta]`.
    pub fn mean_occupancy(&self) -> f64 {
        self.arrival_rate_per_hr * self.e_dwell_hr
    }

    /// Mean number of actively charging users, `lambda E[theta_act]`.
    pub fn mean_active(&self) -> f64 {
        self.arrival_rate_per_hr * self.e_active_hr
    }
}

/// Bernstein tail for a sum of independent, zero-mean variables bounded
/// by `b`: `exp(-nu^2 / (2 (sum E[X^2] + b nu / 3)))`. Equals one at
/// `nu = 0`.
pub fn bernstein_tail(nu: f64, sum_second_moments: f64, b: f64) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(Error::invalid(format!(
            "deviation must be nonnegative, got {nu}"
        )));
    }
    if !(sum_second_moments > 0.0) || !(b > 0.0) {
        return Err(Error::invalid(
            "second-moment sum and bound must be positive",
        ));
    }
    Ok((-nu * nu / (2.0 * (sum_second_moments + b * nu / 3.0))).exp())
}

/// Upper bound on `P(Z >= m)` for `Z ~ Poisson(mean)`: the Bernstein
/// bound with unit increments, or the trivial one when `m <= mean`.
pub fn poisson_tail_bound(mean: f64, m: f64) -> f64 {
    debug_assert!(mean > 0.0);
    if m <= mean {
        return 1.0;
    }
    let dev = m - mean;
    (-dev * dev / (2.0 * (mean + dev / 3.0))).exp()
}

/// `delta(M)`: bound on the probability that the number of present users
/// reaches `M`.
pub fn occupancy_bound(params: &QueueParameters, m: f64) -> f64 {
    poisson_tail_bound(params.mean_occupancy(), m)
}

/// `delta_act(M)`: the same bound for actively charging users.
pub fn active_occupancy_bound(params: &QueueParameters, m: f64) -> f64 {
    poisson_tail_bound(params.mean_active(), m)
}

/// Log-space Poisson PMF, safe for large means.
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let kf = k as f64;
    (kf * mean.ln() - mean - ln_gamma(kf + 1.0)).exp()
}

/// `gamma(R)`: bound on the probability that the aggregate power draw of
/// the active users reaches `R` kW.
///
/// For `R` above the mean power `lambda E[theta_act] E[r]`, the active
/// count is partitioned: counts up to `floor(R / E[r])` contribute a
/// Bernstein term weighted by the Poisson mass of the count, counts
/// beyond it are absorbed into the active-occupancy bound, and counts
/// below `ceil(R / R_max)` cannot reach `R` at all. A count at which
/// `R - m E[r] = 0` contributes `exp(0)` times its Poisson weight.
pub fn power_bound(params: &QueueParameters, r: f64) -> f64 {
    let mean_active = params.mean_active();
    if r <= mean_active * params.e_r_kw {
        return 1.0;
    }
    let lo = (r / params.r_max_kw).ceil() as u64;
    let hi = (r / params.e_r_kw).floor();
    let mut total = poisson_tail_bound(mean_active, hi);
    let hi = hi as u64;
    for m in lo..=hi {
        let dev = r - m as f64 * params.e_r_kw;
        let exponent =
            -dev * dev / (2.0 * (m as f64 * params.e_r2_kw2 + params.r_max_kw * dev / 3.0));
        total += exponent.exp() * poisson_pmf(m, mean_active);
    }
    total.min(1.0)
}

/// Which threshold family a curve tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMetric {
    /// Present users vs `M`; tabulates `delta(M)`.
    Occupancy,
    /// Actively charging users vs `M`; tabulates `delta_act(M)`.
    ActiveOccupancy,
    /// Power draw vs `R` kW; tabulates `gamma(R)`.
    Power,
}

/// A bound tabulated over a threshold grid.
#[derive(Debug, Clone)]
pub struct BoundCurve {
    pub metric: BoundMetric,
    pub thresholds: Vec<f64>,
    pub bounds: Vec<f64>,
}

impl BoundCurve {
    pub fn confidences(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| 1.0 - b).collect()
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Tabulate one of the bounds over an ascending threshold grid.
pub fn bound_curve(params: &QueueParameters, grid: &[f64], metric: BoundMetric) -> Result<BoundCurve> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::invalid("threshold grid must be sorted ascending"));
    }
    let f = match metric {
        BoundMetric::Occupancy => occupancy_bound,
        BoundMetric::ActiveOccupancy => active_occupancy_bound,
        BoundMetric::Power => power_bound,
    };
    Ok(BoundCurve {
        metric,
        thresholds: grid.to_vec(),
        bounds: grid.iter().map(|t| f(params, *t)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(lambda: f64, e_dwell: f64, e_active: f64, e_r: f64, e_r2: f64, r_max: f64) -> QueueParameters {
        QueueParameters::new(lambda, e_dwell, e_active, e_r, e_r2, r_max).unwrap()
    }

    /// Exact upper Poisson tail by direct summation, independent of the
    /// log-gamma PMF used by the implementation.
    fn exact_poisson_upper_tail(mean: f64, m: u64) -> f64 {
        let cutoff = (mean + 30.0 * mean.sqrt() + 60.0) as u64;
        let mut p = (-mean).exp();
        let mut tail = 0.0;
        for k in 0..=cutoff {
            if k >= m {
                tail += p;
            }
            p *= mean / (k + 1) as f64;
        }
        tail
    }

    #[test]
    fn bernstein_examples() {
        assert_eq!(bernstein_tail(0.0, 10.0, 1.0).unwrap(), 1.0);
        let v = bernstein_tail(10.0, 10.0, 1.0).unwrap();
        assert_relative_eq!(v, (-3.75f64).exp(), epsilon = 1e-12);
        assert!(bernstein_tail(-1.0, 10.0, 1.0).is_err());
        // Strictly decreasing in the deviation.
        let mut prev = 1.0;
        for i in 1..50 {
            let v = bernstein_tail(i as f64 * 0.5, 10.0, 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn poisson_tail_bound_examples() {
        assert_relative_eq!(
            poisson_tail_bound(10.0, 20.0),
            (-3.75f64).exp(),
            epsilon = 1e-12
        );
        assert_eq!(poisson_tail_bound(10.0, 8.0), 1.0);
        // Dominates the exact tail.
        let exact = exact_poisson_upper_tail(10.0, 20);
        assert!(exact < poisson_tail_bound(10.0, 20.0));
        assert_relative_eq!(exact, 0.00345, epsilon = 2e-3);
    }

    #[test]
    fn poisson_tail_bound_dominates_exact_everywhere() {
        for mean in [1.0f64, 5.0, 10.0, 20.0, 48.0] {
            let top = (mean + 10.0 * mean.sqrt()).floor() as u64;
            for m in 0..=top {
                let bound = poisson_tail_bound(mean, m as f64);
                let exact = exact_poisson_upper_tail(mean, m);
                assert!(
                    bound >= exact - 1e-13,
                    "mean {mean}, M {m}: bound {bound} < exact {exact}"
                );
            }
        }
    }

    #[test]
    fn occupancy_bound_case_study_point() {
        let p = params(20.0, 2.4, 1.8, 27.0, 800.0, 45.0);
        let d = occupancy_bound(&p, 55.0);
        assert_relative_eq!(d, (-49.0f64 / (2.0 * (48.0 + 7.0 / 3.0))).exp(), epsilon = 1e-12);
        assert_relative_eq!(d, 0.6146, epsilon = 1e-4);
        assert_eq!(occupancy_bound(&p, 40.0), 1.0);
    }

    #[test]
    fn faster_service_shifts_occupancy_curve_left() {
        let slow = params(20.0, 2.0, 2.0, 20.0, 500.0, 45.0);
        let fast = params(20.0, 1.0, 1.0, 20.0, 500.0, 45.0);
        for m in 41..200 {
            let ds = occupancy_bound(&slow, m as f64);
            let df = occupancy_bound(&fast, m as f64);
            if df < 1.0 {
                assert!(df <= ds);
            }
        }
    }

    #[test]
    fn active_occupancy_examples() {
        let p = params(2.0, 1.5, 1.0, 10.0, 100.0, 10.0);
        assert_relative_eq!(
            active_occupancy_bound(&p, 5.0),
            (-1.5f64).exp(),
            epsilon = 1e-12
        );
        // Active bound never exceeds the occupancy bound pointwise.
        for m in 0..100 {
            assert!(active_occupancy_bound(&p, m as f64) <= occupancy_bound(&p, m as f64));
        }
    }

    #[test]
    fn power_bound_single_level_hand_check() {
        let p = params(2.0, 1.0, 1.0, 10.0, 100.0, 10.0);
        let gamma = power_bound(&p, 50.0);
        let expected = poisson_pmf(5, 2.0) + (-1.5f64).exp();
        assert_relative_eq!(gamma, expected, epsilon = 1e-12);
        assert_relative_eq!(gamma, 0.259219, epsilon = 1e-6);
        // Exact tail with deterministic per-user rate: P(eta_act >= 5).
        let exact = exact_poisson_upper_tail(2.0, 5);
        assert_relative_eq!(exact, 0.052653, epsilon = 1e-6);
        assert!(exact <= gamma);
    }

    #[test]
    fn power_bound_cases() {
        let p = params(2.0, 1.0, 1.0, 10.0, 100.0, 10.0);
        // At or below the mean power the bound is trivial.
        assert_eq!(power_bound(&p, 20.0), 1.0);
        assert_eq!(power_bound(&p, 5.0), 1.0);
        // ceil(62/31) = floor(62/30) = 2: a single summation term.
        let tight = params(2.0, 1.0, 1.0, 30.0, 902.0, 31.0);
        let g = power_bound(&tight, 62.0);
        assert!(g > 0.0 && g <= 1.0);
        // ceil(59/31) = 2 > floor(59/30) = 1: empty window, so only the
        // active-occupancy term survives.
        let empty = params(0.5, 1.0, 1.0, 30.0, 902.0, 31.0);
        let g2 = power_bound(&empty, 59.0);
        assert_relative_eq!(g2, poisson_tail_bound(0.5, 1.0), epsilon = 1e-15);
        assert!(g2 < 1.0);
    }

    #[test]
    fn bounds_stay_in_unit_interval() {
        let p = params(20.0, 2.4, 1.8, 27.0, 800.0, 45.0);
        for i in 0..400 {
            let m = i as f64;
            let d = occupancy_bound(&p, m);
            assert!((0.0..=1.0).contains(&d));
            let g = power_bound(&p, m * 10.0);
            assert!((0.0..=1.0).contains(&g));
        }
        // delta nonincreasing beyond the mean.
        let mut prev = 1.0;
        for i in 49..400 {
            let d = occupancy_bound(&p, i as f64);
            assert!(d <= prev + 1e-15);
            prev = d;
        }
    }

    #[test]
    fn poisson_pmf_sums_to_one() {
        for mean in [0.5f64, 2.0, 10.0, 48.0] {
            // Window chosen so the omitted tail is below 1e-12.
            let top = (mean + 14.0 * mean.sqrt() + 30.0) as u64;
            let total: f64 = (0..=top).map(|k| poisson_pmf(k, mean)).sum();
            assert!(
                (total - 1.0).abs() < 1e-10,
                "mean {mean}: PMF sums to {total}"
            );
        }
    }

    #[test]
    fn bound_curve_shapes() {
        let p = params(20.0, 2.4, 1.8, 27.0, 800.0, 45.0);
        let curve = bound_curve(&p, &[], BoundMetric::Occupancy).unwrap();
        assert!(curve.is_empty());

        let grid: Vec<f64> = (30..=120).step_by(5).map(|m| m as f64).collect();
        let curve = bound_curve(&p, &grid, BoundMetric::Occupancy).unwrap();
        let mean = p.mean_occupancy();
        let mut seen_sub_one = false;
        for (t, b) in curve.thresholds.iter().zip(&curve.bounds) {
            if *t <= mean {
                assert_eq!(*b, 1.0);
            }
            if *b < 1.0 {
                seen_sub_one = true;
            }
            assert!((0.0..=1.0).contains(b));
        }
        assert!(seen_sub_one);
        // Strictly decreasing once below one.
        let sub: Vec<f64> = curve.bounds.iter().copied().filter(|b| *b < 1.0).collect();
        for w in sub.windows(2) {
            assert!(w[1] < w[0]);
        }

        let rgrid: Vec<f64> = (600..=2400).step_by(100).map(|r| r as f64).collect();
        let power = bound_curve(&p, &rgrid, BoundMetric::Power).unwrap();
        assert!(power.bounds.iter().all(|b| (0.0..=1.0).contains(b)));

        assert!(bound_curve(&p, &[5.0, 1.0], BoundMetric::Power).is_err());
    }

    #[test]
    fn parameter_validation() {
        assert!(QueueParameters::new(0.0, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(QueueParameters::new(1.0, 1.0, 2.0, 1.0, 1.0, 1.0).is_err());
        assert!(QueueParameters::new(1.0, 1.0, 1.0, 2.0, 4.0, 1.0).is_err());
        assert!(QueueParameters::new(1.0, 1.0, 1.0, 2.0, 1.0, 3.0).is_err());
    }
}
