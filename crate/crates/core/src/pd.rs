//! Prescribed-deadline (PD) pricing: users choose a departure deadline
//! `u >= xi` against a convex price schedule and the facility charges at
//! the constant rate `x / u`, so the vehicle is full exactly at
//! departure.
//!
//! The quadratic schedule `P(x, u) = x (D (u - omega)^2 + B)` admits the
//! closed-form minimizer `u* = max(xi, omega - alpha / (2 D x))`; any
//! other convex schedule is minimized numerically by golden-section
//! search on a bracketed interval.

use crate::dist::{stream_rng, UserPopulation};
use crate::{Error, Result};
use rayon::prelude::*;

/// Absolute tolerance (in hours) of the numeric deadline minimizer.
pub const DEADLINE_TOL: f64 = 1e-8;

/// A deadline price schedule, convex in the deadline for every demand.
///
/// Implementations must guarantee convexity of `price(x, .)`; the
/// minimizer machinery relies on it and does not verify it.
pub trait DeadlinePricing: Send + Sync {
    /// Price paid for receiving `x` kWh by deadline `u` hours.
    fn price(&self, x: f64, u: f64) -> f64;

    /// Per-user cap the schedule is designed to enforce on `x / u`.
    fn rate_cap_kw(&self) -> f64;

    /// Exact minimizer of the total cost over `u >= xi`, when available.
    fn deadline_closed_form(&self, _x: f64, _alpha: f64, _xi: f64) -> Option<f64> {
        None
    }

    /// Initial upper bracket for the numeric minimizer; doubled until the
    /// cost starts increasing, so it only needs to be a sane start.
    fn bracket_hint(&self, _x: f64, _alpha: f64, xi: f64) -> f64 {
        xi + 1.0
    }
}

/// Quadratic deadline schedule with surge price `D` ($/kWh-hr^2), base
/// price `B` ($/kWh), target dwell `omega` (hr), and per-user rate cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticPricing {
    pub surge_d: f64,
    pub base_b: f64,
    pub omega_hr: f64,
    pub rate_cap_kw: f64,
}

impl QuadraticPricing {
    pub fn new(surge_d: f64, base_b: f64, omega_hr: f64, rate_cap_kw: f64) -> Result<Self> {
        if !(surge_d > 0.0) || !surge_d.is_finite() {
            return Err(Error::invalid(format!(
                "surge price must be positive, got {surge_d}"
            )));
        }
        if !(base_b >= 0.0) || !base_b.is_finite() {
            return Err(Error::invalid(format!(
                "base price must be nonnegative, got {base_b}"
            )));
        }
        if !(omega_hr > 0.0) || !omega_hr.is_finite() {
            return Err(Error::invalid(format!(
                "target dwell must be positive, got {omega_hr}"
            )));
        }
        if !(rate_cap_kw > 0.0) || !rate_cap_kw.is_finite() {
            return Err(Error::invalid(format!(
                "rate cap must be positive, got {rate_cap_kw}"
            )));
        }
        Ok(Self {
            surge_d,
            base_b,
            omega_hr,
            rate_cap_kw,
        })
    }
}

impl DeadlinePricing for QuadraticPricing {
    fn price(&self, x: f64, u: f64) -> f64 {
        let d = u - self.omega_hr;
        x * (self.surge_d * d * d + self.base_b)
    }

    fn rate_cap_kw(&self) -> f64 {
        self.rate_cap_kw
    }

    fn deadline_closed_form(&self, x: f64, alpha: f64, xi: f64) -> Option<f64> {
        Some(xi.max(self.omega_hr - alpha / (2.0 * self.surge_d * x)))
    }

    fn bracket_hint(&self, x: f64, alpha: f64, xi: f64) -> f64 {
        xi + self.omega_hr + alpha / (2.0 * self.surge_d * x)
    }
}

/// Quadratic schedule price with argument validation.
pub fn quadratic_price(pricing: &QuadraticPricing, x: f64, u: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("demand must be positive, got {x}")));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::invalid(format!(
            "deadline must be positive, got {u}"
        )));
    }
    Ok(pricing.price(x, u))
}

/// Total cost of choosing deadline `u`: the price plus the waiting cost
/// `alpha (u - xi)`. Defined only on `u >= xi`.
pub fn pd_total_cost<P: DeadlinePricing + ?Sized>(
    pricing: &P,
    x: f64,
    u: f64,
    alpha: f64,
    xi: f64,
) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("demand must be positive, got {x}")));
    }
    if !(alpha >= 0.0) || !(xi >= 0.0) {
        return Err(Error::invalid(
            "impatience and desired dwell must be nonnegative",
        ));
    }
    if u < xi {
        return Err(Error::invalid(format!(
            "deadline {u} must not precede the desired dwell {xi}"
        )));
    }
    Ok(pricing.price(x, u) + alpha * (u - xi))
}

/// Golden-section minimizer of a convex scalar function on `[lo, hi]`,
/// run until the bracket is narrower than `xtol`.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > xtol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Numeric deadline minimizer for any convex schedule: expand the upper
/// bracket by doubling until the cost increases, then golden-section to
/// [`DEADLINE_TOL`]. Kept public as the independent cross-check for the
/// closed-form path.
pub fn optimal_deadline_numeric<P: DeadlinePricing + ?Sized>(
    pricing: &P,
    x: f64,
    alpha: f64,
    xi: f64,
) -> Result<f64> {
    if !(x > 0.0) || !(alpha >= 0.0) || !(xi >= 0.0) {
        return Err(Error::invalid("invalid user draw for deadline choice"));
    }
    let cost = |u: f64| pricing.price(x, u) + alpha * (u - xi);
    let mut width = (pricing.bracket_hint(x, alpha, xi) - xi).max(1e-3);
    for _ in 0..64 {
        if cost(xi + 2.0 * width) >= cost(xi + width) {
            break;
        }
        width *= 2.0;
    }
    Ok(golden_section(cost, xi, xi + 2.0 * width, DEADLINE_TOL).max(xi))
}

/// The deadline a rational user picks: the closed form when the schedule
/// has one, otherwise the numeric minimizer. Always at least `xi`.
pub fn optimal_deadline<P: DeadlinePricing + ?Sized>(
    pricing: &P,
    x: f64,
    alpha: f64,
    xi: f64,
) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("demand must be positive, got {x}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() || !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::invalid("invalid user draw for deadline choice"));
    }
    match pricing.deadline_closed_form(x, alpha, xi) {
        Some(u) => Ok(u),
        None => optimal_deadline_numeric(pricing, x, alpha, xi),
    }
}

/// Smallest surge price enforcing the per-user rate cap for impatience
/// level `alpha`, given the demand support. Requires the target dwell to
/// be feasible: `omega > x_max / rate_cap`.
///
/// The inner maximum over demand is attained at a support endpoint
/// because the denominator `2 omega x R - 2 x^2` is concave in `x`, so
/// both endpoints are evaluated and the larger ratio returned. The
/// threshold is linear in `alpha`; passing the population's upper
/// impatience bound yields a cap valid for every user.
pub fn min_surge_price(
    omega_hr: f64,
    rate_cap_kw: f64,
    x_min: f64,
    x_max: f64,
    alpha: f64,
) -> Result<f64> {
    if !(x_min > 0.0) || !(x_max > x_min) || !x_max.is_finite() {
        return Err(Error::invalid(format!(
            "demand support must satisfy 0 < x_min < x_max, got [{x_min}, {x_max}]"
        )));
    }
    if !(rate_cap_kw > 0.0) || !(alpha >= 0.0) {
        return Err(Error::invalid(
            "rate cap must be positive and impatience nonnegative",
        ));
    }
    let min_omega = x_max / rate_cap_kw;
    if !(omega_hr > min_omega) {
        return Err(Error::InfeasibleTargetDwell {
            omega: omega_hr,
            min_omega,
        });
    }
    let ratio = |x: f64| alpha * rate_cap_kw / (2.0 * omega_hr * x * rate_cap_kw - 2.0 * x * x);
    Ok(ratio(x_min).max(ratio(x_max)).max(0.0))
}

/// Result of sampling the realized charging rates against the cap.
#[derive(Debug, Clone, Copy)]
pub struct RateCapReport {
    pub rate_cap_kw: f64,
    pub max_rate_kw: f64,
    pub violations: usize,
    pub samples: usize,
    pub pass: bool,
}

/// Sample `n` users, compute each realized rate `x / u*`, and report the
/// maximum observed rate against the cap. A failing report is a valid
/// outcome, not an error.
pub fn validate_rate_cap<P: DeadlinePricing + ?Sized>(
    pricing: &P,
    population: &UserPopulation,
    seed: u64,
    n: usize,
) -> Result<RateCapReport> {
    if n == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    let mut rng = stream_rng(seed, 0);
    let cap = pricing.rate_cap_kw();
    let mut max_rate = 0.0f64;
    let mut violations = 0usize;
    for _ in 0..n {
        let x = population.demand_kwh.sample(&mut rng);
        let alpha = population.impatience_per_hr.sample(&mut rng);
        let xi = population.dwell_hr.sample(&mut rng);
        let u = optimal_deadline(pricing, x, alpha, xi)?;
        let rate = if u > 0.0 { x / u } else { f64::INFINITY };
        max_rate = max_rate.max(rate);
        if rate > cap {
            violations += 1;
        }
    }
    Ok(RateCapReport {
        rate_cap_kw: cap,
        max_rate_kw: max_rate,
        violations,
        samples: n,
        pass: violations == 0,
    })
}

/// Deadline and rate moments for the PD model.
#[derive(Debug, Clone, Copy)]
pub struct PdMoments {
    /// `E[u]`, hr. Under this model the deadline is both the dwell and
    /// the active-charging time of a user.
    pub e_u_hr: f64,
    /// `E[r] = E[x/u]`, kW.
    pub e_r_kw: f64,
    /// `E[r^2]`, kW^2.
    pub e_r2_kw2: f64,
    pub se_u_hr: f64,
    pub se_r_kw: f64,
    pub se_r2_kw2: f64,
    /// Closed-form `E[u] = omega - E[alpha] E[1/x] / (2D)`, available
    /// when the desired dwell can never bind the deadline choice.
    pub analytic_e_u_hr: Option<f64>,
    pub draws: usize,
}

#[derive(Default, Clone, Copy)]
struct PdAcc {
    n: u64,
    sum_u: f64,
    sumsq_u: f64,
    sum_r: f64,
    sumsq_r: f64,
    sum_r2: f64,
    sumsq_r2: f64,
}

impl PdAcc {
    fn merge(mut self, o: PdAcc) -> PdAcc {
        self.n += o.n;
        self.sum_u += o.sum_u;
        self.sumsq_u += o.sumsq_u;
        self.sum_r += o.sum_r;
        self.sumsq_r += o.sumsq_r;
        self.sum_r2 += o.sum_r2;
        self.sumsq_r2 += o.sumsq_r2;
        self
    }
}

fn mean_se(sum: f64, sumsq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
    (mean, (var / n).sqrt())
}

/// Monte-Carlo deadline/rate moments for the quadratic schedule, sharded
/// across independent generator streams and reduced in shard order.
///
/// When the dwell never binds (`xi_max <= omega - alpha_max / (2 D
/// x_min)`) the deadline separates and the analytic mean
/// `omega - E[alpha] E[1/x] / (2D)` is attached as a cross-check.
pub fn pd_moments(
    pricing: &QuadraticPricing,
    population: &UserPopulation,
    cfg: &crate::dsl::MonteCarloConfig,
) -> Result<PdMoments> {
    if cfg.draws < 2 || cfg.shards == 0 {
        return Err(Error::invalid(
            "Monte-Carlo moments need at least 2 draws and 1 shard",
        ));
    }
    let shards = cfg.shards.min(cfg.draws);
    let base = cfg.draws / shards;
    let extra = cfg.draws % shards;
    let accs: Vec<Result<PdAcc>> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, s as u64);
            let mut acc = PdAcc::default();
            let n = base + usize::from(s < extra);
            for _ in 0..n {
                let x = population.demand_kwh.sample(&mut rng);
                let alpha = population.impatience_per_hr.sample(&mut rng);
                let xi = population.dwell_hr.sample(&mut rng);
                let u = optimal_deadline(pricing, x, alpha, xi)?;
                if !(u > 0.0) {
                    return Err(Error::Numerical(format!(
                        "optimal deadline is {u} for draw (x={x}, alpha={alpha}, xi={xi}); \
                         the schedule cannot enforce a finite rate"
                    )));
                }
                let r = x / u;
                acc.n += 1;
                acc.sum_u += u;
                acc.sumsq_u += u * u;
                acc.sum_r += r;
                acc.sumsq_r += r * r;
                acc.sum_r2 += r * r;
                acc.sumsq_r2 += r * r * r * r;
            }
            Ok(acc)
        })
        .collect();
    let mut total = PdAcc::default();
    for acc in accs {
        total = total.merge(acc?);
    }
    let n = total.n as f64;
    let (e_u, se_u) = mean_se(total.sum_u, total.sumsq_u, n);
    let (e_r, se_r) = mean_se(total.sum_r, total.sumsq_r, n);
    let (e_r2, se_r2) = mean_se(total.sum_r2, total.sumsq_r2, n);
    let worst = se_u.max(se_r);
    if worst > cfg.max_stderr {
        return Err(Error::SampleBudget {
            achieved: worst,
            cap: cfg.max_stderr,
        });
    }

    let alpha_max = population.impatience_per_hr.upper();
    let x_min = population.demand_kwh.lower();
    let xi_max = population.dwell_hr.upper();
    let never_binds = xi_max <= pricing.omega_hr - alpha_max / (2.0 * pricing.surge_d * x_min);
    let analytic = if never_binds {
        let e_alpha = population.impatience_per_hr.mean()?;
        let e_inv_x = population.demand_kwh.expect(|x| 1.0 / x)?;
        Some(pricing.omega_hr - e_alpha * e_inv_x / (2.0 * pricing.surge_d))
    } else {
        None
    };

    Ok(PdMoments {
        e_u_hr: e_u,
        e_r_kw: e_r,
        e_r2_kw2: e_r2,
        se_u_hr: se_u,
        se_r_kw: se_r,
        se_r2_kw2: se_r2,
        analytic_e_u_hr: analytic,
        draws: total.n as usize,
    })
}
