//! Defined-service-level (DSL) pricing: menu validation, user cost,
//! rational level selection, and the induced charging-rate distribution.
//!
//! A facility broadcasts `L` service levels, each a charging rate `R^l`
//! (kW) paired with an energy price `V^l` ($/kWh), plus a parking fee `F`
//! ($/hr) charged for time spent after the vehicle is full. A user with
//! demand `x`, impatience `alpha`, and desired dwell `xi` pays, at level
//! `l`,
//!
//! ```text
//! g_l = x V^l + alpha [x/R^l - xi]_+ + F [xi - x/R^l]_+
//! ```
//!
//! and picks the level minimizing `g_l`. Conditioned on the desired rate
//! `rho = x / xi`, the probability of each level reduces to the mass the
//! impatience distribution puts on an interval whose endpoints are
//! closed-form threshold expressions; integrating over the distribution
//! of `rho` yields the probability mass function of the chosen rate.

use crate::dist::{stream_rng, BoundedDistribution, UserPopulation};
use crate::quad::{integrate, integrate_raw};
use crate::{Error, Result};
use rayon::prelude::*;
use std::cell::Cell;

/// One entry of the facility menu.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceLevel {
    pub rate_kw: f64,
    pub price_per_kwh: f64,
}

/// An ordered service-level menu plus the parking fee.
#[derive(Debug, Clone, PartialEq)]
pub struct DslFacility {
    levels: Vec<ServiceLevel>,
    parking_fee_per_hr: f64,
}

impl DslFacility {
    /// Validates the menu ordering contract: at least one level, all
    /// rates and prices positive, and both strictly increasing together
    /// (a faster rate must cost more per kWh).
    pub fn new(levels: Vec<ServiceLevel>, parking_fee_per_hr: f64) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidMenu(
                "menu must offer at least one service level".into(),
            ));
        }
        for (i, lvl) in levels.iter().enumerate() {
            if !(lvl.rate_kw > 0.0) || !lvl.rate_kw.is_finite() {
                return Err(Error::InvalidMenu(format!(
                    "level {} rate must be positive and finite, got {}",
                    i + 1,
                    lvl.rate_kw
                )));
            }
            if !(lvl.price_per_kwh > 0.0) || !lvl.price_per_kwh.is_finite() {
                return Err(Error::InvalidMenu(format!(
                    "level {} price must be positive and finite, got {}",
                    i + 1,
                    lvl.price_per_kwh
                )));
            }
        }
        for w in levels.windows(2) {
            if w[1].rate_kw <= w[0].rate_kw {
                return Err(Error::InvalidMenu(format!(
                    "charging rates must be distinct and strictly increasing: \
                     {} kW does not exceed {} kW",
                    w[1].rate_kw, w[0].rate_kw
                )));
            }
            if w[1].price_per_kwh <= w[0].price_per_kwh {
                return Err(Error::InvalidMenu(format!(
                    "a higher charging rate must be priced strictly higher: \
                     {} $/kWh at {} kW does not exceed {} $/kWh at {} kW",
                    w[1].price_per_kwh, w[1].rate_kw, w[0].price_per_kwh, w[0].rate_kw
                )));
            }
        }
        if !(parking_fee_per_hr >= 0.0) || !parking_fee_per_hr.is_finite() {
            return Err(Error::InvalidMenu(format!(
                "parking fee must be nonnegative and finite, got {parking_fee_per_hr}"
            )));
        }
        Ok(Self {
            levels,
            parking_fee_per_hr,
        })
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[ServiceLevel] {
        &self.levels
    }

    pub fn rate(&self, level: usize) -> f64 {
        self.levels[level].rate_kw
    }

    pub fn price(&self, level: usize) -> f64 {
        self.levels[level].price_per_kwh
    }

    pub fn parking_fee_per_hr(&self) -> f64 {
        self.parking_fee_per_hr
    }

    /// Highest offered rate.
    pub fn max_rate_kw(&self) -> f64 {
        self.levels.last().unwrap().rate_kw
    }

    /// Same menu with every rate multiplied by `factor > 0` (prices and
    /// fee unchanged); used by pricing sweeps.
    pub fn with_scaled_rates(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::invalid(format!(
                "rate scale factor must be positive and finite, got {factor}"
            )));
        }
        let levels = self
            .levels
            .iter()
            .map(|l| ServiceLevel {
                rate_kw: l.rate_kw * factor,
                price_per_kwh: l.price_per_kwh,
            })
            .collect();
        Self::new(levels, self.parking_fee_per_hr)
    }
}

fn check_user_draw(x: f64, alpha: f64, xi: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::invalid(format!("demand must be positive, got {x}")));
    }
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!(
            "impatience must be nonnegative, got {alpha}"
        )));
    }
    if !(xi >= 0.0) || !xi.is_finite() {
        return Err(Error::invalid(format!(
            "desired dwell must be nonnegative, got {xi}"
        )));
    }
    Ok(())
}

#[inline]
fn cost_unchecked(facility: &DslFacility, level: usize, x: f64, alpha: f64, xi: f64) -> f64 {
    let lvl = &facility.levels[level];
    let t_charge = x / lvl.rate_kw;
    x * lvl.price_per_kwh
        + alpha * (t_charge - xi).max(0.0)
        + facility.parking_fee_per_hr * (xi - t_charge).max(0.0)
}

/// Total cost a user pays at `level` (0-based): energy, waiting beyond
/// the desired dwell, and parking after the vehicle is full.
pub fn dsl_cost(facility: &DslFacility, level: usize, x: f64, alpha: f64, xi: f64) -> Result<f64> {
    if level >= facility.level_count() {
        return Err(Error::invalid(format!(
            "level index {level} out of range for a {}-level menu",
            facility.level_count()
        )));
    }
    check_user_draw(x, alpha, xi)?;
    Ok(cost_unchecked(facility, level, x, alpha, xi))
}

/// Free-parking special case of the cost: `x V^l + alpha x / R^l`.
/// Identical to [`dsl_cost`] with `xi = 0` and a zero parking fee.
pub fn dsl_fp_cost(facility: &DslFacility, level: usize, x: f64, alpha: f64) -> Result<f64> {
    if level >= facility.level_count() {
        return Err(Error::invalid(format!(
            "level index {level} out of range for a {}-level menu",
            facility.level_count()
        )));
    }
    check_user_draw(x, alpha, 0.0)?;
    let lvl = &facility.levels[level];
    // Same floating-point expression as the metered cost with xi = 0 and
    // a zero fee, so the two agree bit for bit.
    Ok(x * lvl.price_per_kwh + alpha * (x / lvl.rate_kw))
}

/// The level (0-based) a rational user selects; ties resolve to the
/// lowest index, i.e. the cheapest level.
pub fn select_level(facility: &DslFacility, x: f64, alpha: f64, xi: f64) -> usize {
    let mut best = 0usize;
    let mut best_cost = f64::INFINITY;
    for level in 0..facility.level_count() {
        let c = cost_unchecked(facility, level, x, alpha, xi);
        if c < best_cost {
            best_cost = c;
            best = level;
        }
    }
    best
}

/// Impatience level at which levels `k` and `i` cost the same when both
/// charge past the desired dwell: `(V^i - V^k) / (1/R^k - 1/R^i)`.
/// Symmetric in its arguments and positive for any valid menu.
pub fn indifference_threshold(facility: &DslFacility, k: usize, i: usize) -> f64 {
    let dv = facility.price(i) - facility.price(k);
    let dr = 1.0 / facility.rate(k) - 1.0 / facility.rate(i);
    dv / dr
}

/// Impatience interval on which level `k` is the minimizer when the
/// desired rate exceeds the whole menu (and in the free-parking model,
/// where that always holds). May be empty (`lo >= hi`).
fn alpha_band_above_menu(
    facility: &DslFacility,
    k: usize,
    impatience: &BoundedDistribution,
) -> (f64, f64) {
    let mut hi = impatience.upper();
    for i in (k + 1)..facility.level_count() {
        hi = hi.min(indifference_threshold(facility, k, i));
    }
    let mut lo = impatience.lower();
    for i in 0..k {
        lo = lo.max(indifference_threshold(facility, k, i));
    }
    (lo, hi)
}

fn choice_prob_unchecked(
    facility: &DslFacility,
    k: usize,
    rho: f64,
    impatience: &BoundedDistribution,
) -> f64 {
    let rates: Vec<f64> = facility.levels.iter().map(|l| l.rate_kw).collect();
    let l = rates.len();

    if rho < rates[0] {
        // Slower than every level: the cheapest level wins outright.
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if rho >= rates[l - 1] {
        let (lo, hi) = alpha_band_above_menu(facility, k, impatience);
        return impatience.prob_open_interval(lo, hi);
    }

    // rho in [R^m, R^{m+1}) with m in 0..l-1.
    let m = rates.partition_point(|r| *r <= rho) - 1;
    let fee = facility.parking_fee_per_hr;
    let inv_rho = 1.0 / rho;

    if k <= m {
        // Level k charges past the dwell; compare against same-side
        // levels via the plain thresholds and against levels that finish
        // early (paying the parking fee) via the fee-adjusted ones.
        let mut hi = impatience.upper();
        for i in (k + 1)..=m {
            hi = hi.min(indifference_threshold(facility, k, i));
        }
        let denom = (1.0 / rates[k] - inv_rho).max(0.0);
        for i in (m + 1)..l {
            let num =
                fee * (inv_rho - 1.0 / rates[i]) + (facility.price(i) - facility.price(k));
            // num > 0 here, so a vanishing denominator means no constraint.
            hi = hi.min(num / denom);
        }
        let mut lo = impatience.lower();
        for i in 0..k {
            lo = lo.max(indifference_threshold(facility, k, i));
        }
        impatience.prob_open_interval(lo, hi)
    } else if k == m + 1 {
        // The first level fast enough to finish within the dwell; it
        // wins over slower levels only for sufficiently impatient users.
        let mut lo = impatience.lower();
        for i in 0..=m {
            let num =
                facility.price(k) - facility.price(i) + fee * (inv_rho - 1.0 / rates[k]);
            let denom = (1.0 / rates[i] - inv_rho).max(0.0);
            lo = lo.max(num / denom);
        }
        impatience.prob_open_interval(lo, impatience.upper())
    } else {
        0.0
    }
}

/// `P(level k is the cost minimizer | rho)` where `rho = x / xi` is the
/// user's desired charging rate (`+inf` when `xi = 0`).
pub fn choice_probability_given_rho(
    facility: &DslFacility,
    k: usize,
    rho: f64,
    impatience: &BoundedDistribution,
) -> Result<f64> {
    if k >= facility.level_count() {
        return Err(Error::invalid(format!(
            "level index {k} out of range for a {}-level menu",
            facility.level_count()
        )));
    }
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::invalid(format!(
            "desired rate must be positive or +inf, got {rho}"
        )));
    }
    Ok(choice_prob_unchecked(facility, k, rho, impatience))
}

/// Discrete distribution over the menu rates.
#[derive(Debug, Clone)]
pub struct RatePmf {
    rates: Vec<f64>,
    probs: Vec<f64>,
}

/// Mass-defect tolerance accepted when assembling a PMF from quadrature
/// or Monte-Carlo estimates.
pub const PMF_MASS_TOL: f64 = 1e-4;

impl RatePmf {
    pub fn new(rates: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if rates.is_empty() || rates.len() != probs.len() {
            return Err(Error::invalid(
                "rate PMF needs matching, nonempty rate and probability lists",
            ));
        }
        for p in &probs {
            if !(-1e-9..=1.0 + 1e-9).contains(p) {
                return Err(Error::invalid(format!(
                    "PMF probability out of [0, 1]: {p}"
                )));
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > PMF_MASS_TOL {
            return Err(Error::invalid(format!(
                "PMF mass {sum} deviates from 1 beyond {PMF_MASS_TOL:e}"
            )));
        }
        let probs = probs.into_iter().map(|p| p.clamp(0.0, 1.0)).collect();
        Ok(Self { rates, probs })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `E[r]`.
    pub fn mean_rate(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.probs)
            .map(|(r, p)| r * p)
            .sum()
    }

    /// `E[r^2]`.
    pub fn mean_rate_sq(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.probs)
            .map(|(r, p)| r * r * p)
            .sum()
    }

    /// `E[1/r]`.
    pub fn mean_inverse_rate(&self) -> f64 {
        self.rates
            .iter()
            .zip(&self.probs)
            .map(|(r, p)| p / r)
            .sum()
    }
}

/// Rate PMF in the free-parking model (`F = 0`, `xi = 0`): each level's
/// probability is the impatience mass on its threshold interval.
pub fn rate_pmf_free_parking(
    facility: &DslFacility,
    impatience: &BoundedDistribution,
) -> Result<RatePmf> {
    let l = facility.level_count();
    let mut probs = Vec::with_capacity(l);
    for k in 0..l {
        let (lo, hi) = alpha_band_above_menu(facility, k, impatience);
        probs.push(impatience.prob_open_interval(lo, hi));
    }
    let rates = facility.levels.iter().map(|lv| lv.rate_kw).collect();
    RatePmf::new(rates, probs)
}

/// Quadrature settings for [`rate_pmf`].
#[derive(Debug, Clone, Copy)]
pub struct IntegrationConfig {
    pub rel_tol: f64,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-8 }
    }
}

/// Rate PMF in the metered-parking model, by integrating the conditional
/// choice probabilities over the joint demand/dwell distribution.
///
/// The dwell atom at zero (desired rate `+inf`) is weighted analytically
/// onto the above-menu case; the continuous part is integrated with
/// mandatory split points wherever the desired rate crosses a menu rate.
pub fn rate_pmf(
    facility: &DslFacility,
    population: &UserPopulation,
    cfg: &IntegrationConfig,
) -> Result<RatePmf> {
    let x_dist = &population.demand_kwh;
    let xi_dist = &population.dwell_hr;
    let imp = &population.impatience_per_hr;
    let l = facility.level_count();
    let p0 = xi_dist.atom_at_zero();
    let (x_lo, x_hi) = (x_dist.lower(), x_dist.upper());
    let (xi_lo, xi_hi) = (xi_dist.lower(), xi_dist.upper());
    let inner_tol = cfg.rel_tol * 0.1;

    // Demand values at which a level boundary enters or leaves the dwell
    // support; the inner integral changes shape there.
    let mut x_breaks = Vec::new();
    for level in 0..l {
        let r = facility.rate(level);
        x_breaks.push(r * xi_hi);
        if xi_lo > 0.0 {
            x_breaks.push(r * xi_lo);
        }
    }

    let mut probs = Vec::with_capacity(l);
    for k in 0..l {
        let above = choice_prob_unchecked(facility, k, f64::INFINITY, imp);
        let inner_bad = Cell::new(false);
        let continuous = integrate(
            |x| {
                let bps: Vec<f64> = (0..l).map(|i| x / facility.rate(i)).collect();
                let q = integrate_raw(
                    &|t: f64| {
                        // t = 0 maps to rho = +inf, the above-menu case.
                        let rho = x / t;
                        choice_prob_unchecked(facility, k, rho, imp) * xi_dist.density_at(t)
                    },
                    xi_lo,
                    xi_hi,
                    &bps,
                    inner_tol,
                );
                if !q.converged {
                    inner_bad.set(true);
                }
                q.value * x_dist.density_at(x)
            },
            x_lo,
            x_hi,
            &x_breaks,
            cfg.rel_tol,
        )?;
        if inner_bad.get() {
            return Err(Error::QuadratureNonConvergence {
                value: p0 * above + continuous,
                error_estimate: f64::NAN,
                tolerance: inner_tol,
            });
        }
        probs.push(p0 * above + continuous);
    }
    let rates = facility.levels.iter().map(|lv| lv.rate_kw).collect();
    RatePmf::new(rates, probs)
}

/// How a moment set was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentMethod {
    Analytic,
    MonteCarlo,
}

/// Monte-Carlo budget for moment estimation. Draws are split across
/// `shards` independent generator streams and reduced in shard order, so
/// results do not depend on thread scheduling.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarloConfig {
    pub draws: usize,
    pub seed: u64,
    pub shards: usize,
    pub max_stderr: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            draws: 1_000_000,
            seed: 0x5eed,
            shards: 64,
            max_stderr: 0.01,
        }
    }
}

/// First and second moments of the chosen rate together with the
/// expected charging and dwell times.
#[derive(Debug, Clone, Copy)]
pub struct DslMoments {
    /// `E[r]`, kW.
    pub e_r_kw: f64,
    /// `E[r^2]`, kW^2.
    pub e_r2_kw2: f64,
    /// `E[x/r]`, hr: expected time actively charging.
    pub e_charge_time_hr: f64,
    /// `E[max(xi, x/r)]`, hr: expected time occupying a spot.
    pub e_dwell_hr: f64,
    pub se_charge_time_hr: f64,
    pub se_dwell_hr: f64,
    pub method: MomentMethod,
}

impl DslMoments {
    /// Expected active-charging time; identical to the charge time.
    pub fn e_active_hr(&self) -> f64 {
        self.e_charge_time_hr
    }
}

/// Free-parking moments: the chosen rate is independent of the demand,
/// so `E[x/r] = E[x] E[1/r]` and users leave exactly when full.
pub fn dsl_moments_free_parking(
    demand: &BoundedDistribution,
    pmf: &RatePmf,
) -> Result<DslMoments> {
    let e_x = demand.mean()?;
    let e_charge = e_x * pmf.mean_inverse_rate();
    Ok(DslMoments {
        e_r_kw: pmf.mean_rate(),
        e_r2_kw2: pmf.mean_rate_sq(),
        e_charge_time_hr: e_charge,
        e_dwell_hr: e_charge,
        se_charge_time_hr: 0.0,
        se_dwell_hr: 0.0,
        method: MomentMethod::Analytic,
    })
}

#[derive(Default, Clone, Copy)]
struct MomentAcc {
    n: u64,
    sum_charge: f64,
    sumsq_charge: f64,
    sum_dwell: f64,
    sumsq_dwell: f64,
}

impl MomentAcc {
    fn merge(mut self, o: MomentAcc) -> MomentAcc {
        self.n += o.n;
        self.sum_charge += o.sum_charge;
        self.sumsq_charge += o.sumsq_charge;
        self.sum_dwell += o.sum_dwell;
        self.sumsq_dwell += o.sumsq_dwell;
        self
    }

    fn mean_se(sum: f64, sumsq: f64, n: f64) -> (f64, f64) {
        let mean = sum / n;
        let var = ((sumsq - n * mean * mean) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Metered-parking moments by Monte-Carlo over joint user draws. The
/// rate moments still come from the analytic PMF; the time moments are
/// sampled because the dwell/charge maximum couples all three user
/// parameters through the selected level.
pub fn dsl_moments_metered(
    facility: &DslFacility,
    population: &UserPopulation,
    pmf: &RatePmf,
    cfg: &MonteCarloConfig,
) -> Result<DslMoments> {
    if cfg.draws < 2 || cfg.shards == 0 {
        return Err(Error::invalid(
            "Monte-Carlo moments need at least 2 draws and 1 shard",
        ));
    }
    let shards = cfg.shards.min(cfg.draws);
    let base = cfg.draws / shards;
    let extra = cfg.draws % shards;
    let accs: Vec<MomentAcc> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(cfg.seed, s as u64);
            let mut acc = MomentAcc::default();
            let n = base + usize::from(s < extra);
            for _ in 0..n {
                let x = population.demand_kwh.sample(&mut rng);
                let alpha = population.impatience_per_hr.sample(&mut rng);
                let xi = population.dwell_hr.sample(&mut rng);
                let level = select_level(facility, x, alpha, xi);
                let t_charge = x / facility.rate(level);
                let dwell = t_charge.max(xi);
                acc.n += 1;
                acc.sum_charge += t_charge;
                acc.sumsq_charge += t_charge * t_charge;
                acc.sum_dwell += dwell;
                acc.sumsq_dwell += dwell * dwell;
            }
            acc
        })
        .collect();
    let total = accs.into_iter().fold(MomentAcc::default(), MomentAcc::merge);
    let n = total.n as f64;
    let (e_charge, se_charge) = MomentAcc::mean_se(total.sum_charge, total.sumsq_charge, n);
    let (e_dwell, se_dwell) = MomentAcc::mean_se(total.sum_dwell, total.sumsq_dwell, n);
    let worst_se = se_charge.max(se_dwell);
    if worst_se > cfg.max_stderr {
        return Err(Error::SampleBudget {
            achieved: worst_se,
            cap: cfg.max_stderr,
        });
    }
    Ok(DslMoments {
        e_r_kw: pmf.mean_rate(),
        e_r2_kw2: pmf.mean_rate_sq(),
        e_charge_time_hr: e_charge,
        e_dwell_hr: e_dwell,
        se_charge_time_hr: se_charge,
        se_dwell_hr: se_dwell,
        method: MomentMethod::MonteCarlo,
    })
}
