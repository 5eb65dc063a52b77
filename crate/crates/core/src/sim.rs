//! Infinite-server Monte-Carlo validation.
//!
//! Users never interact (an arriving vehicle always finds a spot), so a
//! replication is just a list of arrival/departure intervals: arrivals
//! from a Poisson process, per-user parameters drawn i.i.d., and the
//! service interval determined by the pricing model. Occupancy,
//! active-charging count, and total power are read off by interval
//! membership at the requested observation instants.

use crate::bounds::BoundMetric;
use crate::dist::{stream_rng, UserPopulation};
use crate::dsl::{select_level, DslFacility};
use crate::pd::{optimal_deadline, QuadraticPricing};
use crate::{Error, Result};
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Which pricing model drives rate/departure assignment.
#[derive(Debug, Clone)]
pub enum PricingModel {
    /// DSL with its parking fee; users may linger after charging.
    DslMetered(DslFacility),
    /// DSL special case with zero desired dwell: users leave when full.
    DslFreeParking(DslFacility),
    /// Prescribed-deadline pricing; presence and charging coincide.
    Pd(QuadraticPricing),
}

impl PricingModel {
    pub fn tag(&self) -> &'static str {
        match self {
            PricingModel::DslMetered(_) => "dsl",
            PricingModel::DslFreeParking(_) => "dsl_fp",
            PricingModel::Pd(_) => "pd",
        }
    }

    /// Longest service time any user can realize, used to size warmups:
    /// past this horizon the occupancy process is exactly stationary.
    pub fn max_service_time_hr(&self, population: &UserPopulation) -> f64 {
        let slowest_charge = population.demand_kwh.upper()
            / match self {
                PricingModel::DslMetered(f) | PricingModel::DslFreeParking(f) => f.rate(0),
                PricingModel::Pd(p) => return p.omega_hr + population.dwell_hr.upper(),
            };
        match self {
            PricingModel::DslMetered(_) => slowest_charge.max(population.dwell_hr.upper()),
            _ => slowest_charge,
        }
    }

    /// Warmup long enough for every start-up transient to clear.
    pub fn default_warmup_hr(&self, population: &UserPopulation) -> f64 {
        5.0 * self.max_service_time_hr(population)
    }
}

/// One simulated user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserRealization {
    pub arrival_hr: f64,
    pub demand_kwh: f64,
    pub impatience_per_hr: f64,
    pub dwell_hr: f64,
    pub rate_kw: f64,
    pub departure_hr: f64,
    pub active_until_hr: f64,
}

/// Counts and power draw sampled along one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub model: String,
    pub master_seed: u64,
    pub replication: u64,
    pub times_hr: Vec<f64>,
    pub eta: Vec<u32>,
    pub eta_act: Vec<u32>,
    pub q_kw: Vec<f64>,
    pub users: Vec<UserRealization>,
}

impl SimulationTrace {
    /// Recompute the total power at `t` from the user list; equals the
    /// sampled `q_kw` at every observation instant.
    pub fn power_at(&self, t: f64) -> f64 {
        self.users
            .iter()
            .filter(|u| u.arrival_hr <= t && t <= u.active_until_hr)
            .map(|u| u.rate_kw)
            .sum()
    }
}

/// Run one replication. Deterministic given `(master_seed, replication)`:
/// arrivals use exponential gaps and each user draws demand, impatience,
/// and (except in the free-parking model) dwell, in that order, from the
/// replication's generator stream.
pub fn simulate(
    model: &PricingModel,
    population: &UserPopulation,
    horizon_hr: f64,
    warmup_hr: f64,
    observation_times: &[f64],
    master_seed: u64,
    replication: u64,
) -> Result<SimulationTrace> {
    if !(horizon_hr > 0.0) || !horizon_hr.is_finite() || !(warmup_hr >= 0.0) {
        return Err(Error::invalid(
            "horizon must be positive and warmup nonnegative",
        ));
    }
    if warmup_hr >= horizon_hr {
        return Err(Error::invalid(format!(
            "warmup {warmup_hr} hr must end before the horizon {horizon_hr} hr"
        )));
    }
    for t in observation_times {
        if !(*t > warmup_hr && *t <= horizon_hr) {
            return Err(Error::invalid(format!(
                "observation time {t} hr outside (warmup, horizon] = \
                 ({warmup_hr}, {horizon_hr}]"
            )));
        }
    }

    let mut rng = stream_rng(master_seed, replication);
    let lambda = population.arrival_rate_per_hr;
    let mut users = Vec::new();
    let mut t = 0.0f64;
    loop {
        let u: f64 = rng.random();
        t += -(1.0 - u).ln() / lambda;
        if t > horizon_hr {
            break;
        }
        let x = population.demand_kwh.sample(&mut rng);
        let alpha = population.impatience_per_hr.sample(&mut rng);
        let (rate, departure, active_until, xi) = match model {
            PricingModel::DslMetered(f) => {
                let xi = population.dwell_hr.sample(&mut rng);
                let level = select_level(f, x, alpha, xi);
                let rate = f.rate(level);
                let t_charge = x / rate;
                (rate, t + t_charge.max(xi), t + t_charge, xi)
            }
            PricingModel::DslFreeParking(f) => {
                let level = select_level(f, x, alpha, 0.0);
                let rate = f.rate(level);
                let t_charge = x / rate;
                (rate, t + t_charge, t + t_charge, 0.0)
            }
            PricingModel::Pd(p) => {
                let xi = population.dwell_hr.sample(&mut rng);
                let u_star = optimal_deadline(p, x, alpha, xi)?;
                if !(u_star > 0.0) {
                    return Err(Error::Numerical(format!(
                        "deadline {u_star} hr for draw (x={x}, alpha={alpha}, xi={xi}) \
                         implies an unbounded charging rate"
                    )));
                }
                (x / u_star, t + u_star, t + u_star, xi)
            }
        };
        users.push(UserRealization {
            arrival_hr: t,
            demand_kwh: x,
            impatience_per_hr: alpha,
            dwell_hr: xi,
            rate_kw: rate,
            departure_hr: departure,
            active_until_hr: active_until,
        });
    }

    let mut eta = Vec::with_capacity(observation_times.len());
    let mut eta_act = Vec::with_capacity(observation_times.len());
    let mut q_kw = Vec::with_capacity(observation_times.len());
    for &obs in observation_times {
        let mut present = 0u32;
        let mut active = 0u32;
        let mut power = 0.0f64;
        for u in &users {
            if u.arrival_hr <= obs && obs <= u.departure_hr {
                present += 1;
            }
            if u.arrival_hr <= obs && obs <= u.active_until_hr {
                active += 1;
                power += u.rate_kw;
            }
        }
        eta.push(present);
        eta_act.push(active);
        q_kw.push(power);
    }

    Ok(SimulationTrace {
        model: model.tag().to_string(),
        master_seed,
        replication,
        times_hr: observation_times.to_vec(),
        eta,
        eta_act,
        q_kw,
        users,
    })
}

/// Ensemble layout: how many replications, where the exceedance snapshot
/// is taken, and which diagnostic instants each trace records.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub replications: usize,
    pub master_seed: u64,
    pub horizon_hr: f64,
    pub warmup_hr: f64,
    /// Exceedance statistics use this single post-warmup instant, so the
    /// samples are independent across replications.
    pub t_star_hr: f64,
    /// Extra sampling instants kept for diagnostics and percentiles.
    pub diagnostic_times: Vec<f64>,
    /// Percentile levels (in percent) summarized across replications.
    pub percentiles: Vec<f64>,
}

impl EnsembleConfig {
    /// 1000 replications observed one hour past a model-sized warmup,
    /// with a small diagnostic grid.
    pub fn default_for(model: &PricingModel, population: &UserPopulation, seed: u64) -> Self {
        let warmup = model.default_warmup_hr(population);
        let horizon = warmup + 5.0;
        let diagnostic_times = (1..=8).map(|i| warmup + 0.5 * i as f64).collect();
        Self {
            replications: 1000,
            master_seed: seed,
            horizon_hr: horizon,
            warmup_hr: warmup,
            t_star_hr: warmup + 1.0,
            diagnostic_times,
            percentiles: (1..20).map(|i| 5.0 * i as f64).collect(),
        }
    }
}

/// Snapshot and percentile statistics across an ensemble.
#[derive(Debug, Clone)]
pub struct EnsembleStats {
    pub replications: usize,
    pub t_star_hr: f64,
    /// Present users at `t_star`, one entry per replication.
    pub eta: Vec<u32>,
    /// Actively charging users at `t_star`.
    pub eta_act: Vec<u32>,
    /// Total power draw at `t_star`, kW.
    pub q_kw: Vec<f64>,
    pub percentiles: Vec<f64>,
    pub eta_percentile_mean: Vec<f64>,
    /// Two standard deviations across replications.
    pub eta_percentile_half_width: Vec<f64>,
    pub q_percentile_mean: Vec<f64>,
    pub q_percentile_half_width: Vec<f64>,
}

/// One point of an empirical exceedance curve: the fraction of
/// replications strictly below the threshold, with its binomial
/// standard error.
#[derive(Debug, Clone, Copy)]
pub struct ExceedancePoint {
    pub threshold: f64,
    pub prob_below: f64,
    pub stderr: f64,
}

fn percentile_nearest_rank(sorted: &[f64], pct: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len() as f64;
    let rank = (pct / 100.0 * n).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

/// Aggregate already-simulated traces: snapshot columns come from the
/// observation at `t_star`, percentile summaries from each trace's full
/// time series.
pub fn assemble_stats(
    traces: &[SimulationTrace],
    t_star_hr: f64,
    percentiles: &[f64],
) -> Result<EnsembleStats> {
    if traces.len() < 2 {
        return Err(Error::invalid(
            "ensemble statistics need at least 2 replications",
        ));
    }
    let star_idx = traces[0]
        .times_hr
        .iter()
        .position(|t| *t == t_star_hr)
        .ok_or_else(|| Error::invalid("t_star missing from trace observation times"))?;

    let mut eta = Vec::with_capacity(traces.len());
    let mut eta_act = Vec::with_capacity(traces.len());
    let mut q_kw = Vec::with_capacity(traces.len());
    let mut eta_pcts: Vec<Vec<f64>> = vec![Vec::with_capacity(traces.len()); percentiles.len()];
    let mut q_pcts: Vec<Vec<f64>> = vec![Vec::with_capacity(traces.len()); percentiles.len()];
    for tr in traces {
        eta.push(tr.eta[star_idx]);
        eta_act.push(tr.eta_act[star_idx]);
        q_kw.push(tr.q_kw[star_idx]);
        let mut eta_sorted: Vec<f64> = tr.eta.iter().map(|v| *v as f64).collect();
        eta_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut q_sorted = tr.q_kw.clone();
        q_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (j, pct) in percentiles.iter().enumerate() {
            eta_pcts[j].push(percentile_nearest_rank(&eta_sorted, *pct));
            q_pcts[j].push(percentile_nearest_rank(&q_sorted, *pct));
        }
    }

    let summarize = |columns: &[Vec<f64>]| {
        let mut means = Vec::with_capacity(columns.len());
        let mut half_widths = Vec::with_capacity(columns.len());
        for col in columns {
            let n = col.len() as f64;
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            means.push(mean);
            half_widths.push(2.0 * var.sqrt());
        }
        (means, half_widths)
    };
    let (eta_percentile_mean, eta_percentile_half_width) = summarize(&eta_pcts);
    let (q_percentile_mean, q_percentile_half_width) = summarize(&q_pcts);

    Ok(EnsembleStats {
        replications: traces.len(),
        t_star_hr,
        eta,
        eta_act,
        q_kw,
        percentiles: percentiles.to_vec(),
        eta_percentile_mean,
        eta_percentile_half_width,
        q_percentile_mean,
        q_percentile_half_width,
    })
}

/// Run `replications` independent traces (stream `i` of the master seed
/// drives replication `i`) and aggregate them. Replications run in
/// parallel; the reduction is in replication order, so the result is
/// identical however the work is scheduled.
pub fn run_ensemble(
    model: &PricingModel,
    population: &UserPopulation,
    cfg: &EnsembleConfig,
) -> Result<EnsembleStats> {
    if cfg.replications < 2 {
        return Err(Error::invalid(
            "an ensemble needs at least 2 replications for error bars",
        ));
    }
    let mut obs = cfg.diagnostic_times.clone();
    obs.push(cfg.t_star_hr);
    obs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    obs.dedup();

    let traces: Vec<SimulationTrace> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            simulate(
                model,
                population,
                cfg.horizon_hr,
                cfg.warmup_hr,
                &obs,
                cfg.master_seed,
                rep as u64,
            )
        })
        .collect::<Result<_>>()?;
    assemble_stats(&traces, cfg.t_star_hr, &cfg.percentiles)
}

/// Empirical `P(count < threshold)` (or `P(Q < threshold)`) per
/// threshold, with binomial standard errors.
pub fn empirical_exceedance(
    stats: &EnsembleStats,
    thresholds: &[f64],
    metric: BoundMetric,
) -> Vec<ExceedancePoint> {
    let n = stats.replications as f64;
    thresholds
        .iter()
        .map(|&thr| {
            let below = match metric {
                BoundMetric::Occupancy => {
                    stats.eta.iter().filter(|v| (**v as f64) < thr).count()
                }
                BoundMetric::ActiveOccupancy => {
                    stats.eta_act.iter().filter(|v| (**v as f64) < thr).count()
                }
                BoundMetric::Power => stats.q_kw.iter().filter(|v| **v < thr).count(),
            };
            let p = below as f64 / n;
            ExceedancePoint {
                threshold: thr,
                prob_below: p,
                stderr: (p * (1.0 - p) / n).sqrt(),
            }
        })
        .collect()
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy)]
pub struct GofReport {
    pub statistic: f64,
    pub dof: usize,
    pub critical: f64,
    pub significance: f64,
    pub pass: bool,
}

/// Chi-square goodness of fit of integer samples against a Poisson PMF
/// with known mean. Adjacent cells are merged until each expected count
/// reaches 5, with the open upper tail folded into the last cell.
pub fn chi_square_poisson_gof(samples: &[u32], mean: f64, significance: f64) -> Result<GofReport> {
    if samples.len() < 20 {
        return Err(Error::invalid("goodness-of-fit needs at least 20 samples"));
    }
    if !(mean > 0.0) || !(0.0 < significance && significance < 1.0) {
        return Err(Error::invalid(
            "mean must be positive and significance in (0, 1)",
        ));
    }
    let n = samples.len() as f64;
    let max_obs = *samples.iter().max().unwrap() as usize;
    let top = max_obs.max((mean + 10.0 * mean.sqrt()) as usize) + 1;

    let mut observed = vec![0usize; top + 1];
    for s in samples {
        observed[(*s as usize).min(top)] += 1;
    }

    // Expected cell masses, with the open tail in the final slot.
    let mut expected = Vec::with_capacity(top + 1);
    let mut cum = 0.0;
    for k in 0..top {
        let p = crate::bounds::poisson_pmf(k as u64, mean);
        expected.push(n * p);
        cum += p;
    }
    expected.push(n * (1.0 - cum).max(0.0));

    // Merge adjacent cells until each expected count is at least 5.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc_exp = 0.0;
    let mut acc_obs = 0.0;
    for k in 0..=top {
        acc_exp += expected[k];
        acc_obs += observed[k] as f64;
        if acc_exp >= 5.0 {
            bins.push((acc_obs, acc_exp));
            acc_exp = 0.0;
            acc_obs = 0.0;
        }
    }
    if acc_exp > 0.0 || acc_obs > 0.0 {
        if let Some(last) = bins.last_mut() {
            last.0 += acc_obs;
            last.1 += acc_exp;
        } else {
            bins.push((acc_obs, acc_exp));
        }
    }
    if bins.len() < 2 {
        return Err(Error::invalid(
            "too few populated cells for a goodness-of-fit test",
        ));
    }

    let statistic: f64 = bins
        .iter()
        .map(|(obs, exp)| (obs - exp) * (obs - exp) / exp)
        .sum();
    let dof = bins.len() - 1;
    let critical = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numerical(format!("chi-square setup: {e}")))?
        .inverse_cdf(1.0 - significance);
    Ok(GofReport {
        statistic,
        dof,
        critical,
        significance,
        pass: statistic <= critical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::BoundedDistribution;
    use crate::dsl::ServiceLevel;

    fn table3_facility(fee: f64) -> DslFacility {
        DslFacility::new(
            vec![
                ServiceLevel { rate_kw: 15.0, price_per_kwh: 0.20 },
                ServiceLevel { rate_kw: 25.0, price_per_kwh: 0.22 },
                ServiceLevel { rate_kw: 35.0, price_per_kwh: 0.24 },
                ServiceLevel { rate_kw: 45.0, price_per_kwh: 0.26 },
            ],
            fee,
        )
        .unwrap()
    }

    fn case_study_population(lambda: f64) -> UserPopulation {
        UserPopulation::new(
            lambda,
            BoundedDistribution::uniform(10.0, 100.0).unwrap(),
            BoundedDistribution::uniform(0.0, 10.0).unwrap(),
            BoundedDistribution::uniform(0.0, 3.5).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn vanishing_arrival_rate_leaves_facility_empty() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(1e-9);
        let tr = simulate(&model, &pop, 40.0, 35.0, &[36.0, 38.0], 1, 0).unwrap();
        assert!(tr.eta.iter().all(|c| *c == 0));
        assert!(tr.q_kw.iter().all(|q| *q == 0.0));
    }

    #[test]
    fn invalid_windows_rejected() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(20.0);
        assert!(simulate(&model, &pop, 10.0, 10.0, &[], 1, 0).is_err());
        assert!(simulate(&model, &pop, 10.0, 5.0, &[4.0], 1, 0).is_err());
        assert!(simulate(&model, &pop, 10.0, 5.0, &[11.0], 1, 0).is_err());
    }

    #[test]
    fn deterministic_service_matches_infinite_server_mean() {
        // Single level at 30 kW with demand pinned near 30 kWh: every
        // user occupies the facility for almost exactly one hour.
        let eps = 1e-9;
        let facility = DslFacility::new(
            vec![ServiceLevel { rate_kw: 30.0, price_per_kwh: 0.2 }],
            0.0,
        )
        .unwrap();
        let model = PricingModel::DslFreeParking(facility);
        let pop = UserPopulation::new(
            20.0,
            BoundedDistribution::uniform(30.0 - eps, 30.0 + eps).unwrap(),
            BoundedDistribution::uniform(0.0, 10.0).unwrap(),
            BoundedDistribution::uniform(0.0, eps).unwrap(),
        )
        .unwrap();
        let cfg = EnsembleConfig {
            replications: 1000,
            master_seed: 3,
            horizon_hr: 10.0,
            warmup_hr: 6.0,
            t_star_hr: 7.0,
            diagnostic_times: vec![6.5, 8.0],
            percentiles: vec![50.0],
        };
        let stats = run_ensemble(&model, &pop, &cfg).unwrap();
        let mean = stats.eta.iter().map(|v| *v as f64).sum::<f64>() / 1000.0;
        // eta(t*) ~ Poisson(20): the ensemble mean lies within 3 sigma.
        let band = 3.0 * (20.0f64 / 1000.0).sqrt();
        assert!((mean - 20.0).abs() < band, "ensemble mean {mean}");
    }

    #[test]
    fn metered_model_separates_present_and_active() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(20.0);
        let warmup = model.default_warmup_hr(&pop);
        let obs: Vec<f64> = (1..=40).map(|i| warmup + 0.1 * i as f64).collect();
        let tr = simulate(&model, &pop, warmup + 5.0, warmup, &obs, 9, 0).unwrap();
        assert!(tr
            .eta
            .iter()
            .zip(&tr.eta_act)
            .all(|(present, active)| active <= present));
        assert!(
            tr.eta
                .iter()
                .zip(&tr.eta_act)
                .any(|(present, active)| active < present),
            "expected some users parked but not charging"
        );
    }

    #[test]
    fn pd_model_presence_equals_activity() {
        let model = PricingModel::Pd(QuadraticPricing::new(2.0, 0.25, 4.0, 50.0).unwrap());
        let pop = case_study_population(20.0);
        let warmup = model.default_warmup_hr(&pop);
        let obs: Vec<f64> = (1..=20).map(|i| warmup + 0.2 * i as f64).collect();
        let tr = simulate(&model, &pop, warmup + 5.0, warmup, &obs, 11, 0).unwrap();
        assert_eq!(tr.eta, tr.eta_act);
    }

    #[test]
    fn sampled_power_recomputable_from_users() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(20.0);
        let warmup = model.default_warmup_hr(&pop);
        let obs: Vec<f64> = (1..=10).map(|i| warmup + 0.3 * i as f64).collect();
        let tr = simulate(&model, &pop, warmup + 5.0, warmup, &obs, 13, 0).unwrap();
        for (i, t) in tr.times_hr.iter().enumerate() {
            assert!((tr.q_kw[i] - tr.power_at(*t)).abs() < 1e-9);
        }
    }

    #[test]
    fn traces_are_bit_reproducible() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(20.0);
        let warmup = model.default_warmup_hr(&pop);
        let obs = vec![warmup + 1.0];
        let a = simulate(&model, &pop, warmup + 2.0, warmup, &obs, 17, 3).unwrap();
        let b = simulate(&model, &pop, warmup + 2.0, warmup, &obs, 17, 3).unwrap();
        assert_eq!(a, b);
        let c = simulate(&model, &pop, warmup + 2.0, warmup, &obs, 17, 4).unwrap();
        assert_ne!(a.users.len(), 0);
        assert_ne!(a.users, c.users);
    }

    #[test]
    fn identical_streams_give_zero_error_bars() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(20.0);
        let warmup = model.default_warmup_hr(&pop);
        let obs = vec![warmup + 0.5, warmup + 1.0];
        let tr = simulate(&model, &pop, warmup + 2.0, warmup, &obs, 19, 0).unwrap();
        let stats = assemble_stats(&[tr.clone(), tr], warmup + 1.0, &[25.0, 50.0, 75.0]).unwrap();
        assert!(stats.eta_percentile_half_width.iter().all(|w| *w == 0.0));
        assert!(stats.q_percentile_half_width.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn ensemble_needs_two_replications() {
        let model = PricingModel::DslMetered(table3_facility(1.0));
        let pop = case_study_population(20.0);
        let mut cfg = EnsembleConfig::default_for(&model, &pop, 1);
        cfg.replications = 1;
        assert!(run_ensemble(&model, &pop, &cfg).is_err());
    }

    #[test]
    fn exceedance_on_hand_counted_fixture() {
        let stats = EnsembleStats {
            replications: 10,
            t_star_hr: 1.0,
            eta: vec![3, 5, 5, 6, 7, 8, 8, 9, 12, 15],
            eta_act: vec![2, 4, 5, 5, 6, 7, 8, 8, 11, 14],
            q_kw: vec![10.0, 20.0, 20.0, 35.0, 40.0, 55.0, 60.0, 60.0, 90.0, 120.0],
            percentiles: vec![],
            eta_percentile_mean: vec![],
            eta_percentile_half_width: vec![],
            q_percentile_mean: vec![],
            q_percentile_half_width: vec![],
        };
        let pts = empirical_exceedance(&stats, &[0.0, 6.0, 100.0], BoundMetric::Occupancy);
        assert_eq!(pts[0].prob_below, 0.0);
        assert_eq!(pts[1].prob_below, 0.3); // 3, 5, 5 below 6
        assert_eq!(pts[2].prob_below, 1.0);
        let q = empirical_exceedance(&stats, &[50.0], BoundMetric::Power);
        assert_eq!(q[0].prob_below, 0.5);
        assert!((q[0].stderr - (0.25f64 / 10.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stationarity_between_two_instants() {
        let model = PricingModel::DslFreeParking(table3_facility(0.0));
        let pop = case_study_population(10.0);
        let warmup = model.default_warmup_hr(&pop);
        let t1 = warmup + 0.5;
        let t2 = warmup + 2.5;
        let traces: Vec<SimulationTrace> = (0..400)
            .map(|rep| {
                simulate(&model, &pop, warmup + 3.0, warmup, &[t1, t2], 23, rep).unwrap()
            })
            .collect();
        let mean_at = |idx: usize| {
            traces.iter().map(|t| t.eta[idx] as f64).sum::<f64>() / traces.len() as f64
        };
        let var_at = |idx: usize, mean: f64| {
            traces
                .iter()
                .map(|t| (t.eta[idx] as f64 - mean).powi(2))
                .sum::<f64>()
                / (traces.len() as f64 - 1.0)
        };
        let (m1, m2) = (mean_at(0), mean_at(1));
        let se = ((var_at(0, m1) + var_at(1, m2)) / traces.len() as f64).sqrt();
        assert!(
            (m1 - m2).abs() < 3.0 * se.max(0.05),
            "means {m1} vs {m2}, se {se}"
        );
    }

    #[test]
    fn gof_accepts_poisson_and_rejects_shifted_mean() {
        // Draw true Poisson samples by counting exponential gaps.
        let mut rng = stream_rng(31, 0);
        let mean = 12.0;
        let samples: Vec<u32> = (0..1000)
            .map(|_| {
                let mut t = 0.0;
                let mut k = 0u32;
                loop {
                    let u: f64 = rng.random();
                    t += -(1.0 - u).ln();
                    if t > mean {
                        break k;
                    }
                    k += 1;
                }
            })
            .collect();
        let ok = chi_square_poisson_gof(&samples, mean, 0.01).unwrap();
        assert!(ok.pass, "statistic {} > critical {}", ok.statistic, ok.critical);
        let bad = chi_square_poisson_gof(&samples, mean * 1.5, 0.01).unwrap();
        assert!(!bad.pass);
    }
}
