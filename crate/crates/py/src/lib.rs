//! Python bindings exposing the main chargecap types and operations:
//! bounded distributions, the service-level and deadline pricing models,
//! the occupancy/power tail bounds, and small ensemble runners.

use chargecap_core::{bounds, dist, dsl, pd, sim};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::cell::RefCell;

fn err<T>(r: chargecap_core::Result<T>) -> PyResult<T> {
    r.map_err(|e| PyValueError::new_err(e.to_string()))
}

/// A random variable on a finite interval, optionally with a probability
/// atom at zero.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Distribution {
    inner: dist::BoundedDistribution,
}

#[pymethods]
impl Distribution {
    /// Uniform distribution on `[lower, upper]`.
    #[staticmethod]
    fn uniform(lower: f64, upper: f64) -> PyResult<Self> {
        Ok(Self {
            inner: err(dist::BoundedDistribution::uniform(lower, upper))?,
        })
    }

    /// Mixture with probability `p0` at zero; requires `lower == 0`.
    fn with_atom_at_zero(&self, p0: f64) -> PyResult<Self> {
        Ok(Self {
            inner: err(self.inner.with_atom_at_zero(p0))?,
        })
    }

    #[getter]
    fn lower(&self) -> f64 {
        self.inner.lower()
    }

    #[getter]
    fn upper(&self) -> f64 {
        self.inner.upper()
    }

    #[getter]
    fn atom_at_zero(&self) -> f64 {
        self.inner.atom_at_zero()
    }

    fn mean(&self) -> PyResult<f64> {
        err(self.inner.mean())
    }

    fn cdf(&self, t: f64) -> f64 {
        self.inner.cdf(t)
    }

    fn density(&self, t: f64) -> f64 {
        self.inner.density_at(t)
    }

    /// `E[f(X)]` for a Python callable `f`, by adaptive quadrature.
    fn expect(&self, f: Bound<'_, PyAny>) -> PyResult<f64> {
        let failure: RefCell<Option<PyErr>> = RefCell::new(None);
        let value = self.inner.expect(|t| {
            match f.call1((t,)).and_then(|v| v.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            }
        });
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        err(value)
    }

    /// `n` reproducible draws from stream 0 of `seed`.
    fn sample(&self, seed: u64, n: usize) -> PyResult<Vec<f64>> {
        err(self.inner.sample_n(seed, n))
    }

    fn __repr__(&self) -> String {
        format!(
            "Distribution(lower={}, upper={}, atom_at_zero={})",
            self.inner.lower(),
            self.inner.upper(),
            self.inner.atom_at_zero()
        )
    }
}

/// The arriving population: Poisson rate plus per-user distributions.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Population {
    inner: dist::UserPopulation,
}

#[pymethods]
impl Population {
    #[new]
    fn new(
        arrival_rate_per_hr: f64,
        demand_kwh: Distribution,
        impatience_per_hr: Distribution,
        dwell_hr: Distribution,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: err(dist::UserPopulation::new(
                arrival_rate_per_hr,
                demand_kwh.inner,
                impatience_per_hr.inner,
                dwell_hr.inner,
            ))?,
        })
    }
}

/// Discrete distribution over the menu rates.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct RatePmf {
    inner: dsl::RatePmf,
}

#[pymethods]
impl RatePmf {
    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.rates().to_vec()
    }

    #[getter]
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn mean_rate(&self) -> f64 {
        self.inner.mean_rate()
    }

    fn mean_rate_sq(&self) -> f64 {
        self.inner.mean_rate_sq()
    }

    fn mean_inverse_rate(&self) -> f64 {
        self.inner.mean_inverse_rate()
    }
}

/// Service-level menu plus parking fee.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct Facility {
    inner: dsl::DslFacility,
}

#[pymethods]
impl Facility {
    /// `levels` is a list of `(rate_kw, price_per_kwh)` pairs, ordered.
    #[new]
    fn new(levels: Vec<(f64, f64)>, parking_fee_per_hr: f64) -> PyResult<Self> {
        let levels = levels
            .into_iter()
            .map(|(rate_kw, price_per_kwh)| dsl::ServiceLevel {
                rate_kw,
                price_per_kwh,
            })
            .collect();
        Ok(Self {
            inner: err(dsl::DslFacility::new(levels, parking_fee_per_hr))?,
        })
    }

    #[getter]
    fn rates(&self) -> Vec<f64> {
        self.inner.levels().iter().map(|l| l.rate_kw).collect()
    }

    #[getter]
    fn prices(&self) -> Vec<f64> {
        self.inner.levels().iter().map(|l| l.price_per_kwh).collect()
    }

    #[getter]
    fn parking_fee_per_hr(&self) -> f64 {
        self.inner.parking_fee_per_hr()
    }

    /// Total cost at `level` (0-based) for a user draw.
    fn cost(&self, level: usize, x: f64, alpha: f64, xi: f64) -> PyResult<f64> {
        err(dsl::dsl_cost(&self.inner, level, x, alpha, xi))
    }

    /// The level (0-based) a rational user selects.
    fn select_level(&self, x: f64, alpha: f64, xi: f64) -> usize {
        dsl::select_level(&self.inner, x, alpha, xi)
    }

    /// Probability that `level` minimizes the cost given the desired
    /// rate `rho = x / xi` (pass `float("inf")` for a zero dwell).
    fn choice_probability(
        &self,
        level: usize,
        rho: f64,
        impatience: &Distribution,
    ) -> PyResult<f64> {
        err(dsl::choice_probability_given_rho(
            &self.inner,
            level,
            rho,
            &impatience.inner,
        ))
    }

    /// Rate distribution in the free-parking model.
    fn rate_pmf_free_parking(&self, impatience: &Distribution) -> PyResult<RatePmf> {
        Ok(RatePmf {
            inner: err(dsl::rate_pmf_free_parking(&self.inner, &impatience.inner))?,
        })
    }

    /// Rate distribution in the metered-parking model, by quadrature
    /// over the joint demand/dwell distribution.
    fn rate_pmf(&self, population: &Population) -> PyResult<RatePmf> {
        Ok(RatePmf {
            inner: err(dsl::rate_pmf(
                &self.inner,
                &population.inner,
                &dsl::IntegrationConfig::default(),
            ))?,
        })
    }

    /// `(e_r_kw, e_r2_kw2, e_charge_time_hr, e_dwell_hr)` for the
    /// metered model, Monte-Carlo with `draws` samples.
    #[pyo3(signature = (population, draws = 1_000_000, seed = 7, max_stderr = 0.01))]
    fn moments(
        &self,
        population: &Population,
        draws: usize,
        seed: u64,
        max_stderr: f64,
    ) -> PyResult<(f64, f64, f64, f64)> {
        let pmf = err(dsl::rate_pmf(
            &self.inner,
            &population.inner,
            &dsl::IntegrationConfig::default(),
        ))?;
        let cfg = dsl::MonteCarloConfig {
            draws,
            seed,
            max_stderr,
            ..Default::default()
        };
        let m = err(dsl::dsl_moments_metered(
            &self.inner,
            &population.inner,
            &pmf,
            &cfg,
        ))?;
        Ok((m.e_r_kw, m.e_r2_kw2, m.e_charge_time_hr, m.e_dwell_hr))
    }
}

/// Quadratic deadline pricing with a per-user rate cap.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct DeadlinePricing {
    inner: pd::QuadraticPricing,
}

#[pymethods]
impl DeadlinePricing {
    #[new]
    fn new(surge_d: f64, base_b: f64, omega_hr: f64, rate_cap_kw: f64) -> PyResult<Self> {
        Ok(Self {
            inner: err(pd::QuadraticPricing::new(
                surge_d,
                base_b,
                omega_hr,
                rate_cap_kw,
            ))?,
        })
    }

    fn price(&self, x: f64, u: f64) -> PyResult<f64> {
        err(pd::quadratic_price(&self.inner, x, u))
    }

    fn total_cost(&self, x: f64, u: f64, alpha: f64, xi: f64) -> PyResult<f64> {
        err(pd::pd_total_cost(&self.inner, x, u, alpha, xi))
    }

    /// The deadline a rational user picks (closed form).
    fn optimal_deadline(&self, x: f64, alpha: f64, xi: f64) -> PyResult<f64> {
        err(pd::optimal_deadline(&self.inner, x, alpha, xi))
    }

    /// `(max_rate_kw, violations, pass)` over `n` sampled users.
    #[pyo3(signature = (population, seed = 11, n = 100_000))]
    fn validate_rate_cap(
        &self,
        population: &Population,
        seed: u64,
        n: usize,
    ) -> PyResult<(f64, usize, bool)> {
        let report = err(pd::validate_rate_cap(&self.inner, &population.inner, seed, n))?;
        Ok((report.max_rate_kw, report.violations, report.pass))
    }

    /// `(e_u_hr, e_r_kw, e_r2_kw2)` by Monte-Carlo.
    #[pyo3(signature = (population, draws = 1_000_000, seed = 7, max_stderr = 0.01))]
    fn moments(
        &self,
        population: &Population,
        draws: usize,
        seed: u64,
        max_stderr: f64,
    ) -> PyResult<(f64, f64, f64)> {
        let cfg = dsl::MonteCarloConfig {
            draws,
            seed,
            max_stderr,
            ..Default::default()
        };
        let m = err(pd::pd_moments(&self.inner, &population.inner, &cfg))?;
        Ok((m.e_u_hr, m.e_r_kw, m.e_r2_kw2))
    }
}

/// Everything the tail bounds need about a facility/population pair.
#[pyclass(frozen, from_py_object)]
#[derive(Clone)]
struct QueueParameters {
    inner: bounds::QueueParameters,
}

#[pymethods]
impl QueueParameters {
    #[new]
    fn new(
        arrival_rate_per_hr: f64,
        e_dwell_hr: f64,
        e_active_hr: f64,
        e_r_kw: f64,
        e_r2_kw2: f64,
        r_max_kw: f64,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: err(bounds::QueueParameters::new(
                arrival_rate_per_hr,
                e_dwell_hr,
                e_active_hr,
                e_r_kw,
                e_r2_kw2,
                r_max_kw,
            ))?,
        })
    }

    /// Bound on `P(present users >= m)`.
    fn occupancy_bound(&self, m: f64) -> f64 {
        bounds::occupancy_bound(&self.inner, m)
    }

    /// Bound on `P(actively charging users >= m)`.
    fn active_occupancy_bound(&self, m: f64) -> f64 {
        bounds::active_occupancy_bound(&self.inner, m)
    }

    /// Bound on `P(total power >= r_kw)`.
    fn power_bound(&self, r_kw: f64) -> f64 {
        bounds::power_bound(&self.inner, r_kw)
    }

    /// `(thresholds, bounds, confidences)` over a grid.
    fn occupancy_curve(&self, grid: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let c = err(bounds::bound_curve(
            &self.inner,
            &grid,
            bounds::BoundMetric::Occupancy,
        ))?;
        let conf = c.confidences();
        Ok((c.thresholds, c.bounds, conf))
    }

    fn power_curve(&self, grid: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let c = err(bounds::bound_curve(
            &self.inner,
            &grid,
            bounds::BoundMetric::Power,
        ))?;
        let conf = c.confidences();
        Ok((c.thresholds, c.bounds, conf))
    }
}

/// Bernstein tail for a sum of zero-mean variables bounded by `b`.
#[pyfunction]
fn bernstein_tail(nu: f64, sum_second_moments: f64, b: f64) -> PyResult<f64> {
    err(bounds::bernstein_tail(nu, sum_second_moments, b))
}

/// Upper bound on `P(Z >= m)` for `Z ~ Poisson(mean)`.
#[pyfunction]
fn poisson_tail_bound(mean: f64, m: f64) -> f64 {
    bounds::poisson_tail_bound(mean, m)
}

/// Smallest surge price enforcing the rate cap at impatience `alpha`.
#[pyfunction]
fn min_surge_price(
    omega_hr: f64,
    rate_cap_kw: f64,
    x_min: f64,
    x_max: f64,
    alpha: f64,
) -> PyResult<f64> {
    err(pd::min_surge_price(omega_hr, rate_cap_kw, x_min, x_max, alpha))
}

fn ensemble_snapshot(
    model: sim::PricingModel,
    population: &dist::UserPopulation,
    replications: usize,
    seed: u64,
) -> PyResult<(Vec<u32>, Vec<u32>, Vec<f64>)> {
    let mut cfg = sim::EnsembleConfig::default_for(&model, population, seed);
    cfg.replications = replications;
    let stats = err(sim::run_ensemble(&model, population, &cfg))?;
    Ok((stats.eta, stats.eta_act, stats.q_kw))
}

/// Steady-state `(eta, eta_act, q_kw)` snapshots across replications of
/// the service-level model (`metered=False` for free parking).
#[pyfunction]
#[pyo3(signature = (facility, population, metered = true, replications = 1000, seed = 1))]
fn dsl_ensemble(
    facility: &Facility,
    population: &Population,
    metered: bool,
    replications: usize,
    seed: u64,
) -> PyResult<(Vec<u32>, Vec<u32>, Vec<f64>)> {
    let model = if metered {
        sim::PricingModel::DslMetered(facility.inner.clone())
    } else {
        sim::PricingModel::DslFreeParking(facility.inner.clone())
    };
    ensemble_snapshot(model, &population.inner, replications, seed)
}

/// Steady-state snapshots for the deadline model.
#[pyfunction]
#[pyo3(signature = (pricing, population, replications = 1000, seed = 1))]
fn pd_ensemble(
    pricing: &DeadlinePricing,
    population: &Population,
    replications: usize,
    seed: u64,
) -> PyResult<(Vec<u32>, Vec<u32>, Vec<f64>)> {
    ensemble_snapshot(
        sim::PricingModel::Pd(pricing.inner),
        &population.inner,
        replications,
        seed,
    )
}

#[pymodule]
fn chargecap(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Distribution>()?;
    m.add_class::<Population>()?;
    m.add_class::<Facility>()?;
    m.add_class::<RatePmf>()?;
    m.add_class::<DeadlinePricing>()?;
    m.add_class::<QueueParameters>()?;
    m.add_function(wrap_pyfunction!(bernstein_tail, m)?)?;
    m.add_function(wrap_pyfunction!(poisson_tail_bound, m)?)?;
    m.add_function(wrap_pyfunction!(min_surge_price, m)?)?;
    m.add_function(wrap_pyfunction!(dsl_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(pd_ensemble, m)?)?;
    Ok(())
}
