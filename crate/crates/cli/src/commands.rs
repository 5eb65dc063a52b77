//! Command implementations: validation, bound tabulation, Monte-Carlo
//! validation, and pricing sweeps. Each command reads one scenario file
//! and writes fixed-schema CSV files into the output directory.

use crate::config::{Scenario, ScenarioConfig};
use crate::CliError;
use chargecap_core::bounds::{bound_curve, BoundCurve, BoundMetric, QueueParameters};
use chargecap_core::dist::mass_defect;
use chargecap_core::dsl::{
    dsl_moments_free_parking, dsl_moments_metered, rate_pmf, rate_pmf_free_parking,
    IntegrationConfig, MonteCarloConfig, RatePmf,
};
use chargecap_core::pd::{min_surge_price, pd_moments, QuadraticPricing};
use chargecap_core::sim::{
    assemble_stats, empirical_exceedance, simulate, EnsembleStats, PricingModel,
};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Command-line overrides applied on top of the scenario file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub out: Option<PathBuf>,
}

fn apply_overrides(scenario: &mut Scenario, overrides: &Overrides) {
    if let Some(seed) = overrides.seed {
        scenario.ensemble_cfg.master_seed = seed;
        scenario.moments_cfg.seed = seed.wrapping_add(0x9e3779b97f4a7c15);
    }
    if let Some(reps) = overrides.replications {
        scenario.ensemble_cfg.replications = reps;
    }
}

fn output_dir(scenario: &Scenario, overrides: &Overrides) -> PathBuf {
    overrides
        .out
        .clone()
        .or_else(|| scenario.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

/// Format with nine significant digits, plain decimal where reasonable.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: usize = 9;
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    let mag = x.abs().log10().floor() as i32;
    let s = if (-4..DIGITS as i32).contains(&mag) {
        let decimals = (DIGITS as i32 - 1 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.prec$e}", prec = DIGITS - 1)
    };
    if s.contains('.') && !s.contains('e') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Moments in a model-independent shape: in the deadline model the
/// active and dwell times coincide (both equal the deadline).
#[derive(Debug, Clone)]
pub struct UnifiedMoments {
    pub e_r_kw: f64,
    pub e_r2_kw2: f64,
    pub e_active_hr: f64,
    pub e_dwell_hr: f64,
    pub se_active_hr: f64,
    pub se_dwell_hr: f64,
    pub se_r_kw: f64,
    pub se_r2_kw2: f64,
    pub analytic_e_u_hr: Option<f64>,
    pub method: &'static str,
    pub pmf: Option<RatePmf>,
}

/// PMF (where applicable), unified moments, and queue parameters for any
/// pricing model.
pub fn compute_moments(
    model: &PricingModel,
    population: &chargecap_core::dist::UserPopulation,
    cfg: &MonteCarloConfig,
) -> Result<(UnifiedMoments, QueueParameters), CliError> {
    let lambda = population.arrival_rate_per_hr;
    match model {
        PricingModel::DslMetered(facility) => {
            let pmf = rate_pmf(facility, population, &IntegrationConfig::default())?;
            let m = dsl_moments_metered(facility, population, &pmf, cfg)?;
            let params = QueueParameters::new(
                lambda,
                m.e_dwell_hr,
                m.e_charge_time_hr,
                m.e_r_kw,
                m.e_r2_kw2,
                facility.max_rate_kw(),
            )?;
            Ok((
                UnifiedMoments {
                    e_r_kw: m.e_r_kw,
                    e_r2_kw2: m.e_r2_kw2,
                    e_active_hr: m.e_charge_time_hr,
                    e_dwell_hr: m.e_dwell_hr,
                    se_active_hr: m.se_charge_time_hr,
                    se_dwell_hr: m.se_dwell_hr,
                    se_r_kw: 0.0,
                    se_r2_kw2: 0.0,
                    analytic_e_u_hr: None,
                    method: "monte_carlo",
                    pmf: Some(pmf),
                },
                params,
            ))
        }
        PricingModel::DslFreeParking(facility) => {
            let pmf = rate_pmf_free_parking(facility, &population.impatience_per_hr)?;
            let m = dsl_moments_free_parking(&population.demand_kwh, &pmf)?;
            let params = QueueParameters::new(
                lambda,
                m.e_dwell_hr,
                m.e_charge_time_hr,
                m.e_r_kw,
                m.e_r2_kw2,
                facility.max_rate_kw(),
            )?;
            Ok((
                UnifiedMoments {
                    e_r_kw: m.e_r_kw,
                    e_r2_kw2: m.e_r2_kw2,
                    e_active_hr: m.e_charge_time_hr,
                    e_dwell_hr: m.e_dwell_hr,
                    se_active_hr: 0.0,
                    se_dwell_hr: 0.0,
                    se_r_kw: 0.0,
                    se_r2_kw2: 0.0,
                    analytic_e_u_hr: None,
                    method: "analytic",
                    pmf: Some(pmf),
                },
                params,
            ))
        }
        PricingModel::Pd(pricing) => {
            let m = pd_moments(pricing, population, cfg)?;
            let params = QueueParameters::new(
                lambda,
                m.e_u_hr,
                m.e_u_hr,
                m.e_r_kw,
                m.e_r2_kw2,
                pricing.rate_cap_kw,
            )?;
            Ok((
                UnifiedMoments {
                    e_r_kw: m.e_r_kw,
                    e_r2_kw2: m.e_r2_kw2,
                    e_active_hr: m.e_u_hr,
                    e_dwell_hr: m.e_u_hr,
                    se_active_hr: m.se_u_hr,
                    se_dwell_hr: m.se_u_hr,
                    se_r_kw: m.se_r_kw,
                    se_r2_kw2: m.se_r2_kw2,
                    analytic_e_u_hr: m.analytic_e_u_hr,
                    method: "monte_carlo",
                    pmf: None,
                },
                params,
            ))
        }
    }
}

/// Queue parameters with every sampled moment shifted by `k` standard
/// errors, clamped back into a consistent region.
fn perturbed_params(
    base: &QueueParameters,
    m: &UnifiedMoments,
    k: f64,
) -> Result<QueueParameters, CliError> {
    let e_dwell = (m.e_dwell_hr + k * m.se_dwell_hr).max(1e-12);
    let e_active = (m.e_active_hr + k * m.se_active_hr)
        .max(1e-12)
        .min(e_dwell);
    let e_r = (m.e_r_kw + k * m.se_r_kw)
        .max(1e-12)
        .min(base.r_max_kw);
    let e_r2 = (m.e_r2_kw2 + k * m.se_r2_kw2).max(e_r * e_r);
    Ok(QueueParameters::new(
        base.arrival_rate_per_hr,
        e_dwell,
        e_active,
        e_r,
        e_r2,
        base.r_max_kw,
    )?)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn curve_csv(curve: &BoundCurve) -> String {
    let mut s = String::from("threshold,bound,confidence\n");
    for (t, b) in curve.thresholds.iter().zip(&curve.bounds) {
        let _ = writeln!(s, "{},{},{}", fmt_sig(*t), fmt_sig(*b), fmt_sig(1.0 - b));
    }
    s
}

fn moments_csv(model_tag: &str, m: &UnifiedMoments) -> String {
    let mut s = String::from(
        "model,e_r_kw,e_r2_kw2,e_active_hr,e_dwell_hr,se_active_hr,se_dwell_hr,method\n",
    );
    let _ = writeln!(
        s,
        "{model_tag},{},{},{},{},{},{},{}",
        fmt_sig(m.e_r_kw),
        fmt_sig(m.e_r2_kw2),
        fmt_sig(m.e_active_hr),
        fmt_sig(m.e_dwell_hr),
        fmt_sig(m.se_active_hr),
        fmt_sig(m.se_dwell_hr),
        m.method
    );
    s
}

fn moments_report(scenario: &Scenario, m: &UnifiedMoments, params: &QueueParameters) -> String {
    let mut s = String::new();
    let tag = scenario.model.tag();
    let _ = writeln!(s, "model: {tag}");
    if let Some(pmf) = &m.pmf {
        let _ = writeln!(s, "rate PMF:");
        for (r, p) in pmf.rates().iter().zip(pmf.probs()) {
            let _ = writeln!(s, "  P(r = {} kW) = {}", fmt_sig(*r), fmt_sig(*p));
        }
    }
    let _ = writeln!(s, "E[r]        = {} kW", fmt_sig(m.e_r_kw));
    let _ = writeln!(s, "E[r^2]      = {} kW^2", fmt_sig(m.e_r2_kw2));
    let _ = writeln!(
        s,
        "E[theta_act]= {} hr (stderr {})",
        fmt_sig(m.e_active_hr),
        fmt_sig(m.se_active_hr)
    );
    let _ = writeln!(
        s,
        "E[theta]    = {} hr (stderr {})",
        fmt_sig(m.e_dwell_hr),
        fmt_sig(m.se_dwell_hr)
    );
    if let Some(analytic) = m.analytic_e_u_hr {
        let _ = writeln!(
            s,
            "analytic E[u] cross-check = {} hr (sampled {} hr, gap {})",
            fmt_sig(analytic),
            fmt_sig(m.e_active_hr),
            fmt_sig((analytic - m.e_active_hr).abs())
        );
    }
    let _ = writeln!(
        s,
        "mean occupancy lambda E[theta] = {} users",
        fmt_sig(params.mean_occupancy())
    );
    let _ = writeln!(
        s,
        "mean power lambda E[theta_act] E[r] = {} kW",
        fmt_sig(params.mean_active() * m.e_r_kw)
    );
    if let Some(reference) = &scenario.reference {
        let _ = writeln!(s, "reference values quoted in the scenario file:");
        if let Some(v) = reference.e_r_kw {
            let _ = writeln!(
                s,
                "  e_r_kw: computed {} vs reference {} (delta {})",
                fmt_sig(m.e_r_kw),
                fmt_sig(v),
                fmt_sig(m.e_r_kw - v)
            );
        }
        if let Some(v) = reference.e_charge_time_hr {
            let _ = writeln!(
                s,
                "  e_charge_time_hr: computed {} vs reference {} (delta {})",
                fmt_sig(m.e_active_hr),
                fmt_sig(v),
                fmt_sig(m.e_active_hr - v)
            );
        }
        if let Some(v) = reference.e_u_hr {
            let _ = writeln!(
                s,
                "  e_u_hr: computed {} vs reference {} (delta {})",
                fmt_sig(m.e_active_hr),
                fmt_sig(v),
                fmt_sig(m.e_active_hr - v)
            );
        }
        if let Some(note) = &reference.note {
            let _ = writeln!(s, "  note: {note}");
        }
    }
    s
}

/// Check a scenario file: parse, build every component, verify the
/// distribution masses, and (for deadline pricing) report the surge
/// price floor. Returns the report text; any failure is an error whose
/// message names the violated requirement.
pub fn cmd_validate(path: &Path) -> Result<String, CliError> {
    let cfg = ScenarioConfig::load(path)?;
    let mut report = String::new();
    let _ = writeln!(report, "scenario: {}", path.display());

    let scenario = cfg.resolve()?;
    let _ = writeln!(report, "model: {} -- OK", scenario.model.tag());

    for (name, dist) in [
        ("demand_kwh", &scenario.population.demand_kwh),
        ("impatience_per_hr", &scenario.population.impatience_per_hr),
        ("dwell_hr", &scenario.population.dwell_hr),
    ] {
        let defect = mass_defect(dist)
            .map_err(|e| CliError::Numerical(format!("population.{name}: {e}")))?;
        let _ = writeln!(
            report,
            "population.{name}: total mass defect {} -- OK",
            fmt_sig(defect)
        );
    }

    match &scenario.model {
        PricingModel::DslMetered(f) | PricingModel::DslFreeParking(f) => {
            let _ = writeln!(
                report,
                "menu: {} levels, rates and prices strictly increasing together -- OK",
                f.level_count()
            );
            let _ = writeln!(
                report,
                "parking fee: {} $/hr",
                fmt_sig(f.parking_fee_per_hr())
            );
            if matches!(scenario.model, PricingModel::DslFreeParking(_)) {
                let _ = writeln!(
                    report,
                    "note: the free-parking model pins the desired dwell to zero; \
                     population.dwell_hr is ignored"
                );
            }
        }
        PricingModel::Pd(p) => {
            let x_min = scenario.population.demand_kwh.lower();
            let x_max = scenario.population.demand_kwh.upper();
            let alpha_min = scenario.population.impatience_per_hr.lower();
            let alpha_max = scenario.population.impatience_per_hr.upper();
            let _ = writeln!(
                report,
                "pd target dwell: omega {} hr > x_max/rate_cap {} hr -- OK",
                fmt_sig(p.omega_hr),
                fmt_sig(x_max / p.rate_cap_kw)
            );
            let floor_min = min_surge_price(p.omega_hr, p.rate_cap_kw, x_min, x_max, alpha_min)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let floor_max = min_surge_price(p.omega_hr, p.rate_cap_kw, x_min, x_max, alpha_max)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let _ = writeln!(
                report,
                "pd surge price floor: D > {} (least-impatient users), \
                 D > {} (cap guaranteed for every user); config D = {}",
                fmt_sig(floor_min),
                fmt_sig(floor_max),
                fmt_sig(p.surge_d)
            );
            if p.surge_d <= floor_max {
                let _ = writeln!(
                    report,
                    "warning: D at or below the worst-case floor; the per-user rate cap \
                     may be exceeded (run `bounds` or the rate-cap check)"
                );
            }
        }
    }
    let _ = writeln!(
        report,
        "grids: {} occupancy thresholds, {} power thresholds -- OK",
        scenario.occupancy_grid.len(),
        scenario.power_grid.len()
    );
    let _ = writeln!(report, "result: PASS");
    Ok(report)
}

/// Artifacts produced by `bounds`.
#[derive(Debug, Clone)]
pub struct BoundsOutput {
    pub moments: UnifiedMoments,
    pub params: QueueParameters,
    pub occupancy: BoundCurve,
    pub power: BoundCurve,
    pub files: Vec<PathBuf>,
}

/// Compute moments and tabulate both bound curves, writing
/// `moments.csv`, `moments_report.txt`, `occupancy_bounds.csv`,
/// `power_bounds.csv`, and `bounds_sensitivity.csv`.
pub fn cmd_bounds(path: &Path, overrides: &Overrides) -> Result<BoundsOutput, CliError> {
    let mut scenario = ScenarioConfig::load(path)?.resolve()?;
    apply_overrides(&mut scenario, overrides);
    let dir = output_dir(&scenario, overrides);

    let (moments, params) = compute_moments(&scenario.model, &scenario.population, &scenario.moments_cfg)?;
    let occupancy = bound_curve(&params, &scenario.occupancy_grid, BoundMetric::Occupancy)?;
    let power = bound_curve(&params, &scenario.power_grid, BoundMetric::Power)?;

    let lo = perturbed_params(&params, &moments, -3.0)?;
    let hi = perturbed_params(&params, &moments, 3.0)?;
    let mut sensitivity = String::from(
        "metric,threshold,bound,bound_minus_3se,bound_plus_3se\n",
    );
    for (metric, grid, curve) in [
        (BoundMetric::Occupancy, &scenario.occupancy_grid, &occupancy),
        (BoundMetric::Power, &scenario.power_grid, &power),
    ] {
        let lo_curve = bound_curve(&lo, grid, metric)?;
        let hi_curve = bound_curve(&hi, grid, metric)?;
        let name = match metric {
            BoundMetric::Occupancy => "occupancy",
            BoundMetric::ActiveOccupancy => "active_occupancy",
            BoundMetric::Power => "power",
        };
        for i in 0..grid.len() {
            let _ = writeln!(
                sensitivity,
                "{name},{},{},{},{}",
                fmt_sig(grid[i]),
                fmt_sig(curve.bounds[i]),
                fmt_sig(lo_curve.bounds[i]),
                fmt_sig(hi_curve.bounds[i]),
            );
        }
    }

    let files = vec![
        write_file(&dir, "moments.csv", &moments_csv(scenario.model.tag(), &moments))?,
        write_file(&dir, "moments_report.txt", &moments_report(&scenario, &moments, &params))?,
        write_file(&dir, "occupancy_bounds.csv", &curve_csv(&occupancy))?,
        write_file(&dir, "power_bounds.csv", &curve_csv(&power))?,
        write_file(&dir, "bounds_sensitivity.csv", &sensitivity)?,
    ];
    Ok(BoundsOutput {
        moments,
        params,
        occupancy,
        power,
        files,
    })
}

/// Artifacts produced by `simulate`.
#[derive(Debug)]
pub struct SimulateOutput {
    pub stats: EnsembleStats,
    pub params: QueueParameters,
    pub occupancy: ValidationTable,
    pub power: ValidationTable,
    pub files: Vec<PathBuf>,
}

/// Empirical exceedance probabilities joined with the analytic bound.
#[derive(Debug, Clone)]
pub struct ValidationTable {
    pub thresholds: Vec<f64>,
    pub empirical: Vec<f64>,
    pub stderr: Vec<f64>,
    pub bounds: Vec<f64>,
}

impl ValidationTable {
    fn csv(&self) -> String {
        let mut s = String::from("threshold,empirical_prob,stderr,bound,confidence\n");
        for i in 0..self.thresholds.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt_sig(self.thresholds[i]),
                fmt_sig(self.empirical[i]),
                fmt_sig(self.stderr[i]),
                fmt_sig(self.bounds[i]),
                fmt_sig(1.0 - self.bounds[i]),
            );
        }
        s
    }

    /// Every grid point satisfies `empirical >= confidence - slack *
    /// stderr`.
    pub fn dominated_within(&self, slack: f64) -> bool {
        (0..self.thresholds.len())
            .all(|i| self.empirical[i] >= 1.0 - self.bounds[i] - slack * self.stderr[i])
    }
}

fn join_validation(
    stats: &EnsembleStats,
    params: &QueueParameters,
    grid: &[f64],
    metric: BoundMetric,
) -> Result<ValidationTable, CliError> {
    let curve = bound_curve(params, grid, metric)?;
    let points = empirical_exceedance(stats, grid, metric);
    Ok(ValidationTable {
        thresholds: grid.to_vec(),
        empirical: points.iter().map(|p| p.prob_below).collect(),
        stderr: points.iter().map(|p| p.stderr).collect(),
        bounds: curve.bounds,
    })
}

/// Run the Monte-Carlo ensemble and join the empirical exceedance curves
/// with the analytic bounds. Writes `occupancy_validation.csv`,
/// `power_validation.csv`, `percentiles.csv`, and `traces.csv`.
pub fn cmd_simulate(path: &Path, overrides: &Overrides) -> Result<SimulateOutput, CliError> {
    let mut scenario = ScenarioConfig::load(path)?.resolve()?;
    apply_overrides(&mut scenario, overrides);
    let dir = output_dir(&scenario, overrides);
    let cfg = &scenario.ensemble_cfg;
    if cfg.replications < 2 {
        return Err(CliError::Config(
            "simulate needs at least 2 replications".into(),
        ));
    }

    let (moments, params) = compute_moments(&scenario.model, &scenario.population, &scenario.moments_cfg)?;

    let mut obs = cfg.diagnostic_times.clone();
    obs.push(cfg.t_star_hr);
    obs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    obs.dedup();
    let traces: Vec<_> = (0..cfg.replications)
        .into_par_iter()
        .map(|rep| {
            simulate(
                &scenario.model,
                &scenario.population,
                cfg.horizon_hr,
                cfg.warmup_hr,
                &obs,
                cfg.master_seed,
                rep as u64,
            )
        })
        .collect::<chargecap_core::Result<_>>()?;
    let stats = assemble_stats(&traces, cfg.t_star_hr, &cfg.percentiles)?;

    let occupancy = join_validation(&stats, &params, &scenario.occupancy_grid, BoundMetric::Occupancy)?;
    let power = join_validation(&stats, &params, &scenario.power_grid, BoundMetric::Power)?;

    let mut traces_csv = String::from("replication,time,eta,eta_act,q_kw\n");
    for tr in &traces {
        for (i, t) in tr.times_hr.iter().enumerate() {
            let _ = writeln!(
                traces_csv,
                "{},{},{},{},{}",
                tr.replication,
                fmt_sig(*t),
                tr.eta[i],
                tr.eta_act[i],
                fmt_sig(tr.q_kw[i]),
            );
        }
    }

    let mut pct_csv = String::from(
        "percentile,eta_mean,eta_half_width,q_kw_mean,q_kw_half_width\n",
    );
    for (i, p) in stats.percentiles.iter().enumerate() {
        let _ = writeln!(
            pct_csv,
            "{},{},{},{},{}",
            fmt_sig(*p),
            fmt_sig(stats.eta_percentile_mean[i]),
            fmt_sig(stats.eta_percentile_half_width[i]),
            fmt_sig(stats.q_percentile_mean[i]),
            fmt_sig(stats.q_percentile_half_width[i]),
        );
    }

    let files = vec![
        write_file(&dir, "occupancy_validation.csv", &occupancy.csv())?,
        write_file(&dir, "power_validation.csv", &power.csv())?,
        write_file(&dir, "percentiles.csv", &pct_csv)?,
        write_file(&dir, "traces.csv", &traces_csv)?,
        write_file(&dir, "moments.csv", &moments_csv(scenario.model.tag(), &moments))?,
    ];
    Ok(SimulateOutput {
        stats,
        params,
        occupancy,
        power,
        files,
    })
}

/// One swept value with its recomputed curves.
#[derive(Debug, Clone)]
pub struct TunePoint {
    pub value: f64,
    pub moments: UnifiedMoments,
    pub occupancy: BoundCurve,
    pub power: BoundCurve,
}

/// Artifacts produced by `tune`.
#[derive(Debug)]
pub struct TuneOutput {
    pub param: String,
    pub points: Vec<TunePoint>,
    pub file: PathBuf,
}

/// Sweep one pricing-parameter family and retabulate both bound curves
/// per value, exposing the occupancy/power trade-off. Supported
/// families: `dsl_rate_scale` (multiplies every menu rate) and
/// `pd_omega` (replaces the target dwell).
pub fn cmd_tune(
    path: &Path,
    param: &str,
    values: &[f64],
    overrides: &Overrides,
) -> Result<TuneOutput, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("tune needs at least one value".into()));
    }
    let mut scenario = ScenarioConfig::load(path)?.resolve()?;
    apply_overrides(&mut scenario, overrides);
    let dir = output_dir(&scenario, overrides);

    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let model = match (param, &scenario.model) {
            ("dsl_rate_scale", PricingModel::DslMetered(f)) => {
                PricingModel::DslMetered(f.with_scaled_rates(value)?)
            }
            ("dsl_rate_scale", PricingModel::DslFreeParking(f)) => {
                PricingModel::DslFreeParking(f.with_scaled_rates(value)?)
            }
            ("pd_omega", PricingModel::Pd(p)) => {
                let pricing = QuadraticPricing::new(p.surge_d, p.base_b, value, p.rate_cap_kw)
                    .map_err(|e| CliError::Config(e.to_string()))?;
                let min_omega =
                    scenario.population.demand_kwh.upper() / pricing.rate_cap_kw;
                if !(value > min_omega) {
                    return Err(CliError::Config(format!(
                        "pd_omega value {value} infeasible: must exceed \
                         x_max / rate_cap = {min_omega}"
                    )));
                }
                PricingModel::Pd(pricing)
            }
            ("dsl_rate_scale", PricingModel::Pd(_)) => {
                return Err(CliError::Config(
                    "dsl_rate_scale applies to dsl scenarios only".into(),
                ))
            }
            ("pd_omega", _) => {
                return Err(CliError::Config(
                    "pd_omega applies to pd scenarios only".into(),
                ))
            }
            (other, _) => {
                return Err(CliError::Config(format!(
                    "unknown sweep parameter {other:?}: expected \
                     \"dsl_rate_scale\" or \"pd_omega\""
                )))
            }
        };
        let (moments, params) = compute_moments(&model, &scenario.population, &scenario.moments_cfg)?;
        let occupancy = bound_curve(&params, &scenario.occupancy_grid, BoundMetric::Occupancy)?;
        let power = bound_curve(&params, &scenario.power_grid, BoundMetric::Power)?;
        points.push(TunePoint {
            value,
            moments,
            occupancy,
            power,
        });
    }

    let mut csv = String::from("param,value,metric,threshold,bound,confidence\n");
    for pt in &points {
        for (metric, curve) in [("occupancy", &pt.occupancy), ("power", &pt.power)] {
            for (t, b) in curve.thresholds.iter().zip(&curve.bounds) {
                let _ = writeln!(
                    csv,
                    "{param},{},{metric},{},{},{}",
                    fmt_sig(pt.value),
                    fmt_sig(*t),
                    fmt_sig(*b),
                    fmt_sig(1.0 - b),
                );
            }
        }
    }
    let file = write_file(&dir, &format!("tune_{param}.csv"), &csv)?;
    Ok(TuneOutput {
        param: param.to_string(),
        points,
        file,
    })
}
