//! Scenario configuration: a single TOML document describing the user
//! population, exactly one pricing model, the simulation layout, and the
//! threshold grids to tabulate.

use crate::CliError;
use chargecap_core::dist::{BoundedDistribution, UserPopulation};
use chargecap_core::dsl::{DslFacility, MonteCarloConfig, ServiceLevel};
use chargecap_core::pd::QuadraticPricing;
use chargecap_core::sim::{EnsembleConfig, PricingModel};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `dsl`, `dsl_fp`, or `pd`.
    pub model: String,
    pub population: PopulationConfig,
    pub dsl: Option<DslBlock>,
    pub pd: Option<PdBlock>,
    #[serde(default)]
    pub simulation: SimulationBlock,
    #[serde(default)]
    pub moments: MomentsBlock,
    pub bounds: BoundsBlock,
    #[serde(default)]
    pub output: OutputBlock,
    /// Reference values quoted for this scenario, reported next to the
    /// computed ones; they do not gate any computation.
    pub reference: Option<ReferenceBlock>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationConfig {
    pub arrival_rate_per_hr: f64,
    pub demand_kwh: DistributionBlock,
    pub impatience_per_hr: DistributionBlock,
    /// Ignored by the free-parking model, which pins the dwell to zero.
    pub dwell_hr: DistributionBlock,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionBlock {
    pub kind: String,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub atom_at_zero: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DslBlock {
    pub levels: Vec<LevelBlock>,
    #[serde(default)]
    pub parking_fee_per_hr: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelBlock {
    pub rate_kw: f64,
    pub price_per_kwh: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdBlock {
    pub surge_d: f64,
    pub base_b: f64,
    pub omega_hr: f64,
    pub rate_cap_kw: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationBlock {
    pub replications: usize,
    pub seed: u64,
    /// Defaults to five times the longest possible service time.
    pub warmup_hr: Option<f64>,
    pub horizon_hr: Option<f64>,
    /// Snapshot instant for exceedance statistics; defaults to one hour
    /// past the warmup.
    pub observation_hr: Option<f64>,
}

impl Default for SimulationBlock {
    fn default() -> Self {
        Self {
            replications: 1000,
            seed: 42,
            warmup_hr: None,
            horizon_hr: None,
            observation_hr: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsBlock {
    pub draws: usize,
    pub seed: u64,
    pub max_stderr: f64,
}

impl Default for MomentsBlock {
    fn default() -> Self {
        Self {
            draws: 1_000_000,
            seed: 7,
            max_stderr: 0.01,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsBlock {
    /// Ascending user-count thresholds for the occupancy bound.
    pub occupancy_grid: Vec<f64>,
    /// Ascending kW thresholds for the power bound.
    pub power_grid: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceBlock {
    pub e_r_kw: Option<f64>,
    pub e_charge_time_hr: Option<f64>,
    pub e_u_hr: Option<f64>,
    pub note: Option<String>,
}

/// A parsed and fully validated scenario, resolved against defaults.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: PricingModel,
    pub population: UserPopulation,
    pub moments_cfg: MonteCarloConfig,
    pub ensemble_cfg: EnsembleConfig,
    pub occupancy_grid: Vec<f64>,
    pub power_grid: Vec<f64>,
    pub output_dir: Option<String>,
    pub reference: Option<ReferenceBlock>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read {}: {e}", path.display()))
        })?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }

    /// Validate every block and resolve defaults into runnable objects.
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let population = self.build_population()?;
        let model = self.build_model()?;

        for (name, grid) in [
            ("occupancy_grid", &self.bounds.occupancy_grid),
            ("power_grid", &self.bounds.power_grid),
        ] {
            if grid.is_empty() {
                return Err(CliError::Config(format!("bounds.{name} must be nonempty")));
            }
            if grid.windows(2).any(|w| w[0] > w[1]) {
                return Err(CliError::Config(format!(
                    "bounds.{name} must be sorted ascending"
                )));
            }
        }

        if self.simulation.replications < 2 {
            return Err(CliError::Config(
                "simulation.replications must be at least 2 (error bars need spread)".into(),
            ));
        }

        let defaults = EnsembleConfig::default_for(&model, &population, self.simulation.seed);
        let warmup = self.simulation.warmup_hr.unwrap_or(defaults.warmup_hr);
        let horizon = self.simulation.horizon_hr.unwrap_or(warmup + 5.0);
        let t_star = self.simulation.observation_hr.unwrap_or(warmup + 1.0);
        if !(warmup < horizon) {
            return Err(CliError::Config(format!(
                "simulation window invalid: warmup {warmup} hr must precede horizon {horizon} hr"
            )));
        }
        if !(t_star > warmup && t_star <= horizon) {
            return Err(CliError::Config(format!(
                "simulation.observation_hr {t_star} must lie in (warmup, horizon] = ({warmup}, {horizon}]"
            )));
        }
        let diagnostic_times: Vec<f64> = (1..=8)
            .map(|i| warmup + (horizon - warmup) * i as f64 / 9.0)
            .collect();

        let ensemble_cfg = EnsembleConfig {
            replications: self.simulation.replications,
            master_seed: self.simulation.seed,
            horizon_hr: horizon,
            warmup_hr: warmup,
            t_star_hr: t_star,
            diagnostic_times,
            percentiles: defaults.percentiles,
        };

        if self.moments.draws < 2 {
            return Err(CliError::Config("moments.draws must be at least 2".into()));
        }

        Ok(Scenario {
            model,
            population,
            moments_cfg: MonteCarloConfig {
                draws: self.moments.draws,
                seed: self.moments.seed,
                shards: 64,
                max_stderr: self.moments.max_stderr,
            },
            ensemble_cfg,
            occupancy_grid: self.bounds.occupancy_grid.clone(),
            power_grid: self.bounds.power_grid.clone(),
            output_dir: self.output.directory.clone(),
            reference: self.reference.clone(),
        })
    }

    fn build_distribution(
        field: &str,
        block: &DistributionBlock,
    ) -> Result<BoundedDistribution, CliError> {
        if block.kind != "uniform" {
            return Err(CliError::Config(format!(
                "population.{field}: unsupported kind {:?} (expected \"uniform\")",
                block.kind
            )));
        }
        let base = BoundedDistribution::uniform(block.lower, block.upper)
            .map_err(|e| CliError::Config(format!("population.{field}: {e}")))?;
        if block.atom_at_zero != 0.0 {
            base.with_atom_at_zero(block.atom_at_zero)
                .map_err(|e| CliError::Config(format!("population.{field}: {e}")))
        } else {
            Ok(base)
        }
    }

    fn build_population(&self) -> Result<UserPopulation, CliError> {
        let demand = Self::build_distribution("demand_kwh", &self.population.demand_kwh)?;
        let impatience =
            Self::build_distribution("impatience_per_hr", &self.population.impatience_per_hr)?;
        let dwell = Self::build_distribution("dwell_hr", &self.population.dwell_hr)?;
        UserPopulation::new(
            self.population.arrival_rate_per_hr,
            demand,
            impatience,
            dwell,
        )
        .map_err(|e| CliError::Config(format!("population: {e}")))
    }

    fn build_facility(&self, block: &DslBlock) -> Result<DslFacility, CliError> {
        let levels = block
            .levels
            .iter()
            .map(|l| ServiceLevel {
                rate_kw: l.rate_kw,
                price_per_kwh: l.price_per_kwh,
            })
            .collect();
        DslFacility::new(levels, block.parking_fee_per_hr)
            .map_err(|e| CliError::Config(format!("dsl menu: {e}")))
    }

    pub fn build_model(&self) -> Result<PricingModel, CliError> {
        match self.model.as_str() {
            "dsl" | "dsl_fp" => {
                if self.pd.is_some() {
                    return Err(CliError::Config(
                        "exactly one model block is allowed: remove [pd] for a dsl scenario"
                            .into(),
                    ));
                }
                let block = self.dsl.as_ref().ok_or_else(|| {
                    CliError::Config("model is dsl but the [dsl] block is missing".into())
                })?;
                let facility = self.build_facility(block)?;
                if self.model == "dsl_fp" {
                    if block.parking_fee_per_hr != 0.0 {
                        return Err(CliError::Config(
                            "the free-parking model requires parking_fee_per_hr = 0".into(),
                        ));
                    }
                    Ok(PricingModel::DslFreeParking(facility))
                } else {
                    Ok(PricingModel::DslMetered(facility))
                }
            }
            "pd" => {
                if self.dsl.is_some() {
                    return Err(CliError::Config(
                        "exactly one model block is allowed: remove [dsl] for a pd scenario"
                            .into(),
                    ));
                }
                let block = self.pd.as_ref().ok_or_else(|| {
                    CliError::Config("model is pd but the [pd] block is missing".into())
                })?;
                let pricing = QuadraticPricing::new(
                    block.surge_d,
                    block.base_b,
                    block.omega_hr,
                    block.rate_cap_kw,
                )
                .map_err(|e| CliError::Config(format!("pd pricing: {e}")))?;
                // Feasibility of the target dwell against the demand
                // support; checked here so the surge-price floor below is
                // well defined.
                let x_max = self.population.demand_kwh.upper;
                let min_omega = x_max / block.rate_cap_kw;
                if !(block.omega_hr > min_omega) {
                    return Err(CliError::Config(format!(
                        "pd target dwell infeasible: omega_hr = {} must exceed \
                         x_max / rate_cap_kw = {min_omega}",
                        block.omega_hr
                    )));
                }
                Ok(PricingModel::Pd(pricing))
            }
            other => Err(CliError::Config(format!(
                "unknown model {other:?}: expected \"dsl\", \"dsl_fp\", or \"pd\""
            ))),
        }
    }
}
