use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::check_probability;
use crate::objectives::{EvalConfig, EvalMode, OmegaScope};
use crate::pareto::RefPolicy;
use crate::scalar::Scalar;

/// Mechanisms that can be switched off for ablation studies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablations {
    pub no_structure_adjustment: bool,
    pub no_resource_allocation: bool,
    pub no_population_inheritance: bool,
}

/// One switchable mechanism, as named on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ablation {
    Structure,
    Resources,
    Inheritance,
}

impl FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structure" => Ok(Ablation::Structure),
            "resources" => Ok(Ablation::Resources),
            "inheritance" => Ok(Ablation::Inheritance),
            other => Err(Error::Parse(format!(
                "unknown ablation {other:?} (expected structure, resources or inheritance)"
            ))),
        }
    }
}

impl Ablations {
    pub fn with(mut self, ablation: Ablation) -> Self {
        match ablation {
            Ablation::Structure => self.no_structure_adjustment = true,
            Ablation::Resources => self.no_resource_allocation = true,
            Ablation::Inheritance => self.no_population_inheritance = true,
        }
        self
    }

    pub fn any(&self) -> bool {
        self.no_structure_adjustment || self.no_resource_allocation || self.no_population_inheritance
    }
}

/// Parameters of one optimization run. Unset budgets derive from `n`, `m`
/// and `D`: `I_bas = I_add = 10n`, `MaxFEs = 30000m + 5000D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar", default, deny_unknown_fields)]
pub struct RunConfig<T> {
    pub n: usize,
    pub p_m: f64,
    pub p_z: f64,
    pub alpha_ctrl: T,
    pub theta: T,
    #[serde(rename = "M")]
    pub day_len: usize,
    #[serde(rename = "D")]
    pub days: usize,
    /// Rounds between structure adjustments.
    #[serde(rename = "L")]
    pub period: usize,
    #[serde(rename = "I_bas")]
    pub i_bas: Option<usize>,
    #[serde(rename = "I_add")]
    pub i_add: Option<usize>,
    #[serde(rename = "MaxFEs")]
    pub max_fes: Option<usize>,
    pub seed: u64,
    pub ablations: Ablations,
    pub eval_mode: EvalMode,
    pub ref_policy: RefPolicy<T>,
    pub delta_const: T,
    pub count_interday_edges: bool,
    pub segment_omega: OmegaScope,
    /// Keep intermediate components' content when the structure shifts
    /// instead of churning one day block each.
    pub preserve_intermediate_days: bool,
    /// Re-evaluate a component's cached objectives at the start of its
    /// step when other components changed the context since, paid from
    /// the step's own budget.
    pub refresh_stale: bool,
    /// Cluster index per component; defaults to instance order.
    pub component_order: Option<Vec<usize>>,
    pub archive_capacity: Option<usize>,
}

impl<T: Scalar> Default for RunConfig<T> {
    fn default() -> Self {
        Self {
            n: 100,
            p_m: 0.3,
            p_z: 0.3,
            alpha_ctrl: T::of(0.8),
            theta: T::of(10_000.0),
            day_len: 5,
            days: 0,
            period: 8,
            i_bas: None,
            i_add: None,
            max_fes: None,
            seed: 0,
            ablations: Ablations::default(),
            eval_mode: EvalMode::Context,
            ref_policy: RefPolicy::default(),
            delta_const: T::of(1e-12),
            count_interday_edges: true,
            segment_omega: OmegaScope::Local,
            preserve_intermediate_days: false,
            refresh_stale: true,
            component_order: None,
            archive_capacity: None,
        }
    }
}

impl<T: Scalar> RunConfig<T> {
    pub fn with_days(days: usize) -> Self {
        Self { days, ..Self::default() }
    }

    pub fn i_bas_value(&self) -> usize {
        self.i_bas.unwrap_or(10 * self.n)
    }

    pub fn i_add_value(&self) -> usize {
        self.i_add.unwrap_or(10 * self.n)
    }

    pub fn max_fes_for(&self, m: usize) -> usize {
        self.max_fes.unwrap_or(30_000 * m + 5_000 * self.days)
    }

    pub fn eval_config(&self) -> EvalConfig<T> {
        EvalConfig {
            alpha_ctrl: self.alpha_ctrl,
            theta: self.theta,
            eval_mode: self.eval_mode,
            count_interday_edges: self.count_interday_edges,
            segment_omega: self.segment_omega,
        }
    }

    /// Checks the configuration against an instance with `m` clusters.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("n", "population size must be at least 2"));
        }
        check_probability("p_m", self.p_m)?;
        check_probability("p_z", self.p_z)?;
        self.eval_config().validate()?;
        if self.day_len == 0 {
            return Err(Error::invalid("M", "must be at least 1"));
        }
        if self.days < m {
            return Err(Error::TooFewDays(self.days, m));
        }
        if self.period == 0 {
            return Err(Error::invalid("L", "must be at least 1"));
        }
        if !(self.delta_const > T::zero()) {
            return Err(Error::invalid("delta_const", "must be positive"));
        }
        if self.i_bas_value() + self.i_add_value() < self.n {
            return Err(Error::invalid("I_bas", "I_bas + I_add must cover one generation of n evaluations"));
        }
        let max_fes = self.max_fes_for(m);
        if max_fes < m * self.n {
            return Err(Error::invalid(
                "MaxFEs",
                format!("{max_fes} cannot cover the initial evaluation of {m} x {} individuals", self.n),
            ));
        }
        if let Some(order) = &self.component_order {
            let mut seen = order.clone();
            seen.sort_unstable();
            if seen != (0..m).collect::<Vec<_>>() {
                return Err(Error::invalid("component_order", "must be a permutation of the cluster indices"));
            }
        }
        if self.archive_capacity == Some(0) {
            return Err(Error::invalid("archive_capacity", "must be positive"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
