//! Driver intervention performance assessment: did the driver do better or
//! worse than expected after taking over?

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::controller::WarningLevel;
use crate::error::{Error, Result};
use crate::inference::standard_normal_cdf;

/// Expected versus realized Manual utility over the horizon after an RtI.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterventionRecord {
    pub psi_manual: f64,
    pub realized_utility: f64,
}

impl InterventionRecord {
    pub fn new(psi_manual: f64, realized_utility: f64) -> Result<Self> {
        if !psi_manual.is_finite() || !realized_utility.is_finite() {
            return Err(Error::InvalidArgument("intervention utilities must be finite".into()));
        }
        Ok(Self { psi_manual, realized_utility })
    }

    /// Positive when the driver did worse than expected.
    pub fn shortfall(&self) -> f64 {
        self.psi_manual - self.realized_utility
    }

    pub fn underperformed(&self) -> bool {
        self.shortfall() > 0.0
    }
}

/// Beta posterior on the probability `q` that an intervention underperforms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaBinomialDipa {
    pub d: f64,
    pub e: f64,
}

impl BetaBinomialDipa {
    pub fn new(d: f64, e: f64) -> Result<Self> {
        if !(d > 0.0 && e > 0.0 && d.is_finite() && e.is_finite()) {
            return Err(Error::InvalidArgument(format!("Beta shapes ({d}, {e}) must be positive")));
        }
        Ok(Self { d, e })
    }

    pub fn record(self, record: &InterventionRecord) -> Self {
        if record.underperformed() {
            Self { d: self.d + 1.0, ..self }
        } else {
            Self { e: self.e + 1.0, ..self }
        }
    }

    pub fn mean(&self) -> f64 {
        self.d / (self.d + self.e)
    }

    /// Pr(q >= beta).
    pub fn underperformance_tail(&self, beta: f64) -> Result<f64> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::InvalidArgument(format!("threshold {beta} must lie in (0, 1)")));
        }
        Ok((1.0 - beta_reg(self.d, self.e, beta)).clamp(0.0, 1.0))
    }
}

/// Normal prior on the mean shortfall with known observation variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalNormalDipa {
    pub mu0: f64,
    pub tau0_sq: f64,
    pub sigma_sq: f64,
    pub n: u64,
    pub zeta_sum: f64,
}

impl NormalNormalDipa {
    pub fn new(mu0: f64, tau0_sq: f64, sigma_sq: f64) -> Result<Self> {
        if !mu0.is_finite() || !(tau0_sq > 0.0) || !(sigma_sq > 0.0) {
            return Err(Error::InvalidArgument(
                "normal DIPA needs a finite prior mean and positive variances".into(),
            ));
        }
        Ok(Self { mu0, tau0_sq, sigma_sq, n: 0, zeta_sum: 0.0 })
    }

    pub fn record(self, record: &InterventionRecord) -> Self {
        Self {
            n: self.n + 1,
            zeta_sum: self.zeta_sum + record.shortfall(),
            ..self
        }
    }

    pub fn posterior_mean(&self) -> f64 {
        let n = self.n as f64;
        (self.sigma_sq * self.mu0 + self.tau0_sq * self.zeta_sum) / (n * self.tau0_sq + self.sigma_sq)
    }

    pub fn posterior_variance(&self) -> f64 {
        let n = self.n as f64;
        self.sigma_sq * self.tau0_sq / (n * self.tau0_sq + self.sigma_sq)
    }

    /// Posterior Pr(mu > 0): the driver tends to underperform.
    pub fn prob_underperforming(&self) -> f64 {
        standard_normal_cdf(self.posterior_mean() / self.posterior_variance().sqrt())
    }
}

/// Affine map from horizon utility onto [0, 1].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UtilityScale {
    pub min: f64,
    pub max: f64,
}

impl UtilityScale {
    pub fn for_horizon(horizon: usize, crash_penalty: f64, best_cell_value: f64) -> Self {
        let k = horizon as f64;
        Self { min: k * crash_penalty, max: k * best_cell_value }
    }

    /// Saturates outside the range.
    pub fn rescale(&self, u: f64) -> f64 {
        ((u - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

fn check_unit(u: f64) -> Result<()> {
    if (0.0..=1.0).contains(&u) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("utility {u} must be rescaled into [0, 1]")))
    }
}

/// `u^(1/q)` with the posterior-mean plug-in for `q`.
pub fn risk_adjusted_discrete(u: f64, model: &BetaBinomialDipa) -> Result<f64> {
    check_unit(u)?;
    Ok(u.powf(1.0 / model.mean()))
}

/// `u^(1/(1+mu))` when the posterior mean shortfall is positive, else `u`.
pub fn risk_adjusted_continuous(u: f64, model: &NormalNormalDipa) -> Result<f64> {
    check_unit(u)?;
    let mu = model.posterior_mean();
    Ok(if mu <= 0.0 { u } else { u.powf(1.0 / (1.0 + mu)) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DipaConfig {
    pub enabled: bool,
    /// Force a stop instead of an RtI when Pr(mu > 0) exceeds `gate_cutoff`.
    pub gate: bool,
    pub d0: f64,
    pub e0: f64,
    pub mu0: f64,
    pub tau0_sq: f64,
    pub sigma_sq: f64,
    pub beta: f64,
    pub warn: f64,
    pub crit: f64,
    pub continuous_cutoff: f64,
    pub gate_cutoff: f64,
}

impl Default for DipaConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            gate: false,
            d0: 1.0,
            e0: 1.0,
            mu0: 0.0,
            tau0_sq: 1.0,
            sigma_sq: 1.0,
            beta: 0.5,
            warn: 0.5,
            crit: 0.8,
            continuous_cutoff: 0.5,
            gate_cutoff: 0.9,
        }
    }
}

impl DipaConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let prob = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::config(format!("{path}.{name}"), format!("{v} is not a probability")))
            }
        };
        prob("warn", self.warn)?;
        prob("crit", self.crit)?;
        prob("continuous_cutoff", self.continuous_cutoff)?;
        prob("gate_cutoff", self.gate_cutoff)?;
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::config(format!("{path}.beta"), "must lie in (0, 1)"));
        }
        if self.warn > self.crit {
            return Err(Error::config(format!("{path}.warn"), "warn threshold exceeds crit"));
        }
        BetaBinomialDipa::new(self.d0, self.e0).map_err(|e| Error::config(format!("{path}.d0"), e.to_string()))?;
        NormalNormalDipa::new(self.mu0, self.tau0_sq, self.sigma_sq)
            .map_err(|e| Error::config(format!("{path}.tau0_sq"), e.to_string()))?;
        Ok(())
    }
}

/// Both DIPA posteriors, updated together.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipaState {
    pub discrete: BetaBinomialDipa,
    pub continuous: NormalNormalDipa,
}

impl DipaState {
    pub fn from_config(cfg: &DipaConfig) -> Result<Self> {
        Ok(Self {
            discrete: BetaBinomialDipa::new(cfg.d0, cfg.e0)?,
            continuous: NormalNormalDipa::new(cfg.mu0, cfg.tau0_sq, cfg.sigma_sq)?,
        })
    }

    pub fn record(&mut self, record: &InterventionRecord) {
        self.discrete = self.discrete.record(record);
        self.continuous = self.continuous.record(record);
    }
}

/// Discrete rule first (critical, then standard); the continuous rule can
/// only raise a standard warning.
pub fn dipa_warning(state: &DipaState, cfg: &DipaConfig) -> Result<Option<WarningLevel>> {
    let tail = state.discrete.underperformance_tail(cfg.beta)?;
    if tail > cfg.crit {
        return Ok(Some(WarningLevel::Critical));
    }
    if tail > cfg.warn || state.continuous.prob_underperforming() > cfg.continuous_cutoff {
        return Ok(Some(WarningLevel::Standard));
    }
    Ok(None)
}
