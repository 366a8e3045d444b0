//! Scenario configuration, loadable from a commented TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::follower_stopper::FollowerStopperParams;
use crate::human::HumanParams;
use crate::pedal::{Condition, PedalParams, PowertrainParams};
use crate::ring::RingConfig;
use crate::traffic::IidmAccParams;

/// Thresholds used by the session metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Speed at or below which a car counts as standing, m/s.
    pub standstill_speed: f64,
    /// Normalized brake deflection that counts as a press.
    pub brake_threshold: f64,
    /// Presses closer than this to the previous counted press merge, s.
    pub brake_debounce: f64,
    /// Upper bound of the jam lifetime, s.
    pub jam_lifetime_cap: f64,
    /// Divisor turning origin crossings into vehicles per minute.
    pub throughput_minutes: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            standstill_speed: 0.05,
            brake_threshold: 0.02,
            brake_debounce: 0.2,
            jam_lifetime_cap: 405.0,
            throughput_minutes: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub condition: Condition,
    /// Seed of the driver's noise.
    pub seed: u64,
    /// Seed of the per-car traffic jitter; falls back to `seed`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traffic_seed: Option<u64>,
    /// Session length for the manual condition, s.
    pub duration: f64,
    /// Start-up transient excluded from the stability metrics, s.
    pub transient: f64,
    /// Time of the silent gap-sensor failure, s.
    pub failure_time: f64,
    /// Observation window after the failure, s.
    pub failure_window: f64,
    pub dt: f64,
    /// Relative spread of per-car traffic parameter jitter.
    pub traffic_jitter: f64,
    pub ring: RingConfig,
    pub traffic: IidmAccParams,
    pub follower_stopper: FollowerStopperParams,
    pub pedals: PedalParams,
    pub powertrain: PowertrainParams,
    pub human: HumanParams,
    pub metrics: MetricsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            condition: Condition::Manual,
            seed: 0,
            traffic_seed: None,
            duration: 480.0,
            transient: 75.0,
            failure_time: 480.0,
            failure_window: 15.0,
            dt: 0.01,
            traffic_jitter: 0.05,
            ring: RingConfig::default(),
            traffic: IidmAccParams::default(),
            follower_stopper: FollowerStopperParams::default(),
            pedals: PedalParams::default(),
            powertrain: PowertrainParams::default(),
            human: HumanParams::default(),
            metrics: MetricsConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn with_condition(mut self, condition: Condition) -> Self {
        self.condition = condition;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn traffic_seed(&self) -> u64 {
        self.traffic_seed.unwrap_or(self.seed)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig("dt must be positive".into()));
        }
        if !(self.duration > 0.0) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        if !(self.transient >= 0.0 && self.transient < self.duration) {
            return Err(Error::InvalidConfig(
                "transient must be in [0, duration)".into(),
            ));
        }
        if self.condition.has_failure() && self.failure_time > self.duration {
            return Err(Error::InvalidConfig(
                "failure_time must not exceed duration".into(),
            ));
        }
        if self.failure_window < 0.0 {
            return Err(Error::InvalidConfig("failure_window must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.traffic_jitter) {
            return Err(Error::InvalidConfig("traffic_jitter must be in [0, 1)".into()));
        }
        self.traffic.validate()?;
        self.follower_stopper.validate()?;
        self.pedals.validate()?;
        self.powertrain.validate()?;
        self.human.validate()?;
        Ok(())
    }

    /// Time at which the session stops when nothing collides, s.
    pub fn end_time(&self) -> f64 {
        if self.condition.has_failure() {
            self.failure_time + self.failure_window
        } else {
            self.duration
        }
    }

    pub fn total_steps(&self) -> u64 {
        (self.end_time() / self.dt).round() as u64
    }
}

/// Default configuration as a commented TOML document.
pub fn default_config_toml() -> String {
    format!(
        "# Ring-road session configuration.\n\
         # Every key is optional; omitted keys take the defaults shown here.\n\
         # condition: manual | haptic | automated\n\n{}",
        ScenarioConfig::default().to_toml_string()
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        ScenarioConfig::default().validate().unwrap();
        for c in Condition::ALL {
            ScenarioConfig::default().with_condition(c).validate().unwrap();
        }
    }

    #[test]
    fn toml_round_trip_with_comments() {
        let text = default_config_toml();
        let cfg = ScenarioConfig::from_toml_str(&text).unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = ScenarioConfig::from_toml_str(
            "condition = \"haptic\"\nseed = 9\n[human]\nsupervisory_delay = 1.0\n",
        )
        .unwrap();
        assert_eq!(cfg.condition, Condition::Haptic);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.human.supervisory_delay, 1.0);
        assert_eq!(cfg.human.reaction_delay, 0.7);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ScenarioConfig::from_toml_str("dt = 0.0").is_err());
        assert!(ScenarioConfig::from_toml_str("transient = 500.0").is_err());
        assert!(ScenarioConfig::from_toml_str("nonsense = 1").is_err());
        assert!(ScenarioConfig::from_toml_str(
            "condition = \"automated\"\nfailure_time = 600.0"
        )
        .is_err());
    }

    #[test]
    fn end_times() {
        let c = ScenarioConfig::default();
        assert_eq!(c.end_time(), 480.0);
        assert_eq!(c.total_steps(), 48_000);
        let a = c.with_condition(Condition::Automated);
        assert_eq!(a.end_time(), 495.0);
        assert_eq!(a.total_steps(), 49_500);
    }
}
