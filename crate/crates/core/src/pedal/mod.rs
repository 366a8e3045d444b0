//! Virtual control-loader pedals and the automation's pedal controllers.
//!
//! The chain from commanded speed to vehicle acceleration is
//! action arbitration → PID target positions → (haptic stiffness | servo) →
//! spring-damper pedal plant → powertrain.

mod arbitration;
mod authority;
mod pid;
mod plant;
mod powertrain;

use serde::{Deserialize, Serialize};

pub use arbitration::{select_action, Action, COAST_BAND};
pub use authority::{
    resolve_authority, AuthorityOutput, Condition, HumanForces, PedalInput, PedalPair,
};
pub use pid::{pid_step, PidGains, PidState};
pub use plant::{haptic_stiffness, pedal_dynamics_step, pedal_force, HapticGains, PedalState};
pub use powertrain::{powertrain_accel, PowertrainOutput, PowertrainParams};

use crate::error::{Error, Result};

/// Mechanical and control constants of the pedal box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PedalParams {
    /// Full travel, rad. Normalized deflection 1.0 maps here.
    pub max_travel: f64,
    /// Base spring stiffness K, N/rad.
    pub stiffness: f64,
    /// Damping b, N·s/rad.
    pub damping: f64,
    /// Virtual inertia I, kg·m².
    pub inertia: f64,
    /// Floor on the haptic stiffness, N/rad.
    pub min_stiffness: f64,
    pub haptic: HapticGains,
    /// Human force above which an automated pedal is overridden, N.
    pub override_force: f64,
    /// Natural frequency of the automated position servo, rad/s.
    pub servo_bandwidth: f64,
    /// Normalized deflection below which a pedal counts as released.
    pub release_threshold: f64,
    /// Plant integration sub-steps per simulation step.
    pub substeps: u32,
    pub accel_gains: PidGains,
    pub brake_gains: PidGains,
    /// Cutoff of the first-order filter on the PID derivative, Hz.
    pub derivative_cutoff_hz: f64,
    /// Bound on the PID integral accumulator, (m/s)·s.
    pub integral_bound: f64,
}

impl Default for PedalParams {
    fn default() -> Self {
        Self {
            max_travel: 0.35,
            stiffness: 60.0,
            damping: 5.0,
            inertia: 0.05,
            min_stiffness: 5.0,
            haptic: HapticGains::default(),
            override_force: 20.0,
            servo_bandwidth: 30.0,
            release_threshold: 0.005,
            substeps: 10,
            accel_gains: PidGains::ACCELERATOR,
            brake_gains: PidGains::BRAKE,
            derivative_cutoff_hz: 10.0,
            integral_bound: 25.0,
        }
    }
}

impl PedalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.max_travel,
            self.stiffness,
            self.damping,
            self.inertia,
            self.min_stiffness,
            self.servo_bandwidth,
            self.derivative_cutoff_hz,
            self.integral_bound,
        ];
        if positive.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig("pedal constants must be positive".into()));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidConfig("pedal substeps must be >= 1".into()));
        }
        if self.override_force < 0.0 || !(0.0..1.0).contains(&self.release_threshold) {
            return Err(Error::InvalidConfig(
                "override force must be >= 0 and release threshold in [0, 1)".into(),
            ));
        }
        self.haptic.validate()
    }
}
