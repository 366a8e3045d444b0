use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Static map from pedal deflections to longitudinal acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowertrainParams {
    /// Acceleration at full accelerator, m/s².
    pub max_accel: f64,
    /// Deceleration at full brake, m/s².
    pub max_decel: f64,
    /// Coast deceleration with both pedals released, m/s².
    pub engine_brake: f64,
    /// Linear drag coefficient, 1/s.
    pub drag: f64,
}

impl Default for PowertrainParams {
    fn default() -> Self {
        Self {
            max_accel: 2.5,
            max_decel: 6.0,
            engine_brake: 0.3,
            drag: 0.05,
        }
    }
}

impl PowertrainParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.max_accel, self.max_decel, self.engine_brake, self.drag];
        if all.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
            return Err(Error::InvalidConfig("powertrain constants must be >= 0".into()));
        }
        if !(self.max_decel > self.max_accel) {
            return Err(Error::InvalidConfig(
                "full brake must be stronger than full throttle".into(),
            ));
        }
        Ok(())
    }

    /// Deceleration the car experiences with both pedals released.
    pub fn coast_accel(&self, v: f64) -> f64 {
        if v > 0.0 {
            -self.engine_brake - self.drag * v
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowertrainOutput {
    pub accel: f64,
    /// Both pedals were pressed; the accelerator was ignored.
    pub both_pressed: bool,
}

pub fn powertrain_accel(s_acc: f64, s_brake: f64, v: f64, p: &PowertrainParams) -> PowertrainOutput {
    let s_acc = s_acc.clamp(0.0, 1.0);
    let s_brake = s_brake.clamp(0.0, 1.0);
    let both_pressed = s_acc > 0.0 && s_brake > 0.0;
    let s_acc = if s_brake > 0.0 { 0.0 } else { s_acc };
    let coast = if s_acc == 0.0 && s_brake == 0.0 && v > 0.0 {
        p.engine_brake
    } else {
        0.0
    };
    PowertrainOutput {
        accel: p.max_accel * s_acc - p.max_decel * s_brake - coast - p.drag * v,
        both_pressed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn map_examples() {
        let p = PowertrainParams::default();
        assert_eq!(powertrain_accel(0.0, 0.0, 0.0, &p).accel, 0.0);
        assert_abs_diff_eq!(powertrain_accel(1.0, 0.0, 0.0, &p).accel, 2.5);
        assert_abs_diff_eq!(powertrain_accel(0.0, 1.0, 5.0, &p).accel, -6.25, epsilon = 1e-12);
        assert_abs_diff_eq!(powertrain_accel(0.0, 0.0, 4.0, &p).accel, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn brake_wins_when_both_pressed() {
        let p = PowertrainParams::default();
        let out = powertrain_accel(1.0, 0.5, 2.0, &p);
        assert!(out.both_pressed);
        assert_abs_diff_eq!(out.accel, -3.1, epsilon = 1e-12);
    }

    #[test]
    fn validation() {
        assert!(PowertrainParams::default().validate().is_ok());
        let p = PowertrainParams { max_decel: 2.0, ..Default::default() };
        assert!(p.validate().is_err());
    }
}
