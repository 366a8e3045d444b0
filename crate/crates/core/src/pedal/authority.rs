use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::plant::{haptic_stiffness, pedal_dynamics_step, PedalState};
use super::PedalParams;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Manual,
    Haptic,
    Automated,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Manual, Condition::Haptic, Condition::Automated];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Manual => "manual",
            Condition::Haptic => "haptic",
            Condition::Automated => "automated",
        }
    }

    /// Whether the condition runs the silent-failure protocol.
    pub fn has_failure(self) -> bool {
        !matches!(self, Condition::Manual)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "manual" => Ok(Condition::Manual),
            "haptic" => Ok(Condition::Haptic),
            "automated" => Ok(Condition::Automated),
            other => Err(Error::InvalidConfig(format!(
                "unknown condition {other:?} (expected manual, haptic or automated)"
            ))),
        }
    }
}

/// What the driver's foot does to one pedal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PedalInput {
    /// A fixed pushing force, N.
    Force { newtons: f64 },
    /// A compliant limb: force `stiffness·(reference − Sᵖ)`, never pulling.
    Limb { reference: f64, stiffness: f64 },
}

impl PedalInput {
    pub const NONE: PedalInput = PedalInput::Force { newtons: 0.0 };

    pub fn force_at(&self, position: f64) -> f64 {
        match *self {
            PedalInput::Force { newtons } => newtons.max(0.0),
            PedalInput::Limb { reference, stiffness } => (stiffness * (reference - position)).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanForces {
    pub accel: PedalInput,
    pub brake: PedalInput,
}

impl HumanForces {
    pub const NONE: HumanForces = HumanForces {
        accel: PedalInput::NONE,
        brake: PedalInput::NONE,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedalPair {
    pub accel: PedalState,
    pub brake: PedalState,
}

impl PedalPair {
    pub fn at_rest(params: &PedalParams) -> Self {
        Self {
            accel: PedalState::at_rest(params),
            brake: PedalState::at_rest(params),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuthorityOutput {
    /// Effective normalized accelerator deflection sent to the powertrain.
    pub s_acc: f64,
    /// Effective normalized brake deflection sent to the powertrain.
    pub s_brake: f64,
    /// Human force on each pedal at the end of the step, N.
    pub force_acc: f64,
    pub force_brake: f64,
    /// The human held authority of that pedal in the automated condition.
    pub override_acc: bool,
    pub override_brake: bool,
}

/// Critically damped position servo toward `target` (rad).
fn servo_step(p: &PedalState, target: f64, omega: f64, dt: f64) -> PedalState {
    let accel = omega * omega * (target - p.position) - 2.0 * omega * p.velocity;
    let velocity = p.velocity + dt * accel;
    let position = (p.position + dt * velocity).clamp(0.0, p.max_travel);
    let velocity = if position == 0.0 || position == p.max_travel {
        0.0
    } else {
        velocity
    };
    PedalState {
        position,
        velocity,
        current_stiffness: p.stiffness,
        ..*p
    }
}

/// Advances both pedals over one simulation step under the condition's
/// authority rules and returns the deflections the powertrain acts on.
///
/// `targets` are the automation's normalized pedal targets.
pub fn resolve_authority(
    condition: Condition,
    human: &HumanForces,
    targets: (f64, f64),
    pedals: &mut PedalPair,
    dt: f64,
    params: &PedalParams,
) -> AuthorityOutput {
    let n = params.substeps.max(1);
    let h = dt / n as f64;
    let travel = params.max_travel;
    let (target_acc, target_brake) = (
        targets.0.clamp(0.0, 1.0) * travel,
        targets.1.clamp(0.0, 1.0) * travel,
    );
    let mut override_acc = false;
    let mut override_brake = false;

    for _ in 0..n {
        let f_acc = human.accel.force_at(pedals.accel.position);
        let f_brake = human.brake.force_at(pedals.brake.position);
        match condition {
            Condition::Manual => {
                pedals.accel.current_stiffness = params.stiffness;
                pedals.brake.current_stiffness = params.stiffness;
                pedals.accel = pedal_dynamics_step(&pedals.accel, f_acc, h);
                pedals.brake = pedal_dynamics_step(&pedals.brake, f_brake, h);
            }
            Condition::Haptic => {
                pedals.accel.current_stiffness = haptic_stiffness(
                    pedals.accel.position,
                    target_acc,
                    params.stiffness,
                    &params.haptic,
                    params.min_stiffness,
                );
                pedals.brake.current_stiffness = params.stiffness;
                pedals.accel = pedal_dynamics_step(&pedals.accel, f_acc, h);
                pedals.brake = pedal_dynamics_step(&pedals.brake, f_brake, h);
            }
            Condition::Automated => {
                override_acc = f_acc > params.override_force;
                override_brake = f_brake > params.override_force;
                pedals.accel = if override_acc {
                    pedals.accel.current_stiffness = params.stiffness;
                    pedal_dynamics_step(&pedals.accel, f_acc, h)
                } else {
                    servo_step(&pedals.accel, target_acc, params.servo_bandwidth, h)
                };
                pedals.brake = if override_brake {
                    pedals.brake.current_stiffness = params.stiffness;
                    pedal_dynamics_step(&pedals.brake, f_brake, h)
                } else {
                    servo_step(&pedals.brake, target_brake, params.servo_bandwidth, h)
                };
            }
        }
    }

    let threshold = params.release_threshold;
    let effective = |p: &PedalState| {
        let s = p.normalized();
        if s < threshold {
            0.0
        } else {
            s
        }
    };
    let s_brake = effective(&pedals.brake);
    let s_acc = if s_brake > 0.0 { 0.0 } else { effective(&pedals.accel) };
    AuthorityOutput {
        s_acc,
        s_brake,
        force_acc: human.accel.force_at(pedals.accel.position),
        force_brake: human.brake.force_at(pedals.brake.position),
        override_acc,
        override_brake,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn condition_round_trip() {
        for c in Condition::ALL {
            assert_eq!(c.as_str().parse::<Condition>().unwrap(), c);
        }
        assert!("autopilot".parse::<Condition>().is_err());
    }

    #[test]
    fn automated_servo_tracks_target() {
        let params = PedalParams::default();
        let mut pedals = PedalPair::at_rest(&params);
        let mut out = None;
        for _ in 0..100 {
            out = Some(resolve_authority(
                Condition::Automated,
                &HumanForces::NONE,
                (0.4, 0.0),
                &mut pedals,
                0.01,
                &params,
            ));
        }
        let out = out.unwrap();
        assert!((out.s_acc - 0.4).abs() < 0.05 * 0.4, "s_acc {}", out.s_acc);
        assert_eq!(out.s_brake, 0.0);
    }

    #[test]
    fn automated_human_brake_overrides() {
        let params = PedalParams::default();
        let mut pedals = PedalPair::at_rest(&params);
        let human = HumanForces {
            accel: PedalInput::NONE,
            brake: PedalInput::Force { newtons: 50.0 },
        };
        let mut out = None;
        for _ in 0..50 {
            out = Some(resolve_authority(
                Condition::Automated,
                &human,
                (1.0, 0.0),
                &mut pedals,
                0.01,
                &params,
            ));
        }
        let out = out.unwrap();
        assert!(out.override_brake);
        assert!(out.s_brake > 0.5);
        assert_eq!(out.s_acc, 0.0);
    }

    #[test]
    fn manual_keeps_base_stiffness() {
        let params = PedalParams::default();
        let mut pedals = PedalPair::at_rest(&params);
        let human = HumanForces {
            accel: PedalInput::Limb { reference: 0.3, stiffness: 600.0 },
            brake: PedalInput::NONE,
        };
        for _ in 0..200 {
            resolve_authority(Condition::Manual, &human, (0.0, 1.0), &mut pedals, 0.01, &params);
            assert_eq!(pedals.accel.current_stiffness, params.stiffness);
            assert_eq!(pedals.brake.current_stiffness, params.stiffness);
        }
        // quasi-static balance 600·(0.3 − S) = 60·S
        assert!((pedals.accel.position - 600.0 * 0.3 / 660.0).abs() < 1e-3);
    }

    #[test]
    fn haptic_stiffens_accelerator_above_target() {
        let params = PedalParams::default();
        let mut pedals = PedalPair::at_rest(&params);
        let human = HumanForces {
            accel: PedalInput::Limb { reference: 0.3, stiffness: 600.0 },
            brake: PedalInput::NONE,
        };
        for _ in 0..200 {
            resolve_authority(Condition::Haptic, &human, (0.0, 0.0), &mut pedals, 0.01, &params);
        }
        assert!(pedals.accel.current_stiffness > params.stiffness);
        assert!(pedals.accel.position < 600.0 * 0.3 / 660.0);
        assert_eq!(pedals.brake.current_stiffness, params.stiffness);
    }

    proptest! {
        #[test]
        fn effective_pedals_are_exclusive(
            cond in 0usize..3,
            ra in 0.0..0.5f64,
            rb in 0.0..0.5f64,
            ta in 0.0..1.0f64,
            tb in 0.0..1.0f64,
        ) {
            let params = PedalParams::default();
            let mut pedals = PedalPair::at_rest(&params);
            let human = HumanForces {
                accel: PedalInput::Limb { reference: ra, stiffness: 600.0 },
                brake: PedalInput::Limb { reference: rb, stiffness: 600.0 },
            };
            for _ in 0..30 {
                let out = resolve_authority(Condition::ALL[cond], &human, (ta, tb), &mut pedals, 0.01, &params);
                prop_assert_eq!(out.s_acc * out.s_brake, 0.0);
                prop_assert!((0.0..=1.0).contains(&out.s_acc));
                prop_assert!((0.0..=1.0).contains(&out.s_brake));
            }
        }
    }
}
