use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stiffness modulation gains, N/rad².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HapticGains {
    /// Applied when the pedal is deeper than the target (push back).
    pub release: f64,
    /// Applied when the pedal is shallower than the target (give way).
    pub press: f64,
}

impl Default for HapticGains {
    fn default() -> Self {
        Self {
            release: 300.0,
            press: 30.0,
        }
    }
}

impl HapticGains {
    pub fn validate(&self) -> Result<()> {
        if self.release < 0.0 || self.press < 0.0 || self.release < self.press {
            return Err(Error::InvalidConfig(
                "haptic gains must be non-negative with release >= press".into(),
            ));
        }
        Ok(())
    }
}

/// Accelerator stiffness under haptic shared control,
/// `K + Kʰ·(Sᵖ − Sᵗᵃʳᵍᵉᵗ)`, floored at `min_stiffness`.
pub fn haptic_stiffness(
    position: f64,
    target: f64,
    base: f64,
    gains: &HapticGains,
    min_stiffness: f64,
) -> f64 {
    let offset = position - target;
    let gain = if offset > 0.0 { gains.release } else { gains.press };
    (base + gain * offset).max(min_stiffness)
}

/// Spring-damper reaction force of the pedal, N.
pub fn pedal_force(stiffness: f64, position: f64, velocity: f64, damping: f64) -> f64 {
    stiffness * position + velocity * damping
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedalState {
    /// Angle Sᵖ, rad, in `[0, max_travel]`.
    pub position: f64,
    /// Angular speed vᵖ, rad/s.
    pub velocity: f64,
    /// Base stiffness K, N/rad.
    pub stiffness: f64,
    pub damping: f64,
    pub inertia: f64,
    /// Stiffness currently rendered (Kʰᶜ), N/rad.
    pub current_stiffness: f64,
    pub max_travel: f64,
}

impl PedalState {
    pub fn at_rest(params: &super::PedalParams) -> Self {
        Self {
            position: 0.0,
            velocity: 0.0,
            stiffness: params.stiffness,
            damping: params.damping,
            inertia: params.inertia,
            current_stiffness: params.stiffness,
            max_travel: params.max_travel,
        }
    }

    pub fn normalized(&self) -> f64 {
        self.position / self.max_travel
    }

    pub fn reaction_force(&self) -> f64 {
        pedal_force(self.current_stiffness, self.position, self.velocity, self.damping)
    }

    /// `½I(vᵖ)² + ½Kʰᶜ(Sᵖ)²`.
    pub fn energy(&self) -> f64 {
        0.5 * self.inertia * self.velocity * self.velocity
            + 0.5 * self.current_stiffness * self.position * self.position
    }
}

/// Advances `I·v̇ᵖ = F − (Kʰᶜ·Sᵖ + b·vᵖ)` by one implicit (backward Euler) step
/// and applies the travel stops.
pub fn pedal_dynamics_step(pedal: &PedalState, applied: f64, dt: f64) -> PedalState {
    debug_assert!(dt > 0.0);
    let k = pedal.current_stiffness;
    let h = dt / pedal.inertia;
    let velocity = (pedal.velocity + h * (applied - k * pedal.position))
        / (1.0 + h * pedal.damping + h * dt * k);
    let position = pedal.position + dt * velocity;
    let mut next = PedalState {
        position,
        velocity,
        ..*pedal
    };
    if position <= 0.0 {
        next.position = 0.0;
        next.velocity = 0.0;
    } else if position >= pedal.max_travel {
        next.position = pedal.max_travel;
        next.velocity = 0.0;
    }
    next
}
