//! Synthetic driver standing in for a participant.
//!
//! The model has three layers: a delayed, noisy car-following intent; a
//! compliant limb that turns intended pedal deflections into forces on the
//! pedal plant; and a supervisory loop that brakes after a delay when the
//! automation drives the car toward its leader.

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pedal::{Condition, PedalState, PowertrainParams};
use crate::traffic::{iidm_accel, IidmAccParams};

pub const INTENT_MIN: f64 = -6.0;
pub const INTENT_MAX: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HumanParams {
    /// Perception-reaction delay τ_h, s.
    pub reaction_delay: f64,
    /// Delay from hazard onset to a supervisory brake intervention τ_sup, s.
    pub supervisory_delay: f64,
    /// Limb stiffness, N/rad.
    pub limb_stiffness: f64,
    /// Ornstein–Uhlenbeck intensity σ, m/s² per √s.
    pub noise_sigma: f64,
    /// Ornstein–Uhlenbeck mean-reversion rate θ, 1/s.
    pub noise_theta: f64,
    /// Personal car-following parameters (IIDM form, coolness unused).
    pub following: IidmAccParams,
    /// Closing speed that counts as a hazard while the automation accelerates, m/s.
    pub hazard_closing_speed: f64,
    /// Gap under which a closing automation is noticed as a hazard, m.
    pub intervention_gap: f64,
    /// Relative spread of per-participant parameter jitter.
    pub jitter: f64,
}

impl Default for HumanParams {
    fn default() -> Self {
        Self {
            reaction_delay: 0.7,
            supervisory_delay: 2.5,
            limb_stiffness: 600.0,
            noise_sigma: 0.3,
            noise_theta: 0.5,
            following: IidmAccParams {
                desired_speed: 7.0,
                time_headway: 1.5,
                min_gap: 2.0,
                max_accel: 1.5,
                comfortable_decel: 2.0,
                accel_exponent: 4.0,
                coolness: 0.0,
            },
            hazard_closing_speed: 1.0,
            intervention_gap: 10.0,
            jitter: 0.15,
        }
    }
}

impl HumanParams {
    pub fn validate(&self) -> Result<()> {
        if self.reaction_delay < 0.0 || self.supervisory_delay < 0.0 {
            return Err(Error::InvalidConfig("human delays must be >= 0".into()));
        }
        if !(self.limb_stiffness > 0.0) {
            return Err(Error::InvalidConfig("limb stiffness must be positive".into()));
        }
        if self.noise_sigma < 0.0 || !(self.noise_theta > 0.0) {
            return Err(Error::InvalidConfig(
                "noise sigma must be >= 0 and theta positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::InvalidConfig("jitter must be in [0, 1)".into()));
        }
        self.following.validate()
    }

    /// Draws one participant: every continuous trait except the supervisory
    /// delay is scaled by an independent factor in `[1 − jitter, 1 + jitter]`.
    pub fn sample_participant<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let j = self.jitter;
        let mut scale = |x: f64| {
            if j == 0.0 {
                x
            } else {
                x * rng.random_range(1.0 - j..=1.0 + j)
            }
        };
        let mut p = *self;
        p.reaction_delay = scale(p.reaction_delay);
        p.limb_stiffness = scale(p.limb_stiffness);
        p.noise_sigma = scale(p.noise_sigma);
        p.following.time_headway = scale(p.following.time_headway);
        p.following.min_gap = scale(p.following.min_gap);
        p.following.max_accel = scale(p.following.max_accel);
        p.following.comfortable_decel = scale(p.following.comfortable_decel);
        p
    }
}

/// What the driver perceives about the car ahead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub gap: f64,
    pub speed: f64,
    pub lead_speed: f64,
}

/// Fixed-length delay line over observations.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buf: VecDeque<Observation>,
    delay_steps: usize,
}

impl DelayLine {
    pub fn new(delay: f64, dt: f64) -> Self {
        let delay_steps = (delay / dt).round() as usize;
        Self {
            buf: VecDeque::with_capacity(delay_steps + 1),
            delay_steps,
        }
    }

    /// Pushes the current observation and returns the one from `delay` ago
    /// (the oldest available one during start-up).
    pub fn push(&mut self, obs: Observation) -> Observation {
        self.buf.push_back(obs);
        while self.buf.len() > self.delay_steps + 1 {
            self.buf.pop_front();
        }
        self.buf[0]
    }
}

/// Exactly discretized Ornstein–Uhlenbeck process `dη = −θη dt + σ dW`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuNoise {
    pub value: f64,
    pub sigma: f64,
    pub theta: f64,
}

impl OuNoise {
    pub fn new(sigma: f64, theta: f64) -> Self {
        Self { value: 0.0, sigma, theta }
    }

    pub fn stationary_std(&self) -> f64 {
        self.sigma / (2.0 * self.theta).sqrt()
    }

    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> f64 {
        let decay = (-self.theta * dt).exp();
        let spread = self.sigma * ((1.0 - decay * decay) / (2.0 * self.theta)).sqrt();
        let z: f64 = rng.sample(StandardNormal);
        self.value = self.value * decay + spread * z;
        self.value
    }
}

/// Desired acceleration from a (delayed) observation plus the current noise.
pub fn human_intent(obs: &Observation, params: &HumanParams, noise: f64) -> f64 {
    let gap = obs.gap.max(1e-3);
    let follow = iidm_accel(obs.speed.max(0.0), gap, obs.lead_speed.max(0.0), &params.following)
        .unwrap_or(INTENT_MIN);
    (follow + noise).clamp(INTENT_MIN, INTENT_MAX)
}

/// Inverse powertrain map with pedal exclusivity.
///
/// Demands the car reaches with the accelerator (at least the drag) go to the
/// accelerator; demands between that and the coast deceleration release both
/// pedals; anything harder goes to the brake.
pub fn intent_to_pedals(desired: f64, v: f64, plant: &PowertrainParams) -> (f64, f64) {
    let drag = plant.drag * v;
    if desired >= -drag {
        let s = (desired + drag) / plant.max_accel;
        (s.clamp(0.0, 1.0), 0.0)
    } else if desired >= plant.coast_accel(v) {
        (0.0, 0.0)
    } else {
        let s = (-desired - drag) / plant.max_decel;
        (0.0, s.clamp(0.0, 1.0))
    }
}

/// Force the limb applies while aiming for `reference` (rad), N.
pub fn neuromuscular_pedal(reference: f64, pedal: &PedalState, limb_stiffness: f64) -> f64 {
    limb_stiffness * (reference - pedal.position)
}

/// Limb reference that lands the pedal on `intended` (rad) at the pedal's
/// base stiffness, i.e. the driver's learned feel of an unassisted pedal.
pub fn limb_reference(intended: f64, base_stiffness: f64, limb_stiffness: f64) -> f64 {
    intended * (limb_stiffness + base_stiffness) / limb_stiffness
}

/// Quasi-static pedal angle where the limb force balances a pedal whose
/// stiffness is affine in position, `K(S) = k0 + k1·S`:
/// the root in `[0, max_travel]` of `k1·S² + (k0 + K_limb)·S − K_limb·reference = 0`.
pub fn quasi_static_position(
    reference: f64,
    limb_stiffness: f64,
    k0: f64,
    k1: f64,
    max_travel: f64,
) -> f64 {
    let a = k1;
    let b = k0 + limb_stiffness;
    let c = -limb_stiffness * reference;
    let s = if a.abs() < 1e-12 {
        -c / b
    } else {
        // numerically stable root with the same sign as -c/b
        let disc = (b * b - 4.0 * a * c).max(0.0);
        2.0 * -c / (b + disc.sqrt())
    };
    s.clamp(0.0, max_travel)
}

/// Equilibrium of a limb against the haptic accelerator law.
pub fn haptic_equilibrium(
    reference: f64,
    limb_stiffness: f64,
    base: f64,
    target: f64,
    gains: &crate::pedal::HapticGains,
    max_travel: f64,
) -> f64 {
    // K(S) = base + g·(S − target) on each side of the target
    let solve = |g: f64| quasi_static_position(reference, limb_stiffness, base - g * target, g, max_travel);
    let above = solve(gains.release);
    if above > target {
        return above;
    }
    let below = solve(gains.press);
    if below <= target {
        below
    } else {
        target
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    FullBrake,
}

/// Supervisory reaction to a hazard that started `elapsed` seconds ago.
pub fn failure_response(condition: Condition, elapsed: f64, params: &HumanParams) -> Option<Intervention> {
    match condition {
        Condition::Automated if elapsed >= params.supervisory_delay => Some(Intervention::FullBrake),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupervisorPhase {
    Monitoring,
    HazardNoticed,
    Braking,
    /// The driver has taken the pedals back from the automation.
    InControl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Supervisor {
    pub phase: SupervisorPhase,
    pub hazard_onset: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupervisorEvent {
    HazardOnset,
    Intervention,
    Takeover,
}

impl Default for Supervisor {
    fn default() -> Self {
        Self {
            phase: SupervisorPhase::Monitoring,
            hazard_onset: None,
        }
    }
}

impl Supervisor {
    /// Updates the supervisory state from the true scene at time `t`.
    pub fn update(
        &mut self,
        t: f64,
        obs: &Observation,
        automation_accelerating: bool,
        params: &HumanParams,
    ) -> Option<SupervisorEvent> {
        let closing = obs.speed - obs.lead_speed;
        match self.phase {
            SupervisorPhase::Monitoring => {
                if automation_accelerating
                    && closing > params.hazard_closing_speed
                    && obs.gap < params.intervention_gap
                {
                    self.phase = SupervisorPhase::HazardNoticed;
                    self.hazard_onset = Some(t);
                    return Some(SupervisorEvent::HazardOnset);
                }
                None
            }
            SupervisorPhase::HazardNoticed => {
                let onset = self.hazard_onset.unwrap_or(t);
                if failure_response(Condition::Automated, t - onset + 1e-9, params).is_some() {
                    self.phase = SupervisorPhase::Braking;
                    Some(SupervisorEvent::Intervention)
                } else {
                    None
                }
            }
            SupervisorPhase::Braking => {
                if closing <= 0.0 {
                    self.phase = SupervisorPhase::InControl;
                    Some(SupervisorEvent::Takeover)
                } else {
                    None
                }
            }
            SupervisorPhase::InControl => None,
        }
    }
}
