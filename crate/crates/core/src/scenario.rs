//! Closed-loop session: traffic, ego controller, pedals, driver, failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::Result;
use crate::follower_stopper::compute_vcmd;
use crate::human::{
    human_intent, intent_to_pedals, limb_reference, DelayLine, HumanParams, Observation, OuNoise,
    Supervisor, SupervisorEvent, SupervisorPhase,
};
use crate::log::{EndReason, EventKind, SessionLog};
use crate::pedal::{
    powertrain_accel, resolve_authority, select_action, Action, Condition, HumanForces,
    PedalInput, PedalPair, PidState,
};
use crate::ring::{init_scenario, WorldState};
use crate::traffic::{iidm_acc, IidmAccParams};

/// Gap reported to the controller once the sensor has failed, m.
pub const FAILED_SENSOR_GAP: f64 = 1000.0;

/// SplitMix64 finalizer; used to derive independent seeds from a base seed.
pub fn mix_seed(base: u64, tag: u64) -> u64 {
    let mut z = base
        .wrapping_add(tag.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A pedal command from an interactive client.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum PedalCommand {
    /// Pushing force, N.
    Force(f64),
    /// Desired normalized deflection in `[0, 1]`, rendered through the limb model.
    Deflection(f64),
}

impl Default for PedalCommand {
    fn default() -> Self {
        PedalCommand::Force(0.0)
    }
}

/// Driver input replacing the synthetic driver's pedal forces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct HumanInput {
    pub accel: PedalCommand,
    pub brake: PedalCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    Running,
    Ended(EndReason),
}

/// Snapshot of the ego channels for the most recent step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EgoSnapshot {
    pub gap: f64,
    pub speed: f64,
    pub vcmd: f64,
    pub s_acc: f64,
    pub s_brake: f64,
    pub stiffness: f64,
    pub target_acc: f64,
    pub target_brake: f64,
}

struct SyntheticDriver {
    params: HumanParams,
    delay: DelayLine,
    noise: OuNoise,
    rng: ChaCha8Rng,
    supervisor: Supervisor,
}

pub struct Simulation {
    config: ScenarioConfig,
    world: WorldState,
    prev_speeds: Vec<f64>,
    traffic: Vec<IidmAccParams>,
    pedals: PedalPair,
    acc_pid: PidState,
    brake_pid: PidState,
    action: Action,
    driver: SyntheticDriver,
    step: u64,
    total_steps: u64,
    failed: bool,
    jam_dissipated: bool,
    last_launched: bool,
    pedal_conflict: bool,
    ended: Option<EndReason>,
    last_ego: EgoSnapshot,
    log: SessionLog,
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut world = init_scenario(&config.ring)?;
        world.time = 0.0;

        let mut traffic_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.traffic_seed(), 1));
        let j = config.traffic_jitter;
        let traffic = (0..world.len())
            .map(|_| {
                let mut p = config.traffic;
                if j > 0.0 {
                    p.time_headway *= traffic_rng.random_range(1.0 - j..=1.0 + j);
                    p.max_accel *= traffic_rng.random_range(1.0 - j..=1.0 + j);
                }
                p
            })
            .collect();

        let h = config.human;
        let driver = SyntheticDriver {
            params: h,
            delay: DelayLine::new(h.reaction_delay, config.dt),
            noise: OuNoise::new(h.noise_sigma, h.noise_theta),
            rng: ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 2)),
            supervisor: Supervisor::default(),
        };

        let pp = config.pedals;
        let pid = |gains| {
            PidState::new(gains)
                .with_derivative_filter(pp.derivative_cutoff_hz)
                .with_integral_bound(pp.integral_bound)
        };
        let lengths = world.vehicles.iter().map(|v| v.length).collect();
        let log = SessionLog::new(config.clone(), world.road.circumference(), lengths);

        Ok(Self {
            prev_speeds: world.vehicles.iter().map(|v| v.speed).collect(),
            pedals: PedalPair::at_rest(&pp),
            acc_pid: pid(pp.accel_gains),
            brake_pid: pid(pp.brake_gains),
            action: Action::Coast,
            traffic,
            driver,
            step: 0,
            total_steps: config.total_steps(),
            failed: false,
            jam_dissipated: false,
            last_launched: false,
            pedal_conflict: false,
            ended: None,
            last_ego: EgoSnapshot::default(),
            world,
            config,
            log,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn ended(&self) -> Option<EndReason> {
        self.ended
    }

    pub fn ego(&self) -> EgoSnapshot {
        self.last_ego
    }

    pub fn into_log(self) -> SessionLog {
        self.log
    }

    /// Stops the session early; later steps are no-ops.
    pub fn stop(&mut self) {
        if self.ended.is_none() {
            self.ended = Some(EndReason::Stopped);
            self.log.end_reason = EndReason::Stopped;
        }
    }

    /// Advances one step. `input` replaces the synthetic driver's pedal
    /// forces when given.
    pub fn step(&mut self, input: Option<&HumanInput>) -> StepOutcome {
        if let Some(reason) = self.ended {
            return StepOutcome::Ended(reason);
        }
        let cfg = &self.config;
        let dt = cfg.dt;
        let t = self.step as f64 * dt;
        let n = self.world.len();
        let eps_v = cfg.metrics.standstill_speed;

        // Row bookkeeping events that depend on the current state.
        if !self.last_launched && self.world.vehicles[n - 1].speed > eps_v {
            self.last_launched = true;
            self.log.push_event(t, EventKind::LastLaunch);
        }
        if !self.jam_dissipated && t >= cfg.transient - 1e-9 && self.world.min_speed() > eps_v {
            self.jam_dissipated = true;
            self.log.push_event(t, EventKind::JamDissipated);
        }

        let gaps = self.world.gaps();
        let mut accels = vec![0.0; n];
        for i in 1..n {
            let l = self.world.leader_of(i);
            let v_lead = self.world.vehicles[l].speed;
            let a_lead = (v_lead - self.prev_speeds[l]) / dt;
            // gaps are positive here: a collision ends the session first
            accels[i] = iidm_acc(self.world.vehicles[i].speed, gaps[i], v_lead, a_lead, &self.traffic[i])
                .expect("positive gap");
        }

        // Ego controller.
        let ego_v = self.world.vehicles[0].speed;
        let lead_v = self.world.vehicles[n - 1].speed;
        let true_gap = gaps[0];
        if cfg.condition.has_failure() && !self.failed && t >= cfg.failure_time - 1e-9 {
            self.failed = true;
            self.log.push_event(t, EventKind::FailureOnset);
        }
        let gap_input = if self.failed { FAILED_SENSOR_GAP } else { true_gap };
        let vcmd = compute_vcmd(gap_input, ego_v, lead_v, &cfg.follower_stopper);
        let action = select_action(vcmd, ego_v);
        let (target_acc, target_brake) = match action {
            Action::Accelerate => {
                let e = vcmd - ego_v;
                if self.action != Action::Accelerate {
                    self.acc_pid.reset(e);
                }
                (self.acc_pid.step(e, dt), 0.0)
            }
            Action::Brake => {
                let e = ego_v - vcmd;
                if self.action != Action::Brake {
                    self.brake_pid.reset(e);
                }
                (0.0, self.brake_pid.step(e, dt))
            }
            Action::Coast => (0.0, 0.0),
        };
        self.action = action;

        // Driver.
        let pp = cfg.pedals;
        let now = Observation {
            gap: true_gap,
            speed: ego_v,
            lead_speed: lead_v,
        };
        let drv = &mut self.driver;
        let seen = drv.delay.push(now);
        let noise = drv.noise.step(dt, &mut drv.rng);
        let intent = human_intent(&seen, &drv.params, noise);
        let (want_acc, want_brake) = intent_to_pedals(intent, seen.speed, &cfg.powertrain);
        let limb = drv.params.limb_stiffness;
        let limb_for = |normalized: f64| PedalInput::Limb {
            reference: limb_reference(normalized * pp.max_travel, pp.stiffness, limb),
            stiffness: limb,
        };
        let own_forces = HumanForces {
            accel: limb_for(want_acc),
            brake: limb_for(want_brake),
        };

        let mut authority = cfg.condition;
        let forces = match input {
            Some(inp) => {
                let convert = |c: PedalCommand| match c {
                    PedalCommand::Force(f) => PedalInput::Force { newtons: f },
                    PedalCommand::Deflection(d) => limb_for(d.clamp(0.0, 1.0)),
                };
                HumanForces {
                    accel: convert(inp.accel),
                    brake: convert(inp.brake),
                }
            }
            None => match cfg.condition {
                Condition::Manual | Condition::Haptic => own_forces,
                Condition::Automated => {
                    let accelerating = action == Action::Accelerate && target_acc > 0.0;
                    if let Some(ev) = drv.supervisor.update(t, &now, accelerating, &drv.params) {
                        let kind = match ev {
                            SupervisorEvent::HazardOnset => EventKind::HazardOnset,
                            SupervisorEvent::Intervention => EventKind::Intervention,
                            SupervisorEvent::Takeover => EventKind::Takeover,
                        };
                        self.log.push_event(t, kind);
                    }
                    match drv.supervisor.phase {
                        SupervisorPhase::Monitoring | SupervisorPhase::HazardNoticed => {
                            HumanForces::NONE
                        }
                        SupervisorPhase::Braking => HumanForces {
                            accel: PedalInput::NONE,
                            brake: limb_for(1.0),
                        },
                        SupervisorPhase::InControl => {
                            authority = Condition::Manual;
                            own_forces
                        }
                    }
                }
            },
        };

        let out = resolve_authority(
            authority,
            &forces,
            (target_acc, target_brake),
            &mut self.pedals,
            dt,
            &pp,
        );
        let pt = powertrain_accel(out.s_acc, out.s_brake, ego_v, &cfg.powertrain);
        if pt.both_pressed && !self.pedal_conflict {
            self.log.push_event(t, EventKind::PedalConflict);
        }
        self.pedal_conflict = pt.both_pressed;
        accels[0] = pt.accel;

        // Record the pre-step state and the controls applied over the step.
        let log = &mut self.log;
        log.time.push(t);
        let e = &mut log.ego;
        e.gap.push(true_gap);
        e.speed.push(ego_v);
        e.gap_input.push(gap_input);
        e.vcmd.push(vcmd);
        e.action.push(action.code());
        e.target_acc.push(target_acc);
        e.target_brake.push(target_brake);
        e.s_acc.push(out.s_acc);
        e.s_brake.push(out.s_brake);
        e.pedal_acc.push(self.pedals.accel.position);
        e.pedal_brake.push(self.pedals.brake.position);
        e.force_acc.push(out.force_acc);
        e.force_brake.push(out.force_brake);
        e.stiffness.push(self.pedals.accel.current_stiffness);
        e.intent.push(intent);
        e.accel.push(pt.accel);
        for (i, v) in self.world.vehicles.iter().enumerate() {
            log.positions[i].push(v.position);
            log.speeds[i].push(v.speed);
        }
        self.last_ego = EgoSnapshot {
            gap: true_gap,
            speed: ego_v,
            vcmd,
            s_acc: out.s_acc,
            s_brake: out.s_brake,
            stiffness: self.pedals.accel.current_stiffness,
            target_acc,
            target_brake,
        };

        for (p, v) in self.prev_speeds.iter_mut().zip(&self.world.vehicles) {
            *p = v.speed;
        }
        self.world.advance(&accels, dt);
        self.step += 1;
        self.world.time = self.step as f64 * dt;

        if let Some(hit) = self.world.detect_collision() {
            self.log.push_event(
                self.world.time,
                EventKind::Collision {
                    follower: hit.follower,
                    leader: hit.leader,
                },
            );
            self.ended = Some(EndReason::Collision);
            self.log.end_reason = EndReason::Collision;
        } else if self.step >= self.total_steps {
            self.ended = Some(EndReason::Completed);
            self.log.end_reason = EndReason::Completed;
        }
        match self.ended {
            Some(r) => StepOutcome::Ended(r),
            None => StepOutcome::Running,
        }
    }
}

/// Runs one batch session with the synthetic driver.
pub fn run_session(config: &ScenarioConfig) -> Result<SessionLog> {
    let mut sim = Simulation::new(config.clone())?;
    while sim.step(None) == StepOutcome::Running {}
    Ok(sim.into_log())
}

/// Runs one session driven by a recorded per-step input trace. The last
/// input is held once the trace runs out.
pub fn run_session_with_inputs(config: &ScenarioConfig, inputs: &[HumanInput]) -> Result<SessionLog> {
    let mut sim = Simulation::new(config.clone())?;
    let mut k = 0usize;
    let mut held = HumanInput::default();
    loop {
        if let Some(inp) = inputs.get(k) {
            held = *inp;
        }
        k += 1;
        if sim.step(Some(&held)) != StepOutcome::Running {
            break;
        }
    }
    Ok(sim.into_log())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(condition: Condition) -> ScenarioConfig {
        ScenarioConfig {
            duration: 20.0,
            transient: 5.0,
            failure_time: 10.0,
            failure_window: 3.0,
            ..ScenarioConfig::default()
        }
        .with_condition(condition)
        .with_seed(11)
    }

    #[test]
    fn seed_mixing_is_stable_and_spreads() {
        assert_eq!(mix_seed(1, 2), mix_seed(1, 2));
        assert_ne!(mix_seed(1, 2), mix_seed(2, 1));
        assert_ne!(mix_seed(0, 0), 0);
    }

    #[test]
    fn manual_session_length_and_no_failure() {
        let log = run_session(&short(Condition::Manual)).unwrap();
        assert_eq!(log.len(), 2000);
        assert!(log.failure_time().is_none());
        assert_eq!(log.end_reason, EndReason::Completed);
    }

    #[test]
    fn failure_sessions_end_after_window() {
        for c in [Condition::Haptic, Condition::Automated] {
            let log = run_session(&short(c)).unwrap();
            let fails: Vec<_> = log
                .events
                .iter()
                .filter(|e| matches!(e.kind, EventKind::FailureOnset))
                .collect();
            assert_eq!(fails.len(), 1);
            assert!((fails[0].t - 10.0).abs() < 1e-9);
            if log.end_reason == EndReason::Completed {
                assert_eq!(log.len(), 1300);
            }
        }
    }

    #[test]
    fn deterministic_replay_of_inputs() {
        let cfg = short(Condition::Haptic);
        let inputs: Vec<HumanInput> = (0..1300)
            .map(|k| HumanInput {
                accel: PedalCommand::Deflection(if k % 400 < 250 { 0.3 } else { 0.0 }),
                brake: PedalCommand::Force(if k % 400 >= 330 { 25.0 } else { 0.0 }),
            })
            .collect();
        let a = run_session_with_inputs(&cfg, &inputs).unwrap();
        let b = run_session_with_inputs(&cfg, &inputs).unwrap();
        assert_eq!(a, b);
    }
}
