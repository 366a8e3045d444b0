//! Per-connection protocol state machine and wall-clock stepping.

use ringjam::metrics::{braking_instances, compute_metrics, min_gap_after_failure};
use ringjam::{
    Condition, EventKind, HumanInput, ScenarioConfig, SessionLog, Simulation, StepOutcome,
};

use crate::protocol::{
    ClientMessage, EgoView, EndSummary, EventName, ServerMessage, VehicleView, SCHEMA_VERSION,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Base scenario; `Start` overrides condition and seed.
    pub scenario: ScenarioConfig,
    pub max_substeps: u32,
    /// Wall time without client messages after which stepping pauses, s.
    pub stall_after: f64,
    /// Wall time without client messages after which the connection is dropped, s.
    pub timeout: f64,
    /// Server tick period, s.
    pub tick_interval: f64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::default(),
            max_substeps: 5,
            stall_after: 0.5,
            timeout: 10.0,
            tick_interval: 1.0 / 60.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    Running,
    Ended,
}

struct Running {
    sim: Simulation,
    input: HumanInput,
    accumulator: f64,
    events_sent: usize,
    /// Input applied at each step, for replay.
    trace: Vec<HumanInput>,
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct TickOutput {
    pub messages: Vec<ServerMessage>,
    pub steps: u32,
    /// Wall time dropped because the step budget ran out, s.
    pub dropped: f64,
    pub paused: bool,
    pub timed_out: bool,
}

pub struct Session {
    config: ServiceConfig,
    running: Option<Running>,
    phase: Phase,
    idle_wall: f64,
    last_state_t: f64,
    finished: Option<(SessionLog, Vec<HumanInput>)>,
}

impl Session {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            running: None,
            phase: Phase::Idle,
            idle_wall: 0.0,
            last_state_t: f64::NEG_INFINITY,
            finished: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn condition(&self) -> Option<Condition> {
        self.running.as_ref().map(|r| r.sim.config().condition)
    }

    pub fn sim_time(&self) -> Option<f64> {
        self.running.as_ref().map(|r| r.sim.time())
    }

    /// Log and applied inputs of the last finished session.
    pub fn finished(&self) -> Option<&(SessionLog, Vec<HumanInput>)> {
        self.finished.as_ref()
    }

    /// Any client traffic, including pings, keeps the session alive.
    pub fn handle_heartbeat(&mut self) {
        self.idle_wall = 0.0;
    }

    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        self.idle_wall = 0.0;
        match crate::protocol::parse_client(text) {
            Ok(msg) => self.handle_message(msg),
            Err(e) => vec![ServerMessage::error(e)],
        }
    }

    pub fn handle_message(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        self.idle_wall = 0.0;
        match (self.phase, msg) {
            (Phase::Idle | Phase::Ended, ClientMessage::Start { condition, seed, schema_version }) => {
                if let Some(v) = schema_version.filter(|&v| v != SCHEMA_VERSION) {
                    return vec![ServerMessage::error(format!(
                        "unsupported schema version {v}, expected {SCHEMA_VERSION}"
                    ))];
                }
                let cfg = self.config.scenario.clone().with_condition(condition).with_seed(seed);
                match Simulation::new(cfg) {
                    Ok(sim) => {
                        self.running = Some(Running {
                            sim,
                            input: HumanInput::default(),
                            accumulator: 0.0,
                            events_sent: 0,
                            trace: Vec::new(),
                        });
                        self.phase = Phase::Running;
                        self.last_state_t = f64::NEG_INFINITY;
                        vec![self.state_message()]
                    }
                    Err(e) => vec![ServerMessage::error(e.to_string())],
                }
            }
            (Phase::Running, ClientMessage::Input { accel_force, brake_force }) => {
                if let Some(r) = self.running.as_mut() {
                    r.input = HumanInput {
                        accel: accel_force,
                        brake: brake_force,
                    };
                }
                Vec::new()
            }
            (Phase::Running, ClientMessage::Stop) => {
                if let Some(r) = self.running.as_mut() {
                    r.sim.stop();
                }
                self.finish()
            }
            (Phase::Running, ClientMessage::Start { .. }) => {
                vec![ServerMessage::error("a session is already running")]
            }
            (phase, msg) => vec![ServerMessage::error(format!(
                "{} not allowed while {}",
                message_name(&msg),
                phase_name(phase)
            ))],
        }
    }

    /// Advances the running session by `wall_dt` seconds of wall time.
    pub fn tick(&mut self, wall_dt: f64) -> TickOutput {
        let mut out = TickOutput::default();
        self.idle_wall += wall_dt.max(0.0);
        if self.idle_wall >= self.config.timeout {
            out.timed_out = true;
            if self.phase == Phase::Running {
                if let Some(r) = self.running.as_mut() {
                    r.sim.stop();
                }
                out.messages = self.finish();
            }
            return out;
        }
        if self.phase != Phase::Running {
            return out;
        }
        if self.idle_wall >= self.config.stall_after {
            // Stalled client: hold still instead of free-running.
            if let Some(r) = self.running.as_mut() {
                r.accumulator = 0.0;
            }
            out.paused = true;
            return out;
        }

        let max_steps = self.config.max_substeps;
        let Some(r) = self.running.as_mut() else {
            return out;
        };
        let dt = r.sim.config().dt;
        r.accumulator += wall_dt.max(0.0);
        let wanted = (r.accumulator / dt + 1e-9).floor() as u32;
        let steps = wanted.min(max_steps);
        if wanted > max_steps {
            out.dropped = r.accumulator - steps as f64 * dt;
            r.accumulator = 0.0;
        } else {
            r.accumulator = (r.accumulator - steps as f64 * dt).max(0.0);
        }

        let mut ended = false;
        for _ in 0..steps {
            let input = r.input;
            r.trace.push(input);
            out.steps += 1;
            if let StepOutcome::Ended(_) = r.sim.step(Some(&input)) {
                ended = true;
                break;
            }
        }
        out.messages.extend(self.drain_events());
        if ended {
            out.messages.extend(self.finish());
        } else if out.steps > 0 {
            out.messages.push(self.state_message());
        }
        out
    }

    fn drain_events(&mut self) -> Vec<ServerMessage> {
        let Some(r) = self.running.as_mut() else {
            return Vec::new();
        };
        let events = &r.sim.log().events[r.events_sent..];
        r.events_sent += events.len();
        events
            .iter()
            .filter_map(|e| {
                let kind = match e.kind {
                    EventKind::FailureOnset => EventName::Failure,
                    EventKind::Collision { .. } => EventName::Collision,
                    EventKind::JamDissipated => EventName::JamDissipated,
                    _ => return None,
                };
                Some(ServerMessage::Event { t: e.t, kind })
            })
            .collect()
    }

    fn state_message(&mut self) -> ServerMessage {
        let r = self.running.as_ref().expect("state requires a session");
        let world = r.sim.world();
        let ego = r.sim.ego();
        let t = r.sim.time().max(self.last_state_t);
        self.last_state_t = t;
        ServerMessage::State {
            schema_version: SCHEMA_VERSION,
            t,
            circumference: world.road.circumference(),
            vehicles: world
                .vehicles
                .iter()
                .map(|v| VehicleView {
                    id: v.id,
                    position: world.road.wrap(v.position),
                    speed: v.speed,
                    is_ego: v.is_ego,
                })
                .collect(),
            ego: EgoView {
                gap: world.gap_to_leader(0),
                v: world.vehicles[0].speed,
                vcmd: ego.vcmd,
                s_acc: ego.s_acc,
                s_brake: ego.s_brake,
                k_hc: ego.stiffness,
                s_target: ego.target_acc,
            },
        }
    }

    fn finish(&mut self) -> Vec<ServerMessage> {
        let mut msgs = self.drain_events();
        let Some(r) = self.running.take() else {
            return msgs;
        };
        let log = r.sim.into_log();
        msgs.push(ServerMessage::End {
            summary: summarize(&log),
        });
        self.finished = Some((log, r.trace));
        self.phase = Phase::Ended;
        msgs
    }
}

pub fn summarize(log: &SessionLog) -> EndSummary {
    let n = log.len();
    let mean_speed = if n == 0 {
        0.0
    } else {
        log.ego.speed.iter().sum::<f64>() / n as f64
    };
    EndSummary {
        reason: log.end_reason,
        duration: n as f64 * log.config.dt,
        steps: n,
        mean_speed,
        min_gap: if n == 0 {
            0.0
        } else {
            log.ego.gap.iter().copied().fold(f64::INFINITY, f64::min).max(0.0)
        },
        braking_instances: braking_instances(log),
        collision: log.collided(),
        min_gap_after_failure: min_gap_after_failure(log).ok(),
        metrics: compute_metrics(log).ok().filter(|m| m.ego_speed_std.is_finite()),
    }
}

fn message_name(msg: &ClientMessage) -> &'static str {
    match msg {
        ClientMessage::Start { .. } => "start",
        ClientMessage::Input { .. } => "input",
        ClientMessage::Stop => "stop",
    }
}

fn phase_name(phase: Phase) -> &'static str {
    match phase {
        Phase::Idle => "idle",
        Phase::Running => "running",
        Phase::Ended => "ended",
    }
}
