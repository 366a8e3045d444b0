use proptest::prelude::*;
use ringjam::{Condition, PedalCommand};
use ringjam_service::{ClientMessage, Phase, ServerMessage, ServiceConfig, Session};

fn start(condition: Condition, seed: u64) -> ClientMessage {
    ClientMessage::Start {
        condition,
        seed,
        schema_version: None,
    }
}

fn input(accel: PedalCommand, brake: PedalCommand) -> ClientMessage {
    ClientMessage::Input {
        accel_force: accel,
        brake_force: brake,
    }
}

fn idle_input() -> ClientMessage {
    input(PedalCommand::Force(0.0), PedalCommand::Force(0.0))
}

fn ends(msgs: &[ServerMessage]) -> bool {
    matches!(msgs.last(), Some(ServerMessage::End { .. }))
}

fn is_state(msg: &ServerMessage) -> bool {
    matches!(msg, ServerMessage::State { .. })
}

fn is_error(msgs: &[ServerMessage]) -> bool {
    msgs.len() == 1 && matches!(msgs[0], ServerMessage::Error { .. })
}

/// Ticks `n` frames of `wall` seconds, sending `msg` before each.
fn drive(s: &mut Session, msg: &ClientMessage, n: usize, wall: f64) -> Vec<ServerMessage> {
    let mut all = Vec::new();
    for _ in 0..n {
        all.extend(s.handle_message(msg.clone()));
        all.extend(s.tick(wall).messages);
        if s.phase() != Phase::Running {
            break;
        }
    }
    all
}

#[test]
fn input_and_stop_rejected_while_idle() {
    let mut s = Session::new(ServiceConfig::default());
    assert!(is_error(&s.handle_message(idle_input())));
    assert!(is_error(&s.handle_message(ClientMessage::Stop)));
    assert_eq!(s.phase(), Phase::Idle);
}

#[test]
fn malformed_messages_leave_session_unchanged() {
    let mut s = Session::new(ServiceConfig::default());
    assert!(is_error(&s.handle_text("{not json")));
    assert!(is_error(&s.handle_text(r#"{"type":"launch"}"#)));
    assert_eq!(s.phase(), Phase::Idle);
    s.handle_message(start(Condition::Manual, 1));
    drive(&mut s, &idle_input(), 10, 0.02);
    let t = s.sim_time().unwrap();
    assert!(is_error(&s.handle_text(r#"{"type":"input","accel_force":{"mode":"warp"}}"#)));
    assert!(is_error(&s.handle_message(start(Condition::Haptic, 2))));
    assert_eq!(s.phase(), Phase::Running);
    assert_eq!(s.sim_time().unwrap(), t);
    assert_eq!(s.condition(), Some(Condition::Manual));
}

#[test]
fn wrong_schema_version_rejected() {
    let mut s = Session::new(ServiceConfig::default());
    let r = s.handle_text(r#"{"type":"start","condition":"manual","seed":1,"schema_version":99}"#);
    assert!(is_error(&r));
    assert_eq!(s.phase(), Phase::Idle);
    let r = s.handle_text(r#"{"type":"start","condition":"manual","seed":1,"schema_version":1}"#);
    assert!(matches!(r[0], ServerMessage::State { schema_version: 1, .. }));
}

#[test]
fn start_stop_without_input() {
    // manual: nobody presses, the ego stays parked
    let mut s = Session::new(ServiceConfig::default());
    s.handle_message(start(Condition::Manual, 4));
    for _ in 0..100 {
        s.handle_heartbeat();
        s.tick(0.02);
    }
    let r = s.handle_message(ClientMessage::Stop);
    let ServerMessage::End { summary } = r.last().unwrap() else {
        panic!("expected End, got {r:?}");
    };
    assert_eq!(summary.steps, 200);
    assert_eq!(summary.mean_speed, 0.0);
    assert_eq!(s.phase(), Phase::Ended);

    // automated: the automation drives off
    s.handle_message(start(Condition::Automated, 4));
    for _ in 0..100 {
        s.handle_heartbeat();
        s.tick(0.02);
    }
    let r = s.handle_message(ClientMessage::Stop);
    let ServerMessage::End { summary } = r.last().unwrap() else {
        panic!("expected End");
    };
    assert!(summary.mean_speed > 1.0, "{}", summary.mean_speed);
}

#[test]
fn haptic_stiffness_reported_and_varies() {
    let mut s = Session::new(ServiceConfig::default());
    s.handle_message(start(Condition::Haptic, 3));
    let msgs = drive(&mut s, &input(PedalCommand::Deflection(0.6), PedalCommand::Force(0.0)), 1500, 0.02);
    let k: Vec<f64> = msgs
        .iter()
        .filter_map(|m| match m {
            ServerMessage::State { ego, .. } => Some(ego.k_hc),
            _ => None,
        })
        .collect();
    let lo = k.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = k.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(hi > 60.0 + 1.0 && lo < 60.0, "K_hc range {lo}..{hi}");
}

#[test]
fn manual_stiffness_constant() {
    let mut s = Session::new(ServiceConfig::default());
    s.handle_message(start(Condition::Manual, 3));
    let msgs = drive(&mut s, &input(PedalCommand::Deflection(0.6), PedalCommand::Force(0.0)), 500, 0.02);
    for m in msgs {
        if let ServerMessage::State { ego, .. } = m {
            assert_eq!(ego.k_hc, 60.0);
        }
    }
}

#[test]
fn failure_event_at_480_s() {
    let mut s = Session::new(ServiceConfig::default());
    s.handle_message(start(Condition::Automated, 11));
    // 5 steps per frame: the whole session in at most 9,900 frames
    let msgs = drive(&mut s, &idle_input(), 20_000, 0.05);
    let failure: Vec<f64> = msgs
        .iter()
        .filter_map(|m| match m {
            ServerMessage::Event {
                t,
                kind: ringjam_service::protocol::EventName::Failure,
            } => Some(*t),
            _ => None,
        })
        .collect();
    assert_eq!(failure.len(), 1);
    assert!((failure[0] - 480.0).abs() < 1e-9, "{}", failure[0]);
    assert!(matches!(msgs.last().unwrap(), ServerMessage::End { .. }));
    assert_eq!(s.phase(), Phase::Ended);
}

#[test]
fn no_failure_event_in_manual() {
    let mut s = Session::new(ServiceConfig::default());
    s.handle_message(start(Condition::Manual, 11));
    let msgs = drive(&mut s, &input(PedalCommand::Deflection(0.3), PedalCommand::Force(0.0)), 20_000, 0.05);
    assert!(!msgs.iter().any(|m| matches!(
        m,
        ServerMessage::Event {
            kind: ringjam_service::protocol::EventName::Failure,
            ..
        }
    )));
}

#[derive(Debug, Clone)]
enum Op {
    Start(u8, u64),
    Input(f64, f64),
    Stop,
    Garbage,
    Tick(f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0u8..3, 0u64..4).prop_map(|(c, s)| Op::Start(c, s)),
        (0.0..1.0f64, 0.0..1.0f64).prop_map(|(a, b)| Op::Input(a, b)),
        Just(Op::Stop),
        Just(Op::Garbage),
        (0.0..0.2f64).prop_map(Op::Tick),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_message_sequences(ops in proptest::collection::vec(op(), 1..80)) {
        let mut s = Session::new(ServiceConfig::default());
        let mut model = Phase::Idle;
        let mut last_t = f64::NEG_INFINITY;
        for op in ops {
            let replies = match op {
                Op::Start(c, seed) => {
                    let r = s.handle_message(start(Condition::ALL[c as usize], seed));
                    if model == Phase::Running {
                        prop_assert!(is_error(&r));
                    } else {
                        prop_assert!(is_state(&r[0]));
                        model = Phase::Running;
                        last_t = f64::NEG_INFINITY;
                    }
                    r
                }
                Op::Input(a, b) => {
                    let r = s.handle_message(input(PedalCommand::Deflection(a), PedalCommand::Deflection(b)));
                    prop_assert_eq!(is_error(&r), model != Phase::Running);
                    r
                }
                Op::Stop => {
                    let r = s.handle_message(ClientMessage::Stop);
                    if model == Phase::Running {
                        prop_assert!(ends(&r));
                        model = Phase::Ended;
                    } else {
                        prop_assert!(is_error(&r));
                    }
                    r
                }
                Op::Garbage => {
                    let r = s.handle_text("\u{1}garbage");
                    prop_assert!(is_error(&r));
                    r
                }
                Op::Tick(w) => {
                    let out = s.tick(w);
                    prop_assert!(out.steps <= 5);
                    if model != Phase::Running {
                        prop_assert_eq!(out.steps, 0);
                    }
                    if out.messages.iter().any(|m| matches!(m, ServerMessage::End { .. })) {
                        model = Phase::Ended;
                    }
                    out.messages
                }
            };
            for m in &replies {
                if let ServerMessage::State { t, .. } = m {
                    prop_assert!(*t >= last_t);
                    last_t = *t;
                }
            }
            prop_assert_eq!(s.phase(), model);
        }
    }
}
