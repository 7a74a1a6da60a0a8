use std::time::Duration;

use ringflight::control::FlightPhase;
use ringflight::intent::{Decision, ManeuverKind, RESPONSE_RIGHT};
use ringflight::runner::{run_scenario, Outcome, ScenarioConfig};
use ringflight::service::{
    Body, Client, CommandErrorKind, Role, ServeOptions, Server, ServerHandle, TelemetryMessage, SCHEMA_VERSION,
};

const SEED: u64 = 7;

fn start(cfg: &ScenarioConfig, pace: f64) -> ServerHandle {
    let opts = ServeOptions {
        pace,
        episodes: Some(1),
        ..ServeOptions::default()
    };
    Server::bind(cfg, SEED, "127.0.0.1:0", opts).unwrap().spawn().unwrap()
}

fn connect(h: &ServerHandle, role: Role) -> Client {
    let c = Client::connect(h.local_addr(), role).unwrap();
    c.set_read_timeout(Some(Duration::from_secs(60))).unwrap();
    c
}

fn welcome(c: &mut Client) -> Role {
    match c.recv().unwrap().unwrap().body {
        Body::Welcome {
            schema_version, role, ..
        } => {
            assert_eq!(schema_version, SCHEMA_VERSION);
            role
        }
        other => panic!("expected welcome, got {other:?}"),
    }
}

fn is_complete(b: &Body) -> bool {
    matches!(b, Body::RunComplete { .. })
}

fn assert_seq_increasing(msgs: &[TelemetryMessage]) {
    for w in msgs.windows(2) {
        assert_eq!(w[1].seq, w[0].seq + 1);
    }
}

fn interactive() -> ScenarioConfig {
    ScenarioConfig {
        commands: vec![],
        ..ScenarioConfig::default()
    }
}

#[test]
fn commanded_right_pass_streams_go_phases_and_response() {
    let h = start(&interactive(), 6.0);
    let mut c = connect(&h, Role::Commander);
    assert_eq!(welcome(&mut c), Role::Commander);
    let mut seen = c
        .recv_until(|b| matches!(b, Body::State(s) if s.track.is_some_and(|t| t.age >= 5)))
        .unwrap();
    c.command("Fly Right of Ring").unwrap();
    seen.extend(c.recv_until(is_complete).unwrap());
    assert_seq_increasing(&seen);

    let bodies: Vec<&Body> = seen.iter().map(|m| &m.body).collect();
    assert!(bodies.iter().any(|b| matches!(b, Body::CommandAck { maneuver: ManeuverKind::AroundRight, .. })));
    assert!(bodies.iter().any(|b| matches!(b, Body::GoNoGo { decision: Decision::Go, .. })));
    assert!(!bodies.iter().any(|b| matches!(b, Body::GoNoGo { decision: Decision::NoGo, .. })));
    let phases: Vec<FlightPhase> = bodies
        .iter()
        .filter_map(|b| match b {
            Body::PhaseChange { to, .. } => Some(*to),
            _ => None,
        })
        .collect();
    assert_eq!(
        phases,
        [
            FlightPhase::LocateTrackRing,
            FlightPhase::ManeuverThroughRing,
            FlightPhase::PrepareToLand,
            FlightPhase::Land
        ]
    );
    assert!(bodies.contains(&&Body::Response { text: RESPONSE_RIGHT.into() }));
    match bodies.last().unwrap() {
        Body::RunComplete {
            outcome, response_text, ..
        } => {
            assert_eq!(*outcome, Outcome::Success);
            assert_eq!(response_text.as_deref(), Some(RESPONSE_RIGHT));
        }
        _ => unreachable!(),
    }

    // 20 Hz state and 10 Hz frames, in simulated time
    let times = |pred: fn(&Body) -> bool| -> Vec<f64> {
        seen.iter().filter(|m| pred(&m.body)).map(|m| m.time).collect()
    };
    let states = times(|b| matches!(b, Body::State(_)));
    let frames = times(|b| matches!(b, Body::EventFrame(_)));
    assert!(states.windows(2).all(|w| (w[1] - w[0] - 0.05).abs() < 1e-6), "state spacing");
    assert!(frames.windows(2).all(|w| (w[1] - w[0] - 0.1).abs() < 1e-6), "frame spacing");
    h.shutdown().unwrap();
}

#[test]
fn second_commander_is_read_only_and_bad_input_gets_structured_errors() {
    let h = start(&interactive(), 1.0);
    let mut first = connect(&h, Role::Commander);
    assert_eq!(welcome(&mut first), Role::Commander);
    let mut second = connect(&h, Role::Commander);
    assert_eq!(welcome(&mut second), Role::Observer);
    let busy = second.recv().unwrap().unwrap();
    assert!(matches!(busy.body, Body::SessionBusy { .. }));

    second.command("Fly through Center of Ring").unwrap();
    let err = second.recv_until(|b| matches!(b, Body::CommandError { .. })).unwrap();
    assert!(matches!(
        err.last().unwrap().body,
        Body::CommandError {
            kind: CommandErrorKind::ReadOnly,
            ..
        }
    ));

    first.command("Fly banana of Ring").unwrap();
    let err = first.recv_until(|b| matches!(b, Body::CommandError { .. })).unwrap();
    match &err.last().unwrap().body {
        Body::CommandError { kind, unmatched, .. } => {
            assert_eq!(*kind, CommandErrorKind::Parse);
            assert_eq!(unmatched, &vec!["banana".to_string()]);
        }
        _ => unreachable!(),
    }
    assert!(!err.iter().any(|m| matches!(m.body, Body::CommandAck { .. } | Body::GoNoGo { .. })));

    first.send_raw(b"{not json").unwrap();
    let err = first.recv_until(|b| matches!(b, Body::CommandError { .. })).unwrap();
    assert!(matches!(
        err.last().unwrap().body,
        Body::CommandError {
            kind: CommandErrorKind::Malformed,
            ..
        }
    ));

    // the session frees up when its holder leaves
    first.close().unwrap();
    std::thread::sleep(Duration::from_millis(100));
    let mut third = connect(&h, Role::Commander);
    assert_eq!(welcome(&mut third), Role::Commander);
    h.shutdown().unwrap();
}

#[test]
fn observers_and_rejected_commands_leave_the_logs_unchanged() {
    let cfg = ScenarioConfig::default();
    let headless = run_scenario(&cfg, SEED).unwrap();
    let h = start(&cfg, 0.0);
    let mut main = connect(&h, Role::Commander);
    assert_eq!(welcome(&mut main), Role::Commander);
    // scripted runs take no interactive maneuver; garbage is refused too
    main.command("Fly Left of Ring").unwrap();
    main.command("lorem ipsum").unwrap();
    main.send_raw(b"\xff\xfe").unwrap();
    for _ in 0..20 {
        let mut o = connect(&h, Role::Observer);
        let _ = o.recv();
        drop(o);
    }
    let msgs = main.recv_until(is_complete).unwrap();
    assert_seq_increasing(&msgs);
    let kinds: Vec<CommandErrorKind> = msgs
        .iter()
        .filter_map(|m| match &m.body {
            Body::CommandError { kind, .. } => Some(*kind),
            _ => None,
        })
        .collect();
    assert_eq!(kinds.len(), 3, "{kinds:?}");
    assert!(kinds.contains(&CommandErrorKind::Parse) && kinds.contains(&CommandErrorKind::Malformed));
    match &msgs.last().unwrap().body {
        Body::RunComplete { outcome, digests, .. } => {
            assert_eq!(*outcome, headless.result.outcome);
            assert_eq!(digests, &headless.result.digests);
        }
        _ => unreachable!(),
    }
    h.shutdown().unwrap();
}

#[test]
fn late_joiner_sees_the_completed_run_and_commands_are_refused() {
    let h = start(&ScenarioConfig::default(), 0.0);
    let mut first = connect(&h, Role::Observer);
    welcome(&mut first);
    first.recv_until(is_complete).unwrap();
    h.wait_episodes().unwrap();
    let mut late = connect(&h, Role::Commander);
    assert_eq!(welcome(&mut late), Role::Commander);
    assert!(is_complete(&late.recv().unwrap().unwrap().body));
    late.command("Fly through Center of Ring").unwrap();
    let err = late.recv().unwrap().unwrap();
    assert!(matches!(
        err.body,
        Body::CommandError {
            kind: CommandErrorKind::Finished,
            ..
        }
    ));
    h.shutdown().unwrap();
}
