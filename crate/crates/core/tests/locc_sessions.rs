use std::thread;
use std::time::Duration;

use frameless_core::locc::{
    decode_message, encode_message, run_alice, run_bob, run_session, run_session_truncated, tcp_transport, MessageBody, Party, Referee,
    Role, RoundMessage, SessionConfig, SessionEnd, SessionTranscript, TcpChannel, TcpServer, Transport, DEFAULT_TIMEOUT,
};
use frameless_core::sampling::estimate_witness_value;
use frameless_core::sources::{StateSource, WitnessSource};
use frameless_core::states::BellPair;
use frameless_core::Error;
use proptest::prelude::*;

fn config(shots: u64, seed: u64) -> SessionConfig {
    SessionConfig {
        d: 2,
        witness: "riccardi:0.6:0.8:default".parse().unwrap(),
        state: "werner:0.9".parse().unwrap(),
        shots,
        seed,
    }
}

fn loopback() -> Transport {
    Transport::Tcp("127.0.0.1:0".into())
}

#[test]
fn tcp_and_in_process_transcripts_match_seed_7() {
    let c = config(4000, 7);
    let a = run_session(&c, &Transport::InProcess).unwrap();
    let b = run_session(&c, &loopback()).unwrap();
    assert_eq!(a.to_text(), b.to_text());
    let referee = Referee::new(&c).unwrap();
    let direct = estimate_witness_value(referee.state(), referee.witness(), 2, 4000, 7).unwrap();
    assert_eq!(b.estimate, Some(direct));
}

#[test]
fn tcp_disconnect_after_k_rounds_is_incomplete() {
    let t = run_session_truncated(&config(500, 3), &loopback(), Some(42)).unwrap();
    assert!(!t.complete);
    assert_eq!(t.rounds.len(), 42);
    assert!(t.abort_reason.as_deref().unwrap().contains("42"));
    let full = run_session(&config(500, 3), &Transport::InProcess).unwrap();
    assert_eq!(t.rounds[..], full.rounds[..42]);
    let parsed = SessionTranscript::parse(&t.to_text().replace('\n', "\r\n")).unwrap();
    assert!(!parsed.complete);
    parsed.verify_replay().unwrap();
}

#[test]
fn connect_to_unbound_port_fails_before_any_round() {
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let err = tcp_transport(Role::Connect, &format!("127.0.0.1:{port}"), Duration::from_millis(500));
    assert!(matches!(err, Err(Error::Transport(_))));
}

#[test]
fn bad_endpoint_is_a_transport_error() {
    assert!(matches!(run_session(&config(5, 1), &Transport::Tcp("not-an-endpoint".into())), Err(Error::Transport(_))));
}

#[test]
fn listener_serves_concurrent_sessions() {
    let server = TcpServer::bind("127.0.0.1:0", DEFAULT_TIMEOUT).unwrap();
    let addr = server.local_addr().unwrap().to_string();
    let configs: Vec<SessionConfig> = (0..4).map(|s| config(300 + s * 50, 100 + s)).collect();
    let clients: Vec<_> = configs
        .iter()
        .cloned()
        .map(|c| {
            let addr = addr.clone();
            thread::spawn(move || {
                let mut alice = Referee::new(&c).unwrap().alice_device();
                let mut ch = TcpChannel::connect(&addr, DEFAULT_TIMEOUT).unwrap();
                run_alice(&c, &mut alice, &mut ch, None).unwrap()
            })
        })
        .collect();
    let transcripts = server.serve(configs.len(), |mut ch| run_bob(&mut ch, None));
    for c in clients {
        c.join().unwrap();
    }
    // Accept order is arbitrary; match each transcript to its config.
    for t in transcripts {
        let t = t.unwrap();
        assert!(t.complete);
        let reference = run_session(&t.config, &Transport::InProcess).unwrap();
        assert_eq!(t.to_text(), reference.to_text());
        assert!(configs.contains(&t.config));
    }
}

#[test]
fn mismatched_config_over_tcp() {
    let server = TcpServer::bind("127.0.0.1:0", DEFAULT_TIMEOUT).unwrap();
    let addr = server.local_addr().unwrap().to_string();
    let alice_config = config(20, 1);
    let h = thread::spawn(move || {
        let mut alice = Referee::new(&alice_config).unwrap().alice_device();
        let mut ch = TcpChannel::connect(&addr, DEFAULT_TIMEOUT).unwrap();
        let _ = run_alice(&alice_config, &mut alice, &mut ch, None);
    });
    let bob = Referee::new(&config(20, 2)).unwrap();
    let err = run_bob(&mut server.accept().unwrap(), Some(&bob)).unwrap_err();
    h.join().unwrap();
    assert!(matches!(err, Error::ConfigMismatch(_)));
}

#[test]
fn truncated_line_is_a_decode_error() {
    let line = encode_message(&RoundMessage::new(3, Party::Alice, MessageBody::BranchBit(1)));
    assert!(decode_message(&line[..line.len() - 4]).is_err());
    assert!(decode_message("kind=branch_bit round=3").is_err());
}

fn arb_party() -> impl Strategy<Value = Party> {
    prop_oneof![Just(Party::Alice), Just(Party::Bob), Just(Party::Referee)]
}

fn arb_config() -> impl Strategy<Value = SessionConfig> {
    let state = prop_oneof![
        (0.0f64..=1.0).prop_map(|p| StateSource::Werner { p }),
        (any::<u64>(), 1usize..16).prop_map(|(seed, rank)| StateSource::Random { seed, rank }),
        "[a-z/._-]{1,20}".prop_map(|p| StateSource::File { path: p.into() }),
    ];
    let labels = ["phi+", "phi-", "psi+", "psi-"];
    let witness = prop_oneof![
        (any::<f64>(), any::<f64>(), 0usize..4, 1usize..4).prop_map(move |(a, b, i, j)| WitnessSource::Riccardi {
            a,
            b,
            pair: format!("{},{}", labels[i], labels[(i + j) % 4]).parse::<BellPair>().unwrap(),
        }),
        "[a-z/._-]{1,20}".prop_map(|p| WitnessSource::File { path: p.into() }),
    ];
    (2usize..9, witness, state, any::<u64>(), any::<u64>()).prop_map(|(d, witness, state, shots, seed)| SessionConfig {
        d,
        witness,
        state,
        shots,
        seed,
    })
}

fn arb_body() -> impl Strategy<Value = MessageBody> {
    let opt = || prop_oneof![Just(None), any::<f64>().prop_filter("finite", |x| x.is_finite()).prop_map(Some)];
    prop_oneof![
        (0u8..2).prop_map(MessageBody::BranchBit),
        any::<f64>().prop_map(MessageBody::OutcomeReport),
        (any::<u64>(), opt(), opt()).prop_map(|(shots, mean, stderr)| MessageBody::SessionEnd(SessionEnd { shots, mean, stderr })),
        arb_config().prop_map(MessageBody::SessionConfig),
    ]
}

/// Equality that compares reals bit for bit.
fn same(a: &RoundMessage, b: &RoundMessage) -> bool {
    let bits = |x: Option<f64>| x.map(f64::to_bits);
    a.round == b.round
        && a.sender == b.sender
        && match (&a.body, &b.body) {
            (MessageBody::OutcomeReport(x), MessageBody::OutcomeReport(y)) => x.to_bits() == y.to_bits(),
            (MessageBody::SessionEnd(x), MessageBody::SessionEnd(y)) => {
                x.shots == y.shots && bits(x.mean) == bits(y.mean) && bits(x.stderr) == bits(y.stderr)
            }
            (MessageBody::SessionConfig(x), MessageBody::SessionConfig(y)) => match (&x.witness, &y.witness) {
                (WitnessSource::Riccardi { a: a1, b: b1, pair: p1 }, WitnessSource::Riccardi { a: a2, b: b2, pair: p2 }) => {
                    a1.to_bits() == a2.to_bits()
                        && b1.to_bits() == b2.to_bits()
                        && p1 == p2
                        && (x.d, &x.state, x.shots, x.seed) == (y.d, &y.state, y.shots, y.seed)
                }
                _ => x == y,
            },
            (x, y) => x == y,
        }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn random_messages_round_trip(round in any::<u64>(), sender in arb_party(), body in arb_body()) {
        let msg = RoundMessage::new(round, sender, body);
        let line = encode_message(&msg);
        prop_assert!(line.ends_with('\n'));
        prop_assert_eq!(line.matches('\n').count(), 1);
        let back = decode_message(&line).unwrap();
        prop_assert!(same(&msg, &back), "{:?} vs {:?}", msg, back);
    }
}
