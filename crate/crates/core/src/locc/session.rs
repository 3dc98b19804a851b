//! Session state machines for Alice, Bob and the referee.
//!
//! The referee holds the simulated global state and answers measurement
//! requests: Alice asks for her spin-zero test and gets a bit, Bob asks for
//! `W^(bit)` and gets an eigenvalue. Only the bit crosses the transport.
//! Bob's outcomes are recorded in the transcript for bookkeeping and never
//! sent back to Alice.
//!
//! Each device draws from its own RNG stream keyed by round, so a session
//! reproduces [`estimate_witness_value`](crate::sampling::estimate_witness_value)
//! exactly for the same seed, whichever transport carries the bits.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::thread;

use crate::error::{invalid, Error, Result};
use crate::sampling::{BatchedRng, Estimate, ProtocolSampler, ShotAccumulator, ShotRecord, ShotSummary, Stream};
use crate::sources::{StateSource, WitnessSource};
use crate::states::{DensityMatrix, Witness};

use super::transport::{in_process_pair, Channel, TcpChannel, TcpServer, DEFAULT_TIMEOUT};
use super::wire::{decode_message, encode_message, MessageBody, Party, RoundMessage, SessionEnd};

pub const TRANSCRIPT_HEADER: &str = "transcript-version=1";

#[derive(Clone, Debug, PartialEq)]
pub struct SessionConfig {
    pub d: usize,
    pub witness: WitnessSource,
    pub state: StateSource,
    pub shots: u64,
    pub seed: u64,
}

impl SessionConfig {
    /// Checks that the config can be carried on the wire.
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(invalid(format!("local dimension must be at least 2, got {}", self.d)));
        }
        if !self.witness.is_token() || !self.state.is_token() {
            return Err(invalid("state and witness identifiers may not contain whitespace"));
        }
        Ok(())
    }
}

/// Owner of the simulated state, witness and the precomputed samplers.
#[derive(Clone, Debug)]
pub struct Referee {
    config: SessionConfig,
    rho: DensityMatrix,
    witness: Witness,
    sampler: Arc<ProtocolSampler>,
}

impl Referee {
    pub fn new(config: &SessionConfig) -> Result<Self> {
        config.validate()?;
        let rho = config.state.resolve(config.d)?;
        let witness = config.witness.resolve(config.d)?;
        let sampler = ProtocolSampler::new(&rho, &witness, config.d)?;
        Ok(Self {
            config: config.clone(),
            rho,
            witness,
            sampler: Arc::new(sampler),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn witness(&self) -> &Witness {
        &self.witness
    }

    pub fn p0(&self) -> f64 {
        self.sampler.p0()
    }

    /// Direct `Tr(W rho)`.
    pub fn analytic_value(&self) -> Result<f64> {
        self.witness.value(&self.rho)
    }

    pub fn alice_device(&self) -> AliceDevice {
        AliceDevice {
            sampler: Arc::clone(&self.sampler),
            rng: BatchedRng::new(self.config.seed, Stream::Branch),
        }
    }

    pub fn bob_device(&self) -> BobDevice {
        BobDevice {
            sampler: Arc::clone(&self.sampler),
            rng: BatchedRng::new(self.config.seed, Stream::Outcome),
        }
    }
}

/// Alice's measurement requests: spin-zero test on her two particles.
pub struct AliceDevice {
    sampler: Arc<ProtocolSampler>,
    rng: BatchedRng,
}

impl AliceDevice {
    pub fn measure(&mut self, round: u64) -> u8 {
        self.sampler.draw_branch(self.rng.at_round(round))
    }
}

/// Bob's measurement requests: `W^(bit)` on his pair.
pub struct BobDevice {
    sampler: Arc<ProtocolSampler>,
    rng: BatchedRng,
}

impl BobDevice {
    pub fn measure(&mut self, round: u64, bit: u8) -> f64 {
        self.sampler.draw_outcome(bit, self.rng.at_round(round))
    }
}

/// Bit received and outcome measured in one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundEntry {
    pub bit: u8,
    pub outcome: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SessionTranscript {
    pub config: SessionConfig,
    pub rounds: Vec<RoundEntry>,
    /// Recorded estimate; `None` when no round completed.
    pub estimate: Option<Estimate>,
    pub complete: bool,
    /// Why an incomplete session stopped (not part of the text form).
    pub abort_reason: Option<String>,
}

fn summarize(rounds: &[RoundEntry]) -> ShotSummary {
    let mut acc = ShotAccumulator::default();
    for (round, r) in rounds.iter().enumerate() {
        acc.push(&ShotRecord {
            round: round as u64,
            branch: r.bit,
            eigenvalue: r.outcome,
        });
    }
    acc.finish()
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

impl SessionTranscript {
    fn from_rounds(config: SessionConfig, rounds: Vec<RoundEntry>, abort_reason: Option<String>) -> Self {
        let estimate = Estimate::from_tally(&summarize(&rounds).total, config.seed);
        let complete = abort_reason.is_none() && rounds.len() as u64 == config.shots;
        Self {
            config,
            rounds,
            estimate,
            complete,
            abort_reason,
        }
    }

    /// Per-branch tallies recomputed from the rounds.
    pub fn summary(&self) -> ShotSummary {
        summarize(&self.rounds)
    }

    fn end_message(&self) -> RoundMessage {
        let n = self.rounds.len() as u64;
        RoundMessage::new(
            n,
            Party::Referee,
            MessageBody::SessionEnd(SessionEnd {
                shots: n,
                mean: self.estimate.map(|e| e.mean),
                stderr: self.estimate.map(|e| e.stderr),
            }),
        )
    }

    /// Every message in transcript order.
    pub fn messages(&self) -> impl Iterator<Item = RoundMessage> + '_ {
        let config = RoundMessage::new(0, Party::Alice, MessageBody::SessionConfig(self.config.clone()));
        let rounds = self.rounds.iter().enumerate().flat_map(|(i, r)| {
            let round = i as u64;
            [
                RoundMessage::new(round, Party::Alice, MessageBody::BranchBit(r.bit)),
                RoundMessage::new(round, Party::Bob, MessageBody::OutcomeReport(r.outcome)),
            ]
        });
        std::iter::once(config)
            .chain(rounds)
            .chain(std::iter::once(self.end_message()))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRANSCRIPT_HEADER}")?;
        for msg in self.messages() {
            out.write_all(encode_message(&msg).as_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("transcripts are ASCII")
    }

    /// Parses a transcript. Round indices must be dense from 0, with one
    /// Alice bit followed by one Bob outcome per round.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        match lines.next() {
            Some((_, TRANSCRIPT_HEADER)) => {}
            Some((n, other)) => return Err(parse_error(n, format!("expected `{TRANSCRIPT_HEADER}`, got `{other}`"))),
            None => return Err(parse_error(1, "empty transcript")),
        }
        fn next_message<'a>(
            lines: &mut impl Iterator<Item = (usize, &'a str)>,
            what: &str,
        ) -> Result<(usize, RoundMessage)> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| parse_error(0, format!("transcript ends before {what}")))?;
            let msg = decode_message(line).map_err(|e| parse_error(n, e.to_string()))?;
            Ok((n, msg))
        }
        let (n, first) = next_message(&mut lines, "the session config")?;
        let config = match first {
            RoundMessage {
                round: 0,
                sender: Party::Alice,
                body: MessageBody::SessionConfig(c),
            } => c,
            _ => return Err(parse_error(n, "first message must be Alice's session_config for round 0")),
        };
        let mut rounds = Vec::new();
        loop {
            let expected = rounds.len() as u64;
            let (n, msg) = next_message(&mut lines, "session_end")?;
            match (msg.sender, msg.body) {
                (Party::Alice, MessageBody::BranchBit(bit)) if msg.round == expected => {
                    let (m, report) = next_message(&mut lines, "Bob's outcome")?;
                    match report {
                        RoundMessage {
                            round,
                            sender: Party::Bob,
                            body: MessageBody::OutcomeReport(outcome),
                        } if round == expected => rounds.push(RoundEntry { bit, outcome }),
                        _ => return Err(parse_error(m, format!("expected Bob's outcome_report for round {expected}"))),
                    }
                }
                (Party::Referee, MessageBody::SessionEnd(end)) if msg.round == expected && end.shots == expected => {
                    if let Some((extra, _)) = lines.next() {
                        return Err(parse_error(extra, "content after session_end"));
                    }
                    if expected > config.shots {
                        return Err(parse_error(n, "more rounds than configured shots"));
                    }
                    let mut t = Self::from_rounds(config, rounds, None);
                    t.estimate = match (end.mean, end.stderr) {
                        (Some(mean), Some(stderr)) => Some(Estimate {
                            mean,
                            stderr,
                            shots: end.shots,
                            seed: t.config.seed,
                        }),
                        (None, None) => None,
                        _ => return Err(parse_error(n, "mean and stderr must both be defined or both undefined")),
                    };
                    return Ok(t);
                }
                _ => {
                    return Err(parse_error(
                        n,
                        format!("expected Alice's branch_bit or the referee's session_end for round {expected}"),
                    ))
                }
            }
        }
    }

    /// Recomputes the estimate from the recorded rounds and checks it
    /// matches the recorded one exactly.
    pub fn verify_replay(&self) -> Result<()> {
        let replayed = Estimate::from_tally(&self.summary().total, self.config.seed);
        let same = match (replayed, self.estimate) {
            (None, None) => true,
            (Some(a), Some(b)) => {
                a.shots == b.shots && a.mean.to_bits() == b.mean.to_bits() && a.stderr.to_bits() == b.stderr.to_bits()
            }
            _ => false,
        };
        if same {
            Ok(())
        } else {
            Err(Error::Protocol(format!(
                "replayed estimate {replayed:?} differs from recorded {:?}",
                self.estimate
            )))
        }
    }

    /// Re-runs the referee's devices from the config and checks every bit
    /// and outcome.
    pub fn verify_against_simulation(&self) -> Result<()> {
        let referee = Referee::new(&self.config)?;
        let mut alice = referee.alice_device();
        let mut bob = referee.bob_device();
        for (i, r) in self.rounds.iter().enumerate() {
            let round = i as u64;
            let bit = alice.measure(round);
            let outcome = bob.measure(round, bit);
            if bit != r.bit || outcome.to_bits() != r.outcome.to_bits() {
                return Err(Error::Protocol(format!("round {round} does not match the simulation")));
            }
        }
        Ok(())
    }

    /// Number of Alice→Bob branch bits carried in each round.
    pub fn bits_per_round(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.rounds.len()];
        for msg in self.messages() {
            if let (Party::Alice, MessageBody::BranchBit(_)) = (msg.sender, &msg.body) {
                counts[msg.round as usize] += 1;
            }
        }
        counts
    }
}

/// Alice's loop: sends the config, one bit per round and a closing
/// `session_end`. With `stop_after = Some(k)` she hangs up after `k` rounds.
/// Returns the number of rounds sent.
pub fn run_alice<C: Channel>(
    config: &SessionConfig,
    device: &mut AliceDevice,
    channel: &mut C,
    stop_after: Option<u64>,
) -> Result<u64> {
    let send = |ch: &mut C, msg: RoundMessage| ch.send_line(&encode_message(&msg));
    send(channel, RoundMessage::new(0, Party::Alice, MessageBody::SessionConfig(config.clone())))?;
    let rounds = stop_after.map_or(config.shots, |k| k.min(config.shots));
    for round in 0..rounds {
        let bit = device.measure(round);
        send(channel, RoundMessage::new(round, Party::Alice, MessageBody::BranchBit(bit)))?;
    }
    if stop_after.is_none() {
        send(
            channel,
            RoundMessage::new(
                rounds,
                Party::Alice,
                MessageBody::SessionEnd(SessionEnd {
                    shots: rounds,
                    mean: None,
                    stderr: None,
                }),
            ),
        )?;
    }
    channel.flush()?;
    Ok(rounds)
}

/// Bob's loop. With `expected = Some(referee)` the incoming config must
/// match the referee's; otherwise Bob sets up a referee from whatever
/// config arrives. A transport failure after the config ends the session
/// with an incomplete transcript.
pub fn run_bob<C: Channel>(channel: &mut C, expected: Option<&Referee>) -> Result<SessionTranscript> {
    let first = channel
        .recv_line()?
        .ok_or_else(|| Error::Transport("peer closed before sending a session config".into()))?;
    let config = match decode_message(&first)? {
        RoundMessage {
            round: 0,
            sender: Party::Alice,
            body: MessageBody::SessionConfig(c),
        } => c,
        other => {
            return Err(Error::Protocol(format!(
                "expected Alice's session_config, got {} from {}",
                other.body.kind(),
                other.sender
            )))
        }
    };
    let owned;
    let referee = match expected {
        Some(r) if *r.config() != config => {
            return Err(Error::ConfigMismatch(format!(
                "Alice proposed {}, Bob expected {}",
                describe(&config),
                describe(r.config())
            )))
        }
        Some(r) => r,
        None => {
            owned = Referee::new(&config)?;
            &owned
        }
    };
    let mut device = referee.bob_device();
    let mut rounds: Vec<RoundEntry> = Vec::with_capacity(config.shots.min(1 << 20) as usize);
    loop {
        let round = rounds.len() as u64;
        let line = match channel.recv_line() {
            Ok(Some(line)) => line,
            Ok(None) => {
                let reason = format!("Alice disconnected after {round} rounds");
                return Ok(SessionTranscript::from_rounds(config, rounds, Some(reason)));
            }
            Err(e) => return Ok(SessionTranscript::from_rounds(config, rounds, Some(e.to_string()))),
        };
        let msg = decode_message(&line)?;
        match (msg.sender, msg.body) {
            (Party::Alice, MessageBody::BranchBit(bit)) if msg.round == round && round < config.shots => {
                let outcome = device.measure(round, bit);
                rounds.push(RoundEntry { bit, outcome });
            }
            (Party::Alice, MessageBody::SessionEnd(end)) if msg.round == round && end.shots == round => {
                if round != config.shots {
                    return Err(Error::Protocol(format!(
                        "Alice ended after {round} of {} rounds",
                        config.shots
                    )));
                }
                return Ok(SessionTranscript::from_rounds(config, rounds, None));
            }
            (sender, body) => {
                return Err(Error::Protocol(format!(
                    "unexpected {} from {sender} at round {}, expected round {round}",
                    body.kind(),
                    msg.round
                )))
            }
        }
    }
}

fn describe(c: &SessionConfig) -> String {
    format!(
        "d={} witness={} state={} shots={} seed={}",
        c.d, c.witness, c.state, c.shots, c.seed
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transport {
    InProcess,
    /// Bob listens on this endpoint and Alice connects to it.
    Tcp(String),
}

impl FromStr for Transport {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inprocess" => Ok(Transport::InProcess),
            _ => match s.strip_prefix("tcp:") {
                Some(endpoint) if !endpoint.is_empty() => Ok(Transport::Tcp(endpoint.to_string())),
                _ => Err(invalid(format!("unknown transport `{s}` (expected inprocess or tcp:host:port)"))),
            },
        }
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Transport::InProcess => f.write_str("inprocess"),
            Transport::Tcp(endpoint) => write!(f, "tcp:{endpoint}"),
        }
    }
}

/// Runs one full session with Alice and Bob on separate threads.
pub fn run_session(config: &SessionConfig, transport: &Transport) -> Result<SessionTranscript> {
    run_session_truncated(config, transport, None)
}

/// Like [`run_session`], but Alice hangs up after `stop_after` rounds.
pub fn run_session_truncated(
    config: &SessionConfig,
    transport: &Transport,
    stop_after: Option<u64>,
) -> Result<SessionTranscript> {
    let referee = Referee::new(config)?;
    let mut alice = referee.alice_device();
    match transport {
        Transport::InProcess => {
            let (mut a, mut b) = in_process_pair();
            thread::scope(|scope| {
                let handle = scope.spawn(move || run_alice(config, &mut alice, &mut a, stop_after));
                let result = run_bob(&mut b, Some(&referee));
                drop(b);
                let _ = handle.join();
                result
            })
        }
        Transport::Tcp(endpoint) => {
            let server = TcpServer::bind(endpoint, DEFAULT_TIMEOUT)?;
            let addr = server.local_addr()?.to_string();
            thread::scope(|scope| {
                let handle = scope.spawn(move || -> Result<u64> {
                    let mut ch = TcpChannel::connect(&addr, DEFAULT_TIMEOUT)?;
                    run_alice(config, &mut alice, &mut ch, stop_after)
                });
                let result = server.accept().and_then(|mut ch| run_bob(&mut ch, Some(&referee)));
                let alice_result = handle.join().unwrap_or_else(|_| Err(Error::Protocol("Alice panicked".into())));
                match (result, alice_result) {
                    // A failed connect explains a failed accept better.
                    (Err(Error::Transport(_)), Err(e @ Error::Transport(_))) => Err(e),
                    (result, _) => result,
                }
            })
        }
    }
}
