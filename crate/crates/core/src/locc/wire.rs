//! Line-oriented wire messages.
//!
//! ```text
//! kind=session_config round=0 sender=alice d=2 witness=riccardi:1:0:default state=werner:1 shots=10 seed=7
//! kind=branch_bit round=3 sender=alice bit=1
//! kind=outcome_report round=3 sender=bob outcome=-0.5
//! kind=session_end round=10 sender=referee shots=10 mean=-0.45 stderr=0.1
//! ```
//!
//! Reals are written in shortest round-trip form, so decoding is bit-exact.

use std::fmt;
use std::str::FromStr;

use crate::record::{DecodeError, Record};

use super::session::SessionConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Party {
    Alice,
    Bob,
    Referee,
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Party::Alice => "alice",
            Party::Bob => "bob",
            Party::Referee => "referee",
        })
    }
}

impl FromStr for Party {
    type Err = DecodeError;
    fn from_str(s: &str) -> Result<Self, DecodeError> {
        match s {
            "alice" => Ok(Party::Alice),
            "bob" => Ok(Party::Bob),
            "referee" => Ok(Party::Referee),
            _ => Err(DecodeError::new("sender", format!("unknown party `{s}`"))),
        }
    }
}

/// Closing summary; `mean`/`stderr` are undefined for an empty session or
/// when sent by a party that does not hold the estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SessionEnd {
    pub shots: u64,
    pub mean: Option<f64>,
    pub stderr: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MessageBody {
    SessionConfig(SessionConfig),
    BranchBit(u8),
    OutcomeReport(f64),
    SessionEnd(SessionEnd),
}

impl MessageBody {
    pub fn kind(&self) -> &'static str {
        match self {
            MessageBody::SessionConfig(_) => "session_config",
            MessageBody::BranchBit(_) => "branch_bit",
            MessageBody::OutcomeReport(_) => "outcome_report",
            MessageBody::SessionEnd(_) => "session_end",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundMessage {
    pub round: u64,
    pub sender: Party,
    pub body: MessageBody,
}

impl RoundMessage {
    pub fn new(round: u64, sender: Party, body: MessageBody) -> Self {
        Self { round, sender, body }
    }
}

const UNDEFINED: &str = "undefined";

fn optional(value: Option<f64>) -> String {
    value.map_or_else(|| UNDEFINED.to_string(), |v| v.to_string())
}

fn parse_optional(rec: &Record, name: &str) -> Result<Option<f64>, DecodeError> {
    match rec.require(name)? {
        UNDEFINED => Ok(None),
        _ => rec.parse_field(name).map(Some),
    }
}

fn to_record(msg: &RoundMessage) -> Record {
    let rec = Record::new()
        .field("kind", msg.body.kind())
        .field("round", msg.round)
        .field("sender", msg.sender);
    match &msg.body {
        MessageBody::SessionConfig(c) => rec
            .field("d", c.d)
            .field("witness", &c.witness)
            .field("state", &c.state)
            .field("shots", c.shots)
            .field("seed", c.seed),
        MessageBody::BranchBit(bit) => rec.field("bit", bit),
        MessageBody::OutcomeReport(x) => rec.field("outcome", x),
        MessageBody::SessionEnd(end) => rec
            .field("shots", end.shots)
            .field("mean", optional(end.mean))
            .field("stderr", optional(end.stderr)),
    }
}

/// One newline-terminated line.
pub fn encode_message(msg: &RoundMessage) -> String {
    format!("{}\n", to_record(msg))
}

pub fn decode_message(line: &str) -> Result<RoundMessage, DecodeError> {
    let rec = Record::parse(line)?;
    let kind = rec.require("kind")?;
    let round: u64 = rec.parse_field("round")?;
    let sender: Party = rec.require("sender")?.parse()?;
    let body = match kind {
        "session_config" => {
            rec.only(&["kind", "round", "sender", "d", "witness", "state", "shots", "seed"])?;
            let witness = rec.require("witness")?;
            let state = rec.require("state")?;
            MessageBody::SessionConfig(SessionConfig {
                d: rec.parse_field("d")?,
                witness: witness
                    .parse()
                    .map_err(|e| DecodeError::new("witness", format!("{e}")))?,
                state: state
                    .parse()
                    .map_err(|e| DecodeError::new("state", format!("{e}")))?,
                shots: rec.parse_field("shots")?,
                seed: rec.parse_field("seed")?,
            })
        }
        "branch_bit" => {
            rec.only(&["kind", "round", "sender", "bit"])?;
            let bit: u8 = rec.parse_field("bit")?;
            if bit > 1 {
                return Err(DecodeError::new("bit", format!("branch bit must be 0 or 1, got {bit}")));
            }
            MessageBody::BranchBit(bit)
        }
        "outcome_report" => {
            rec.only(&["kind", "round", "sender", "outcome"])?;
            MessageBody::OutcomeReport(rec.parse_field("outcome")?)
        }
        "session_end" => {
            rec.only(&["kind", "round", "sender", "shots", "mean", "stderr"])?;
            MessageBody::SessionEnd(SessionEnd {
                shots: rec.parse_field("shots")?,
                mean: parse_optional(&rec, "mean")?,
                stderr: parse_optional(&rec, "stderr")?,
            })
        }
        other => return Err(DecodeError::new("kind", format!("unknown message kind `{other}`"))),
    };
    Ok(RoundMessage { round, sender, body })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_bit_line() {
        let msg = RoundMessage::new(3, Party::Alice, MessageBody::BranchBit(1));
        let line = encode_message(&msg);
        assert_eq!(line, "kind=branch_bit round=3 sender=alice bit=1\n");
        assert_eq!(decode_message(&line).unwrap(), msg);
    }

    #[test]
    fn config_and_end_round_trip() {
        let config = SessionConfig {
            d: 2,
            witness: "riccardi:0.6:0.8:psi+,phi-".parse().unwrap(),
            state: "random:5:2".parse().unwrap(),
            shots: 10,
            seed: 99,
        };
        for body in [
            MessageBody::SessionConfig(config),
            MessageBody::SessionEnd(SessionEnd { shots: 0, mean: None, stderr: None }),
            MessageBody::SessionEnd(SessionEnd { shots: 4, mean: Some(-0.1), stderr: Some(1e-300) }),
            MessageBody::OutcomeReport(-0.0),
        ] {
            let msg = RoundMessage::new(0, Party::Referee, body);
            assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
        }
    }

    #[test]
    fn decode_errors_name_the_field() {
        let field = |line: &str| decode_message(line).unwrap_err().field;
        assert_eq!(field("kind=branch_bit round=3 sender=alice"), "bit");
        assert_eq!(field("kind=branch_bit round=3 sender=alice bit=2"), "bit");
        assert_eq!(field("kind=branch_bit round=x sender=alice bit=0"), "round");
        assert_eq!(field("kind=branch_bit round=1 sender=carol bit=0"), "sender");
        assert_eq!(field("kind=hello round=1 sender=bob"), "kind");
        assert_eq!(field("kind=outcome_report round=1 sender=bob outcome=0.5 bit=1"), "bit");
        assert_eq!(field("kind=branch_bit round=3 sen"), "sen");
        assert_eq!(field("kind=session_config round=0 sender=alice d=2"), "witness");
    }
}
