//! Newline-delimited JSON messages exchanged between holder and verifier.

use serde::{Deserialize, Serialize};

use super::session::Reason;
use super::{AnswerSheet, ChallengeQuestion, CvError};
use crate::quantum::Axis;
use crate::serial::Serial;

/// Reported bit, spelled `"0"` or `"1"` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Bit {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
}

impl From<u8> for Bit {
    fn from(b: u8) -> Self {
        if b == 0 {
            Bit::Zero
        } else {
            Bit::One
        }
    }
}

impl From<Bit> for u8 {
    fn from(b: Bit) -> Self {
        match b {
            Bit::Zero => 0,
            Bit::One => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Message {
    Hello { serial: Serial },
    Challenge { question_id: u64, axes: Vec<Axis> },
    Answer { question_id: u64, outcomes: Vec<Vec<[Bit; 2]>> },
    Verdict { accepted: bool, reason: Reason },
    Error { message: String },
}

impl Message {
    /// One JSON object without the trailing newline.
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("messages always serialize")
    }

    pub fn parse(line: &str) -> Result<Self, CvError> {
        serde_json::from_str(line.trim_end_matches(['\r', '\n'])).map_err(|e| CvError::Protocol(e.to_string()))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Message::Hello { .. } => "hello",
            Message::Challenge { .. } => "challenge",
            Message::Answer { .. } => "answer",
            Message::Verdict { .. } => "verdict",
            Message::Error { .. } => "error",
        }
    }
}

impl From<&ChallengeQuestion> for Message {
    fn from(q: &ChallengeQuestion) -> Self {
        Message::Challenge { question_id: q.question_id, axes: q.axes.clone() }
    }
}

impl From<&AnswerSheet> for Message {
    fn from(a: &AnswerSheet) -> Self {
        let outcomes = a.outcomes.iter().map(|b| b.iter().map(|p| [p[0].into(), p[1].into()]).collect()).collect();
        Message::Answer { question_id: a.question_id, outcomes }
    }
}

impl AnswerSheet {
    pub fn from_wire(question_id: u64, outcomes: &[Vec<[Bit; 2]>]) -> Self {
        let outcomes = outcomes.iter().map(|b| b.iter().map(|p| [p[0].into(), p[1].into()]).collect()).collect();
        AnswerSheet { question_id, outcomes }
    }
}
