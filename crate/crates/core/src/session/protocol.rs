//! JSON messages exchanged over the websocket, one message per text frame.
//! Every message carries a `type` tag.

use serde::{Deserialize, Serialize};

use super::{ClientInput, SessionConfig, StateFrame};
use crate::harness::metrics::TrialPerformance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Hello(SessionConfig),
    Input(ClientInput),
    Bye,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Frame(StateFrame),
    Summary(TrialPerformance),
    Bye { reason: String },
}

impl ClientMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("client messages always serialize")
    }
}

impl ServerMessage {
    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages always serialize")
    }

    pub fn bye(reason: impl Into<String>) -> Self {
        Self::Bye { reason: reason.into() }
    }
}
