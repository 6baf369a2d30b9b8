//! Messages exchanged with the game client, one JSON object per message,
//! tagged by `kind`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::experiment::trial::Condition;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndSummary {
    pub sup_error: f64,
    pub mean_windowed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum WireMessage {
    Hello {
        client_version: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subject_label: Option<String>,
        /// Reattach to a session whose connection dropped.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resume_session: Option<String>,
    },
    HelloAck {
        session_id: String,
        tick_seconds: f64,
        /// Preview length with no added warning; each trial states its own.
        preview_ticks: usize,
    },
    TrialStart {
        trial_id: String,
        condition: Condition,
        added_delay_ticks: i32,
        added_rate_bits: Option<u32>,
        segment_ticks: u64,
        preview_ticks: usize,
    },
    Frame {
        tick: u64,
        cursor_x: f64,
        trail_now: f64,
        trail_preview: Vec<f64>,
        bump_active: bool,
        /// Signed push of the current bump, so the client can show its direction.
        bump: f64,
    },
    Input {
        client_tick: u64,
        wheel: f64,
    },
    TrialEnd {
        trial_id: String,
        summary: EndSummary,
        complete: bool,
    },
    Metrics {
        trial_id: String,
        windowed_errors: Vec<f64>,
    },
    Error {
        code: String,
        message: String,
    },
}

impl WireMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("wire messages always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        WireMessage::Error { code: code.to_string(), message: message.into() }
    }
}
