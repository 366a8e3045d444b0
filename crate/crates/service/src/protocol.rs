//! Wire messages. Every WebSocket text frame carries exactly one JSON
//! message, discriminated by its `type` field.

use ringjam::{Condition, EndReason, PedalCommand, SessionMetrics};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Start {
        condition: Condition,
        seed: u64,
        /// Rejected when present and different from [`SCHEMA_VERSION`].
        #[serde(default, skip_serializing_if = "Option::is_none")]
        schema_version: Option<u32>,
    },
    Input {
        #[serde(default)]
        accel_force: PedalCommand,
        #[serde(default)]
        brake_force: PedalCommand,
    },
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleView {
    pub id: usize,
    /// Front bumper position along the ring in `[0, C)`, m.
    pub position: f64,
    pub speed: f64,
    pub is_ego: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoView {
    pub gap: f64,
    pub v: f64,
    pub vcmd: f64,
    #[serde(rename = "S_acc")]
    pub s_acc: f64,
    #[serde(rename = "S_brake")]
    pub s_brake: f64,
    #[serde(rename = "K_hc")]
    pub k_hc: f64,
    /// Automation's accelerator target, normalized.
    #[serde(rename = "S_target")]
    pub s_target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventName {
    Failure,
    Collision,
    JamDissipated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndSummary {
    pub reason: EndReason,
    pub duration: f64,
    pub steps: usize,
    pub mean_speed: f64,
    pub min_gap: f64,
    pub braking_instances: u32,
    pub collision: bool,
    pub min_gap_after_failure: Option<f64>,
    /// Full session metrics; absent when the session was too short.
    pub metrics: Option<SessionMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    State {
        schema_version: u32,
        t: f64,
        circumference: f64,
        vehicles: Vec<VehicleView>,
        ego: EgoView,
    },
    Event {
        t: f64,
        kind: EventName,
    },
    End {
        summary: EndSummary,
    },
    Error {
        message: String,
    },
}

impl ServerMessage {
    pub fn error(message: impl Into<String>) -> Self {
        ServerMessage::Error {
            message: message.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

pub fn parse_client(text: &str) -> Result<ClientMessage, String> {
    serde_json::from_str(text).map_err(|e| format!("malformed message: {e}"))
}
