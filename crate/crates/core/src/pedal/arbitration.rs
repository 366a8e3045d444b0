use serde::{Deserialize, Serialize};

/// Width of the do-nothing band below the commanded speed, m/s.
pub const COAST_BAND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accelerate,
    /// Both pedals released; the car slows on engine braking.
    Coast,
    Brake,
}

impl Action {
    pub fn code(self) -> f64 {
        match self {
            Action::Accelerate => 1.0,
            Action::Coast => 0.0,
            Action::Brake => -1.0,
        }
    }
}

pub fn select_action(vcmd: f64, v: f64) -> Action {
    let e = vcmd - v;
    if e > 0.0 {
        Action::Accelerate
    } else if e >= -COAST_BAND {
        Action::Coast
    } else {
        Action::Brake
    }
}
