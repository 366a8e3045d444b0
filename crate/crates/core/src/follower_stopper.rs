//! FollowerStopper target-speed law.
//!
//! The commanded speed is piecewise linear in the gap with three thresholds
//! that widen quadratically with the closing speed to the leader.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FollowerStopperParams {
    /// Base gaps Δx⁰ₖ, m.
    pub base_gaps: [f64; 3],
    /// Deceleration constants dₖ, m/s².
    pub decels: [f64; 3],
    /// Maximum road speed U, m/s.
    pub max_speed: f64,
}

impl Default for FollowerStopperParams {
    fn default() -> Self {
        Self {
            base_gaps: [4.5, 5.25, 6.0],
            decels: [1.5, 1.0, 0.5],
            max_speed: 7.0,
        }
    }
}

impl FollowerStopperParams {
    pub fn validate(&self) -> Result<()> {
        let g = self.base_gaps;
        let d = self.decels;
        if g.iter().chain(&d).any(|x| !(*x > 0.0)) || !(self.max_speed > 0.0) {
            return Err(Error::InvalidConfig(
                "FollowerStopper constants must be positive".into(),
            ));
        }
        if !(g[0] < g[1] && g[1] < g[2]) {
            return Err(Error::InvalidConfig(
                "FollowerStopper base gaps must be strictly increasing".into(),
            ));
        }
        if !(d[0] > d[1] && d[1] > d[2]) {
            return Err(Error::InvalidConfig(
                "FollowerStopper decelerations must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

/// Gap thresholds Δxₖ = Δx⁰ₖ + (Δv₋)² / (2dₖ).
///
/// `dv_minus` is the negative part of `v_lead − v` (zero or negative).
pub fn compute_thresholds(dv_minus: f64, p: &FollowerStopperParams) -> [f64; 3] {
    let sq = dv_minus * dv_minus;
    std::array::from_fn(|k| p.base_gaps[k] + sq / (2.0 * p.decels[k]))
}

/// Commanded speed for the given (possibly corrupted) gap and speeds.
pub fn compute_vcmd(gap: f64, v: f64, v_lead: f64, p: &FollowerStopperParams) -> f64 {
    let dv_minus = (v_lead - v).min(0.0);
    let [x1, x2, x3] = compute_thresholds(dv_minus, p);
    let u = p.max_speed;
    if gap <= x1 {
        0.0
    } else if gap <= x2 {
        v * (gap - x1) / (x2 - x1)
    } else if gap <= x3 {
        // clamped: rounding can overshoot U by an ulp at the upper knot
        (v + (u - v) * (gap - x2) / (x3 - x2)).clamp(v.min(u), v.max(u))
    } else {
        u
    }
}
