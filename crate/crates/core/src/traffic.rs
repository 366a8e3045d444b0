//! Improved IDM blended with the constant-acceleration heuristic (IIDM-ACC),
//! driving the simulated traffic cars.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard braking limit applied to every car-following output, m/s².
pub const MAX_DECEL: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IidmAccParams {
    /// Desired speed v0, m/s.
    pub desired_speed: f64,
    /// Desired time headway T, s.
    pub time_headway: f64,
    /// Standstill gap s0, m.
    pub min_gap: f64,
    /// Maximum acceleration a, m/s².
    pub max_accel: f64,
    /// Comfortable deceleration b, m/s².
    pub comfortable_decel: f64,
    /// Free-road exponent δ.
    pub accel_exponent: f64,
    /// CAH coolness factor c in [0, 1].
    pub coolness: f64,
}

impl Default for IidmAccParams {
    fn default() -> Self {
        Self {
            desired_speed: 7.0,
            // (gap - s0) / v at the 4 m/s, 8.066 m equilibrium of the default ring
            time_headway: 1.5165,
            min_gap: 2.0,
            max_accel: 1.0,
            comfortable_decel: 1.5,
            accel_exponent: 4.0,
            coolness: 0.99,
        }
    }
}

impl IidmAccParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.desired_speed,
            self.time_headway,
            self.min_gap,
            self.max_accel,
            self.comfortable_decel,
        ];
        if positive.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidConfig(
                "IIDM parameters must all be positive".into(),
            ));
        }
        if !(self.accel_exponent >= 1.0) {
            return Err(Error::InvalidConfig("IIDM exponent must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.coolness) {
            return Err(Error::InvalidConfig("CAH coolness must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Time headway that puts the IIDM equilibrium at `speed` with gap `gap`.
    pub fn calibrated_headway(speed: f64, gap: f64, min_gap: f64) -> f64 {
        (gap - min_gap) / speed
    }
}

/// Desired dynamic gap s* = s0 + max(0, vT + vΔv / (2√(ab))), Δv = v − v_lead.
pub fn desired_gap(v: f64, v_lead: f64, p: &IidmAccParams) -> f64 {
    let dv = v - v_lead;
    let dynamic = v * p.time_headway + v * dv / (2.0 * (p.max_accel * p.comfortable_decel).sqrt());
    p.min_gap + dynamic.max(0.0)
}

/// Improved-IDM acceleration.
pub fn iidm_accel(v: f64, gap: f64, v_lead: f64, p: &IidmAccParams) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::NonPositiveGap { gap });
    }
    let a = p.max_accel;
    let v0 = p.desired_speed;
    let z = desired_gap(v, v_lead, p) / gap;

    let accel = if v <= v0 {
        let a_free = a * (1.0 - (v / v0).powf(p.accel_exponent));
        if z >= 1.0 {
            a * (1.0 - z * z)
        } else if a_free <= 0.0 {
            // v == v0: z^(2a/a_free) -> 0 as the exponent diverges
            a_free
        } else {
            a_free * (1.0 - z.powf(2.0 * a / a_free))
        }
    } else {
        let b = p.comfortable_decel;
        let a_free = -b * (1.0 - (v0 / v).powf(a * p.accel_exponent / b));
        if z >= 1.0 {
            a_free + a * (1.0 - z * z)
        } else {
            a_free
        }
    };
    Ok(accel)
}

/// Constant-acceleration-heuristic acceleration.
pub fn cah_accel(v: f64, v_lead: f64, gap: f64, a_lead: f64, p: &IidmAccParams) -> f64 {
    let a_eff = a_lead.min(p.max_accel);
    let dv = v - v_lead;
    if v_lead * dv <= -2.0 * gap * a_eff {
        let denom = v_lead * v_lead - 2.0 * gap * a_eff;
        if denom <= 0.0 {
            return a_eff;
        }
        v * v * a_eff / denom
    } else {
        let closing = dv.max(0.0);
        a_eff - closing * closing / (2.0 * gap)
    }
}

/// Blends the IIDM output with the CAH estimate; output clamped to
/// `[-MAX_DECEL, max_accel]`.
pub fn cah_blend(
    a_iidm: f64,
    v: f64,
    v_lead: f64,
    gap: f64,
    a_lead: f64,
    p: &IidmAccParams,
) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::NonPositiveGap { gap });
    }
    let a_cah = cah_accel(v, v_lead, gap, a_lead, p);
    let blended = if a_iidm >= a_cah {
        a_iidm
    } else {
        let b = p.comfortable_decel;
        (1.0 - p.coolness) * a_iidm + p.coolness * (a_cah + b * ((a_iidm - a_cah) / b).tanh())
    };
    Ok(blended.clamp(-MAX_DECEL, p.max_accel))
}

/// Full IIDM-ACC acceleration for one traffic car.
pub fn iidm_acc(v: f64, gap: f64, v_lead: f64, a_lead: f64, p: &IidmAccParams) -> Result<f64> {
    let a_iidm = iidm_accel(v, gap, v_lead, p)?;
    cah_blend(a_iidm, v, v_lead, gap, a_lead, p)
}
