use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub const ACCELERATOR: PidGains = PidGains {
        kp: 1.0,
        ki: 0.01,
        kd: 0.05,
    };
    /// Brake gains as published, negative integral gain included.
    pub const BRAKE: PidGains = PidGains {
        kp: 0.7,
        ki: -0.04,
        kd: 0.1,
    };
}

/// Speed-error PID producing a normalized pedal target in `[0, 1]`.
///
/// Anti-windup is conditional integration: the accumulator only moves while
/// the unclamped output is inside the actuator range, and it is also bounded
/// in magnitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidState {
    pub gains: PidGains,
    pub integral: f64,
    pub prev_error: f64,
    pub derivative: f64,
    pub output: f64,
    /// First-order derivative filter cutoff; `None` uses the raw difference.
    pub derivative_cutoff_hz: Option<f64>,
    pub integral_bound: f64,
}

impl PidState {
    pub fn new(gains: PidGains) -> Self {
        Self {
            gains,
            integral: 0.0,
            prev_error: 0.0,
            derivative: 0.0,
            output: 0.0,
            derivative_cutoff_hz: None,
            integral_bound: f64::INFINITY,
        }
    }

    pub fn with_derivative_filter(mut self, cutoff_hz: f64) -> Self {
        self.derivative_cutoff_hz = Some(cutoff_hz);
        self
    }

    pub fn with_integral_bound(mut self, bound: f64) -> Self {
        self.integral_bound = bound;
        self
    }

    /// Clears the controller and seeds the error history with `error`, so the
    /// first step after activation produces no derivative kick.
    pub fn reset(&mut self, error: f64) {
        self.integral = 0.0;
        self.prev_error = error;
        self.derivative = 0.0;
        self.output = 0.0;
    }

    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        let raw_derivative = (error - self.prev_error) / dt;
        self.derivative = match self.derivative_cutoff_hz {
            Some(fc) => {
                let tau = 1.0 / (2.0 * std::f64::consts::PI * fc);
                let alpha = dt / (dt + tau);
                self.derivative + alpha * (raw_derivative - self.derivative)
            }
            None => raw_derivative,
        };
        self.prev_error = error;

        let candidate = (self.integral + error * dt).clamp(-self.integral_bound, self.integral_bound);
        let g = self.gains;
        let unclamped = g.kp * error + g.ki * candidate + g.kd * self.derivative;
        if (0.0..=1.0).contains(&unclamped) {
            self.integral = candidate;
            self.output = unclamped;
        } else {
            let frozen = g.kp * error + g.ki * self.integral + g.kd * self.derivative;
            self.output = frozen.clamp(0.0, 1.0);
        }
        self.output
    }
}

/// One controller update; returns the new state and its normalized target.
pub fn pid_step(state: &PidState, error: f64, dt: f64) -> (PidState, f64) {
    let mut next = state.clone();
    let out = next.step(error, dt);
    (next, out)
}
