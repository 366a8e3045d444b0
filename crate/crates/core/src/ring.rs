//! Single-lane circular road: geometry, kinematics, and collision detection.
//!
//! Vehicles are stored in ring order. Vehicle `i` follows vehicle `i - 1`, and
//! vehicle `0` follows the last vehicle across the seam. Positions are kept
//! unwrapped (odometer style) so that gaps are a telescoping difference and an
//! overlap shows up as a negative gap instead of aliasing to a large one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default bound on the magnitude of any commanded acceleration, m/s².
pub const DEFAULT_ACCEL_BOUND: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingRoad {
    radius: f64,
    circumference: f64,
}

impl RingRoad {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "ring radius must be positive, got {radius}"
            )));
        }
        Ok(Self {
            radius,
            circumference: 2.0 * std::f64::consts::PI * radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn circumference(&self) -> f64 {
        self.circumference
    }

    /// Wraps an arc-length coordinate into `[0, circumference)`.
    pub fn wrap(&self, s: f64) -> f64 {
        let w = s.rem_euclid(self.circumference);
        // rem_euclid can round up to exactly the modulus for tiny negative inputs
        if w >= self.circumference {
            0.0
        } else {
            w
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: usize,
    /// Unwrapped front-bumper arc position. Use [`WorldState::front_position`]
    /// for the wrapped coordinate.
    pub position: f64,
    pub speed: f64,
    pub length: f64,
    pub is_ego: bool,
}

/// Collision between a follower and its leader (gap reached zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Collision {
    pub follower: usize,
    pub leader: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub road: RingRoad,
    pub vehicles: Vec<VehicleState>,
    pub time: f64,
    pub accel_bound: f64,
}

impl WorldState {
    /// Builds a world from vehicles listed in ring order with unwrapped
    /// positions already consistent with that order.
    pub fn new(road: RingRoad, vehicles: Vec<VehicleState>) -> Result<Self> {
        if vehicles.len() < 2 {
            return Err(Error::InvalidConfig(
                "a ring needs at least two vehicles".into(),
            ));
        }
        if let Some(v) = vehicles.iter().find(|v| !(v.length > 0.0) || v.speed < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "vehicle {} has invalid length or speed",
                v.id
            )));
        }
        Ok(Self {
            road,
            vehicles,
            time: 0.0,
            accel_bound: DEFAULT_ACCEL_BOUND,
        })
    }

    /// Builds a world from wrapped front positions listed in ring order
    /// (each vehicle follows the previous one; the first follows the last).
    pub fn from_fronts(road: RingRoad, mut vehicles: Vec<VehicleState>) -> Result<Self> {
        let c = road.circumference();
        for i in 1..vehicles.len() {
            let ahead = vehicles[i - 1].position;
            let behind = road.wrap(vehicles[i].position);
            let spacing = (ahead - behind).rem_euclid(c);
            vehicles[i].position = ahead - spacing;
        }
        Self::new(road, vehicles)
    }

    pub fn len(&self) -> usize {
        self.vehicles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vehicles.is_empty()
    }

    pub fn leader_of(&self, i: usize) -> usize {
        if i == 0 {
            self.vehicles.len() - 1
        } else {
            i - 1
        }
    }

    pub fn follower_of(&self, i: usize) -> usize {
        (i + 1) % self.vehicles.len()
    }

    pub fn front_position(&self, i: usize) -> f64 {
        self.road.wrap(self.vehicles[i].position)
    }

    /// Bumper-to-bumper gap from vehicle `i` to its leader, in meters.
    ///
    /// Equals `(leader rear − own front) mod circumference` on any
    /// collision-free world; overlapping vehicles yield a value `≤ 0`.
    pub fn gap_to_leader(&self, i: usize) -> f64 {
        let leader = &self.vehicles[self.leader_of(i)];
        let me = &self.vehicles[i];
        let seam = if i == 0 { self.road.circumference() } else { 0.0 };
        leader.position + seam - leader.length - me.position
    }

    pub fn gaps(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.gap_to_leader(i)).collect()
    }

    /// `Σ gaps + Σ lengths − circumference`; zero up to rounding.
    pub fn conservation_residual(&self) -> f64 {
        let gaps: f64 = self.gaps().iter().sum();
        let lengths: f64 = self.vehicles.iter().map(|v| v.length).sum();
        gaps + lengths - self.road.circumference()
    }

    /// Advances every vehicle by one fixed step.
    ///
    /// Uses the ballistic update: speed `v ← max(0, v + a·dt)` and the exact
    /// constant-acceleration displacement over the step. When a vehicle stops
    /// inside the step it covers only its stopping distance `v²/(2|a|)`.
    pub fn advance(&mut self, accelerations: &[f64], dt: f64) {
        assert_eq!(
            accelerations.len(),
            self.vehicles.len(),
            "one acceleration per vehicle"
        );
        assert!(dt > 0.0, "dt must be positive");
        let bound = self.accel_bound;
        for (veh, &a) in self.vehicles.iter_mut().zip(accelerations) {
            let a = a.clamp(-bound, bound);
            let v = veh.speed;
            let v_new = v + a * dt;
            if v_new >= 0.0 {
                veh.position += 0.5 * (v + v_new) * dt;
                veh.speed = v_new;
            } else {
                veh.position += -v * v / (2.0 * a);
                veh.speed = 0.0;
            }
        }
        self.time += dt;
    }

    /// First follower/leader pair whose gap is `≤ 0`, scanning from the ego.
    pub fn detect_collision(&self) -> Option<Collision> {
        (0..self.len()).find_map(|i| {
            let gap = self.gap_to_leader(i);
            (gap <= 0.0).then(|| Collision {
                follower: self.vehicles[i].id,
                leader: self.vehicles[self.leader_of(i)].id,
                gap,
            })
        })
    }

    pub fn min_speed(&self) -> f64 {
        self.vehicles
            .iter()
            .map(|v| v.speed)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Geometry of the concentrated initial jam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingConfig {
    pub radius: f64,
    pub vehicles: usize,
    pub vehicle_length: f64,
    pub jam_gap: f64,
    pub accel_bound: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        Self {
            radius: 42.0,
            vehicles: 21,
            vehicle_length: 4.5,
            jam_gap: 1.5,
            accel_bound: DEFAULT_ACCEL_BOUND,
        }
    }
}

/// Ego at arc position 0 with every traffic car queued bumper-to-bumper behind
/// it, all at rest. The ego's leader is the last car of the queue, across the
/// empty part of the ring.
pub fn init_scenario(cfg: &RingConfig) -> Result<WorldState> {
    let road = RingRoad::new(cfg.radius)?;
    if cfg.vehicles < 2 {
        return Err(Error::InvalidConfig("need at least two vehicles".into()));
    }
    if !(cfg.vehicle_length > 0.0) || cfg.jam_gap < 0.0 {
        return Err(Error::InvalidConfig(
            "vehicle length must be positive and jam gap non-negative".into(),
        ));
    }
    let n = cfg.vehicles as f64;
    let occupied = n * cfg.vehicle_length + (n - 1.0) * cfg.jam_gap;
    if occupied >= road.circumference() {
        return Err(Error::InvalidConfig(format!(
            "{} vehicles of length {} m with jam gap {} m need {occupied:.3} m, ring is {:.3} m",
            cfg.vehicles,
            cfg.vehicle_length,
            cfg.jam_gap,
            road.circumference()
        )));
    }
    let pitch = cfg.vehicle_length + cfg.jam_gap;
    let vehicles = (0..cfg.vehicles)
        .map(|k| VehicleState {
            id: k,
            position: -(k as f64) * pitch,
            speed: 0.0,
            length: cfg.vehicle_length,
            is_ego: k == 0,
        })
        .collect();
    let mut world = WorldState::new(road, vehicles)?;
    world.accel_bound = cfg.accel_bound;
    Ok(world)
}
