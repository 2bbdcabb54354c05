//! Tolerances shared by every verifier.
//!
//! Limits and almost-everywhere statements become inequalities with an
//! explicit slack. All slacks are collected here so a run can be audited (and
//! overridden from a JSON file) in one place.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Coefficient of the time step in the discretization slack.
    pub time_coeff: f64,
    /// Coefficient of the spatial resolution in the discretization slack.
    pub space_coeff: f64,
    /// Additive floor of every discretization slack.
    pub floor: f64,
    /// Duality gap of the transport solver.
    pub ot_gap: f64,
    /// Complementary slackness residual of the transport solver.
    pub ot_slackness: f64,
    /// Exact identities evaluated in floating point.
    pub exact: f64,
    /// Mass conservation of the heat flow, per step.
    pub mass: f64,
    /// Horizontal-vertical sandwich, before the first-step allowance.
    pub sandwich: f64,
    /// Endpoint agreement required of Benamou-Brenier candidates.
    pub endpoint: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            time_coeff: 1.0,
            space_coeff: 1.0,
            floor: 1e-9,
            ot_gap: 1e-9,
            ot_slackness: 1e-8,
            exact: 1e-10,
            mass: 1e-12,
            sandwich: 1e-8,
            endpoint: 1e-10,
        }
    }
}

impl Tolerances {
    /// `a·Δt + b·h + floor`, with `h` the spatial resolution (largest edge length).
    pub fn discretization(&self, dt: f64, h: f64) -> f64 {
        self.time_coeff * dt + self.space_coeff * h + self.floor
    }
}
