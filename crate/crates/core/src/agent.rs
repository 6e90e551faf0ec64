use std::fmt;

use serde::{Deserialize, Serialize};

/// Opaque agent identifier, unique within one world or one sampled tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for AgentId {
    fn from(id: u32) -> Self {
        AgentId(id)
    }
}

/// A point in the world plane, in world units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_sq(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn distance(&self, other: &Position) -> f64 {
        self.distance_sq(other).sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Displacement per simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub dx: f64,
    pub dy: f64,
}

impl Velocity {
    pub fn from_heading(angle: f64, speed: f64) -> Self {
        Velocity {
            dx: speed * angle.cos(),
            dy: speed * angle.sin(),
        }
    }

    pub fn speed(&self) -> f64 {
        self.dx.hypot(self.dy)
    }
}

/// Full state of one agent in the world.
///
/// Honest agents commit their true position; dishonest agents commit a fake
/// one lying outside their own range of sight. Coerced agents vouch for the
/// committed (possibly fake) positions of dishonest agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub true_pos: Position,
    pub claimed_pos: Position,
    pub range_of_sight: f64,
    pub honest: bool,
    pub coerced: bool,
    pub velocity: Velocity,
}

impl AgentState {
    /// Point the agent looks around when building its neighbour set.
    pub fn vantage(&self) -> Position {
        if self.honest {
            self.true_pos
        } else {
            self.claimed_pos
        }
    }

    /// Whether the honesty invariant between true and committed positions holds.
    pub fn commitment_consistent(&self) -> bool {
        if self.honest {
            self.claimed_pos == self.true_pos
        } else {
            self.claimed_pos.distance(&self.true_pos) > self.range_of_sight
        }
    }
}
