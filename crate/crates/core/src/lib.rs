//! Strong Ramsey game R(K_ℵ0, K^_{2,t}) on the infinite complete graph.
//!
//! * [`game`]: positions on the touched part of the board, move application,
//!   win and threat detection.
//! * [`symmetry`]: canonical keys, automorphisms, symmetry-reduced moves.
//! * [`solver`]: bounded perfect-play search, the independent oracle.
//! * [`strategy`]: the scripted first-player strategy for t = 3.
//! * [`verifier`]: builds and re-checks certificates that the strategy wins.

pub mod game;
pub mod par;
pub mod solver;
pub mod strategy;
pub mod symmetry;
pub mod verifier;

pub use game::{Edge, Endpoint, GameError, GameOutcome, MoveSpec, Player, Position, VertexId};
pub use symmetry::{CanonicalKey, MoveClass, Role, RoleMap, SymmetryError};
