//! First-player winning strategy for K^_{2,3} as a phase machine.
//!
//! The opening claims a triangle-with-pendant shape in four moves; each of the
//! middle phases then builds a K^_{2,2} while denying the second player a
//! threat, and the end phase grows three forced threats from one main vertex
//! before finishing with a double threat. Named vertices live in a
//! [`RoleMap`] so every "without loss of generality" is an explicit relabel.
//!
//! Moves are computed on the canonical form of the role-annotated position
//! and mapped back, which makes the strategy equivariant: isomorphic inputs
//! get isomorphic replies.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Edge, Endpoint, GameError, GameOutcome, MoveSpec, Player, Position, VertexId};
use crate::solver::{SearchLimits, Solver};
use crate::symmetry::{self, relabel_move, Role, RoleMap, SymmetryError};

/// Ply bound used when sizing fallback searches and opening sub-verifications.
pub const DEFAULT_PLY_BOUND: u32 = 24;
pub const DEFAULT_FALLBACK_BUDGET: u64 = 5_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "OPENING")]
    Opening,
    #[serde(rename = "TRIANGLE")]
    Triangle,
    #[serde(rename = "MAINLEM")]
    MainLem,
    #[serde(rename = "SPCASE1")]
    SpCase1,
    #[serde(rename = "CASE_C")]
    CaseC,
    #[serde(rename = "END_POSITION")]
    EndPosition,
    #[serde(rename = "FINISH_DOUBLE_THREAT")]
    FinishDoubleThreat,
    #[serde(rename = "FALLBACK")]
    Fallback,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Opening => "OPENING",
            Phase::Triangle => "TRIANGLE",
            Phase::MainLem => "MAINLEM",
            Phase::SpCase1 => "SPCASE1",
            Phase::CaseC => "CASE_C",
            Phase::EndPosition => "END_POSITION",
            Phase::FinishDoubleThreat => "FINISH_DOUBLE_THREAT",
            Phase::Fallback => "FALLBACK",
        }
    }

    pub fn from_label(s: &str) -> Option<Phase> {
        [
            Phase::Opening,
            Phase::Triangle,
            Phase::MainLem,
            Phase::SpCase1,
            Phase::CaseC,
            Phase::EndPosition,
            Phase::FinishDoubleThreat,
            Phase::Fallback,
        ]
        .into_iter()
        .find(|p| p.label() == s)
    }

    /// Edges of the phase DAG (staying in a phase is always allowed).
    pub fn may_advance_to(self, next: Phase) -> bool {
        use Phase::*;
        self == next
            || matches!(
                (self, next),
                (Opening, Triangle | MainLem | SpCase1 | CaseC | Fallback)
                    | (Triangle | MainLem | SpCase1 | CaseC, EndPosition)
                    | (EndPosition, FinishDoubleThreat)
            )
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How the opening continues after the second player's third edge when his
/// first edge avoided `a` and `b`. The two special-case tracks play the same
/// script; they differ in whether the third edge touches `c`, which decides
/// the relabeling used when `cd` gets blocked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpeningClass {
    /// `bc`, then the triangle-with-pendant phase.
    #[serde(rename = "GENERIC")]
    Generic,
    /// `bc`; if `cd` is taken, the special-case line through `cx`.
    #[serde(rename = "CRITICAL_A")]
    CriticalA,
    /// As `CriticalA`, reached with `b` and `c` exchanged.
    #[serde(rename = "CRITICAL_B")]
    CriticalB,
    /// `az` for a fresh `z` and the three-way reply table.
    #[serde(rename = "CRITICAL_C")]
    CriticalC,
    /// No scripted line certified; play by bounded search.
    #[serde(rename = "UNRESOLVED")]
    Unresolved,
}

impl OpeningClass {
    pub fn label(self) -> &'static str {
        match self {
            OpeningClass::Generic => "GENERIC",
            OpeningClass::CriticalA => "CRITICAL_A",
            OpeningClass::CriticalB => "CRITICAL_B",
            OpeningClass::CriticalC => "CRITICAL_C",
            OpeningClass::Unresolved => "UNRESOLVED",
        }
    }

    pub fn from_label(s: &str) -> Option<OpeningClass> {
        [
            OpeningClass::Generic,
            OpeningClass::CriticalA,
            OpeningClass::CriticalB,
            OpeningClass::CriticalC,
            OpeningClass::Unresolved,
        ]
        .into_iter()
        .find(|c| c.label() == s)
    }

    /// Scripted continuations in the order the classifier tries them
    /// (`CriticalB` is `CriticalA` under another name).
    pub const SCRIPTED: [OpeningClass; 3] = [OpeningClass::Generic, OpeningClass::CriticalA, OpeningClass::CriticalC];
}

/// A symmetry of the position after three moves each: `b` and `d` are both
/// joined to `a` by P1 and to each other by P2, and `x`, `y` are the ends of
/// P2's first edge.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relabel {
    pub swap_bd: bool,
    pub swap_xy: bool,
}

impl Relabel {
    pub const ALL: [Relabel; 4] = [
        Relabel { swap_bd: false, swap_xy: false },
        Relabel { swap_bd: true, swap_xy: false },
        Relabel { swap_bd: false, swap_xy: true },
        Relabel { swap_bd: true, swap_xy: true },
    ];

    pub fn apply(self, roles: &mut RoleMap) {
        if self.swap_bd {
            roles.swap(Role::B, Role::D);
        }
        if self.swap_xy {
            roles.swap(Role::X, Role::Y);
        }
    }

    pub fn label(self) -> &'static str {
        match (self.swap_bd, self.swap_xy) {
            (false, false) => "id",
            (true, false) => "b<->d",
            (false, true) => "x<->y",
            (true, true) => "b<->d,x<->y",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct StrategyState {
    pub phase: Phase,
    pub roles: RoleMap,
    /// Progress inside the phase (which scripted step comes next).
    pub counter: u8,
    /// Forced opening continuation; `None` consults the classifier.
    pub plan: Option<OpeningClass>,
    pub fallback_budget: u64,
    pub ply_bound: u32,
}

impl Default for StrategyState {
    fn default() -> Self {
        StrategyState::new()
    }
}

impl StrategyState {
    /// State for the empty board.
    pub fn new() -> StrategyState {
        StrategyState {
            phase: Phase::Opening,
            roles: RoleMap::new(),
            counter: 0,
            plan: None,
            fallback_budget: DEFAULT_FALLBACK_BUDGET,
            ply_bound: DEFAULT_PLY_BOUND,
        }
    }

    pub fn in_phase(phase: Phase, roles: RoleMap, counter: u8) -> StrategyState {
        StrategyState { phase, roles, counter, ..StrategyState::new() }
    }

    /// Starting state for an arbitrary position with P1 to move: the opening
    /// on the empty board, the end phase on a position meeting its entry
    /// conditions, bounded search otherwise.
    pub fn infer(p: &Position) -> StrategyState {
        if p.total_edges() == 0 {
            return StrategyState::new();
        }
        if p.turn() == Player::P1
            && !p1_k22_copies(p).is_empty()
            && p.threats(Player::P2).is_empty()
            && p.edge_count(Player::P2) <= 7
        {
            return StrategyState::in_phase(Phase::EndPosition, RoleMap::new(), 0);
        }
        StrategyState::in_phase(Phase::Fallback, RoleMap::new(), 0)
    }

    /// Everything except the roles (those live in the canonical key).
    pub fn tag(&self) -> String {
        match self.plan {
            Some(plan) => format!("{}/{}/{}", self.phase, self.counter, plan.label()),
            None => format!("{}/{}", self.phase, self.counter),
        }
    }

    pub fn from_tag(tag: &str, roles: RoleMap) -> Option<StrategyState> {
        let mut parts = tag.split('/');
        let phase = Phase::from_label(parts.next()?)?;
        let counter = parts.next()?.parse().ok()?;
        let plan = match parts.next() {
            Some(p) => Some(OpeningClass::from_label(p)?),
            None => None,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(StrategyState { phase, roles, counter, plan, ..StrategyState::new() })
    }

    fn advance(&self, phase: Phase, roles: RoleMap, counter: u8) -> StrategyState {
        debug_assert!(self.phase.may_advance_to(phase), "{} -> {}", self.phase, phase);
        StrategyState { phase, roles, counter, plan: None, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StrategyError {
    #[error("the scripted strategy is only defined for t = 3 (got t = {0})")]
    UnsupportedTarget(u32),
    #[error("it is not P1's turn")]
    NotP1Turn,
    #[error("the game is already decided")]
    Terminal,
    #[error("phase {expected} expected, state is in {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("verification gap in {phase}: {reason}")]
    VerificationGap { phase: Phase, reason: String },
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Game(#[from] GameError),
}

fn gap(phase: Phase, reason: impl Into<String>) -> StrategyError {
    StrategyError::VerificationGap { phase, reason: reason.into() }
}

/// One P1 K^_{2,2}: main vertices and two common neighbours.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct K22 {
    pub mains: (VertexId, VertexId),
    pub leaves: (VertexId, VertexId),
}

/// Every P1 edge whose endpoints have at least two common P1 neighbours,
/// with the two smallest such neighbours as leaves. Sorted by mains.
pub fn p1_k22_copies(p: &Position) -> Vec<K22> {
    k22_copies(p, Player::P1)
}

fn k22_copies(p: &Position, who: Player) -> Vec<K22> {
    let mut out = Vec::new();
    for e in p.edges_of(who) {
        let mut common = p.neighbors(who, e.u) & p.neighbors(who, e.v);
        if common.count_ones() >= 2 {
            let l1 = common.trailing_zeros() as usize;
            common &= common - 1;
            let l2 = common.trailing_zeros() as usize;
            out.push(K22 { mains: (e.u, e.v), leaves: (l1, l2) });
        }
    }
    out
}

/// Is `v` a main vertex of some K^_{2,2} in `who`'s colour?
pub fn is_k22_main(p: &Position, who: Player, v: VertexId) -> bool {
    let nv = p.neighbors(who, v);
    let mut m = nv;
    while m != 0 {
        let w = m.trailing_zeros() as usize;
        m &= m - 1;
        if (nv & p.neighbors(who, w)).count_ones() >= 2 {
            return true;
        }
    }
    false
}

/// Picks a main vertex of P1's K^_{2,2} that is not a main vertex of any
/// P2 K^_{2,2}. When both qualify the one with the smaller canonical index
/// is returned.
pub fn select_safe_main(p: &Position, mains: (VertexId, VertexId)) -> Result<VertexId, StrategyError> {
    let (x, y) = mains;
    let phase = Phase::EndPosition;
    if p.color(x, y) != Some(Player::P1) || (p.neighbors(Player::P1, x) & p.neighbors(Player::P1, y)).count_ones() < 2 {
        return Err(gap(phase, format!("{x} and {y} are not the mains of a P1 K^_(2,2)")));
    }
    let safe_x = !is_k22_main(p, Player::P2, x);
    let safe_y = !is_k22_main(p, Player::P2, y);
    match (safe_x, safe_y) {
        (true, true) => {
            let canon = symmetry::canonicalize(p, &RoleMap::new())?;
            Ok(if canon.labeling[x] <= canon.labeling[y] { x } else { y })
        }
        (true, false) => Ok(x),
        (false, true) => Ok(y),
        (false, false) => Err(gap(phase, "both mains are mains of P2 K^_(2,2) copies")),
    }
}

fn check_turn(p: &Position) -> Result<(), StrategyError> {
    if p.t() != 3 {
        return Err(StrategyError::UnsupportedTarget(p.t()));
    }
    if p.turn() != Player::P1 {
        return Err(StrategyError::NotP1Turn);
    }
    if p.outcome()? != GameOutcome::Ongoing {
        return Err(StrategyError::Terminal);
    }
    Ok(())
}

/// The strategy's move for P1 and the updated state.
///
/// Priority: an immediate win (smallest after canonical relabeling), else the
/// scripted phase move, else (in the fallback phase only) a certified move
/// from bounded search. Never plays a move it cannot justify: failures come
/// back as [`StrategyError::VerificationGap`].
pub fn next_move(p: &Position, s: &StrategyState) -> Result<(MoveSpec, StrategyState), StrategyError> {
    check_turn(p)?;
    s.roles.validate(p)?;
    let (q, roles_q, canon) = symmetry::canonical_form(p, &s.roles)?;
    let state_q = StrategyState { roles: roles_q, ..s.clone() };
    let (m_q, next_q) = step(&q, &state_q)?;
    let inv = extend(&canon.inverse(), p.vertex_count() + 2);
    let m = relabel_move(&m_q, &inv);
    let next = StrategyState { roles: next_q.roles.permuted(&inv), ..next_q };
    Ok((m, next))
}

fn extend(perm: &[VertexId], len: usize) -> Vec<VertexId> {
    let mut out = perm.to_vec();
    out.extend(perm.len()..len);
    out
}

/// [`next_move`] on a position already in canonical form; the verifier
/// calls this directly.
pub(crate) fn step(q: &Position, s: &StrategyState) -> Result<(MoveSpec, StrategyState), StrategyError> {
    check_turn(q)?;
    if let Some(&e) = q.threats(Player::P1).first() {
        return Ok((MoveSpec::from_edge(e, Player::P1), s.clone()));
    }
    if s.phase != Phase::Fallback && !q.threats(Player::P2).is_empty() {
        return Err(gap(s.phase, "P2 holds a threat at P1's turn"));
    }
    let (m, next) = match s.phase {
        Phase::Opening => opening(q, s)?,
        Phase::Triangle => triangle(q, s)?,
        Phase::MainLem => mainlem(q, s)?,
        Phase::SpCase1 => spcase1(q, s)?,
        Phase::CaseC => case_c(q, s)?,
        Phase::EndPosition => end_position(q, s)?,
        Phase::FinishDoubleThreat => return Err(gap(s.phase, "no completing edge after the double threat")),
        Phase::Fallback => fallback(q, s)?,
    };
    q.check_move(&m).map_err(|e| gap(s.phase, format!("scripted move {m} is illegal: {e}")))?;
    Ok((m, next))
}

struct Ctx<'a> {
    q: &'a Position,
    s: &'a StrategyState,
}

impl Ctx<'_> {
    fn role(&self, roles: &RoleMap, r: Role) -> Result<VertexId, StrategyError> {
        roles.get(r).ok_or_else(|| gap(self.s.phase, format!("role {r} is not assigned")))
    }

    fn free(&self, u: VertexId, v: VertexId) -> bool {
        self.q.color(u, v).is_none()
    }

    fn p2(&self, u: VertexId, v: VertexId) -> bool {
        self.q.color(u, v) == Some(Player::P2)
    }

    fn claim(&self, u: VertexId, v: VertexId) -> Result<MoveSpec, StrategyError> {
        if !self.free(u, v) {
            return Err(gap(self.s.phase, format!("scripted edge {} is taken", Edge::new(u, v))));
        }
        Ok(MoveSpec::existing(u, v, Player::P1))
    }

    /// Claims `v`–fresh and tags the fresh vertex.
    fn fresh(&self, v: VertexId, roles: &mut RoleMap, tag: Role) -> Result<MoveSpec, StrategyError> {
        roles.assign(tag, self.q.vertex_count())?;
        Ok(MoveSpec::with_fresh(v, Player::P1))
    }

    fn first_free(&self, options: &[(VertexId, VertexId)]) -> Result<MoveSpec, StrategyError> {
        for &(u, v) in options {
            if self.free(u, v) {
                return Ok(MoveSpec::existing(u, v, Player::P1));
            }
        }
        Err(gap(self.s.phase, "every scripted alternative is taken"))
    }
}

type StepResult = Result<(MoveSpec, StrategyState), StrategyError>;

fn opening(q: &Position, s: &StrategyState) -> StepResult {
    let cx = Ctx { q, s };
    let mut roles = s.roles.clone();
    match s.counter {
        0 => {
            if q.total_edges() != 0 {
                return Err(gap(s.phase, "the opening starts from the empty board"));
            }
            roles.assign(Role::A, 0)?;
            roles.assign(Role::B, 1)?;
            Ok((MoveSpec::fresh_fresh(Player::P1), s.advance(Phase::Opening, roles, 1)))
        }
        1 => {
            let theirs = q.edges_of(Player::P2);
            let [e] = theirs.as_slice() else {
                return Err(gap(s.phase, "expected exactly one P2 edge"));
            };
            let a = cx.role(&roles, Role::A)?;
            let b = cx.role(&roles, Role::B)?;
            let other = |v: VertexId| if e.u == v { e.v } else { e.u };
            if e.u == a || e.v == a {
                roles.assign(Role::X, other(a))?;
            } else if e.u == b || e.v == b {
                roles.swap(Role::A, Role::B);
                roles.assign(Role::X, other(b))?;
            } else {
                roles.assign(Role::X, e.u)?;
                roles.assign(Role::Y, e.v)?;
            }
            let a = cx.role(&roles, Role::A)?;
            let m = cx.fresh(a, &mut roles, Role::D)?;
            Ok((m, s.advance(Phase::Opening, roles, 2)))
        }
        2 => {
            let a = cx.role(&roles, Role::A)?;
            let b = cx.role(&roles, Role::B)?;
            let d = cx.role(&roles, Role::D)?;
            if !cx.p2(b, d) {
                let m = cx.claim(b, d)?;
                return Ok((m, s.advance(Phase::Triangle, roles, 0)));
            }
            let m = cx.fresh(a, &mut roles, Role::C)?;
            Ok((m, s.advance(Phase::Opening, roles, 3)))
        }
        3 => {
            normalize_fourth_move(q, &mut roles)?;
            if roles.get(Role::Y).is_none() {
                // first P2 edge touched a
                let m = cx.claim(cx.role(&roles, Role::B)?, cx.role(&roles, Role::C)?)?;
                return Ok((m, s.advance(Phase::MainLem, roles, 0)));
            }
            let plan = match s.plan {
                Some(plan) => plan,
                None => {
                    let (plan, relabel) = opening_plan(q, &roles)?;
                    relabel.apply(&mut roles);
                    plan
                }
            };
            let a = cx.role(&roles, Role::A)?;
            let b = cx.role(&roles, Role::B)?;
            let c = cx.role(&roles, Role::C)?;
            match plan {
                OpeningClass::Generic => Ok((cx.claim(b, c)?, s.advance(Phase::MainLem, roles, 0))),
                OpeningClass::CriticalA | OpeningClass::CriticalB => {
                    Ok((cx.claim(b, c)?, s.advance(Phase::SpCase1, roles, 0)))
                }
                OpeningClass::CriticalC => {
                    let m = cx.fresh(a, &mut roles, Role::Z1)?;
                    Ok((m, s.advance(Phase::CaseC, roles, 0)))
                }
                OpeningClass::Unresolved => {
                    let fb = s.advance(Phase::Fallback, RoleMap::new(), 0);
                    fallback(q, &fb)
                }
            }
        }
        k => Err(gap(s.phase, format!("opening step {k} does not exist"))),
    }
}

/// If P2 took `bc` as his third edge, `b` and `d` trade names so that `bc`
/// stays available (both are joined to `a` by P1 and to each other by P2).
pub(crate) fn normalize_fourth_move(q: &Position, roles: &mut RoleMap) -> Result<(), StrategyError> {
    let (Some(b), Some(c)) = (roles.get(Role::B), roles.get(Role::C)) else {
        return Err(gap(Phase::Opening, "roles b and c must be assigned"));
    };
    if q.color(b, c) == Some(Player::P2) {
        roles.swap(Role::B, Role::D);
    }
    Ok(())
}

/// Opening class of the position after P2's third edge (roles normalized).
/// Positions outside the computed table default to [`OpeningClass::Generic`].
pub fn classify_opening(p: &Position, roles: &RoleMap) -> Result<OpeningClass, StrategyError> {
    Ok(opening_plan(p, roles)?.0)
}

/// The class together with the relabeling its script is played under.
pub fn opening_plan(p: &Position, roles: &RoleMap) -> Result<(OpeningClass, Relabel), StrategyError> {
    let key = symmetry::canonical_key(p, roles)?;
    let table = crate::verifier::opening_classification();
    Ok(table.lookup(&key).unwrap_or((OpeningClass::Generic, Relabel::default())))
}

fn triangle(q: &Position, s: &StrategyState) -> StepResult {
    let cx = Ctx { q, s };
    let mut roles = s.roles.clone();
    let a = cx.role(&roles, Role::A)?;
    let b = cx.role(&roles, Role::B)?;
    let d = cx.role(&roles, Role::D)?;
    match s.counter {
        0 => {
            if ![(a, b), (a, d), (b, d)].iter().all(|&(u, v)| q.color(u, v) == Some(Player::P1)) {
                return Err(gap(s.phase, "a, b, d do not form a P1 triangle"));
            }
            let m = cx.fresh(a, &mut roles, Role::Z1)?;
            Ok((m, s.advance(Phase::Triangle, roles, 1)))
        }
        1 => {
            let z = cx.role(&roles, Role::Z1)?;
            let m = cx.first_free(&[(b, z), (d, z)])?;
            Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)))
        }
        k => Err(gap(s.phase, format!("triangle step {k} does not exist"))),
    }
}

fn mainlem(q: &Position, s: &StrategyState) -> StepResult {
    let cx = Ctx { q, s };
    let mut roles = s.roles.clone();
    let a = cx.role(&roles, Role::A)?;
    let b = cx.role(&roles, Role::B)?;
    let c = cx.role(&roles, Role::C)?;
    let d = cx.role(&roles, Role::D)?;
    match s.counter {
        0 => {
            let shape = [(a, b), (b, c), (a, c), (a, d)];
            if !shape.iter().all(|&(u, v)| q.color(u, v) == Some(Player::P1)) {
                return Err(gap(s.phase, "P1 does not hold triangle abc with pendant ad"));
            }
            if cx.free(b, d) || cx.free(c, d) {
                let m = cx.first_free(&[(b, d), (c, d)])?;
                return Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)));
            }
            let m = cx.fresh(a, &mut roles, Role::Z1)?;
            Ok((m, s.advance(Phase::MainLem, roles, 1)))
        }
        1 => {
            let z = cx.role(&roles, Role::Z1)?;
            let m = cx.first_free(&[(z, c), (z, b)])?;
            Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)))
        }
        k => Err(gap(s.phase, format!("step {k} does not exist"))),
    }
}

fn spcase1(q: &Position, s: &StrategyState) -> StepResult {
    let cx = Ctx { q, s };
    let mut roles = s.roles.clone();
    let a = cx.role(&roles, Role::A)?;
    let b = cx.role(&roles, Role::B)?;
    let c = cx.role(&roles, Role::C)?;
    let d = cx.role(&roles, Role::D)?;
    let x = cx.role(&roles, Role::X)?;
    match s.counter {
        0 => {
            if cx.free(c, d) {
                let m = cx.claim(c, d)?;
                return Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)));
            }
            // b and c are now interchangeable; name the one P2 joined to x b
            if !cx.p2(b, x) && cx.p2(c, x) {
                roles.swap(Role::B, Role::C);
            }
            let c = cx.role(&roles, Role::C)?;
            let m = cx.claim(c, x)?;
            Ok((m, s.advance(Phase::SpCase1, roles, 1)))
        }
        1 => {
            if cx.free(a, x) {
                let m = cx.claim(a, x)?;
                return Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)));
            }
            let m = cx.fresh(a, &mut roles, Role::Z1)?;
            Ok((m, s.advance(Phase::SpCase1, roles, 2)))
        }
        2 => {
            let z = cx.role(&roles, Role::Z1)?;
            let m = cx.first_free(&[(z, b), (z, c)])?;
            Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)))
        }
        k => Err(gap(s.phase, format!("step {k} does not exist"))),
    }
}

fn case_c(q: &Position, s: &StrategyState) -> StepResult {
    let cx = Ctx { q, s };
    let mut roles = s.roles.clone();
    let z = cx.role(&roles, Role::Z1)?;
    let d = cx.role(&roles, Role::D)?;
    match s.counter {
        0 => {
            let b = cx.role(&roles, Role::B)?;
            let c = cx.role(&roles, Role::C)?;
            if cx.p2(b, z) {
                Ok((cx.claim(c, z)?, s.advance(Phase::CaseC, roles, 1)))
            } else if cx.p2(c, z) {
                roles.swap(Role::B, Role::C);
                Ok((cx.claim(b, z)?, s.advance(Phase::CaseC, roles, 1)))
            } else if cx.p2(d, z) {
                Ok((cx.claim(c, z)?, s.advance(Phase::CaseC, roles, 2)))
            } else {
                Ok((cx.claim(d, z)?, s.advance(Phase::CaseC, roles, 3)))
            }
        }
        k @ 1..=3 => {
            let b = cx.role(&roles, Role::B)?;
            let c = cx.role(&roles, Role::C)?;
            let options: &[(VertexId, VertexId)] = match k {
                1 => &[(d, z), (b, c)],
                2 => &[(b, z), (b, c)],
                _ => &[(c, z), (b, z)],
            };
            let m = cx.first_free(options)?;
            Ok((m, s.advance(Phase::EndPosition, RoleMap::new(), 0)))
        }
        k => Err(gap(s.phase, format!("step {k} does not exist"))),
    }
}

/// Entry check of the end phase: P1 holds a K^_{2,2}, P2 has no threat and
/// at most seven edges. Returns the oriented copy (safe main first).
pub fn end_position_entry(q: &Position) -> Result<K22, StrategyError> {
    let phase = Phase::EndPosition;
    if !q.threats(Player::P2).is_empty() {
        return Err(gap(phase, "entry with a P2 threat"));
    }
    if q.edge_count(Player::P2) > 7 {
        return Err(gap(phase, format!("entry with {} P2 edges (at most 7)", q.edge_count(Player::P2))));
    }
    let copies = p1_k22_copies(q);
    if copies.is_empty() {
        return Err(gap(phase, "entry without a P1 K^_(2,2)"));
    }
    for k in copies {
        if let Ok(x) = select_safe_main(q, k.mains) {
            let y = if x == k.mains.0 { k.mains.1 } else { k.mains.0 };
            return Ok(K22 { mains: (x, y), leaves: k.leaves });
        }
    }
    Err(gap(phase, "no P1 K^_(2,2) has a safe main vertex"))
}

fn end_position(q: &Position, s: &StrategyState) -> StepResult {
    let cx = Ctx { q, s };
    match s.counter {
        0 => {
            let k = end_position_entry(q)?;
            let (x, y) = k.mains;
            let mut roles = RoleMap::new();
            roles.assign(Role::X, x)?;
            roles.assign(Role::Y, y)?;
            roles.assign(Role::A, k.leaves.0)?;
            roles.assign(Role::B, k.leaves.1)?;
            let m = cx.fresh(y, &mut roles, Role::Z1)?;
            Ok((m, s.advance(Phase::EndPosition, roles, 1)))
        }
        i @ 1..=3 => {
            let mut roles = s.roles.clone();
            let x = cx.role(&roles, Role::X)?;
            let y = cx.role(&roles, Role::Y)?;
            let zs = [Role::Z1, Role::Z2, Role::Z3];
            let zi = cx.role(&roles, zs[i as usize - 1])?;
            if !cx.p2(x, zi) {
                return Err(gap(s.phase, "P2 neither blocked nor lost"));
            }
            if i < 3 {
                let m = cx.fresh(y, &mut roles, zs[i as usize])?;
                return Ok((m, s.advance(Phase::EndPosition, roles, i + 1)));
            }
            let a = cx.role(&roles, Role::A)?;
            let z1 = cx.role(&roles, Role::Z1)?;
            let m = cx.claim(a, z1)?;
            Ok((m, s.advance(Phase::FinishDoubleThreat, roles, 0)))
        }
        k => Err(gap(s.phase, format!("step {k} does not exist"))),
    }
}

fn fallback(q: &Position, s: &StrategyState) -> StepResult {
    let remaining = s.ply_bound.saturating_sub(q.total_edges() as u32);
    if remaining == 0 {
        return Err(gap(Phase::Fallback, "ply bound reached"));
    }
    let limits = SearchLimits { max_plies: remaining, node_budget: s.fallback_budget };
    let m = Solver::new(limits)
        .best_move(q)
        .map_err(|e| gap(Phase::Fallback, format!("bounded search found no win: {e}")))?;
    Ok((m, StrategyState { phase: Phase::Fallback, roles: RoleMap::new(), counter: 0, plan: None, ..s.clone() }))
}

fn expect_phase(s: &StrategyState, phase: Phase) -> Result<(), StrategyError> {
    if s.phase != phase {
        return Err(StrategyError::WrongPhase { expected: phase, actual: s.phase });
    }
    Ok(())
}

fn phase_move(p: &Position, s: &StrategyState, phase: Phase) -> Result<MoveSpec, StrategyError> {
    expect_phase(s, phase)?;
    check_turn(p)?;
    let (q, roles_q, canon) = symmetry::canonical_form(p, &s.roles)?;
    let state_q = StrategyState { roles: roles_q, ..s.clone() };
    let f = match phase {
        Phase::Triangle => triangle,
        Phase::MainLem => mainlem,
        Phase::SpCase1 => spcase1,
        Phase::CaseC => case_c,
        _ => end_position,
    };
    let (m, _) = f(&q, &state_q)?;
    Ok(relabel_move(&m, &extend(&canon.inverse(), p.vertex_count() + 2)))
}

/// Scripted triangle-phase move (no immediate-win override).
pub fn triangle_move(p: &Position, s: &StrategyState) -> Result<MoveSpec, StrategyError> {
    phase_move(p, s, Phase::Triangle)
}

pub fn mainlem_move(p: &Position, s: &StrategyState) -> Result<MoveSpec, StrategyError> {
    phase_move(p, s, Phase::MainLem)
}

pub fn spcase1_move(p: &Position, s: &StrategyState) -> Result<MoveSpec, StrategyError> {
    phase_move(p, s, Phase::SpCase1)
}

pub fn case_c_move(p: &Position, s: &StrategyState) -> Result<MoveSpec, StrategyError> {
    phase_move(p, s, Phase::CaseC)
}

pub fn endposition_move(p: &Position, s: &StrategyState) -> Result<MoveSpec, StrategyError> {
    phase_move(p, s, Phase::EndPosition)
}

/// Vertex a move touches, for callers that need the fresh id it allocates.
pub fn fresh_id(p: &Position, m: &MoveSpec) -> Option<VertexId> {
    m.ends.contains(&Endpoint::Fresh).then(|| p.vertex_count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use Player::*;

    fn free(edges: &[(usize, usize, Player)]) -> Position {
        Position::from_edges(3, P1, edges, true).unwrap()
    }

    fn play(p: &Position, m: MoveSpec) -> Position {
        p.apply(&m).unwrap()
    }

    #[test]
    fn opening_first_moves() {
        let p = Position::new_game(3).unwrap();
        let s = StrategyState::new();
        let (m, s1) = next_move(&p, &s).unwrap();
        assert_eq!(m, MoveSpec::fresh_fresh(P1));
        assert_eq!(s1.roles.get(Role::A), Some(0));
        assert_eq!(s1.roles.get(Role::B), Some(1));
        // P2 touches b: roles swap so that a lies on P2's edge.
        let p = play(&p, m);
        let p = play(&p, MoveSpec::with_fresh(1, P2));
        let (m, s2) = next_move(&p, &s1).unwrap();
        let a = s2.roles.get(Role::A).unwrap();
        assert_eq!(a, 1);
        assert_eq!(m, MoveSpec::with_fresh(1, P1));
        assert_eq!(s2.roles.get(Role::D), Some(3));
        // P2 ignores bd: P1 closes the triangle.
        let p = play(&p, m);
        let p = play(&p, MoveSpec::fresh_fresh(P2));
        let (m, s3) = next_move(&p, &s2).unwrap();
        let b = s2.roles.get(Role::B).unwrap();
        assert_eq!(m, MoveSpec::existing(b, 3, P1));
        assert_eq!(s3.phase, Phase::Triangle);
    }

    #[test]
    fn triangle_second_vertex_choice() {
        // triangle a=0 b=1 d=2 and az with z=3; P2 took bz.
        let p = free(&[(0, 1, P1), (0, 2, P1), (1, 2, P1), (0, 3, P1), (4, 5, P2), (6, 7, P2), (1, 3, P2), (8, 9, P2)]);
        let roles = RoleMap::new()
            .with(Role::A, 0)
            .unwrap()
            .with(Role::B, 1)
            .unwrap()
            .with(Role::D, 2)
            .unwrap()
            .with(Role::Z1, 3)
            .unwrap();
        let s = StrategyState::in_phase(Phase::Triangle, roles.clone(), 1);
        assert_eq!(triangle_move(&p, &s).unwrap(), MoveSpec::existing(2, 3, P1));
        let p =
            free(&[(0, 1, P1), (0, 2, P1), (1, 2, P1), (0, 3, P1), (4, 5, P2), (6, 7, P2), (8, 9, P2), (10, 11, P2)]);
        let s = StrategyState::in_phase(Phase::Triangle, roles, 1);
        assert_eq!(triangle_move(&p, &s).unwrap(), MoveSpec::existing(1, 3, P1));
    }

    #[test]
    fn mainlem_moves() {
        let roles = RoleMap::new()
            .with(Role::A, 0)
            .unwrap()
            .with(Role::B, 1)
            .unwrap()
            .with(Role::C, 2)
            .unwrap()
            .with(Role::D, 3)
            .unwrap();
        let base = [(0, 1, P1), (1, 2, P1), (0, 2, P1), (0, 3, P1)];
        let mut e = base.to_vec();
        e.extend([(4, 5, P2), (6, 7, P2), (8, 9, P2), (10, 11, P2)]);
        let s = StrategyState::in_phase(Phase::MainLem, roles.clone(), 0);
        assert_eq!(mainlem_move(&free(&e), &s).unwrap(), MoveSpec::existing(1, 3, P1));
        let mut e = base.to_vec();
        e.extend([(1, 3, P2), (2, 3, P2), (4, 5, P2), (6, 7, P2)]);
        assert_eq!(mainlem_move(&free(&e), &s).unwrap(), MoveSpec::with_fresh(0, P1));
        // after az (z = 8), zc free
        let mut e = base.to_vec();
        e.extend([(1, 3, P2), (2, 3, P2), (4, 5, P2), (6, 7, P2), (0, 8, P1), (9, 10, P2)]);
        let s = StrategyState::in_phase(Phase::MainLem, roles.with(Role::Z1, 8).unwrap(), 1);
        assert_eq!(mainlem_move(&free(&e), &s).unwrap(), MoveSpec::existing(2, 8, P1));
    }

    #[test]
    fn case_c_reply_table() {
        // a=0 b=1 c=2 d=3 z=4; P1: ab ad ac az.
        let roles = RoleMap::new()
            .with(Role::A, 0)
            .unwrap()
            .with(Role::B, 1)
            .unwrap()
            .with(Role::C, 2)
            .unwrap()
            .with(Role::D, 3)
            .unwrap()
            .with(Role::Z1, 4)
            .unwrap();
        let s = StrategyState::in_phase(Phase::CaseC, roles, 0);
        let p1 = [(0, 1, P1), (0, 3, P1), (0, 2, P1), (0, 4, P1)];
        let p2 = [(5, 6, P2), (1, 3, P2), (2, 3, P2)];
        let with = |extra: (usize, usize)| {
            let mut e: Vec<_> = p1.iter().chain(p2.iter()).copied().collect();
            e.push((extra.0, extra.1, P2));
            free(&e)
        };
        assert_eq!(case_c_move(&with((1, 4)), &s).unwrap(), MoveSpec::existing(2, 4, P1));
        assert_eq!(case_c_move(&with((2, 4)), &s).unwrap(), MoveSpec::existing(1, 4, P1));
        assert_eq!(case_c_move(&with((3, 4)), &s).unwrap(), MoveSpec::existing(2, 4, P1));
        assert_eq!(case_c_move(&with((5, 1)), &s).unwrap(), MoveSpec::existing(3, 4, P1));
    }

    #[test]
    fn spcase1_moves() {
        // a=0 b=1 c=2 d=3 x=4 y=5; P1 ab ad ac bc; P2 xy bd cd + dx
        let roles = RoleMap::new()
            .with(Role::A, 0)
            .unwrap()
            .with(Role::B, 1)
            .unwrap()
            .with(Role::C, 2)
            .unwrap()
            .with(Role::D, 3)
            .unwrap()
            .with(Role::X, 4)
            .unwrap()
            .with(Role::Y, 5)
            .unwrap();
        let e = [(0, 1, P1), (0, 3, P1), (0, 2, P1), (1, 2, P1), (4, 5, P2), (1, 3, P2), (3, 4, P2), (2, 3, P2)];
        let s = StrategyState::in_phase(Phase::SpCase1, roles.clone(), 0);
        assert_eq!(spcase1_move(&free(&e), &s).unwrap(), MoveSpec::existing(2, 4, P1));
        let mut e2 = e.to_vec();
        e2.extend([(2, 4, P1), (6, 7, P2)]);
        let s1 = StrategyState::in_phase(Phase::SpCase1, roles.clone(), 1);
        assert_eq!(spcase1_move(&free(&e2), &s1).unwrap(), MoveSpec::existing(0, 4, P1));
        let mut e3 = e.to_vec();
        e3.extend([(2, 4, P1), (0, 4, P2)]);
        assert_eq!(spcase1_move(&free(&e3), &s1).unwrap(), MoveSpec::with_fresh(0, P1));
        e3.extend([(0, 6, P1), (1, 6, P2)]);
        let s2 = StrategyState::in_phase(Phase::SpCase1, roles.with(Role::Z1, 6).unwrap(), 2);
        assert_eq!(spcase1_move(&free(&e3), &s2).unwrap(), MoveSpec::existing(2, 6, P1));
    }

    #[test]
    fn safe_main_selection() {
        // P1 K^_{2,2}: mains 0,1 leaves 2,3.
        let k = [(0, 1, P1), (0, 2, P1), (1, 2, P1), (0, 3, P1), (1, 3, P1)];
        let mut e = k.to_vec();
        e.extend([(4, 5, P2), (6, 7, P2), (8, 9, P2), (10, 11, P2)]);
        let p = free(&e);
        let chosen = select_safe_main(&p, (0, 1)).unwrap();
        assert!(chosen == 0 || chosen == 1);
        // P2 K^_{2,2} with main 1: 1-4, 1-5, 4-5 (wait: mains 1,4, leaves 5,6)
        let mut e = k.to_vec();
        e.extend([(1, 4, P2), (1, 5, P2), (4, 5, P2), (1, 6, P2), (4, 6, P2)]);
        let p = free(&e);
        assert_eq!(select_safe_main(&p, (0, 1)).unwrap(), 0);
    }

    #[test]
    fn end_position_rejects_eight_p2_edges() {
        let mut e = vec![(0, 1, P1), (0, 2, P1), (1, 2, P1), (0, 3, P1), (1, 3, P1)];
        for i in 0..8 {
            e.push((4 + 2 * i, 5 + 2 * i, P2));
        }
        let s = StrategyState::in_phase(Phase::EndPosition, RoleMap::new(), 0);
        assert!(matches!(
            next_move(&free(&e), &s),
            Err(StrategyError::VerificationGap { phase: Phase::EndPosition, .. })
        ));
    }

    #[test]
    fn refuses_other_targets_and_wrong_turn() {
        let p = Position::new_game(2).unwrap();
        assert_eq!(next_move(&p, &StrategyState::new()), Err(StrategyError::UnsupportedTarget(2)));
        let p = Position::new_game(3).unwrap().apply(&MoveSpec::fresh_fresh(P1)).unwrap();
        assert_eq!(next_move(&p, &StrategyState::new()), Err(StrategyError::NotP1Turn));
    }

    #[test]
    fn tags_round_trip() {
        let mut s = StrategyState::in_phase(Phase::SpCase1, RoleMap::new(), 2);
        assert_eq!(StrategyState::from_tag(&s.tag(), RoleMap::new()), Some(s.clone()));
        s.plan = Some(OpeningClass::CriticalC);
        assert_eq!(StrategyState::from_tag(&s.tag(), RoleMap::new()), Some(s));
        assert!(Phase::Opening.may_advance_to(Phase::CaseC));
        assert!(!Phase::EndPosition.may_advance_to(Phase::Opening));
        assert!(!Phase::Triangle.may_advance_to(Phase::MainLem));
    }
}
