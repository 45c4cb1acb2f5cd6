//! Bounded perfect-play search.
//!
//! The solver answers "can the side to move force a completed copy within
//! `d` plies" by iterative deepening over symmetry-reduced moves, memoized on
//! canonical keys. Two exact shortcuts keep the tree small:
//!
//! * a side facing one opponent threat must claim that edge (any other reply
//!   loses at the next ply), and a side facing two or more cannot hold;
//! * an attacker holding two or more threats wins at its next move.
//!
//! Depths count plies of both players: `MoverWin(1)` is an immediate win.
//! Unbounded play is never classified; anything undecided under the limits
//! is `Unknown`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Edge, GameError, MoveSpec, Player, Position};
use crate::symmetry::{self, relabel_move, CanonicalKey, RoleMap, SymmetryError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    MoverWin(u32),
    MoverLoss(u32),
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchLimits {
    pub max_plies: u32,
    pub node_budget: u64,
}

impl SearchLimits {
    pub fn new(max_plies: u32, node_budget: u64) -> Result<SearchLimits, SolverError> {
        if max_plies == 0 || node_budget == 0 {
            return Err(SolverError::BadLimits);
        }
        Ok(SearchLimits { max_plies, node_budget })
    }
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits { max_plies: 16, node_budget: 5_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolverError {
    #[error("search limits must be positive")]
    BadLimits,
    #[error("position is already decided")]
    Terminal,
    #[error("no certified win for the side to move under the given limits")]
    NoCertifiedWin,
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
    #[error(transparent)]
    Game(#[from] GameError),
}

#[derive(Debug)]
struct Exhausted;

#[derive(Clone, Copy, Default)]
struct Entry {
    /// Side to move forces a win within this many plies.
    win_within: Option<u32>,
    /// Side to move cannot force a win within this many plies.
    no_win_within: u32,
    /// Opponent forces a win within this many plies.
    loss_within: Option<u32>,
    /// Opponent cannot force a win within this many plies.
    no_loss_within: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub memo_entries: usize,
}

/// One bounded search; owns its transposition table so results never depend
/// on earlier calls or on scheduling.
pub struct Solver {
    limits: SearchLimits,
    memo: HashMap<CanonicalKey, Entry>,
    nodes: u64,
}

enum Step {
    Won,
    Lost,
    Moves(Vec<(Edge, usize)>),
}

impl Solver {
    pub fn new(limits: SearchLimits) -> Solver {
        Solver { limits, memo: HashMap::new(), nodes: 0 }
    }

    pub fn stats(&self) -> SolveStats {
        SolveStats { nodes: self.nodes, memo_entries: self.memo.len() }
    }

    fn tick(&mut self) -> Result<(), Exhausted> {
        self.nodes += 1;
        if self.nodes > self.limits.node_budget {
            Err(Exhausted)
        } else {
            Ok(())
        }
    }

    fn key(p: &Position) -> CanonicalKey {
        symmetry::canonical_key(p, &RoleMap::new()).expect("solver positions stay under the bound")
    }

    /// Candidate moves for the side to move, after the forcing shortcuts.
    /// `Won`: immediate win. `Lost`: two or more opponent threats.
    fn candidates(p: &Position) -> Step {
        let me = p.turn();
        if !p.threats(me).is_empty() {
            return Step::Won;
        }
        let theirs = p.threats(me.opponent());
        match theirs.len() {
            0 => {
                let classes =
                    symmetry::reduced_moves(p, &RoleMap::new()).expect("solver positions stay under the bound");
                Step::Moves(
                    classes
                        .iter()
                        .map(|c| (c.rep.resolve(p.vertex_count()).expect("legal"), c.rep.fresh_count()))
                        .collect(),
                )
            }
            1 => Step::Moves(vec![(theirs[0], 0)]),
            _ => Step::Lost,
        }
    }

    /// Can the side to move force a win within `d` plies?
    fn can_win(&mut self, p: &Position, d: u32) -> Result<bool, Exhausted> {
        if d == 0 {
            return Ok(false);
        }
        self.tick()?;
        let me = p.turn();
        if !p.threats(me).is_empty() {
            return Ok(true);
        }
        if d < 3 {
            return Ok(false);
        }
        let key = Self::key(p);
        if let Some(e) = self.memo.get(&key) {
            if e.win_within.is_some_and(|w| w <= d) {
                return Ok(true);
            }
            if e.no_win_within >= d {
                return Ok(false);
            }
        }
        let result = match Self::candidates(p) {
            Step::Won => true,
            Step::Lost => false,
            Step::Moves(moves) => {
                let mut found = false;
                for (e, fresh) in moves {
                    let q = p.apply_edge_unchecked(e, me, fresh);
                    if self.loses(&q, d - 1)? {
                        found = true;
                        break;
                    }
                }
                found
            }
        };
        let entry = self.memo.entry(key).or_default();
        if result {
            entry.win_within = Some(entry.win_within.map_or(d, |w| w.min(d)));
        } else {
            entry.no_win_within = entry.no_win_within.max(d);
        }
        Ok(result)
    }

    /// Does the side to move lose within `d` plies against best play?
    fn loses(&mut self, p: &Position, d: u32) -> Result<bool, Exhausted> {
        if d < 2 {
            return Ok(false);
        }
        self.tick()?;
        let me = p.turn();
        if !p.threats(me).is_empty() {
            return Ok(false);
        }
        if p.threats(me.opponent()).len() >= 2 {
            return Ok(true);
        }
        let key = Self::key(p);
        if let Some(e) = self.memo.get(&key) {
            if e.loss_within.is_some_and(|w| w <= d) {
                return Ok(true);
            }
            if e.no_loss_within >= d {
                return Ok(false);
            }
        }
        let result = match Self::candidates(p) {
            Step::Won => false,
            Step::Lost => true,
            Step::Moves(moves) => {
                let mut all = true;
                for (e, fresh) in moves {
                    let q = p.apply_edge_unchecked(e, me, fresh);
                    if !self.can_win(&q, d - 1)? {
                        all = false;
                        break;
                    }
                }
                all
            }
        };
        let entry = self.memo.entry(key).or_default();
        if result {
            entry.loss_within = Some(entry.loss_within.map_or(d, |w| w.min(d)));
        } else {
            entry.no_loss_within = entry.no_loss_within.max(d);
        }
        Ok(result)
    }

    pub fn solve(&mut self, p: &Position) -> Result<Outcome, SolverError> {
        if p.outcome()? != crate::game::GameOutcome::Ongoing {
            return Err(SolverError::Terminal);
        }
        let max = self.limits.max_plies;
        let run = |s: &mut Solver| -> Result<Outcome, Exhausted> {
            for d in (1..=max).step_by(2) {
                if s.can_win(p, d)? {
                    return Ok(Outcome::MoverWin(d));
                }
            }
            for d in (2..=max).step_by(2) {
                if s.loses(p, d)? {
                    return Ok(Outcome::MoverLoss(d));
                }
            }
            Ok(Outcome::Unknown)
        };
        Ok(run(self).unwrap_or(Outcome::Unknown))
    }

    /// Fastest certified winning move; ties go to the smallest move after
    /// canonical relabeling.
    pub fn best_move(&mut self, p: &Position) -> Result<MoveSpec, SolverError> {
        let Outcome::MoverWin(d) = self.solve(p)? else {
            return Err(SolverError::NoCertifiedWin);
        };
        let me = p.turn();
        let canon = symmetry::canonicalize(p, &RoleMap::new())?;
        if d == 1 {
            let mut wins: Vec<MoveSpec> = p.threats(me).into_iter().map(|e| MoveSpec::from_edge(e, me)).collect();
            wins.sort_by_key(|m| relabel_move(m, &canon.labeling));
            return Ok(wins[0]);
        }
        // a win in d > 1 means at most one opposing threat, which must be blocked
        let theirs = p.threats(me.opponent());
        let mut candidates: Vec<MoveSpec> = if theirs.len() == 1 {
            vec![MoveSpec::from_edge(theirs[0], me)]
        } else {
            symmetry::reduced_moves(p, &RoleMap::new())?.into_iter().map(|c| c.rep).collect()
        };
        candidates.sort_by_key(|m| relabel_move(m, &canon.labeling));
        for m in candidates {
            let e = m.resolve(p.vertex_count()).expect("legal");
            let q = p.apply_edge_unchecked(e, me, m.fresh_count());
            match self.loses(&q, d - 1) {
                Ok(true) => return Ok(m),
                Ok(false) => {}
                Err(Exhausted) => return Err(SolverError::NoCertifiedWin),
            }
        }
        Err(SolverError::NoCertifiedWin)
    }
}

pub fn solve(p: &Position, limits: SearchLimits) -> Result<Outcome, SolverError> {
    Solver::new(limits).solve(p)
}

pub fn best_move(p: &Position, limits: SearchLimits) -> Result<MoveSpec, SolverError> {
    Solver::new(limits).best_move(p)
}

/// Plain negamax over every legal move type with no symmetry reduction, no
/// forcing shortcuts and no transposition table. Exponential; it exists to
/// cross-check [`Solver`] on tiny positions.
pub fn naive_solve(p: &Position, max_plies: u32) -> Outcome {
    fn value(p: &Position, left: u32) -> Outcome {
        let me = p.turn();
        let n = p.vertex_count();
        // immediate completion
        for e in p.uncolored_pairs() {
            if p.apply_edge_unchecked(e, me, 0).wins(me) {
                return Outcome::MoverWin(1);
            }
        }
        if left <= 1 {
            return Outcome::Unknown;
        }
        // Neither side can reach 2t+1 edges in the remaining plies.
        let target = 2 * p.t() as usize + 1;
        let mine_max = p.edge_count(me) + left.div_ceil(2) as usize;
        let theirs_max = p.edge_count(me.opponent()) + (left / 2) as usize;
        if mine_max < target && theirs_max < target {
            return Outcome::Unknown;
        }
        let mut moves: Vec<(Edge, usize)> = p.uncolored_pairs().into_iter().map(|e| (e, 0)).collect();
        moves.extend((0..n).map(|v| (Edge::new(v, n), 1)));
        moves.push((Edge::new(n, n + 1), 2));
        let mut best_win: Option<u32> = None;
        let mut worst_loss: Option<u32> = None;
        let mut unknown = false;
        for (e, fresh) in moves {
            let q = p.apply_edge_unchecked(e, me, fresh);
            match value(&q, left - 1) {
                Outcome::MoverLoss(k) => {
                    best_win = Some(best_win.map_or(k + 1, |w| w.min(k + 1)));
                    if k + 1 == 3 {
                        break;
                    }
                }
                Outcome::MoverWin(k) => {
                    worst_loss = Some(worst_loss.map_or(k + 1, |w| w.max(k + 1)));
                }
                Outcome::Unknown => unknown = true,
            }
        }
        match (best_win, unknown, worst_loss) {
            (Some(w), _, _) => Outcome::MoverWin(w),
            (None, true, _) => Outcome::Unknown,
            (None, false, Some(l)) => Outcome::MoverLoss(l),
            (None, false, None) => Outcome::Unknown,
        }
    }
    assert!(!p.is_terminal(), "naive_solve needs an undecided position");
    if max_plies == 0 {
        return Outcome::Unknown;
    }
    value(p, max_plies)
}

/// Who wins from `p` if the side to move is `player`.
pub fn winner_of(p: &Position, outcome: Outcome) -> Option<Player> {
    match outcome {
        Outcome::MoverWin(_) => Some(p.turn()),
        Outcome::MoverLoss(_) => Some(p.turn().opponent()),
        Outcome::Unknown => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Player::*;

    fn limits(plies: u32) -> SearchLimits {
        SearchLimits::new(plies, 2_000_000).unwrap()
    }

    #[test]
    fn immediate_win() {
        let p = Position::from_edges(
            3,
            P1,
            &[
                (0, 1, P1),
                (0, 2, P1),
                (1, 2, P1),
                (0, 3, P1),
                (1, 3, P1),
                (0, 4, P1),
                (5, 6, P2),
                (6, 7, P2),
                (7, 8, P2),
                (8, 9, P2),
                (9, 10, P2),
                (10, 11, P2),
            ],
            false,
        )
        .unwrap();
        assert_eq!(solve(&p, limits(3)).unwrap(), Outcome::MoverWin(1));
        assert_eq!(best_move(&p, limits(3)).unwrap(), MoveSpec::existing(1, 4, P1));
    }

    #[test]
    fn triangle_game_is_a_quick_first_player_win() {
        let p = Position::new_game(1).unwrap();
        let out = solve(&p, limits(9)).unwrap();
        assert!(matches!(out, Outcome::MoverWin(d) if d <= 9), "{out:?}");
    }

    #[test]
    fn unknown_has_no_best_move() {
        let p = Position::new_game(3).unwrap();
        assert_eq!(solve(&p, limits(3)).unwrap(), Outcome::Unknown);
        assert_eq!(best_move(&p, limits(3)), Err(SolverError::NoCertifiedWin));
    }

    #[test]
    fn budget_exhaustion_is_unknown() {
        let p = Position::new_game(1).unwrap();
        let tight = SearchLimits::new(9, 3).unwrap();
        assert_eq!(solve(&p, tight).unwrap(), Outcome::Unknown);
    }

    #[test]
    fn bad_limits_rejected() {
        assert_eq!(SearchLimits::new(0, 10), Err(SolverError::BadLimits));
        assert_eq!(SearchLimits::new(5, 0), Err(SolverError::BadLimits));
    }

    #[test]
    fn naive_agrees_on_triangle_opening() {
        let p = Position::new_game(1).unwrap().apply(&MoveSpec::fresh_fresh(P1)).unwrap();
        for d in 1..=4 {
            assert_eq!(naive_solve(&p, d), solve(&p, limits(d)).unwrap(), "d={d}");
        }
    }
}
