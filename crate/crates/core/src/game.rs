//! Game model: the touched part of the infinite two-coloured board.
//!
//! Only vertices incident to at least one coloured edge are stored. Every
//! untouched vertex of the board is interchangeable with every other one, so
//! a move that uses an untouched vertex names it as [`Endpoint::Fresh`] and
//! the position allocates the next free index for it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on stored vertices (adjacency rows are `u64` bitmasks).
pub const MAX_VERTICES: usize = 64;

/// Largest supported target parameter; K^_{2,t} has t + 2 vertices.
pub const MAX_TARGET: u32 = MAX_VERTICES as u32 - 2;

pub type VertexId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Player {
    P1,
    P2,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::P1 => Player::P2,
            Player::P2 => Player::P1,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Player::P1 => 0,
            Player::P2 => 1,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Player::P1 => write!(f, "P1"),
            Player::P2 => write!(f, "P2"),
        }
    }
}

/// Unordered pair of distinct stored vertices, smaller index first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: VertexId,
    pub v: VertexId,
}

impl Edge {
    /// Panics if `a == b`.
    pub fn new(a: VertexId, b: VertexId) -> Edge {
        assert_ne!(a, b, "an edge needs two distinct endpoints");
        if a < b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.u, self.v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Endpoint {
    Existing(VertexId),
    Fresh,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Existing(v) => write!(f, "{v}"),
            Endpoint::Fresh => write!(f, "new"),
        }
    }
}

/// An edge claim. Endpoints are kept normalized: existing before fresh,
/// smaller existing index first. The derived ordering is the move order used
/// for every deterministic tie-break in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MoveSpec {
    pub ends: [Endpoint; 2],
    pub mover: Player,
}

impl MoveSpec {
    pub fn new(a: Endpoint, b: Endpoint, mover: Player) -> MoveSpec {
        let ends = if a <= b { [a, b] } else { [b, a] };
        MoveSpec { ends, mover }
    }

    pub fn existing(a: VertexId, b: VertexId, mover: Player) -> MoveSpec {
        MoveSpec::new(Endpoint::Existing(a), Endpoint::Existing(b), mover)
    }

    pub fn with_fresh(a: VertexId, mover: Player) -> MoveSpec {
        MoveSpec::new(Endpoint::Existing(a), Endpoint::Fresh, mover)
    }

    pub fn fresh_fresh(mover: Player) -> MoveSpec {
        MoveSpec::new(Endpoint::Fresh, Endpoint::Fresh, mover)
    }

    pub fn from_edge(e: Edge, mover: Player) -> MoveSpec {
        MoveSpec::existing(e.u, e.v, mover)
    }

    pub fn fresh_count(&self) -> usize {
        self.ends.iter().filter(|e| **e == Endpoint::Fresh).count()
    }

    /// The edge this move colours in a position with `n` stored vertices.
    pub fn resolve(&self, n: usize) -> Option<Edge> {
        match self.ends {
            [Endpoint::Existing(a), Endpoint::Existing(b)] if a != b => Some(Edge::new(a, b)),
            [Endpoint::Existing(a), Endpoint::Fresh] => Some(Edge::new(a, n)),
            [Endpoint::Fresh, Endpoint::Fresh] => Some(Edge::new(n, n + 1)),
            _ => None,
        }
    }
}

impl MoveSpec {
    /// Endpoints only, as in `3-7`, `3-new` or `new-new`.
    pub fn ends_text(&self) -> String {
        format!("{}-{}", self.ends[0], self.ends[1])
    }

    /// Parses the [`MoveSpec::ends_text`] form.
    pub fn parse_ends(s: &str, mover: Player) -> Result<MoveSpec, GameError> {
        let bad = || GameError::Invalid(format!("cannot parse move '{s}'"));
        let (a, b) = s.trim().split_once('-').ok_or_else(bad)?;
        let end = |x: &str| -> Result<Endpoint, GameError> {
            match x.trim() {
                "new" | "fresh" => Ok(Endpoint::Fresh),
                v => v.parse().map(Endpoint::Existing).map_err(|_| bad()),
            }
        };
        Ok(MoveSpec::new(end(a)?, end(b)?, mover))
    }

    /// Parses the transcript form `P2: 3-new`.
    pub fn parse(s: &str) -> Result<MoveSpec, GameError> {
        let (who, rest) = s.split_once(':').ok_or_else(|| GameError::Invalid(format!("cannot parse move '{s}'")))?;
        let mover = match who.trim() {
            "P1" => Player::P1,
            "P2" => Player::P2,
            other => return Err(GameError::Invalid(format!("unknown player '{other}'"))),
        };
        MoveSpec::parse_ends(rest, mover)
    }
}

impl fmt::Display for MoveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}-{}", self.mover, self.ends[0], self.ends[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GameOutcome {
    P1Win,
    P2Win,
    Ongoing,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GameError {
    #[error("target parameter t must be in 1..={MAX_TARGET}, got {0}")]
    BadTarget(u32),
    #[error("the game is already decided")]
    Terminal,
    #[error("edge {0} is already coloured")]
    EdgeTaken(Edge),
    #[error("vertex {0} does not exist")]
    VertexOutOfRange(VertexId),
    #[error("an edge needs two distinct endpoints")]
    Loop,
    #[error("it is {expected}'s turn, not {got}'s")]
    WrongMover { expected: Player, got: Player },
    #[error("board would exceed {MAX_VERTICES} touched vertices")]
    TooManyVertices,
    #[error("cannot undo: {0}")]
    Undo(&'static str),
    #[error("both players hold a completed copy")]
    BothWin,
    #[error("invalid position: {0}")]
    Invalid(String),
}

/// A finite, touched part of the board together with the side to move.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Position {
    t: u32,
    n: usize,
    /// `adj[v][c]`: bitmask of neighbours joined to `v` by colour `c`.
    adj: Vec<[u64; 2]>,
    counts: [usize; 2],
    turn: Player,
}

#[inline]
fn bit(v: VertexId) -> u64 {
    1u64 << v
}

impl Position {
    pub fn new_game(t: u32) -> Result<Position, GameError> {
        if t == 0 || t > MAX_TARGET {
            return Err(GameError::BadTarget(t));
        }
        Ok(Position { t, n: 0, adj: Vec::new(), counts: [0, 0], turn: Player::P1 })
    }

    /// Builds a position from an edge list. Unless `free` is set, the turn
    /// must agree with the edge counts (P1 moves first and play alternates).
    pub fn from_edges(
        t: u32,
        turn: Player,
        edges: &[(VertexId, VertexId, Player)],
        free: bool,
    ) -> Result<Position, GameError> {
        let mut p = Position::new_game(t)?;
        let n = edges.iter().map(|&(u, v, _)| u.max(v) + 1).max().unwrap_or(0);
        if n > MAX_VERTICES {
            return Err(GameError::TooManyVertices);
        }
        p.n = n;
        p.adj = vec![[0, 0]; n];
        for &(u, v, c) in edges {
            if u == v {
                return Err(GameError::Loop);
            }
            if p.color(u, v).is_some() {
                return Err(GameError::Invalid(format!("edge {} listed twice", Edge::new(u, v))));
            }
            p.set(u, v, c);
        }
        for v in 0..n {
            if p.adj[v][0] | p.adj[v][1] == 0 {
                return Err(GameError::Invalid(format!(
                    "vertex ids must be contiguous: vertex {v} has no coloured edge"
                )));
            }
        }
        p.turn = turn;
        if !free {
            let expected = if p.counts[0] == p.counts[1] {
                Player::P1
            } else if p.counts[0] == p.counts[1] + 1 {
                Player::P2
            } else {
                return Err(GameError::Invalid(format!(
                    "P1 has {} edges and P2 has {}; the difference must be 0 or 1",
                    p.counts[0], p.counts[1]
                )));
            };
            if expected != turn {
                return Err(GameError::Invalid(format!("edge counts imply {expected} to move, file says {turn}")));
            }
        }
        if p.wins(Player::P1) && p.wins(Player::P2) {
            return Err(GameError::BothWin);
        }
        Ok(p)
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn turn(&self) -> Player {
        self.turn
    }

    pub fn edge_count(&self, who: Player) -> usize {
        self.counts[who.index()]
    }

    pub fn total_edges(&self) -> usize {
        self.counts[0] + self.counts[1]
    }

    pub fn color(&self, u: VertexId, v: VertexId) -> Option<Player> {
        if u >= self.n || v >= self.n {
            return None;
        }
        if self.adj[u][0] & bit(v) != 0 {
            Some(Player::P1)
        } else if self.adj[u][1] & bit(v) != 0 {
            Some(Player::P2)
        } else {
            None
        }
    }

    /// Bitmask of `who`'s neighbours of `v`.
    pub fn neighbors(&self, who: Player, v: VertexId) -> u64 {
        self.adj[v][who.index()]
    }

    pub fn degree(&self, who: Player, v: VertexId) -> Result<usize, GameError> {
        if v >= self.n {
            return Err(GameError::VertexOutOfRange(v));
        }
        Ok(self.adj[v][who.index()].count_ones() as usize)
    }

    /// All coloured edges, sorted.
    pub fn edges(&self) -> Vec<(Edge, Player)> {
        let mut out = Vec::with_capacity(self.total_edges());
        for u in 0..self.n {
            for who in [Player::P1, Player::P2] {
                let mut m = self.adj[u][who.index()] & !((bit(u) << 1) - 1);
                while m != 0 {
                    let v = m.trailing_zeros() as usize;
                    m &= m - 1;
                    out.push((Edge { u, v }, who));
                }
            }
        }
        out.sort();
        out
    }

    pub fn edges_of(&self, who: Player) -> Vec<Edge> {
        self.edges().into_iter().filter(|&(_, c)| c == who).map(|(e, _)| e).collect()
    }

    /// Uncoloured pairs of stored vertices, sorted.
    pub fn uncolored_pairs(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for u in 0..self.n {
            let taken = self.adj[u][0] | self.adj[u][1];
            for v in u + 1..self.n {
                if taken & bit(v) == 0 {
                    out.push(Edge { u, v });
                }
            }
        }
        out
    }

    fn set(&mut self, u: VertexId, v: VertexId, c: Player) {
        self.adj[u][c.index()] |= bit(v);
        self.adj[v][c.index()] |= bit(u);
        self.counts[c.index()] += 1;
    }

    fn clear(&mut self, u: VertexId, v: VertexId, c: Player) {
        self.adj[u][c.index()] &= !bit(v);
        self.adj[v][c.index()] &= !bit(u);
        self.counts[c.index()] -= 1;
    }

    pub fn check_move(&self, m: &MoveSpec) -> Result<Edge, GameError> {
        if m.mover != self.turn {
            return Err(GameError::WrongMover { expected: self.turn, got: m.mover });
        }
        if self.n + m.fresh_count() > MAX_VERTICES {
            return Err(GameError::TooManyVertices);
        }
        for e in m.ends {
            if let Endpoint::Existing(v) = e {
                if v >= self.n {
                    return Err(GameError::VertexOutOfRange(v));
                }
            }
        }
        let e = m.resolve(self.n).ok_or(GameError::Loop)?;
        if self.color(e.u, e.v).is_some() {
            return Err(GameError::EdgeTaken(e));
        }
        Ok(e)
    }

    /// Colours the claimed edge for the mover and passes the turn. Fresh
    /// endpoints receive the next indices in order of appearance.
    pub fn apply(&self, m: &MoveSpec) -> Result<Position, GameError> {
        if self.outcome()? != GameOutcome::Ongoing {
            return Err(GameError::Terminal);
        }
        let e = self.check_move(m)?;
        Ok(self.apply_edge_unchecked(e, m.mover, m.fresh_count()))
    }

    /// `apply` without the terminal and legality checks; callers guarantee
    /// the edge is uncoloured and `fresh` matches the allocation.
    pub(crate) fn apply_edge_unchecked(&self, e: Edge, mover: Player, fresh: usize) -> Position {
        let mut q = self.clone();
        q.n += fresh;
        q.adj.resize(q.n, [0, 0]);
        q.set(e.u, e.v, mover);
        q.turn = mover.opponent();
        q
    }

    /// Exact inverse of `apply(_, m)` on the position it produced.
    pub fn undo(&self, m: &MoveSpec) -> Result<Position, GameError> {
        if self.total_edges() == 0 {
            return Err(GameError::Undo("no move has been played"));
        }
        if m.mover == self.turn {
            return Err(GameError::Undo("the move's mover is to play again"));
        }
        let fresh = m.fresh_count();
        if fresh > self.n {
            return Err(GameError::Undo("not enough vertices for the fresh endpoints"));
        }
        let base = self.n - fresh;
        let e = m.resolve(base).ok_or(GameError::Undo("malformed move"))?;
        if e.v >= self.n {
            return Err(GameError::Undo("move does not fit the position"));
        }
        if self.color(e.u, e.v) != Some(m.mover) {
            return Err(GameError::Undo("the move's edge is not coloured by its mover"));
        }
        let mut q = self.clone();
        q.clear(e.u, e.v, m.mover);
        for v in base..self.n {
            if q.adj[v][0] | q.adj[v][1] != 0 {
                return Err(GameError::Undo("a fresh endpoint has other edges"));
            }
        }
        for u in 0..base {
            if q.adj[u][0] | q.adj[u][1] == 0 {
                return Err(GameError::Undo("an existing endpoint would become untouched"));
            }
        }
        q.n = base;
        q.adj.truncate(base);
        q.turn = m.mover;
        Ok(q)
    }

    /// Does `who` hold a copy of K^_{2,t}: an edge of their colour whose
    /// endpoints have at least `t` common neighbours in that colour.
    pub fn wins(&self, who: Player) -> bool {
        let c = who.index();
        let t = self.t;
        for u in 0..self.n {
            let nu = self.adj[u][c];
            if nu.count_ones() < t + 1 {
                continue;
            }
            let mut m = nu & !((bit(u) << 1) - 1);
            while m != 0 {
                let v = m.trailing_zeros() as usize;
                m &= m - 1;
                if (nu & self.adj[v][c]).count_ones() >= t {
                    return true;
                }
            }
        }
        false
    }

    pub fn outcome(&self) -> Result<GameOutcome, GameError> {
        match (self.wins(Player::P1), self.wins(Player::P2)) {
            (true, true) => Err(GameError::BothWin),
            (true, false) => Ok(GameOutcome::P1Win),
            (false, true) => Ok(GameOutcome::P2Win),
            (false, false) => Ok(GameOutcome::Ongoing),
        }
    }

    pub fn is_terminal(&self) -> bool {
        self.wins(Player::P1) || self.wins(Player::P2)
    }

    /// One-move lookahead: every uncoloured pair of stored vertices whose
    /// claim by `who` yields a completed copy.
    pub fn winning_moves(&self, who: Player) -> Vec<Edge> {
        let mut scratch = self.clone();
        let mut out = Vec::new();
        for e in self.uncolored_pairs() {
            scratch.set(e.u, e.v, who);
            if scratch.wins(who) {
                out.push(e);
            }
            scratch.clear(e.u, e.v, who);
        }
        // A completing edge always joins two touched vertices: every vertex
        // of K^_{2,t} minus an edge keeps degree at least one.
        debug_assert!(out.iter().all(|e| e.v < self.n));
        out
    }

    /// Threat enumeration through threat graphs (copies of K^_{2,t} minus one
    /// edge whose missing edge is unclaimed). Returns the missing edges,
    /// sorted and deduplicated. Agrees with [`Position::winning_moves`] on
    /// every position; on a position `who` has already won, every uncoloured
    /// pair keeps the win and all of them are returned.
    pub fn threats(&self, who: Player) -> Vec<Edge> {
        if self.wins(who) {
            return self.uncolored_pairs();
        }
        let c = who.index();
        let o = 1 - c;
        let need = self.t;
        let mut out: Vec<Edge> = Vec::new();
        for x in 0..self.n {
            for y in x + 1..self.n {
                let nx = self.adj[x][c];
                let ny = self.adj[y][c];
                let common = (nx & ny).count_ones();
                if nx & bit(y) != 0 {
                    // Main edge present: a leaf with one side missing.
                    if common + 1 >= need {
                        let free_x = !(self.adj[x][0] | self.adj[x][1]) & !bit(x);
                        let free_y = !(self.adj[y][0] | self.adj[y][1]) & !bit(y);
                        let mut cand = (nx & free_y) | (ny & free_x);
                        while cand != 0 {
                            let z = cand.trailing_zeros() as usize;
                            cand &= cand - 1;
                            if nx & bit(z) != 0 {
                                out.push(Edge::new(y, z));
                            } else {
                                out.push(Edge::new(x, z));
                            }
                        }
                    }
                } else if self.adj[x][o] & bit(y) == 0 && common >= need {
                    // Main edge missing, all leaves present.
                    out.push(Edge::new(x, y));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Relabels vertices: old vertex `v` becomes `perm[v]`.
    pub fn permuted(&self, perm: &[VertexId]) -> Position {
        assert_eq!(perm.len(), self.n);
        let mut adj = vec![[0u64, 0u64]; self.n];
        for (v, row) in self.adj.iter().enumerate() {
            for c in 0..2 {
                let mut m = row[c];
                let mut out = 0u64;
                while m != 0 {
                    let w = m.trailing_zeros() as usize;
                    m &= m - 1;
                    out |= bit(perm[w]);
                }
                adj[perm[v]][c] = out;
            }
        }
        Position { t: self.t, n: self.n, adj, counts: self.counts, turn: self.turn }
    }

    pub(crate) fn raw_adj(&self) -> &[[u64; 2]] {
        &self.adj
    }

    /// The side the alternation rule puts on move, if the counts allow one.
    pub fn natural_turn(&self) -> Option<Player> {
        match (self.counts[0], self.counts[1]) {
            (a, b) if a == b => Some(Player::P1),
            (a, b) if a == b + 1 => Some(Player::P2),
            _ => None,
        }
    }

    /// File form; positions off the alternation rule are marked `free`.
    pub fn to_file(&self) -> PositionFile {
        PositionFile {
            t: self.t,
            turn: self.turn,
            edges: self.edges().into_iter().map(|(e, color)| EdgeRecord { u: e.u, v: e.v, color }).collect(),
            free: self.natural_turn() != Some(self.turn),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("position serializes")
    }

    pub fn from_json(s: &str) -> Result<Position, GameError> {
        let file: PositionFile = serde_json::from_str(s).map_err(|e| GameError::Invalid(e.to_string()))?;
        file.into_position()
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} n={} turn={} P1:[", self.t, self.n, self.turn)?;
        let edges = self.edges();
        let mut first = true;
        for (e, _) in edges.iter().filter(|(_, c)| *c == Player::P1) {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{e}")?;
        }
        write!(f, "] P2:[")?;
        first = true;
        for (e, _) in edges.iter().filter(|(_, c)| *c == Player::P2) {
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "{e}")?;
        }
        write!(f, "]")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: VertexId,
    pub v: VertexId,
    pub color: Player,
}

/// On-disk position: `{"t":3,"turn":"P1","edges":[{"u":0,"v":1,"color":"P1"}]}`.
/// `free` skips the turn/edge-count check for hand-built lemma positions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionFile {
    pub t: u32,
    pub turn: Player,
    pub edges: Vec<EdgeRecord>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub free: bool,
}

impl PositionFile {
    pub fn into_position(self) -> Result<Position, GameError> {
        let edges: Vec<_> = self.edges.iter().map(|e| (e.u, e.v, e.color)).collect();
        Position::from_edges(self.t, self.turn, &edges, self.free)
    }
}
