//! Certificates that the scripted strategy wins against every reply.
//!
//! [`verify`] expands the game tree: one strategy move at P1 nodes, one child
//! per move class at P2 nodes. Nodes are identified by the canonical key of
//! the role-annotated position plus the strategy's phase tag, so transposed
//! lines share a subtree. [`check_certificate`] re-checks the result using
//! only the game rules and the symmetry module.
//!
//! P2 classes after which P1 already holds a threat are not stored as nodes:
//! the strategy takes the win immediately and the checker re-derives that
//! fact from the position alone. Each P2 node records how many such classes
//! it has.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Mutex, OnceLock};

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Endpoint, MoveSpec, Player, Position, PositionFile, VertexId};
use crate::par;
use crate::strategy::{self, OpeningClass, Phase, Relabel, StrategyState};
use crate::symmetry::{self, CanonicalKey, Role, RoleMap, SymmetryError};

/// Number of critical opening classes drawn in the source figure.
pub const EXPECTED_CRITICAL_CLASSES: usize = 3;

/// Absolute ply bound for the opening sub-verifications.
pub const CLASSIFICATION_BOUND: u32 = strategy::DEFAULT_PLY_BOUND;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("the scripted strategy needs t = 3 (got t = {0})")]
    UnsupportedTarget(u32),
    #[error("root position is already decided")]
    Terminal,
    #[error("verification failed: {0}")]
    Failed(Failure),
    #[error(transparent)]
    Symmetry(#[from] SymmetryError),
}

/// A concrete line on which the strategy does not win.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    /// Moves from the root, in the root's labels for the first move and in
    /// each node's canonical labels after that.
    pub path: Vec<String>,
    pub node: String,
    pub reason: String,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} at node {} after [{}]", self.reason, self.node, self.path.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassChild {
    /// Representative P2 move, canonical labels of the parent.
    pub rep: String,
    pub orbit: usize,
    pub child: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mover")]
pub enum CertNode {
    P1 {
        state: String,
        #[serde(rename = "move")]
        mv: String,
        /// Role tags after the move, labels of the parent plus the fresh ids.
        roles: BTreeMap<Role, VertexId>,
        /// `None` when the move completes the target.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        child: Option<String>,
        win_in: u32,
    },
    P2 {
        state: String,
        children: Vec<ClassChild>,
        /// Classes after which P1 holds a threat (won on the next ply).
        immediate: usize,
        win_in: u32,
    },
}

impl CertNode {
    pub fn win_in(&self) -> u32 {
        match self {
            CertNode::P1 { win_in, .. } | CertNode::P2 { win_in, .. } => *win_in,
        }
    }

    pub fn state(&self) -> &str {
        match self {
            CertNode::P1 { state, .. } | CertNode::P2 { state, .. } => state,
        }
    }

    pub fn mover(&self) -> Player {
        match self {
            CertNode::P1 { .. } => Player::P1,
            CertNode::P2 { .. } => Player::P2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningRow {
    /// P2's third edge, with role names where the endpoint has one.
    pub third_move: String,
    pub orbit: usize,
    pub class: OpeningClass,
    /// Renaming applied before the class script is played.
    pub relabel: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub rows: Vec<OpeningRow>,
    pub generic: usize,
    pub critical: usize,
    pub unresolved: usize,
    /// Critical classes up to exchanging `b` with `d` and `x` with `y`.
    pub critical_up_to_symmetry: usize,
    pub expected: usize,
    pub matches_expectation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertStats {
    pub nodes: usize,
    pub p1_nodes: usize,
    pub p2_nodes: usize,
    pub immediate_wins: usize,
    pub max_depth: u32,
    pub fallback_moves: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical: Option<CriticalReport>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub t: u32,
    pub bound: u32,
    pub root: String,
    pub position: PositionFile,
    pub nodes: BTreeMap<String, CertNode>,
    pub stats: CertStats,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("certificate serializes")
    }

    pub fn from_json(s: &str) -> Result<Certificate, String> {
        serde_json::from_str(s).map_err(|e| e.to_string())
    }
}

fn node_id(key: &CanonicalKey, s: &StrategyState) -> String {
    format!("{}/{}", key.to_hex(), s.tag())
}

fn split_id(id: &str) -> Option<(&str, &str)> {
    id.split_once('/')
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Plies allowed from the root position.
    pub bound: u32,
    pub fallback_budget: u64,
}

impl VerifyOptions {
    pub fn new(bound: u32) -> VerifyOptions {
        VerifyOptions { bound, fallback_budget: strategy::DEFAULT_FALLBACK_BUDGET }
    }
}

struct Run<'a> {
    limit_edges: u32,
    fallback_budget: u64,
    store: DashMap<String, CertNode>,
    seed: Option<&'a HashMap<String, CertNode>>,
    abort: AtomicBool,
    failure: Mutex<Option<Failure>>,
}

/// Internal failure while unwinding: path is built back to front.
struct Fail {
    rev_path: Vec<String>,
    node: String,
    reason: String,
}

impl Fail {
    fn new(node: &str, reason: impl Into<String>) -> Fail {
        Fail { rev_path: Vec::new(), node: node.to_string(), reason: reason.into() }
    }

    fn via(mut self, step: String) -> Fail {
        self.rev_path.push(step);
        self
    }

    fn into_failure(self) -> Failure {
        let mut path = self.rev_path;
        path.reverse();
        Failure { path, node: self.node, reason: self.reason }
    }
}

const ABORTED: &str = "aborted";

impl Run<'_> {
    fn lookup(&self, id: &str, edges: u32) -> Option<u32> {
        if let Some(n) = self.store.get(id) {
            return Some(n.win_in());
        }
        let n = self.seed?.get(id)?;
        (edges + n.win_in() <= self.limit_edges).then(|| n.win_in())
    }

    fn fail(&self, f: Fail) -> Fail {
        if f.reason != ABORTED {
            self.abort.store(true, Ordering::Relaxed);
        }
        f
    }

    fn p1(&self, q: &Position, s: &StrategyState, id: &str) -> Result<u32, Fail> {
        let edges = q.total_edges() as u32;
        if let Some(h) = self.lookup(id, edges) {
            return Ok(h);
        }
        if self.abort.load(Ordering::Relaxed) {
            return Err(Fail::new(id, ABORTED));
        }
        let s = StrategyState { fallback_budget: self.fallback_budget, ..s.clone() };
        let (m, next) = strategy::step(q, &s).map_err(|e| self.fail(Fail::new(id, e.to_string())))?;
        let q2 = q.apply(&m).map_err(|e| self.fail(Fail::new(id, e.to_string())))?;
        let roles: BTreeMap<Role, VertexId> = next.roles.iter().collect();
        let (child, win_in) = if q2.wins(Player::P1) {
            (None, 1)
        } else {
            if edges + 2 > self.limit_edges {
                return Err(self.fail(Fail::new(id, "ply bound reached without a P1 win")));
            }
            let (q3, r3, canon) =
                symmetry::canonical_form(&q2, &next.roles).map_err(|e| self.fail(Fail::new(id, e.to_string())))?;
            let next3 = StrategyState { roles: r3, ..next };
            let cid = node_id(&canon.key, &next3);
            let h = self.p2(&q3, &next3, &cid).map_err(|f| f.via(m.to_string()))?;
            (Some(cid), h + 1)
        };
        if edges + win_in > self.limit_edges {
            return Err(self.fail(Fail::new(id, "win exceeds the ply bound")));
        }
        self.store.insert(id.to_string(), CertNode::P1 { state: s.tag(), mv: m.ends_text(), roles, child, win_in });
        Ok(win_in)
    }

    fn p2(&self, q: &Position, s: &StrategyState, id: &str) -> Result<u32, Fail> {
        let edges = q.total_edges() as u32;
        if let Some(h) = self.lookup(id, edges) {
            return Ok(h);
        }
        if self.abort.load(Ordering::Relaxed) {
            return Err(Fail::new(id, ABORTED));
        }
        if edges + 2 > self.limit_edges {
            return Err(self.fail(Fail::new(id, "ply bound reached without a P1 win")));
        }
        let classes = symmetry::reduced_moves(q, &s.roles).map_err(|e| self.fail(Fail::new(id, e.to_string())))?;
        let results = par::map(&classes, |c| -> Result<Option<(ClassChild, u32)>, Fail> {
            let step = c.rep.to_string();
            let (succ, roles) = c.successor.decode().map_err(|e| self.fail(Fail::new(id, e.to_string())))?;
            if succ.wins(Player::P2) {
                return Err(self.fail(Fail::new(id, "P2 completes the target").via(step)));
            }
            if !succ.threats(Player::P1).is_empty() {
                return Ok(None);
            }
            let next = StrategyState { roles, ..s.clone() };
            let cid = node_id(&c.successor, &next);
            let h = self.p1(&succ, &next, &cid).map_err(|f| f.via(step))?;
            Ok(Some((ClassChild { rep: c.rep.ends_text(), orbit: c.orbit_size, child: cid }, h)))
        });
        let mut children = Vec::new();
        let mut immediate = 0;
        let mut win_in = 0;
        let mut aborted = None;
        for r in results {
            match r {
                Ok(Some((child, h))) => {
                    win_in = win_in.max(h + 1);
                    children.push(child);
                }
                Ok(None) => {
                    immediate += 1;
                    win_in = win_in.max(2);
                }
                Err(f) if f.reason == ABORTED => aborted = Some(f),
                Err(f) => return Err(f),
            }
        }
        if let Some(f) = aborted {
            return Err(f);
        }
        if edges + win_in > self.limit_edges {
            return Err(self.fail(Fail::new(id, "win exceeds the ply bound")));
        }
        self.store.insert(id.to_string(), CertNode::P2 { state: s.tag(), children, immediate, win_in });
        Ok(win_in)
    }

    fn record(&self, f: Fail) -> Failure {
        let f = f.into_failure();
        let mut slot = self.failure.lock().expect("failure lock");
        if f.reason != ABORTED || slot.is_none() {
            slot.get_or_insert_with(|| f.clone());
        }
        slot.clone().unwrap_or(f)
    }
}

/// Expands the strategy tree from `p` and returns a certificate that every
/// line ends in a P1 win within `opts.bound` plies.
pub fn verify(p: &Position, s: &StrategyState, opts: VerifyOptions) -> Result<Certificate, VerifyError> {
    let seeded = needs_classification(p, s);
    let table = seeded.then(opening_classification);
    let seed = table.map(|t| &t.nodes);
    let mut cert = verify_inner(p, s, opts, seed)?;
    if let Some(t) = table {
        cert.stats.critical = Some(t.report.clone());
    }
    Ok(cert)
}

fn needs_classification(p: &Position, s: &StrategyState) -> bool {
    p.t() == 3 && s.phase == Phase::Opening && s.plan.is_none() && p.total_edges() <= 6
}

fn verify_inner(
    p: &Position,
    s: &StrategyState,
    opts: VerifyOptions,
    seed: Option<&HashMap<String, CertNode>>,
) -> Result<Certificate, VerifyError> {
    if p.t() != 3 {
        return Err(VerifyError::UnsupportedTarget(p.t()));
    }
    if p.outcome().map_err(SymmetryError::from)? != crate::game::GameOutcome::Ongoing {
        return Err(VerifyError::Terminal);
    }
    let root_edges = p.total_edges() as u32;
    let run = Run {
        limit_edges: root_edges + opts.bound,
        fallback_budget: opts.fallback_budget,
        store: DashMap::new(),
        seed,
        abort: AtomicBool::new(false),
        failure: Mutex::new(None),
    };
    let (q, r, canon) = symmetry::canonical_form(p, &s.roles)?;
    let sq = StrategyState { roles: r, ..s.clone() };
    let root = node_id(&canon.key, &sq);
    let result = match p.turn() {
        Player::P1 => run.p1(&q, &sq, &root),
        Player::P2 => run.p2(&q, &sq, &root),
    };
    if let Err(f) = result {
        return Err(VerifyError::Failed(run.record(f)));
    }
    let store: HashMap<String, CertNode> = run.store.into_iter().collect();
    let nodes = collect_reachable(&root, &store, seed);
    let stats = stats_of(&root, &nodes);
    Ok(Certificate { t: p.t(), bound: opts.bound, root, position: p.to_file(), nodes, stats })
}

fn children_of(n: &CertNode) -> Vec<&str> {
    match n {
        CertNode::P1 { child, .. } => child.iter().map(String::as_str).collect(),
        CertNode::P2 { children, .. } => children.iter().map(|c| c.child.as_str()).collect(),
    }
}

fn collect_reachable(
    root: &str,
    store: &HashMap<String, CertNode>,
    seed: Option<&HashMap<String, CertNode>>,
) -> BTreeMap<String, CertNode> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_string()];
    while let Some(id) = stack.pop() {
        if out.contains_key(&id) {
            continue;
        }
        let node = store.get(&id).or_else(|| seed.and_then(|s| s.get(&id))).expect("node stored");
        stack.extend(children_of(node).into_iter().map(str::to_string));
        out.insert(id, node.clone());
    }
    out
}

fn stats_of(root: &str, nodes: &BTreeMap<String, CertNode>) -> CertStats {
    let mut st = CertStats {
        nodes: nodes.len(),
        p1_nodes: 0,
        p2_nodes: 0,
        immediate_wins: 0,
        max_depth: nodes.get(root).map_or(0, CertNode::win_in),
        fallback_moves: 0,
        critical: None,
    };
    for n in nodes.values() {
        match n {
            CertNode::P1 { state, .. } => {
                st.p1_nodes += 1;
                if state.starts_with(Phase::Fallback.label()) {
                    st.fallback_moves += 1;
                }
            }
            CertNode::P2 { immediate, .. } => {
                st.p2_nodes += 1;
                st.immediate_wins += immediate;
            }
        }
    }
    st
}

/// Computed classification of P2's third move in the line where his first
/// edge avoided `a` and `b` and his second was `bd`.
pub struct OpeningTable {
    entries: BTreeMap<CanonicalKey, (OpeningClass, Relabel)>,
    pub report: CriticalReport,
    /// Certified subtrees of the successful sub-verifications, reused by the
    /// full run.
    nodes: HashMap<String, CertNode>,
}

impl OpeningTable {
    pub fn lookup(&self, key: &CanonicalKey) -> Option<(OpeningClass, Relabel)> {
        self.entries.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The position before P2's third move, with its roles.
pub fn opening_base() -> (Position, RoleMap) {
    use Player::*;
    // a=0 b=1 x=2 y=3 d=4 c=5
    let p = Position::from_edges(3, P2, &[(0, 1, P1), (2, 3, P2), (0, 4, P1), (1, 4, P2), (0, 5, P1)], false)
        .expect("opening base is legal");
    let roles = [(Role::A, 0), (Role::B, 1), (Role::X, 2), (Role::Y, 3), (Role::D, 4), (Role::C, 5)]
        .into_iter()
        .try_fold(RoleMap::new(), |r, (role, v)| r.with(role, v))
        .expect("distinct roles");
    (p, roles)
}

static OPENING_TABLE: OnceLock<OpeningTable> = OnceLock::new();

/// Builds (once per process) the opening table by sub-verification: each
/// class of P2's third move gets the first scripted continuation that
/// certifies a win within [`CLASSIFICATION_BOUND`] plies of the game start.
pub fn opening_classification() -> &'static OpeningTable {
    OPENING_TABLE.get_or_init(build_opening_table)
}

fn move_with_roles(m: &MoveSpec, roles: &RoleMap) -> String {
    let name = |e: Endpoint| match e {
        Endpoint::Existing(v) => roles.role_of(v).map_or_else(|| v.to_string(), |r| r.label().to_string()),
        Endpoint::Fresh => "new".to_string(),
    };
    format!("{}-{}", name(m.ends[0]), name(m.ends[1]))
}

fn build_opening_table() -> OpeningTable {
    let (base, roles) = opening_base();
    let classes = symmetry::reduced_moves(&base, &roles).expect("base is not terminal");
    let rows = par::map(&classes, |c| {
        let succ = base.apply(&c.rep).expect("legal class representative");
        let mut r = roles.clone();
        strategy::normalize_fourth_move(&succ, &mut r).expect("opening roles");
        let key = symmetry::canonical_key(&succ, &r).expect("small position");
        let sym_key = Relabel::ALL
            .iter()
            .map(|g| {
                let mut rr = roles.clone();
                g.apply(&mut rr);
                symmetry::canonical_key(&succ, &rr).expect("small position")
            })
            .min()
            .expect("four relabelings");
        let third_move = move_with_roles(&c.rep, &roles);
        let bound = CLASSIFICATION_BOUND - succ.total_edges() as u32;
        for plan in OpeningClass::SCRIPTED {
            for g in Relabel::ALL {
                let mut rr = r.clone();
                g.apply(&mut rr);
                let (Some(b), Some(cv)) = (rr.get(Role::B), rr.get(Role::C)) else { continue };
                if succ.color(b, cv).is_some() {
                    continue;
                }
                let s = StrategyState { plan: Some(plan), ..StrategyState::in_phase(Phase::Opening, rr.clone(), 3) };
                if let Ok(cert) = verify_inner(&succ, &s, VerifyOptions::new(bound), None) {
                    let class = match plan {
                        OpeningClass::CriticalA if touches(&c.rep, &rr, Role::C) => OpeningClass::CriticalB,
                        p => p,
                    };
                    let row = OpeningRow { third_move, orbit: c.orbit_size, class, relabel: g.label().to_string() };
                    return (key, sym_key, row, g, Some(cert));
                }
            }
        }
        let row = OpeningRow {
            third_move,
            orbit: c.orbit_size,
            class: OpeningClass::Unresolved,
            relabel: Relabel::default().label().to_string(),
        };
        (key, sym_key, row, Relabel::default(), None)
    });
    let mut entries = BTreeMap::new();
    let mut nodes = HashMap::new();
    let mut report_rows = Vec::new();
    let mut critical_sym = BTreeSet::new();
    let (mut generic, mut critical, mut unresolved) = (0, 0, 0);
    for (key, sym_key, row, relabel, cert) in rows {
        // unresolved classes count as critical for the comparison with the
        // figure: the generic line does not handle them either
        match row.class {
            OpeningClass::Generic => generic += 1,
            OpeningClass::Unresolved => {
                unresolved += 1;
                critical_sym.insert(sym_key);
            }
            _ => {
                critical += 1;
                critical_sym.insert(sym_key);
            }
        }
        entries.insert(key, (row.class, relabel));
        if let Some(cert) = cert {
            let root = cert.root.clone();
            nodes.extend(cert.nodes.into_iter().filter(|(id, _)| *id != root));
        }
        report_rows.push(row);
    }
    let critical_up_to_symmetry = critical_sym.len();
    let report = CriticalReport {
        rows: report_rows,
        generic,
        critical,
        unresolved,
        critical_up_to_symmetry,
        expected: EXPECTED_CRITICAL_CLASSES,
        matches_expectation: critical_up_to_symmetry == EXPECTED_CRITICAL_CLASSES,
    };
    OpeningTable { entries, report, nodes }
}

fn touches(m: &MoveSpec, roles: &RoleMap, role: Role) -> bool {
    roles.get(role).is_some_and(|v| m.ends.contains(&Endpoint::Existing(v)))
}

/// Where an independent certificate check failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("certificate rejected at {node}: {reason}")]
pub struct CheckFailure {
    pub node: String,
    pub reason: String,
}

fn reject(node: &str, reason: impl Into<String>) -> CheckFailure {
    CheckFailure { node: node.to_string(), reason: reason.into() }
}

fn decode_id(id: &str) -> Result<(Position, RoleMap), CheckFailure> {
    let (hex, _) = split_id(id).ok_or_else(|| reject(id, "malformed node id"))?;
    let key = CanonicalKey::from_hex(hex).map_err(|e| reject(id, e.to_string()))?;
    key.decode().map_err(|e| reject(id, e.to_string()))
}

fn key_of(id: &str) -> &str {
    split_id(id).map_or(id, |(k, _)| k)
}

/// Independent re-check: replays every P1 move, re-derives the move classes
/// at every P2 node, confirms coverage and the win at every leaf, then
/// recomputes depths. Uses only the game and symmetry modules.
pub fn check_certificate(c: &Certificate) -> Result<(), CheckFailure> {
    if c.t != 3 {
        return Err(reject(&c.root, format!("unsupported t = {}", c.t)));
    }
    let root = c.nodes.get(&c.root).ok_or_else(|| reject(&c.root, "root node missing"))?;
    let start = c.position.clone().into_position().map_err(|e| reject(&c.root, e.to_string()))?;
    let (root_pos, _) = decode_id(&c.root)?;
    let plain = |p: &Position| symmetry::canonical_key(p, &RoleMap::new()).map_err(|e| reject(&c.root, e.to_string()));
    if plain(&start)? != plain(&root_pos)? {
        return Err(reject(&c.root, "root key does not match the recorded position"));
    }
    if root.mover() != start.turn() {
        return Err(reject(&c.root, "root mover does not match the side to move"));
    }

    let ids: Vec<(&String, &CertNode)> = c.nodes.iter().collect();
    let local = par::map(&ids, |(id, node)| check_node(id, node, &c.nodes));
    if let Some(err) = local.into_iter().find_map(Result::err) {
        return Err(err);
    }

    // depths and reachability, children first
    let mut order: Vec<&String> = c.nodes.keys().collect();
    let edges_of = |id: &str| -> usize {
        let (hex, _) = split_id(id).expect("checked id");
        let k = CanonicalKey::from_hex(hex).expect("checked key");
        let b = k.as_bytes();
        let n = b[2] as usize;
        let mut count = 0;
        for &byte in &b[3 + n..] {
            for i in 0..4 {
                if (byte >> (2 * i)) & 3 != 0 {
                    count += 1;
                }
            }
        }
        count
    };
    order.sort_by_key(|id| std::cmp::Reverse(edges_of(id)));
    let mut height: HashMap<&str, u32> = HashMap::new();
    for id in order {
        let node = &c.nodes[id];
        let h = match node {
            CertNode::P1 { child: None, .. } => 1,
            CertNode::P1 { child: Some(ch), .. } => 1 + height[ch.as_str()],
            CertNode::P2 { children, immediate, .. } => {
                let mut h = if *immediate > 0 { 2 } else { 0 };
                for ch in children {
                    h = h.max(1 + height[ch.child.as_str()]);
                }
                h
            }
        };
        if h != node.win_in() {
            return Err(reject(id, format!("recorded depth {} but the subtree needs {h}", node.win_in())));
        }
        height.insert(id.as_str(), h);
    }
    if root.win_in() > c.bound {
        return Err(reject(&c.root, format!("depth {} exceeds the bound {}", root.win_in(), c.bound)));
    }
    let mut seen = BTreeSet::new();
    let mut stack = vec![c.root.as_str()];
    while let Some(id) = stack.pop() {
        if seen.insert(id) {
            stack.extend(children_of(&c.nodes[id]));
        }
    }
    if let Some(orphan) = c.nodes.keys().find(|k| !seen.contains(k.as_str())) {
        return Err(reject(orphan, "node is not reachable from the root"));
    }
    Ok(())
}

fn check_node(id: &str, node: &CertNode, nodes: &BTreeMap<String, CertNode>) -> Result<(), CheckFailure> {
    let (q, roles) = decode_id(id)?;
    if q.turn() != node.mover() {
        return Err(reject(id, "recorded mover is not the side to move"));
    }
    if q.is_terminal() {
        return Err(reject(id, "position is already decided"));
    }
    let edges = q.total_edges();
    let child_edges = |ch: &str| -> Result<(Position, RoleMap), CheckFailure> {
        let (cp, cr) = decode_id(ch)?;
        if cp.total_edges() != edges + 1 {
            return Err(reject(id, format!("child {ch} is not one move deeper")));
        }
        Ok((cp, cr))
    };
    match node {
        CertNode::P1 { mv, roles: after, child, .. } => {
            let m = MoveSpec::parse_ends(mv, Player::P1).map_err(|e| reject(id, e.to_string()))?;
            let q2 = q.apply(&m).map_err(|e| reject(id, format!("move {mv}: {e}")))?;
            match child {
                None => {
                    if !q2.wins(Player::P1) {
                        return Err(reject(id, format!("leaf move {mv} does not complete the target")));
                    }
                }
                Some(ch) => {
                    if q2.is_terminal() {
                        return Err(reject(id, "game ends after the move but a child is recorded"));
                    }
                    let cnode = nodes.get(ch).ok_or_else(|| reject(id, format!("child {ch} missing")))?;
                    if cnode.mover() != Player::P2 {
                        return Err(reject(ch, "expected a P2 node"));
                    }
                    child_edges(ch)?;
                    let mut r = RoleMap::new();
                    for (role, v) in after {
                        r.assign(*role, *v).map_err(|e| reject(id, e.to_string()))?;
                    }
                    let key = symmetry::canonical_key(&q2, &r).map_err(|e| reject(id, e.to_string()))?;
                    if key.to_hex() != key_of(ch) {
                        return Err(reject(id, format!("move {mv} does not lead to child {ch}")));
                    }
                }
            }
        }
        CertNode::P2 { children, immediate, .. } => {
            let classes = symmetry::reduced_moves(&q, &roles).map_err(|e| reject(id, e.to_string()))?;
            let mut listed = children.iter().peekable();
            let mut unlisted = 0;
            for class in &classes {
                let rep = class.rep.ends_text();
                if let Some(ch) = listed.next_if(|ch| ch.rep == rep) {
                    if key_of(&ch.child) != class.successor.to_hex() {
                        return Err(reject(id, format!("class {rep} points at the wrong child")));
                    }
                    if ch.orbit != class.orbit_size {
                        return Err(reject(id, format!("class {rep} has orbit {} not {}", class.orbit_size, ch.orbit)));
                    }
                    let cnode =
                        nodes.get(&ch.child).ok_or_else(|| reject(id, format!("child {} missing", ch.child)))?;
                    if cnode.mover() != Player::P1 {
                        return Err(reject(&ch.child, "expected a P1 node"));
                    }
                    child_edges(&ch.child)?;
                    continue;
                }
                let (succ, _) = class.successor.decode().map_err(|e| reject(id, e.to_string()))?;
                if succ.wins(Player::P2) {
                    return Err(reject(id, format!("P2 wins with {rep}")));
                }
                if succ.threats(Player::P1).is_empty() {
                    return Err(reject(id, format!("class {rep} is not covered")));
                }
                unlisted += 1;
            }
            if let Some(extra) = listed.next() {
                return Err(reject(id, format!("listed class {} is not a move class here", extra.rep)));
            }
            if unlisted != *immediate {
                return Err(reject(id, format!("{unlisted} immediate-win classes, {immediate} recorded")));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub end_entries: usize,
    pub end_entries_ok: usize,
    /// Largest number of plies an end-phase entry needed to win.
    pub end_max_win_in: u32,
    pub triangle_entries: usize,
    pub triangle_entries_ok: usize,
    pub violations: Vec<String>,
    pub fallback_moves: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opening: Option<CriticalReport>,
}

impl LemmaReport {
    pub fn all_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the end-phase hypotheses (P1 holds K^_{2,2}, no P2 threat, at most
/// seven P2 edges, win within nine plies) at every end-phase entry, and the
/// triangle-with-pendant shape at every entry of that phase.
pub fn lemma_report(c: &Certificate) -> LemmaReport {
    let mut rep = LemmaReport {
        end_entries: 0,
        end_entries_ok: 0,
        end_max_win_in: 0,
        triangle_entries: 0,
        triangle_entries_ok: 0,
        violations: Vec::new(),
        fallback_moves: c.stats.fallback_moves,
        opening: c.stats.critical.clone(),
    };
    let end_tag = format!("{}/0", Phase::EndPosition);
    let tri_tag = format!("{}/0", Phase::MainLem);
    for (id, node) in &c.nodes {
        let CertNode::P1 { state, win_in, .. } = node else { continue };
        let Ok((q, roles)) = decode_id(id) else {
            rep.violations.push(format!("{id}: undecodable"));
            continue;
        };
        if *state == end_tag {
            rep.end_entries += 1;
            rep.end_max_win_in = rep.end_max_win_in.max(*win_in);
            let mut bad = Vec::new();
            if strategy::p1_k22_copies(&q).is_empty() {
                bad.push("no P1 K^_(2,2)".to_string());
            }
            if !q.threats(Player::P2).is_empty() {
                bad.push("P2 has a threat".to_string());
            }
            if q.edge_count(Player::P2) > 7 {
                bad.push(format!("P2 has {} edges", q.edge_count(Player::P2)));
            }
            if *win_in > 9 {
                bad.push(format!("needs {win_in} plies"));
            }
            if bad.is_empty() {
                rep.end_entries_ok += 1;
            } else {
                rep.violations.push(format!("{id}: {}", bad.join("; ")));
            }
        } else if *state == tri_tag {
            rep.triangle_entries += 1;
            let named: Option<Vec<VertexId>> =
                [Role::A, Role::B, Role::C, Role::D].iter().map(|r| roles.get(*r)).collect();
            let ok = named.is_some_and(|v| {
                let (a, b, cc, d) = (v[0], v[1], v[2], v[3]);
                [(a, b), (b, cc), (a, cc), (a, d)].iter().all(|&(u, w)| q.color(u, w) == Some(Player::P1))
            });
            if ok {
                rep.triangle_entries_ok += 1;
            } else {
                rep.violations.push(format!("{id}: not a triangle with pendant"));
            }
        }
    }
    rep
}

/// Graphviz rendering: P1 moves solid, P2 classes dashed and labelled with
/// the representative and orbit size.
pub fn to_dot(c: &Certificate) -> String {
    let short: HashMap<&str, usize> = c.nodes.keys().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let mut out = String::from("digraph certificate {\n  node [shape=box, fontsize=9];\n");
    for (id, node) in &c.nodes {
        let i = short[id.as_str()];
        let shape = if node.mover() == Player::P1 { "box" } else { "ellipse" };
        let root = if *id == c.root { ", penwidth=2" } else { "" };
        let _ = writeln!(
            out,
            "  n{i} [shape={shape}{root}, label=\"{} {}\\nwin in {}\"];",
            node.mover(),
            node.state(),
            node.win_in()
        );
        match node {
            CertNode::P1 { mv, child: Some(ch), .. } => {
                let _ = writeln!(out, "  n{i} -> n{} [label=\"{mv}\"];", short[ch.as_str()]);
            }
            CertNode::P1 { mv, child: None, .. } => {
                let _ = writeln!(out, "  w{i} [shape=plaintext, label=\"P1 wins\"];");
                let _ = writeln!(out, "  n{i} -> w{i} [label=\"{mv}\"];");
            }
            CertNode::P2 { children, immediate, .. } => {
                for ch in children {
                    let _ = writeln!(
                        out,
                        "  n{i} -> n{} [style=dashed, label=\"{} x{}\"];",
                        short[ch.child.as_str()],
                        ch.rep,
                        ch.orbit
                    );
                }
                if *immediate > 0 {
                    let _ = writeln!(out, "  i{i} [shape=plaintext, label=\"{immediate} classes: P1 wins next\"];");
                    let _ = writeln!(out, "  n{i} -> i{i} [style=dotted];");
                }
            }
        }
    }
    out.push_str("}\n");
    out
}

/// One longest line of the certificate: each step is the node's state tag
/// and the move played from it (P2 steps name the class representative).
pub fn deepest_line(c: &Certificate) -> Vec<String> {
    let mut out = Vec::new();
    let mut id = Some(c.root.as_str());
    while let Some(cur) = id {
        let Some(node) = c.nodes.get(cur) else { break };
        match node {
            CertNode::P1 { state, mv, child, .. } => {
                out.push(format!("{state} P1: {mv}"));
                id = child.as_deref();
            }
            CertNode::P2 { state, children, win_in, .. } => {
                let next = children.iter().find(|ch| c.nodes.get(&ch.child).map(CertNode::win_in) == Some(win_in - 1));
                match next {
                    Some(ch) => {
                        out.push(format!("{state} P2: {}", ch.rep));
                        id = Some(ch.child.as_str());
                    }
                    None => {
                        out.push(format!("{state} P2: (any move, P1 wins next)"));
                        id = None;
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use Player::*;

    fn end_entry() -> Position {
        let mut e = vec![(0, 1, P1), (0, 2, P1), (1, 2, P1), (0, 3, P1), (1, 3, P1)];
        e.extend([(4, 5, P2), (6, 7, P2), (8, 9, P2), (10, 11, P2)]);
        Position::from_edges(3, P1, &e, true).unwrap()
    }

    fn end_cert() -> Certificate {
        let p = end_entry();
        verify(&p, &StrategyState::infer(&p), VerifyOptions::new(9)).unwrap()
    }

    #[test]
    fn end_entry_wins_in_nine() {
        let c = end_cert();
        assert_eq!(c.stats.max_depth, 9);
        assert_eq!(c.stats.fallback_moves, 0);
        check_certificate(&c).unwrap();
        let r = lemma_report(&c);
        assert_eq!(r.end_entries, 1);
        assert!(r.all_ok(), "{:?}", r.violations);
        assert!(deepest_line(&c)[0].starts_with("END_POSITION/0 P1:"));
    }

    #[test]
    fn end_entry_needs_nine_plies() {
        let p = end_entry();
        let err = verify(&p, &StrategyState::infer(&p), VerifyOptions::new(8)).unwrap_err();
        assert!(matches!(err, VerifyError::Failed(_)), "{err}");
    }

    #[test]
    fn too_small_bound_fails_from_empty_board() {
        let p = Position::new_game(3).unwrap();
        let Err(VerifyError::Failed(f)) = verify(&p, &StrategyState::new(), VerifyOptions::new(4)) else {
            panic!("bound 4 cannot suffice");
        };
        assert!(f.reason.contains("ply bound"), "{f}");
        assert!(!f.path.is_empty());
    }

    #[test]
    fn json_round_trip_is_stable() {
        let c = end_cert();
        let s = c.to_json();
        let back = Certificate::from_json(&s).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), s);
    }

    #[test]
    fn deleted_class_is_rejected() {
        let mut c = end_cert();
        let (id, node) = c
            .nodes
            .iter()
            .find(|(_, n)| matches!(n, CertNode::P2 { children, .. } if !children.is_empty()))
            .map(|(k, n)| (k.clone(), n.clone()))
            .unwrap();
        let CertNode::P2 { state, mut children, immediate, win_in } = node else { unreachable!() };
        children.remove(0);
        c.nodes.insert(id.clone(), CertNode::P2 { state, children, immediate, win_in });
        let err = check_certificate(&c).unwrap_err();
        assert_eq!(err.node, id);
    }

    #[test]
    fn fake_leaf_is_rejected() {
        let mut c = end_cert();
        // turn a non-winning P1 move into a claimed leaf
        let (id, node) = c
            .nodes
            .iter()
            .find(|(_, n)| matches!(n, CertNode::P1 { child: Some(_), .. }))
            .map(|(k, n)| (k.clone(), n.clone()))
            .unwrap();
        let CertNode::P1 { state, mv, roles, .. } = node else { unreachable!() };
        c.nodes.insert(id.clone(), CertNode::P1 { state, mv, roles, child: None, win_in: 1 });
        let err = check_certificate(&c).unwrap_err();
        assert_eq!(err.node, id);
        assert!(err.reason.contains("does not complete"), "{err}");
    }

    #[test]
    fn wrong_depth_is_rejected() {
        let mut c = end_cert();
        let root = c.root.clone();
        if let Some(CertNode::P1 { win_in, .. }) = c.nodes.get_mut(&root) {
            *win_in = 7;
        }
        assert_eq!(check_certificate(&c).unwrap_err().node, root);
    }

    #[test]
    fn dot_mentions_every_node() {
        let c = end_cert();
        let dot = to_dot(&c);
        assert!(dot.starts_with("digraph"));
        assert_eq!(dot.matches("label=\"P").count(), c.nodes.len());
        assert!(dot.contains("style=dashed"));
    }

    #[test]
    fn other_targets_are_refused() {
        let p = Position::new_game(2).unwrap();
        assert_eq!(verify(&p, &StrategyState::new(), VerifyOptions::new(9)), Err(VerifyError::UnsupportedTarget(2)));
    }
}
