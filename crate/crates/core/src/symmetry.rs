//! Exact canonical forms of role-annotated, two-coloured positions.
//!
//! Canonical labeling is individualization-refinement: vertices start in
//! cells ordered by (role, violet degree, blue degree), cells are refined to
//! an equitable partition, and the search individualizes vertices of the
//! first non-trivial cell until the partition is discrete. The labeling whose
//! pair-colour sequence is lexicographically smallest wins. Subtrees are
//! pruned only through genuine automorphisms (twin transpositions and
//! automorphisms discovered at equal leaves), so the result is exact.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{Edge, Endpoint, GameError, MoveSpec, Player, Position, VertexId};

pub const DEFAULT_VERTEX_BOUND: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    A,
    B,
    C,
    D,
    X,
    Y,
    Z1,
    Z2,
    Z3,
    Main1,
    Main2,
}

impl Role {
    pub const ALL: [Role; 11] =
        [Role::A, Role::B, Role::C, Role::D, Role::X, Role::Y, Role::Z1, Role::Z2, Role::Z3, Role::Main1, Role::Main2];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Role> {
        Role::ALL.get(c as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::A => "a",
            Role::B => "b",
            Role::C => "c",
            Role::D => "d",
            Role::X => "x",
            Role::Y => "y",
            Role::Z1 => "z1",
            Role::Z2 => "z2",
            Role::Z3 => "z3",
            Role::Main1 => "main1",
            Role::Main2 => "main2",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

const NO_ROLE: u8 = 0xff;

/// Injective partial map from vertices to role tags.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RoleMap {
    slots: [Option<VertexId>; 11],
}

impl RoleMap {
    pub fn new() -> RoleMap {
        RoleMap::default()
    }

    pub fn get(&self, role: Role) -> Option<VertexId> {
        self.slots[role as usize]
    }

    pub fn role_of(&self, v: VertexId) -> Option<Role> {
        Role::ALL.iter().copied().find(|r| self.slots[*r as usize] == Some(v))
    }

    /// Tags `v` with `role`, replacing any earlier holder of the role.
    pub fn assign(&mut self, role: Role, v: VertexId) -> Result<(), SymmetryError> {
        if let Some(other) = self.role_of(v) {
            if other != role {
                return Err(SymmetryError::InvalidRoles(format!("vertex {v} already carries role {other}")));
            }
        }
        self.slots[role as usize] = Some(v);
        Ok(())
    }

    pub fn with(mut self, role: Role, v: VertexId) -> Result<RoleMap, SymmetryError> {
        self.assign(role, v)?;
        Ok(self)
    }

    pub fn remove(&mut self, role: Role) -> Option<VertexId> {
        self.slots[role as usize].take()
    }

    pub fn swap(&mut self, a: Role, b: Role) {
        self.slots.swap(a as usize, b as usize);
    }

    pub fn is_empty(&self) -> bool {
        self.slots.iter().all(Option::is_none)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Role, VertexId)> + '_ {
        Role::ALL.iter().filter_map(move |r| self.slots[*r as usize].map(|v| (*r, v)))
    }

    /// Moves every tag along `perm` (old vertex `v` becomes `perm[v]`).
    pub fn permuted(&self, perm: &[VertexId]) -> RoleMap {
        let mut out = RoleMap::new();
        for (r, v) in self.iter() {
            out.slots[r as usize] = Some(perm[v]);
        }
        out
    }

    pub fn validate(&self, p: &Position) -> Result<(), SymmetryError> {
        let mut seen = 0u64;
        for (r, v) in self.iter() {
            if v >= p.vertex_count() {
                return Err(SymmetryError::InvalidRoles(format!("role {r} names vertex {v}, which does not exist")));
            }
            if seen & (1 << v) != 0 {
                return Err(SymmetryError::InvalidRoles(format!("vertex {v} carries two roles")));
            }
            seen |= 1 << v;
        }
        Ok(())
    }

    fn codes(&self, n: usize) -> Vec<u8> {
        let mut out = vec![NO_ROLE; n];
        for (r, v) in self.iter() {
            out[v] = r.code();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SymmetryError {
    #[error("position has {n} vertices, above the canonicalization bound {bound}")]
    TooLarge { n: usize, bound: usize },
    #[error("position is terminal")]
    Terminal,
    #[error("invalid role map: {0}")]
    InvalidRoles(String),
    #[error("malformed canonical key: {0}")]
    Decode(String),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Label-independent fingerprint of (position, side to move, t, role tags).
/// Layout: `[t, turn, n]`, then one role byte per vertex (`0xff` for none),
/// then the pair colours (`0` none, `1` P1, `2` P2) of `(i, j)`, `i < j`, in
/// row-major order, packed four to a byte.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<CanonicalKey, SymmetryError> {
        hex::decode(s).map(CanonicalKey).map_err(|e| SymmetryError::Decode(e.to_string()))
    }

    fn encode(p: &Position, roles: &[u8]) -> CanonicalKey {
        let n = p.vertex_count();
        let mut bytes = Vec::with_capacity(3 + n + (n * n / 8) + 1);
        bytes.push(p.t() as u8);
        bytes.push(p.turn().index() as u8);
        bytes.push(n as u8);
        bytes.extend_from_slice(roles);
        let mut acc = 0u8;
        let mut fill = 0;
        for i in 0..n {
            for j in i + 1..n {
                let c = match p.color(i, j) {
                    None => 0,
                    Some(Player::P1) => 1,
                    Some(Player::P2) => 2,
                };
                acc |= c << (2 * fill);
                fill += 1;
                if fill == 4 {
                    bytes.push(acc);
                    acc = 0;
                    fill = 0;
                }
            }
        }
        if fill > 0 {
            bytes.push(acc);
        }
        CanonicalKey(bytes)
    }

    /// Rebuilds the canonical representative this key encodes.
    pub fn decode(&self) -> Result<(Position, RoleMap), SymmetryError> {
        let b = &self.0;
        let bad = |m: &str| SymmetryError::Decode(m.to_string());
        if b.len() < 3 {
            return Err(bad("too short"));
        }
        let t = b[0] as u32;
        let turn = match b[1] {
            0 => Player::P1,
            1 => Player::P2,
            _ => return Err(bad("bad turn byte")),
        };
        let n = b[2] as usize;
        let pairs = n * n.saturating_sub(1) / 2;
        if b.len() != 3 + n + pairs.div_ceil(4) {
            return Err(bad("length does not match vertex count"));
        }
        let mut roles = RoleMap::new();
        for v in 0..n {
            let code = b[3 + v];
            if code != NO_ROLE {
                let r = Role::from_code(code).ok_or_else(|| bad("unknown role code"))?;
                if roles.get(r).is_some() {
                    return Err(bad("role used twice"));
                }
                roles.slots[r as usize] = Some(v);
            }
        }
        let mut edges = Vec::new();
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                let byte = b[3 + n + k / 4];
                match (byte >> (2 * (k % 4))) & 3 {
                    0 => {}
                    1 => edges.push((i, j, Player::P1)),
                    2 => edges.push((i, j, Player::P2)),
                    _ => return Err(bad("bad colour code")),
                }
                k += 1;
            }
        }
        let p = Position::from_edges(t, turn, &edges, true)?;
        if p.vertex_count() != n {
            return Err(bad("isolated vertex"));
        }
        Ok((p, roles))
    }
}

impl fmt::Debug for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CanonicalKey({})", self.to_hex())
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// Result of canonical labeling.
#[derive(Clone, Debug)]
pub struct Canon {
    pub key: CanonicalKey,
    /// `labeling[v]` is the canonical index of vertex `v`.
    pub labeling: Vec<VertexId>,
    /// Automorphisms met during the search (twin transpositions included).
    /// They generate a subgroup of the automorphism group.
    pub generators: Vec<Vec<VertexId>>,
}

impl Canon {
    pub fn inverse(&self) -> Vec<VertexId> {
        let mut inv = vec![0; self.labeling.len()];
        for (v, &l) in self.labeling.iter().enumerate() {
            inv[l] = v;
        }
        inv
    }
}

struct Graph<'a> {
    n: usize,
    adj: &'a [[u64; 2]],
    roles: Vec<u8>,
}

impl Graph<'_> {
    fn color_code(&self, u: usize, v: usize) -> u8 {
        if self.adj[u][0] >> v & 1 == 1 {
            1
        } else if self.adj[u][1] >> v & 1 == 1 {
            2
        } else {
            0
        }
    }

    fn twins(&self, u: usize, v: usize) -> bool {
        let keep = !((1u64 << u) | (1u64 << v));
        self.roles[u] == self.roles[v]
            && (self.adj[u][0] ^ self.adj[v][0]) & keep == 0
            && (self.adj[u][1] ^ self.adj[v][1]) & keep == 0
    }

    fn initial_cells(&self) -> Vec<Vec<usize>> {
        let inv = |v: usize| (self.roles[v], self.adj[v][0].count_ones(), self.adj[v][1].count_ones());
        let mut vs: Vec<usize> = (0..self.n).collect();
        vs.sort_by_key(|&v| inv(v));
        let mut cells: Vec<Vec<usize>> = Vec::new();
        for v in vs {
            match cells.last_mut() {
                Some(cell) if inv(cell[0]) == inv(v) => cell.push(v),
                _ => cells.push(vec![v]),
            }
        }
        cells
    }

    /// Refines to the coarsest equitable partition finer than `cells`.
    fn refine(&self, cells: &mut Vec<Vec<usize>>) {
        loop {
            if cells.len() == self.n {
                return;
            }
            let masks: Vec<u64> = cells.iter().map(|c| c.iter().fold(0u64, |m, &v| m | 1 << v)).collect();
            let sig_cmp = |a: usize, b: usize| {
                for &m in &masks {
                    let ka = ((self.adj[a][0] & m).count_ones(), (self.adj[a][1] & m).count_ones());
                    let kb = ((self.adj[b][0] & m).count_ones(), (self.adj[b][1] & m).count_ones());
                    match ka.cmp(&kb) {
                        std::cmp::Ordering::Equal => {}
                        o => return o,
                    }
                }
                std::cmp::Ordering::Equal
            };
            let mut out: Vec<Vec<usize>> = Vec::with_capacity(cells.len() + 4);
            let mut split = false;
            for cell in cells.iter() {
                if cell.len() == 1 {
                    out.push(cell.clone());
                    continue;
                }
                let mut sorted = cell.clone();
                sorted.sort_by(|&a, &b| sig_cmp(a, b));
                let start = out.len();
                out.push(vec![sorted[0]]);
                for w in sorted.windows(2) {
                    if sig_cmp(w[0], w[1]) == std::cmp::Ordering::Equal {
                        out.last_mut().expect("cell").push(w[1]);
                    } else {
                        out.push(vec![w[1]]);
                    }
                }
                if out.len() - start > 1 {
                    split = true;
                }
            }
            *cells = out;
            if !split {
                return;
            }
        }
    }

    fn encode_leaf(&self, cells: &[Vec<usize>]) -> Vec<u8> {
        let inv: Vec<usize> = cells.iter().map(|c| c[0]).collect();
        let mut out = Vec::with_capacity(self.n * self.n / 2);
        for i in 0..self.n {
            for j in i + 1..self.n {
                out.push(self.color_code(inv[i], inv[j]));
            }
        }
        out
    }
}

fn is_automorphism(g: &Graph<'_>, perm: &[usize]) -> bool {
    (0..g.n).all(|u| {
        g.roles[u] == g.roles[perm[u]]
            && (0..g.n).all(|v| u == v || g.color_code(u, v) == g.color_code(perm[u], perm[v]))
    })
}

struct Leaf {
    encoding: Vec<u8>,
    labeling: Vec<usize>,
    path: Vec<usize>,
}

struct Search<'a> {
    g: &'a Graph<'a>,
    prune: bool,
    first: Option<Leaf>,
    best: Option<Leaf>,
    autos: Vec<Vec<usize>>,
    /// Second pass of `automorphisms`: collect every leaf equal to this.
    collect: Option<(Vec<u8>, Vec<usize>)>,
    collected: Vec<Vec<usize>>,
    leaves: u64,
    leaf_cap: u64,
}

impl Search<'_> {
    fn run(&mut self, cells: Vec<Vec<usize>>, path: &mut Vec<usize>) -> Option<usize> {
        if cells.len() == self.g.n {
            return self.leaf(&cells, path);
        }
        let level = path.len();
        let target = cells.iter().position(|c| c.len() > 1).expect("non-discrete partition");
        let mut candidates = cells[target].clone();
        candidates.sort_unstable();
        let mut explored: Vec<usize> = Vec::new();
        for v in candidates {
            if self.leaves >= self.leaf_cap {
                return None;
            }
            if self.prune {
                if explored.iter().any(|&u| self.g.twins(u, v)) {
                    continue;
                }
                if !explored.is_empty() && self.same_orbit_fixing(path, &explored, v) {
                    continue;
                }
            }
            explored.push(v);
            let mut next = Vec::with_capacity(cells.len() + 1);
            for (i, c) in cells.iter().enumerate() {
                if i == target {
                    next.push(vec![v]);
                    next.push(c.iter().copied().filter(|&w| w != v).collect());
                } else {
                    next.push(c.clone());
                }
            }
            self.g.refine(&mut next);
            path.push(v);
            let jump = self.run(next, path);
            path.pop();
            match jump {
                Some(l) if l < level => return Some(l),
                _ => {}
            }
        }
        None
    }

    fn same_orbit_fixing(&self, path: &[usize], explored: &[usize], v: usize) -> bool {
        let gens: Vec<&Vec<usize>> = self.autos.iter().filter(|a| path.iter().all(|&p| a[p] == p)).collect();
        if gens.is_empty() {
            return false;
        }
        let mut uf = UnionFind::new(self.g.n);
        for a in gens {
            for (x, &y) in a.iter().enumerate() {
                uf.union(x, y);
            }
        }
        explored.iter().any(|&u| uf.find(u) == uf.find(v))
    }

    fn leaf(&mut self, cells: &[Vec<usize>], path: &[usize]) -> Option<usize> {
        self.leaves += 1;
        let encoding = self.g.encode_leaf(cells);
        let mut labeling = vec![0; self.g.n];
        for (i, c) in cells.iter().enumerate() {
            labeling[c[0]] = i;
        }
        if let Some((target, base)) = &self.collect {
            if *target == encoding {
                let mut inv = vec![0; self.g.n];
                for (v, &l) in base.iter().enumerate() {
                    inv[l] = v;
                }
                self.collected.push(labeling.iter().map(|&l| inv[l]).collect());
            }
            return None;
        }
        let leaf = Leaf { encoding, labeling, path: path.to_vec() };
        let Some(first) = &self.first else {
            self.first = Some(Leaf {
                encoding: leaf.encoding.clone(),
                labeling: leaf.labeling.clone(),
                path: leaf.path.clone(),
            });
            self.best = Some(leaf);
            return None;
        };
        if first.encoding == leaf.encoding {
            let auto = compose_inverse(&first.labeling, &leaf.labeling);
            debug_assert!(is_automorphism(self.g, &auto));
            self.autos.push(auto);
            let diverge = first.path.iter().zip(&leaf.path).take_while(|(a, b)| a == b).count();
            return Some(diverge);
        }
        let best = self.best.as_ref().expect("best set with first");
        match leaf.encoding.cmp(&best.encoding) {
            std::cmp::Ordering::Less => self.best = Some(leaf),
            std::cmp::Ordering::Equal => {
                let auto = compose_inverse(&best.labeling, &leaf.labeling);
                debug_assert!(is_automorphism(self.g, &auto));
                self.autos.push(auto);
            }
            std::cmp::Ordering::Greater => {}
        }
        None
    }
}

/// `base^{-1} ∘ other`: maps `v` to the vertex `base` sends where `other` sends `v`.
fn compose_inverse(base: &[usize], other: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; base.len()];
    for (v, &l) in base.iter().enumerate() {
        inv[l] = v;
    }
    other.iter().map(|&l| inv[l]).collect()
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn check_bound(p: &Position, bound: usize) -> Result<(), SymmetryError> {
    if p.vertex_count() > bound {
        return Err(SymmetryError::TooLarge { n: p.vertex_count(), bound });
    }
    Ok(())
}

pub fn canonicalize(p: &Position, roles: &RoleMap) -> Result<Canon, SymmetryError> {
    canonicalize_with_bound(p, roles, DEFAULT_VERTEX_BOUND)
}

pub fn canonicalize_with_bound(p: &Position, roles: &RoleMap, bound: usize) -> Result<Canon, SymmetryError> {
    check_bound(p, bound)?;
    roles.validate(p)?;
    let n = p.vertex_count();
    let g = Graph { n, adj: p.raw_adj(), roles: roles.codes(n) };
    let mut cells = g.initial_cells();
    g.refine(&mut cells);
    let mut search = Search {
        g: &g,
        prune: true,
        first: None,
        best: None,
        autos: Vec::new(),
        collect: None,
        collected: Vec::new(),
        leaves: 0,
        leaf_cap: u64::MAX,
    };
    if n == 0 {
        return Ok(Canon { key: CanonicalKey::encode(p, &[]), labeling: Vec::new(), generators: Vec::new() });
    }
    search.run(cells, &mut Vec::new());
    let best = search.best.expect("search reaches a leaf");
    let q = p.permuted(&best.labeling);
    let key = CanonicalKey::encode(&q, &roles.permuted(&best.labeling).codes(n));
    let mut generators = search.autos;
    for u in 0..n {
        for v in u + 1..n {
            if g.twins(u, v) {
                let mut t: Vec<usize> = (0..n).collect();
                t.swap(u, v);
                generators.push(t);
            }
        }
    }
    Ok(Canon { key, labeling: best.labeling, generators })
}

pub fn canonical_key(p: &Position, roles: &RoleMap) -> Result<CanonicalKey, SymmetryError> {
    Ok(canonicalize(p, roles)?.key)
}

/// The canonical representative of `(p, roles)` with its key.
pub fn canonical_form(p: &Position, roles: &RoleMap) -> Result<(Position, RoleMap, Canon), SymmetryError> {
    let canon = canonicalize(p, roles)?;
    let q = p.permuted(&canon.labeling);
    let r = roles.permuted(&canon.labeling);
    Ok((q, r, canon))
}

/// Every colour- and role-preserving vertex permutation, identity first.
/// The search is exhaustive, so keep `n` small.
pub fn automorphisms(p: &Position, roles: &RoleMap) -> Result<Vec<Vec<VertexId>>, SymmetryError> {
    let canon = canonicalize(p, roles)?;
    let n = p.vertex_count();
    if n == 0 {
        return Ok(vec![Vec::new()]);
    }
    let g = Graph { n, adj: p.raw_adj(), roles: roles.codes(n) };
    let best_encoding = {
        let inv = canon.inverse();
        let cells: Vec<Vec<usize>> = inv.iter().map(|&v| vec![v]).collect();
        g.encode_leaf(&cells)
    };
    let mut cells = g.initial_cells();
    g.refine(&mut cells);
    let mut search = Search {
        g: &g,
        prune: false,
        first: None,
        best: None,
        autos: Vec::new(),
        collect: Some((best_encoding, canon.labeling.clone())),
        collected: Vec::new(),
        leaves: 0,
        leaf_cap: 5_000_000,
    };
    search.run(cells, &mut Vec::new());
    let mut group = search.collected;
    group.sort();
    group.dedup();
    debug_assert!(group.iter().all(|a| is_automorphism(&g, a)));
    let identity: Vec<usize> = (0..n).collect();
    if let Some(i) = group.iter().position(|a| *a == identity) {
        group.swap(0, i);
        group[1..].sort();
    }
    Ok(group)
}

/// A class of legal moves with isomorphic successor positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MoveClass {
    pub rep: MoveSpec,
    pub orbit_size: usize,
    /// Canonical key of the successor, roles carried over unchanged.
    pub successor: CanonicalKey,
}

/// Maps a move through a vertex labeling (fresh endpoints stay fresh).
pub fn relabel_move(m: &MoveSpec, perm: &[VertexId]) -> MoveSpec {
    let map = |e: Endpoint| match e {
        Endpoint::Existing(v) => Endpoint::Existing(perm[v]),
        Endpoint::Fresh => Endpoint::Fresh,
    };
    MoveSpec::new(map(m.ends[0]), map(m.ends[1]), m.mover)
}

/// One representative per class of legal moves for the side to move, where
/// two moves share a class when their successors are isomorphic as
/// role-annotated positions. All fresh vertices are equivalent, so there is
/// always exactly one fresh-fresh class. Representatives are the smallest
/// members after canonical relabeling; classes come sorted the same way.
pub fn reduced_moves(p: &Position, roles: &RoleMap) -> Result<Vec<MoveClass>, SymmetryError> {
    if p.is_terminal() {
        return Err(SymmetryError::Terminal);
    }
    let canon = canonicalize(p, roles)?;
    let n = p.vertex_count();
    let mover = p.turn();

    let mut vuf = UnionFind::new(n);
    let mut puf = UnionFind::new(n * n);
    for g in &canon.generators {
        for (v, &w) in g.iter().enumerate() {
            vuf.union(v, w);
        }
    }
    let pairs = p.uncolored_pairs();
    for g in &canon.generators {
        for e in &pairs {
            let img = Edge::new(g[e.u], g[e.v]);
            puf.union(e.u * n + e.v, img.u * n + img.v);
        }
    }

    // orbit members grouped by union-find root
    let mut orbits: BTreeMap<(u8, usize), Vec<MoveSpec>> = BTreeMap::new();
    for e in &pairs {
        let root = puf.find(e.u * n + e.v);
        orbits.entry((0, root)).or_default().push(MoveSpec::from_edge(*e, mover));
    }
    for v in 0..n {
        let root = vuf.find(v);
        orbits.entry((1, root)).or_default().push(MoveSpec::with_fresh(v, mover));
    }
    orbits.entry((2, 0)).or_default().push(MoveSpec::fresh_fresh(mover));

    let order_key = |m: &MoveSpec| relabel_move(m, &canon.labeling);
    let mut classes: BTreeMap<CanonicalKey, (MoveSpec, MoveSpec, usize)> = BTreeMap::new();
    for members in orbits.into_values() {
        let rep = *members.iter().min_by_key(|m| order_key(m)).expect("non-empty orbit");
        let e = rep.resolve(n).expect("legal move");
        let succ = p.apply_edge_unchecked(e, mover, rep.fresh_count());
        let key = canonical_key(&succ, roles)?;
        let ok = order_key(&rep);
        let entry = classes.entry(key).or_insert((rep, ok, 0));
        if ok < entry.1 {
            entry.0 = rep;
            entry.1 = ok;
        }
        entry.2 += members.len();
    }
    let mut out: Vec<(MoveSpec, MoveClass)> = classes
        .into_iter()
        .map(|(successor, (rep, ok, orbit_size))| (ok, MoveClass { rep, orbit_size, successor }))
        .collect();
    out.sort_by_key(|a| a.0);
    Ok(out.into_iter().map(|(_, c)| c).collect())
}

/// Number of legal move types: uncoloured pairs, one existing-fresh type per
/// vertex, and the single fresh-fresh type.
pub fn move_type_count(p: &Position) -> usize {
    p.uncolored_pairs().len() + p.vertex_count() + 1
}
