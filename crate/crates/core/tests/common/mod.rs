#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use strong_ramsey::game::{Edge, MoveSpec, Player, Position, VertexId};
use strong_ramsey::symmetry::RoleMap;

/// Builds a position from raw pair choices: loops and repeated pairs are
/// dropped, untouched vertex ids are squeezed out. Colours alternate P1, P2
/// in list order, so the turn follows the alternation rule. Positions where
/// both sides have already won are rejected.
pub fn alternating(t: u32, pairs: &[(usize, usize)]) -> Option<Position> {
    let mut seen = std::collections::BTreeSet::new();
    let mut raw = Vec::new();
    for &(a, b) in pairs {
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        let color = if raw.len() % 2 == 0 { Player::P1 } else { Player::P2 };
        raw.push((a, b, color));
    }
    let turn = if raw.len() % 2 == 0 { Player::P1 } else { Player::P2 };
    compact(t, turn, &raw, false)
}

/// Same as [`alternating`] with explicit colours and a free turn.
pub fn colored(t: u32, turn: Player, edges: &[(usize, usize, bool)]) -> Option<Position> {
    let mut seen = std::collections::BTreeSet::new();
    let mut raw = Vec::new();
    for &(a, b, p2) in edges {
        if a == b || !seen.insert((a.min(b), a.max(b))) {
            continue;
        }
        raw.push((a, b, if p2 { Player::P2 } else { Player::P1 }));
    }
    compact(t, turn, &raw, true)
}

fn compact(t: u32, turn: Player, raw: &[(usize, usize, Player)], free: bool) -> Option<Position> {
    let mut ids: Vec<usize> = raw.iter().flat_map(|&(a, b, _)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let idx = |v: usize| ids.binary_search(&v).expect("listed");
    let edges: Vec<_> = raw.iter().map(|&(a, b, c)| (idx(a), idx(b), c)).collect();
    Position::from_edges(t, turn, &edges, free).ok()
}

/// Random alternating position with at most `max_n` vertices and `max_edges` edges.
pub fn random_position<R: Rng>(rng: &mut R, t: u32, max_n: usize, max_edges: usize) -> Position {
    loop {
        let n = rng.gen_range(2..=max_n);
        let k = rng.gen_range(0..=max_edges);
        let pairs: Vec<(usize, usize)> = (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n))).collect();
        if let Some(p) = alternating(t, &pairs) {
            return p;
        }
    }
}

/// Random legal move for the side to move (existing pairs, one fresh end, or two).
pub fn random_move<R: Rng>(rng: &mut R, p: &Position) -> MoveSpec {
    let me = p.turn();
    let n = p.vertex_count();
    let pairs = p.uncolored_pairs();
    match rng.gen_range(0..10) {
        0 => MoveSpec::fresh_fresh(me),
        1..=3 if n > 0 => MoveSpec::with_fresh(rng.gen_range(0..n), me),
        _ if !pairs.is_empty() => MoveSpec::from_edge(*pairs.choose(rng).expect("non-empty"), me),
        _ if n > 0 => MoveSpec::with_fresh(rng.gen_range(0..n), me),
        _ => MoveSpec::fresh_fresh(me),
    }
}

pub fn random_perm<R: Rng>(rng: &mut R, n: usize) -> Vec<VertexId> {
    let mut perm: Vec<VertexId> = (0..n).collect();
    perm.shuffle(rng);
    perm
}

/// Independent win test: tries every ordered pair of mains and every
/// `t`-subset of the remaining vertices as leaves.
pub fn brute_force_wins(p: &Position, who: Player) -> bool {
    let n = p.vertex_count();
    let t = p.t() as usize;
    let has = |u: usize, v: usize| p.color(u, v) == Some(who);
    for x in 0..n {
        for y in x + 1..n {
            if !has(x, y) {
                continue;
            }
            let others: Vec<usize> = (0..n).filter(|&z| z != x && z != y).collect();
            if subsets(&others, t).any(|leaves| leaves.iter().all(|&z| has(x, z) && has(y, z))) {
                return true;
            }
        }
    }
    false
}

/// Every `k`-subset of `items`.
pub fn subsets(items: &[usize], k: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    let n = items.len();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut done = k > n;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out: Vec<usize> = idx.iter().map(|&i| items[i]).collect();
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                done = true;
                break;
            }
            i -= 1;
            if idx[i] != i + n - k {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    })
}

/// One-move lookahead computed from scratch.
pub fn lookahead(p: &Position, who: Player) -> Vec<Edge> {
    let mut out = Vec::new();
    let n = p.vertex_count();
    for u in 0..n {
        for v in u + 1..n {
            if p.color(u, v).is_none() {
                let edges: Vec<_> = p.edges().into_iter().map(|(e, c)| (e.u, e.v, c)).chain([(u, v, who)]).collect();
                let q = Position::from_edges(p.t(), p.turn(), &edges, true);
                if q.map(|q| brute_force_wins(&q, who)).unwrap_or(true) {
                    out.push(Edge::new(u, v));
                }
            }
        }
    }
    out
}

pub fn permuted_roles(r: &RoleMap, perm: &[VertexId]) -> RoleMap {
    r.permuted(perm)
}

/// Free-turn board where one colour holds most of the edges.
pub fn skewed_position<R: Rng>(rng: &mut R, t: u32, max_n: usize) -> Option<Position> {
    let n = rng.gen_range(3..=max_n);
    let k = rng.gen_range(1..=6);
    let heavy = rng.gen_bool(0.5);
    let edges: Vec<_> =
        (0..k).map(|_| (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_bool(0.25) == heavy)).collect();
    let turn = if rng.gen_bool(0.5) { Player::P1 } else { Player::P2 };
    colored(t, turn, &edges)
}

/// P1 to move holding a K^_{2,2}, P2 with at most seven edges and no threat,
/// at most `max_n` vertices. P1 may own a couple of extra edges.
pub fn end_phase_position<R: Rng>(rng: &mut R, max_n: usize) -> Position {
    loop {
        let n = rng.gen_range(5..=max_n);
        let perm = random_perm(rng, n);
        let mut edges: Vec<(usize, usize, bool)> =
            [(0, 1), (0, 2), (1, 2), (0, 3), (1, 3)].iter().map(|&(u, v)| (perm[u], perm[v], false)).collect();
        for _ in 0..rng.gen_range(0..=2) {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n), false));
        }
        for _ in 0..rng.gen_range(0..=7) {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n), true));
        }
        let Some(p) = colored(3, Player::P1, &edges) else { continue };
        if p.is_terminal() || !p.threats(Player::P2).is_empty() || p.edge_count(Player::P2) > 7 {
            continue;
        }
        return p;
    }
}
