//! Terminal play. Each input line is one move for the human side, written
//! `3-7`, `3-new`, `new-new` or with a player prefix (`P2: 3-new`). Every
//! move made goes to the transcript on stdout; rejected input is reported on
//! stderr and the engine does not move.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strong_ramsey::game::{GameOutcome, MoveSpec, Player, Position};
use strong_ramsey::solver::{self, SearchLimits};
use strong_ramsey::strategy::{self, StrategyState};

use crate::commands::{load_position, Error, Res};
use crate::{Opts, Side};

const ENGINE_PLIES: u32 = 16;
/// The second-player engine only looks for short forced wins.
const P2_ENGINE_PLIES: u32 = 5;

struct Engine {
    me: Player,
    state: StrategyState,
    limits: SearchLimits,
    rng: ChaCha8Rng,
}

impl Engine {
    fn reply(&mut self, p: &Position) -> Result<MoveSpec, String> {
        if self.me == Player::P1 && p.t() == 3 {
            let (m, next) = strategy::next_move(p, &self.state).map_err(|e| e.to_string())?;
            self.state = next;
            return Ok(m);
        }
        if self.me == Player::P1 {
            return solver::best_move(p, self.limits).map_err(|e| e.to_string());
        }
        self.defend(p)
    }

    /// Win now, block, take a short forced win, or play a seeded random move.
    fn defend(&mut self, p: &Position) -> Result<MoveSpec, String> {
        let me = self.me;
        if let Some(e) = p.winning_moves(me).first() {
            return Ok(MoveSpec::from_edge(*e, me));
        }
        if let Some(e) = p.threats(me.opponent()).first() {
            return Ok(MoveSpec::from_edge(*e, me));
        }
        let short = SearchLimits { max_plies: P2_ENGINE_PLIES, ..self.limits };
        if let Ok(m) = solver::best_move(p, short) {
            return Ok(m);
        }
        let n = p.vertex_count();
        let pairs = p.uncolored_pairs();
        Ok(match self.rng.gen_range(0..3) {
            0 if !pairs.is_empty() => MoveSpec::from_edge(*pairs.choose(&mut self.rng).expect("non-empty"), me),
            1 if n > 0 => MoveSpec::with_fresh(self.rng.gen_range(0..n), me),
            _ => MoveSpec::fresh_fresh(me),
        })
    }
}

fn parse_move(line: &str, mover: Player) -> Result<MoveSpec, String> {
    let m = if line.contains(':') { MoveSpec::parse(line) } else { MoveSpec::parse_ends(line, mover) };
    m.map_err(|e| e.to_string())
}

pub(crate) fn run(o: &Opts, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let mut p = match &o.position {
        Some(path) => load_position(path)?,
        None => Position::new_game(o.t.unwrap_or(3)).map_err(|e| Error::Usage(e.to_string()))?,
    };
    let human = match o.side {
        Side::P1 => Player::P1,
        Side::P2 => Player::P2,
    };
    let limits = SearchLimits::new(
        o.max_plies.unwrap_or(ENGINE_PLIES),
        o.node_budget.unwrap_or(SearchLimits::default().node_budget),
    )
    .map_err(|e| Error::Usage(e.to_string()))?;
    let mut engine = Engine {
        me: human.opponent(),
        state: StrategyState::infer(&p),
        limits,
        rng: ChaCha8Rng::seed_from_u64(o.seed),
    };
    let mut lines = input.lines();
    while !p.is_terminal() {
        if p.turn() == engine.me {
            let m = engine.reply(&p).map_err(|e| Error::Failed(format!("engine has no move: {e}")))?;
            p = p.apply(&m).map_err(|e| Error::Failed(format!("engine played {m}: {e}")))?;
            writeln!(out, "{m}")?;
            out.flush()?;
            continue;
        }
        let Some(line) = lines.next() else {
            writeln!(out, "result: unfinished")?;
            return Ok(());
        };
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line == "quit" {
            writeln!(out, "result: unfinished")?;
            return Ok(());
        }
        match parse_move(line, human).and_then(|m| p.apply(&m).map(|q| (m, q)).map_err(|e| e.to_string())) {
            Ok((m, q)) => {
                writeln!(out, "{m}")?;
                p = q;
            }
            Err(reason) => writeln!(err, "illegal move '{line}': {reason}")?,
        }
    }
    let result = match p.outcome() {
        Ok(GameOutcome::P1Win) => "P1Win",
        Ok(GameOutcome::P2Win) => "P2Win",
        _ => "unfinished",
    };
    writeln!(out, "result: {result}")?;
    Ok(())
}
