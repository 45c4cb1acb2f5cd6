use std::fs;
use std::io::{BufRead, Write};
use std::path::Path;
use std::time::Instant;

use strong_ramsey::game::{Position, PositionFile};
use strong_ramsey::par;
use strong_ramsey::solver::{self, Outcome, SearchLimits};
use strong_ramsey::strategy::{StrategyState, DEFAULT_PLY_BOUND};
use strong_ramsey::verifier::{self, Certificate, CriticalReport, LemmaReport, VerifyError, VerifyOptions};

use crate::exit::{FAILED, OK, USAGE};
use crate::{play, Cli, Command, Opts};

const SOLVE_PLIES: u32 = 16;

/// What went wrong, and which exit code it maps to.
pub(crate) enum Error {
    Usage(String),
    Failed(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Usage(e.to_string())
    }
}

pub(crate) type Res = Result<(), Error>;

/// Runs one command. Results go to `out`; timings and diagnostics go to
/// `err` so that `out` is reproducible across runs and thread counts.
pub fn run(cli: &Cli, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let o = &cli.opts;
    let res = match &cli.command {
        Command::VerifyTheorem => verify_theorem(o, out, err),
        Command::Verify => verify_position(o, out, err),
        Command::Solve => solve(o, out),
        Command::Play => play::run(o, input, out, err),
        Command::Serve => crate::api::serve(o, out),
        Command::ExportDot { cert } => export_dot(cert, o, out),
        Command::CheckCert { cert } => check_cert(cert, out),
    };
    match res {
        Ok(()) => OK,
        Err(Error::Failed(msg)) => {
            let _ = writeln!(err, "{msg}");
            FAILED
        }
        Err(Error::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            USAGE
        }
    }
}

/// Runs the search-heavy part of a command on a pool of `--threads` workers.
fn with_pool<R: Send>(o: &Opts, f: impl FnOnce() -> R + Send) -> R {
    par::with_threads(o.threads, f)
}

pub(crate) fn load_position(path: &Path) -> Result<Position, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    let file: PositionFile =
        serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    file.into_position().map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

fn write_out(o: &Opts, what: &str, text: &str, out: &mut dyn Write) -> Res {
    if let Some(path) = &o.out {
        fs::write(path, text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
        writeln!(out, "{what} written to {}", path.display())?;
    }
    Ok(())
}

fn verify_error(e: VerifyError) -> Error {
    match e {
        VerifyError::Failed(_) => Error::Failed(e.to_string()),
        other => Error::Usage(other.to_string()),
    }
}

fn verify_theorem(o: &Opts, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let t = o.t.unwrap_or(3);
    if t != 3 {
        return Err(Error::Usage(format!("the scripted strategy covers t = 3 only (got --t {t})")));
    }
    let bound = o.max_plies.unwrap_or(DEFAULT_PLY_BOUND);
    let start = Instant::now();
    let root = Position::new_game(t).map_err(|e| Error::Usage(e.to_string()))?;
    let mut s = StrategyState::new();
    if let Some(b) = o.node_budget {
        s.fallback_budget = b;
    }
    let opts = VerifyOptions { bound, fallback_budget: s.fallback_budget };
    let cert = with_pool(o, || verifier::verify(&root, &s, opts)).map_err(verify_error)?;
    writeln!(err, "verified in {:.1}s", start.elapsed().as_secs_f64())?;
    report(&cert, out)?;
    write_out(o, "certificate", &cert.to_json(), out)
}

fn verify_position(o: &Opts, out: &mut dyn Write, err: &mut dyn Write) -> Res {
    let path = o.position.as_ref().ok_or_else(|| Error::Usage("verify needs --position".into()))?;
    let p = load_position(path)?;
    let mut s = StrategyState::infer(&p);
    if let Some(b) = o.node_budget {
        s.fallback_budget = b;
    }
    let bound = o.max_plies.unwrap_or_else(|| DEFAULT_PLY_BOUND.saturating_sub(p.total_edges() as u32).max(1));
    writeln!(out, "starting phase {}", s.tag())?;
    let start = Instant::now();
    let opts = VerifyOptions { bound, fallback_budget: s.fallback_budget };
    let cert = with_pool(o, || verifier::verify(&p, &s, opts)).map_err(verify_error)?;
    writeln!(err, "verified in {:.1}s", start.elapsed().as_secs_f64())?;
    report(&cert, out)?;
    write_out(o, "certificate", &cert.to_json(), out)
}

fn report(cert: &Certificate, out: &mut dyn Write) -> Res {
    let st = &cert.stats;
    writeln!(out, "verified: every line wins for P1 within {} plies", cert.bound)?;
    writeln!(
        out,
        "nodes {} (P1 {}, P2 {}), immediate wins {}, max depth {}, fallback moves {}",
        st.nodes, st.p1_nodes, st.p2_nodes, st.immediate_wins, st.max_depth, st.fallback_moves
    )?;
    match verifier::check_certificate(cert) {
        Ok(()) => writeln!(out, "certificate check: accepted")?,
        Err(e) => return Err(Error::Failed(format!("certificate check: {e}"))),
    }
    if let Some(rep) = &st.critical {
        critical(rep, out)?;
    }
    lemmas(&verifier::lemma_report(cert), out)
}

fn critical(rep: &CriticalReport, out: &mut dyn Write) -> Res {
    writeln!(out, "opening classes after the second player's third edge:")?;
    for row in &rep.rows {
        writeln!(
            out,
            "  {:<10} orbit {:<2} {:<11} relabel {}",
            row.third_move,
            row.orbit,
            row.class.label(),
            row.relabel
        )?;
    }
    writeln!(
        out,
        "generic {}, critical {}, unresolved {}; critical up to symmetry {} (expected {}){}",
        rep.generic,
        rep.critical,
        rep.unresolved,
        rep.critical_up_to_symmetry,
        rep.expected,
        if rep.matches_expectation { "" } else { " MISMATCH" }
    )?;
    Ok(())
}

fn lemmas(rep: &LemmaReport, out: &mut dyn Write) -> Res {
    writeln!(
        out,
        "end phase entries {}/{} ok, slowest {} plies; triangle-with-pendant entries {}/{} ok",
        rep.end_entries_ok, rep.end_entries, rep.end_max_win_in, rep.triangle_entries_ok, rep.triangle_entries
    )?;
    for v in &rep.violations {
        writeln!(out, "  violation: {v}")?;
    }
    if rep.all_ok() {
        Ok(())
    } else {
        Err(Error::Failed(format!("{} hypothesis violations", rep.violations.len())))
    }
}

fn solve(o: &Opts, out: &mut dyn Write) -> Res {
    let p = match &o.position {
        Some(path) => load_position(path)?,
        None => Position::new_game(o.t.unwrap_or(3)).map_err(|e| Error::Usage(e.to_string()))?,
    };
    let limits = SearchLimits::new(
        o.max_plies.unwrap_or(SOLVE_PLIES),
        o.node_budget.unwrap_or(SearchLimits::default().node_budget),
    )
    .map_err(|e| Error::Usage(e.to_string()))?;
    let outcome = with_pool(o, || solver::solve(&p, limits)).map_err(|e| Error::Usage(e.to_string()))?;
    writeln!(out, "{outcome:?}")?;
    if let Outcome::MoverWin(_) = outcome {
        let m = solver::best_move(&p, limits).map_err(|e| Error::Failed(e.to_string()))?;
        writeln!(out, "best move {m}")?;
    }
    Ok(())
}

fn load_cert(path: &Path) -> Result<Certificate, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))?;
    Certificate::from_json(&text).map_err(|e| Error::Failed(format!("rejected: malformed certificate: {e}")))
}

fn export_dot(path: &Path, o: &Opts, out: &mut dyn Write) -> Res {
    let cert = load_cert(path)?;
    let dot = verifier::to_dot(&cert);
    match &o.out {
        Some(_) => write_out(o, "graph", &dot, out),
        None => Ok(out.write_all(dot.as_bytes())?),
    }
}

fn check_cert(path: &Path, out: &mut dyn Write) -> Res {
    let cert = load_cert(path)?;
    match verifier::check_certificate(&cert) {
        Ok(()) => {
            writeln!(out, "accepted: {} nodes, max depth {}", cert.nodes.len(), cert.stats.max_depth)?;
            Ok(())
        }
        Err(e) => Err(Error::Failed(format!("rejected at {}: {}", e.node, e.reason))),
    }
}
