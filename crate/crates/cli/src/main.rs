use std::io;
use std::process::ExitCode;

use clap::Parser;
use strong_ramsey_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdin = io::stdin();
    let code = run(&cli, &mut stdin.lock(), &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code)
}
