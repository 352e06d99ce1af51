use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use foodrec_cli::{run, Cli, Io};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdin = std::io::stdin();
    let mut stdin = stdin.lock();
    let mut out = std::io::stdout();
    let mut err = std::io::stderr();
    let code = run(
        cli,
        &mut Io {
            stdin: &mut stdin,
            out: &mut out,
            err: &mut err,
        },
    );
    let _ = out.flush();
    ExitCode::from(code)
}
