use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use pinertia_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let code = match run(cli, &mut out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pinertia: {e}");
            e.exit_code()
        }
    };
    let _ = out.flush();
    ExitCode::from(code as u8)
}
