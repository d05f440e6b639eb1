use std::process::ExitCode;

use clap::Parser;

mod commands;

use commands::Cli;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for bad input, 2 for internal failures.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e
        .chain()
        .find_map(|c| c.downcast_ref::<cat_core::CatError>())
    {
        Some(ce) if ce.is_input_error() => 1,
        Some(_) => 2,
        None if e.chain().any(|c| c.is::<commands::InputError>()) => 1,
        None => 2,
    }
}
