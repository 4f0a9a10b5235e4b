use std::process::ExitCode;

fn main() -> ExitCode {
    hosmc_cli::run_cli(std::env::args_os())
}
