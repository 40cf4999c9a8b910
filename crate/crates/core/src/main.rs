use std::process::ExitCode;

fn main() -> ExitCode {
    fdqn::cli::main_with_args(std::env::args_os())
}
