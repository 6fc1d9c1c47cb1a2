use std::process::ExitCode;

fn main() -> ExitCode {
    pixelrace_cli::run_from_args(std::env::args_os())
}
