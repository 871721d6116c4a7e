use std::process::ExitCode;

fn main() -> ExitCode {
    rothe_hvi_cli::main_with_args(std::env::args_os())
}
