use std::process::ExitCode;

fn main() -> ExitCode {
    ccequil::cli::main_with_args(std::env::args_os())
}
