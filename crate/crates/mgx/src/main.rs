use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mgx::cli::run(std::env::args_os()) as u8)
}
