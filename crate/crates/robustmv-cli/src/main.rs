use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(robustmv_cli::run_command(std::env::args_os()) as u8)
}
