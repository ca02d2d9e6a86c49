use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(secure_onoff_cli::run(std::env::args_os()))
}
