use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gridsindy_cli::execute(std::env::args_os()))
}
