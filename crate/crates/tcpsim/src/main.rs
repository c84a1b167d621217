use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = match tcpsim::cli::parse_args(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    ExitCode::from(tcpsim::cli::execute(&cli) as u8)
}
