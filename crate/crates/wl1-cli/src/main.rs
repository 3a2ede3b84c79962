use std::process::ExitCode;

fn main() -> ExitCode {
    match wl1_cli::run(std::env::args_os(), Box::new(std::io::stdout())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(wl1_cli::CliError::Usage(e)) => {
            let _ = e.print();
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("wl1: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
