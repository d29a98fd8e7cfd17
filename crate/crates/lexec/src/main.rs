use std::process::ExitCode;

fn main() -> ExitCode {
    match lexec::cli::main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
