use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    match tsexam::cli::run(std::env::args_os(), &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            ExitCode::from(e.code() as u8)
        }
    }
}
