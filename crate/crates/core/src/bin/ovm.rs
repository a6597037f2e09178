use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let exec = ovm::cli::run(std::env::args_os());
    let mut stdout = std::io::stdout().lock();
    // a closed pipe is not worth a panic
    let _ = stdout.write_all(exec.rendered.as_bytes());
    ExitCode::from(exec.exit_code() as u8)
}
