use std::process::ExitCode;

fn main() -> ExitCode {
    gridresp::cli::run()
}
