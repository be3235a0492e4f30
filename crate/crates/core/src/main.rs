use std::process::ExitCode;

fn main() -> ExitCode {
    agriprice::cli::main_entry()
}
