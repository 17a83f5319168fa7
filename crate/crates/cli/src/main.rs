use std::process::ExitCode;

fn main() -> ExitCode {
    portkey_cli::cli::main()
}
