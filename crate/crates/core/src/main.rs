use std::process::ExitCode;

fn main() -> ExitCode {
    insect_vision::cli::main()
}
