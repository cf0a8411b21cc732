use std::process::ExitCode;

fn main() -> ExitCode {
    incentive_fusion::cli::main_entry()
}
