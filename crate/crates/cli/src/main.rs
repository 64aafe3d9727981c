use clap::Parser;

fn main() -> std::process::ExitCode {
    hybrid_schwarz_cli::run(hybrid_schwarz_cli::Cli::parse())
}
