use clap::Parser;

fn main() {
    let cli = mgwsim_cli::Cli::parse();
    std::process::exit(mgwsim_cli::run_cli(cli));
}
