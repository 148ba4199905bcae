use clap::Parser;

fn main() {
    let cli = dps_qkd_cli::Cli::parse();
    if let Err(e) = dps_qkd_cli::run(cli) {
        eprintln!("dpsqkd: error: {e}");
        std::process::exit(e.exit_code());
    }
}
