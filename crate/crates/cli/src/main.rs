use clap::Parser;

fn main() {
    let code = mnc_cli::run(mnc_cli::Cli::parse());
    std::process::exit(code);
}
