use clap::Parser;

fn main() {
    let cli = weakhj_cli::Cli::parse();
    std::process::exit(weakhj_cli::run(cli));
}
