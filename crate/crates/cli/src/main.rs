use clap::Parser;

fn main() {
    let cli = g2f_cli::Cli::parse();
    std::process::exit(g2f_cli::execute(&cli));
}
