use clap::Parser;

fn main() {
    let cli = tdcebs::cli::Cli::parse();
    let code = tdcebs::cli::run(cli, &mut std::io::stdout());
    std::process::exit(code);
}
