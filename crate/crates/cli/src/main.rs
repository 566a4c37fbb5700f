use clap::Parser;

fn main() {
    let cli = holonomy_lab_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    std::process::exit(holonomy_lab_cli::run(cli, &mut stdout, &mut stderr));
}
