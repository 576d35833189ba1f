use clap::Parser;

fn main() {
    let cli = nanol_cli::Cli::parse();
    match nanol_cli::run(cli) {
        Ok(out) => println!("{out}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
