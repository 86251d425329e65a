use clap::Parser;
use nhqc::cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let code = match execute(cli, &mut std::io::stdout()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    };
    std::process::exit(code);
}
