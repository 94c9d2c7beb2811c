use clap::Parser;

use monotone_euler::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            if !outcome.passed {
                eprintln!("error[E_VERIFY]: verification failed");
                std::process::exit(1);
            }
        }
        Err(e) => {
            eprintln!("{}", e.line());
            std::process::exit(e.code);
        }
    }
}
