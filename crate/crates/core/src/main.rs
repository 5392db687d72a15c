use clap::Parser;

use spectrum_subsidy::cli::{run, Cli, ExperimentSpec};

fn main() {
    let spec = ExperimentSpec::from(Cli::parse());
    match run(&spec) {
        Ok(summary) => eprintln!("{summary}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
