mod args;
mod error;
mod manifest;
mod run;

use clap::Parser;

use args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            std::process::exit(error::EXIT_PARSE);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .expect("global pool is configured once");
    }
    if let Err(f) = run::execute(&cli.command, cli.seed, &cli.output_dir) {
        eprintln!("error: {f}");
        std::process::exit(f.code);
    }
}
