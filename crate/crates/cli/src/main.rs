use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use kernel_lens_cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(v) = std::env::var("KERNEL_LENS_THREADS") {
        match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("kernel-lens: could not size the thread pool: {e}");
                }
            }
            _ => {
                eprintln!("kernel-lens: KERNEL_LENS_THREADS must be a positive integer, got `{v}`");
                return ExitCode::from(2);
            }
        }
    }
    let start = Instant::now();
    let report = match execute(&cli.command) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("kernel-lens: {e}");
            return ExitCode::from(2);
        }
    };
    let text = report.render(start.elapsed());
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("kernel-lens: writing output: {e}");
        return ExitCode::from(2);
    }
    eprintln!("{}: {} ({:.2} s)", report.command, report.verdict(), start.elapsed().as_secs_f64());
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
