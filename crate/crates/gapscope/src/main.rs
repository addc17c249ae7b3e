// SPDX-License-Identifier: MIT OR Apache-2.0

use clap::Parser;
use gapscope::cli::{Cli, Command};
use gapscope::commands;

fn main() {
    let cli = Cli::parse();
    let result = cli.resolve().and_then(|cfg| match &cli.command {
        Command::Datagen { .. } => commands::cmd_datagen(&cfg),
        Command::Sweep { .. } => commands::cmd_sweep(&cfg),
        Command::Das { .. } => commands::cmd_das(&cfg),
        Command::Steer { .. } => commands::cmd_steer(&cfg),
        Command::Validate { .. } => commands::cmd_validate(&cfg),
        Command::Fixture { layers, heads, d_model } => commands::cmd_fixture(&cfg, *layers, *heads, *d_model),
    });
    match result {
        Ok(m) => {
            let counts: Vec<String> = m.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!("{} done in {:.2}s: {}", m.command, m.wall_clock_seconds, counts.join(" "));
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
