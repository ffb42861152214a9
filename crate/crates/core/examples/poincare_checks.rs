//! Runs the default density-by-theorem matrix and prints one line per cell.

use std::time::Instant;

use isopoincare::inequality::suite::{check_density, default_densities, extra_cells, DEFAULT_HYBRID_C};
use isopoincare::inequality::{CheckConfig, Theorem};

fn main() {
    let cfg = CheckConfig::default();
    let seed = 20240601;
    let theorems: Vec<Theorem> = match std::env::args().nth(1) {
        Some(k) => vec![Theorem::from_key(&k).expect("theorem key")],
        None => Theorem::ALL.to_vec(),
    };
    for t in theorems {
        let mut cells = Vec::new();
        for d in default_densities() {
            let start = Instant::now();
            cells.push((check_density(t, &d, seed, &cfg, DEFAULT_HYBRID_C), start.elapsed()));
        }
        let start = Instant::now();
        for c in extra_cells(t, seed, &cfg) {
            cells.push((c, start.elapsed()));
        }
        for (c, dt) in cells {
            let reps = c.reports();
            let worst = reps.iter().map(|r| r.ratio).fold(0.0, f64::max);
            let fails: Vec<String> = reps
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("{} [{:.6} {}]", r.witness, r.ratio, r.note.as_deref().unwrap_or("")))
                .collect();
            match &c.outcome {
                isopoincare::inequality::suite::Outcome::Skipped { reason } => {
                    println!("{:<22} {:<28} skipped: {reason}", t.key(), c.target)
                }
                isopoincare::inequality::suite::Outcome::Error { message } => {
                    println!("{:<22} {:<28} error: {message}", t.key(), c.target)
                }
                _ => println!(
                    "{:<22} {:<28} n={:<3} max ratio {:.6}  failing {:?}  ({:.1}s)",
                    t.key(),
                    c.target,
                    reps.len(),
                    worst,
                    fails,
                    dt.as_secs_f64()
                ),
            }
        }
    }
}
