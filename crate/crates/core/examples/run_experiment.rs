//! Runs an experiment from a JSON document, as the `fcs` binary does.
//!
//! ```text
//! cargo run --example run_experiment
//! ```

use fcs::experiment::{parse_config, run};

fn main() {
    let config = parse_config(
        r#"{
            "experiment": "cumulants",
            "model": {"random": {"seed": 3, "dim": 5, "kind": "mixed-commuting"}},
            "variant": "les-lev",
            "k_max": 4
        }"#,
    )
    .expect("config parses");
    let dir = tempfile::tempdir().expect("temp dir");
    match run(&config, Some(dir.path())) {
        Ok(summary) => {
            for path in summary.artifacts {
                println!(
                    "{}:\n{}",
                    path.display(),
                    std::fs::read_to_string(&path).unwrap()
                );
            }
        }
        Err(e) => {
            eprintln!("{}", e.record());
            std::process::exit(e.exit_code());
        }
    }

    let bad = parse_config(
        r#"{"experiment": "chi", "model": {"random": {"seed": 1, "dim": 4, "kind": "pure"}}}"#,
    );
    if let Err(e) = bad {
        println!("rejected (exit {}): {}", e.exit_code(), e.record());
    }
}
