//! A small configured run written to a temporary directory.

use isopoincare::experiment::{run, ExperimentConfig};

fn main() {
    let dir = std::env::temp_dir().join("isopoincare-example");
    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
densities = ["gaussian:sigma=1,n=1", "cauchy:beta=4,n=1"]
theorems = ["poincare_1d"]
extras = false
output_dir = "{}"

[solver]
cells = 200
refine = false
"#,
        dir.display()
    ))
    .unwrap();
    let summary = run(&cfg).unwrap();
    print!("{}", summary.to_markdown());
    println!("artifacts in {}", dir.display());
}
