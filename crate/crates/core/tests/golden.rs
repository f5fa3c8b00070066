//! Regression against a stored sweep. Regenerate with
//! `MSPG_BLESS=1 cargo test -p mspg-core --test golden`.

use mspg_core::harness::report::{to_csv, CSV_HEADER};
use mspg_core::harness::{run_experiment, ExperimentConfig};

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/example1_small.csv");

fn config() -> ExperimentConfig {
    ExperimentConfig::parse(
        "example = 1\nalpha = 2\ncoarse = 4\nfine = 32\ntrial = 1,2\ntest = 1,3,7\neig = 1,2\nonline = 1\ninfsup = true\n",
    )
    .unwrap()
}

fn fields(line: &str) -> Vec<&str> {
    line.split(',').collect()
}

#[test]
fn small_sweep_matches_golden_csv() {
    let csv = to_csv(&run_experiment(&config()).unwrap());
    if std::env::var_os("MSPG_BLESS").is_some() {
        std::fs::write(GOLDEN, &csv).unwrap();
    }
    let golden = std::fs::read_to_string(GOLDEN).unwrap();
    assert_eq!(csv.lines().next(), Some(CSV_HEADER));
    assert_eq!(csv.lines().count(), golden.lines().count());
    for (got, want) in csv.lines().zip(golden.lines()).skip(1) {
        let (g, w) = (fields(got), fields(want));
        assert_eq!(g.len(), w.len());
        for (a, b) in g.iter().zip(&w) {
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => assert!((x - y).abs() <= 1e-5 * y.abs().max(1e-3), "{got}\n{want}"),
                _ => assert_eq!(a, b, "{got}\n{want}"),
            }
        }
    }
}
