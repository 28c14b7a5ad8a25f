//! Benchmark fixtures: loads the repo scenarios for the criterion benches.

use std::path::PathBuf;

use modcoord_core::harness::Scenario;

pub fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Scenario::from_file(path).expect("load benchmark scenario")
}
