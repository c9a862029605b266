#![allow(dead_code)]

use std::path::PathBuf;

use tablewright::ir::SimOutput;
use tablewright::{ModelSpec, PipelineProgram, Simulator};

pub fn data_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join(rel)
}

/// Compares `actual` with the checked-in file, rewriting it instead when
/// TABLEWRIGHT_BLESS is set.
pub fn golden(rel: &str, actual: &str) {
    let path = data_path(rel);
    if std::env::var_os("TABLEWRIGHT_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("{}: {e} (run with TABLEWRIGHT_BLESS=1 to create)", path.display()));
    assert!(expected == actual, "{} differs from generated output", path.display());
}

pub fn fixture(name: &str) -> ModelSpec {
    let text = std::fs::read_to_string(data_path(&format!("fixtures/{name}.json"))).unwrap();
    ModelSpec::from_json(&text).unwrap()
}

/// Every point of a small domain, feature 0 varying slowest.
pub fn domain(spec: &ModelSpec) -> impl Iterator<Item = Vec<u64>> + '_ {
    let size = spec.schema.domain_size().expect("small domain");
    (0..size).map(move |i| spec.schema.domain_point(i).0)
}

pub fn outputs(p: &PipelineProgram, xs: &[Vec<u64>]) -> Vec<SimOutput> {
    let sim = Simulator::new(p).unwrap();
    xs.iter().map(|x| sim.run(x).unwrap()).collect()
}
