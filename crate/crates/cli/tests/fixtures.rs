//! Every fixture document parses, serializes, and parses back to the same
//! object and the same text.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use relcert::obstruction::{SearchConfig, Target, WitnessBundle};
use relcert::reductions::SpecDocument;
use relcert::stability::Witness;
use relcert::{ClosureStep, DecisionProblem, PairwiseSlice};

fn dir(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn files(rel: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir(rel))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no fixtures in {rel}");
    out
}

fn round_trip<T: DeserializeOwned + Serialize + PartialEq + std::fmt::Debug>(path: &Path) {
    let text = std::fs::read_to_string(path).unwrap();
    let first: T = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let once = serde_json::to_string(&first).unwrap();
    let second: T = serde_json::from_str(&once).unwrap();
    assert_eq!(first, second, "{}", path.display());
    assert_eq!(serde_json::to_string(&second).unwrap(), once, "{}", path.display());
}

#[test]
fn problems() {
    for p in files("problems") {
        round_trip::<DecisionProblem>(&p);
    }
    for name in ["base", "perturbed", "far"] {
        round_trip::<DecisionProblem>(&dir(&format!("stability/{name}.json")));
    }
    round_trip::<Witness>(&dir("stability/witness.json"));
}

#[test]
fn slices() {
    for p in files("slices") {
        round_trip::<PairwiseSlice>(&p);
    }
}

#[test]
fn traces() {
    for p in files("traces") {
        round_trip::<Vec<ClosureStep>>(&p);
    }
}

#[test]
fn specs() {
    for p in files("specs") {
        round_trip::<SpecDocument>(&p);
    }
}

#[test]
fn schemes() {
    for p in files("schemes") {
        round_trip::<Target>(&p);
    }
}

#[test]
fn bundles() {
    for p in files("bundles") {
        round_trip::<WitnessBundle>(&p);
    }
    for p in ["invalid/tampered-report.json", "invalid/tampered-translate.json"] {
        round_trip::<WitnessBundle>(&dir(p));
    }
}

#[test]
fn search_configs() {
    for p in files("search") {
        round_trip::<SearchConfig>(&p);
    }
}

#[test]
fn golden_outputs_are_json() {
    for p in files("golden") {
        round_trip::<serde_json::Value>(&p);
    }
}
