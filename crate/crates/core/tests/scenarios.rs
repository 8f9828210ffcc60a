use std::path::PathBuf;

use tljunction::battery::select_criteria;
use tljunction::scenario::{Model, Scenario};

fn bundled() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn bundled_scenarios_parse_and_round_trip() {
    let files = bundled();
    assert!(files.len() >= 4);
    for p in files {
        let s = Scenario::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again.file, s.file, "{}", p.display());
        assert_eq!(again.initial, s.initial, "{}", p.display());
    }
}

#[test]
fn first_example_matches_the_homogenization_setting() {
    let p = bundled()
        .into_iter()
        .find(|p| p.ends_with("example1_never_limited.toml"))
        .unwrap();
    let s = Scenario::load(&p).unwrap();
    assert_eq!(s.model(), Model::Meso);
    assert_eq!(s.signal.mean(), 1.0);
    assert_eq!(s.grid.dx, 1.0 / 400.0);
    assert_eq!(s.file.run.horizon, 2.0);
    assert!(s.initial.cells[0].iter().all(|&r| r == 0.75));
}

#[test]
fn missing_grid_falls_back_to_defaults() {
    let p = bundled()
        .into_iter()
        .find(|p| p.ends_with("unequal_exits.toml"))
        .unwrap();
    let text = std::fs::read_to_string(p).unwrap();
    let start = text.find("[grid]").unwrap();
    let end = text.find("[run]").unwrap();
    let stripped = format!("{}{}", &text[..start], &text[end..]);
    let s = Scenario::from_toml(&stripped).unwrap();
    assert_eq!(s.grid.dx, 0.01);
    assert!(s.file.grid.is_none());
}

#[test]
fn filters_select_by_group_or_name_prefix() {
    let names = |f: Option<&str>| select_criteria(f).iter().map(|c| c.name).collect::<Vec<_>>();
    assert_eq!(names(Some("germ")), ["germ-property", "germ-generation"]);
    assert_eq!(names(Some("corrector")).len(), 2);
    assert_eq!(names(Some("macro-rule")), ["macro-rule-germ"]);
    assert_eq!(names(None).len(), 10);
    assert!(names(Some("nothing")).is_empty());
}
