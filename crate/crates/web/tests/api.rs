use serde_json::{json, Value};

use hrepair_web::{fixtures, repair_fixture, solution_classes};

fn parse(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn lists_every_fixture() {
    let v = parse(fixtures());
    let names: Vec<_> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        names,
        [
            "incomparable",
            "satellite",
            "rovers",
            "openstacks",
            "travel"
        ]
    );
    assert_eq!(v[0]["methods"], json!(["m1", "m2", "m3"]));
}

#[test]
fn incomparable_restricted_to_m1_m2() {
    let v = parse(repair_fixture("incomparable", "anomaly", "m1, m2", 0, 0));
    assert_eq!(v["class"], 4);
    let got: Vec<_> = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["outcome"].as_str().unwrap())
        .collect();
    assert_eq!(
        got,
        ["success", "proven-unrepairable", "proven-unrepairable"]
    );
    assert_eq!(v["results"][0]["plan_after"], "<(a2 y2)>");
}

#[test]
fn classes_for_the_full_incomparable_domain() {
    let v = parse(solution_classes("incomparable", "anomaly", "", 0, 0));
    assert_eq!(v["exhausted"], true);
    assert_eq!(v["class2"]["size"], 1);
    assert!(v["witnesses"]["rw_not_sf"].is_string());
}

#[test]
fn bad_names_are_errors() {
    assert!(repair_fixture("nope", "anomaly", "", 0, 0).is_err());
    assert!(repair_fixture("incomparable", "nope", "", 0, 0).is_err());
    assert!(solution_classes("incomparable", "anomaly", "", 99, 0).is_err());
}
