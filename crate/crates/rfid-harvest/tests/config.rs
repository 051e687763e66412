use std::path::PathBuf;

use rfid_harvest::config::{ConfigDocument, SCHEMA_ID};
use rfid_harvest::Error;
use rfid_harvest_core::gen2sim::Mode;
use rfid_harvest_core::Scenario;

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bundled() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    v.sort();
    v
}

#[test]
fn empty_document_is_the_default() {
    let doc = ConfigDocument::parse("").unwrap();
    assert_eq!(doc, ConfigDocument::default());
    assert_eq!(doc.schema, SCHEMA_ID);
    assert_eq!(doc.scenario(0).unwrap(), Scenario::default());
}

#[test]
fn default_keyword_loads_builtin() {
    assert_eq!(ConfigDocument::load("default").unwrap(), ConfigDocument::default());
}

#[test]
fn office_file_spells_out_the_defaults() {
    let doc = ConfigDocument::load(scenario_dir().join("office.toml").to_str().unwrap()).unwrap();
    assert_eq!(doc, ConfigDocument::default());
}

#[test]
fn round_trip_is_semantically_identical() {
    for path in bundled() {
        let doc = ConfigDocument::load(path.to_str().unwrap()).unwrap();
        let again = ConfigDocument::parse(&doc.to_toml()).unwrap();
        assert_eq!(again, doc, "{}", path.display());
        assert_eq!(again.scenario(7).unwrap(), doc.scenario(7).unwrap());
    }
}

#[test]
fn partial_document_overrides_only_named_keys() {
    let doc = ConfigDocument::parse(
        "[simulation]\nmode = \"bypass\"\n[node.sensor]\naccuracy_bias = 1.3\n[capacitor]\ninitial_voltage = 1.0\n",
    )
    .unwrap();
    let s = doc.scenario(0).unwrap();
    assert_eq!(s.mode, Mode::Bypass);
    assert_eq!(s.node.sensor.accuracy_bias, 1.3);
    assert_eq!(s.node.sensor.slope, -0.0055);
    assert!((s.capacitor.energy_j() - 0.5 * 10e-6).abs() < 1e-18);
    assert_eq!(s.reader, Scenario::default().reader);
}

#[test]
fn unknown_keys_rejected() {
    for text in [
        "colour = 1\n",
        "[reader]\neirp = 30.0\n",
        "[node.sensor]\nbias = 1.0\n",
        "[capacitor]\nvoltage = 1.0\n",
        "[sweep.turn_on]\nstep = 0.1\n",
    ] {
        assert!(matches!(ConfigDocument::parse(text), Err(Error::Config(_))), "{text}");
    }
}

#[test]
fn wrong_schema_rejected() {
    let err = ConfigDocument::parse("schema = \"rfid-harvest/0\"\n").unwrap_err();
    assert!(err.to_string().contains("schema"), "{err}");
}

#[test]
fn invalid_values_rejected() {
    assert!(ConfigDocument::parse("[reader]\neirp_dbm = 40.0\n").is_err());
    assert!(ConfigDocument::parse("[link]\nplf = 0.0\n").is_err());
    assert!(ConfigDocument::parse("[pump]\nv_low = 3.0\n").is_err());
    assert!(ConfigDocument::parse("[node.adc]\nbits = 12\n").is_err());
    assert!(ConfigDocument::parse("[simulation]\nmode = \"turbo\"\n").is_err());
    assert!(ConfigDocument::parse("[sweep]\nfrequencies_mhz = [-1.0]\n").is_err());
}

#[test]
fn seed_is_not_part_of_the_document() {
    let doc = ConfigDocument::default();
    assert_eq!(doc.scenario(0).unwrap().seed, 0);
    assert_eq!(doc.scenario(99).unwrap().seed, 99);
    assert!(ConfigDocument::parse("seed = 3\n").is_err());
}
