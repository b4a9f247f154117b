use std::fs;
use std::path::{Path, PathBuf};

use vpp_core::dataset::{write_synthetic_dataset, Dataset, DEFAULT_SEED};
use vpp_core::scenario::validate_tree;
use vpp_core::VppError;

fn bundled() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/bundled")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    names.sort();
    names
}

fn copy_bundled(to: &Path) -> PathBuf {
    for name in listing(&bundled()) {
        fs::copy(bundled().join(&name), to.join(&name)).unwrap();
    }
    to.join("vpp.toml")
}

#[test]
fn bundled_dataset_regenerates_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    write_synthetic_dataset(dir.path(), DEFAULT_SEED).unwrap();
    assert_eq!(listing(dir.path()), listing(&bundled()));
    for name in listing(&bundled()) {
        let a = fs::read(bundled().join(&name)).unwrap();
        let b = fs::read(dir.path().join(&name)).unwrap();
        assert!(a == b, "{name} differs from a fresh generation");
    }
}

#[test]
fn bundled_dataset_loads_clean() {
    let ds = Dataset::load(&bundled().join("vpp.toml")).unwrap();
    assert_eq!(ds.tree.horizon, 24);
    assert_eq!(ds.tree.len(), 20);
    assert!(validate_tree(&ds.tree).is_empty());
    let c = &ds.assets.contracts;
    assert_eq!((c.lc.len(), c.ls.len(), c.og.len(), c.es.len()), (3, 3, 3, 3));
    assert_eq!(ds.hash().len(), 64);
    assert_eq!(ds.hash(), Dataset::load(&bundled().join("vpp.toml")).unwrap().hash());
}

#[test]
fn other_seeds_give_other_valid_data() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_synthetic_dataset(dir.path(), 99).unwrap();
    let ds = Dataset::load(&config).unwrap();
    assert!(validate_tree(&ds.tree).is_empty());
    assert_ne!(fs::read(dir.path().join("wind.csv")).unwrap(), fs::read(bundled().join("wind.csv")).unwrap());
}

fn edit(path: &Path, f: impl Fn(&str) -> String) {
    let text = fs::read_to_string(path).unwrap();
    fs::write(path, f(&text)).unwrap();
}

#[test]
fn scaled_probabilities_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    edit(&dir.path().join("wind.csv"), |t| {
        let mut lines = t.lines();
        let mut out = format!("{}\n", lines.next().unwrap());
        for line in lines {
            let (head, p) = line.rsplit_once(',').unwrap();
            out.push_str(&format!("{head},{}\n", 2.0 * p.parse::<f64>().unwrap()));
        }
        out
    });
    let err = Dataset::load(&config).unwrap_err();
    assert!(matches!(err, VppError::InvalidData { .. }), "{err}");
    assert!(err.to_string().contains("wind.csv"), "{err}");
}

#[test]
fn unknown_contract_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    edit(&dir.path().join("contracts_og.csv"), |t| {
        t.lines().enumerate().map(|(k, l)| if k == 0 { format!("{l},colour\n") } else { format!("{l},red\n") }).collect()
    });
    let err = Dataset::load(&config).unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, VppError::Parse { .. }));
    assert!(msg.contains("contracts_og.csv") && msg.contains("colour"), "{msg}");
}

#[test]
fn schema_mismatch_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    edit(&config, |t| t.replace("schema_version = 1", "schema_version = 9"));
    assert!(Dataset::load(&config).unwrap_err().to_string().contains("schema_version 9"));

    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    fs::remove_file(dir.path().join("balancing.csv")).unwrap();
    assert!(matches!(Dataset::load(&config), Err(VppError::Io { ref path, .. }) if path.ends_with("balancing.csv")));
}

#[test]
fn malformed_config_reports_position() {
    let dir = tempfile::tempdir().unwrap();
    let config = copy_bundled(dir.path());
    edit(&config, |t| t.replace("horizon = 24", "horizon = = 24"));
    let msg = Dataset::load(&config).unwrap_err().to_string();
    assert!(msg.contains("vpp.toml") && msg.contains("line"), "{msg}");
}
