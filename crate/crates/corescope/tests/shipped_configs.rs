use std::path::PathBuf;

use corescope::pipeline::AgendaConfig;

fn shipped(name: &str) -> AgendaConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name);
    let raw = std::fs::read(&path).unwrap_or_else(|e| panic!("read {}: {e}", path.display()));
    serde_json::from_slice(&raw).unwrap_or_else(|e| panic!("parse {}: {e}", path.display()))
}

#[test]
fn test_shipped_desk_config_matches_library_default() {
    assert_eq!(shipped("desk.json"), AgendaConfig::desk_default());
}

#[test]
fn test_shipped_paper_config_matches_library_default() {
    assert_eq!(shipped("paper.json"), AgendaConfig::paper_default());
}
