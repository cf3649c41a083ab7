//! File-backed experiment store. Artifacts are JSON documents in a fixed
//! directory layout; writes go to a temporary sibling file first and are
//! renamed into place, so readers and resumed runs never observe a partial
//! document. The store is append-only: nothing here mutates or deletes an
//! existing artifact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::grid::TrainId;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid json at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path} has format version {found}, expected {expected}")]
    VersionMismatch {
        path: PathBuf,
        found: u64,
        expected: u32,
    },
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(root: impl Into<PathBuf>) -> Store {
        Store { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn infra_dir(&self, infra_idx: usize) -> PathBuf {
        self.root.join("infra").join(infra_idx.to_string())
    }

    pub fn infra_path(&self, infra_idx: usize) -> PathBuf {
        self.infra_dir(infra_idx).join("infrastructure.json")
    }

    pub fn schedule_dir(&self, infra_idx: usize, schedule_idx: usize) -> PathBuf {
        self.infra_dir(infra_idx)
            .join("schedule")
            .join(schedule_idx.to_string())
    }

    pub fn schedule_path(&self, infra_idx: usize, schedule_idx: usize) -> PathBuf {
        self.schedule_dir(infra_idx, schedule_idx).join("schedule.json")
    }

    pub fn malfunction_path(
        &self,
        infra_idx: usize,
        schedule_idx: usize,
        train: TrainId,
    ) -> PathBuf {
        self.schedule_dir(infra_idx, schedule_idx)
            .join("resched")
            .join(train.0.to_string())
            .join("malfunction.json")
    }

    pub fn run_dir(&self, agenda_id: &str) -> PathBuf {
        self.root.join("runs").join(agenda_id)
    }

    pub fn agenda_path(&self, agenda_id: &str) -> PathBuf {
        self.run_dir(agenda_id).join("agenda.json")
    }

    pub fn result_path(&self, agenda_id: &str, composite_id: &str) -> PathBuf {
        self.run_dir(agenda_id)
            .join("results")
            .join(format!("{composite_id}.json"))
    }

    pub fn analysis_dir(&self, agenda_id: &str) -> PathBuf {
        self.run_dir(agenda_id).join("analysis")
    }

    pub fn write_json<T: Serialize>(&self, path: &Path, value: &T) -> Result<(), StoreError> {
        let io = |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        };
        let parent = path.parent().expect("store paths always have a parent");
        fs::create_dir_all(parent).map_err(io)?;
        let text = serde_json::to_vec_pretty(value).map_err(|source| StoreError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, text).map_err(io)?;
        fs::rename(&tmp, path).map_err(io)
    }

    /// Reads a JSON artifact, first checking its top-level `version` field
    /// against the store format version.
    pub fn read_json<T: DeserializeOwned>(&self, path: &Path) -> Result<T, StoreError> {
        let bytes = fs::read(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let json = |source| StoreError::Json {
            path: path.to_path_buf(),
            source,
        };
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(json)?;
        let found = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
        if found != FORMAT_VERSION as u64 {
            return Err(StoreError::VersionMismatch {
                path: path.to_path_buf(),
                found,
                expected: FORMAT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(json)
    }

    pub fn exists(&self, path: &Path) -> bool {
        path.is_file()
    }

    /// All result files recorded for an agenda, sorted by file name.
    pub fn list_result_paths(&self, agenda_id: &str) -> Result<Vec<PathBuf>, StoreError> {
        let dir = self.run_dir(agenda_id).join("results");
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut paths = Vec::new();
        let entries = fs::read_dir(&dir).map_err(|source| StoreError::Io {
            path: dir.clone(),
            source,
        })?;
        for entry in entries {
            let entry = entry.map_err(|source| StoreError::Io {
                path: dir.clone(),
                source,
            })?;
            let path = entry.path();
            if path.extension().is_some_and(|e| e == "json") {
                paths.push(path);
            }
        }
        paths.sort();
        Ok(paths)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Doc {
        version: u32,
        payload: Vec<i64>,
    }

    fn store() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        (dir, store)
    }

    #[test]
    fn test_layout_paths_follow_hierarchy() {
        let store = Store::new("/data");
        assert_eq!(
            store.infra_path(3),
            PathBuf::from("/data/infra/3/infrastructure.json")
        );
        assert_eq!(
            store.schedule_path(3, 1),
            PathBuf::from("/data/infra/3/schedule/1/schedule.json")
        );
        assert_eq!(
            store.malfunction_path(3, 1, TrainId(6)),
            PathBuf::from("/data/infra/3/schedule/1/resched/6/malfunction.json")
        );
        assert_eq!(
            store.result_path("desk", "i3_s1_m6_r0"),
            PathBuf::from("/data/runs/desk/results/i3_s1_m6_r0.json")
        );
    }

    #[test]
    fn test_round_trip_creates_directories_and_preserves_value() {
        let (_dir, store) = store();
        let doc = Doc {
            version: FORMAT_VERSION,
            payload: vec![1, 2, 3],
        };
        let path = store.result_path("desk", "i0_s0_m0_r0");
        store.write_json(&path, &doc).unwrap();
        assert!(store.exists(&path));
        let back: Doc = store.read_json(&path).unwrap();
        assert_eq!(back, doc);
    }

    #[test]
    fn test_version_mismatch_is_rejected_on_load() {
        let (_dir, store) = store();
        let doc = Doc {
            version: 99,
            payload: vec![],
        };
        let path = store.infra_path(0);
        store.write_json(&path, &doc).unwrap();
        match store.read_json::<Doc>(&path) {
            Err(StoreError::VersionMismatch { found, expected, .. }) => {
                assert_eq!(found, 99);
                assert_eq!(expected, FORMAT_VERSION);
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
    }

    #[test]
    fn test_write_leaves_no_temp_files_behind() {
        let (_dir, store) = store();
        let path = store.schedule_path(0, 0);
        store
            .write_json(&path, &Doc { version: 1, payload: vec![7] })
            .unwrap();
        let siblings: Vec<_> = fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(siblings, vec![std::ffi::OsString::from("schedule.json")]);
    }

    #[test]
    fn test_list_result_paths_sorts_and_filters() {
        let (_dir, store) = store();
        let doc = Doc { version: 1, payload: vec![] };
        store
            .write_json(&store.result_path("desk", "i1_s0_m0_r0"), &doc)
            .unwrap();
        store
            .write_json(&store.result_path("desk", "i0_s0_m0_r0"), &doc)
            .unwrap();
        fs::write(
            store.run_dir("desk").join("results").join("notes.txt"),
            b"x",
        )
        .unwrap();
        let names: Vec<String> = store
            .list_result_paths("desk")
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, vec!["i0_s0_m0_r0.json", "i1_s0_m0_r0.json"]);
        assert!(store.list_result_paths("other").unwrap().is_empty());
    }
}
