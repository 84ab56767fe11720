//! JSON and JSONL file handling.
//!
//! Every writer emits records in the order given with one `\n`-terminated
//! line per record, so identical inputs give byte-identical files.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;
use vpdistill_core::scene::SceneGraph;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Open {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl IoError {
    /// Schema problems are validation failures; the rest are I/O.
    pub fn is_schema(&self) -> bool {
        matches!(self, IoError::Schema { .. })
    }
}

fn open_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Open {
        path: path.to_owned(),
        source,
    }
}

/// Raw non-empty lines of a JSONL file with their 1-based line numbers.
pub fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, IoError> {
    let file = fs::File::open(path).map_err(open_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(open_err(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    read_lines(path)?
        .into_iter()
        .map(|(line, text)| {
            serde_json::from_str(&text).map_err(|e| IoError::Schema {
                path: path.to_owned(),
                line,
                message: describe(&text, &e),
            })
        })
        .collect()
}

/// Error text that names the record id when the line has one.
fn describe(text: &str, error: &serde_json::Error) -> String {
    let id = serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| {
            ["id", "record_id", "scene_id"]
                .iter()
                .find_map(|k| v.get(k).and_then(|x| x.as_str()).map(|s| format!("{k} {s:?}")))
        });
    match id {
        Some(id) => format!("record {id}: {error}"),
        None => error.to_string(),
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(open_err(parent))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(open_err(path))?))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    records: impl IntoIterator<Item = &'a T>,
) -> Result<usize, IoError> {
    let mut w = create(path)?;
    let mut n = 0;
    for record in records {
        let line = serde_json::to_string(record).expect("records serialize");
        writeln!(w, "{line}").map_err(open_err(path))?;
        n += 1;
    }
    w.flush().map_err(open_err(path))?;
    Ok(n)
}

/// Writes lines verbatim, each followed by `\n`.
pub fn write_lines<'a>(path: &Path, lines: impl IntoIterator<Item = &'a str>) -> Result<(), IoError> {
    let mut w = create(path)?;
    for line in lines {
        writeln!(w, "{line}").map_err(open_err(path))?;
    }
    w.flush().map_err(open_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(open_err(path))?;
    serde_json::from_str(&text).map_err(|e| IoError::Schema {
        path: path.to_owned(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut w = create(path)?;
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    writeln!(w, "{text}").map_err(open_err(path))?;
    w.flush().map_err(open_err(path))
}

/// Loads scenes from a JSONL file, a single-scene JSON file, or a directory
/// of `.json` files (read in name order). Each scene is validated.
pub fn load_scenes(path: &Path) -> Result<Vec<SceneGraph>, IoError> {
    let scenes = if path.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(path)
            .map_err(open_err(path))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        files
            .iter()
            .map(|f| read_json::<SceneGraph>(f))
            .collect::<Result<Vec<_>, _>>()?
    } else if path.extension().is_some_and(|x| x == "json") {
        vec![read_json::<SceneGraph>(path)?]
    } else {
        read_jsonl(path)?
    };
    for (i, scene) in scenes.iter().enumerate() {
        scene.validate().map_err(|e| IoError::Schema {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
    }
    Ok(scenes)
}
