//! Sparse text format.
//!
//! Data files hold one example per line, `label idx:val idx:val ...`, with
//! labels `+1`/`-1` and 1-based feature indices. A manifest lists one data
//! file per line, relative to the manifest's directory; `#` starts a comment.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::data::{DataError, Example, MultiTaskStream, TaskData};
use crate::linalg::SparseVec;
use crate::losses::Label;
use crate::Scalar;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads every task listed in the manifest. The dimension is the largest
/// feature index seen unless `dim_override` is given.
pub fn load_manifest<T: Scalar>(
    path: &Path,
    dim_override: Option<usize>,
) -> Result<MultiTaskStream<T>, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut raw = Vec::new();
    for line in text.lines() {
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        let file = base.join(entry);
        let body = fs::read_to_string(&file).map_err(io_err(&file))?;
        let examples = parse_task_file::<T>(&body, &file)?;
        raw.push((entry.to_string(), examples));
    }
    if raw.is_empty() {
        return Err(DataError::EmptyManifest(path.to_path_buf()));
    }

    let needed = raw
        .iter()
        .flat_map(|(_, ex)| ex.iter())
        .filter_map(|(_, entries)| entries.last().map(|&(i, _)| i + 1))
        .max()
        .unwrap_or(0);
    let dim = match dim_override {
        Some(d) if d < needed => {
            return Err(DataError::DimensionTooSmall {
                requested: d,
                needed,
            })
        }
        Some(d) => d,
        None => needed,
    };

    let mut tasks = Vec::with_capacity(raw.len());
    for (name, examples) in raw {
        let examples = examples
            .into_iter()
            .map(|(label, entries)| Example {
                // Indices were validated and sorted while parsing.
                x: SparseVec::new(dim, entries).expect("validated sparse entries"),
                label,
                flipped: false,
            })
            .collect();
        tasks.push(TaskData { name, examples });
    }
    MultiTaskStream::new(dim, tasks)
}

type RawExample<T> = (Label, Vec<(usize, T)>);

/// Parses one data file; indices in the result are 0-based and sorted.
pub fn parse_task_file<T: Scalar>(body: &str, file: &Path) -> Result<Vec<RawExample<T>>, DataError> {
    let mut out = Vec::new();
    for (n, line) in body.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| DataError::Parse {
            file: file.to_path_buf(),
            line: n + 1,
            msg,
        };
        let mut tokens = line.split_whitespace();
        let label = match tokens.next() {
            Some("+1") | Some("1") => Label::Pos,
            Some("-1") => Label::Neg,
            Some(other) => return Err(err(format!("label must be +1 or -1, got `{other}`"))),
            None => unreachable!("line is nonempty"),
        };
        let mut entries: Vec<(usize, T)> = Vec::new();
        for tok in tokens {
            let (idx, val) = tok
                .split_once(':')
                .ok_or_else(|| err(format!("expected idx:val, got `{tok}`")))?;
            let idx: usize = idx
                .parse()
                .map_err(|_| err(format!("bad feature index `{idx}`")))?;
            if idx == 0 {
                return Err(err("feature indices are 1-based".into()));
            }
            let val: T = val
                .parse()
                .map_err(|_| err(format!("bad feature value `{val}`")))?;
            if !val.is_finite() {
                return Err(err(format!("non-finite feature value `{val}`")));
            }
            entries.push((idx - 1, val));
        }
        entries.sort_by_key(|&(i, _)| i);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(err(format!("duplicate feature index {}", w[0].0 + 1)));
        }
        out.push((label, entries));
    }
    if out.is_empty() {
        return Err(DataError::EmptyTask(file.to_path_buf()));
    }
    Ok(out)
}

/// Serializes one task in the sparse format, one example per line.
pub fn write_task_file<T: Scalar>(
    task: &TaskData<T>,
    out: &mut impl Write,
) -> std::io::Result<()> {
    for e in &task.examples {
        out.write_all(if e.label == Label::Pos { b"+1" } else { b"-1" })?;
        for (i, v) in e.x.iter() {
            write!(out, " {}:{}", i + 1, v)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes `manifest.txt` plus one `<name>` data file per task into `dir`.
/// Returns the manifest path.
pub fn write_dataset<T: Scalar>(
    stream: &MultiTaskStream<T>,
    dir: &Path,
) -> Result<PathBuf, DataError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = String::new();
    for task in stream.tasks() {
        let path = dir.join(&task.name);
        let mut buf = Vec::new();
        write_task_file(task, &mut buf).map_err(io_err(&path))?;
        fs::write(&path, buf).map_err(io_err(&path))?;
        manifest.push_str(&task.name);
        manifest.push('\n');
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(io_err(&path))?;
    Ok(path)
}
