use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_wav, write_wav, LogMel, MelConfig, WavClip};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};

pub const MANIFEST_FILE: &str = "labels.csv";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub path: String,
    pub class_id: usize,
}

fn read_rows(dir: &Path) -> Result<Vec<ManifestRow>> {
    let file = dir.join(MANIFEST_FILE);
    let mut reader = csv::Reader::from_path(&file)?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["path", "class_id"] {
        return Err(Error::Manifest(format!("{}: header must be `path,class_id`", file.display())));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Loads `<dir>/labels.csv` and featurises every listed clip. Paths are
/// relative to `dir`; every `class_id` must be below `num_classes`.
pub fn load_manifest(dir: impl AsRef<Path>, num_classes: usize, mel: MelConfig) -> Result<LabeledDataset> {
    let dir = dir.as_ref();
    let rows = read_rows(dir)?;
    if rows.is_empty() {
        return Err(Error::Manifest("manifest lists no clips".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.class_id >= num_classes) {
        return Err(Error::Manifest(format!(
            "{}: class_id {} is outside [0, {num_classes})",
            bad.path, bad.class_id
        )));
    }
    let clips: Vec<Result<(PathBuf, WavClip)>> = exec::map(Exec::default(), &rows, |r| {
        let p = dir.join(&r.path);
        read_wav(&p).map(|c| (p, c))
    });
    let mut ds = LabeledDataset::new(num_classes);
    let mut extractor: Option<LogMel> = None;
    for (row, clip) in rows.iter().zip(clips) {
        let (path, clip) = clip?;
        let ex = match &extractor {
            Some(e) => e,
            None => extractor.insert(LogMel::new(clip.sample_rate, mel)?),
        };
        let feat = ex.extract(&clip).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        ds.push_one_hot(feat.values, row.class_id)?;
    }
    Ok(ds)
}

/// Writes clips as 16-bit WAV files plus a `labels.csv` into `dir`.
pub fn write_manifest(dir: impl AsRef<Path>, clips: &[(WavClip, usize)]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(MANIFEST_FILE))?;
    for (i, (clip, class)) in clips.iter().enumerate() {
        let name = format!("c{class:02}_{i:05}.wav");
        write_wav(dir.join(&name), clip)?;
        w.serialize(ManifestRow { path: name, class_id: *class })?;
    }
    w.flush()?;
    Ok(())
}
