use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Dataset, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// `id,f1,...,fk,label`
    Tabular,
    /// `id,image_path,mask_path,label`
    ImageManifest,
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_label(path: &Path, line: usize, field: &str) -> Result<usize> {
    match field.trim().parse::<usize>() {
        Ok(k) if k >= 1 => Ok(k),
        _ => Err(parse_err(
            path,
            line,
            format!("label '{field}' is not a positive integer"),
        )),
    }
}

/// Load a dataset from comma-delimited text with a header row. Image paths
/// in a manifest are resolved relative to the manifest's directory.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(File::open(path)?);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    let width = header.len();
    match format {
        DatasetFormat::Tabular => {
            if width < 3 || &header[0] != "id" || &header[width - 1] != "label" {
                return Err(parse_err(
                    path,
                    1,
                    "tabular header must be id,f1,...,fk,label",
                ));
            }
        }
        DatasetFormat::ImageManifest => {
            let expected = ["id", "image_path", "mask_path", "label"];
            if header.iter().ne(expected) {
                return Err(parse_err(
                    path,
                    1,
                    "manifest header must be id,image_path,mask_path,label",
                ));
            }
        }
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: &str| -> PathBuf {
        let p = PathBuf::from(p);
        if p.is_absolute() {
            p
        } else {
            base.join(p)
        }
    };

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty id"));
        }
        let label = parse_label(path, line, &record[width - 1])?;
        let sample = match format {
            DatasetFormat::Tabular => {
                let features = (1..width - 1)
                    .map(|c| {
                        record[c].parse::<f64>().map_err(|_| {
                            parse_err(
                                path,
                                line,
                                format!("column '{}' is not a number: '{}'", &header[c], &record[c]),
                            )
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Sample::tabular(id, features, label)
            }
            DatasetFormat::ImageManifest => {
                let image = resolve(&record[1]);
                let mask = resolve(&record[2]);
                for p in [&image, &mask] {
                    if !p.exists() {
                        return Err(Error::MissingInput(p.clone()));
                    }
                }
                Sample::image(id, image, mask, label)
            }
        };
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, samples)
}

/// Write the feature vectors of `dataset` in the tabular format.
pub fn write_tabular(dataset: &Dataset, path: &Path) -> Result<()> {
    let dim = dataset
        .feature_dim()
        .ok_or_else(|| Error::Validation("dataset has no feature vectors".into()))?;
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut header = vec!["id".to_string()];
    header.extend((1..=dim).map(|k| format!("f{k}")));
    header.push("label".into());
    writeln!(out, "{}", header.join(","))?;
    for s in &dataset.samples {
        let f = s.features.as_ref().ok_or_else(|| {
            Error::Validation(format!("sample '{}' has no feature vector", s.id))
        })?;
        if f.len() != dim {
            return Err(Error::Shape(format!(
                "sample '{}' has {} features, expected {dim}",
                s.id,
                f.len()
            )));
        }
        write!(out, "{}", s.id)?;
        for v in f {
            write!(out, ",{v}")?;
        }
        writeln!(out, ",{}", s.label)?;
    }
    out.flush()?;
    Ok(())
}
