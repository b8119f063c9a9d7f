//! Corpus ingestion and emission.
//!
//! JSONL: one object per line, `{"id": str, "features": [f, ...] or
//! [[f, ...], ...], "label": int|null}`. CSV: `id,label,f0..fD` columns with
//! an empty label field meaning unlabeled.

use super::{Corpus, DataError, Features, Sample};
use std::fs;
use std::io::Write;
use std::path::Path;

fn io_err(path: &Path, source: std::io::Error) -> DataError {
    DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read raw samples from JSONL without corpus-level validation.
pub fn read_samples_jsonl(path: &Path) -> Result<Vec<Sample>, DataError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample: Sample = serde_json::from_str(line).map_err(|e| DataError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Read a corpus from JSONL. When `num_intents` is absent it is inferred as
/// `max(label) + 1`.
pub fn read_corpus_jsonl(path: &Path, num_intents: Option<usize>) -> Result<Corpus, DataError> {
    let samples = read_samples_jsonl(path)?;
    let g = resolve_intents(&samples, num_intents)?;
    Corpus::new(samples, g)
}

/// Read a corpus from CSV with `id,label,f0..fD` columns.
pub fn read_corpus_csv(path: &Path, num_intents: Option<usize>) -> Result<Corpus, DataError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| DataError::Parse {
        path: path.display().to_string(),
        line: 0,
        reason: e.to_string(),
    })?;
    let mut samples = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DataError::Parse {
            path: path.display().to_string(),
            line: i + 2,
            reason: e.to_string(),
        })?;
        let parse = |reason: String| DataError::Parse {
            path: path.display().to_string(),
            line: i + 2,
            reason,
        };
        if record.len() < 3 {
            return Err(parse(format!("expected id,label,f0.. got {} fields", record.len())));
        }
        let id = record[0].to_string();
        let label_field = record[1].trim();
        let label = if label_field.is_empty() {
            None
        } else {
            Some(
                label_field
                    .parse::<usize>()
                    .map_err(|e| parse(format!("bad label {label_field:?}: {e}")))?,
            )
        };
        let mut features = Vec::with_capacity(record.len() - 2);
        for field in record.iter().skip(2) {
            features.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse(format!("bad feature {field:?}: {e}")))?,
            );
        }
        samples.push(Sample {
            id,
            features: Features::Vector(features),
            label,
        });
    }
    let g = resolve_intents(&samples, num_intents)?;
    Corpus::new(samples, g)
}

fn resolve_intents(samples: &[Sample], declared: Option<usize>) -> Result<usize, DataError> {
    match declared {
        Some(g) => Ok(g),
        None => samples
            .iter()
            .filter_map(|s| s.label)
            .max()
            .map(|m| m + 1)
            .ok_or_else(|| {
                DataError::MalformedCorpus(
                    "corpus has no labels; declare num_intents explicitly".into(),
                )
            }),
    }
}

/// Canonical JSONL bytes for a sample list; used for file emission and
/// content fingerprints.
pub fn canonical_jsonl(samples: &[Sample]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in samples {
        serde_json::to_writer(&mut out, s).expect("sample serialization cannot fail");
        out.push(b'\n');
    }
    out
}

pub fn write_samples_jsonl(path: &Path, samples: &[Sample]) -> Result<(), DataError> {
    let mut file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    file.write_all(&canonical_jsonl(samples))
        .map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_round_trip_with_both_feature_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let samples = vec![
            Sample {
                id: "a".into(),
                features: Features::Vector(vec![1.0, 2.0]),
                label: Some(0),
            },
            Sample {
                id: "b".into(),
                features: Features::Tokens(vec![vec![0.5, 0.5], vec![1.5, 2.5]]),
                label: None,
            },
            Sample {
                id: "c".into(),
                features: Features::Vector(vec![-1.0, 0.0]),
                label: Some(1),
            },
        ];
        write_samples_jsonl(&path, &samples).unwrap();
        let corpus = read_corpus_jsonl(&path, None).unwrap();
        assert_eq!(corpus.num_intents(), 2);
        assert_eq!(corpus.samples(), &samples[..]);
    }

    #[test]
    fn csv_parses_empty_label_as_unlabeled() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.csv");
        fs::write(&path, "id,label,f0,f1\nx,0,1.0,2.0\ny,,3.0,4.0\nz,1,0.0,1.0\n").unwrap();
        let corpus = read_corpus_csv(&path, None).unwrap();
        assert_eq!(corpus.len(), 3);
        assert_eq!(corpus.samples()[1].label, None);
        assert_eq!(
            corpus.samples()[1].features,
            Features::Vector(vec![3.0, 4.0])
        );
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"id\":\"a\",\"features\":[1.0],\"label\":0}\nnot json\n").unwrap();
        let err = read_corpus_jsonl(&path, Some(1)).unwrap_err();
        match err {
            DataError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected: {other}"),
        }
    }
}
