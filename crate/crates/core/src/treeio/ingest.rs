//! Batch ingestion of Newick files into a spider sample.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newick::{parse_newick_at, split_records, NewickError};
use super::tritree::{induce_tritree, tritree_to_spider, LegAssignment, TreeError};
use crate::geometry::{BookPoint, BookShape, Sample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedTree {
    pub file: String,
    /// 1-based record number within the file.
    pub record: usize,
    pub point: BookPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skip {
    pub file: String,
    /// 1-based record number; absent when the whole file was skipped.
    pub record: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub taxa: [String; 3],
    pub trees: Vec<IngestedTree>,
    pub skipped: Vec<Skip>,
    pub warnings: Vec<String>,
}

impl IngestReport {
    /// The ingested points as a 3-spider sample, `None` when nothing was ingested.
    pub fn sample(&self) -> Option<Sample> {
        if self.trees.is_empty() {
            return None;
        }
        let points = self.trees.iter().map(|t| t.point.clone()).collect();
        Some(Sample::new(BookShape::spider(3).unwrap(), points).expect("tree points lie on the 3-spider"))
    }
}

struct FileOutcome {
    trees: Vec<IngestedTree>,
    skipped: Vec<Skip>,
    warnings: Vec<String>,
}

fn ingest_text(file: &str, text: &str, a: &LegAssignment) -> FileOutcome {
    let mut out = FileOutcome {
        trees: Vec::new(),
        skipped: Vec::new(),
        warnings: Vec::new(),
    };
    let records = split_records(text);
    if records.is_empty() {
        out.skipped.push(Skip {
            file: file.to_string(),
            record: None,
            reason: "no records".into(),
        });
        return out;
    }
    let taxa = a.taxa();
    let names = [taxa[0].as_str(), taxa[1].as_str(), taxa[2].as_str()];
    for (i, (offset, record)) in records.into_iter().enumerate() {
        let number = i + 1;
        let result = parse_newick_at(record, offset)
            .map_err(TreeError::from)
            .and_then(|tree| {
                let missing: Vec<&str> = names.iter().copied().filter(|n| tree.find_leaf(n).is_none()).collect();
                if !missing.is_empty() {
                    return Err(TreeError::Newick(NewickError::MissingTaxon {
                        name: missing.join(", "),
                    }));
                }
                induce_tritree(&tree, names)
            })
            .and_then(|(tri, warnings)| Ok((tritree_to_spider(&tri, a)?, warnings)));
        match result {
            Ok((point, warnings)) => {
                out.warnings
                    .extend(warnings.into_iter().map(|w| format!("{file}: record {number}: {w}")));
                out.trees.push(IngestedTree {
                    file: file.to_string(),
                    record: number,
                    point,
                });
            }
            Err(e) => out.skipped.push(Skip {
                file: file.to_string(),
                record: Some(number),
                reason: match e {
                    TreeError::Newick(NewickError::MissingTaxon { name }) => format!("missing taxa: {name}"),
                    other => other.to_string(),
                },
            }),
        }
    }
    out
}

fn ingest_file(path: &Path, a: &LegAssignment) -> FileOutcome {
    let file = path.display().to_string();
    match std::fs::read(path) {
        Err(e) => FileOutcome {
            trees: Vec::new(),
            skipped: vec![Skip {
                file,
                record: None,
                reason: format!("I/O error: {e}"),
            }],
            warnings: Vec::new(),
        },
        Ok(bytes) => match std::str::from_utf8(&bytes) {
            Ok(text) => ingest_text(&file, text, a),
            Err(e) => FileOutcome {
                trees: Vec::new(),
                skipped: vec![Skip {
                    file,
                    record: None,
                    reason: NewickError::InvalidUtf8 {
                        position: e.valid_up_to(),
                    }
                    .to_string(),
                }],
                warnings: Vec::new(),
            },
        },
    }
}

/// Reads every record of every file, keeping the trees that contain all
/// three assignment taxa. Files are processed concurrently; the report lists
/// trees, skips and warnings in input order.
pub fn ingest_corpus(paths: &[PathBuf], a: &LegAssignment) -> IngestReport {
    let outcomes: Vec<FileOutcome> = paths.par_iter().map(|p| ingest_file(p, a)).collect();
    let mut report = IngestReport {
        taxa: a.taxa().clone(),
        trees: Vec::new(),
        skipped: Vec::new(),
        warnings: Vec::new(),
    };
    for o in outcomes {
        report.trees.extend(o.trees);
        report.skipped.extend(o.skipped);
        report.warnings.extend(o.warnings);
    }
    report
}
