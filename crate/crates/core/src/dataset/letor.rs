//! LETOR / SVMlight-style text format.
//!
//! Each nonempty line is `<label> qid:<qid> <fid>:<value> ... [# comment]`.
//! Feature ids are 1-based and may be sparse; absent ids are zero-filled and
//! the dataset dimensionality is the maximum feature id seen anywhere in the
//! input.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{Dataset, DatasetError, Document, Query, Split};

struct SparseDoc {
    label: u32,
    features: Vec<(usize, f64)>,
}

/// Parse a LETOR-format stream into a dataset.
///
/// Documents are grouped by query id in file order; a query id that reappears
/// later in the file extends its existing group. Documents get synthetic ids
/// `d0, d1, ...` numbered by arrival order within their query.
pub fn parse_letor<R: BufRead>(reader: R, y_max: u32) -> Result<Dataset, DatasetError> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: HashMap<String, Vec<SparseDoc>> = HashMap::new();
    let mut max_fid = 0usize;
    let mut saw_line = false;

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let content = match line.find('#') {
            Some(pos) => &line[..pos],
            None => line.as_str(),
        };
        if content.trim().is_empty() {
            continue;
        }
        saw_line = true;

        let mut tokens = content.split_whitespace();
        let label_tok = tokens.next().expect("nonempty line has a first token");
        let label: u32 = label_tok.parse().map_err(|_| DatasetError::Malformed {
            line: line_no,
            message: format!("expected integer label, got {label_tok:?}"),
        })?;
        if label > y_max {
            return Err(DatasetError::LabelOutOfRange {
                line: line_no,
                label: label as i64,
                y_max,
            });
        }

        let qid_tok = tokens.next().ok_or_else(|| DatasetError::Malformed {
            line: line_no,
            message: "missing qid field".into(),
        })?;
        let qid = qid_tok
            .strip_prefix("qid:")
            .filter(|q| !q.is_empty())
            .ok_or_else(|| DatasetError::Malformed {
                line: line_no,
                message: format!("expected qid:<id>, got {qid_tok:?}"),
            })?;

        let mut features: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (fid_str, val_str) = tok.split_once(':').ok_or_else(|| DatasetError::Malformed {
                line: line_no,
                message: format!("expected <fid>:<value>, got {tok:?}"),
            })?;
            let fid: usize = fid_str.parse().map_err(|_| DatasetError::Malformed {
                line: line_no,
                message: format!("bad feature id {fid_str:?}"),
            })?;
            if fid == 0 {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    message: "feature ids are 1-based".into(),
                });
            }
            let value: f64 = val_str.parse().map_err(|_| DatasetError::Malformed {
                line: line_no,
                message: format!("bad feature value {val_str:?}"),
            })?;
            if features.iter().any(|&(id, _)| id == fid) {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    message: format!("duplicate feature id {fid}"),
                });
            }
            max_fid = max_fid.max(fid);
            features.push((fid, value));
        }

        let group = groups.entry(qid.to_string()).or_insert_with(|| {
            order.push(qid.to_string());
            Vec::new()
        });
        group.push(SparseDoc { label, features });
    }

    if !saw_line {
        return Err(DatasetError::EmptyInput);
    }
    if max_fid == 0 {
        return Err(DatasetError::NoFeatures);
    }

    let queries = order
        .into_iter()
        .map(|qid| {
            let docs = groups.remove(&qid).expect("group exists for ordered qid");
            let documents = docs
                .into_iter()
                .enumerate()
                .map(|(i, sparse)| {
                    let mut dense = vec![0.0; max_fid];
                    for (fid, value) in sparse.features {
                        dense[fid - 1] = value;
                    }
                    Document {
                        doc_id: format!("d{i}"),
                        features: dense,
                        label: sparse.label,
                    }
                })
                .collect();
            Query {
                query_id: qid,
                documents,
            }
        })
        .collect();

    Dataset::new(queries, max_fid, y_max, Split::Train)
}

/// Write a dataset in LETOR format with dense features.
///
/// The output reparses to an equal dataset (modulo split and generator
/// metadata, which the text format does not carry).
pub fn write_letor<W: Write>(dataset: &Dataset, mut writer: W) -> Result<(), DatasetError> {
    for query in &dataset.queries {
        for doc in &query.documents {
            write!(writer, "{} qid:{}", doc.label, query.query_id)?;
            for (i, value) in doc.features.iter().enumerate() {
                write!(writer, " {}:{}", i + 1, value)?;
            }
            writeln!(writer)?;
        }
    }
    Ok(())
}
