//! Click-log JSON-lines format.
//!
//! One session per line:
//! `{"qid": str, "docs": [str], "clicks": [0|1], "observed"?: [0|1], "relevant"?: [0|1]}`.
//! The optional `observed`/`relevant` fields carry the latent trace of
//! simulated sessions; logged data omits them.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{ClickSession, DatasetError, LatentTrace};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRecord {
    qid: String,
    docs: Vec<String>,
    clicks: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observed: Option<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relevant: Option<Vec<u8>>,
}

fn bits_to_bools(line: usize, field: &str, bits: &[u8]) -> Result<Vec<bool>, DatasetError> {
    bits.iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(DatasetError::Malformed {
                line,
                message: format!("{field} entries must be 0 or 1, got {other}"),
            }),
        })
        .collect()
}

fn bools_to_bits(bools: &[bool]) -> Vec<u8> {
    bools.iter().map(|&b| b as u8).collect()
}

/// Parse a JSON-lines click log, preserving file order.
pub fn parse_click_log<R: BufRead>(reader: R) -> Result<Vec<ClickSession>, DatasetError> {
    let mut sessions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: SessionRecord =
            serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
        if record.clicks.len() != record.docs.len() {
            return Err(DatasetError::ClickLengthMismatch {
                clicks: record.clicks.len(),
                docs: record.docs.len(),
            });
        }
        let clicks = bits_to_bools(line_no, "clicks", &record.clicks)?;
        let latent = match (&record.observed, &record.relevant) {
            (None, None) => None,
            (Some(observed), Some(relevant)) => {
                if observed.len() != record.docs.len() || relevant.len() != record.docs.len() {
                    return Err(DatasetError::ClickLengthMismatch {
                        clicks: observed.len().min(relevant.len()),
                        docs: record.docs.len(),
                    });
                }
                Some(LatentTrace {
                    observed: bits_to_bools(line_no, "observed", observed)?,
                    perceived_relevant: bits_to_bools(line_no, "relevant", relevant)?,
                })
            }
            _ => {
                return Err(DatasetError::Malformed {
                    line: line_no,
                    message: "observed and relevant must be present together".into(),
                })
            }
        };
        sessions.push(
            ClickSession::new(record.qid, record.docs, clicks, latent).map_err(|e| match e {
                DatasetError::InconsistentTrace { position } => DatasetError::Malformed {
                    line: line_no,
                    message: format!("click[{position}] != observed AND relevant"),
                },
                other => other,
            })?,
        );
    }
    Ok(sessions)
}

/// Write sessions as JSON lines. Latent traces are included only when
/// `include_latent` is set; realistic exports strip them.
pub fn write_click_log<'a, W: Write>(
    sessions: impl IntoIterator<Item = &'a ClickSession>,
    mut writer: W,
    include_latent: bool,
) -> Result<(), DatasetError> {
    for session in sessions {
        let record = SessionRecord {
            qid: session.query_id.clone(),
            docs: session.doc_ids.clone(),
            clicks: bools_to_bits(&session.clicks),
            observed: session
                .latent
                .as_ref()
                .filter(|_| include_latent)
                .map(|t| bools_to_bits(&t.observed)),
            relevant: session
                .latent
                .as_ref()
                .filter(|_| include_latent)
                .map(|t| bools_to_bits(&t.perceived_relevant)),
        };
        let json = serde_json::to_string(&record).expect("session record serializes");
        writeln!(writer, "{json}")?;
    }
    Ok(())
}
