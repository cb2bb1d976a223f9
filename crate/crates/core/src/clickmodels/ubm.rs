//! User browsing model: examination depends on rank and on the distance to
//! the previous click in the same session.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ClickSession;

use super::{warn_sparse_pairs, ClickModelError, ClickModelPrior};

/// Distance bucket of a position: 0 means "no previous click", otherwise the
/// exact gap to the last clicked position.
fn distance_bucket(position: usize, last_click: Option<usize>) -> usize {
    match last_click {
        None => 0,
        Some(l) => position - l,
    }
}

/// UBM parameters: per-pair attractiveness and a dense examination table
/// indexed by (rank, distance bucket).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UbmParams {
    /// attractiveness[qid][doc_id]
    pub attractiveness: BTreeMap<String, BTreeMap<String, f64>>,
    /// examination[rank - 1][distance_bucket]; bucket 0 is "no previous click".
    pub examination: Vec<Vec<f64>>,
}

impl UbmParams {
    pub fn attractiveness_of(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.attractiveness.get(query_id)?.get(doc_id).copied()
    }

    pub fn examination_of(&self, rank: usize, distance: usize) -> Option<f64> {
        self.examination.get(rank - 1)?.get(distance).copied()
    }

    pub fn max_rank(&self) -> usize {
        self.examination.len()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Fit result: parameters plus per-iteration traces of the penalized EM
/// objective and the raw log-likelihood (index 0 is the initial value).
#[derive(Debug, Clone, PartialEq)]
pub struct UbmFit {
    pub params: UbmParams,
    pub objective_trace: Vec<f64>,
    pub log_likelihood_trace: Vec<f64>,
}

struct Index {
    pairs: BTreeMap<(String, String), usize>,
    max_rank: usize,
}

fn build_index(sessions: &[ClickSession]) -> Result<Index, ClickModelError> {
    if sessions.is_empty() {
        return Err(ClickModelError::EmptySessions);
    }
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut max_rank = 0usize;
    for session in sessions {
        max_rank = max_rank.max(session.len());
        for doc_id in &session.doc_ids {
            *counts
                .entry((session.query_id.clone(), doc_id.clone()))
                .or_insert(0) += 1;
        }
    }
    warn_sparse_pairs(&counts);
    let pairs = counts
        .keys()
        .cloned()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    Ok(Index { pairs, max_rank })
}

struct Stats {
    attr_succ: Vec<f64>,
    attr_trials: Vec<f64>,
    exam_succ: Vec<f64>,
    exam_trials: Vec<f64>,
    log_likelihood: f64,
}

impl Stats {
    fn zeros(pairs: usize, cells: usize) -> Self {
        Stats {
            attr_succ: vec![0.0; pairs],
            attr_trials: vec![0.0; pairs],
            exam_succ: vec![0.0; cells],
            exam_trials: vec![0.0; cells],
            log_likelihood: 0.0,
        }
    }

    fn merge(&mut self, other: &Stats) {
        for (a, b) in self.attr_succ.iter_mut().zip(&other.attr_succ) {
            *a += b;
        }
        for (a, b) in self.attr_trials.iter_mut().zip(&other.attr_trials) {
            *a += b;
        }
        for (a, b) in self.exam_succ.iter_mut().zip(&other.exam_succ) {
            *a += b;
        }
        for (a, b) in self.exam_trials.iter_mut().zip(&other.exam_trials) {
            *a += b;
        }
        self.log_likelihood += other.log_likelihood;
    }
}

fn cell(rank: usize, distance: usize, max_rank: usize) -> usize {
    (rank - 1) * max_rank + distance
}

fn expectation_pass(
    sessions: &[ClickSession],
    index: &Index,
    attr: &[f64],
    exam: &[f64],
) -> Stats {
    use rayon::prelude::*;
    let chunk_stats: Vec<Stats> = sessions
        .par_chunks(1024)
        .map(|chunk| {
            let mut stats = Stats::zeros(index.pairs.len(), exam.len());
            for session in chunk {
                let mut last_click = None;
                for (i, doc_id) in session.doc_ids.iter().enumerate() {
                    let rank = i + 1;
                    let pair = index.pairs[&(session.query_id.clone(), doc_id.clone())];
                    let c = cell(rank, distance_bucket(rank, last_click), index.max_rank);
                    let a = attr[pair];
                    let g = exam[c];
                    stats.attr_trials[pair] += 1.0;
                    stats.exam_trials[c] += 1.0;
                    if session.clicks[i] {
                        stats.attr_succ[pair] += 1.0;
                        stats.exam_succ[c] += 1.0;
                        stats.log_likelihood += (a * g).ln();
                        last_click = Some(rank);
                    } else {
                        // Posteriors of the latent attraction/examination pair
                        // given no click.
                        let no_click = 1.0 - a * g;
                        stats.attr_succ[pair] += a * (1.0 - g) / no_click;
                        stats.exam_succ[c] += g * (1.0 - a) / no_click;
                        stats.log_likelihood += no_click.ln();
                    }
                }
            }
            stats
        })
        .collect();
    let mut total = Stats::zeros(index.pairs.len(), exam.len());
    for stats in &chunk_stats {
        total.merge(stats);
    }
    total
}

fn penalized(
    log_likelihood: f64,
    attr: &[f64],
    exam: &[f64],
    used_cells: &[bool],
    prior: &ClickModelPrior,
) -> f64 {
    let mut objective = log_likelihood;
    for a in attr {
        objective += prior.log_prior(*a);
    }
    for (g, used) in exam.iter().zip(used_cells) {
        if *used {
            objective += prior.log_prior(*g);
        }
    }
    objective
}

/// Fit UBM by EM. With zero iterations the prior parameters come back
/// unchanged.
pub fn ubm_fit(
    sessions: &[ClickSession],
    iterations: usize,
    prior: &ClickModelPrior,
) -> Result<UbmFit, ClickModelError> {
    prior.validate()?;
    let index = build_index(sessions)?;
    let n_cells = index.max_rank * index.max_rank;
    let mut attr = vec![prior.attractiveness; index.pairs.len()];
    let mut exam = vec![prior.examination; n_cells];

    // Cells that actually occur; untouched cells keep the prior and stay out
    // of the objective.
    let mut used_cells = vec![false; n_cells];
    for session in sessions {
        let mut last_click = None;
        for i in 0..session.len() {
            let rank = i + 1;
            used_cells[cell(rank, distance_bucket(rank, last_click), index.max_rank)] = true;
            if session.clicks[i] {
                last_click = Some(rank);
            }
        }
    }

    let mut objective_trace = Vec::with_capacity(iterations + 1);
    let mut log_likelihood_trace = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let stats = expectation_pass(sessions, &index, &attr, &exam);
        objective_trace.push(penalized(stats.log_likelihood, &attr, &exam, &used_cells, prior));
        log_likelihood_trace.push(stats.log_likelihood);
        for (i, a) in attr.iter_mut().enumerate() {
            *a = prior.update(stats.attr_succ[i], stats.attr_trials[i]);
        }
        for (i, g) in exam.iter_mut().enumerate() {
            if used_cells[i] {
                *g = prior.update(stats.exam_succ[i], stats.exam_trials[i]);
            }
        }
    }
    let final_stats = expectation_pass(sessions, &index, &attr, &exam);
    objective_trace.push(penalized(
        final_stats.log_likelihood,
        &attr,
        &exam,
        &used_cells,
        prior,
    ));
    log_likelihood_trace.push(final_stats.log_likelihood);

    let mut attractiveness: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((qid, doc), idx) in &index.pairs {
        attractiveness
            .entry(qid.clone())
            .or_default()
            .insert(doc.clone(), attr[*idx]);
    }
    let examination = (0..index.max_rank)
        .map(|r| exam[r * index.max_rank..(r + 1) * index.max_rank].to_vec())
        .collect();
    Ok(UbmFit {
        params: UbmParams {
            attractiveness,
            examination,
        },
        objective_trace,
        log_likelihood_trace,
    })
}

/// Sample one session from known UBM parameters.
pub fn simulate_ubm_session(
    params: &UbmParams,
    query_id: &str,
    doc_ids: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<ClickSession, ClickModelError> {
    if doc_ids.len() > params.max_rank() {
        return Err(ClickModelError::ListTooLong {
            query_id: query_id.to_string(),
            got: doc_ids.len(),
            max_rank: params.max_rank(),
        });
    }
    let mut clicks = Vec::with_capacity(doc_ids.len());
    let mut last_click = None;
    for (i, doc_id) in doc_ids.iter().enumerate() {
        let rank = i + 1;
        let a = params
            .attractiveness_of(query_id, doc_id)
            .ok_or_else(|| ClickModelError::UnknownPair {
                query_id: query_id.to_string(),
                doc_id: doc_id.clone(),
            })?;
        let g = params
            .examination_of(rank, distance_bucket(rank, last_click))
            .expect("rank within table");
        let clicked = rng.gen_bool(g) && rng.gen_bool(a);
        if clicked {
            last_click = Some(rank);
        }
        clicks.push(clicked);
    }
    Ok(ClickSession {
        query_id: query_id.to_string(),
        doc_ids: doc_ids.to_vec(),
        clicks,
        latent: None,
    })
}
