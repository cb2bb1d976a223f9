//! Dynamic Bayesian network click model: sequential examination with
//! per-pair attractiveness and satisfaction plus a scalar persistence.
//!
//! Inference runs an exact forward-backward pass over the binary
//! "still examining" state of each session, so the EM updates are exact and
//! the penalized objective is guaranteed non-decreasing.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::ClickSession;

use super::{warn_sparse_pairs, ClickModelError, ClickModelPrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbnParams {
    /// attractiveness[qid][doc_id]: click probability when examined.
    pub attractiveness: BTreeMap<String, BTreeMap<String, f64>>,
    /// satisfaction[qid][doc_id]: probability a click ends the session.
    pub satisfaction: BTreeMap<String, BTreeMap<String, f64>>,
    /// Probability of continuing to the next position when not satisfied.
    pub persistence: f64,
}

impl DbnParams {
    pub fn empty(persistence: f64) -> Self {
        DbnParams {
            attractiveness: BTreeMap::new(),
            satisfaction: BTreeMap::new(),
            persistence,
        }
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, attractiveness: f64, satisfaction: f64) {
        self.attractiveness
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), attractiveness);
        self.satisfaction
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), satisfaction);
    }

    pub fn attractiveness_of(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.attractiveness.get(query_id)?.get(doc_id).copied()
    }

    pub fn satisfaction_of(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        self.satisfaction.get(query_id)?.get(doc_id).copied()
    }

    /// Probability that a click on the pair satisfies the user: `a * s`.
    pub fn relevance_of(&self, query_id: &str, doc_id: &str) -> Option<f64> {
        Some(self.attractiveness_of(query_id, doc_id)? * self.satisfaction_of(query_id, doc_id)?)
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DbnFit {
    pub params: DbnParams,
    pub objective_trace: Vec<f64>,
    pub log_likelihood_trace: Vec<f64>,
}

struct Index {
    pairs: BTreeMap<(String, String), usize>,
    clicked: Vec<bool>,
}

fn build_index(sessions: &[ClickSession]) -> Result<Index, ClickModelError> {
    if sessions.is_empty() {
        return Err(ClickModelError::EmptySessions);
    }
    let mut counts: BTreeMap<(String, String), usize> = BTreeMap::new();
    for session in sessions {
        for doc_id in &session.doc_ids {
            *counts
                .entry((session.query_id.clone(), doc_id.clone()))
                .or_insert(0) += 1;
        }
    }
    warn_sparse_pairs(&counts);
    let pairs: BTreeMap<(String, String), usize> = counts
        .keys()
        .cloned()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let mut clicked = vec![false; pairs.len()];
    for session in sessions {
        for (i, doc_id) in session.doc_ids.iter().enumerate() {
            if session.clicks[i] {
                clicked[pairs[&(session.query_id.clone(), doc_id.clone())]] = true;
            }
        }
    }
    Ok(Index { pairs, clicked })
}

struct Stats {
    attr_succ: Vec<f64>,
    attr_trials: Vec<f64>,
    sat_succ: Vec<f64>,
    sat_trials: Vec<f64>,
    cont_succ: f64,
    cont_trials: f64,
    log_likelihood: f64,
}

impl Stats {
    fn zeros(pairs: usize) -> Self {
        Stats {
            attr_succ: vec![0.0; pairs],
            attr_trials: vec![0.0; pairs],
            sat_succ: vec![0.0; pairs],
            sat_trials: vec![0.0; pairs],
            cont_succ: 0.0,
            cont_trials: 0.0,
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
        for (a, b) in self.sat_succ.iter_mut().zip(&other.sat_succ) {
            *a += b;
        }
        for (a, b) in self.sat_trials.iter_mut().zip(&other.sat_trials) {
            *a += b;
        }
        self.cont_succ += other.cont_succ;
        self.cont_trials += other.cont_trials;
        self.log_likelihood += other.log_likelihood;
    }
}

/// Forward-backward over one session. Returns the session log-likelihood and
/// accumulates expected counts.
fn session_pass(
    session: &ClickSession,
    index: &Index,
    attr: &[f64],
    sat: &[f64],
    gamma: f64,
    stats: &mut Stats,
) {
    let n = session.len();
    let pair_ids: Vec<usize> = session
        .doc_ids
        .iter()
        .map(|d| index.pairs[&(session.query_id.clone(), d.clone())])
        .collect();
    let a: Vec<f64> = pair_ids.iter().map(|&p| attr[p]).collect();
    let s: Vec<f64> = pair_ids.iter().map(|&p| sat[p]).collect();
    let c = &session.clicks;

    // emit[i][x]: probability of the observed click bit given examining = x.
    let emit = |i: usize, x: usize| -> f64 {
        if x == 1 {
            if c[i] {
                a[i]
            } else {
                1.0 - a[i]
            }
        } else if c[i] {
            0.0
        } else {
            1.0
        }
    };
    // Probability of still examining after position i.
    let cont = |i: usize| -> f64 {
        if c[i] {
            gamma * (1.0 - s[i])
        } else {
            gamma
        }
    };

    let mut alpha = vec![[0.0f64; 2]; n];
    alpha[0] = [0.0, 1.0];
    for i in 0..n - 1 {
        let stay = alpha[i][1] * emit(i, 1);
        alpha[i + 1][1] = stay * cont(i);
        alpha[i + 1][0] = stay * (1.0 - cont(i)) + alpha[i][0] * emit(i, 0);
    }
    let likelihood = alpha[n - 1][1] * emit(n - 1, 1) + alpha[n - 1][0] * emit(n - 1, 0);
    stats.log_likelihood += likelihood.ln();

    let mut beta = vec![[0.0f64; 2]; n];
    beta[n - 1] = [emit(n - 1, 0), emit(n - 1, 1)];
    for i in (0..n - 1).rev() {
        beta[i][1] = emit(i, 1) * (cont(i) * beta[i + 1][1] + (1.0 - cont(i)) * beta[i + 1][0]);
        beta[i][0] = emit(i, 0) * beta[i + 1][0];
    }

    let exam: Vec<f64> = (0..n).map(|i| alpha[i][1] * beta[i][1] / likelihood).collect();

    // Suffix survival: probability of observing no clicks after i given the
    // user was not satisfied at i. Drives the satisfaction posterior of the
    // last clicked position.
    let mut suffix = vec![1.0f64; n];
    for i in (0..n - 1).rev() {
        suffix[i] = (1.0 - gamma) + gamma * (1.0 - a[i + 1]) * suffix[i + 1];
    }
    let last_click = (0..n).rev().find(|&i| c[i]);

    let mut sat_post = vec![0.0f64; n];
    if let Some(l) = last_click {
        sat_post[l] = s[l] / (s[l] + (1.0 - s[l]) * suffix[l]);
    }

    for i in 0..n {
        let pair = pair_ids[i];
        stats.attr_trials[pair] += 1.0;
        if c[i] {
            stats.attr_succ[pair] += 1.0;
            stats.sat_trials[pair] += 1.0;
            stats.sat_succ[pair] += sat_post[i];
        } else {
            // Examined without click forces attraction 0; unexamined
            // positions fall back on the current estimate.
            stats.attr_succ[pair] += (1.0 - exam[i]) * a[i];
        }
        if i + 1 < n {
            let not_satisfied = exam[i] - sat_post[i];
            stats.cont_trials += not_satisfied;
            stats.cont_succ += exam[i + 1];
        }
    }
}

/// Fit DBN by EM; persistence is estimated jointly with the per-pair tables.
/// Zero iterations return the prior unchanged.
pub fn dbn_fit(
    sessions: &[ClickSession],
    iterations: usize,
    prior: &ClickModelPrior,
) -> Result<DbnFit, ClickModelError> {
    prior.validate()?;
    let index = build_index(sessions)?;
    let mut attr = vec![prior.attractiveness; index.pairs.len()];
    let mut sat = vec![prior.satisfaction; index.pairs.len()];
    let mut gamma = prior.persistence;

    let penalized = |log_likelihood: f64, attr: &[f64], sat: &[f64], gamma: f64| -> f64 {
        let mut objective = log_likelihood + prior.log_prior(gamma);
        for a in attr {
            objective += prior.log_prior(*a);
        }
        for (s, clicked) in sat.iter().zip(&index.clicked) {
            if *clicked {
                objective += prior.log_prior(*s);
            }
        }
        objective
    };

    let expectation = |attr: &[f64], sat: &[f64], gamma: f64| -> Stats {
        use rayon::prelude::*;
        let chunk_stats: Vec<Stats> = sessions
            .par_chunks(1024)
            .map(|chunk| {
                let mut stats = Stats::zeros(index.pairs.len());
                for session in chunk {
                    session_pass(session, &index, attr, sat, gamma, &mut stats);
                }
                stats
            })
            .collect();
        let mut total = Stats::zeros(index.pairs.len());
        for stats in &chunk_stats {
            total.merge(stats);
        }
        total
    };

    let mut objective_trace = Vec::with_capacity(iterations + 1);
    let mut log_likelihood_trace = Vec::with_capacity(iterations + 1);
    for _ in 0..iterations {
        let stats = expectation(&attr, &sat, gamma);
        objective_trace.push(penalized(stats.log_likelihood, &attr, &sat, gamma));
        log_likelihood_trace.push(stats.log_likelihood);
        for i in 0..attr.len() {
            attr[i] = prior.update(stats.attr_succ[i], stats.attr_trials[i]);
            if index.clicked[i] {
                sat[i] = prior.update(stats.sat_succ[i], stats.sat_trials[i]);
            }
        }
        gamma = prior.update(stats.cont_succ, stats.cont_trials);
    }
    let final_stats = expectation(&attr, &sat, gamma);
    objective_trace.push(penalized(final_stats.log_likelihood, &attr, &sat, gamma));
    log_likelihood_trace.push(final_stats.log_likelihood);

    let mut params = DbnParams::empty(gamma);
    for ((qid, doc), idx) in &index.pairs {
        params.insert(qid, doc, attr[*idx], sat[*idx]);
    }
    Ok(DbnFit {
        params,
        objective_trace,
        log_likelihood_trace,
    })
}

/// Sample one session from known DBN parameters.
pub fn simulate_dbn_session(
    params: &DbnParams,
    query_id: &str,
    doc_ids: &[String],
    rng: &mut ChaCha8Rng,
) -> Result<ClickSession, ClickModelError> {
    let mut clicks = Vec::with_capacity(doc_ids.len());
    let mut examining = true;
    for (i, doc_id) in doc_ids.iter().enumerate() {
        if !examining {
            clicks.push(false);
            continue;
        }
        let a = params
            .attractiveness_of(query_id, doc_id)
            .ok_or_else(|| ClickModelError::UnknownPair {
                query_id: query_id.to_string(),
                doc_id: doc_id.clone(),
            })?;
        let s = params
            .satisfaction_of(query_id, doc_id)
            .expect("satisfaction present whenever attractiveness is");
        let clicked = rng.gen_bool(a);
        clicks.push(clicked);
        if i + 1 < doc_ids.len() {
            let satisfied = clicked && rng.gen_bool(s);
            examining = !satisfied && rng.gen_bool(params.persistence);
        }
    }
    Ok(ClickSession {
        query_id: query_id.to_string(),
        doc_ids: doc_ids.to_vec(),
        clicks,
        latent: None,
    })
}
