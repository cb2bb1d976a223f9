//! End-to-end experiment pipeline: initial ranker on a label fraction,
//! ranked-list construction, on-the-fly click training for the configured
//! method, and held-out evaluation against judged labels.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clicksim::{sample_session, shuffle_list, ClickSimConfig, PropensityAccumulator};
use crate::clickmodels::{
    dbn_fit, extract_relevance, ubm_fit, ClickModelParams, ClickModelPrior, RelevanceSignal,
};
use crate::dataset::{
    generate_synthetic, parse_letor, ClickSession, Dataset, Query, RankedList, Split,
    SyntheticConfig,
};
use crate::dla::{
    dla_train, ClickSource, FixedSignalClicks, RankedQuery, SimulatedClicks, TrainConfig,
    TrainMode, TrainedPair,
};
use crate::eval::{evaluate_ranker, propensity_mse, MetricsReport, MetricsSpec};
use crate::models::{save_checkpoint, PropensityParams, RankerArch, RankerParams};
use crate::rng::{derive_rng, derive_seed, stream};

use super::config::{DataConfig, ExperimentConfig, MethodConfig};

/// Pipeline stage used to tag failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    DataLoad,
    InitialRanker,
    Randomization,
    ClickModel,
    Training,
    Evaluation,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::DataLoad => "data_load",
            Stage::InitialRanker => "initial_ranker",
            Stage::Randomization => "randomization",
            Stage::ClickModel => "click_model",
            Stage::Training => "training",
            Stage::Evaluation => "evaluation",
            Stage::Output => "output",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {message}")]
pub struct ExperimentError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> ExperimentError {
    move |e| ExperimentError {
        stage,
        message: e.to_string(),
    }
}

/// Everything a finished run produces in memory; the same content is written
/// to the output directory.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub report: MetricsReport,
    pub initial_report: MetricsReport,
    /// Estimated inverse propensity weights, present for methods that
    /// estimate them (DLA and RandList).
    pub estimated_weights: Option<Vec<f64>>,
    pub trained: TrainedPair,
}

/// The on-disk `report.json` document: the exact resolved config plus results.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub method: String,
    pub report: MetricsReport,
    pub initial_ranker: MetricsReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_weights: Option<Vec<f64>>,
}

struct LoadedData {
    train: Dataset,
    test: Dataset,
}

fn load_data(config: &ExperimentConfig) -> Result<LoadedData, ExperimentError> {
    match &config.data {
        DataConfig::Synthetic(spec) => {
            let mut base = SyntheticConfig::new(
                spec.train_queries,
                spec.docs_per_query,
                spec.feature_dim,
                spec.y_max,
                config.seed,
            );
            base.noise_std = spec.noise_std;
            let mut train_cfg = base.clone();
            train_cfg.split = Split::Train;
            train_cfg.stream = 0;
            let mut test_cfg = base;
            test_cfg.n_queries = spec.test_queries;
            test_cfg.split = Split::Test;
            test_cfg.stream = 2;
            Ok(LoadedData {
                train: generate_synthetic(&train_cfg).map_err(at(Stage::DataLoad))?,
                test: generate_synthetic(&test_cfg).map_err(at(Stage::DataLoad))?,
            })
        }
        DataConfig::Letor(spec) => {
            let read = |path: &Path, split: Split| -> Result<Dataset, ExperimentError> {
                let file = fs::File::open(path).map_err(|e| ExperimentError {
                    stage: Stage::DataLoad,
                    message: format!("{}: {e}", path.display()),
                })?;
                let mut ds = parse_letor(std::io::BufReader::new(file), spec.y_max)
                    .map_err(at(Stage::DataLoad))?;
                ds.split = split;
                Ok(ds)
            };
            let train = read(&spec.train_path, Split::Train)?;
            let test = read(&spec.test_path, Split::Test)?;
            if train.feature_dim != test.feature_dim {
                return Err(ExperimentError {
                    stage: Stage::DataLoad,
                    message: format!(
                        "train feature dimension {} != test feature dimension {}",
                        train.feature_dim, test.feature_dim
                    ),
                });
            }
            Ok(LoadedData { train, test })
        }
    }
}

/// Deterministically pick `ceil(fraction * n)` training queries for the
/// initial ranker.
fn label_fraction_subset(dataset: &Dataset, fraction: f64, seed: u64) -> Vec<Query> {
    use rand::seq::SliceRandom;
    let mut indices: Vec<usize> = (0..dataset.queries.len()).collect();
    let mut rng = derive_rng(seed, stream::SUBSET, 0);
    indices.shuffle(&mut rng);
    let take = ((fraction * dataset.queries.len() as f64).ceil() as usize)
        .clamp(1, dataset.queries.len());
    let mut picked: Vec<usize> = indices.into_iter().take(take).collect();
    picked.sort_unstable();
    picked.into_iter().map(|i| dataset.queries[i].clone()).collect()
}

fn full_order_corpus(queries: &[Query]) -> Result<Vec<RankedQuery>, ExperimentError> {
    queries
        .iter()
        .map(|q| {
            let ids: Vec<String> = q.documents.iter().map(|d| d.doc_id.clone()).collect();
            let list = RankedList::from_ranking(q, &ids, ids.len())
                .map_err(at(Stage::InitialRanker))?;
            RankedQuery::from_list(q, &list).map_err(at(Stage::InitialRanker))
        })
        .collect()
}

fn train_initial_ranker(
    config: &ExperimentConfig,
    train: &Dataset,
) -> Result<RankerParams, ExperimentError> {
    let spec = &config.initial_ranker;
    let subset = label_fraction_subset(train, spec.fraction, config.seed);
    let corpus = full_order_corpus(&subset)?;
    let arch = RankerArch::mlp(train.feature_dim, spec.hidden.clone());
    let init = RankerParams::seeded(arch, derive_seed(config.seed, stream::MODEL_INIT, 1));
    let train_config = TrainConfig::new(
        TrainMode::Oracle,
        spec.learning_rate,
        spec.batch_size,
        spec.total_steps,
        derive_seed(config.seed, stream::INITIAL_RANKER, 0),
    );
    // Oracle mode never consults the click source.
    struct Unused;
    impl ClickSource for Unused {
        fn sample(&self, query: &RankedQuery, _rng: &mut rand_chacha::ChaCha8Rng) -> Vec<f64> {
            vec![0.0; query.len()]
        }
    }
    let pair = dla_train(&corpus, &Unused, init, PropensityParams::zeros(1024), &train_config)
        .map_err(at(Stage::InitialRanker))?;
    Ok(pair.ranker)
}

/// Rank every training query with the initial ranker and gather the truncated
/// presentation lists the click models act on.
fn build_presented_corpus(
    train: &Dataset,
    initial: &RankerParams,
    max_rank: usize,
) -> Result<Vec<RankedQuery>, ExperimentError> {
    train
        .queries
        .iter()
        .map(|q| {
            let features: Vec<Vec<f64>> = q.documents.iter().map(|d| d.features.clone()).collect();
            let scores =
                crate::models::score_documents(initial, &features).map_err(at(Stage::Training))?;
            let list = RankedList::by_scores(q, &scores, max_rank).map_err(at(Stage::Training))?;
            RankedQuery::from_list(q, &list).map_err(at(Stage::Training))
        })
        .collect()
}

/// Estimate inverse propensity weights from shuffled sessions over the
/// presented lists.
fn randomization_estimate(
    corpus: &[RankedQuery],
    sim: &ClickSimConfig,
    sessions: usize,
    seed: u64,
) -> Result<Vec<f64>, ExperimentError> {
    if corpus.is_empty() || sessions == 0 {
        return Err(ExperimentError {
            stage: Stage::Randomization,
            message: "randomization requires a corpus and a positive session count".into(),
        });
    }
    let mut acc = PropensityAccumulator::new();
    for i in 0..sessions {
        let query = &corpus[i % corpus.len()];
        let mut rng = derive_rng(seed, stream::RANDOMIZATION, i as u64);
        let shuffled = shuffle_list(&query.ranked_list(), &mut rng);
        let labels: Vec<u32> = shuffled
            .doc_ids
            .iter()
            .map(|d| {
                let idx = query.doc_ids.iter().position(|x| x == d).expect("own doc");
                query.labels[idx]
            })
            .collect();
        let session =
            sample_session(&shuffled, &labels, sim, &mut rng).map_err(at(Stage::Randomization))?;
        acc.add_session(&session);
    }
    Ok(acc.finish().map_err(at(Stage::Randomization))?.weights)
}

/// Simulate a fixed click log over the presented lists for click-model
/// fitting, `per_query` sessions each.
fn simulate_fixed_log(
    corpus: &[RankedQuery],
    sim: &ClickSimConfig,
    per_query: usize,
    seed: u64,
) -> Result<Vec<ClickSession>, ExperimentError> {
    let mut log = Vec::with_capacity(corpus.len() * per_query);
    for (qi, query) in corpus.iter().enumerate() {
        for s in 0..per_query {
            let mut rng = derive_rng(seed, stream::CLICK_LOG, (qi * per_query + s) as u64);
            let session = sample_session(&query.ranked_list(), &query.labels, sim, &mut rng)
                .map_err(at(Stage::ClickModel))?;
            log.push(session.without_latent());
        }
    }
    Ok(log)
}

fn signals_as_source(signal: RelevanceSignal) -> FixedSignalClicks {
    FixedSignalClicks {
        signals: signal.values,
    }
}

/// Run the full pipeline and write all artifacts into the config's output
/// directory. Any stage failure aborts with a stage-tagged error and marks
/// the directory incomplete.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let mut config = config.clone();
    config.resolve().map_err(at(Stage::DataLoad))?;
    fs::create_dir_all(&config.output_dir).map_err(at(Stage::Output))?;
    match run_pipeline(&config) {
        Ok(outcome) => {
            write_artifacts(&outcome)?;
            Ok(outcome)
        }
        Err(err) => {
            let status = serde_json::json!({
                "status": "incomplete",
                "stage": err.stage.to_string(),
                "error": err.message,
            });
            // Best effort: the run already failed.
            let _ = fs::write(
                config.output_dir.join("status.json"),
                serde_json::to_string_pretty(&status).expect("status serializes"),
            );
            Err(err)
        }
    }
}

fn run_pipeline(config: &ExperimentConfig) -> Result<ExperimentOutcome, ExperimentError> {
    let data = load_data(config)?;
    let y_max = data.train.y_max;
    let max_rank = config.click_sim.max_rank;
    let sim = config
        .click_sim
        .resolve(y_max, config.seed)
        .map_err(at(Stage::Training))?;

    let initial = train_initial_ranker(config, &data.train)?;
    let corpus = build_presented_corpus(&data.train, &initial, max_rank)?;

    // Method dispatch: every branch produces trained parameters plus the
    // estimated inverse weights where the method has any.
    let arch = RankerArch::mlp(data.train.feature_dim, config.train.hidden.clone());
    let ranker_init =
        RankerParams::seeded(arch, derive_seed(config.seed, stream::MODEL_INIT, 2));
    let train_seed = derive_seed(config.seed, stream::TRAINING, 0);
    let base_train = |mode: TrainMode| {
        let mut tc = TrainConfig::new(
            mode,
            config.train.learning_rate,
            config.train.batch_size,
            config.train.total_steps,
            train_seed,
        );
        tc.weight_clip = config.train.weight_clip;
        tc
    };
    let simulated = SimulatedClicks { config: sim.clone() };

    let (trained, estimated_weights) = match &config.method {
        MethodConfig::Dla => {
            let pair = dla_train(
                &corpus,
                &simulated,
                ranker_init,
                PropensityParams::zeros(max_rank),
                &base_train(TrainMode::Dla),
            )
            .map_err(at(Stage::Training))?;
            let weights = pair.propensity.inverse_weights();
            (pair, Some(weights))
        }
        MethodConfig::NoCorrect => {
            let pair = dla_train(
                &corpus,
                &simulated,
                ranker_init,
                PropensityParams::zeros(max_rank),
                &base_train(TrainMode::NoCorrect),
            )
            .map_err(at(Stage::Training))?;
            (pair, None)
        }
        MethodConfig::Oracle => {
            let pair = dla_train(
                &corpus,
                &simulated,
                ranker_init,
                PropensityParams::zeros(max_rank),
                &base_train(TrainMode::Oracle),
            )
            .map_err(at(Stage::Training))?;
            (pair, None)
        }
        MethodConfig::RandList {
            sessions,
            estimation_eta,
        } => {
            let estimation_sim = config
                .click_sim
                .resolve_with_eta(
                    estimation_eta.unwrap_or(config.click_sim.eta),
                    y_max,
                    config.seed,
                )
                .map_err(at(Stage::Randomization))?;
            let weights = randomization_estimate(&corpus, &estimation_sim, *sessions, config.seed)?;
            let pair = dla_train(
                &corpus,
                &simulated,
                ranker_init,
                PropensityParams::zeros(max_rank),
                &base_train(TrainMode::FixedWeights(weights.clone())),
            )
            .map_err(at(Stage::Training))?;
            (pair, Some(weights))
        }
        MethodConfig::Ubm {
            iterations,
            sessions_per_query,
        } => {
            let log = simulate_fixed_log(&corpus, &sim, *sessions_per_query, config.seed)?;
            let fit = ubm_fit(&log, *iterations, &ClickModelPrior::default())
                .map_err(at(Stage::ClickModel))?;
            let signal = extract_relevance(&ClickModelParams::Ubm(fit.params), &log)
                .map_err(at(Stage::ClickModel))?;
            let pair = dla_train(
                &corpus,
                &signals_as_source(signal),
                ranker_init,
                PropensityParams::zeros(max_rank),
                &base_train(TrainMode::NoCorrect),
            )
            .map_err(at(Stage::Training))?;
            (pair, None)
        }
        MethodConfig::Dbn {
            iterations,
            sessions_per_query,
        } => {
            let log = simulate_fixed_log(&corpus, &sim, *sessions_per_query, config.seed)?;
            let fit = dbn_fit(&log, *iterations, &ClickModelPrior::default())
                .map_err(at(Stage::ClickModel))?;
            let signal = extract_relevance(&ClickModelParams::Dbn(fit.params), &log)
                .map_err(at(Stage::ClickModel))?;
            let pair = dla_train(
                &corpus,
                &signals_as_source(signal),
                ranker_init,
                PropensityParams::zeros(max_rank),
                &base_train(TrainMode::NoCorrect),
            )
            .map_err(at(Stage::Training))?;
            (pair, None)
        }
    };

    let spec = MetricsSpec {
        ndcg_ks: config.metrics.ndcg_ks.clone(),
        err_ks: config.metrics.err_ks.clone(),
        map_threshold: config.metrics.map_threshold,
        y_max,
    };
    let mut report =
        evaluate_ranker(&data.test.queries, &trained.ranker, &spec).map_err(at(Stage::Evaluation))?;
    let initial_report =
        evaluate_ranker(&data.test.queries, &initial, &spec).map_err(at(Stage::Evaluation))?;

    if let Some(weights) = &estimated_weights {
        // Propensity quality is judged against the training-time truth.
        let rho = config.click_sim.rho.as_ref().expect("resolved");
        let n = weights.len().min(rho.len());
        report.propensity_mse = Some(
            propensity_mse(&weights[..n], &rho[..n], config.click_sim.eta)
                .map_err(at(Stage::Evaluation))?,
        );
    }

    Ok(ExperimentOutcome {
        config: config.clone(),
        report,
        initial_report,
        estimated_weights,
        trained,
    })
}

fn write_artifacts(outcome: &ExperimentOutcome) -> Result<(), ExperimentError> {
    let dir = &outcome.config.output_dir;
    let write = |name: &str, content: &str| -> Result<(), ExperimentError> {
        fs::write(dir.join(name), content).map_err(at(Stage::Output))
    };

    write(
        "config.resolved.json",
        &outcome.config.to_resolved_json().map_err(at(Stage::Output))?,
    )?;
    write("report.csv", &outcome.report.to_csv())?;
    let run_report = RunReport {
        config: outcome.config.clone(),
        method: outcome.config.method.name().to_string(),
        report: outcome.report.clone(),
        initial_ranker: outcome.initial_report.clone(),
        estimated_weights: outcome.estimated_weights.clone(),
    };
    write(
        "report.json",
        &serde_json::to_string_pretty(&run_report).map_err(at(Stage::Output))?,
    )?;
    write("loss_trace.csv", &outcome.trained.loss_trace_csv())?;
    save_checkpoint(
        &dir.join("checkpoint.json"),
        &outcome.trained.ranker,
        &outcome.trained.propensity,
    )
    .map_err(at(Stage::Output))?;

    if let Some(weights) = &outcome.estimated_weights {
        let rho = outcome.config.click_sim.rho.as_ref().expect("resolved");
        let eta = outcome.config.click_sim.eta;
        let mut csv = String::from("position,estimated_weight,true_weight\n");
        for (i, w) in weights.iter().enumerate() {
            let truth = rho
                .get(i)
                .map(|r| rho[0].powf(eta) / r.powf(eta))
                .map(|t| t.to_string())
                .unwrap_or_default();
            csv.push_str(&format!("{},{w},{truth}\n", i + 1));
        }
        write("propensity_weights.csv", &csv)?;
    }
    write("status.json", "{\n  \"status\": \"complete\"\n}\n")?;
    Ok(())
}

/// Evaluate a stored checkpoint on the configured test split.
pub fn evaluate_checkpoint(
    config: &ExperimentConfig,
    checkpoint: &Path,
) -> Result<MetricsReport, ExperimentError> {
    let mut config = config.clone();
    config.resolve().map_err(at(Stage::DataLoad))?;
    let data = load_data(&config)?;
    let (ranker, _) = crate::models::load_checkpoint(checkpoint).map_err(at(Stage::Evaluation))?;
    let spec = MetricsSpec {
        ndcg_ks: config.metrics.ndcg_ks.clone(),
        err_ks: config.metrics.err_ks.clone(),
        map_threshold: config.metrics.map_threshold,
        y_max: data.test.y_max,
    };
    evaluate_ranker(&data.test.queries, &ranker, &spec).map_err(at(Stage::Evaluation))
}

/// Emit a click log over the presented lists of the configured corpus:
/// `sessions` impressions spread round-robin over training queries.
pub fn simulate_click_log<W: Write>(
    config: &ExperimentConfig,
    sessions: usize,
    include_latent: bool,
    writer: W,
) -> Result<usize, ExperimentError> {
    let mut config = config.clone();
    config.resolve().map_err(at(Stage::DataLoad))?;
    let data = load_data(&config)?;
    let sim = config
        .click_sim
        .resolve(data.train.y_max, config.seed)
        .map_err(at(Stage::Training))?;
    let initial = train_initial_ranker(&config, &data.train)?;
    let corpus = build_presented_corpus(&data.train, &initial, config.click_sim.max_rank)?;
    let mut writer = writer;
    let mut written = 0usize;
    for i in 0..sessions {
        let query = &corpus[i % corpus.len()];
        let mut rng = derive_rng(config.seed, stream::CLICK_LOG, i as u64);
        let session = sample_session(&query.ranked_list(), &query.labels, &sim, &mut rng)
            .map_err(at(Stage::Training))?;
        crate::dataset::write_click_log([&session], &mut writer, include_latent)
            .map_err(at(Stage::Output))?;
        written += 1;
    }
    Ok(written)
}
