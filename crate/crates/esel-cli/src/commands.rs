//! Subcommand implementations.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use esel_core::eval::{
    aggregate, compute_delta, exact_match, extract_math_answer, score_classification,
    score_multichoice, truncate_at_stop, EvalReport, Label,
};
use esel_core::pool::{parse_pool_jsonl, save_pool_binary, ExampleRecord};
use esel_core::prompt::{permute_demos, render_prompt, PromptFamily, PromptTemplate};
use esel_core::provider::{load_mock, CompletionRequest, HttpProvider, Provider, ScoreRequest};
use esel_core::selection::{
    build_div_coreset, select_div, Method, SelectionConfig, SelectionResult,
};
use esel_core::theory::{run_simulation, DistributionKind, SimConfig, SimMethod};
use esel_core::{Error, Pool, Result};

use crate::files;
use crate::{
    DeltaArgs, DistArg, EvalArgs, ExtractorArg, IngestArgs, MethodArg, RenderArgs, SelectArgs,
    SimulateArgs, TaskArg, TemplateArg,
};

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let text = files::read_to_string(&args.input)?;
    let pool = parse_pool_jsonl(&text)?;
    files::ensure_parent_exists(&args.output)?;
    save_pool_binary(&pool, &args.output)?;
    println!(
        "ingested {} records (dim {}) into {}",
        pool.len(),
        pool.dim(),
        args.output
    );
    Ok(())
}

impl MethodArg {
    fn to_method(self) -> Method {
        match self {
            MethodArg::Rand => Method::Rand,
            MethodArg::Topk => Method::TopK,
            MethodArg::Div => Method::Div,
            MethodArg::TopkDiv => Method::TopKDiv,
            MethodArg::Kmeans => Method::KMeans,
        }
    }
}

/// Sidecar written next to div selections: the query-independent coreset.
#[derive(Serialize, Deserialize)]
struct CoresetSidecar {
    method: Method,
    coreset_size: usize,
    seed: u64,
    demo_ids: Vec<String>,
}

pub fn select(args: &SelectArgs) -> Result<()> {
    files::configure_threads(args.threads);
    let demos = files::load_pool_auto(&args.demos)?;
    let queries = files::load_pool_auto(&args.queries)?;
    let method = args.method.to_method();
    let cfg = SelectionConfig::new(method, args.k, args.seed)
        .with_alpha(args.alpha)
        .with_coreset_size(args.coreset_size);
    cfg.validate(demos.len())?;
    files::ensure_parent_exists(&args.output)?;

    // Query-independent work happens once: the div coreset and the k-means
    // representatives are shared across all queries.
    let coreset = if method == Method::Div {
        Some(build_div_coreset(&demos, cfg.coreset_size, cfg.seed)?)
    } else {
        None
    };
    let kmeans_picks = if method == Method::KMeans {
        Some(esel_core::kmeans::kmeans_representatives(
            &demos, cfg.k, cfg.seed,
        )?)
    } else {
        None
    };

    let results: Vec<SelectionResult> = queries
        .records()
        .par_iter()
        .map(|query| {
            if let Some(coreset) = &coreset {
                select_div(&demos, query, &cfg, coreset)
            } else if let Some(picks) = &kmeans_picks {
                esel_core::selection::select_precomputed(&demos, query, &cfg, picks)
            } else {
                esel_core::selection::select(&demos, query, &cfg)
            }
        })
        .collect::<Result<_>>()?;
    files::write_jsonl(&args.output, &results)?;

    if let Some(coreset) = coreset {
        let sidecar = CoresetSidecar {
            method,
            coreset_size: cfg.coreset_size,
            seed: cfg.seed,
            demo_ids: coreset.iter().map(|&i| demos.get(i).id.clone()).collect(),
        };
        files::write_json_pretty(&format!("{}.coreset.json", args.output), &sidecar)?;
    }
    println!(
        "selected {} demos for each of {} queries into {}",
        args.k,
        results.len(),
        args.output
    );
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    files::configure_threads(args.threads);
    let cfg = SimConfig {
        distribution: match args.dist {
            DistArg::Example1 => DistributionKind::Example1,
            DistArg::Example2 => DistributionKind::Example2,
            DistArg::General => DistributionKind::General,
        },
        l: args.l,
        d: args.d,
        k: args.k,
        alpha: args.alpha,
        train_scale: args.train_scale,
        trials: args.trials,
        seeds: args.seeds,
        master_seed: args.seed,
        methods: vec![SimMethod::TopK, SimMethod::TopKDiv],
    };
    let report = run_simulation(&cfg)?;
    print!("{}", report.table());
    // For the enumerable two-shot ground-set setting the disjoint-upper
    // second pick has expected loss exactly 1/12; echo the comparison.
    if cfg.distribution == DistributionKind::Example2 && cfg.k == 2 {
        let reference = 1.0 / 12.0;
        let threshold = 1.0 - 1.0 / cfg.l as f64;
        if let (Some(topk), Some(div)) =
            (report.methods.get("topk"), report.methods.get("topk_div"))
        {
            println!("reference loss for a fully diverse second pick: 1/12 = {reference:.6}");
            println!(
                "alpha {} >= 1 - 1/l = {threshold:.4}: {}",
                cfg.alpha,
                cfg.alpha >= threshold
            );
            println!(
                "loss(topk) {:.6} > loss(topk_div) {:.6}: {}",
                topk.mean_loss,
                div.mean_loss,
                topk.mean_loss > div.mean_loss
            );
        }
    }
    if let Some(path) = &args.output {
        files::ensure_parent_exists(path)?;
        files::write_json_pretty(path, &report)?;
        println!("report written to {path}");
    }
    Ok(())
}

impl TemplateArg {
    fn to_family(self) -> PromptFamily {
        match self {
            TemplateArg::Qa => PromptFamily::Qa,
            TemplateArg::Reading => PromptFamily::Reading,
            TemplateArg::Math => PromptFamily::Math,
        }
    }
}

/// One rendered prompt; carries everything eval needs (the stop strings are
/// re-applied client-side regardless of provider behavior).
#[derive(Serialize, Deserialize)]
pub struct PromptLine {
    pub query_id: String,
    pub prompt: String,
    pub stop: Vec<String>,
    pub template: PromptFamily,
    pub permutation_seed: u64,
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let demos = files::load_pool_auto(&args.demos)?;
    let queries = files::load_pool_auto(&args.queries)?;
    let selections: Vec<SelectionResult> = files::read_jsonl(&args.selections)?;
    let template = PromptTemplate::for_family(args.template.to_family());
    files::ensure_parent_exists(&args.output)?;

    let mut lines = Vec::with_capacity(selections.len());
    for selection in &selections {
        let query = queries.by_id(&selection.query_id).ok_or_else(|| {
            Error::Contract(format!(
                "query \"{}\" from the selections file is not in the query pool",
                selection.query_id
            ))
        })?;
        let demo_refs: Vec<&ExampleRecord> = selection
            .demo_ids
            .iter()
            .map(|id| {
                demos.by_id(id).ok_or_else(|| {
                    Error::Contract(format!("demo \"{id}\" is not in the demo pool"))
                })
            })
            .collect::<Result<_>>()?;
        let ordered = permute_demos(&demo_refs, args.permutation_seed);
        let prompt = render_prompt(&template, &ordered, query)?;
        lines.push(PromptLine {
            query_id: selection.query_id.clone(),
            prompt,
            stop: template.stop.clone(),
            template: template.family,
            permutation_seed: args.permutation_seed,
        });
    }
    files::write_jsonl(&args.output, &lines)?;
    println!("rendered {} prompts into {}", lines.len(), args.output);
    Ok(())
}

/// Precomputed provider outputs: generations or per-completion scores.
#[derive(Deserialize)]
struct PredictionLine {
    query_id: String,
    #[serde(default)]
    generated: Option<String>,
    #[serde(default)]
    scores: Option<BTreeMap<String, f64>>,
}

/// Configuration echoed into the evaluation report.
#[derive(Serialize)]
struct EvalConfigEcho {
    task: String,
    extractor: String,
    positive: String,
    negative: String,
    max_tokens: usize,
    queries: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    prompts: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    predictions: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mock: Option<String>,
}

#[derive(Serialize)]
struct EvalOutput {
    config: EvalConfigEcho,
    #[serde(flatten)]
    report: EvalReport,
}

fn provider_from_args(args: &EvalArgs) -> Result<Option<Box<dyn Provider>>> {
    if let Some(path) = &args.mock {
        return Ok(Some(Box::new(load_mock(path)?)));
    }
    Ok(HttpProvider::from_env()?.map(|p| Box::new(p) as Box<dyn Provider>))
}

fn gold_answers(
    overrides: &Option<BTreeMap<String, Vec<String>>>,
    queries: &Pool,
    query_id: &str,
) -> Result<Vec<String>> {
    if let Some(map) = overrides {
        if let Some(golds) = map.get(query_id) {
            return Ok(golds.clone());
        }
    }
    let record = queries
        .by_id(query_id)
        .ok_or_else(|| Error::Contract(format!("query \"{query_id}\" is not in the query pool")))?;
    match &record.fields.answer {
        Some(answer) => Ok(vec![answer.clone()]),
        None => Err(Error::Contract(format!(
            "no gold answer for query \"{query_id}\": pool record has no answer and no --gold entry"
        ))),
    }
}

fn subgroup_tags(record: &ExampleRecord) -> Vec<String> {
    let mut tags = vec![format!("dataset:{}", record.dataset)];
    if let Some(meta) = &record.meta {
        for (k, v) in meta {
            tags.push(format!("{k}:{v}"));
        }
    }
    tags
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let queries = files::load_pool_auto(&args.queries)?;
    let gold_overrides: Option<BTreeMap<String, Vec<String>>> = match &args.gold {
        Some(path) => Some(
            serde_json::from_str(&files::read_to_string(path)?)
                .map_err(|e| Error::Contract(format!("bad gold file: {e}")))?,
        ),
        None => None,
    };
    let prompts: Vec<PromptLine> = match &args.prompts {
        Some(path) => files::read_jsonl(path)?,
        None => {
            return Err(Error::Contract(
                "--prompts is required (it carries prompt text and stop strings)".into(),
            ))
        }
    };
    let predictions: Option<BTreeMap<String, PredictionLine>> = match &args.predictions {
        Some(path) => {
            let lines: Vec<PredictionLine> = files::read_jsonl(path)?;
            Some(lines.into_iter().map(|p| (p.query_id.clone(), p)).collect())
        }
        None => None,
    };
    let options: Option<BTreeMap<String, Vec<String>>> = match &args.options {
        Some(path) => Some(
            serde_json::from_str(&files::read_to_string(path)?)
                .map_err(|e| Error::Contract(format!("bad options file: {e}")))?,
        ),
        None => None,
    };
    let provider = if predictions.is_none() {
        match provider_from_args(args)? {
            Some(p) => Some(p),
            None => {
                return Err(Error::Contract(
                    "no provider: pass --mock, set MODEL_BASE_URL, or supply --predictions".into(),
                ))
            }
        }
    } else {
        None
    };

    let in_flight = args.threads.unwrap_or(8).max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(in_flight)
        .build()
        .map_err(|e| Error::Provider(e.to_string()))?;

    let outcomes: Vec<(String, bool, Vec<String>)> = pool.install(|| {
        prompts
            .par_iter()
            .map(|line| {
                evaluate_one(
                    args,
                    line,
                    &queries,
                    &gold_overrides,
                    &options,
                    &predictions,
                    &provider,
                )
            })
            .collect::<Result<_>>()
    })?;

    let report = aggregate(&outcomes)?;
    println!("accuracy {:.4} over {} examples", report.accuracy, report.n);
    files::ensure_parent_exists(&args.output)?;
    let output = EvalOutput {
        config: EvalConfigEcho {
            task: task_name(args.task).to_string(),
            extractor: match args.extractor {
                ExtractorArg::Exact => "exact".into(),
                ExtractorArg::Math => "math".into(),
            },
            positive: args.positive.clone(),
            negative: args.negative.clone(),
            max_tokens: args.max_tokens,
            queries: args.queries.clone(),
            prompts: args.prompts.clone(),
            predictions: args.predictions.clone(),
            mock: args.mock.clone(),
        },
        report,
    };
    files::write_json_pretty(&args.output, &output)?;
    Ok(())
}

fn task_name(task: TaskArg) -> &'static str {
    match task {
        TaskArg::Generation => "generation",
        TaskArg::Classification => "classification",
        TaskArg::Multichoice => "multichoice",
    }
}

fn evaluate_one(
    args: &EvalArgs,
    line: &PromptLine,
    queries: &Pool,
    gold_overrides: &Option<BTreeMap<String, Vec<String>>>,
    options: &Option<BTreeMap<String, Vec<String>>>,
    predictions: &Option<BTreeMap<String, PredictionLine>>,
    provider: &Option<Box<dyn Provider>>,
) -> Result<(String, bool, Vec<String>)> {
    let record = queries.by_id(&line.query_id).ok_or_else(|| {
        Error::Contract(format!(
            "query \"{}\" is not in the query pool",
            line.query_id
        ))
    })?;
    let golds = gold_answers(gold_overrides, queries, &line.query_id)?;
    let correct = match args.task {
        TaskArg::Generation => {
            let generated = match predictions {
                Some(map) => map
                    .get(&line.query_id)
                    .and_then(|p| p.generated.clone())
                    .ok_or_else(|| {
                        Error::Contract(format!(
                            "no generated prediction for query \"{}\"",
                            line.query_id
                        ))
                    })?,
                None => {
                    let provider = provider.as_ref().expect("provider present");
                    provider.complete(&CompletionRequest::greedy(
                        line.prompt.clone(),
                        args.max_tokens,
                        line.stop.clone(),
                    ))?
                }
            };
            let truncated = truncate_at_stop(&generated, &line.stop);
            let prediction = match args.extractor {
                ExtractorArg::Exact => truncated.trim().to_string(),
                ExtractorArg::Math => extract_math_answer(truncated).unwrap_or_default(),
            };
            exact_match(&prediction, &golds)?
        }
        TaskArg::Classification => {
            let (pos, neg) = match predictions {
                Some(map) => {
                    let scores = map
                        .get(&line.query_id)
                        .and_then(|p| p.scores.as_ref())
                        .ok_or_else(|| {
                            Error::Contract(format!("no scores for query \"{}\"", line.query_id))
                        })?;
                    let fetch = |key: &str| {
                        scores.get(key).copied().ok_or_else(|| {
                            Error::Contract(format!(
                                "missing score for verbalizer \"{key}\" on query \"{}\"",
                                line.query_id
                            ))
                        })
                    };
                    (fetch(&args.positive)?, fetch(&args.negative)?)
                }
                None => {
                    let provider = provider.as_ref().expect("provider present");
                    let score = |completion: &str| {
                        provider.score(&ScoreRequest {
                            prompt: line.prompt.clone(),
                            completion: completion.to_string(),
                        })
                    };
                    (score(&args.positive)?, score(&args.negative)?)
                }
            };
            let chosen = match score_classification(pos, neg)? {
                Label::Positive => &args.positive,
                Label::Negative => &args.negative,
            };
            exact_match(chosen, &golds)?
        }
        TaskArg::Multichoice => {
            let options = multichoice_options(options, &line.query_id)?;
            let scored: Vec<(String, f64)> = match predictions {
                Some(map) => {
                    let scores = map
                        .get(&line.query_id)
                        .and_then(|p| p.scores.as_ref())
                        .ok_or_else(|| {
                            Error::Contract(format!("no scores for query \"{}\"", line.query_id))
                        })?;
                    options
                        .iter()
                        .map(|o| {
                            scores
                                .get(o)
                                .copied()
                                .map(|s| (o.clone(), s))
                                .ok_or_else(|| {
                                    Error::Contract(format!(
                                        "missing score for option \"{o}\" on query \"{}\"",
                                        line.query_id
                                    ))
                                })
                        })
                        .collect::<Result<_>>()?
                }
                None => {
                    let provider = provider.as_ref().expect("provider present");
                    options
                        .iter()
                        .map(|o| {
                            provider
                                .score(&ScoreRequest {
                                    prompt: line.prompt.clone(),
                                    completion: o.clone(),
                                })
                                .map(|s| (o.clone(), s))
                        })
                        .collect::<Result<_>>()?
                }
            };
            let winner = score_multichoice(&scored)?;
            exact_match(&scored[winner].0, &golds)?
        }
    };
    Ok((line.query_id.clone(), correct, subgroup_tags(record)))
}

fn multichoice_options(
    options: &Option<BTreeMap<String, Vec<String>>>,
    query_id: &str,
) -> Result<Vec<String>> {
    let map = options
        .as_ref()
        .ok_or_else(|| Error::Contract("multichoice evaluation requires --options".into()))?;
    map.get(query_id)
        .cloned()
        .ok_or_else(|| Error::Contract(format!("no options listed for query \"{query_id}\"")))
}

#[derive(Serialize)]
struct DeltaOutput {
    delta: f64,
    grid: BTreeMap<String, f64>,
}

pub fn report_delta(args: &DeltaArgs) -> Result<()> {
    let grid: BTreeMap<String, f64> = serde_json::from_str(&files::read_to_string(&args.grid)?)
        .map_err(|e| Error::Contract(format!("bad grid file: {e}")))?;
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .map(|(k, &v)| {
            k.parse::<f64>()
                .map(|alpha| (alpha, v))
                .map_err(|_| Error::Contract(format!("grid key \"{k}\" is not a number")))
        })
        .collect::<Result<_>>()?;
    let delta = compute_delta(&pairs)?;
    println!("delta {delta:+.6}");
    if let Some(path) = &args.output {
        files::ensure_parent_exists(path)?;
        files::write_json_pretty(path, &DeltaOutput { delta, grid })?;
    }
    Ok(())
}
