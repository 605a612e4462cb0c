//! Demonstration selection strategies.
//!
//! Five methods over a pool of embedded demonstrations:
//!
//! * `rand` — uniform sample without replacement, query-independent.
//! * `topk` — the K demos most cosine-similar to the query.
//! * `div` — topk restricted to a precomputed diversity-greedy coreset.
//! * `topk-div` — greedy trade-off `alpha * sim + (1 - alpha) * diversity`.
//! * `kmeans` — one representative per cluster (see [`crate::kmeans`]).
//!
//! Ties are always broken by lowest pool index; randomness is confined to the
//! seeded draws (`rand`, the coreset's first element, k-means seeding), so
//! every method is deterministic given (pool, query, config, seed). Scores
//! are computed in double precision regardless of stored embedding precision.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::pool::{ExampleRecord, Pool};
use crate::rng::rng_from;
use crate::similarity::{cosine_similarity, set_diversity};
use crate::{Error, Real, Result};

/// Selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "rand")]
    Rand,
    #[serde(rename = "topk")]
    TopK,
    #[serde(rename = "div")]
    Div,
    #[serde(rename = "topk-div")]
    TopKDiv,
    #[serde(rename = "kmeans")]
    KMeans,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rand => "rand",
            Method::TopK => "topk",
            Method::Div => "div",
            Method::TopKDiv => "topk-div",
            Method::KMeans => "kmeans",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rand" => Ok(Method::Rand),
            "topk" => Ok(Method::TopK),
            "div" => Ok(Method::Div),
            "topk-div" | "topk_div" => Ok(Method::TopKDiv),
            "kmeans" => Ok(Method::KMeans),
            other => Err(Error::config(format!("unknown method \"{other}\""))),
        }
    }
}

/// Default coreset size for `div`.
pub const DEFAULT_CORESET_SIZE: usize = 100;
/// Default similarity/diversity trade-off for `topk-div`.
pub const DEFAULT_ALPHA: Real = 0.5;

/// Configuration shared by all selection methods. Tie-breaking is fixed to
/// "lowest pool index wins" and is not configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub method: Method,
    pub k: usize,
    /// Trade-off in `[0, 1]`; only consulted by `topk-div`.
    pub alpha: Real,
    /// Coreset size `m` with `k <= m <= n`; only consulted by `div`.
    pub coreset_size: usize,
    pub seed: u64,
}

impl SelectionConfig {
    pub fn new(method: Method, k: usize, seed: u64) -> Self {
        SelectionConfig {
            method,
            k,
            alpha: DEFAULT_ALPHA,
            coreset_size: DEFAULT_CORESET_SIZE,
            seed,
        }
    }

    pub fn with_alpha(mut self, alpha: Real) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_coreset_size(mut self, m: usize) -> Self {
        self.coreset_size = m;
        self
    }

    /// Validate against a pool of `n` demos.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be positive"));
        }
        if self.k > n {
            return Err(Error::config(format!(
                "k = {} exceeds pool size {n}",
                self.k
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!(
                "alpha = {} not in [0, 1]",
                self.alpha
            )));
        }
        if self.method == Method::Div && (self.coreset_size < self.k || self.coreset_size > n) {
            return Err(Error::config(format!(
                "coreset size {} violates k <= m <= n (k = {}, n = {n})",
                self.coreset_size, self.k
            )));
        }
        Ok(())
    }
}

/// Scores recorded at the moment a demo was selected: cosine similarity to
/// the query, diversity against the previously selected set (0 for the first
/// pick), and the score the method actually maximized (for methods without a
/// combined objective this echoes the similarity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepScore {
    pub sim: Real,
    pub div: Real,
    pub combined: Real,
}

/// Ordered selection for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub query_id: String,
    pub method: Method,
    pub k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coreset_size: Option<usize>,
    pub seed: u64,
    pub demo_ids: Vec<String>,
    pub step_scores: Vec<StepScore>,
}

/// Pool embeddings widened to f64 once, so score computations do not depend
/// on how many times a record is touched.
fn widened(pool: &Pool) -> Vec<Vec<Real>> {
    pool.records()
        .iter()
        .map(|r| r.embedding.iter().map(|&x| x as Real).collect())
        .collect()
}

fn widen_query(query: &ExampleRecord, dim: usize) -> Result<Vec<Real>> {
    if query.embedding.len() != dim {
        return Err(Error::contract(format!(
            "query dimension {} does not match pool dimension {dim}",
            query.embedding.len()
        )));
    }
    Ok(query.embedding.iter().map(|&x| x as Real).collect())
}

/// Similarity of each pool row to the query.
fn similarities(rows: &[Vec<Real>], query: &[Real]) -> Result<Vec<Real>> {
    rows.iter().map(|r| cosine_similarity(r, query)).collect()
}

/// Argmax with lowest-index tie-breaking over the candidates for which
/// `eligible` holds.
fn argmax_by_score(scores: &[Real], eligible: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<(usize, Real)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if !eligible(i) {
            continue;
        }
        match best {
            Some((_, bs)) if s <= bs => {}
            _ => best = Some((i, s)),
        }
    }
    best.map(|(i, _)| i)
}

fn result_from_indices(
    demos: &Pool,
    query_id: &str,
    cfg: &SelectionConfig,
    indices: &[usize],
    step_scores: Vec<StepScore>,
) -> SelectionResult {
    SelectionResult {
        query_id: query_id.to_string(),
        method: cfg.method,
        k: cfg.k,
        alpha: (cfg.method == Method::TopKDiv).then_some(cfg.alpha),
        coreset_size: (cfg.method == Method::Div).then_some(cfg.coreset_size),
        seed: cfg.seed,
        demo_ids: indices.iter().map(|&i| demos.get(i).id.clone()).collect(),
        step_scores,
    }
}

/// Informational step scores for methods without a combined objective:
/// sim to query, diversity vs previously selected, combined = sim.
fn informational_scores(
    rows: &[Vec<Real>],
    query: &[Real],
    indices: &[usize],
) -> Result<Vec<StepScore>> {
    let mut out = Vec::with_capacity(indices.len());
    for (step, &i) in indices.iter().enumerate() {
        let sim = cosine_similarity(&rows[i], query)?;
        let div = if step == 0 {
            0.0
        } else {
            let selected: Vec<&[Real]> = indices[..step]
                .iter()
                .map(|&j| rows[j].as_slice())
                .collect();
            set_diversity(&rows[i], &selected)?
        };
        out.push(StepScore {
            sim,
            div,
            combined: sim,
        });
    }
    Ok(out)
}

/// Uniform sample of `k` distinct demos, driven entirely by `cfg.seed`;
/// the query embedding never enters.
pub fn select_rand(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate(demos.len())?;
    let rows = widened(demos);
    let q = widen_query(query, demos.dim())?;
    let mut rng = rng_from(cfg.seed);
    let indices = rand::seq::index::sample(&mut rng, demos.len(), cfg.k).into_vec();
    let scores = informational_scores(&rows, &q, &indices)?;
    Ok(result_from_indices(demos, &query.id, cfg, &indices, scores))
}

/// The `k` demos with largest cosine similarity to the query, in descending
/// similarity order, ties by lowest pool index.
pub fn select_topk(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate(demos.len())?;
    let rows = widened(demos);
    let q = widen_query(query, demos.dim())?;
    let sims = similarities(&rows, &q)?;
    let indices = top_k_indices(&sims, (0..demos.len()).collect(), cfg.k);
    let scores = informational_scores(&rows, &q, &indices)?;
    Ok(result_from_indices(demos, &query.id, cfg, &indices, scores))
}

/// Top-k of `candidates` by score, descending, ties by lowest index.
fn top_k_indices(scores: &[Real], mut candidates: Vec<usize>, k: usize) -> Vec<usize> {
    candidates.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    candidates.truncate(k);
    candidates
}

/// Build the query-independent diversity coreset: the first element is drawn
/// uniformly by `seed`, then each subsequent element maximizes diversity
/// against the current coreset (ties by lowest index) until `m` elements.
pub fn build_div_coreset(demos: &Pool, m: usize, seed: u64) -> Result<Vec<usize>> {
    let n = demos.len();
    if m == 0 || m > n {
        return Err(Error::config(format!("coreset size {m} not in 1..={n}")));
    }
    let rows = widened(demos);
    let mut rng = rng_from(seed);
    let first = rng.gen_range(0..n);
    let mut coreset = vec![first];
    let mut in_coreset = vec![false; n];
    in_coreset[first] = true;
    while coreset.len() < m {
        let selected: Vec<&[Real]> = coreset.iter().map(|&j| rows[j].as_slice()).collect();
        let mut scores = vec![Real::NEG_INFINITY; n];
        for i in 0..n {
            if !in_coreset[i] {
                scores[i] = set_diversity(&rows[i], &selected)?;
            }
        }
        let next = argmax_by_score(&scores, |i| !in_coreset[i]).expect("m <= n");
        coreset.push(next);
        in_coreset[next] = true;
    }
    Ok(coreset)
}

/// Top-k similarity selection restricted to a precomputed coreset.
pub fn select_div(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
    coreset: &[usize],
) -> Result<SelectionResult> {
    cfg.validate(demos.len())?;
    if cfg.k > coreset.len() {
        return Err(Error::config(format!(
            "k = {} exceeds coreset size {}",
            cfg.k,
            coreset.len()
        )));
    }
    let rows = widened(demos);
    let q = widen_query(query, demos.dim())?;
    let sims = similarities(&rows, &q)?;
    let indices = top_k_indices(&sims, coreset.to_vec(), cfg.k);
    let scores = informational_scores(&rows, &q, &indices)?;
    let mut result = result_from_indices(demos, &query.id, cfg, &indices, scores);
    result.coreset_size = Some(coreset.len());
    Ok(result)
}

/// Greedy selection maximizing `alpha * sim + (1 - alpha) * diversity`. The
/// first pick substitutes diversity 0, so it is the most similar demo.
pub fn select_topk_div(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate(demos.len())?;
    let rows = widened(demos);
    let q = widen_query(query, demos.dim())?;
    let sims = similarities(&rows, &q)?;
    let alpha = cfg.alpha;
    let n = demos.len();

    let mut selected: Vec<usize> = Vec::with_capacity(cfg.k);
    let mut taken = vec![false; n];
    let mut step_scores = Vec::with_capacity(cfg.k);
    while selected.len() < cfg.k {
        let mut scores = vec![Real::NEG_INFINITY; n];
        let mut divs = vec![0.0; n];
        let members: Vec<&[Real]> = selected.iter().map(|&j| rows[j].as_slice()).collect();
        for i in 0..n {
            if taken[i] {
                continue;
            }
            if members.is_empty() {
                // First pick: diversity is defined as 0, so the ranking is by
                // similarity alone (even at alpha = 0).
                scores[i] = sims[i];
            } else {
                let div = set_diversity(&rows[i], &members)?;
                divs[i] = div;
                scores[i] = alpha * sims[i] + (1.0 - alpha) * div;
            }
        }
        let first = members.is_empty();
        let pick = argmax_by_score(&scores, |i| !taken[i]).expect("k <= n");
        step_scores.push(StepScore {
            sim: sims[pick],
            div: divs[pick],
            combined: if first {
                alpha * sims[pick]
            } else {
                scores[pick]
            },
        });
        taken[pick] = true;
        selected.push(pick);
    }
    Ok(result_from_indices(
        demos,
        &query.id,
        cfg,
        &selected,
        step_scores,
    ))
}

/// Wrap precomputed demo indices (from a query-independent method) as a
/// selection for `query`, attaching the informational per-step scores.
pub fn select_precomputed(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
    indices: &[usize],
) -> Result<SelectionResult> {
    cfg.validate(demos.len())?;
    if indices.len() != cfg.k {
        return Err(Error::contract(format!(
            "got {} precomputed indices for k = {}",
            indices.len(),
            cfg.k
        )));
    }
    if indices.iter().any(|&i| i >= demos.len()) {
        return Err(Error::contract("precomputed index out of range"));
    }
    let rows = widened(demos);
    let q = widen_query(query, demos.dim())?;
    let scores = informational_scores(&rows, &q, indices)?;
    Ok(result_from_indices(demos, &query.id, cfg, indices, scores))
}

/// K-means representatives (see [`crate::kmeans`]), wrapped as a selection.
/// The chosen demos do not depend on the query; the query only provides the
/// id and the informational similarity scores. Callers selecting for many
/// queries should run [`crate::kmeans::kmeans_representatives`] once and use
/// [`select_precomputed`].
pub fn select_kmeans(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    cfg.validate(demos.len())?;
    let indices = crate::kmeans::kmeans_representatives(demos, cfg.k, cfg.seed)?;
    select_precomputed(demos, query, cfg, &indices)
}

/// Dispatch on `cfg.method`. `div` builds its coreset on the fly; callers
/// that reuse a coreset across queries should call [`select_div`] directly.
pub fn select(
    demos: &Pool,
    query: &ExampleRecord,
    cfg: &SelectionConfig,
) -> Result<SelectionResult> {
    match cfg.method {
        Method::Rand => select_rand(demos, query, cfg),
        Method::TopK => select_topk(demos, query, cfg),
        Method::Div => {
            let coreset = build_div_coreset(demos, cfg.coreset_size, cfg.seed)?;
            select_div(demos, query, cfg, &coreset)
        }
        Method::TopKDiv => select_topk_div(demos, query, cfg),
        Method::KMeans => select_kmeans(demos, query, cfg),
    }
}
