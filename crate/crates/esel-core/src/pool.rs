//! Pools of embedded examples: JSONL ingestion, a compact binary format, and
//! keyword-occurrence embeddings for answer text.
//!
//! Ingestion is fail-fast: the whole file is rejected on the first invalid
//! record, with the 1-based line number in the error. Silently dropping
//! records would bias selection experiments downstream.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Magic bytes of the binary pool format.
const MAGIC: &[u8; 4] = b"ESEL";
/// Current binary format version.
const FORMAT_VERSION: u32 = 1;

/// Whether a record is a candidate demonstration or a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Demo,
    Query,
}

/// Text fields of a record. `question` is mandatory; demos must also carry
/// `answer`; `support` is the reading-comprehension passage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSet {
    pub question: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support: Option<String>,
}

/// One embedded demonstration or query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub role: Role,
    pub dataset: String,
    pub fields: FieldSet,
    pub embedding: Vec<f32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<BTreeMap<String, String>>,
}

impl ExampleRecord {
    /// Validate the per-record invariants against a pool dimension.
    /// `line` is used for error reporting (1-based; 0 for in-memory records).
    fn validate(&self, dim: usize, line: usize) -> Result<()> {
        if self.embedding.len() != dim {
            return Err(Error::InvalidRecord {
                line,
                message: format!(
                    "dimension mismatch (expected {dim}, got {})",
                    self.embedding.len()
                ),
            });
        }
        let sq_norm: f64 = self
            .embedding
            .iter()
            .map(|&x| (x as f64) * (x as f64))
            .sum();
        if sq_norm <= 0.0 || !sq_norm.is_finite() {
            return Err(Error::InvalidRecord {
                line,
                message: format!("embedding of \"{}\" has zero or non-finite norm", self.id),
            });
        }
        if self.fields.question.is_empty() {
            return Err(Error::InvalidRecord {
                line,
                message: format!("record \"{}\" has an empty question field", self.id),
            });
        }
        if self.role == Role::Demo && self.fields.answer.is_none() {
            return Err(Error::InvalidRecord {
                line,
                message: format!("demo \"{}\" is missing the answer field", self.id),
            });
        }
        Ok(())
    }
}

/// A validated, immutable collection of records sharing one embedding
/// dimension. Safe to share across concurrent readers.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    records: Vec<ExampleRecord>,
    dim: usize,
    id_index: HashMap<String, usize>,
}

impl Pool {
    /// Build a pool from records, enforcing every invariant.
    pub fn new(records: Vec<ExampleRecord>) -> Result<Self> {
        Self::from_numbered(records.into_iter().map(|r| (0usize, r)).collect())
    }

    /// Build a pool from `(line, record)` pairs so errors can name the input
    /// line. Lines are 1-based.
    fn from_numbered(records: Vec<(usize, ExampleRecord)>) -> Result<Self> {
        let Some((_, first)) = records.first() else {
            return Err(Error::contract("pool must be non-empty"));
        };
        let dim = first.embedding.len();
        let mut id_index = HashMap::with_capacity(records.len());
        for (i, (line, record)) in records.iter().enumerate() {
            record.validate(dim, *line)?;
            if id_index.insert(record.id.clone(), i).is_some() {
                return Err(Error::DuplicateId {
                    id: record.id.clone(),
                    line: *line,
                });
            }
        }
        Ok(Pool {
            records: records.into_iter().map(|(_, r)| r).collect(),
            dim,
            id_index,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[ExampleRecord] {
        &self.records
    }

    pub fn get(&self, index: usize) -> &ExampleRecord {
        &self.records[index]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn by_id(&self, id: &str) -> Option<&ExampleRecord> {
        self.position(id).map(|i| &self.records[i])
    }
}

/// Load a pool from JSONL (one record object per line, UTF-8).
///
/// Rejects the whole file on the first malformed or invalid record, naming
/// the 1-based line.
pub fn load_pool_jsonl(path: impl AsRef<Path>) -> Result<Pool> {
    let text = std::fs::read_to_string(path)?;
    parse_pool_jsonl(&text)
}

/// Parse JSONL text into a pool. See [`load_pool_jsonl`].
pub fn parse_pool_jsonl(text: &str) -> Result<Pool> {
    let mut numbered = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: ExampleRecord =
            serde_json::from_str(line).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        numbered.push((i + 1, record));
    }
    Pool::from_numbered(numbered)
}

/// Serialize a pool as JSONL, one record per line (inverse of
/// [`parse_pool_jsonl`]).
pub fn pool_to_jsonl(pool: &Pool) -> String {
    let mut out = String::new();
    for record in pool.records() {
        out.push_str(&serde_json::to_string(record).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Sidecar view of a record: everything except the embedding, which lives in
/// the binary matrix.
#[derive(Serialize, Deserialize)]
struct SidecarRecord<'a> {
    id: &'a str,
    role: Role,
    dataset: &'a str,
    fields: FieldSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<BTreeMap<String, String>>,
}

/// Write a pool in the binary format:
/// `"ESEL" | version u32 LE | n u32 LE | d u32 LE | n*d f32 LE row-major |
/// sidecar byte length u64 LE | JSONL sidecar of the non-embedding fields`.
///
/// The roundtrip through [`load_pool_binary`] is bit-exact.
pub fn save_pool_binary(pool: &Pool, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(pool.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(pool.dim() as u32).to_le_bytes());
    for record in pool.records() {
        for &x in &record.embedding {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    let mut sidecar = Vec::new();
    for record in pool.records() {
        let row = SidecarRecord {
            id: &record.id,
            role: record.role,
            dataset: &record.dataset,
            fields: record.fields.clone(),
            meta: record.meta.clone(),
        };
        serde_json::to_writer(&mut sidecar, &row).expect("sidecar serializes");
        sidecar.push(b'\n');
    }
    buf.extend_from_slice(&(sidecar.len() as u64).to_le_bytes());
    buf.extend_from_slice(&sidecar);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

/// Load a pool written by [`save_pool_binary`].
pub fn load_pool_binary(path: impl AsRef<Path>) -> Result<Pool> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    parse_pool_binary(&bytes)
}

fn take<'a>(bytes: &'a [u8], cursor: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = cursor.checked_add(n).ok_or(Error::TruncatedPayload)?;
    if end > bytes.len() {
        return Err(Error::TruncatedPayload);
    }
    let out = &bytes[*cursor..end];
    *cursor = end;
    Ok(out)
}

fn parse_pool_binary(bytes: &[u8]) -> Result<Pool> {
    let mut cursor = 0usize;
    if take(bytes, &mut cursor, 4).map_err(|_| Error::BadMagic)? != MAGIC {
        return Err(Error::BadMagic);
    }
    let version = u32::from_le_bytes(take(bytes, &mut cursor, 4)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let n = u32::from_le_bytes(take(bytes, &mut cursor, 4)?.try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(take(bytes, &mut cursor, 4)?.try_into().unwrap()) as usize;
    let matrix = take(
        bytes,
        &mut cursor,
        n.checked_mul(d)
            .and_then(|x| x.checked_mul(4))
            .ok_or(Error::TruncatedPayload)?,
    )?;
    let sidecar_len = u64::from_le_bytes(take(bytes, &mut cursor, 8)?.try_into().unwrap()) as usize;
    let sidecar = take(bytes, &mut cursor, sidecar_len)?;
    let sidecar = std::str::from_utf8(sidecar).map_err(|e| Error::MalformedLine {
        line: 0,
        message: format!("sidecar is not UTF-8: {e}"),
    })?;

    let mut numbered = Vec::with_capacity(n);
    for (i, line) in sidecar.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: SidecarRecord = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: i + 1,
            message: e.to_string(),
        })?;
        if numbered.len() == n {
            return Err(Error::MalformedLine {
                line: i + 1,
                message: "sidecar has more rows than the header declares".into(),
            });
        }
        let start = numbered.len() * d * 4;
        let embedding = matrix[start..start + d * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        numbered.push((
            i + 1,
            ExampleRecord {
                id: row.id.to_string(),
                role: row.role,
                dataset: row.dataset.to_string(),
                fields: row.fields,
                embedding,
                meta: row.meta,
            },
        ));
    }
    if numbered.len() != n {
        return Err(Error::TruncatedPayload);
    }
    Pool::from_numbered(numbered)
}

/// Sorted, deduplicated, case-sensitive whitespace tokens over all answers.
///
/// This is the vocabulary for [`keyword_occurrence_embedding`]; the rule is
/// deliberately simple (split on whitespace, no lowercasing, no punctuation
/// stripping) so fixtures are reproducible.
pub fn build_vocabulary<S: AsRef<str>>(answers: &[S]) -> Result<Vec<String>> {
    if answers.is_empty() {
        return Err(Error::contract(
            "build_vocabulary requires at least one answer",
        ));
    }
    let mut tokens: Vec<String> = answers
        .iter()
        .flat_map(|a| a.as_ref().split_whitespace().map(str::to_string))
        .collect();
    tokens.sort();
    tokens.dedup();
    Ok(tokens)
}

/// Binary keyword-occurrence embedding of an answer: entry `v` is 1.0 iff
/// vocabulary token `v` occurs among the answer's whitespace tokens.
///
/// An empty answer yields the all-zero vector, which is unusable as a cosine
/// embedding; pool validation rejects it at ingestion.
pub fn keyword_occurrence_embedding<S: AsRef<str>>(
    answer_text: &str,
    vocabulary: &[S],
) -> Result<Vec<f32>> {
    if vocabulary.is_empty() {
        return Err(Error::contract("vocabulary must be non-empty"));
    }
    let mut seen = std::collections::HashSet::new();
    for token in answer_text.split_whitespace() {
        seen.insert(token);
    }
    let mut unique = std::collections::HashSet::new();
    for v in vocabulary {
        if !unique.insert(v.as_ref()) {
            return Err(Error::contract(format!(
                "vocabulary token \"{}\" is duplicated",
                v.as_ref()
            )));
        }
    }
    Ok(vocabulary
        .iter()
        .map(|v| if seen.contains(v.as_ref()) { 1.0 } else { 0.0 })
        .collect())
}
