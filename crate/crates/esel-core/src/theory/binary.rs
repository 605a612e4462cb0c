//! Binary skill-set embeddings: examples are subsets of `[d]` encoded as 0/1
//! vectors, labels are `<theta, e>`, and coverage measures how much of a
//! query's support the selected demonstrations reach.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Real, Result};

/// The task parameter: a vector with i.i.d. `U[0,1]` entries. Labels are
/// inner products `<theta, e>`, so every expected-loss expression in
/// [`crate::theory::closed_form`] is an expectation over this distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskVector(Vec<Real>);

impl TaskVector {
    /// Draw `dim` i.i.d. uniform entries.
    pub fn sample(dim: usize, rng: &mut ChaCha8Rng) -> Self {
        TaskVector((0..dim).map(|_| rng.gen::<Real>()).collect())
    }

    /// Wrap existing entries, enforcing the `[0, 1]` range.
    pub fn new(entries: Vec<Real>) -> Result<Self> {
        if entries.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::contract("task vector entries must lie in [0, 1]"));
        }
        Ok(TaskVector(entries))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[Real] {
        &self.0
    }
}

/// A demonstration or query with support `T` and embedding `e_T in {0,1}^d`.
/// Supports are kept sorted; the dense embedding is materialized on demand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryExample {
    support: Vec<u32>,
    dim: usize,
}

impl BinaryExample {
    pub fn new(mut support: Vec<u32>, dim: usize) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::contract("support must be non-empty"));
        }
        support.sort_unstable();
        support.dedup();
        if let Some(&max) = support.last() {
            if max as usize >= dim {
                return Err(Error::contract(format!(
                    "support index {max} out of range for dimension {dim}"
                )));
            }
        }
        Ok(BinaryExample { support, dim })
    }

    pub fn support(&self) -> &[u32] {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn support_size(&self) -> usize {
        self.support.len()
    }

    /// Dense 0/1 embedding.
    pub fn embedding(&self) -> Vec<Real> {
        let mut e = vec![0.0; self.dim];
        for &i in &self.support {
            e[i as usize] = 1.0;
        }
        e
    }

    /// Label `<theta, e_T>` = sum of theta over the support.
    pub fn label(&self, theta: &[Real]) -> Real {
        self.support.iter().map(|&i| theta[i as usize]).sum()
    }

    /// Size of the support intersection with another example (both sorted).
    pub fn overlap(&self, other: &BinaryExample) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.support.len() && j < other.support.len() {
            match self.support[i].cmp(&other.support[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// The demonstration distributions the lab analyzes. `d` is `4l` for the two
/// block-structured families and free for `general`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoDistribution {
    /// `T1` uniform over size-`l/2` subsets of `[2l]`, `T2` uniform over
    /// size-`l/2` subsets of `{2l..4l}`; requires even `l`.
    Example1 { l: usize },
    /// `T1` uniform over size-`l-1` subsets of `[2l]`, `T2` a single uniform
    /// index in `{2l..4l}`; requires `l >= 3`.
    Example2 { l: usize },
    /// `T` uniform over size-`l` subsets of `[d]`.
    General { l: usize, d: usize },
}

impl DemoDistribution {
    pub fn dim(&self) -> usize {
        match *self {
            DemoDistribution::Example1 { l } | DemoDistribution::Example2 { l } => 4 * l,
            DemoDistribution::General { d, .. } => d,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            DemoDistribution::Example1 { l } => {
                if l < 2 || l % 2 != 0 {
                    return Err(Error::config(format!(
                        "example1 requires even l >= 2, got {l}"
                    )));
                }
            }
            DemoDistribution::Example2 { l } => {
                if l < 3 {
                    return Err(Error::config(format!("example2 requires l >= 3, got {l}")));
                }
            }
            DemoDistribution::General { l, d } => {
                if l == 0 || l > d {
                    return Err(Error::config(format!(
                        "general requires 1 <= l <= d, got l={l}, d={d}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn sample_subset(rng: &mut ChaCha8Rng, base: usize, universe: usize, size: usize) -> Vec<u32> {
    let mut picks = rand::seq::index::sample(rng, universe, size).into_vec();
    picks.sort_unstable();
    picks.into_iter().map(|i| (i + base) as u32).collect()
}

/// Draw one demonstration from the distribution.
pub fn sample_demo(dist: DemoDistribution, rng: &mut ChaCha8Rng) -> Result<BinaryExample> {
    dist.validate()?;
    let d = dist.dim();
    let support = match dist {
        DemoDistribution::Example1 { l } => {
            let mut s = sample_subset(rng, 0, 2 * l, l / 2);
            s.extend(sample_subset(rng, 2 * l, 2 * l, l / 2));
            s
        }
        DemoDistribution::Example2 { l } => {
            let mut s = sample_subset(rng, 0, 2 * l, l - 1);
            s.push((2 * l + rng.gen_range(0..2 * l)) as u32);
            s
        }
        DemoDistribution::General { l, d } => sample_subset(rng, 0, d, l),
    };
    BinaryExample::new(support, d)
}

/// Draw one query: a uniform size-`l` subset of `[2l]` for the block
/// families, or of `[d]` for `general` (same as the demo distribution).
pub fn sample_query(dist: DemoDistribution, rng: &mut ChaCha8Rng) -> Result<BinaryExample> {
    dist.validate()?;
    let d = dist.dim();
    let support = match dist {
        DemoDistribution::Example1 { l } | DemoDistribution::Example2 { l } => {
            sample_subset(rng, 0, 2 * l, l)
        }
        DemoDistribution::General { l, d } => sample_subset(rng, 0, d, l),
    };
    BinaryExample::new(support, d)
}

/// Number of elements in the example2 ground set, `C(2l, l-1) * 2l`, saturated
/// at `u64::MAX` to keep the guard overflow-safe.
pub fn example2_ground_set_size(l: usize) -> u64 {
    let mut c: u128 = 1;
    for i in 0..(l - 1) {
        c = c * (2 * l - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    let total = c.saturating_mul(2 * l as u128);
    total.min(u64::MAX as u128) as u64
}

/// Enumeration guard for [`build_ground_set`].
pub const GROUND_SET_LIMIT: u64 = 1_000_000;

/// Enumerate the full example2 ground set: every size-`l-1` subset of `[2l]`
/// paired with every single index in `{2l..4l}`, each exactly once, in
/// lexicographic order.
pub fn build_ground_set(l: usize) -> Result<Vec<BinaryExample>> {
    DemoDistribution::Example2 { l }.validate()?;
    let size = example2_ground_set_size(l);
    if size > GROUND_SET_LIMIT {
        return Err(Error::config(format!(
            "ground set has {size} elements, above the enumeration guard of {GROUND_SET_LIMIT}"
        )));
    }
    let d = 4 * l;
    let mut out = Vec::with_capacity(size as usize);
    let mut lower: Vec<u32> = (0..(l - 1) as u32).collect();
    loop {
        for upper in (2 * l)..(4 * l) {
            let mut support = lower.clone();
            support.push(upper as u32);
            out.push(BinaryExample::new(support, d)?);
        }
        // Advance to the next lexicographic (l-1)-combination of [2l].
        let k = lower.len();
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if lower[i] as usize != 2 * l - (k - i) {
                break;
            }
        }
        lower[i] += 1;
        for j in (i + 1)..k {
            lower[j] = lower[j - 1] + 1;
        }
    }
}

/// Fraction of the query's support covered by the union of the selected
/// supports: `|(U supports) ∩ T_q| / |T_q|`.
pub fn coverage_ratio(selected: &[&BinaryExample], query: &BinaryExample) -> Result<Real> {
    if query.support.is_empty() {
        return Err(Error::contract("query support must be non-empty"));
    }
    let covered = query
        .support
        .iter()
        .filter(|&&i| selected.iter().any(|s| s.support.binary_search(&i).is_ok()))
        .count();
    Ok(covered as Real / query.support.len() as Real)
}
