//! Cosine similarity and the set-diversity score built on it.

use num_traits::Float;

use crate::{Error, Real, Result};

/// Cosine similarity `<a,b> / (|a|*|b|)`, in `[-1, 1]`.
///
/// Errors on dimension mismatch and on zero-norm inputs (cosine is undefined
/// there; pools reject zero-norm embeddings at load for the same reason).
pub fn cosine_similarity<T: Float>(a: &[T], b: &[T]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::contract(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = T::zero();
    let mut na = T::zero();
    let mut nb = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na.is_nan() || nb.is_nan() || na <= T::zero() || nb <= T::zero() {
        return Err(Error::contract("zero-norm vector in cosine similarity"));
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Diversity of `e` against a non-empty selected set: one minus the mean
/// cosine similarity between `e` and each member. Ranges over `[0, 2]`
/// (cosine can be negative), and over `[0, 1]` when all pairwise cosines are
/// nonnegative.
///
/// Callers must not invoke this with an empty set; the greedy selection
/// operations substitute 0 for the first pick instead.
pub fn set_diversity<T: Float>(e: &[T], selected: &[&[T]]) -> Result<T> {
    if selected.is_empty() {
        return Err(Error::contract("set_diversity requires a non-empty set"));
    }
    let mut sum = T::zero();
    for member in selected {
        sum = sum + cosine_similarity(e, member)?;
    }
    let count = T::from(selected.len()).expect("set size fits in float");
    Ok(T::one() - sum / count)
}

/// Cosine similarity of two stored (`f32`) embeddings, computed in double
/// precision.
pub fn cosine_f32(a: &[f32], b: &[f32]) -> Result<Real> {
    let aw: Vec<Real> = a.iter().map(|&x| x as Real).collect();
    let bw: Vec<Real> = b.iter().map(|&x| x as Real).collect();
    cosine_similarity(&aw, &bw)
}
