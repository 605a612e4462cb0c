//! Closed-form expected prediction losses for the two block-structured
//! demonstration distributions, generic over the scalar type so the same
//! expressions evaluate in `f64` and in exact rational arithmetic.
//!
//! Every formula here is the expectation of `<theta_hat - theta, e_q>^2`
//! over `theta ~ U[0,1]^d` i.i.d. for a fixed pair of selected supports; the
//! Monte Carlo harness in [`crate::theory::mc`] checks each one by sampling
//! the same configuration.

use num_traits::{FromPrimitive, Num};

use crate::{Error, Result};

fn scalar<T: Num + FromPrimitive>(x: i64) -> T {
    T::from_i64(x).expect("integer fits scalar type")
}

/// Expected loss for the example1 configuration in which the two selected
/// size-`l` supports each place half their mass inside the query support
/// `[l]`, overlapping each other in `a` lower and `b` upper indices.
///
/// For a query supported on `[l]`, the residual coefficient vector of the
/// min-norm solution has, with `g = (l/2) / (l+a+b)`:
/// `l-2a` entries at `g-1`, `a` at `2g-1`, `a` at `-1` (the uncovered query
/// indices), `l-2b` upper entries at `g`, and `b` at `2g`. The expectation
/// over i.i.d. `U[0,1]` coordinates is `sum(c^2)/12 + (sum c)^2/4`, which
/// clears to
///
/// `[2(l/2-a)(l/2+a+b)^2 + a(a+b)^2 + a(l+a+b)^2 + (l+2b)(l/2)^2
///   + 3 l^2 (a+b)^2] / (12 (l+a+b)^2)`.
///
/// At `a = b = 0` this reduces exactly to `l/24`.
pub fn closed_form_l_ab<T: Num + FromPrimitive>(l: i64, a: i64, b: i64) -> Result<T> {
    if l < 2 || l % 2 != 0 {
        return Err(Error::contract(format!("l must be even and >= 2, got {l}")));
    }
    if !(0..=l / 2).contains(&a) || !(0..=l / 2).contains(&b) {
        return Err(Error::contract(format!(
            "a and b must lie in [0, l/2]; got a={a}, b={b} for l={l}"
        )));
    }
    if a + b > l - 1 {
        return Err(Error::contract(format!(
            "a + b must be at most l - 1; got {a} + {b} for l={l}"
        )));
    }
    let h = l / 2;
    let s = a + b;
    let numerator = 2 * (h - a) * (h + s).pow(2)
        + a * s.pow(2)
        + a * (l + s).pow(2)
        + (l + 2 * b) * h.pow(2)
        + 3 * l.pow(2) * s.pow(2);
    let denominator = 12 * (l + s).pow(2);
    Ok(scalar::<T>(numerator) / scalar::<T>(denominator))
}

/// The three second-pick cases for the example2 distribution, classified by
/// what the second selected support shares with the first: nothing beyond the
/// forced `l-2` lower indices (`Case1`), the single upper index (`Case2`), or
/// the entire lower part (`Case3`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example2Case {
    Case1,
    Case2,
    Case3,
}

impl Example2Case {
    pub fn as_str(&self) -> &'static str {
        match self {
            Example2Case::Case1 => "L1",
            Example2Case::Case2 => "L2",
            Example2Case::Case3 => "L3",
        }
    }
}

/// Expected loss for the given example2 case: `1/12` for `Case1`, and
/// `(9l^2 - 7l + 2) / (12 (2l-1)^2)` for `Case2` and `Case3`.
///
/// The two non-disjoint cases reduce to the same expression; the `(2l-1)^2`
/// denominator is the one the Monte Carlo harness confirms (see
/// [`example2_case2_candidates`] for the rejected alternative).
pub fn closed_form_example2<T: Num + FromPrimitive>(l: i64, case: Example2Case) -> Result<T> {
    if l < 3 {
        return Err(Error::contract(format!(
            "example2 requires l >= 3, got {l}"
        )));
    }
    match case {
        Example2Case::Case1 => Ok(scalar::<T>(1) / scalar::<T>(12)),
        Example2Case::Case2 | Example2Case::Case3 => {
            let numerator = 9 * l.pow(2) - 7 * l + 2;
            let denominator = 12 * (2 * l - 1).pow(2);
            Ok(scalar::<T>(numerator) / scalar::<T>(denominator))
        }
    }
}

/// The two candidate closed forms for the case-2 loss, which differ only in
/// the squared denominator factor: `(2l-1)^2` (first) versus `(12l-1)^2`
/// (second). Monte Carlo on the case-2 configuration separates them by
/// orders of magnitude; [`closed_form_example2`] uses the first.
pub fn example2_case2_candidates<T: Num + FromPrimitive>(l: i64) -> Result<(T, T)> {
    if l < 3 {
        return Err(Error::contract(format!(
            "example2 requires l >= 3, got {l}"
        )));
    }
    let numerator = 9 * l.pow(2) - 7 * l + 2;
    Ok((
        scalar::<T>(numerator) / scalar::<T>(12 * (2 * l - 1).pow(2)),
        scalar::<T>(numerator) / scalar::<T>(12 * (12 * l - 1).pow(2)),
    ))
}

/// Fixed supports realizing the example1 `(a, b)` configuration, alongside
/// the query support `[l]`: `T1 = [l/2] ∪ {2l..5l/2}`,
/// `T2 = {l/2-a..l-a} ∪ {5l/2-b..3l-b}`.
pub fn example1_fixed_supports(l: usize, a: usize, b: usize) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let h = l / 2;
    let t1: Vec<u32> = (0..h).chain(2 * l..2 * l + h).map(|i| i as u32).collect();
    let t2: Vec<u32> = (h - a..l - a)
        .chain(2 * l + h - b..3 * l - b)
        .map(|i| i as u32)
        .collect();
    let query: Vec<u32> = (0..l).map(|i| i as u32).collect();
    (t1, t2, query)
}

/// Fixed supports realizing an example2 case, alongside the query `[l]`:
/// the first support is always `[l-1] ∪ {2l}`.
pub fn example2_fixed_supports(l: usize, case: Example2Case) -> (Vec<u32>, Vec<u32>, Vec<u32>) {
    let t1: Vec<u32> = (0..l - 1).chain([2 * l]).map(|i| i as u32).collect();
    let t2: Vec<u32> = match case {
        Example2Case::Case1 => (1..l).chain([2 * l + 1]).map(|i| i as u32).collect(),
        Example2Case::Case2 => (1..l).chain([2 * l]).map(|i| i as u32).collect(),
        Example2Case::Case3 => (0..l - 1).chain([2 * l + 1]).map(|i| i as u32).collect(),
    };
    let query: Vec<u32> = (0..l).map(|i| i as u32).collect();
    (t1, t2, query)
}
