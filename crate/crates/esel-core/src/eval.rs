//! Scoring rules and accuracy aggregation: stop-string truncation, math
//! answer extraction, exact match, classification and multi-choice scoring,
//! the alpha-grid delta diagnostic, and report assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Cut `generated` at the earliest occurrence of any stop string (the stop
/// itself is excluded). When several stops begin at the same offset the cut
/// point is identical whichever wins, so earliest-offset is the whole rule.
pub fn truncate_at_stop<'t>(generated: &'t str, stops: &[String]) -> &'t str {
    let mut cut = generated.len();
    for stop in stops {
        if stop.is_empty() {
            continue;
        }
        if let Some(pos) = generated.find(stop.as_str()) {
            cut = cut.min(pos);
        }
    }
    &generated[..cut]
}

fn strip_commas_and_trim(s: &str) -> String {
    s.trim().replace(',', "")
}

/// Last maximal numeric token: optional sign, digits with an optional
/// fractional part, optionally a `/` denominator. Returns the byte range.
fn last_numeric_token(text: &str) -> Option<&str> {
    let bytes = text.as_bytes();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        let mut j = i;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let number_end = scan_decimal(bytes, j);
        if number_end == j {
            i = start + 1;
            continue;
        }
        let mut end = number_end;
        // Optional fraction denominator.
        if end < bytes.len() && bytes[end] == b'/' {
            let denom_end = scan_decimal(bytes, end + 1);
            if denom_end > end + 1 {
                end = denom_end;
            }
        }
        best = Some((start, end));
        i = end;
    }
    best.map(|(s, e)| &text[s..e])
}

/// Scan digits with at most one interior decimal point starting at `from`;
/// returns the end offset (equal to `from` if no digits).
fn scan_decimal(bytes: &[u8], from: usize) -> usize {
    let mut j = from;
    while j < bytes.len() && bytes[j].is_ascii_digit() {
        j += 1;
    }
    if j == from {
        return from;
    }
    if j < bytes.len() && bytes[j] == b'.' {
        let mut k = j + 1;
        while k < bytes.len() && bytes[k].is_ascii_digit() {
            k += 1;
        }
        if k > j + 1 {
            return k;
        }
    }
    j
}

/// Extract the math answer from a generation, in three stages: text after
/// the last `"#### "` up to end of line, then balanced-brace content of the
/// last `\boxed{...}`, then the last maximal numeric token. The extracted
/// text is trimmed and commas removed. Returns `None` when all stages fail;
/// never errors.
pub fn extract_math_answer(generated: &str) -> Option<String> {
    if let Some(pos) = generated.rfind("#### ") {
        let rest = &generated[pos + 5..];
        let line = rest.split('\n').next().unwrap_or("");
        let cleaned = strip_commas_and_trim(line);
        if !cleaned.is_empty() {
            return Some(cleaned);
        }
    }
    if let Some(pos) = generated.rfind("\\boxed{") {
        let rest = &generated[pos + 7..];
        let mut depth = 1usize;
        for (i, c) in rest.char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        let cleaned = strip_commas_and_trim(&rest[..i]);
                        if !cleaned.is_empty() {
                            return Some(cleaned);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    last_numeric_token(generated).map(strip_commas_and_trim)
}

/// Exact match after whitespace trimming: true iff the prediction equals any
/// gold answer byte-for-byte (case-sensitive).
pub fn exact_match<S: AsRef<str>>(prediction: &str, gold: &[S]) -> Result<bool> {
    if gold.is_empty() {
        return Err(Error::contract(
            "exact_match requires at least one gold answer",
        ));
    }
    let p = prediction.trim();
    Ok(gold.iter().any(|g| g.as_ref().trim() == p))
}

/// Binary classification outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

/// Positive iff the positive verbalizer's score strictly exceeds the
/// negative one; ties resolve to negative so the rule is total.
pub fn score_classification(positive_score: Real, negative_score: Real) -> Result<Label> {
    if !positive_score.is_finite() || !negative_score.is_finite() {
        return Err(Error::contract("classification scores must be finite"));
    }
    Ok(if positive_score > negative_score {
        Label::Positive
    } else {
        Label::Negative
    })
}

/// Index of the option with the highest mean log-probability (lowest average
/// cross-entropy). Ties go to the first option in presentation order.
pub fn score_multichoice<S: AsRef<str>>(option_scores: &[(S, Real)]) -> Result<usize> {
    if option_scores.len() < 2 {
        return Err(Error::contract("multichoice needs at least two options"));
    }
    if option_scores.iter().any(|(_, s)| !s.is_finite()) {
        return Err(Error::contract("multichoice scores must be finite"));
    }
    let mut best = 0;
    for (i, (_, s)) in option_scores.iter().enumerate().skip(1) {
        if *s > option_scores[best].1 {
            best = i;
        }
    }
    Ok(best)
}

/// Mean accuracy over the high-alpha half of the grid minus the low half:
/// `(1/5) sum_{i=6..10} acc(i/10) - (1/5) sum_{i=1..5} acc(i/10)`.
/// Requires exactly the ten grid points `0.1, 0.2, ..., 1.0`.
pub fn compute_delta(acc_by_alpha: &[(Real, Real)]) -> Result<Real> {
    let mut by_tenth: [Option<Real>; 10] = [None; 10];
    for &(alpha, acc) in acc_by_alpha {
        let scaled = alpha * 10.0;
        let tenth = scaled.round();
        if (scaled - tenth).abs() > 1e-9 || !(1.0..=10.0).contains(&tenth) {
            return Err(Error::contract(format!(
                "alpha {alpha} is not one of the ten grid points 0.1..1.0"
            )));
        }
        let slot = tenth as usize - 1;
        if by_tenth[slot].is_some() {
            return Err(Error::contract(format!("alpha {alpha} appears twice")));
        }
        by_tenth[slot] = Some(acc);
    }
    let mut low = 0.0;
    let mut high = 0.0;
    for (slot, acc) in by_tenth.iter().enumerate() {
        let acc = acc.ok_or_else(|| {
            Error::contract(format!("missing grid point {}", (slot + 1) as Real / 10.0))
        })?;
        if slot < 5 {
            low += acc;
        } else {
            high += acc;
        }
    }
    Ok(high / 5.0 - low / 5.0)
}

/// Per-example outcome in a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleOutcome {
    pub query_id: String,
    pub correct: bool,
}

/// Accuracy and size of one subgroup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgroupStats {
    pub accuracy: Real,
    pub n: usize,
}

/// Evaluation report: overall accuracy, per-example outcomes, per-tag
/// subgroup accuracies, and the optional alpha-grid delta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: Real,
    pub n: usize,
    pub per_example: Vec<ExampleOutcome>,
    pub subgroups: BTreeMap<String, SubgroupStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Real>,
}

/// Aggregate per-example correctness into a report. Each example may carry
/// tags (e.g. `dataset:sst2`, `difficulty:hard`); every tag becomes a
/// subgroup whose accuracy is the mean over its members.
pub fn aggregate(outcomes: &[(String, bool, Vec<String>)]) -> Result<EvalReport> {
    if outcomes.is_empty() {
        return Err(Error::contract("no examples"));
    }
    let n = outcomes.len();
    let correct = outcomes.iter().filter(|(_, c, _)| *c).count();
    let mut groups: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (_, c, tags) in outcomes {
        for tag in tags {
            let entry = groups.entry(tag.clone()).or_insert((0, 0));
            entry.1 += 1;
            if *c {
                entry.0 += 1;
            }
        }
    }
    Ok(EvalReport {
        accuracy: correct as Real / n as Real,
        n,
        per_example: outcomes
            .iter()
            .map(|(id, c, _)| ExampleOutcome {
                query_id: id.clone(),
                correct: *c,
            })
            .collect(),
        subgroups: groups
            .into_iter()
            .map(|(tag, (c, total))| {
                (
                    tag,
                    SubgroupStats {
                        accuracy: c as Real / total as Real,
                        n: total,
                    },
                )
            })
            .collect(),
        delta: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stops(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn truncate_cuts_at_the_earliest_stop() {
        let out = truncate_at_stop("Denver\n\nQuestion: next", &stops(&["\n\n", "Question"]));
        assert_eq!(out, "Denver");
    }

    #[test]
    fn truncate_without_stop_returns_input() {
        assert_eq!(
            truncate_at_stop("plain text", &stops(&["\n\n"])),
            "plain text"
        );
    }

    #[test]
    fn truncate_stop_at_offset_zero_yields_empty() {
        assert_eq!(truncate_at_stop("Question: x", &stops(&["Question"])), "");
    }

    #[test]
    fn extract_stage_one_hash_marks() {
        assert_eq!(extract_math_answer("...so\n#### 42").as_deref(), Some("42"));
        assert_eq!(
            extract_math_answer("#### 12\nmore\n#### 1,234 \ntail").as_deref(),
            Some("1234")
        );
    }

    #[test]
    fn extract_stage_two_boxed() {
        assert_eq!(
            extract_math_answer("the answer is \\boxed{7/2}.").as_deref(),
            Some("7/2")
        );
        assert_eq!(
            extract_math_answer("nested \\boxed{\\frac{1}{2}} end").as_deref(),
            // The last "\boxed{" wins; braces stay balanced.
            Some("\\frac{1}{2}")
        );
    }

    #[test]
    fn extract_stage_three_last_numeric_token() {
        assert_eq!(
            extract_math_answer("costs 3 dollars then 15 total.").as_deref(),
            Some("15")
        );
        assert_eq!(
            extract_math_answer("about -2.5 degrees").as_deref(),
            Some("-2.5")
        );
        assert_eq!(
            extract_math_answer("ratio 7/2 overall").as_deref(),
            Some("7/2")
        );
    }

    #[test]
    fn extract_absent_when_no_stage_applies() {
        assert_eq!(extract_math_answer("no numbers here"), None);
        assert_eq!(extract_math_answer(""), None);
    }

    #[test]
    fn extract_hash_stage_takes_precedence_over_boxed() {
        let text = "\\boxed{99} then\n#### 42";
        assert_eq!(extract_math_answer(text).as_deref(), Some("42"));
    }

    #[test]
    fn exact_match_membership_and_trim() {
        let golds = ["Denver".to_string(), "the city of Denver".to_string()];
        assert!(exact_match("Denver", &golds).unwrap());
        assert!(!exact_match("denver", &["Denver"]).unwrap());
        assert!(exact_match(" 42 ", &["42"]).unwrap());
        assert!(exact_match::<String>("x", &[]).is_err());
    }

    #[test]
    fn classification_rule_and_tie() {
        assert_eq!(score_classification(2.0, 1.0).unwrap(), Label::Positive);
        assert_eq!(score_classification(1.0, 1.0).unwrap(), Label::Negative);
        assert_eq!(score_classification(-3.5, -2.0).unwrap(), Label::Negative);
        assert!(score_classification(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn multichoice_argmax_and_tie() {
        let opts = [
            ("A".to_string(), -1.2),
            ("B".to_string(), -0.7),
            ("C".to_string(), -2.0),
        ];
        assert_eq!(score_multichoice(&opts).unwrap(), 1);
        let equal = [("A".to_string(), -1.0), ("B".to_string(), -1.0)];
        assert_eq!(score_multichoice(&equal).unwrap(), 0);
        assert!(score_multichoice(&[("A".to_string(), -1.0)]).is_err());
    }

    #[test]
    fn delta_worked_examples() {
        let equal: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 / 10.0, 0.7)).collect();
        assert!(compute_delta(&equal).unwrap().abs() < 1e-12);

        let split: Vec<(f64, f64)> = (1..=10)
            .map(|i| (i as f64 / 10.0, if i <= 5 { 0.8 } else { 0.9 }))
            .collect();
        assert!((compute_delta(&split).unwrap() - 0.10).abs() < 1e-12);

        // lows 0.60..0.64, highs 0.70..0.74: means 0.62 and 0.72.
        let graded: Vec<(f64, f64)> = (1..=10)
            .map(|i| {
                let acc = if i <= 5 {
                    0.60 + (i as f64 - 1.0) * 0.01
                } else {
                    0.70 + (i as f64 - 6.0) * 0.01
                };
                (i as f64 / 10.0, acc)
            })
            .collect();
        assert!((compute_delta(&graded).unwrap() - 0.10).abs() < 1e-12);
    }

    #[test]
    fn delta_rejects_missing_or_duplicate_grid_points() {
        let nine: Vec<(f64, f64)> = (1..=9).map(|i| (i as f64 / 10.0, 0.5)).collect();
        assert!(compute_delta(&nine).is_err());
        let mut dup: Vec<(f64, f64)> = (1..=10).map(|i| (i as f64 / 10.0, 0.5)).collect();
        dup[9] = (0.1, 0.5);
        assert!(compute_delta(&dup).is_err());
        assert!(compute_delta(&[(0.15, 0.5)]).is_err());
    }

    #[test]
    fn aggregate_overall_and_subgroups() {
        let outcomes = vec![
            ("a".to_string(), true, vec!["difficulty:easy".to_string()]),
            ("b".to_string(), true, vec!["difficulty:easy".to_string()]),
            ("c".to_string(), true, vec!["difficulty:hard".to_string()]),
            ("d".to_string(), false, vec!["difficulty:hard".to_string()]),
        ];
        let report = aggregate(&outcomes).unwrap();
        assert!((report.accuracy - 0.75).abs() < 1e-12);
        assert_eq!(report.n, 4);
        assert!((report.subgroups["difficulty:easy"].accuracy - 1.0).abs() < 1e-12);
        assert!((report.subgroups["difficulty:hard"].accuracy - 0.5).abs() < 1e-12);
        assert!(aggregate(&[]).is_err());
    }

    proptest! {
        #[test]
        fn truncate_is_idempotent_and_stop_free(
            text in ".{0,40}",
            stop_list in proptest::collection::vec("[A-Za-z\n]{1,3}", 1..4),
        ) {
            let stops: Vec<String> = stop_list;
            let once = truncate_at_stop(&text, &stops);
            let twice = truncate_at_stop(once, &stops);
            prop_assert_eq!(once, twice);
            for s in &stops {
                prop_assert!(!once.contains(s.as_str()));
            }
        }

        #[test]
        fn hash_stage_precedence_holds(prefix in "[a-z ]{0,20}", n in 0u32..100000) {
            let text = format!("{prefix}\\boxed{{{}}}\n#### {n}", n + 1);
            prop_assert_eq!(extract_math_answer(&text), Some(n.to_string()));
        }

        #[test]
        fn multichoice_is_shift_invariant(
            scores in proptest::collection::vec(-10.0f64..10.0, 2..6),
            shift in -5.0f64..5.0,
        ) {
            let base: Vec<(String, f64)> = scores
                .iter()
                .enumerate()
                .map(|(i, &s)| (format!("o{i}"), s))
                .collect();
            let shifted: Vec<(String, f64)> = base
                .iter()
                .map(|(o, s)| (o.clone(), s + shift))
                .collect();
            prop_assert_eq!(
                score_multichoice(&base).unwrap(),
                score_multichoice(&shifted).unwrap()
            );
        }

        #[test]
        fn delta_is_antisymmetric_under_block_swap(
            accs in proptest::collection::vec(0.0f64..1.0, 10),
        ) {
            let grid: Vec<(f64, f64)> = accs
                .iter()
                .enumerate()
                .map(|(i, &a)| ((i as f64 + 1.0) / 10.0, a))
                .collect();
            let swapped: Vec<(f64, f64)> = accs
                .iter()
                .enumerate()
                .map(|(i, _)| {
                    let j = (i + 5) % 10;
                    ((i as f64 + 1.0) / 10.0, accs[j])
                })
                .collect();
            let d1 = compute_delta(&grid).unwrap();
            let d2 = compute_delta(&swapped).unwrap();
            prop_assert!((d1 + d2).abs() < 1e-9);
        }

        #[test]
        fn subgroup_accuracies_recompose_the_overall(
            flags in proptest::collection::vec(any::<bool>(), 1..30),
        ) {
            // Partition examples into two disjoint tags; the count-weighted
            // subgroup accuracies must add back to the overall accuracy.
            let outcomes: Vec<(String, bool, Vec<String>)> = flags
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    let tag = if i % 3 == 0 { "g:a" } else { "g:b" };
                    (format!("q{i}"), c, vec![tag.to_string()])
                })
                .collect();
            let report = aggregate(&outcomes).unwrap();
            let weighted: f64 = report
                .subgroups
                .values()
                .map(|s| s.accuracy * s.n as f64)
                .sum();
            prop_assert!((weighted / report.n as f64 - report.accuracy).abs() < 1e-12);
        }
    }
}
