//! Exhaustive search over sequences of a given length.

use std::collections::BTreeSet;

use crate::error::{PulseError, Result};
use crate::pulseshape::PulseShape;
use crate::spinmodel::ChainModel;

use super::order::{classify_order, ClassifyOptions, IntervalCache, OrderReport};
use super::{IntervalSpec, Sequence, Token};

pub const DEFAULT_BUDGET: u128 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOptions {
    pub classify: ClassifyOptions,
    /// Largest number of raw candidates |alphabet|^length.
    pub budget: u128,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { classify: ClassifyOptions::default(), budget: DEFAULT_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchHit {
    pub sequence: Sequence,
    pub report: OrderReport,
}

#[derive(Clone, Debug, Default)]
pub struct SearchResult {
    /// Representatives reaching the best order, in canonical order.
    pub hits: Vec<SearchHit>,
    pub best_order: Option<usize>,
    pub candidates: u128,
    /// Symmetry classes actually classified.
    pub classes: usize,
    /// Classes whose classification was ambiguous.
    pub ambiguous: Vec<(Sequence, PulseError)>,
}

/// The symmetry images of a sequence: identity, global sign flip, sublattice
/// relabeling and both.
fn images(seq: &Sequence) -> [Sequence; 4] {
    [seq.clone(), seq.map(Token::negated), seq.map(Token::relabeled), seq.map(|t| t.negated().relabeled())]
}

/// Smallest image that is still spelled in `alphabet`; the candidate itself
/// always qualifies, so every class has exactly one representative.
pub fn canonical(seq: &Sequence, alphabet: &[IntervalSpec]) -> Sequence {
    images(seq)
        .into_iter()
        .filter(|s| s.intervals.iter().all(|i| alphabet.contains(i)))
        .min()
        .expect("identity image lies in the alphabet")
}

pub fn token_alphabet(tokens: &[Token]) -> Vec<IntervalSpec> {
    tokens.iter().map(|t| IntervalSpec::single(*t)).collect()
}

fn candidate_count(alphabet: usize, length: usize) -> u128 {
    (0..length).fold(1u128, |acc, _| acc.saturating_mul(alphabet as u128))
}

fn decode(mut index: u128, length: usize, alphabet: &[IntervalSpec]) -> Sequence {
    let base = alphabet.len() as u128;
    let mut intervals = vec![IntervalSpec::idle(); length];
    for slot in (0..length).rev() {
        intervals[slot] = alphabet[(index % base) as usize].clone();
        index /= base;
    }
    Sequence { intervals }
}

/// Classifies every sequence of `length` intervals drawn from `alphabet`, one
/// per symmetry class, and returns the representatives of maximal order.
pub fn search_sequences(
    length: usize,
    alphabet: &[IntervalSpec],
    shape: &PulseShape,
    model: &ChainModel,
    opts: &SearchOptions,
) -> Result<SearchResult> {
    if length == 0 || alphabet.is_empty() {
        return Err(PulseError::InvalidArgument("search needs a positive length and a nonempty alphabet".into()));
    }
    let mut alphabet: Vec<IntervalSpec> = alphabet.to_vec();
    alphabet.sort();
    alphabet.dedup();
    let count = candidate_count(alphabet.len(), length);
    if count > opts.budget {
        return Err(PulseError::Budget { count, budget: opts.budget });
    }
    let classes: BTreeSet<Sequence> = (0..count).map(|i| canonical(&decode(i, length, &alphabet), &alphabet)).collect();
    let classes: Vec<Sequence> = classes.into_iter().collect();
    let cache = IntervalCache::new();
    let classify = |seq: &Sequence| classify_order(seq, shape, model, &opts.classify, &cache);

    #[cfg(feature = "parallel")]
    let reports: Vec<Result<OrderReport>> = {
        use rayon::prelude::*;
        classes.par_iter().map(classify).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let reports: Vec<Result<OrderReport>> = classes.iter().map(classify).collect();

    let mut out = SearchResult { candidates: count, classes: classes.len(), ..Default::default() };
    let mut scored = Vec::new();
    for (seq, rep) in classes.into_iter().zip(reports) {
        match rep {
            Ok(report) => scored.push(SearchHit { sequence: seq, report }),
            Err(e @ PulseError::Ambiguous { .. }) => out.ambiguous.push((seq, e)),
            Err(e) => return Err(e),
        }
    }
    out.best_order = scored.iter().map(|h| h.report.order).max();
    if let Some(best) = out.best_order {
        out.hits = scored.into_iter().filter(|h| h.report.order == best).collect();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulseshape::builtin;
    use crate::sequences::{parse_sequence, Axis};
    use crate::spinmodel::Parity;

    #[test]
    fn canonical_representatives() {
        let alphabet = token_alphabet(&Token::all());
        let a = parse_sequence("~Y2 X1").unwrap();
        let c = canonical(&a, &alphabet);
        assert_eq!(c.to_string(), "Y1 ~X2");
        for img in images(&a) {
            assert_eq!(canonical(&img, &alphabet), c);
        }
        let restricted = token_alphabet(&[Token::new(Axis::X, Parity::Odd, false), Token::new(Axis::X, Parity::Odd, true)]);
        assert_eq!(canonical(&parse_sequence("~X1 ~X1").unwrap(), &restricted).to_string(), "X1 X1");
    }

    #[test]
    fn class_counts() {
        let alphabet = token_alphabet(&Token::all());
        let classes: BTreeSet<Sequence> = (0..64).map(|i| canonical(&decode(i, 2, &alphabet), &alphabet)).collect();
        // each class has exactly four distinct members for length ≥ 1
        assert_eq!(classes.len(), 16);
    }

    #[test]
    fn budget_is_enforced() {
        let alphabet = token_alphabet(&Token::all());
        let opts = SearchOptions { budget: 1000, ..Default::default() };
        let err = search_sequences(4, &alphabet, &builtin("S1").unwrap(), &ChainModel::ising(1.0), &opts).unwrap_err();
        assert_eq!(err, PulseError::Budget { count: 4096, budget: 1000 });
    }

    #[test]
    fn single_q1_pulse() {
        let alphabet = token_alphabet(&[Token::new(Axis::X, Parity::Odd, false)]);
        let opts = SearchOptions { classify: ClassifyOptions::with_k_max(4), ..Default::default() };
        let r = search_sequences(1, &alphabet, &builtin("Q1").unwrap(), &ChainModel::ising(1.0), &opts).unwrap();
        assert_eq!(r.best_order, Some(2));
        assert_eq!(r.hits.len(), 1);
    }

    #[test]
    fn two_s1_pulses() {
        let x = Token::new(Axis::X, Parity::Odd, false);
        let alphabet = token_alphabet(&[x, x.negated()]);
        let opts = SearchOptions { classify: ClassifyOptions::with_k_max(4), ..Default::default() };
        let r = search_sequences(2, &alphabet, &builtin("S1").unwrap(), &ChainModel::ising(1.0), &opts).unwrap();
        assert_eq!((r.candidates, r.classes), (4, 2));
        // the echo X1 ~X1 cancels even orders too and beats X1 X1 (order 1)
        assert_eq!(r.best_order, Some(2));
        assert_eq!(r.hits.len(), 1);
        assert_eq!(r.hits[0].sequence.to_string(), "X1 ~X1");
    }
}
