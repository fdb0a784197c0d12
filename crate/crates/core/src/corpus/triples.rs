use std::collections::BTreeMap;

use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::document::{EncodedDocument, GradedJudgment, Query};
use crate::rng::substream;

/// A training unit `(q, d+, d-)` with `grade(d+) > grade(d-)`.
#[derive(Debug, Clone, Copy)]
pub struct Triple<'a> {
    pub query: &'a Query,
    pub positive: &'a EncodedDocument,
    pub negative: &'a EncodedDocument,
    pub grade_gap: u8,
}

/// A sampled pair, still referring to queries and documents by id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairPlan {
    pub query_id: String,
    pub positive_id: String,
    pub negative_id: String,
    pub grade_gap: u8,
}

pub const DEFAULT_PAIR_BUDGET: usize = 10;

/// Forms grade-ordered pairs per query. When a query has more than `budget`
/// valid pairs, `budget` of them are drawn uniformly without replacement.
/// Queries are visited in id order and every query has its own random stream,
/// so the output depends only on the judgments and the seed.
pub fn make_triples(judgments: &[GradedJudgment], budget: Option<usize>, seed: u64) -> Vec<PairPlan> {
    let mut by_query: BTreeMap<&str, Vec<(&str, u8)>> = BTreeMap::new();
    for j in judgments {
        by_query.entry(&j.query_id).or_default().push((&j.doc_id, j.grade));
    }
    let mut out = Vec::new();
    for (ordinal, (qid, mut docs)) in by_query.into_iter().enumerate() {
        docs.sort();
        let mut pairs = Vec::new();
        for &(pos, gp) in &docs {
            for &(neg, gn) in &docs {
                if gp > gn {
                    pairs.push((pos, neg, gp - gn));
                }
            }
        }
        let chosen: Vec<usize> = match budget {
            Some(b) if pairs.len() > b => {
                let mut rng: ChaCha8Rng = substream(seed, ordinal as u64);
                let mut idx = index::sample(&mut rng, pairs.len(), b).into_vec();
                idx.sort_unstable();
                idx
            }
            _ => (0..pairs.len()).collect(),
        };
        out.extend(chosen.into_iter().map(|i| {
            let (p, n, gap) = pairs[i];
            PairPlan {
                query_id: qid.to_owned(),
                positive_id: p.to_owned(),
                negative_id: n.to_owned(),
                grade_gap: gap,
            }
        }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judg(q: &str, docs: &[(&str, u8)]) -> Vec<GradedJudgment> {
        docs.iter()
            .map(|&(d, g)| GradedJudgment {
                query_id: q.into(),
                doc_id: d.into(),
                grade: g,
            })
            .collect()
    }

    #[test]
    fn single_valid_pair() {
        let t = make_triples(&judg("q", &[("dA", 3), ("dB", 1)]), None, 0);
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].positive_id.as_str(), t[0].negative_id.as_str()), ("dA", "dB"));
        assert_eq!(t[0].grade_gap, 2);
    }

    #[test]
    fn equal_grades_yield_nothing() {
        assert!(make_triples(&judg("q", &[("a", 2), ("b", 2), ("c", 2)]), None, 0).is_empty());
    }

    #[test]
    fn three_levels_enumerate_all_pairs() {
        let j = judg("q", &[("a", 4), ("b", 2), ("c", 0)]);
        // oracle: every ordered pair (x, y) with grade(x) > grade(y)
        let mut expected = Vec::new();
        for x in &j {
            for y in &j {
                if x.grade > y.grade {
                    expected.push((x.doc_id.clone(), y.doc_id.clone()));
                }
            }
        }
        let mut got: Vec<_> = make_triples(&j, None, 3)
            .into_iter()
            .map(|p| (p.positive_id, p.negative_id))
            .collect();
        got.sort();
        expected.sort();
        assert_eq!(got, expected);
        assert_eq!(got.len(), 3);
    }

    #[test]
    fn budget_is_respected_and_seeded() {
        let docs: Vec<(String, u8)> = (0..10).map(|i| (format!("d{i}"), (i % 5) as u8)).collect();
        let j: Vec<GradedJudgment> = docs
            .iter()
            .map(|(d, g)| GradedJudgment {
                query_id: "q".into(),
                doc_id: d.clone(),
                grade: *g,
            })
            .collect();
        let a = make_triples(&j, Some(10), 11);
        assert_eq!(a.len(), 10);
        assert_eq!(a, make_triples(&j, Some(10), 11));
        assert_ne!(a, make_triples(&j, Some(10), 12));
    }
}
