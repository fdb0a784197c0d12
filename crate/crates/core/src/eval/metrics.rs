use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NDCG_CUTOFFS: [usize; 4] = [1, 3, 5, 10];
pub const DEFAULT_MAP_THRESHOLD: u8 = 2;
pub const DEFAULT_LOG_BASE: f64 = 2.0;

fn gain(g: u8) -> f64 {
    (1u64 << g) as f64 - 1.0
}

/// `Σ_{m ≤ min(k, n)} (2^g_m − 1) / log_base(1 + m)`.
pub fn dcg_at_k(grades: &[u8], k: usize, base: f64) -> f64 {
    grades
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / ((i + 2) as f64).log(base))
        .sum()
}

pub fn ndcg_at_k(grades: &[u8], k: usize) -> Result<f64> {
    ndcg_at_k_base(grades, k, DEFAULT_LOG_BASE)
}

/// DCG normalized by the grade-descending ordering; 0 when every grade is 0.
pub fn ndcg_at_k_base(grades: &[u8], k: usize, base: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("ndcg cutoff must be >= 1".into()));
    }
    if !(base > 1.0) {
        return Err(Error::InvalidConfig(format!("ndcg log base must be > 1, got {base}")));
    }
    let mut ideal = grades.to_vec();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg_at_k(&ideal, k, base);
    if idcg == 0.0 {
        return Ok(0.0);
    }
    Ok(dcg_at_k(grades, k, base) / idcg)
}

/// Mean precision at the ranks of documents with grade ≥ `threshold`; 0
/// when there are none.
pub fn average_precision(grades: &[u8], threshold: u8) -> f64 {
    let mut hits = 0usize;
    let mut total = 0.0;
    for (i, _) in grades.iter().enumerate().filter(|(_, &g)| g >= threshold) {
        hits += 1;
        total += hits as f64 / (i + 1) as f64;
    }
    if hits == 0 {
        0.0
    } else {
        total / hits as f64
    }
}

fn check_threshold(threshold: u8) -> Result<()> {
    if !(1..=crate::corpus::MAX_GRADE).contains(&threshold) {
        return Err(Error::InvalidConfig(format!("relevance threshold must be in [1, 4], got {threshold}")));
    }
    Ok(())
}

pub fn map_score(lists: &[RankedList], threshold: u8) -> Result<f64> {
    check_threshold(threshold)?;
    if lists.is_empty() {
        return Ok(0.0);
    }
    Ok(lists.iter().map(|l| average_precision(&l.grades, threshold)).sum::<f64>() / lists.len() as f64)
}

/// One query's judged documents in ranked order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub doc_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub grades: Vec<u8>,
}

impl RankedList {
    /// Sorts by descending score; equal scores fall back to doc id order.
    pub fn from_scored(query_id: &str, mut items: Vec<(String, f64, u8)>) -> Self {
        items.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut list = Self {
            query_id: query_id.to_owned(),
            doc_ids: Vec::with_capacity(items.len()),
            scores: Vec::with_capacity(items.len()),
            grades: Vec::with_capacity(items.len()),
        };
        for (d, s, g) in items {
            list.doc_ids.push(d);
            list.scores.push(s);
            list.grades.push(g);
        }
        list
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ndcg: Vec<f64>,
    pub average_precision: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cutoffs: Vec<usize>,
    /// Mean NDCG at each cutoff.
    pub ndcg: Vec<f64>,
    pub map: f64,
    pub map_threshold: u8,
    pub queries: usize,
    pub per_query: Vec<QueryMetrics>,
}

impl MetricsReport {
    pub fn from_lists(lists: &[RankedList], cutoffs: &[usize], threshold: u8, log_base: f64) -> Result<Self> {
        check_threshold(threshold)?;
        let mut per_query = Vec::with_capacity(lists.len());
        for l in lists {
            let ndcg = cutoffs
                .iter()
                .map(|&k| ndcg_at_k_base(&l.grades, k, log_base))
                .collect::<Result<Vec<_>>>()?;
            per_query.push(QueryMetrics {
                query_id: l.query_id.clone(),
                ndcg,
                average_precision: average_precision(&l.grades, threshold),
            });
        }
        let n = per_query.len().max(1) as f64;
        let ndcg = (0..cutoffs.len())
            .map(|c| per_query.iter().map(|q| q.ndcg[c]).sum::<f64>() / n)
            .collect();
        let map = per_query.iter().map(|q| q.average_precision).sum::<f64>() / n;
        Ok(Self {
            cutoffs: cutoffs.to_vec(),
            ndcg,
            map,
            map_threshold: threshold,
            queries: per_query.len(),
            per_query,
        })
    }

    pub fn standard(lists: &[RankedList]) -> Result<Self> {
        Self::from_lists(lists, &NDCG_CUTOFFS, DEFAULT_MAP_THRESHOLD, DEFAULT_LOG_BASE)
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.cutoffs.iter().position(|&c| c == k).map(|i| self.ndcg[i])
    }

    /// `key=value` lines, metadata first.
    pub fn to_kv(&self, meta: &[(&str, String)]) -> String {
        let mut out = String::new();
        for (k, v) in meta {
            let _ = writeln!(out, "{k}={v}");
        }
        let _ = writeln!(out, "queries={}", self.queries);
        for (k, v) in self.cutoffs.iter().zip(&self.ndcg) {
            let _ = writeln!(out, "ndcg@{k}={v:.6}");
        }
        let _ = writeln!(out, "map={:.6}", self.map);
        out
    }

    pub fn to_table(&self) -> String {
        let mut head = String::new();
        let mut row = String::new();
        for (k, v) in self.cutoffs.iter().zip(&self.ndcg) {
            let _ = write!(head, "{:>10}", format!("NDCG@{k}"));
            let _ = write!(row, "{v:>10.4}");
        }
        let _ = write!(head, "{:>10}{:>10}", "MAP", "queries");
        let _ = write!(row, "{:>10.4}{:>10}", self.map, self.queries);
        format!("{head}\n{row}\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndcg_examples() {
        assert!((ndcg_at_k(&[4, 3, 2], 3).unwrap() - 1.0).abs() < 1e-15);
        let v = ndcg_at_k(&[0, 4], 2).unwrap();
        assert!((v - 1.0 / 3f64.log2()).abs() < 1e-12);
        assert!((v - 0.6309).abs() < 1e-4);
        assert_eq!(ndcg_at_k(&[0, 0, 0], 3).unwrap(), 0.0);
        assert!(ndcg_at_k(&[1], 0).is_err());
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[3, 2, 4], 2), 1.0);
        assert_eq!(average_precision(&[0, 2, 1], 2), 0.5);
        assert_eq!(average_precision(&[0, 1, 1], 2), 0.0);
    }

    #[test]
    fn ties_fall_back_to_doc_id() {
        let l = RankedList::from_scored(
            "q",
            vec![("b".into(), 1.0, 0), ("a".into(), 1.0, 2), ("c".into(), 2.0, 1)],
        );
        assert_eq!(l.doc_ids, vec!["c", "a", "b"]);
    }

    #[test]
    fn report_aggregates_per_query_means() {
        let lists = vec![
            RankedList::from_scored("q1", vec![("a".into(), 2.0, 4), ("b".into(), 1.0, 0)]),
            RankedList::from_scored("q2", vec![("a".into(), 2.0, 0), ("b".into(), 1.0, 4)]),
        ];
        let r = MetricsReport::standard(&lists).unwrap();
        assert_eq!(r.queries, 2);
        assert!((r.ndcg_at(1).unwrap() - 0.5).abs() < 1e-15);
        assert!((r.map - 0.75).abs() < 1e-15);
        assert!(r.to_kv(&[("seed", "1".into())]).starts_with("seed=1\nqueries=2\nndcg@1=0.500000\n"));
        assert!(map_score(&lists, 0).is_err());
    }
}
