//! Line-oriented file formats: JSON-lines documents and queries, TREC-style
//! qrels, and planted-sentence ground truth.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::document::{GradedJudgment, MAX_GRADE};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DocRecord {
    pub doc_id: String,
    pub title: String,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryRecord {
    pub query_id: String,
    pub text: String,
}

/// Body sentence positions of a document that were planted with query terms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedRecord {
    pub query_id: String,
    pub doc_id: String,
    pub indices: Vec<usize>,
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    parse_jsonl(open(path)?, path)
}

pub fn parse_jsonl<T: DeserializeOwned, R: BufRead>(r: R, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| Error::Data(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_qrels(path: &Path) -> Result<Vec<GradedJudgment>> {
    parse_qrels(open(path)?, path)
}

/// Parses `query_id iteration doc_id grade` lines. The iteration column is
/// ignored. Grades outside `[0, 4]` and duplicate pairs are rejected.
pub fn parse_qrels<R: BufRead>(r: R, path: &Path) -> Result<Vec<GradedJudgment>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 4 {
            return Err(Error::parse(path, n, format!("expected 4 columns, found {}", cols.len())));
        }
        let grade: i64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(path, n, format!("grade `{}` is not an integer", cols[3])))?;
        if !(0..=MAX_GRADE as i64).contains(&grade) {
            return Err(Error::parse(path, n, format!("grade {grade} outside [0, {MAX_GRADE}]")));
        }
        if !seen.insert((cols[0].to_owned(), cols[2].to_owned())) {
            return Err(Error::parse(
                path,
                n,
                format!("duplicate judgment for ({}, {})", cols[0], cols[2]),
            ));
        }
        out.push(GradedJudgment {
            query_id: cols[0].to_owned(),
            doc_id: cols[2].to_owned(),
            grade: grade as u8,
        });
    }
    Ok(out)
}

pub fn write_qrels(path: &Path, judgments: &[GradedJudgment]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for j in judgments {
        writeln!(w, "{} 0 {} {}", j.query_id, j.doc_id, j.grade)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_planted(path: &Path) -> Result<Vec<PlantedRecord>> {
    parse_planted(open(path)?, path)
}

/// Parses `query_id doc_id i,j,k` lines; `-` denotes no planted sentence.
pub fn parse_planted<R: BufRead>(r: R, path: &Path) -> Result<Vec<PlantedRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = trimmed.split_whitespace().collect();
        if cols.len() != 3 {
            return Err(Error::parse(path, n, format!("expected 3 columns, found {}", cols.len())));
        }
        let indices = if cols[2] == "-" {
            Vec::new()
        } else {
            cols[2]
                .split(',')
                .map(|s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::parse(path, n, format!("bad sentence index `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?
        };
        out.push(PlantedRecord {
            query_id: cols[0].to_owned(),
            doc_id: cols[1].to_owned(),
            indices,
        });
    }
    Ok(out)
}

pub fn write_planted(path: &Path, records: &[PlantedRecord]) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for r in records {
        let idx = if r.indices.is_empty() {
            "-".to_owned()
        } else {
            r.indices.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
        };
        writeln!(w, "{} {} {}", r.query_id, r.doc_id, idx)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qrels_parse_and_validate() {
        let p = Path::new("q.txt");
        let ok = parse_qrels("q1 0 d1 3\nq1 Q0 d2 0\n\n".as_bytes(), p).unwrap();
        assert_eq!(ok.len(), 2);
        assert_eq!(ok[0].grade, 3);

        let err = parse_qrels("q1 0 d1 3\nq1 0 d2 5\n".as_bytes(), p).unwrap_err();
        assert!(err.to_string().starts_with("q.txt:2:"), "{err}");
        let err = parse_qrels("q1 0 d1\n".as_bytes(), p).unwrap_err();
        assert!(err.to_string().starts_with("q.txt:1:"));
        let err = parse_qrels("q1 0 d1 1\nq1 0 d1 2\n".as_bytes(), p).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
        assert!(parse_qrels("q1 0 d1 -1\n".as_bytes(), p).is_err());
    }

    #[test]
    fn jsonl_rejects_malformed_line() {
        let text = "{\"query_id\":\"q1\",\"text\":\"a b\"}\n{\"query_id\":\"q2\"}\n";
        let err = parse_jsonl::<QueryRecord, _>(text.as_bytes(), Path::new("queries.jsonl"))
            .unwrap_err();
        assert!(err.to_string().starts_with("queries.jsonl:2:"), "{err}");
        let extra = "{\"query_id\":\"q1\",\"text\":\"a\",\"x\":1}\n";
        assert!(parse_jsonl::<QueryRecord, _>(extra.as_bytes(), Path::new("f")).is_err());
    }

    #[test]
    fn planted_parse() {
        let recs = parse_planted("q d 1,4\nq e -\n".as_bytes(), Path::new("p")).unwrap();
        assert_eq!(recs[0].indices, vec![1, 4]);
        assert!(recs[1].indices.is_empty());
        assert!(parse_planted("q d x\n".as_bytes(), Path::new("p")).is_err());
    }
}
