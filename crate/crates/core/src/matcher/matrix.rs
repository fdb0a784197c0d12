use crate::corpus::{TokenId, PAD};
use crate::numeric::ops::{cosine_backward_into, dot, norm, COSINE_EPS};
use crate::numeric::DenseArray;
use crate::scalar::Scalar;

/// Term-level cosine similarities between a query (rows) and a sentence
/// (columns). Rows or columns of PAD ids are exactly zero and masked.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingMatrix<S> {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<S>,
    pub row_mask: Vec<bool>,
    pub col_mask: Vec<bool>,
    dots: Vec<S>,
    row_norms: Vec<S>,
    col_norms: Vec<S>,
}

impl<S: Scalar> MatchingMatrix<S> {
    /// Matrix with every row and column active and no embedding provenance;
    /// not usable with [`matching_matrix_backward`].
    pub fn from_values(rows: usize, cols: usize, values: Vec<S>) -> Self {
        assert_eq!(values.len(), rows * cols, "matrix value count");
        Self {
            rows,
            cols,
            values,
            row_mask: vec![true; rows],
            col_mask: vec![true; cols],
            dots: vec![S::zero(); rows * cols],
            row_norms: vec![S::zero(); rows],
            col_norms: vec![S::zero(); cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.values[r * self.cols + c]
    }

    pub fn active_rows(&self) -> usize {
        self.row_mask.iter().filter(|&&m| m).count()
    }

    /// Copy zero-padded (or truncated) to `rows × cols`.
    pub fn padded(&self, rows: usize, cols: usize) -> DenseArray<S> {
        let mut out = DenseArray::zeros(&[rows, cols]);
        let o = out.as_mut_slice();
        for r in 0..self.rows.min(rows) {
            for c in 0..self.cols.min(cols) {
                o[r * cols + c] = self.values[r * self.cols + c];
            }
        }
        out
    }
}

pub fn matching_matrix<S: Scalar>(
    query: &[TokenId],
    sentence: &[TokenId],
    embeddings: &DenseArray<S>,
) -> MatchingMatrix<S> {
    let (rows, cols) = (query.len(), sentence.len());
    let row_mask: Vec<bool> = query.iter().map(|&t| t != PAD).collect();
    let col_mask: Vec<bool> = sentence.iter().map(|&t| t != PAD).collect();
    let row_norms: Vec<S> = query.iter().map(|&t| norm(embeddings.row(t as usize))).collect();
    let col_norms: Vec<S> = sentence.iter().map(|&t| norm(embeddings.row(t as usize))).collect();
    let mut values = vec![S::zero(); rows * cols];
    let mut dots = vec![S::zero(); rows * cols];
    let eps = S::lit(COSINE_EPS);
    for (i, &q) in query.iter().enumerate() {
        if !row_mask[i] {
            continue;
        }
        let qe = embeddings.row(q as usize);
        for (j, &s) in sentence.iter().enumerate() {
            if !col_mask[j] {
                continue;
            }
            let d = dot(qe, embeddings.row(s as usize));
            dots[i * cols + j] = d;
            values[i * cols + j] = d / (row_norms[i] * col_norms[j] + eps);
        }
    }
    MatchingMatrix {
        rows,
        cols,
        values,
        row_mask,
        col_mask,
        dots,
        row_norms,
        col_norms,
    }
}

/// Accumulates embedding gradients for upstream `d_values` (`rows × cols`).
pub fn matching_matrix_backward<S: Scalar>(
    query: &[TokenId],
    sentence: &[TokenId],
    embeddings: &DenseArray<S>,
    m: &MatchingMatrix<S>,
    d_values: &[S],
    d_embeddings: &mut [S],
) {
    let dim = embeddings.row_len();
    let mut dq = vec![S::zero(); m.rows * dim];
    let mut ds = vec![S::zero(); m.cols * dim];
    let mut touched = false;
    for i in 0..m.rows {
        if !m.row_mask[i] {
            continue;
        }
        let qe = embeddings.row(query[i] as usize);
        for j in 0..m.cols {
            let g = d_values[i * m.cols + j];
            if !m.col_mask[j] || g == S::zero() {
                continue;
            }
            touched = true;
            cosine_backward_into(
                qe,
                embeddings.row(sentence[j] as usize),
                m.dots[i * m.cols + j],
                m.row_norms[i],
                m.col_norms[j],
                g,
                Some(&mut dq[i * dim..(i + 1) * dim]),
                Some(&mut ds[j * dim..(j + 1) * dim]),
            );
        }
    }
    if !touched {
        return;
    }
    for (ids, buf) in [(query, &dq), (sentence, &ds)] {
        for (p, &t) in ids.iter().enumerate() {
            if t == PAD {
                continue;
            }
            let row = &mut d_embeddings[t as usize * dim..(t as usize + 1) * dim];
            for (r, &g) in row.iter_mut().zip(&buf[p * dim..(p + 1) * dim]) {
                *r += g;
            }
        }
    }
}
