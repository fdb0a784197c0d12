//! Single-channel valid convolution with ReLU and dynamic max pooling.

use super::array::DenseArray;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(maps, kh, kw)` from a `[maps, 1, kh, kw]` kernel array.
fn kernel_dims<S: Scalar>(kernels: &DenseArray<S>) -> Result<(usize, usize, usize)> {
    match kernels.shape() {
        &[m, 1, kh, kw] => Ok((m, kh, kw)),
        s => Err(Error::Dimension(format!("kernels must be [maps, 1, kh, kw], got {s:?}"))),
    }
}

fn matrix_dims<S: Scalar>(input: &DenseArray<S>) -> Result<(usize, usize)> {
    match input.shape() {
        &[h, w] => Ok((h, w)),
        s => Err(Error::Dimension(format!("input must be a matrix, got {s:?}"))),
    }
}

/// Valid cross-correlation of a matrix with every kernel, plus bias, then
/// ReLU. Output shape `[maps, h - kh + 1, w - kw + 1]`.
pub fn conv2d_valid<S: Scalar>(
    input: &DenseArray<S>,
    kernels: &DenseArray<S>,
    bias: &[S],
) -> Result<DenseArray<S>> {
    let (h, w) = matrix_dims(input)?;
    let (maps, kh, kw) = kernel_dims(kernels)?;
    if bias.len() != maps {
        return Err(Error::Dimension(format!("bias has {} entries for {maps} maps", bias.len())));
    }
    if kh > h || kw > w {
        return Err(Error::Dimension(format!(
            "window {kh}x{kw} larger than input {h}x{w}"
        )));
    }
    let (oh, ow) = (h - kh + 1, w - kw + 1);
    let src = input.as_slice();
    let k = kernels.as_slice();
    let mut out = DenseArray::zeros(&[maps, oh, ow]);
    let o = out.as_mut_slice();
    for m in 0..maps {
        let map = &mut o[m * oh * ow..(m + 1) * oh * ow];
        map.iter_mut().for_each(|v| *v = bias[m]);
        for dr in 0..kh {
            for dc in 0..kw {
                let wv = k[(m * kh + dr) * kw + dc];
                if wv == S::zero() {
                    continue;
                }
                for r in 0..oh {
                    let in_row = &src[(r + dr) * w + dc..(r + dr) * w + dc + ow];
                    let out_row = &mut map[r * ow..(r + 1) * ow];
                    for (ov, &iv) in out_row.iter_mut().zip(in_row) {
                        *ov += wv * iv;
                    }
                }
            }
        }
        map.iter_mut().for_each(|v| {
            if *v < S::zero() {
                *v = S::zero()
            }
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads<S> {
    pub d_input: DenseArray<S>,
    pub d_kernels: DenseArray<S>,
    pub d_bias: Vec<S>,
}

/// Accumulating backward of [`conv2d_valid`]. `output` is the post-ReLU
/// forward result and `d_output` the upstream gradient of the same shape.
pub fn conv2d_valid_backward_into<S: Scalar>(
    input: &DenseArray<S>,
    kernels: &DenseArray<S>,
    output: &DenseArray<S>,
    d_output: &[S],
    mut d_input: Option<&mut [S]>,
    d_kernels: &mut [S],
    d_bias: &mut [S],
) {
    let w = input.shape()[1];
    let (maps, kh, kw) = (kernels.shape()[0], kernels.shape()[2], kernels.shape()[3]);
    let (oh, ow) = (output.shape()[1], output.shape()[2]);
    let src = input.as_slice();
    let k = kernels.as_slice();
    let out = output.as_slice();
    let mut pre = vec![S::zero(); oh * ow];
    for m in 0..maps {
        let base = m * oh * ow;
        let mut any = false;
        for i in 0..oh * ow {
            // ReLU gate: strictly positive outputs pass the gradient
            pre[i] = if out[base + i] > S::zero() { d_output[base + i] } else { S::zero() };
            any |= pre[i] != S::zero();
        }
        if !any {
            continue;
        }
        d_bias[m] += pre.iter().copied().sum::<S>();
        for dr in 0..kh {
            for dc in 0..kw {
                let ki = (m * kh + dr) * kw + dc;
                let mut acc = S::zero();
                for r in 0..oh {
                    let in_row = &src[(r + dr) * w + dc..(r + dr) * w + dc + ow];
                    let g_row = &pre[r * ow..(r + 1) * ow];
                    for (&g, &iv) in g_row.iter().zip(in_row) {
                        acc += g * iv;
                    }
                }
                d_kernels[ki] += acc;
                if let Some(di) = d_input.as_deref_mut() {
                    let wv = k[ki];
                    for r in 0..oh {
                        let di_row = &mut di[(r + dr) * w + dc..(r + dr) * w + dc + ow];
                        let g_row = &pre[r * ow..(r + 1) * ow];
                        for (d, &g) in di_row.iter_mut().zip(g_row) {
                            *d += wv * g;
                        }
                    }
                }
            }
        }
    }
}

pub fn conv2d_valid_backward<S: Scalar>(
    input: &DenseArray<S>,
    kernels: &DenseArray<S>,
    output: &DenseArray<S>,
    d_output: &[S],
) -> ConvGrads<S> {
    let mut g = ConvGrads {
        d_input: DenseArray::zeros(input.shape()),
        d_kernels: DenseArray::zeros(kernels.shape()),
        d_bias: vec![S::zero(); kernels.shape()[0]],
    };
    conv2d_valid_backward_into(
        input,
        kernels,
        output,
        d_output,
        Some(g.d_input.as_mut_slice()),
        g.d_kernels.as_mut_slice(),
        &mut g.d_bias,
    );
    g
}

/// Pooled maps plus, per output cell, the flat index of the winning input.
#[derive(Debug, Clone, PartialEq)]
pub struct Pooled<S> {
    pub values: DenseArray<S>,
    pub argmax: Vec<usize>,
}

/// Cell `i` of `n` over an axis of length `len` spans `[⌊i·len/n⌋, ⌊(i+1)·len/n⌋)`.
#[inline]
pub fn cell_bounds(i: usize, n: usize, len: usize) -> (usize, usize) {
    (i * len / n, (i + 1) * len / n)
}

/// Max over a near-equal `out_rows × out_cols` grid of every map. Ties go to
/// the first position in row-major order.
pub fn dynamic_max_pool<S: Scalar>(
    maps: &DenseArray<S>,
    out_rows: usize,
    out_cols: usize,
) -> Result<Pooled<S>> {
    let &[m, h, w] = maps.shape() else {
        return Err(Error::Dimension(format!("maps must be 3-D, got {:?}", maps.shape())));
    };
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::Dimension("pooling grid must be at least 1x1".into()));
    }
    if out_rows > h || out_cols > w {
        return Err(Error::Dimension(format!(
            "pooling grid {out_rows}x{out_cols} larger than map {h}x{w}"
        )));
    }
    let src = maps.as_slice();
    let mut values = DenseArray::zeros(&[m, out_rows, out_cols]);
    let mut argmax = Vec::with_capacity(m * out_rows * out_cols);
    let dst = values.as_mut_slice();
    let mut o = 0;
    for map in 0..m {
        for i in 0..out_rows {
            let (r0, r1) = cell_bounds(i, out_rows, h);
            for j in 0..out_cols {
                let (c0, c1) = cell_bounds(j, out_cols, w);
                let mut best = map * h * w + r0 * w + c0;
                for r in r0..r1 {
                    for c in c0..c1 {
                        let idx = map * h * w + r * w + c;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                }
                dst[o] = src[best];
                argmax.push(best);
                o += 1;
            }
        }
    }
    Ok(Pooled { values, argmax })
}

/// Routes pooled gradients back to their argmax positions.
pub fn dynamic_max_pool_backward_into<S: Scalar>(argmax: &[usize], d_pooled: &[S], d_maps: &mut [S]) {
    for (&idx, &g) in argmax.iter().zip(d_pooled) {
        d_maps[idx] += g;
    }
}

pub fn dynamic_max_pool_backward<S: Scalar>(
    pooled: &Pooled<S>,
    d_pooled: &[S],
    input_shape: &[usize],
) -> DenseArray<S> {
    let mut d = DenseArray::zeros(input_shape);
    dynamic_max_pool_backward_into(&pooled.argmax, d_pooled, d.as_mut_slice());
    d
}
