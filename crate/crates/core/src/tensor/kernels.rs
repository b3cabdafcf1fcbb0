//! Loop kernels shared by the forward and backward passes.

/// `out[m×n] += a[m×k] · b[k×n]`.
pub(crate) fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            out_row.iter_mut().zip(b_row).for_each(|(o, bv)| *o += av * bv);
        }
    }
}

/// `out[m×k] += a[m×n] · b[k×n]ᵀ`.
pub(crate) fn gemm_a_bt(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    for i in 0..m {
        let a_row = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let b_row = &b[p * n..(p + 1) * n];
            out[i * k + p] += a_row.iter().zip(b_row).map(|(x, y)| x * y).sum::<f64>();
        }
    }
}

/// `out[k×n] += a[m×k]ᵀ · b[m×n]`.
pub(crate) fn gemm_at_b(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    for i in 0..m {
        let b_row = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            out_row.iter_mut().zip(b_row).for_each(|(o, bv)| *o += av * bv);
        }
    }
}

/// Transposes each trailing `[rows×cols]` block.
pub(crate) fn transpose_blocks(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let block = rows * cols;
    let mut out = vec![0.0; data.len()];
    if block == 0 {
        return out;
    }
    for (src, dst) in data.chunks(block).zip(out.chunks_mut(block)) {
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }
    out
}

pub(crate) fn add_assign(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

/// Numerically stable softmax of one slice.
pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    row.iter_mut().for_each(|x| *x /= total);
}

pub(crate) struct ConvGeometry {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len: usize,
    pub width: usize,
}

impl ConvGeometry {
    /// Valid output range `[lo, hi)` for tap `k`, and the input offset.
    fn tap(&self, k: usize) -> (usize, usize, isize) {
        let shift = k as isize - (self.width / 2) as isize;
        let lo = (-shift).max(0) as usize;
        let hi = (self.len as isize - shift).clamp(0, self.len as isize) as usize;
        if lo >= hi {
            // The tap never overlaps the input.
            return (0, 0, 0);
        }
        (lo, hi, shift)
    }
}

pub(crate) fn conv1d_forward(g: &ConvGeometry, x: &[f64], w: &[f64], bias: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.c_out * g.len];
    for b in 0..g.batch {
        for o in 0..g.c_out {
            let y = &mut out[(b * g.c_out + o) * g.len..(b * g.c_out + o + 1) * g.len];
            y.iter_mut().for_each(|v| *v = bias[o]);
            for i in 0..g.c_in {
                let xi = &x[(b * g.c_in + i) * g.len..(b * g.c_in + i + 1) * g.len];
                for k in 0..g.width {
                    let wv = w[(o * g.c_in + i) * g.width + k];
                    let (lo, hi, shift) = g.tap(k);
                    let src = &xi[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                    y[lo..hi].iter_mut().zip(src).for_each(|(yv, xv)| *yv += wv * xv);
                }
            }
        }
    }
    out
}

pub(crate) fn conv1d_backward_input(g: &ConvGeometry, dy: &[f64], w: &[f64], dx: &mut [f64]) {
    for b in 0..g.batch {
        for o in 0..g.c_out {
            let dyo = &dy[(b * g.c_out + o) * g.len..(b * g.c_out + o + 1) * g.len];
            for i in 0..g.c_in {
                let dxi = &mut dx[(b * g.c_in + i) * g.len..(b * g.c_in + i + 1) * g.len];
                for k in 0..g.width {
                    let wv = w[(o * g.c_in + i) * g.width + k];
                    let (lo, hi, shift) = g.tap(k);
                    let dst = &mut dxi[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                    dst.iter_mut().zip(&dyo[lo..hi]).for_each(|(d, gy)| *d += wv * gy);
                }
            }
        }
    }
}

pub(crate) fn conv1d_backward_kernels(g: &ConvGeometry, dy: &[f64], x: &[f64], dw: &mut [f64]) {
    for b in 0..g.batch {
        for o in 0..g.c_out {
            let dyo = &dy[(b * g.c_out + o) * g.len..(b * g.c_out + o + 1) * g.len];
            for i in 0..g.c_in {
                let xi = &x[(b * g.c_in + i) * g.len..(b * g.c_in + i + 1) * g.len];
                for k in 0..g.width {
                    let (lo, hi, shift) = g.tap(k);
                    let src = &xi[(lo as isize + shift) as usize..(hi as isize + shift) as usize];
                    dw[(o * g.c_in + i) * g.width + k] +=
                        dyo[lo..hi].iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                }
            }
        }
    }
}
