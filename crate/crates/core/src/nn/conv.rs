use crate::error::{GlimmerError, Result};
use crate::matrix::Matrix;

/// Valid, stride-1 1-D convolution over time.
///
/// `weight` is laid out `[kernel][in_channels][filters]`; the number of filters is
/// `bias.len()`. `out[t][f] = bias[f] + sum_{k,c} x[t+k][c] * weight[k][c][f]`.
pub fn conv1d_forward(x: &Matrix, weight: &[f64], bias: &[f64], kernel: usize) -> Result<Matrix> {
    let (steps, channels) = x.shape();
    let filters = bias.len();
    if kernel == 0 || steps < kernel {
        return Err(GlimmerError::shape(format!(
            "kernel {kernel} does not fit a sequence of {steps}"
        )));
    }
    if weight.len() != kernel * channels * filters {
        return Err(GlimmerError::shape(format!(
            "conv weight has {} values, expected {kernel}x{channels}x{filters}",
            weight.len()
        )));
    }
    let out_steps = steps - kernel + 1;
    let mut out = Matrix::zeros(out_steps, filters);
    for t in 0..out_steps {
        let row = out.row_mut(t);
        row.copy_from_slice(bias);
        for k in 0..kernel {
            let xin = x.row(t + k);
            let wk = &weight[k * channels * filters..(k + 1) * channels * filters];
            for (c, &xv) in xin.iter().enumerate() {
                let wc = &wk[c * filters..(c + 1) * filters];
                for (o, w) in row.iter_mut().zip(wc) {
                    *o += xv * w;
                }
            }
        }
    }
    Ok(out)
}

/// Accumulates weight/bias gradients into `dw`/`db` and, if requested, returns d loss / d x.
pub fn conv1d_backward(
    x: &Matrix,
    weight: &[f64],
    kernel: usize,
    dout: &Matrix,
    dw: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Option<Matrix> {
    let (steps, channels) = x.shape();
    let filters = dout.cols();
    let out_steps = dout.rows();
    debug_assert_eq!(out_steps, steps - kernel + 1);

    for t in 0..out_steps {
        let g = dout.row(t);
        for (b, gv) in db.iter_mut().zip(g) {
            *b += gv;
        }
        for k in 0..kernel {
            let xin = x.row(t + k);
            let dwk = &mut dw[k * channels * filters..(k + 1) * channels * filters];
            for (c, &xv) in xin.iter().enumerate() {
                for (d, gv) in dwk[c * filters..(c + 1) * filters].iter_mut().zip(g) {
                    *d += xv * gv;
                }
            }
        }
    }

    if !want_dx {
        return None;
    }
    let mut dx = Matrix::zeros(steps, channels);
    for t in 0..out_steps {
        let g = dout.row(t);
        for k in 0..kernel {
            let wk = &weight[k * channels * filters..(k + 1) * channels * filters];
            let dxr = dx.row_mut(t + k);
            for (c, d) in dxr.iter_mut().enumerate() {
                let wc = &wk[c * filters..(c + 1) * filters];
                *d += wc.iter().zip(g).map(|(w, gv)| w * gv).sum::<f64>();
            }
        }
    }
    Some(dx)
}
