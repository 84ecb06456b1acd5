use crate::error::{GlimmerError, Result};

/// `out = input . weight + bias`, with `weight` laid out `[in][out]`.
pub fn dense_forward(input: &[f64], weight: &[f64], bias: &[f64]) -> Result<Vec<f64>> {
    let n_out = bias.len();
    if weight.len() != input.len() * n_out {
        return Err(GlimmerError::shape(format!(
            "dense weight has {} values, expected {}x{n_out}",
            weight.len(),
            input.len()
        )));
    }
    let mut out = bias.to_vec();
    for (j, &v) in input.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(&weight[j * n_out..(j + 1) * n_out]) {
            *o += v * w;
        }
    }
    Ok(out)
}

/// Accumulates parameter gradients and returns d loss / d input.
pub fn dense_backward(
    input: &[f64],
    weight: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
) -> Vec<f64> {
    let n_out = dout.len();
    for (b, g) in db.iter_mut().zip(dout) {
        *b += g;
    }
    let mut dinput = vec![0.0; input.len()];
    for (j, &v) in input.iter().enumerate() {
        let wj = &weight[j * n_out..(j + 1) * n_out];
        dinput[j] = wj.iter().zip(dout).map(|(w, g)| w * g).sum();
        for (d, g) in dw[j * n_out..(j + 1) * n_out].iter_mut().zip(dout) {
            *d += v * g;
        }
    }
    dinput
}
