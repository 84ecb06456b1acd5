//! Standard LSTM cell with zero initial state.
//!
//! Gate pre-activations are `a = x_t W_in + h_{t-1} W_rec + b`, split into four
//! blocks of `H` in the order input, forget, candidate, output:
//!
//! ```text
//! i = σ(a_i)  f = σ(a_f)  g = tanh(a_g)  o = σ(a_o)
//! c_t = f ⊙ c_{t-1} + i ⊙ g
//! h_t = o ⊙ tanh(c_t)
//! ```

use crate::error::{GlimmerError, Result};
use crate::matrix::Matrix;

/// Activations saved by the forward pass for backpropagation through time.
#[derive(Clone, Debug)]
pub struct LstmTrace {
    /// Post-activation gates per step, `T x 4H` in i, f, g, o order.
    pub gates: Matrix,
    pub cell: Matrix,
    pub tanh_cell: Matrix,
    pub hidden: Matrix,
}

#[inline]
fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn check_shapes(input_dim: usize, units: usize, w_in: &[f64], w_rec: &[f64], bias: &[f64]) -> Result<()> {
    let g = 4 * units;
    if w_in.len() != input_dim * g || w_rec.len() != units * g || bias.len() != g {
        return Err(GlimmerError::shape(format!(
            "LSTM with {input_dim} inputs and {units} units needs {}/{}/{} weights, got {}/{}/{}",
            input_dim * g,
            units * g,
            g,
            w_in.len(),
            w_rec.len(),
            bias.len()
        )));
    }
    Ok(())
}

/// Runs the cell over every step of `seq` and keeps the full trace.
pub fn lstm_forward(
    seq: &Matrix,
    w_in: &[f64],
    w_rec: &[f64],
    bias: &[f64],
    units: usize,
) -> Result<LstmTrace> {
    let (steps, input_dim) = seq.shape();
    check_shapes(input_dim, units, w_in, w_rec, bias)?;
    let h4 = 4 * units;
    let mut gates = Matrix::zeros(steps, h4);
    let mut cell = Matrix::zeros(steps, units);
    let mut tanh_cell = Matrix::zeros(steps, units);
    let mut hidden = Matrix::zeros(steps, units);

    let mut h_prev = vec![0.0; units];
    let mut c_prev = vec![0.0; units];
    let mut a = vec![0.0; h4];
    for t in 0..steps {
        a.copy_from_slice(bias);
        for (j, &xv) in seq.row(t).iter().enumerate() {
            for (av, w) in a.iter_mut().zip(&w_in[j * h4..(j + 1) * h4]) {
                *av += xv * w;
            }
        }
        for (j, &hv) in h_prev.iter().enumerate() {
            for (av, w) in a.iter_mut().zip(&w_rec[j * h4..(j + 1) * h4]) {
                *av += hv * w;
            }
        }
        let gate_row = gates.row_mut(t);
        for u in 0..units {
            gate_row[u] = sigmoid(a[u]);
            gate_row[units + u] = sigmoid(a[units + u]);
            gate_row[2 * units + u] = a[2 * units + u].tanh();
            gate_row[3 * units + u] = sigmoid(a[3 * units + u]);
        }
        for u in 0..units {
            let (i, f, g, o) = (
                gate_row[u],
                gate_row[units + u],
                gate_row[2 * units + u],
                gate_row[3 * units + u],
            );
            let c = f * c_prev[u] + i * g;
            let tc = c.tanh();
            c_prev[u] = c;
            h_prev[u] = o * tc;
        }
        cell.row_mut(t).copy_from_slice(&c_prev);
        tanh_cell.row_mut(t).iter_mut().zip(&c_prev).for_each(|(d, c)| *d = c.tanh());
        hidden.row_mut(t).copy_from_slice(&h_prev);
    }
    Ok(LstmTrace {
        gates,
        cell,
        tanh_cell,
        hidden,
    })
}

/// Backpropagation through time. `dhidden` is d loss / d h_t for every step.
/// Accumulates into the weight gradients and returns d loss / d seq.
#[allow(clippy::too_many_arguments)]
pub fn lstm_backward(
    seq: &Matrix,
    trace: &LstmTrace,
    w_in: &[f64],
    w_rec: &[f64],
    dhidden: &Matrix,
    dw_in: &mut [f64],
    dw_rec: &mut [f64],
    dbias: &mut [f64],
) -> Matrix {
    let (steps, input_dim) = seq.shape();
    let units = trace.hidden.cols();
    let h4 = 4 * units;
    let mut dseq = Matrix::zeros(steps, input_dim);
    let mut dh_next = vec![0.0; units];
    let mut dc_next = vec![0.0; units];
    let mut da = vec![0.0; h4];

    for t in (0..steps).rev() {
        let gates = trace.gates.row(t);
        let tanh_c = trace.tanh_cell.row(t);
        for u in 0..units {
            let (i, f, g, o) = (gates[u], gates[units + u], gates[2 * units + u], gates[3 * units + u]);
            let c_prev = if t > 0 { trace.cell.get(t - 1, u) } else { 0.0 };
            let dh = dhidden.get(t, u) + dh_next[u];
            let d_o = dh * tanh_c[u];
            let dc = dh * o * (1.0 - tanh_c[u] * tanh_c[u]) + dc_next[u];
            let di = dc * g;
            let dg = dc * i;
            let df = dc * c_prev;
            dc_next[u] = dc * f;
            da[u] = di * i * (1.0 - i);
            da[units + u] = df * f * (1.0 - f);
            da[2 * units + u] = dg * (1.0 - g * g);
            da[3 * units + u] = d_o * o * (1.0 - o);
        }

        for (b, d) in dbias.iter_mut().zip(&da) {
            *b += d;
        }
        let x = seq.row(t);
        let dx = dseq.row_mut(t);
        for j in 0..input_dim {
            let w = &w_in[j * h4..(j + 1) * h4];
            dx[j] = w.iter().zip(&da).map(|(w, d)| w * d).sum();
            for (g, d) in dw_in[j * h4..(j + 1) * h4].iter_mut().zip(&da) {
                *g += x[j] * d;
            }
        }
        for j in 0..units {
            let w = &w_rec[j * h4..(j + 1) * h4];
            dh_next[j] = w.iter().zip(&da).map(|(w, d)| w * d).sum();
            if t > 0 {
                let h_prev = trace.hidden.get(t - 1, j);
                for (g, d) in dw_rec[j * h4..(j + 1) * h4].iter_mut().zip(&da) {
                    *g += h_prev * d;
                }
            }
        }
    }
    dseq
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_everything_gives_zero_hidden() {
        let seq = Matrix::zeros(5, 3);
        let tr = lstm_forward(&seq, &[0.0; 3 * 8], &[0.0; 2 * 8], &[0.0; 8], 2).unwrap();
        assert!(tr.hidden.as_slice().iter().all(|&h| h == 0.0));
    }

    #[test]
    fn scalar_cell_by_hand() {
        let seq = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let tr = lstm_forward(&seq, &[1.0; 4], &[1.0; 4], &[0.0; 4], 1).unwrap();
        // i = f = o = σ(1), g = tanh(1), c = i g, h = o tanh(c)
        let s = 1.0 / (1.0 + (-1.0f64).exp());
        let c = s * 1.0f64.tanh();
        assert!((tr.cell.get(0, 0) - c).abs() < 1e-15);
        let h = tr.hidden.get(0, 0);
        assert!((h - 0.3697).abs() < 1e-4, "{h}");
    }

    #[test]
    fn output_shape() {
        let seq = Matrix::zeros(63, 8);
        let tr = lstm_forward(&seq, &[0.01; 8 * 32], &[0.01; 8 * 32], &[0.0; 32], 8).unwrap();
        assert_eq!(tr.hidden.shape(), (63, 8));
    }

    #[test]
    fn shape_mismatch() {
        let seq = Matrix::zeros(4, 2);
        assert!(lstm_forward(&seq, &[0.0; 4], &[0.0; 4], &[0.0; 4], 1).is_err());
    }

    #[test]
    fn bptt_matches_finite_differences() {
        let (steps, input_dim, units) = (4, 2, 3);
        let h4 = 4 * units;
        let wave = |n: usize, k: f64| -> Vec<f64> { (0..n).map(|i| ((i as f64) * k).sin() * 0.6).collect() };
        let seq = Matrix::from_vec(steps, input_dim, wave(steps * input_dim, 1.3)).unwrap();
        let w_in = wave(input_dim * h4, 0.7);
        let w_rec = wave(units * h4, 1.9);
        let bias = wave(h4, 2.3);
        let coef = Matrix::from_vec(steps, units, wave(steps * units, 0.37)).unwrap();
        let loss = |seq: &Matrix, w_in: &[f64], w_rec: &[f64], bias: &[f64]| -> f64 {
            let tr = lstm_forward(seq, w_in, w_rec, bias, units).unwrap();
            tr.hidden.as_slice().iter().zip(coef.as_slice()).map(|(h, c)| h * c).sum()
        };
        let tr = lstm_forward(&seq, &w_in, &w_rec, &bias, units).unwrap();
        let mut dw_in = vec![0.0; w_in.len()];
        let mut dw_rec = vec![0.0; w_rec.len()];
        let mut db = vec![0.0; bias.len()];
        let dseq = lstm_backward(&seq, &tr, &w_in, &w_rec, &coef, &mut dw_in, &mut dw_rec, &mut db);

        let h = 1e-6;
        let fd = |f: &dyn Fn(f64) -> f64| (f(h) - f(-h)) / (2.0 * h);
        for i in 0..w_in.len() {
            let n = fd(&|e| {
                let mut w = w_in.clone();
                w[i] += e;
                loss(&seq, &w, &w_rec, &bias)
            });
            assert!((n - dw_in[i]).abs() < 1e-8, "w_in[{i}]");
        }
        for i in 0..w_rec.len() {
            let n = fd(&|e| {
                let mut w = w_rec.clone();
                w[i] += e;
                loss(&seq, &w_in, &w, &bias)
            });
            assert!((n - dw_rec[i]).abs() < 1e-8, "w_rec[{i}]");
        }
        for i in 0..bias.len() {
            let n = fd(&|e| {
                let mut b = bias.clone();
                b[i] += e;
                loss(&seq, &w_in, &w_rec, &b)
            });
            assert!((n - db[i]).abs() < 1e-8, "bias[{i}]");
        }
        for i in 0..steps * input_dim {
            let n = fd(&|e| {
                let mut s = seq.clone();
                s.as_mut_slice()[i] += e;
                loss(&s, &w_in, &w_rec, &bias)
            });
            assert!((n - dseq.as_slice()[i]).abs() < 1e-8, "seq[{i}]");
        }
    }
}
