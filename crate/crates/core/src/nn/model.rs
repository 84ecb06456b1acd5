use super::conv::{conv1d_backward, conv1d_forward};
use super::dense::{dense_backward, dense_forward};
use super::lstm::{lstm_backward, lstm_forward, LstmTrace};
use super::ModelParams;
use crate::error::{GlimmerError, Result};
use crate::loss::Objective;
use crate::matrix::Matrix;

/// Gradient vector aligned with [`ModelParams::values`].
pub type Gradients = Vec<f64>;

/// Everything the backward pass needs from one forward evaluation.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Conv pre-activations, one per layer.
    pub conv_pre: Vec<Matrix>,
    /// Conv layer inputs: the model input followed by each post-ReLU activation.
    pub conv_in: Vec<Matrix>,
    pub lstm: LstmTrace,
    pub hidden_pre: Option<Vec<f64>>,
    pub head_in: Vec<f64>,
    pub head_pre: Vec<f64>,
    pub output: Vec<f64>,
}

impl ForwardTrace {
    /// Every value that sits in front of a ReLU, in a fixed order.
    pub fn relu_inputs(&self) -> impl Iterator<Item = f64> + '_ {
        self.conv_pre
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .chain(self.hidden_pre.iter().flatten().copied())
            .chain(self.head_pre.iter().copied())
    }
}

#[inline]
fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

fn ensure_finite(values: &[f64], stage: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(GlimmerError::NonFinite(format!("{stage} produced a non-finite value")))
    }
}

/// Forward pass that keeps every intermediate needed for backprop.
pub fn forward_trace(p: &ModelParams, x: &Matrix) -> Result<ForwardTrace> {
    let arch = p.arch();
    if x.shape() != (arch.input_len, arch.input_features) {
        return Err(GlimmerError::shape(format!(
            "model expects a {}x{} input, got {}x{}",
            arch.input_len,
            arch.input_features,
            x.rows(),
            x.cols()
        )));
    }
    let layout = p.layout();
    let mut conv_in = vec![x.clone()];
    let mut conv_pre = Vec::with_capacity(arch.conv_layers.len());
    for (spec, &(w, b)) in arch.conv_layers.iter().zip(&layout.conv) {
        let pre = conv1d_forward(conv_in.last().unwrap(), p.tensor(w), p.tensor(b), spec.kernel)?;
        ensure_finite(pre.as_slice(), "convolution")?;
        let mut act = pre.clone();
        act.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
        conv_pre.push(pre);
        conv_in.push(act);
    }

    let (wi, wr, lb) = layout.lstm;
    let lstm = lstm_forward(
        conv_in.last().unwrap(),
        p.tensor(wi),
        p.tensor(wr),
        p.tensor(lb),
        arch.lstm_units,
    )?;
    ensure_finite(lstm.hidden.as_slice(), "LSTM")?;

    let flat = lstm.hidden.as_slice().to_vec();
    let (hidden_pre, head_in) = match layout.hidden {
        Some((w, b)) => {
            let pre = dense_forward(&flat, p.tensor(w), p.tensor(b))?;
            let act = pre.iter().map(|&v| relu(v)).collect();
            (Some(pre), act)
        }
        None => (None, flat),
    };
    let (hw, hb) = layout.head;
    let head_pre = dense_forward(&head_in, p.tensor(hw), p.tensor(hb))?;
    ensure_finite(&head_pre, "dense head")?;
    let output = head_pre.iter().map(|&v| relu(v)).collect();

    Ok(ForwardTrace {
        conv_pre,
        conv_in,
        lstm,
        hidden_pre,
        head_in,
        head_pre,
        output,
    })
}

/// Forecast for one (already normalized) input window; one value per horizon step, all >= 0.
pub fn model_forward(p: &ModelParams, x: &Matrix) -> Result<Vec<f64>> {
    Ok(forward_trace(p, x)?.output)
}

/// Forecasts for many windows.
pub fn predict<'a, I>(p: &ModelParams, inputs: I) -> Result<Vec<Vec<f64>>>
where
    I: IntoIterator<Item = &'a Matrix>,
{
    inputs.into_iter().map(|x| model_forward(p, x)).collect()
}

/// Backpropagates d loss / d output through one traced forward pass, accumulating into `grads`.
pub(crate) fn backward_from_output(
    p: &ModelParams,
    trace: &ForwardTrace,
    doutput: &[f64],
    grads: &mut [f64],
) {
    let arch = p.arch();
    let layout = p.layout();
    let tensors = &layout.tensors;
    let range = |idx: usize| tensors[idx].range();

    // ReLU head; subgradient 0 at the kink.
    let dpre: Vec<f64> = doutput
        .iter()
        .zip(&trace.head_pre)
        .map(|(g, &z)| if z > 0.0 { *g } else { 0.0 })
        .collect();

    let (hw, hb) = layout.head;
    let (dw, db) = split_pair(grads, range(hw), range(hb));
    let mut dflat = dense_backward(&trace.head_in, p.tensor(hw), &dpre, dw, db);

    if let (Some((w, b)), Some(pre)) = (layout.hidden, &trace.hidden_pre) {
        let dz: Vec<f64> = dflat
            .iter()
            .zip(pre)
            .map(|(g, &z)| if z > 0.0 { *g } else { 0.0 })
            .collect();
        let (dw, db) = split_pair(grads, range(w), range(b));
        dflat = dense_backward(trace.lstm.hidden.as_slice(), p.tensor(w), &dz, dw, db);
    }

    let dhidden = Matrix::from_vec(arch.seq_len(), arch.lstm_units, dflat).expect("flatten shape");
    let (wi, wr, lb) = layout.lstm;
    let (dwi, dwr, dlb) = split_triple(grads, range(wi), range(wr), range(lb));
    let mut dact = lstm_backward(
        trace.conv_in.last().unwrap(),
        &trace.lstm,
        p.tensor(wi),
        p.tensor(wr),
        &dhidden,
        dwi,
        dwr,
        dlb,
    );

    for l in (0..arch.conv_layers.len()).rev() {
        let mut dz = dact;
        for (g, &z) in dz.as_mut_slice().iter_mut().zip(trace.conv_pre[l].as_slice()) {
            if z <= 0.0 {
                *g = 0.0;
            }
        }
        let (w, b) = layout.conv[l];
        let (dw, db) = split_pair(grads, range(w), range(b));
        match conv1d_backward(
            &trace.conv_in[l],
            p.tensor(w),
            arch.conv_layers[l].kernel,
            &dz,
            dw,
            db,
            l > 0,
        ) {
            Some(dx) => dact = dx,
            None => break,
        }
    }
}

/// Loss and exact gradients for a single window.
pub fn model_backward(
    p: &ModelParams,
    x: &Matrix,
    y: &[f64],
    objective: &Objective,
) -> Result<(f64, Gradients)> {
    batch_backward(p, &[(x, y)], objective)
}

/// Loss over the pooled `batch x horizon` targets and its gradient. Samples are
/// accumulated in batch order so the result is bitwise reproducible.
pub fn batch_backward(
    p: &ModelParams,
    batch: &[(&Matrix, &[f64])],
    objective: &Objective,
) -> Result<(f64, Gradients)> {
    let out_len = p.arch().output_len;
    let mut traces = Vec::with_capacity(batch.len());
    let mut preds = Vec::with_capacity(batch.len() * out_len);
    let mut truth = Vec::with_capacity(batch.len() * out_len);
    for (x, y) in batch {
        if y.len() != out_len {
            return Err(GlimmerError::shape(format!(
                "target has {} values, model emits {out_len}",
                y.len()
            )));
        }
        let tr = forward_trace(p, x)?;
        preds.extend_from_slice(&tr.output);
        truth.extend_from_slice(y);
        traces.push(tr);
    }
    let loss = objective.value(&preds, &truth)?;
    let dpred = objective.gradient(&preds, &truth)?;
    let mut grads = vec![0.0; p.len()];
    for (i, tr) in traces.iter().enumerate() {
        backward_from_output(p, tr, &dpred[i * out_len..(i + 1) * out_len], &mut grads);
    }
    if !loss.is_finite() {
        return Err(GlimmerError::NonFinite(format!("loss is {loss}")));
    }
    ensure_finite(&grads, "backward pass")?;
    Ok((loss, grads))
}

fn split_pair(
    buf: &mut [f64],
    a: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
) -> (&mut [f64], &mut [f64]) {
    debug_assert!(a.end <= b.start);
    let (left, right) = buf.split_at_mut(b.start);
    (&mut left[a], &mut right[..b.end - b.start])
}

fn split_triple(
    buf: &mut [f64],
    a: std::ops::Range<usize>,
    b: std::ops::Range<usize>,
    c: std::ops::Range<usize>,
) -> (&mut [f64], &mut [f64], &mut [f64]) {
    let (left, right) = buf.split_at_mut(c.start);
    let (x, y) = split_pair(left, a, b);
    (x, y, &mut right[..c.end - c.start])
}
