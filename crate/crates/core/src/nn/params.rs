use rand::Rng;

use super::ArchConfig;
use crate::error::{GlimmerError, Result};

/// Name, shape and position of one tensor inside the flat parameter vector.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    /// Fan-in used for initialization; 0 marks a bias.
    pub fan_in: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of each layer's tensors, resolved once per architecture.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct Layout {
    pub tensors: Vec<TensorSpec>,
    /// (weight, bias) tensor indices per conv layer.
    pub conv: Vec<(usize, usize)>,
    /// (input weights, recurrent weights, bias)
    pub lstm: (usize, usize, usize),
    pub hidden: Option<(usize, usize)>,
    pub head: (usize, usize),
    pub total: usize,
}

impl Layout {
    pub fn new(arch: &ArchConfig) -> Layout {
        let mut tensors = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>, fan_in: usize| {
            let spec = TensorSpec {
                name,
                shape,
                offset,
                fan_in,
            };
            offset += spec.len();
            tensors.push(spec);
            tensors.len() - 1
        };

        let mut channels = arch.input_features;
        let mut conv = Vec::new();
        for (i, c) in arch.conv_layers.iter().enumerate() {
            let w = push(
                format!("conv{i}.weight"),
                vec![c.kernel, channels, c.filters],
                c.kernel * channels,
            );
            let b = push(format!("conv{i}.bias"), vec![c.filters], 0);
            conv.push((w, b));
            channels = c.filters;
        }

        let h = arch.lstm_units;
        let fan = channels + h;
        let lstm = (
            push("lstm.w_input".into(), vec![channels, 4 * h], fan),
            push("lstm.w_recurrent".into(), vec![h, 4 * h], fan),
            push("lstm.bias".into(), vec![4 * h], 0),
        );

        let mut head_in = arch.flattened_dim();
        let hidden = if arch.dense_hidden > 0 {
            let w = push(
                "hidden.weight".into(),
                vec![head_in, arch.dense_hidden],
                head_in,
            );
            let b = push("hidden.bias".into(), vec![arch.dense_hidden], 0);
            head_in = arch.dense_hidden;
            Some((w, b))
        } else {
            None
        };
        let head = (
            push("head.weight".into(), vec![head_in, arch.output_len], head_in),
            push("head.bias".into(), vec![arch.output_len], 0),
        );

        Layout {
            tensors,
            conv,
            lstm,
            hidden,
            head,
            total: offset,
        }
    }
}

/// Every learnable value of the network in one flat vector, in declared tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    arch: ArchConfig,
    layout: Layout,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn zeros(arch: &ArchConfig) -> Result<Self> {
        arch.validate()?;
        let layout = Layout::new(arch);
        Ok(ModelParams {
            arch: arch.clone(),
            values: vec![0.0; layout.total],
            layout,
        })
    }

    pub fn from_values(arch: &ArchConfig, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        if values.len() != p.values.len() {
            return Err(GlimmerError::shape(format!(
                "architecture needs {} parameters, got {}",
                p.values.len(),
                values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    /// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)); biases zero.
    pub fn init_uniform<R: Rng>(arch: &ArchConfig, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(arch)?;
        for spec in &p.layout.tensors {
            if spec.fan_in == 0 {
                continue;
            }
            let a = (1.0 / spec.fan_in as f64).sqrt();
            for v in &mut p.values[spec.range()] {
                *v = rng.random_range(-a..a);
            }
        }
        Ok(p)
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.layout.tensors
    }

    pub(crate) fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn tensor(&self, idx: usize) -> &[f64] {
        &self.values[self.layout.tensors[idx].range()]
    }

    pub fn tensor_mut(&mut self, idx: usize) -> &mut [f64] {
        let r = self.layout.tensors[idx].range();
        &mut self.values[r]
    }

    pub fn tensor_by_name(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .tensors
            .iter()
            .position(|t| t.name == name)
            .map(|i| self.tensor(i))
    }

    pub fn tensor_by_name_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let i = self.layout.tensors.iter().position(|t| t.name == name)?;
        Some(self.tensor_mut(i))
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
