use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::optim::OptimError;

/// Dense layer, weights stored row-major as `rows × cols`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.weights)
    }

    fn check(&self) -> Result<(), OptimError> {
        if self.weights.len() != self.rows * self.cols || self.bias.len() != self.rows {
            return Err(OptimError::Dimension(format!(
                "layer {}x{} with {} weights and {} biases",
                self.rows,
                self.cols,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// Two-layer perceptron mapping a descriptor to per-vertex cage offsets:
/// `offsets = W2 tanh(W1 (x - 1) + b1) + b2`.
///
/// The input is centred on the canonical descriptor `(1, 1, 1)`. The output
/// layer starts at zero, so an untrained predictor yields zero offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffsetPredictor {
    pub activation: String,
    pub hidden: Layer,
    pub output: Layer,
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Forward {
    input: DVector<f64>,
    hidden: DVector<f64>,
    pub offsets: Vec<Vector3<f64>>,
}

impl OffsetPredictor {
    pub fn new(
        descriptor_len: usize,
        hidden: usize,
        cage_vertices: usize,
        rng: &mut impl Rng,
    ) -> Self {
        let bound = (3.0 / descriptor_len.max(1) as f64).sqrt();
        let out = 3 * cage_vertices;
        Self {
            activation: "tanh".into(),
            hidden: Layer {
                rows: hidden,
                cols: descriptor_len,
                weights: (0..hidden * descriptor_len)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect(),
                bias: vec![0.0; hidden],
            },
            output: Layer {
                rows: out,
                cols: hidden,
                weights: vec![0.0; out * hidden],
                bias: vec![0.0; out],
            },
        }
    }

    pub fn descriptor_len(&self) -> usize {
        self.hidden.cols
    }

    pub fn cage_vertices(&self) -> usize {
        self.output.rows / 3
    }

    pub fn n_params(&self) -> usize {
        self.hidden.weights.len()
            + self.hidden.bias.len()
            + self.output.weights.len()
            + self.output.bias.len()
    }

    /// `[W1, b1, W2, b2]`, row-major.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(&self.hidden.weights);
        p.extend(&self.hidden.bias);
        p.extend(&self.output.weights);
        p.extend(&self.output.bias);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), OptimError> {
        if p.len() != self.n_params() {
            return Err(OptimError::Dimension(format!(
                "{} parameters, got {}",
                self.n_params(),
                p.len()
            )));
        }
        let mut rest = p;
        for dst in [
            &mut self.hidden.weights,
            &mut self.hidden.bias,
            &mut self.output.weights,
            &mut self.output.bias,
        ] {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }

    pub fn forward(&self, descriptor: &[f64]) -> Forward {
        assert_eq!(descriptor.len(), self.descriptor_len(), "descriptor length");
        let input = DVector::from_iterator(descriptor.len(), descriptor.iter().map(|d| d - 1.0));
        let hidden = (self.hidden.matrix() * &input
            + DVector::from_column_slice(&self.hidden.bias))
        .map(f64::tanh);
        let out = self.output.matrix() * &hidden + DVector::from_column_slice(&self.output.bias);
        let offsets = out
            .as_slice()
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        Forward {
            input,
            hidden,
            offsets,
        }
    }

    pub fn offsets(&self, descriptor: &[f64]) -> Vec<Vector3<f64>> {
        self.forward(descriptor).offsets
    }

    /// Parameter gradient (ordered as [`params`](Self::params)) given the
    /// gradient with respect to the offsets of a forward pass.
    pub fn backward(&self, fwd: &Forward, d_offsets: &[Vector3<f64>]) -> Vec<f64> {
        let g_out = DVector::from_iterator(
            3 * d_offsets.len(),
            d_offsets.iter().flat_map(|g| [g.x, g.y, g.z]),
        );
        let g_w2 = &g_out * fwd.hidden.transpose();
        let g_h = self.output.matrix().transpose() * &g_out;
        let g_pre = g_h.zip_map(&fwd.hidden, |g, h| g * (1.0 - h * h));
        let g_w1 = &g_pre * fwd.input.transpose();
        let mut p = Vec::with_capacity(self.n_params());
        p.extend(g_w1.transpose().iter());
        p.extend(g_pre.iter());
        p.extend(g_w2.transpose().iter());
        p.extend(g_out.iter());
        p
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("predictor serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, OptimError> {
        let p: Self = serde_json::from_str(text).map_err(|e| OptimError::Config(e.to_string()))?;
        p.hidden.check()?;
        p.output.check()?;
        if p.output.cols != p.hidden.rows
            || !p.output.rows.is_multiple_of(3)
            || p.activation != "tanh"
        {
            return Err(OptimError::Config("inconsistent predictor layers".into()));
        }
        Ok(p)
    }
}
