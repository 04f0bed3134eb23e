use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;

use super::tape::{ParamStore, Tape, Var};
use crate::error::NnError;

/// Fully connected stack: affine + tanh on hidden layers, affine output,
/// optional layer normalization of the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub name: String,
    pub dims: Vec<usize>,
    pub weights: Vec<usize>,
    pub biases: Vec<usize>,
    /// `[gain, offset]` parameter ids.
    pub norm: Option<[usize; 2]>,
}

/// One column block of an MLP input, optionally row-gathered first.
pub type InputBlock<'a> = (Var, Option<&'a Rc<Vec<usize>>>);

impl Mlp {
    /// `dims = [in, hidden.., out]`.
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        dims: &[usize],
        layer_norm: bool,
        rng: &mut R,
    ) -> Mlp {
        assert!(dims.len() >= 2, "an mlp needs input and output widths");
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..dims.len() - 1 {
            weights.push(store.add_xavier(format!("{name}.l{l}.w"), dims[l], dims[l + 1], rng));
            biases.push(store.add(format!("{name}.l{l}.b"), Array2::zeros((1, dims[l + 1]))));
        }
        let out = dims[dims.len() - 1];
        let norm = layer_norm.then(|| {
            [
                store.add(format!("{name}.ln.gain"), Array2::ones((1, out))),
                store.add(format!("{name}.ln.offset"), Array2::zeros((1, out))),
            ]
        });
        Mlp {
            name: name.to_string(),
            dims: dims.to_vec(),
            weights,
            biases,
            norm,
        }
    }

    pub fn in_width(&self) -> usize {
        self.dims[0]
    }

    pub fn out_width(&self) -> usize {
        self.dims[self.dims.len() - 1]
    }

    pub fn param_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.weights.iter().chain(&self.biases).copied().collect();
        ids.extend(self.norm.iter().flatten());
        ids
    }

    /// Sets every output-layer weight and bias to zero.
    pub fn zero_output(&self, store: &mut ParamStore) {
        let l = self.weights.len() - 1;
        store.values[self.weights[l]].fill(0.0);
        store.values[self.biases[l]].fill(0.0);
    }

    pub fn apply(&self, tape: &mut Tape<'_>, x: Var) -> Result<Var, NnError> {
        self.apply_blocks(tape, &[(x, None)])
    }

    /// Same result as applying the MLP to the column concatenation of the
    /// (gathered) blocks, but multiplies each block before gathering so the
    /// first layer costs scale with the block's own row count.
    pub fn apply_blocks(
        &self,
        tape: &mut Tape<'_>,
        blocks: &[InputBlock<'_>],
    ) -> Result<Var, NnError> {
        let width: usize = blocks.iter().map(|(v, _)| tape.shape(*v).1).sum();
        if width != self.in_width() {
            return Err(NnError::shape(
                "mlp",
                format!(
                    "{} expects width {}, got {width}",
                    self.name,
                    self.in_width()
                ),
            ));
        }
        let w0 = tape.param(self.weights[0]);
        let mut acc: Option<Var> = None;
        let mut at = 0;
        for &(x, index) in blocks {
            let cols = tape.shape(x).1;
            let w = if blocks.len() == 1 {
                w0
            } else {
                tape.row_slice(w0, at, at + cols)?
            };
            at += cols;
            let mut y = tape.matmul(x, w)?;
            if let Some(index) = index {
                y = tape.gather(y, index)?;
            }
            acc = Some(match acc {
                None => y,
                Some(a) => tape.add(a, y)?,
            });
        }
        let b0 = tape.param(self.biases[0]);
        let mut h = tape.add_row(acc.expect("at least one input block"), b0)?;
        for l in 1..self.weights.len() {
            h = tape.tanh(h);
            let w = tape.param(self.weights[l]);
            let b = tape.param(self.biases[l]);
            h = tape.matmul(h, w)?;
            h = tape.add_row(h, b)?;
        }
        if let Some([gain, offset]) = self.norm {
            h = tape.standardize(h);
            let g = tape.param(gain);
            let o = tape.param(offset);
            h = tape.mul_row(h, g)?;
            h = tape.add_row(h, o)?;
        }
        Ok(h)
    }
}
