//! A realized network: initialized layers, forward/backward orchestration,
//! optimizer stepping, and the binary model file.
//!
//! Model file layout (all integers little-endian):
//!
//! ```text
//! "SCLB" | version u16 | arch length u32 | arch document (UTF-8)
//!        | parameter blobs, f32, layer order | CRC32 of everything before it
//! ```

use std::fs;
use std::path::Path;

use crate::arch::ArchitectureSpec;
use crate::error::{Error, Result};
use crate::layers::{Activation, Layer, LayerSpec, Mode};
use crate::loss::{cross_entropy_loss, softmax};
use crate::optim::{adam_step_tensor, AdamHyper, AdamState};
use crate::rng::Rng;
use crate::tensor::Tensor;

pub const MODEL_MAGIC: [u8; 4] = *b"SCLB";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, Clone)]
pub struct Model {
    arch: ArchitectureSpec,
    layers: Vec<Layer>,
    dropout_rng: Rng,
}

impl Model {
    /// Builds and initializes a model. Conv and dense weights are
    /// Glorot-uniform, biases zero, batchnorm scale one and shift zero.
    pub fn build(arch: &ArchitectureSpec, seed: u64) -> Result<Model> {
        arch.validate()?;
        let mut init = Rng::stream(seed, "init", 0);
        let mut shape = arch.input.to_vec();
        let last = arch.layers.len() - 1;
        let mut layers = Vec::with_capacity(arch.layers.len());
        for (i, spec) in arch.layers.iter().enumerate() {
            let mut layer = Layer::build(spec, &shape, &mut init)?;
            // The softmax head is applied by the model so training can work
            // on logits directly.
            if i == last {
                if let Layer::Dense(d) = &mut layer {
                    d.activation = Activation::None;
                }
            }
            layers.push(layer);
            shape = spec.output_shape(&shape)?;
        }
        Ok(Model {
            arch: arch.clone(),
            layers,
            dropout_rng: Rng::stream(seed, "dropout", 0),
        })
    }

    pub fn arch(&self) -> &ArchitectureSpec {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Reseeds the dropout stream, e.g. per epoch.
    pub fn reseed_dropout(&mut self, rng: Rng) {
        self.dropout_rng = rng;
    }

    /// Number of trainable parameter elements actually allocated.
    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn grads(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.grads()).collect()
    }

    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        self.params().iter().map(|t| t.shape().to_vec()).collect()
    }

    /// Mutable parameter tensors in [`Model::params`] order.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.param_slots().into_iter().map(|s| s.value))
            .collect()
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        let [h, w, c] = self.arch.input;
        match *batch.shape() {
            [_, bh, bw, bc] if (bh, bw, bc) == (h, w, c) => Ok(()),
            _ => Err(Error::shape(format!(
                "model expects input (N, {h}, {w}, {c}), got {:?}",
                batch.shape()
            ))),
        }
    }

    /// Runs every layer and returns the head's logits, before softmax.
    pub fn forward_logits(&mut self, batch: &Tensor, mode: Mode) -> Result<Tensor> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &mut self.layers {
            x = layer.forward(&x, mode, &mut self.dropout_rng)?;
        }
        Ok(x)
    }

    /// Class probabilities, shape `(N, 2)`.
    pub fn forward(&mut self, batch: &Tensor, mode: Mode) -> Result<Tensor> {
        softmax(&self.forward_logits(batch, mode)?)
    }

    /// Training-mode forward pass, loss, and full backward pass. Gradients
    /// are left in the layers; parameters are not touched. Returns the
    /// batch-mean loss.
    pub fn compute_gradients(&mut self, batch: &Tensor, labels: &[usize]) -> Result<f64> {
        let logits = self.forward_logits(batch, Mode::Train)?;
        let lv = cross_entropy_loss(&logits, labels)?;
        if !lv.loss.is_finite() {
            return Err(Error::Numeric(format!("loss is {}", lv.loss)));
        }
        let mut grad = lv.grad_logits;
        for layer in self.layers.iter_mut().rev() {
            grad = layer.backward(&grad)?;
        }
        Ok(lv.loss)
    }

    /// One optimizer step on the batch. Returns the loss before the update.
    pub fn train_step(
        &mut self,
        batch: &Tensor,
        labels: &[usize],
        optimizer: &mut Optimizer,
    ) -> Result<f64> {
        let loss = self.compute_gradients(batch, labels)?;
        optimizer.step(self)?;
        Ok(loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Model::from_bytes(&bytes)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let arch = self.arch.to_text();
        let mut out = Vec::new();
        out.extend_from_slice(&MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
        out.extend_from_slice(arch.as_bytes());
        for layer in &self.layers {
            for t in layer.persistent() {
                for v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
        let need = |needed: usize| -> Result<()> {
            if bytes.len() < needed {
                Err(Error::Truncated {
                    needed,
                    found: bytes.len(),
                })
            } else {
                Ok(())
            }
        };
        need(4)?;
        if bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic {
                expected: MODEL_MAGIC,
                found: bytes[..4].to_vec(),
            });
        }
        need(6)?;
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != MODEL_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: MODEL_VERSION,
            });
        }
        need(10)?;
        let arch_len = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        need(10 + arch_len)?;
        let text = std::str::from_utf8(&bytes[10..10 + arch_len])
            .map_err(|e| Error::parse("model architecture", e.to_string()))?;
        let arch = ArchitectureSpec::from_text(text)?;
        let mut model = Model::build(&arch, 0)?;

        let n_floats: usize = model
            .layers
            .iter()
            .flat_map(|l| l.persistent())
            .map(|t| t.len())
            .sum();
        let payload_end = 10 + arch_len + 4 * n_floats;
        need(payload_end + 4)?;
        if bytes.len() > payload_end + 4 {
            return Err(Error::InvalidData(format!(
                "model file has {} trailing bytes",
                bytes.len() - payload_end - 4
            )));
        }
        let stored = u32::from_le_bytes(bytes[payload_end..payload_end + 4].try_into().unwrap());
        let computed = crc32fast::hash(&bytes[..payload_end]);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }

        let mut floats = bytes[10 + arch_len..payload_end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()));
        for layer in &mut model.layers {
            for t in layer.persistent_mut() {
                for v in t.data_mut() {
                    *v = floats.next().expect("length checked above");
                }
            }
        }
        Ok(model)
    }
}

/// Adam moments for every trainable tensor of one model.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub hyper: AdamHyper,
    states: Vec<AdamState>,
}

impl Optimizer {
    pub fn new(model: &Model, hyper: AdamHyper) -> Result<Self> {
        hyper.validate()?;
        Ok(Self {
            hyper,
            states: model
                .param_shapes()
                .iter()
                .map(|s| AdamState::new(s))
                .collect(),
        })
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }

    /// Applies one Adam update using the gradients stored in the layers.
    pub fn step(&mut self, model: &mut Model) -> Result<()> {
        let mut states = self.states.iter_mut();
        for layer in &mut model.layers {
            for slot in layer.param_slots() {
                let state = states
                    .next()
                    .ok_or_else(|| Error::state("optimizer has fewer states than the model has tensors"))?;
                adam_step_tensor(slot.value, slot.grad, state, &self.hyper)?;
            }
        }
        if states.next().is_some() {
            return Err(Error::state("optimizer has more states than the model has tensors"));
        }
        Ok(())
    }
}

/// Tiny architecture used by gradient checks and tests: conv, pool,
/// flatten, dense head.
pub fn micro_arch(side: usize, channels: usize, filters: usize) -> ArchitectureSpec {
    ArchitectureSpec {
        name: "micro".into(),
        input: [side, side, channels],
        layers: vec![
            LayerSpec::Conv2d {
                filters,
                kernel: 3,
                activation: Activation::Relu,
            },
            LayerSpec::MaxPool2d { pool: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                units: 2,
                activation: Activation::Softmax,
            },
        ],
    }
}
