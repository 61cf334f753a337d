//! Frozen ONNX feature extractor (tract backend).

use std::path::Path;

use tract_onnx::prelude::*;

use super::reshape::{FeatureTensor, FEATURE_LEN};
use super::store::sha256_hex;
use crate::data::ImageTensor;
use crate::error::{Error, Result};

/// Input sample shape the extractor graph must accept.
pub const INPUT_CHW: [usize; 3] = [3, 128, 128];
/// Output sample shape the extractor graph must produce.
pub const OUTPUT_CHW: [usize; 3] = [1920, 4, 4];

/// Batch size the graph is compiled for; short batches are zero-padded.
pub const DEFAULT_BATCH: usize = 16;

type Plan = TypedRunnableModel<TypedModel>;

fn model_err(e: impl std::fmt::Display) -> Error {
    Error::Model(e.to_string())
}

pub struct Extractor {
    plan: Plan,
    batch: usize,
    model_sha256: String,
}

impl std::fmt::Debug for Extractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Extractor")
            .field("batch", &self.batch)
            .field("model_sha256", &self.model_sha256)
            .finish()
    }
}

impl Extractor {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::load_with_batch(path, DEFAULT_BATCH)
    }

    /// Loads and optimizes the graph for a fixed batch size, verifying the
    /// `(N,3,128,128) -> (N,1920,4,4)` signature.
    pub fn load_with_batch(path: impl AsRef<Path>, batch: usize) -> Result<Self> {
        let path = path.as_ref();
        if batch == 0 {
            return Err(Error::invalid("extractor batch size must be positive"));
        }
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let model_sha256 = sha256_hex(&bytes);
        let mut model = tract_onnx::onnx()
            .model_for_read(&mut bytes.as_slice())
            .map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
        if model.inputs.len() != 1 || model.outputs.len() != 1 {
            return Err(Error::Model(format!(
                "expected one input and one output, found {} and {}",
                model.inputs.len(),
                model.outputs.len()
            )));
        }
        let input_name = &model.node(model.inputs[0].node).name;
        if input_name != "input" {
            log::warn!("extractor input is named {input_name:?}, expected \"input\"");
        }
        let in_shape = [batch, INPUT_CHW[0], INPUT_CHW[1], INPUT_CHW[2]];
        model = model
            .with_input_fact(0, f32::fact(in_shape).into())
            .map_err(|e| Error::Model(format!("input signature: expected {in_shape:?}: {e}")))?;
        let typed = model
            .into_typed()
            .map_err(|e| Error::Model(format!("graph rejects input {in_shape:?}: {e}")))?;
        let out = typed.output_fact(0).map_err(model_err)?;
        let expected = [batch, OUTPUT_CHW[0], OUTPUT_CHW[1], OUTPUT_CHW[2]];
        match out.shape.as_concrete() {
            Some(found) if found == expected => {}
            Some(found) => return Err(Error::shape(expected, found)),
            None => return Err(Error::shape(expected, format!("{:?}", out.shape))),
        }
        if out.datum_type != f32::datum_type() {
            return Err(Error::Model(format!(
                "output type {:?}, expected f32",
                out.datum_type
            )));
        }
        let plan = typed
            .into_optimized()
            .and_then(|m| m.into_runnable())
            .map_err(model_err)?;
        Ok(Self {
            plan,
            batch,
            model_sha256,
        })
    }

    pub fn model_sha256(&self) -> &str {
        &self.model_sha256
    }

    /// One feature tensor per input, in order.
    pub fn extract(&self, images: &[ImageTensor]) -> Result<Vec<FeatureTensor>> {
        let mut out = Vec::with_capacity(images.len());
        for chunk in images.chunks(self.batch) {
            let inputs: Vec<&[f32]> = chunk.iter().map(|t| t.data.as_slice()).collect();
            for (data, img) in self.run_raw(&inputs)?.into_iter().zip(chunk) {
                out.push(FeatureTensor::new(data, img.source_id.clone())?);
            }
        }
        Ok(out)
    }

    /// Runs at most one compiled batch of flat `(3,128,128)` inputs.
    pub fn run_raw(&self, inputs: &[&[f32]]) -> Result<Vec<Vec<f32>>> {
        let sample = INPUT_CHW.iter().product::<usize>();
        if inputs.len() > self.batch {
            return Err(Error::invalid(format!(
                "{} inputs exceed compiled batch {}",
                inputs.len(),
                self.batch
            )));
        }
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let mut flat = vec![0f32; self.batch * sample];
        for (dst, src) in flat.chunks_exact_mut(sample).zip(inputs) {
            if src.len() != sample {
                return Err(Error::shape(INPUT_CHW, src.len()));
            }
            dst.copy_from_slice(src);
        }
        let shape = [self.batch, INPUT_CHW[0], INPUT_CHW[1], INPUT_CHW[2]];
        let tensor = Tensor::from_shape(&shape, &flat).map_err(model_err)?;
        let result = self.plan.run(tvec!(tensor.into())).map_err(model_err)?;
        let view = result[0].as_slice::<f32>().map_err(model_err)?;
        let out: Vec<Vec<f32>> = view
            .chunks_exact(FEATURE_LEN)
            .take(inputs.len())
            .map(<[f32]>::to_vec)
            .collect();
        if out.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Model("extractor produced non-finite values".into()));
        }
        Ok(out)
    }
}
