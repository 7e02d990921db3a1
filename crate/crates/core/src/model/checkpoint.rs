//! Checkpoint container: an 8-byte magic, a format version, a JSON header
//! (config, tensor manifest, optional training state) and raw little-endian
//! f32 data (parameters, then Adam moments when present).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Layout, ModelConfig, TensorInfo};
use super::optim::AdamW;
use super::train::{TrainConfig, TrainLogEntry, TrainState};
use super::{Model, ModelError};

const MAGIC: &[u8; 8] = b"PONDERCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct OptimHeader {
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct TrainHeader {
    step: usize,
    optimizer: OptimHeader,
    log: Vec<TrainLogEntry>,
    config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    tensors: Vec<TensorInfo>,
    n_params: usize,
    train: Option<TrainHeader>,
}

/// A loaded checkpoint.
#[derive(Debug)]
pub struct Checkpoint {
    pub model: Model,
    pub state: Option<TrainState>,
    pub train_config: Option<TrainConfig>,
}

fn write_f32s(w: &mut impl Write, xs: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(xs.len() * 4);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>, ModelError> {
    let mut buf = vec![0u8; n * 4];
    r.read_exact(&mut buf)
        .map_err(|e| ModelError::Checkpoint(format!("truncated tensor data: {e}")))?;
    Ok(buf.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    state: Option<&TrainState>,
    train_config: Option<&TrainConfig>,
) -> Result<(), ModelError> {
    let header = Header {
        config: model.config.clone(),
        tensors: model.layout.tensors.clone(),
        n_params: model.n_params(),
        train: state.map(|s| TrainHeader {
            step: s.step,
            optimizer: OptimHeader {
                beta1: s.optimizer.beta1,
                beta2: s.optimizer.beta2,
                eps: s.optimizer.eps,
                weight_decay: s.optimizer.weight_decay,
                t: s.optimizer.t,
            },
            log: s.log.clone(),
            config: train_config.cloned(),
        }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    write_f32s(&mut w, &model.params)?;
    if let Some(s) = state {
        write_f32s(&mut w, &s.optimizer.m)?;
        write_f32s(&mut w, &s.optimizer.v)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("not a checkpoint file".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json)?;
    header.config.check()?;
    let layout = Layout::new(&header.config);
    if layout.tensors != header.tensors || layout.total != header.n_params {
        return Err(ModelError::Checkpoint("tensor manifest does not match the config".into()));
    }
    let params = read_f32s(&mut r, header.n_params)?;
    let model = Model {
        config: header.config,
        layout,
        params,
    };
    let (state, train_config) = match header.train {
        Some(t) => {
            let m = read_f32s(&mut r, model.n_params())?;
            let v = read_f32s(&mut r, model.n_params())?;
            let optimizer = AdamW {
                beta1: t.optimizer.beta1,
                beta2: t.optimizer.beta2,
                eps: t.optimizer.eps,
                weight_decay: t.optimizer.weight_decay,
                t: t.optimizer.t,
                m,
                v,
            };
            (
                Some(TrainState {
                    step: t.step,
                    optimizer,
                    log: t.log,
                }),
                t.config,
            )
        }
        None => (None, None),
    };
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(ModelError::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(Checkpoint {
        model,
        state,
        train_config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let model = Model::new(ModelConfig::tiny()).unwrap();
        let mut state = TrainState::new(&model, &TrainConfig::default());
        state.optimizer.m[3] = 0.25;
        state.step = 7;
        save_checkpoint(&path, &model, Some(&state), Some(&TrainConfig::default())).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.model.params, model.params);
        assert_eq!(ck.model.config, model.config);
        let st = ck.state.unwrap();
        assert_eq!(st.step, 7);
        assert_eq!(st.optimizer.m, state.optimizer.m);

        save_checkpoint(&path, &model, None, None).unwrap();
        assert!(load_checkpoint(&path).unwrap().state.is_none());
        std::fs::write(&path, b"garbage!").unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
