//! Self-describing JSON checkpoints.
//!
//! Tensors are stored by name with their shape and the little-endian bytes of
//! their `f64` values in base64, so a save/load round trip is bitwise exact.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::networks::{init_params, NetConfig};
use crate::nn::Tensors;
use crate::training::{AdamMoments, Counters, TrainConfig, TrainState};

pub const FORMAT: &str = "svma-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRecord {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MomentsRecord {
    t: u64,
    m: Vec<String>,
    v: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: TrainConfig,
    net: NetConfig,
    joint_names: Vec<String>,
    step: u64,
    generator_version: u64,
    counters: Counters,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    generator: Vec<TensorRecord>,
    discriminator: Vec<TensorRecord>,
    generator_moments: MomentsRecord,
    discriminator_moments: MomentsRecord,
}

/// A loaded checkpoint: the training state plus the settings it was made with.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub state: TrainState,
    pub config: TrainConfig,
    pub joint_names: Vec<String>,
}

fn encode(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode(s: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let bytes = STANDARD
        .decode(s)
        .map_err(|e| Error::Checkpoint(format!("{what}: bad base64: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(Error::Checkpoint(format!(
            "{what}: expected {expected} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

fn records(t: &impl Tensors) -> Vec<TensorRecord> {
    t.tensor_list()
        .into_iter()
        .map(|t| TensorRecord {
            name: t.name,
            shape: t.shape,
            data: encode(t.data),
        })
        .collect()
}

fn restore(target: &mut impl Tensors, recs: &[TensorRecord], what: &str) -> Result<()> {
    let mut tensors = target.tensor_list_mut();
    if tensors.len() != recs.len() {
        return Err(Error::Checkpoint(format!(
            "{what}: expected {} tensors, found {}",
            tensors.len(),
            recs.len()
        )));
    }
    for (t, r) in tensors.iter_mut().zip(recs) {
        if t.name != r.name || t.shape != r.shape {
            return Err(Error::Checkpoint(format!(
                "{what}: expected tensor {} {:?}, found {} {:?}",
                t.name, t.shape, r.name, r.shape
            )));
        }
        let v = decode(&r.data, t.data.len(), &r.name)?;
        t.data.copy_from_slice(&v);
    }
    Ok(())
}

fn moments_record(m: &AdamMoments) -> MomentsRecord {
    MomentsRecord {
        t: m.t,
        m: m.m.iter().map(|v| encode(v)).collect(),
        v: m.v.iter().map(|v| encode(v)).collect(),
    }
}

fn restore_moments(template: &AdamMoments, r: &MomentsRecord, what: &str) -> Result<AdamMoments> {
    if r.m.len() != template.m.len() || r.v.len() != template.v.len() {
        return Err(Error::Checkpoint(format!("{what}: wrong number of moment buffers")));
    }
    let m = template
        .m
        .iter()
        .zip(&r.m)
        .map(|(t, s)| decode(s, t.len(), what))
        .collect::<Result<_>>()?;
    let v = template
        .v
        .iter()
        .zip(&r.v)
        .map(|(t, s)| decode(s, t.len(), what))
        .collect::<Result<_>>()?;
    Ok(AdamMoments { t: r.t, m, v })
}

pub fn to_json(state: &TrainState, config: &TrainConfig, joint_names: &[String]) -> Result<String> {
    let file = CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        config: config.clone(),
        net: state.net,
        joint_names: joint_names.to_vec(),
        step: state.step,
        generator_version: state.generator_version,
        counters: state.counters,
        rng: state.rng.clone(),
        order: state.order.clone(),
        cursor: state.cursor,
        generator: records(&state.generator),
        discriminator: records(&state.discriminator),
        generator_moments: moments_record(&state.gen_moments),
        discriminator_moments: moments_record(&state.dis_moments),
    };
    Ok(serde_json::to_string(&file)?)
}

pub fn from_json(text: &str) -> Result<Checkpoint> {
    let head: serde_json::Value = serde_json::from_str(text)?;
    match (head.get("format").and_then(|v| v.as_str()), head.get("version").and_then(|v| v.as_u64())) {
        (Some(FORMAT), Some(v)) if v == VERSION as u64 => {}
        (Some(FORMAT), Some(v)) => return Err(Error::Checkpoint(format!("unsupported version {v}"))),
        (Some(FORMAT), None) => return Err(Error::Checkpoint("missing version field".into())),
        _ => return Err(Error::Checkpoint("not an svma checkpoint".into())),
    }
    let file: CheckpointFile = serde_json::from_value(head)?;
    if file.joint_names.len() != file.net.num_joints {
        return Err(Error::Checkpoint("joint names do not match the network size".into()));
    }
    let (mut generator, mut discriminator) = init_params(0, &file.net);
    restore(&mut generator, &file.generator, "generator")?;
    restore(&mut discriminator, &file.discriminator, "discriminator")?;
    let gen_moments = restore_moments(&AdamMoments::for_params(&generator), &file.generator_moments, "generator moments")?;
    let dis_moments = restore_moments(
        &AdamMoments::for_params(&discriminator),
        &file.discriminator_moments,
        "discriminator moments",
    )?;
    let state = TrainState {
        net: file.net,
        generator,
        discriminator,
        gen_moments,
        dis_moments,
        step: file.step,
        generator_version: file.generator_version,
        rng: file.rng,
        counters: file.counters,
        order: file.order,
        cursor: file.cursor,
    };
    Ok(Checkpoint {
        state,
        config: file.config,
        joint_names: file.joint_names,
    })
}

/// Write via a temporary file and rename, so a failed write never leaves a
/// truncated checkpoint behind.
pub fn save_checkpoint(path: impl AsRef<Path>, state: &TrainState, config: &TrainConfig, joint_names: &[String]) -> Result<()> {
    let path = path.as_ref();
    let text = to_json(state, config, joint_names)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_json(&text)
}
