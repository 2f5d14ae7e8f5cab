//! Model checkpoints: magic `QRLC`, `u32` header length, JSON header, then
//! little-endian `f32` parameter streams in the order the header lists them.

use std::io::{Read, Write};

use anyhow::{bail, ensure, Context, Result};
use qrl_core::nn::{InputNorm, MlpParams, MlpSpec};
use qrl_core::quasimetric::{CriticSpec, QuasimetricCritic};
use qrl_core::td::QNetwork;
use serde::{Deserialize, Serialize};

pub const MAGIC: &[u8; 4] = b"QRLC";
pub const VERSION: u32 = 1;

/// A trained model of either algorithm family.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Quasimetric critic trained by the constrained objective.
    Qrl(QuasimetricCritic<f32>),
    /// Action-value network trained by Q-learning.
    QLearning(QNetwork<f32>),
}

/// Which environment a checkpoint was trained on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvTag {
    pub id: String,
    pub resolution: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Arch {
    QuasimetricCritic { critic: CriticSpec, mix_raw: Option<f32> },
    QuasimetricQ { critic: CriticSpec, mix_raw: Option<f32> },
    MonolithicQ { input_norm: InputNorm, widths: Vec<usize> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Stream {
    name: String,
    /// `(fan_in, fan_out)` per layer; each layer stores its weight matrix
    /// row-major (`fan_in × fan_out`) followed by the bias.
    layers: Vec<(usize, usize)>,
    len: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    env: EnvTag,
    arch: Arch,
    streams: Vec<Stream>,
}

fn stream(name: &str, p: &MlpParams<f32>) -> Stream {
    Stream {
        name: name.to_string(),
        layers: p.spec().layer_shapes().collect(),
        len: p.len(),
    }
}

fn critic_parts(c: &QuasimetricCritic<f32>) -> (CriticSpec, Option<f32>, Vec<Stream>, Vec<&[f32]>) {
    let streams = vec![
        stream("encoder", c.encoder()),
        stream("projector", c.projector()),
        stream("transition", c.transition()),
    ];
    let data = vec![c.encoder().as_slice(), c.projector().as_slice(), c.transition().as_slice()];
    (c.spec().clone(), c.mix_raw(), streams, data)
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &Model, env: &EnvTag) -> Result<()> {
    let (arch, streams, data) = match model {
        Model::Qrl(c) => {
            let (critic, mix_raw, s, d) = critic_parts(c);
            (Arch::QuasimetricCritic { critic, mix_raw }, s, d)
        }
        Model::QLearning(QNetwork::Quasimetric(c)) => {
            let (critic, mix_raw, s, d) = critic_parts(c);
            (Arch::QuasimetricQ { critic, mix_raw }, s, d)
        }
        Model::QLearning(QNetwork::Monolithic { input_norm, mlp }) => (
            Arch::MonolithicQ {
                input_norm: input_norm.clone(),
                widths: mlp.spec().widths.clone(),
            },
            vec![stream("q_mlp", mlp)],
            vec![mlp.as_slice()],
        ),
    };
    let header = serde_json::to_vec(&Header {
        format: "qrl-checkpoint".to_string(),
        version: VERSION,
        env: env.clone(),
        arch,
        streams,
    })?;
    w.write_all(MAGIC)?;
    w.write_all(&u32::try_from(header.len())?.to_le_bytes())?;
    w.write_all(&header)?;
    let mut buf = Vec::with_capacity(data.iter().map(|d| d.len() * 4).sum());
    for d in data {
        for x in d {
            buf.extend_from_slice(&x.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn checkpoint_bytes(model: &Model, env: &EnvTag) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_checkpoint(&mut out, model, env)?;
    Ok(out)
}

fn mlp_from(spec: MlpSpec, stream: &Stream, floats: &mut impl Iterator<Item = f32>) -> Result<MlpParams<f32>> {
    let shapes: Vec<_> = spec.layer_shapes().collect();
    ensure!(
        shapes == stream.layers,
        "stream `{}` layer shapes {:?} differ from architecture {:?}",
        stream.name,
        stream.layers,
        shapes
    );
    ensure!(stream.len == spec.num_params(), "stream `{}` has wrong length", stream.name);
    let data: Vec<f32> = floats.take(stream.len).collect();
    ensure!(data.len() == stream.len, "truncated parameter stream `{}`", stream.name);
    Ok(MlpParams::from_flat(spec, data)?)
}

fn critic_from(
    spec: CriticSpec,
    mix_raw: Option<f32>,
    streams: &[Stream],
    floats: &mut impl Iterator<Item = f32>,
) -> Result<QuasimetricCritic<f32>> {
    ensure!(streams.len() == 3, "critic checkpoints carry three streams");
    let enc = mlp_from(spec.encoder_spec()?, &streams[0], floats)?;
    let proj = mlp_from(spec.projector_spec()?, &streams[1], floats)?;
    let trans = mlp_from(spec.transition_spec()?, &streams[2], floats)?;
    let head: Vec<f32> = mix_raw.into_iter().collect();
    Ok(QuasimetricCritic::from_parts(spec, enc, proj, trans, head)?)
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<(Model, EnvTag)> {
    ensure!(bytes.len() >= 8 && &bytes[..4] == MAGIC, "not a checkpoint file (bad magic)");
    let hlen = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    ensure!(bytes.len() >= 8 + hlen, "truncated checkpoint header");
    let header: Header = serde_json::from_slice(&bytes[8..8 + hlen]).context("checkpoint header")?;
    ensure!(header.version == VERSION, "unsupported checkpoint version {}", header.version);
    let payload = &bytes[8 + hlen..];
    let declared: usize = header.streams.iter().map(|s| s.len).sum();
    if payload.len() != declared * 4 {
        bail!("checkpoint declares {declared} parameters but carries {} bytes", payload.len());
    }
    let mut floats = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")));
    let model = match header.arch {
        Arch::QuasimetricCritic { critic, mix_raw } => {
            Model::Qrl(critic_from(critic, mix_raw, &header.streams, &mut floats)?)
        }
        Arch::QuasimetricQ { critic, mix_raw } => Model::QLearning(QNetwork::Quasimetric(critic_from(
            critic,
            mix_raw,
            &header.streams,
            &mut floats,
        )?)),
        Arch::MonolithicQ { input_norm, widths } => {
            ensure!(header.streams.len() == 1, "monolithic checkpoints carry one stream");
            let mlp = mlp_from(MlpSpec::relu(&widths)?, &header.streams[0], &mut floats)?;
            Model::QLearning(QNetwork::Monolithic { input_norm, mlp })
        }
    };
    Ok((model, header.env))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Model, EnvTag)> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_checkpoint(&bytes)
}
