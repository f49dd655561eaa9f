//! Resumable chain checkpoints: `checkpoint.json` holds parameters, the
//! generator state and the draws so far; `latents.bin` holds the current
//! latent paths as little-endian `f64` after a `[n, q, k]` `u64` header.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dist::SimRng;
use crate::error::{Error, Result};
use crate::mcmc::{ChainConfig, ChainState, DrawSet, ModelParams};
use crate::model::{LatentPaths, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSpec {
    pub dir: PathBuf,
    /// Write every `every` iterations; 0 disables writing.
    pub every: usize,
    /// Stop with `Error::Interrupted` after this many iterations (for staged runs).
    pub stop_after: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
    chain: ChainConfig,
    iteration: usize,
    params: ModelParams,
    pi: (f64, f64),
    rng: SimRng,
    draws: DrawSet,
}

pub(crate) struct Resumed {
    pub state: ChainState,
    pub rng: SimRng,
    pub draws: DrawSet,
    pub iteration: usize,
}

fn json_path(dir: &Path) -> PathBuf {
    dir.join("checkpoint.json")
}

fn bin_path(dir: &Path) -> PathBuf {
    dir.join("latents.bin")
}

pub fn write_latents(path: &Path, lat: &LatentPaths) -> Result<()> {
    let (n, q, k) = (lat.f.nrows(), lat.f.ncols(), lat.h.ncols());
    let mut buf = Vec::with_capacity(24 + 8 * n * (q + k));
    for v in [n, q, k] {
        buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for m in [&lat.f, &lat.h] {
        for t in 0..n {
            for c in 0..m.ncols() {
                buf.extend_from_slice(&m[(t, c)].to_le_bytes());
            }
        }
    }
    let tmp = path.with_extension("bin.tmp");
    fs::File::create(&tmp)?.write_all(&buf)?;
    fs::rename(tmp, path)?;
    Ok(())
}

pub fn read_latents(path: &Path) -> Result<LatentPaths> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let word = |i: usize| -> Option<[u8; 8]> { buf.get(8 * i..8 * i + 8).and_then(|s| s.try_into().ok()) };
    let bad = || Error::InvalidConfig(format!("corrupt latent dump {}", path.display()));
    let header: Vec<usize> = (0..3).map(|i| word(i).map(|w| u64::from_le_bytes(w) as usize)).collect::<Option<_>>().ok_or_else(bad)?;
    let (n, q, k) = (header[0], header[1], header[2]);
    if buf.len() != 24 + 8 * n * (q + k) {
        return Err(bad());
    }
    let val = |i: usize| f64::from_le_bytes(word(3 + i).expect("length checked"));
    let f = DMatrix::from_fn(n, q, |t, c| val(t * q + c));
    let h = DMatrix::from_fn(n, k, |t, c| val(n * q + t * k + c));
    Ok(LatentPaths { f, h })
}

pub(crate) fn save(
    spec: &CheckpointSpec,
    model: &ModelConfig,
    chain: &ChainConfig,
    iteration: usize,
    state: &ChainState,
    rng: &SimRng,
    draws: &DrawSet,
) -> Result<()> {
    fs::create_dir_all(&spec.dir)?;
    write_latents(&bin_path(&spec.dir), &state.latents)?;
    let meta = Meta {
        model: *model,
        chain: *chain,
        iteration,
        params: state.params.clone(),
        pi: state.pi,
        rng: rng.clone(),
        draws: draws.clone(),
    };
    let tmp = json_path(&spec.dir).with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(&meta)?)?;
    fs::rename(tmp, json_path(&spec.dir))?;
    Ok(())
}

/// Loads a checkpoint written for the same model and chain settings, if any.
pub(crate) fn load(spec: &CheckpointSpec, model: &ModelConfig, chain: &ChainConfig) -> Result<Option<Resumed>> {
    let jp = json_path(&spec.dir);
    if !jp.exists() {
        return Ok(None);
    }
    let meta: Meta = serde_json::from_slice(&fs::read(&jp)?)?;
    if meta.model != *model || meta.chain != *chain {
        return Err(Error::InvalidConfig(format!(
            "checkpoint in {} was written for different model or chain settings",
            spec.dir.display()
        )));
    }
    let latents = read_latents(&bin_path(&spec.dir))?;
    Ok(Some(Resumed {
        state: ChainState { params: meta.params, latents, pi: meta.pi },
        rng: meta.rng,
        draws: meta.draws,
        iteration: meta.iteration,
    }))
}
