//! Binary checkpoints: one text header line, then the parameters as
//! little-endian `f64`.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use thiserror::Error;

use super::{NetworkError, ResNet, ShapeSpec, WrapperKind};

const MAGIC: &str = "apnn-checkpoint";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed checkpoint header: {0}")]
    Header(String),
    #[error("checkpoint truncated: expected {expected} values, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// A network plus the metadata stored alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub role: String,
    pub wrapper: WrapperKind,
    pub seed: u64,
    pub iteration: usize,
    pub net: ResNet,
}

pub fn write_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), CheckpointError> {
    let s = ck.net.shape();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "{MAGIC} role={} input={} width={} blocks={} output={} wrapper={} seed={} iteration={} count={}",
        ck.role,
        s.input_dim,
        s.width,
        s.blocks,
        s.output_dim,
        ck.wrapper.name(),
        ck.seed,
        ck.iteration,
        ck.net.param_count()
    )?;
    for v in ck.net.params() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let header = header.trim_end();
    let mut parts = header.split(' ');
    if parts.next() != Some(MAGIC) {
        return Err(CheckpointError::Header(header.to_string()));
    }
    let mut fields = std::collections::HashMap::new();
    for p in parts {
        let (k, v) = p.split_once('=').ok_or_else(|| CheckpointError::Header(p.to_string()))?;
        fields.insert(k, v);
    }
    let get = |k: &str| fields.get(k).copied().ok_or_else(|| CheckpointError::Header(format!("missing {k}")));
    let num = |k: &str| -> Result<u64, CheckpointError> {
        get(k)?.parse().map_err(|_| CheckpointError::Header(format!("bad {k}")))
    };
    let shape = ShapeSpec::new(
        num("input")? as usize,
        num("width")? as usize,
        num("blocks")? as usize,
        num("output")? as usize,
    );
    let wrapper = WrapperKind::parse(get("wrapper")?)
        .ok_or_else(|| CheckpointError::Header("unknown wrapper".into()))?;
    let count = num("count")? as usize;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(CheckpointError::Truncated { expected: count, found: bytes.len() / 8 });
    }
    let params = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(Checkpoint {
        role: get("role")?.to_string(),
        wrapper,
        seed: num("seed")?,
        iteration: num("iteration")? as usize,
        net: ResNet::from_params(shape, params)?,
    })
}
