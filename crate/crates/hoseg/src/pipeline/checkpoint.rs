//! Versioned parameter blobs: a small binary format with the predictor role
//! and layer shape embedded, exact to the f64 bit.

use std::io::{Read, Write};
use std::path::Path;

use super::infer::SequentialPredictors;
use super::predictor::{ConvNet, ConvNetShape, TrainablePredictor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HOSEGCK1";
const VERSION: u16 = 1;

/// What a checkpointed predictor is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorRole {
    Hand,
    Boundary,
    ObjectWithBoundary,
    ObjectNoBoundary,
    Parallel,
}

impl PredictorRole {
    fn to_u8(self) -> u8 {
        match self {
            PredictorRole::Hand => 0,
            PredictorRole::Boundary => 1,
            PredictorRole::ObjectWithBoundary => 2,
            PredictorRole::ObjectNoBoundary => 3,
            PredictorRole::Parallel => 4,
        }
    }

    fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(PredictorRole::Hand),
            1 => Ok(PredictorRole::Boundary),
            2 => Ok(PredictorRole::ObjectWithBoundary),
            3 => Ok(PredictorRole::ObjectNoBoundary),
            4 => Ok(PredictorRole::Parallel),
            other => Err(Error::invalid(format!("unknown predictor role {other}"))),
        }
    }
}

pub fn save_checkpoint(net: &ConvNet, role: PredictorRole, path: &Path) -> Result<()> {
    let shape = net.shape();
    let params = net.params();
    let mut out = Vec::with_capacity(8 + 2 + 1 + 6 + 8 + params.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(role.to_u8());
    out.extend_from_slice(&(shape.in_channels as u16).to_le_bytes());
    out.extend_from_slice(&(shape.out_channels as u16).to_le_bytes());
    out.extend_from_slice(&(shape.hidden as u16).to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in &params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(ConvNet, PredictorRole)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let fail = |msg: &str| Error::format(path, msg.to_string());
    if bytes.len() < 27 || &bytes[0..8] != MAGIC {
        return Err(fail("not a checkpoint file"));
    }
    let version = u16::from_le_bytes([bytes[8], bytes[9]]);
    if version != VERSION {
        return Err(fail(&format!("unsupported checkpoint version {version}")));
    }
    let role = PredictorRole::from_u8(bytes[10])?;
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]) as usize;
    let shape = ConvNetShape {
        in_channels: u16_at(11),
        out_channels: u16_at(13),
        hidden: u16_at(15),
    };
    let count = u64::from_le_bytes(bytes[17..25].try_into().unwrap()) as usize;
    if bytes.len() != 25 + count * 8 {
        return Err(fail("truncated checkpoint"));
    }
    let params: Vec<f64> = bytes[25..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((ConvNet::from_parts(shape, params)?, role))
}

/// Write `hand.ckpt` / `boundary.ckpt` / `object.ckpt` under a directory.
pub fn save_sequential(nets: &SequentialPredictors<ConvNet>, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_checkpoint(&nets.hand, PredictorRole::Hand, &dir.join("hand.ckpt"))?;
    let object_role = if nets.boundary.is_some() {
        PredictorRole::ObjectWithBoundary
    } else {
        PredictorRole::ObjectNoBoundary
    };
    if let Some(b) = &nets.boundary {
        save_checkpoint(b, PredictorRole::Boundary, &dir.join("boundary.ckpt"))?;
    }
    save_checkpoint(&nets.object, object_role, &dir.join("object.ckpt"))
}

pub fn load_sequential(dir: &Path) -> Result<SequentialPredictors<ConvNet>> {
    let (hand, role) = load_checkpoint(&dir.join("hand.ckpt"))?;
    if role != PredictorRole::Hand {
        return Err(Error::format(dir.join("hand.ckpt"), "role mismatch"));
    }
    let boundary_path = dir.join("boundary.ckpt");
    let boundary = if boundary_path.exists() {
        let (net, role) = load_checkpoint(&boundary_path)?;
        if role != PredictorRole::Boundary {
            return Err(Error::format(boundary_path, "role mismatch"));
        }
        Some(net)
    } else {
        None
    };
    let (object, role) = load_checkpoint(&dir.join("object.ckpt"))?;
    let expected = if boundary.is_some() {
        PredictorRole::ObjectWithBoundary
    } else {
        PredictorRole::ObjectNoBoundary
    };
    if role != expected {
        return Err(Error::format(dir.join("object.ckpt"), "role mismatch"));
    }
    Ok(SequentialPredictors {
        hand,
        boundary,
        object,
    })
}
