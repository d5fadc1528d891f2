//! Binary metric-model file. Same framing as the descriptor cache with its
//! own magic; all matrices stored at 64-bit so read(write(m)) is bit-exact.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::config::{hash_hex, MetricKind};
use crate::error::{Error, Result};
use crate::metric::{MetricModel, PcaTransform};

pub const MODEL_MAGIC: &[u8; 4] = b"MLGM";
pub const MODEL_VERSION: u32 = 1;

/// Header fields surfaced by `info`.
#[derive(Debug, Clone)]
pub struct ModelHeader {
    pub version: u32,
    pub descriptor_hash: [u8; 32],
    pub kind: MetricKind,
    pub input_dim: usize,
    pub pca_dim: Option<usize>,
    pub projection_dims: (usize, usize),
    pub kernel_dims: (usize, usize),
}

impl ModelHeader {
    pub fn hash_hex(&self) -> String {
        hash_hex(&self.descriptor_hash)
    }
}

fn write_matrix<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    w.write_u64::<LittleEndian>(m.nrows() as u64)?;
    w.write_u64::<LittleEndian>(m.ncols() as u64)?;
    for v in m.as_slice() {
        w.write_f64::<LittleEndian>(*v)?;
    }
    Ok(())
}

fn read_matrix<R: Read>(r: &mut R) -> Result<DMatrix<f64>> {
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    let mut data = vec![0.0f64; rows * cols];
    for v in &mut data {
        *v = r
            .read_f64::<LittleEndian>()
            .map_err(|_| Error::Format("truncated model file (matrix data)".into()))?;
    }
    Ok(DMatrix::from_column_slice(rows, cols, &data))
}

fn write_vector<W: Write>(w: &mut W, v: &DVector<f64>) -> Result<()> {
    w.write_u64::<LittleEndian>(v.len() as u64)?;
    for x in v.iter() {
        w.write_f64::<LittleEndian>(*x)?;
    }
    Ok(())
}

fn read_vector<R: Read>(r: &mut R) -> Result<DVector<f64>> {
    let len = r.read_u64::<LittleEndian>()? as usize;
    let mut data = vec![0.0f64; len];
    for v in &mut data {
        *v = r
            .read_f64::<LittleEndian>()
            .map_err(|_| Error::Format("truncated model file (vector data)".into()))?;
    }
    Ok(DVector::from_vec(data))
}

pub fn write_model(path: &Path, model: &MetricModel, descriptor_hash: &[u8; 32]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MODEL_MAGIC)?;
    w.write_u32::<LittleEndian>(MODEL_VERSION)?;
    w.write_all(descriptor_hash)?;
    w.write_u8(model.kind.tag())?;
    match &model.pca {
        Some(t) => {
            w.write_u8(1)?;
            write_vector(&mut w, &t.mean)?;
            write_matrix(&mut w, &t.basis)?;
        }
        None => w.write_u8(0)?,
    }
    write_matrix(&mut w, &model.projection)?;
    write_matrix(&mut w, &model.kernel)?;
    write_vector(&mut w, &model.train_mean)?;
    w.flush()?;
    Ok(())
}

fn read_framing<R: Read>(r: &mut R) -> Result<(u32, [u8; 32])> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated model file".into()))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::Format("not a metric model file (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != MODEL_VERSION {
        return Err(Error::Format(format!(
            "unsupported model version {version} (expected {MODEL_VERSION})"
        )));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    Ok((version, hash))
}

pub fn read_model(path: &Path) -> Result<(MetricModel, [u8; 32])> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let (_, hash) = read_framing(&mut r)?;
    let kind = MetricKind::from_tag(r.read_u8()?)?;
    let pca = match r.read_u8()? {
        0 => None,
        1 => {
            let mean = read_vector(&mut r)?;
            let basis = read_matrix(&mut r)?;
            Some(PcaTransform { mean, basis })
        }
        other => return Err(Error::Format(format!("bad PCA flag {other}"))),
    };
    let projection = read_matrix(&mut r)?;
    let kernel = read_matrix(&mut r)?;
    let train_mean = read_vector(&mut r)?;
    Ok((
        MetricModel {
            kind,
            pca,
            projection,
            kernel,
            train_mean,
        },
        hash,
    ))
}

pub fn read_model_header(path: &Path) -> Result<ModelHeader> {
    let (model, hash) = read_model(path)?;
    Ok(ModelHeader {
        version: MODEL_VERSION,
        descriptor_hash: hash,
        kind: model.kind,
        input_dim: model.input_dim(),
        pca_dim: model.pca.as_ref().map(|t| t.output_dim()),
        projection_dims: (model.projection.nrows(), model.projection.ncols()),
        kernel_dims: (model.kernel.nrows(), model.kernel.ncols()),
    })
}
