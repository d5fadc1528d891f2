//! Binary descriptor cache. Little-endian framing:
//! magic "MLGD", version u32, config hash (32 bytes), block tags,
//! vector length, record count, then per-record ids and an f32 vector.
//! Computation stays 64-bit; storage is 32-bit.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::config::{hash_hex, DescriptorBlock};
use crate::error::{Error, Result};
use crate::eval::{Camera, DescriptorSet};

pub const CACHE_MAGIC: &[u8; 4] = b"MLGD";
pub const CACHE_VERSION: u32 = 1;

/// Header fields surfaced by `info`.
#[derive(Debug, Clone)]
pub struct CacheHeader {
    pub version: u32,
    pub descriptor_hash: [u8; 32],
    pub blocks: Vec<DescriptorBlock>,
    pub vec_len: usize,
    pub count: usize,
}

impl CacheHeader {
    pub fn hash_hex(&self) -> String {
        hash_hex(&self.descriptor_hash)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let bytes = s.as_bytes();
    if bytes.len() > u16::MAX as usize {
        return Err(Error::Format(format!("string too long for cache: {} bytes", bytes.len())));
    }
    w.write_u16::<LittleEndian>(bytes.len() as u16)?;
    w.write_all(bytes)?;
    Ok(())
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = r.read_u16::<LittleEndian>()? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| Error::Format("non-UTF-8 string in cache".into()))
}

pub fn write_cache(path: &Path, set: &DescriptorSet) -> Result<()> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(CACHE_MAGIC)?;
    w.write_u32::<LittleEndian>(CACHE_VERSION)?;
    w.write_all(&set.descriptor_hash)?;
    w.write_u8(set.blocks.len() as u8)?;
    for b in &set.blocks {
        w.write_u8(b.tag())?;
    }
    w.write_u32::<LittleEndian>(set.vec_len as u32)?;
    w.write_u32::<LittleEndian>(set.len() as u32)?;
    for i in 0..set.len() {
        write_str(&mut w, &set.image_ids[i])?;
        write_str(&mut w, &set.person_ids[i])?;
        w.write_u8(set.cameras[i].tag())?;
        let v = &set.vectors[i];
        if v.len() != set.vec_len {
            return Err(Error::Contract(format!(
                "descriptor {i} has length {} but header says {}",
                v.len(),
                set.vec_len
            )));
        }
        for &x in v {
            w.write_f32::<LittleEndian>(x as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_header<R: Read>(r: &mut R) -> Result<CacheHeader> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated cache file".into()))?;
    if &magic != CACHE_MAGIC {
        return Err(Error::Format("not a descriptor cache (bad magic)".into()));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CACHE_VERSION {
        return Err(Error::Format(format!(
            "unsupported cache version {version} (expected {CACHE_VERSION})"
        )));
    }
    let mut hash = [0u8; 32];
    r.read_exact(&mut hash)?;
    let n_blocks = r.read_u8()? as usize;
    let mut blocks = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        blocks.push(DescriptorBlock::from_tag(r.read_u8()?)?);
    }
    let vec_len = r.read_u32::<LittleEndian>()? as usize;
    let count = r.read_u32::<LittleEndian>()? as usize;
    Ok(CacheHeader {
        version,
        descriptor_hash: hash,
        blocks,
        vec_len,
        count,
    })
}

/// Reads only the header (used by `info`).
pub fn read_cache_header(path: &Path) -> Result<CacheHeader> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    read_header(&mut r)
}

pub fn read_cache(path: &Path) -> Result<DescriptorSet> {
    let file = std::fs::File::open(path)?;
    let mut r = BufReader::new(file);
    let header = read_header(&mut r)?;
    let mut image_ids = Vec::with_capacity(header.count);
    let mut person_ids = Vec::with_capacity(header.count);
    let mut cameras = Vec::with_capacity(header.count);
    let mut vectors = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        image_ids.push(read_str(&mut r)?);
        person_ids.push(read_str(&mut r)?);
        cameras.push(Camera::from_tag(r.read_u8()?)?);
        let mut v = Vec::with_capacity(header.vec_len);
        for _ in 0..header.vec_len {
            v.push(r.read_f32::<LittleEndian>().map_err(|_| {
                Error::Format("truncated cache file (vector data)".into())
            })? as f64);
        }
        vectors.push(v);
    }
    Ok(DescriptorSet {
        descriptor_hash: header.descriptor_hash,
        blocks: header.blocks,
        vec_len: header.vec_len,
        image_ids,
        person_ids,
        cameras,
        vectors,
    })
}

/// Reads a cache and hard-errors if it was built under a different
/// descriptor configuration.
pub fn read_cache_checked(path: &Path, expect_hash: &[u8; 32]) -> Result<DescriptorSet> {
    let set = read_cache(path)?;
    if &set.descriptor_hash != expect_hash {
        return Err(Error::Contract(format!(
            "cache config hash {} does not match current configuration {}",
            hash_hex(&set.descriptor_hash),
            hash_hex(expect_hash)
        )));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::FeatureSet;

    fn toy_set(count: usize, vec_len: usize) -> DescriptorSet {
        DescriptorSet {
            descriptor_hash: [7u8; 32],
            blocks: vec![
                DescriptorBlock::Set(FeatureSet::Ycm),
                DescriptorBlock::Set(FeatureSet::Schmid),
            ],
            vec_len,
            image_ids: (0..count).map(|i| format!("img/{i}.png")).collect(),
            person_ids: (0..count).map(|i| format!("p{}", i / 2)).collect(),
            cameras: (0..count)
                .map(|i| if i % 2 == 0 { Camera::A } else { Camera::B })
                .collect(),
            vectors: (0..count)
                .map(|i| (0..vec_len).map(|j| (i * vec_len + j) as f64 * 0.125).collect())
                .collect(),
        }
    }

    #[test]
    fn cache_round_trip_is_f32_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mlgd");
        let set = toy_set(10, 6);
        write_cache(&path, &set).unwrap();
        let back = read_cache(&path).unwrap();
        assert_eq!(back.image_ids, set.image_ids);
        assert_eq!(back.person_ids, set.person_ids);
        assert_eq!(back.cameras, set.cameras);
        assert_eq!(back.blocks, set.blocks);
        for (a, b) in back.vectors.iter().zip(&set.vectors) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(*x, *y as f32 as f64);
            }
        }
    }

    #[test]
    fn hash_mismatch_is_hard_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mlgd");
        write_cache(&path, &toy_set(2, 3)).unwrap();
        let err = read_cache_checked(&path, &[8u8; 32]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        assert!(read_cache_checked(&path, &[7u8; 32]).is_ok());
    }

    #[test]
    fn rejects_bad_magic_version_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.mlgd");
        write_cache(&path, &toy_set(3, 4)).unwrap();

        let bytes = std::fs::read(&path).unwrap();
        let bad_magic = path.with_extension("magic");
        let mut m = bytes.clone();
        m[0] = b'X';
        std::fs::write(&bad_magic, &m).unwrap();
        assert!(matches!(read_cache(&bad_magic), Err(Error::Format(_))));

        let bad_version = path.with_extension("ver");
        let mut v = bytes.clone();
        v[4] = 99;
        std::fs::write(&bad_version, &v).unwrap();
        assert!(matches!(read_cache(&bad_version), Err(Error::Format(_))));

        let truncated = path.with_extension("trunc");
        std::fs::write(&truncated, &bytes[..bytes.len() - 7]).unwrap();
        assert!(read_cache(&truncated).is_err());
    }
}
