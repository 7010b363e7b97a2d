//! Multispectral sample cubes and their flat binary container.
//!
//! A container is a sequence of records. Each record is one JSON header
//! line `{"id":…,"bands":…,"h":…,"w":…}` followed by `bands*h*w`
//! little-endian `f32` pixels in band-major, row-major order. A dataset
//! directory holds `cubes.bin` plus `index.csv` mapping `sample_id` to the
//! byte offset of the record header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CUBES_FILE: &str = "cubes.bin";
pub const INDEX_FILE: &str = "index.csv";

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad container header: {0}")]
    Header(String),
    #[error("bad cube index at line {0}")]
    Index(usize),
    #[error("cube `{0}` not found")]
    Missing(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch { expected: Shape, found: Shape },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub bands: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.bands * self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCube {
    pub shape: Shape,
    /// Band-major, then row-major pixels.
    pub data: Vec<f32>,
}

impl SampleCube {
    pub fn new(shape: Shape, data: Vec<f32>) -> Self {
        assert_eq!(shape.len(), data.len(), "cube data does not match its shape");
        SampleCube { shape, data }
    }

    pub fn band(&self, b: usize) -> &[f32] {
        let n = self.shape.h * self.shape.w;
        &self.data[b * n..(b + 1) * n]
    }

    pub fn band_mean(&self, b: usize) -> f64 {
        let px = self.band(b);
        px.iter().map(|&v| f64::from(v)).sum::<f64>() / px.len() as f64
    }

    pub fn band_means(&self) -> Vec<f64> {
        (0..self.shape.bands).map(|b| self.band_mean(b)).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RecordHeader {
    id: String,
    bands: usize,
    h: usize,
    w: usize,
}

/// Writes one record; returns the number of bytes written.
pub fn write_record<W: Write>(w: &mut W, id: &str, shape: Shape, data: &[f32]) -> Result<u64, CubeError> {
    assert_eq!(shape.len(), data.len());
    let header = serde_json::to_string(&RecordHeader {
        id: id.to_string(),
        bands: shape.bands,
        h: shape.h,
        w: shape.w,
    })
    .map_err(|e| CubeError::Header(e.to_string()))?;
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(data.len() * 4);
    for v in data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(header.len() as u64 + 1 + buf.len() as u64)
}

/// Reads the record starting at the reader's position; `None` at clean EOF.
pub fn read_record<R: BufRead>(r: &mut R) -> Result<Option<(String, Shape, Vec<f32>)>, CubeError> {
    let mut line = String::new();
    if r.read_line(&mut line)? == 0 {
        return Ok(None);
    }
    let header: RecordHeader =
        serde_json::from_str(line.trim_end()).map_err(|e| CubeError::Header(e.to_string()))?;
    let shape = Shape {
        bands: header.bands,
        h: header.h,
        w: header.w,
    };
    let mut bytes = vec![0u8; shape.len() * 4];
    r.read_exact(&mut bytes)?;
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(Some((header.id, shape, data)))
}

/// Streams cubes into `dir/cubes.bin` and records their offsets.
pub struct CubeWriter {
    dir: PathBuf,
    out: std::io::BufWriter<File>,
    offset: u64,
    index: Vec<(String, u64)>,
}

impl CubeWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self, CubeError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir)?;
        let out = std::io::BufWriter::new(File::create(dir.join(CUBES_FILE))?);
        Ok(CubeWriter {
            dir,
            out,
            offset: 0,
            index: Vec::new(),
        })
    }

    pub fn push(&mut self, id: &str, cube: &SampleCube) -> Result<(), CubeError> {
        let n = write_record(&mut self.out, id, cube.shape, &cube.data)?;
        self.index.push((id.to_string(), self.offset));
        self.offset += n;
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), CubeError> {
        self.out.flush()?;
        self.out.get_ref().sync_all()?;
        let mut index = String::from("sample_id,offset\n");
        for (id, off) in &self.index {
            index.push_str(&format!("{id},{off}\n"));
        }
        crate::io::write_atomic(&self.dir.join(INDEX_FILE), index.as_bytes())?;
        Ok(())
    }
}

/// Random access to a cube directory.
pub struct CubeStore {
    file: BufReader<File>,
    index: BTreeMap<String, u64>,
}

impl CubeStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, CubeError> {
        let dir = dir.as_ref();
        let text = std::fs::read_to_string(dir.join(INDEX_FILE))?;
        let mut lines = text.lines();
        if lines.next() != Some("sample_id,offset") {
            return Err(CubeError::Index(1));
        }
        let mut index = BTreeMap::new();
        for (i, line) in lines.enumerate() {
            let (id, off) = line.split_once(',').ok_or(CubeError::Index(i + 2))?;
            let off: u64 = off.trim().parse().map_err(|_| CubeError::Index(i + 2))?;
            index.insert(id.to_string(), off);
        }
        Ok(CubeStore {
            file: BufReader::new(File::open(dir.join(CUBES_FILE))?),
            index,
        })
    }

    /// Sample ids in ascending order.
    pub fn ids(&self) -> impl Iterator<Item = &String> {
        self.index.keys()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&mut self, id: &str) -> Result<SampleCube, CubeError> {
        let off = *self.index.get(id).ok_or_else(|| CubeError::Missing(id.to_string()))?;
        self.file.seek(SeekFrom::Start(off))?;
        let (found, shape, data) = read_record(&mut self.file)?.ok_or_else(|| CubeError::Missing(id.to_string()))?;
        if found != id {
            return Err(CubeError::Header(format!("index points `{id}` at record `{found}`")));
        }
        Ok(SampleCube::new(shape, data))
    }
}
