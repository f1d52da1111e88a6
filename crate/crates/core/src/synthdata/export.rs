//! On-disk dataset container.
//!
//! `observations.bin` holds the magic `DLDATA01`, a little-endian `u64`
//! header length, a JSON [`DatasetHeader`], then every noiseless observation
//! as little-endian `f32` in lexicographic combination order. `split.json`
//! holds the [`SplitMask`] with sorted index lists.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::FactorGrid;
use super::render::{ObservationSpec, Renderer};
use super::split::{split_combinations, SplitMask};
use crate::{Error, Result};

pub const DATA_MAGIC: &[u8; 8] = b"DLDATA01";
pub const OBSERVATIONS_FILE: &str = "observations.bin";
pub const SPLIT_FILE: &str = "split.json";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub ratio: (u32, u32),
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub grid: FactorGrid,
    pub observation: ObservationSpec,
    pub spec_hash: String,
    pub n_rows: usize,
    pub d_x: usize,
    pub split: SplitSummary,
}

/// Everything needed to build a dataset and its split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub grid: FactorGrid,
    pub observation: ObservationSpec,
    pub split_ratio: (u32, u32),
    pub split_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            grid: FactorGrid::default(),
            observation: ObservationSpec::default(),
            split_ratio: (1, 9),
            split_seed: 0,
        }
    }
}

/// A renderer paired with its combination split.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub renderer: Renderer,
    pub split: SplitMask,
}

impl Dataset {
    pub fn build(cfg: &DatasetConfig) -> Result<Self> {
        let renderer = Renderer::new(cfg.grid.clone(), cfg.observation.clone())?;
        let split = split_combinations(&cfg.grid, cfg.split_ratio, cfg.split_seed)?;
        Ok(Dataset { renderer, split })
    }

    pub fn grid(&self) -> &FactorGrid {
        self.renderer.grid()
    }

    pub fn header(&self) -> Result<DatasetHeader> {
        Ok(DatasetHeader {
            version: FORMAT_VERSION,
            grid: self.grid().clone(),
            observation: self.renderer.spec().clone(),
            spec_hash: self.renderer.spec_hash()?,
            n_rows: self.grid().total(),
            d_x: self.renderer.d_x(),
            split: SplitSummary {
                ratio: self.split.ratio,
                seed: self.split.seed,
                n_train: self.split.train.len(),
                n_test: self.split.test.len(),
            },
        })
    }

    /// Write `observations.bin` and `split.json` into `dir`.
    pub fn export(&self, dir: &Path) -> Result<DatasetHeader> {
        std::fs::create_dir_all(dir)?;
        let header = self.header()?;
        let json = serde_json::to_vec(&header)?;
        let mut w = BufWriter::new(File::create(dir.join(OBSERVATIONS_FILE))?);
        w.write_all(DATA_MAGIC)?;
        w.write_all(&(json.len() as u64).to_le_bytes())?;
        w.write_all(&json)?;
        self.renderer.for_each_chunk(|_, x| {
            let mut buf = Vec::with_capacity(4 * x.len());
            for r in 0..x.nrows() {
                for v in x.row(r).iter() {
                    buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            w.write_all(&buf)?;
            Ok(())
        })?;
        w.flush()?;
        let split = BufWriter::new(File::create(dir.join(SPLIT_FILE))?);
        serde_json::to_writer(split, &self.split)?;
        Ok(header)
    }

    /// Rebuild from an exported directory, checking that the stored
    /// generator hash matches a fresh render of the same spec.
    pub fn load(dir: &Path) -> Result<Self> {
        let header = read_header(dir)?;
        let renderer = Renderer::new(header.grid.clone(), header.observation.clone())?;
        let hash = renderer.spec_hash()?;
        if hash != header.spec_hash {
            return Err(Error::Format(format!(
                "dataset spec hash {} does not match regenerated {hash}",
                header.spec_hash
            )));
        }
        let split: SplitMask = serde_json::from_reader(BufReader::new(File::open(dir.join(SPLIT_FILE))?))?;
        if split.total() != header.n_rows
            || split.ratio != header.split.ratio
            || split.seed != header.split.seed
            || split.train.len() != header.split.n_train
        {
            return Err(Error::Format("split sidecar does not match dataset header".into()));
        }
        Ok(Dataset { renderer, split })
    }
}

fn open_after_header(dir: &Path) -> Result<(DatasetHeader, BufReader<File>)> {
    let mut r = BufReader::new(File::open(dir.join(OBSERVATIONS_FILE))?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != DATA_MAGIC {
        return Err(Error::Format("not a dataset file (bad magic)".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 26 {
        return Err(Error::Format(format!("dataset header of {len} bytes")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: DatasetHeader = serde_json::from_slice(&json)?;
    if header.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {}", header.version)));
    }
    Ok((header, r))
}

pub fn read_header(dir: &Path) -> Result<DatasetHeader> {
    open_after_header(dir).map(|(h, _)| h)
}

/// Read the stored `f32` payload as `n_rows × d_x` row-major values.
pub fn read_observations(dir: &Path) -> Result<(DatasetHeader, Vec<f32>)> {
    let (header, mut r) = open_after_header(dir)?;
    let n = header.n_rows * header.d_x;
    let mut bytes = vec![0u8; 4 * n];
    r.read_exact(&mut bytes)?;
    let values = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    Ok((header, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::enumerate_combinations;

    fn small_cfg() -> DatasetConfig {
        DatasetConfig {
            grid: FactorGrid::from_cardinalities(&[3, 4, 2]).unwrap(),
            split_ratio: (3, 7),
            split_seed: 5,
            ..Default::default()
        }
    }

    #[test]
    fn export_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let ds = Dataset::build(&small_cfg()).unwrap();
        let header = ds.export(dir.path()).unwrap();
        let back = Dataset::load(dir.path()).unwrap();
        assert_eq!(back.split, ds.split);
        assert_eq!(read_header(dir.path()).unwrap(), header);

        let (_, payload) = read_observations(dir.path()).unwrap();
        let clean = ds.renderer.render_clean(&enumerate_combinations(ds.grid())).unwrap();
        assert_eq!(payload.len(), clean.len());
        for r in 0..clean.nrows() {
            for c in 0..clean.ncols() {
                assert_eq!(payload[r * header.d_x + c], clean[(r, c)] as f32);
            }
        }
    }

    #[test]
    fn tampered_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        Dataset::build(&small_cfg()).unwrap().export(dir.path()).unwrap();
        let path = dir.path().join(OBSERVATIONS_FILE);
        let mut bytes = std::fs::read(&path).unwrap();
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let pos = text.find("\"generator_seed\":0").unwrap() + "\"generator_seed\":".len();
        bytes[pos] = b'7';
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(Dataset::load(dir.path()), Err(Error::Format(_))));
    }
}
