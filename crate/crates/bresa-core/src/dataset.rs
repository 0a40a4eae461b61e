//! Offline dataset file format: a fixed header (env id, dims, count) followed
//! by fixed-width little-endian records. Round trips are bit-exact.

use crate::env::EnvKind;
use crate::error::{BresaError, Result};
use crate::nn::{read_f64, read_u32, read_u64, read_u8, write_f64, write_u32, write_u64, write_u8};
use crate::replay::Transition;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"BRSADATA";
const VERSION: u32 = 1;

/// An offline dataset together with the dimensions it was collected under.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineDataset {
    pub env: EnvKind,
    pub state_dim: usize,
    pub action_dim: usize,
    pub transitions: Vec<Transition>,
}

impl OfflineDataset {
    pub fn new(env: EnvKind, state_dim: usize, action_dim: usize, transitions: Vec<Transition>) -> Self {
        OfflineDataset {
            env,
            state_dim,
            action_dim,
            transitions,
        }
    }

    pub fn violation_count(&self) -> usize {
        self.transitions.iter().filter(|t| t.constraint).count()
    }

    pub fn violation_ratio(&self) -> f64 {
        if self.transitions.is_empty() {
            0.0
        } else {
            self.violation_count() as f64 / self.transitions.len() as f64
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        write_u32(w, VERSION)?;
        write_u8(w, self.env.tag())?;
        write_u32(w, self.state_dim as u32)?;
        write_u32(w, self.action_dim as u32)?;
        write_u64(w, self.transitions.len() as u64)?;
        for t in &self.transitions {
            t.validate(self.state_dim, self.action_dim)
                .map_err(|e| BresaError::Dataset(format!("refusing to write malformed record: {e}")))?;
            for &v in t.state.iter().chain(&t.action).chain(&t.next_state) {
                write_f64(w, v)?;
            }
            write_f64(w, t.reward)?;
            write_u8(w, t.constraint as u8)?;
            write_u8(w, t.done as u8)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(BresaError::Dataset("not an offline dataset file".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(BresaError::Dataset(format!("unsupported dataset version {version}")));
        }
        let env = EnvKind::from_tag(read_u8(r)?)
            .ok_or_else(|| BresaError::Dataset("unknown environment id".into()))?;
        let state_dim = read_u32(r)? as usize;
        let action_dim = read_u32(r)? as usize;
        let count = read_u64(r)? as usize;
        let mut transitions = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let mut read_vec = |n: usize| -> Result<Vec<f64>> {
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(read_f64(r)?);
                }
                Ok(v)
            };
            let state = read_vec(state_dim)?;
            let action = read_vec(action_dim)?;
            let next_state = read_vec(state_dim)?;
            let reward = read_f64(r)?;
            let constraint = read_u8(r)? != 0;
            let done = read_u8(r)? != 0;
            transitions.push(Transition {
                state,
                action,
                next_state,
                reward,
                constraint,
                done,
            });
        }
        Ok(OfflineDataset {
            env,
            state_dim,
            action_dim,
            transitions,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }
}
