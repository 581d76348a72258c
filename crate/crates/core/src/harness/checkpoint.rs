use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GrlError, Result};
use crate::evolution::{CandidateLearngene, GeneBank, GeneId, GenePool, GeneTree};
use crate::policy::{LayerParams, LearngeneForm, LearngenePayload};

pub const FORMAT_VERSION: u32 = 1;

/// Complete evolutionary state at a generation boundary. Random streams are
/// derived from the master seed and generation index, so no generator state
/// needs storing beyond those two numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    /// Last completed generation.
    pub generation: u32,
    pub config_hash: String,
    pub master_seed: u64,
    pub bank: GeneBank,
}

#[derive(Serialize, Deserialize)]
struct LayerRef {
    fan_in: usize,
    fan_out: usize,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct ResidentDoc {
    id: GeneId,
    form: LearngeneForm,
    score: f64,
    birth_generation: u32,
    layers: Vec<LayerRef>,
}

#[derive(Serialize, Deserialize)]
struct Body {
    format_version: u32,
    generation: u32,
    config_hash: String,
    master_seed: u64,
    next_gene_id: GeneId,
    capacity: usize,
    forms: Vec<LearngeneForm>,
    residents: Vec<ResidentDoc>,
    tree: GeneTree,
    blob_file: String,
    blob_values: usize,
}

#[derive(Serialize, Deserialize)]
struct Document {
    body: Body,
    /// sha256 over the blob bytes followed by the compact body JSON.
    checksum: String,
}

fn checksum(blob: &[u8], body: &Body) -> Result<String> {
    let mut h = Sha256::new();
    h.update(blob);
    h.update(serde_json::to_vec(body)?);
    Ok(hex::encode(h.finalize()))
}

pub fn checkpoint_name(generation: u32) -> String {
    format!("gen_{generation:04}")
}

impl Checkpoint {
    fn encode(&self, blob_file: &str) -> Result<(Vec<u8>, Vec<u8>)> {
        let mut values: Vec<f64> = Vec::new();
        let residents = self
            .bank
            .pool
            .iter()
            .map(|c| ResidentDoc {
                id: c.id,
                form: c.form().clone(),
                score: c.score,
                birth_generation: c.birth_generation,
                layers: c
                    .payload
                    .layers
                    .iter()
                    .map(|l| {
                        let offset = values.len();
                        values.extend(l.values());
                        LayerRef {
                            fan_in: l.fan_in,
                            fan_out: l.fan_out,
                            offset,
                        }
                    })
                    .collect(),
            })
            .collect();
        let blob: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let body = Body {
            format_version: FORMAT_VERSION,
            generation: self.generation,
            config_hash: self.config_hash.clone(),
            master_seed: self.master_seed,
            next_gene_id: self.bank.next_gene_id,
            capacity: self.bank.pool.capacity(),
            forms: self.bank.pool.forms().cloned().collect(),
            residents,
            tree: self.bank.tree.clone(),
            blob_file: blob_file.to_string(),
            blob_values: values.len(),
        };
        let checksum = checksum(&blob, &body)?;
        let mut json = serde_json::to_vec_pretty(&Document { body, checksum })?;
        json.push(b'\n');
        Ok((json, blob))
    }

    /// Writes `gen_NNNN.json` and `gen_NNNN.bin` into `dir` and returns the
    /// JSON path.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| GrlError::io(dir, e))?;
        let name = checkpoint_name(self.generation);
        let (json, blob) = self.encode(&format!("{name}.bin"))?;
        let json_path = dir.join(format!("{name}.json"));
        let blob_path = dir.join(format!("{name}.bin"));
        write_atomic(&blob_path, &blob)?;
        write_atomic(&json_path, &json)?;
        Ok(json_path)
    }

    /// Hex sha256 identifying the checkpoint contents.
    pub fn digest(&self) -> Result<String> {
        let (json, blob) = self.encode(&checkpoint_name(self.generation))?;
        let mut h = Sha256::new();
        h.update(&json);
        h.update(&blob);
        Ok(hex::encode(h.finalize()))
    }

    /// Loads and verifies a checkpoint. With `expected_hash`, a checkpoint
    /// written under a different configuration is rejected.
    pub fn load(path: &Path, expected_hash: Option<&str>) -> Result<Self> {
        let corrupt = |reason: String| GrlError::CheckpointCorrupt {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => GrlError::MissingCheckpoint(path.display().to_string()),
            _ => GrlError::io(path, e),
        })?;
        let doc: Document = serde_json::from_slice(&text).map_err(|e| corrupt(format!("unreadable JSON: {e}")))?;
        let body = doc.body;
        if body.format_version != FORMAT_VERSION {
            return Err(GrlError::CheckpointVersion(format!(
                "{} has format version {}, expected {FORMAT_VERSION}",
                path.display(),
                body.format_version
            )));
        }
        let blob_path = path.with_file_name(&body.blob_file);
        let blob = fs::read(&blob_path).map_err(|e| GrlError::io(&blob_path, e))?;
        if checksum(&blob, &body)? != doc.checksum {
            return Err(corrupt("checksum mismatch".into()));
        }
        if let Some(expected) = expected_hash {
            if body.config_hash != expected {
                return Err(GrlError::CheckpointVersion(format!(
                    "{} was written with config {}, current config is {expected}",
                    path.display(),
                    body.config_hash
                )));
            }
        }
        if blob.len() != body.blob_values * 8 {
            return Err(corrupt("blob length does not match body".into()));
        }
        let values: Vec<f64> = blob
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();

        let mut pool = GenePool::new(body.forms, body.capacity);
        for r in body.residents {
            let layers = r
                .layers
                .iter()
                .map(|l| {
                    let n = l.fan_in * l.fan_out;
                    let end = l.offset + n + l.fan_out;
                    let slice = values
                        .get(l.offset..end)
                        .ok_or_else(|| corrupt("layer outside blob".into()))?;
                    Ok(LayerParams {
                        fan_in: l.fan_in,
                        fan_out: l.fan_out,
                        weights: slice[..n].to_vec(),
                        bias: slice[n..].to_vec(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            pool.insert(CandidateLearngene {
                id: r.id,
                payload: LearngenePayload { form: r.form, layers },
                score: r.score,
                birth_generation: r.birth_generation,
            })
            .map_err(|e| corrupt(e.to_string()))?;
        }
        Ok(Checkpoint {
            generation: body.generation,
            config_hash: body.config_hash,
            master_seed: body.master_seed,
            bank: GeneBank {
                pool,
                tree: body.tree,
                next_gene_id: body.next_gene_id,
            },
        })
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| GrlError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| GrlError::io(path, e))
}

/// Checkpoint JSON files in `dir`, ordered by generation.
pub fn list_checkpoints(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    if !dir.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| GrlError::io(dir, e))? {
        let path = entry.map_err(|e| GrlError::io(dir, e))?.path();
        let gen = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("gen_"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<u32>().ok());
        if let Some(g) = gen {
            out.push((g, path));
        }
    }
    out.sort();
    Ok(out)
}
