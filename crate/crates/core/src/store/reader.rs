use std::fs::File;
use std::io::{BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};

use super::manifest::GradientManifest;
use super::shard::{read_shard_header, ShardHeader, ShardWriter};
use crate::error::{Error, Result};

const READ_BUFFER: usize = 256 * 1024;

/// Read-only handle over a validated manifest and its shards.
///
/// Opening checks every shard header against the manifest and the size law;
/// no payload is read until a stream is requested. Handles are `Sync` and
/// each stream opens its own file descriptor.
#[derive(Debug, Clone)]
pub struct GradientStore {
    manifest: GradientManifest,
    root: PathBuf,
    shards: Vec<PathBuf>,
    /// Float offset of each layer inside one example's record.
    layer_offsets: Vec<u64>,
}

impl GradientStore {
    pub fn open(manifest_path: &Path) -> Result<Self> {
        let manifest = GradientManifest::load(manifest_path)?;
        let root = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Self::from_manifest(manifest, root)
    }

    pub fn from_manifest(manifest: GradientManifest, root: PathBuf) -> Result<Self> {
        manifest.validate()?;
        if manifest.checkpoints.is_empty() {
            return Err(Error::Precondition("manifest lists no checkpoints".into()));
        }
        let dims = manifest.dims();
        let mut shards = Vec::with_capacity(manifest.checkpoints.len());
        for ckpt in &manifest.checkpoints {
            let path = root.join(&ckpt.shard_path);
            let header = read_shard_header(&path)?;
            check_header(&path, &header, ckpt.checkpoint_id, manifest.n_examples, &dims)?;
            shards.push(path);
        }
        let mut layer_offsets = Vec::with_capacity(dims.len());
        let mut acc = 0u64;
        for d in &dims {
            layer_offsets.push(acc);
            acc += u64::from(*d);
        }
        Ok(GradientStore {
            manifest,
            root,
            shards,
            layer_offsets,
        })
    }

    pub fn manifest(&self) -> &GradientManifest {
        &self.manifest
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn n_examples(&self) -> usize {
        self.manifest.n_examples as usize
    }

    pub fn n_layers(&self) -> usize {
        self.manifest.layers.len()
    }

    pub fn layer_dim(&self, layer_id: usize) -> Result<usize> {
        self.manifest
            .layers
            .get(layer_id)
            .map(|l| l.dim as usize)
            .ok_or_else(|| Error::Range(format!("unknown layer {layer_id}")))
    }

    pub fn checkpoint_ids(&self) -> Vec<u32> {
        self.manifest.checkpoint_ids()
    }

    pub fn shard_path(&self, checkpoint_id: u32) -> Result<&Path> {
        let idx = self.checkpoint_index(checkpoint_id)?;
        Ok(&self.shards[idx])
    }

    fn checkpoint_index(&self, checkpoint_id: u32) -> Result<usize> {
        self.manifest
            .checkpoints
            .iter()
            .position(|c| c.checkpoint_id == checkpoint_id)
            .ok_or_else(|| Error::Range(format!("unknown checkpoint {checkpoint_id}")))
    }

    /// Visit every example's vector for one layer, in ascending example id.
    ///
    /// Memory use is one read buffer plus one vector of the layer's dim.
    pub fn stream_layer<F>(&self, checkpoint_id: u32, layer_id: usize, mut visitor: F) -> Result<()>
    where
        F: FnMut(usize, &[f32]),
    {
        let path = self.shard_path(checkpoint_id)?;
        let dim = self.layer_dim(layer_id)?;
        let total = self.manifest.total_dim();
        let n = self.n_examples();
        let payload = super::shard::HEADER_LEN + 4 * self.n_layers() as u64;
        let skip = 4 * (total - dim as u64) as i64;

        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::with_capacity(READ_BUFFER, file);
        reader
            .seek(SeekFrom::Start(payload + 4 * self.layer_offsets[layer_id]))
            .map_err(|e| Error::io(path, e))?;

        let mut bytes = vec![0u8; 4 * dim];
        let mut values = vec![0f32; dim];
        for example_id in 0..n {
            reader
                .read_exact(&mut bytes)
                .map_err(|_| Error::corrupt(path, "payload shorter than header implies"))?;
            decode_into(&bytes, &mut values);
            visitor(example_id, &values);
            if skip > 0 && example_id + 1 < n {
                reader.seek_relative(skip).map_err(|e| Error::io(path, e))?;
            }
        }
        Ok(())
    }

    /// Random access to one example's layers.
    pub fn read_example(&self, checkpoint_id: u32, example_id: usize) -> Result<Vec<Vec<f32>>> {
        if example_id >= self.n_examples() {
            return Err(Error::Range(format!(
                "example {example_id} out of range (n = {})",
                self.n_examples()
            )));
        }
        let path = self.shard_path(checkpoint_id)?;
        let total = self.manifest.total_dim();
        let payload = super::shard::HEADER_LEN + 4 * self.n_layers() as u64;
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        file.seek(SeekFrom::Start(payload + 4 * total * example_id as u64))
            .map_err(|e| Error::io(path, e))?;
        let mut out = Vec::with_capacity(self.n_layers());
        for layer in &self.manifest.layers {
            let mut bytes = vec![0u8; 4 * layer.dim as usize];
            file.read_exact(&mut bytes)
                .map_err(|_| Error::corrupt(path, "payload shorter than header implies"))?;
            let mut values = vec![0f32; layer.dim as usize];
            decode_into(&bytes, &mut values);
            out.push(values);
        }
        Ok(out)
    }
}

fn check_header(
    path: &Path,
    header: &ShardHeader,
    checkpoint_id: u32,
    n_examples: u32,
    dims: &[u32],
) -> Result<()> {
    if header.checkpoint_id != checkpoint_id {
        return Err(Error::Consistency(format!(
            "{} holds checkpoint {}, manifest expects {checkpoint_id}",
            path.display(),
            header.checkpoint_id
        )));
    }
    if header.n_examples != n_examples {
        return Err(Error::Consistency(format!(
            "{} holds {} examples, manifest says {n_examples}",
            path.display(),
            header.n_examples
        )));
    }
    if header.dims != dims {
        return Err(Error::Consistency(format!(
            "{} has layer dims {:?}, manifest says {dims:?}",
            path.display(),
            header.dims
        )));
    }
    Ok(())
}

fn decode_into(bytes: &[u8], out: &mut [f32]) {
    for (chunk, slot) in bytes.chunks_exact(4).zip(out.iter_mut()) {
        *slot = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
    }
}

/// Gradient of the test loss, one vector per layer, upcast to binary64.
#[derive(Debug, Clone, PartialEq)]
pub struct TestGradient {
    pub layers: Vec<Vec<f64>>,
}

impl TestGradient {
    pub fn new(layers: Vec<Vec<f64>>) -> Self {
        TestGradient { layers }
    }

    pub fn zeros(dims: &[u32]) -> Self {
        TestGradient {
            layers: dims.iter().map(|&d| vec![0.0; d as usize]).collect(),
        }
    }

    /// Read a single-example shard and check its dims against `dims`.
    pub fn read(path: &Path, dims: &[u32]) -> Result<Self> {
        let header = read_shard_header(path)?;
        if header.n_examples != 1 {
            return Err(Error::Consistency(format!(
                "test gradient {} holds {} examples, expected 1",
                path.display(),
                header.n_examples
            )));
        }
        if header.dims != dims {
            return Err(Error::Shape(format!(
                "test gradient dims {:?} do not match manifest {dims:?}",
                header.dims
            )));
        }
        let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
        file.seek(SeekFrom::Start(header.payload_offset()))
            .map_err(|e| Error::io(path, e))?;
        let mut layers = Vec::with_capacity(dims.len());
        for &dim in dims {
            let mut bytes = vec![0u8; 4 * dim as usize];
            file.read_exact(&mut bytes)
                .map_err(|_| Error::corrupt(path, "payload shorter than header implies"))?;
            let mut values = vec![0f32; dim as usize];
            decode_into(&bytes, &mut values);
            layers.push(values.into_iter().map(f64::from).collect());
        }
        Ok(TestGradient { layers })
    }

    /// Write as a single-example shard (values narrowed to binary32).
    pub fn write(&self, path: &Path, checkpoint_id: u32) -> Result<PathBuf> {
        let dims: Vec<u32> = self.layers.iter().map(|l| l.len() as u32).collect();
        let narrowed: Vec<Vec<f32>> = self
            .layers
            .iter()
            .map(|l| l.iter().map(|&x| x as f32).collect())
            .collect();
        let mut writer = ShardWriter::create(path, checkpoint_id, &dims, 1)?;
        writer.push_example(&narrowed)?;
        writer.finish()
    }

    pub fn dims(&self) -> Vec<u32> {
        self.layers.iter().map(|l| l.len() as u32).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        TestGradient {
            layers: self
                .layers
                .iter()
                .map(|l| l.iter().map(|x| x * factor).collect())
                .collect(),
        }
    }
}
