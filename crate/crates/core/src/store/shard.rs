use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"GSHD";
pub const SHARD_VERSION: u32 = 1;
/// Fixed header: magic, version, checkpoint_id, n_examples, n_layers.
pub const HEADER_LEN: u64 = 20;

/// Exact byte length of a shard with the given geometry.
pub fn shard_size(n_layers: usize, n_examples: u64, total_dim: u64) -> u64 {
    HEADER_LEN + 4 * n_layers as u64 + 4 * n_examples * total_dim
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardHeader {
    pub version: u32,
    pub checkpoint_id: u32,
    pub n_examples: u32,
    pub dims: Vec<u32>,
}

impl ShardHeader {
    pub fn total_dim(&self) -> u64 {
        self.dims.iter().map(|&d| u64::from(d)).sum()
    }

    /// Offset of the payload, i.e. the end of the dims table.
    pub fn payload_offset(&self) -> u64 {
        HEADER_LEN + 4 * self.dims.len() as u64
    }

    pub fn expected_size(&self) -> u64 {
        shard_size(self.dims.len(), u64::from(self.n_examples), self.total_dim())
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.payload_offset() as usize);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.checkpoint_id.to_le_bytes());
        out.extend_from_slice(&self.n_examples.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }
}

fn read_u32(reader: &mut impl Read) -> std::io::Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Read and validate a shard header, including the size law.
pub fn read_shard_header(path: &Path) -> Result<ShardHeader> {
    let mut file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::NotFound(format!("shard {}", path.display())),
        _ => Error::io(path, e),
    })?;
    let actual = file.metadata().map_err(|e| Error::io(path, e))?.len();
    let truncated = |_| Error::corrupt(path, "truncated header");

    let mut magic = [0u8; 4];
    file.read_exact(&mut magic).map_err(truncated)?;
    if magic != MAGIC {
        return Err(Error::corrupt(path, format!("bad magic {magic:02x?}")));
    }
    let version = read_u32(&mut file).map_err(truncated)?;
    if version != SHARD_VERSION {
        return Err(Error::corrupt(path, format!("unsupported version {version}")));
    }
    let checkpoint_id = read_u32(&mut file).map_err(truncated)?;
    let n_examples = read_u32(&mut file).map_err(truncated)?;
    let n_layers = read_u32(&mut file).map_err(truncated)?;
    if u64::from(n_layers) * 4 + HEADER_LEN > actual {
        return Err(Error::corrupt(path, "truncated dims table"));
    }
    let dims = (0..n_layers)
        .map(|_| read_u32(&mut file))
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(truncated)?;
    if dims.contains(&0) {
        return Err(Error::corrupt(path, "zero layer dim"));
    }
    let header = ShardHeader {
        version,
        checkpoint_id,
        n_examples,
        dims,
    };
    let expected = header.expected_size();
    if actual != expected {
        return Err(Error::corrupt(
            path,
            format!("size {actual} bytes, header implies {expected}"),
        ));
    }
    Ok(header)
}

/// Streaming shard writer. Examples are appended one at a time to a temp
/// sibling file which is renamed into place by [`ShardWriter::finish`].
pub struct ShardWriter {
    path: PathBuf,
    tmp_path: PathBuf,
    out: Option<BufWriter<File>>,
    dims: Vec<u32>,
    expected: u32,
    written: u32,
}

impl ShardWriter {
    pub fn create(path: &Path, checkpoint_id: u32, dims: &[u32], n_examples: u32) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Format("layer dims must be non-empty and positive".into()));
        }
        let file_name = path
            .file_name()
            .ok_or_else(|| Error::Format(format!("bad shard path {}", path.display())))?
            .to_string_lossy()
            .into_owned();
        let tmp_path = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
        let file = File::create(&tmp_path).map_err(|e| Error::io(&tmp_path, e))?;
        let mut out = BufWriter::with_capacity(1 << 16, file);
        let header = ShardHeader {
            version: SHARD_VERSION,
            checkpoint_id,
            n_examples,
            dims: dims.to_vec(),
        };
        out.write_all(&header.encode())
            .map_err(|e| Error::io(&tmp_path, e))?;
        Ok(ShardWriter {
            path: path.to_path_buf(),
            tmp_path,
            out: Some(out),
            dims: dims.to_vec(),
            expected: n_examples,
            written: 0,
        })
    }

    /// Append one example, given as one vector per layer.
    pub fn push_example<L: AsRef<[f32]>>(&mut self, layers: &[L]) -> Result<()> {
        if self.written == self.expected {
            return Err(Error::Format(format!(
                "shard already holds its {} examples",
                self.expected
            )));
        }
        if layers.len() != self.dims.len() {
            return Err(Error::Format(format!(
                "example {} has {} layers, expected {}",
                self.written,
                layers.len(),
                self.dims.len()
            )));
        }
        for (l, (layer, &dim)) in layers.iter().zip(&self.dims).enumerate() {
            if layer.as_ref().len() != dim as usize {
                return Err(Error::Format(format!(
                    "example {} layer {l} has {} values, expected {dim}",
                    self.written,
                    layer.as_ref().len()
                )));
            }
        }
        let out = self.out.as_mut().expect("writer open until finish");
        for layer in layers {
            for x in layer.as_ref() {
                out.write_all(&x.to_le_bytes())
                    .map_err(|e| Error::io(&self.tmp_path, e))?;
            }
        }
        self.written += 1;
        Ok(())
    }

    /// Flush, sync and atomically rename into place.
    pub fn finish(mut self) -> Result<PathBuf> {
        if self.written != self.expected {
            return Err(Error::Format(format!(
                "shard declared {} examples but {} were written",
                self.expected, self.written
            )));
        }
        let out = self.out.take().expect("writer open until finish");
        let file = out
            .into_inner()
            .map_err(|e| Error::io(&self.tmp_path, e.into_error()))?;
        file.sync_all().map_err(|e| Error::io(&self.tmp_path, e))?;
        drop(file);
        std::fs::rename(&self.tmp_path, &self.path).map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path.clone())
    }
}

impl Drop for ShardWriter {
    fn drop(&mut self) {
        if self.out.take().is_some() {
            let _ = std::fs::remove_file(&self.tmp_path);
        }
    }
}

/// Write a complete shard in one call. `examples[i][l]` is layer `l` of example `i`.
pub fn write_shard<L: AsRef<[f32]>>(
    path: &Path,
    checkpoint_id: u32,
    dims: &[u32],
    examples: &[Vec<L>],
) -> Result<PathBuf> {
    let n = u32::try_from(examples.len())
        .map_err(|_| Error::Format("too many examples for one shard".into()))?;
    let mut writer = ShardWriter::create(path, checkpoint_id, dims, n)?;
    for example in examples {
        writer.push_example(example)?;
    }
    writer.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_example_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.gshd");
        write_shard(&path, 7, &[2], &[vec![vec![1.0f32, -2.0]]]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 24 + 8);
        assert_eq!(&bytes[..4], b"GSHD");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &7u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &1u32.to_le_bytes());
        assert_eq!(&bytes[20..24], &2u32.to_le_bytes());
        assert_eq!(&bytes[24..], &[0x00, 0x00, 0x80, 0x3F, 0x00, 0x00, 0x00, 0xC0]);
    }

    #[test]
    fn size_law_two_layers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.gshd");
        let ex = vec![vec![0.5f32; 4], vec![0.25f32; 2]];
        write_shard(&path, 0, &[4, 2], &[ex.clone(), ex.clone(), ex]).unwrap();
        let len = std::fs::metadata(&path).unwrap().len();
        assert_eq!(len, 20 + 8 + 3 * 6 * 4);
        assert_eq!(len, shard_size(2, 3, 6));
        let header = read_shard_header(&path).unwrap();
        assert_eq!(header.dims, vec![4, 2]);
        assert_eq!(header.n_examples, 3);
    }

    #[test]
    fn dimension_mismatch_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.gshd");
        let err = write_shard(&path, 0, &[3], &[vec![vec![1.0f32, 2.0]]]).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
        assert!(!path.exists());
        // no temp file left behind
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn short_write_is_rejected_on_finish() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.gshd");
        let mut w = ShardWriter::create(&path, 0, &[1], 2).unwrap();
        w.push_example(&[[1.0f32]]).unwrap();
        assert!(w.finish().is_err());
        assert!(!path.exists());
    }

    #[test]
    fn truncation_and_magic_are_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.gshd");
        write_shard(&path, 0, &[2], &[vec![vec![1.0f32, 2.0]]]).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
        assert!(matches!(read_shard_header(&path), Err(Error::Corrupt { .. })));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&path, &bad).unwrap();
        let err = read_shard_header(&path).unwrap_err();
        assert!(matches!(err, Error::Corrupt { ref shard, .. } if shard == &path));

        std::fs::write(&path, &bytes[..10]).unwrap();
        assert!(matches!(read_shard_header(&path), Err(Error::Corrupt { .. })));
    }
}
