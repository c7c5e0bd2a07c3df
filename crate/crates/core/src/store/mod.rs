//! On-disk gradient cache.
//!
//! A store is a JSON manifest plus one binary shard per checkpoint. Shards are
//! example-major: every layer of example 0, then every layer of example 1, and
//! so on, as little-endian binary32. Readers stream one layer at a time with a
//! fixed stride, holding a single vector in memory.

mod manifest;
mod reader;
mod shard;

pub use manifest::{CheckpointMeta, GradientManifest, LayerSpec, MANIFEST_VERSION};
pub use reader::{GradientStore, TestGradient};
pub use shard::{
    read_shard_header, shard_size, write_shard, ShardHeader, ShardWriter, HEADER_LEN, MAGIC,
    SHARD_VERSION,
};
