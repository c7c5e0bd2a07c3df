mod common;

use std::fs::OpenOptions;
use std::io::{Seek, SeekFrom, Write};

use attributor_core::store::{
    read_shard_header, shard_size, write_shard, GradientManifest, GradientStore, TestGradient, HEADER_LEN,
};
use attributor_core::Error;
use common::build_store;
use proptest::prelude::*;

fn example_strategy() -> impl Strategy<Value = (Vec<u32>, Vec<Vec<Vec<f32>>>)> {
    prop::collection::vec(1u32..6, 1..4).prop_flat_map(|dims| {
        let layer = dims
            .iter()
            .map(|&d| prop::collection::vec(any::<f32>(), d as usize))
            .collect::<Vec<_>>();
        (Just(dims), prop::collection::vec(layer, 1..8))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shard_round_trip_is_bitwise(
        (dims, examples) in example_strategy(),
        ckpt in any::<u32>(),
    ) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.gshd");
        write_shard(&path, ckpt, &dims, &examples).unwrap();
        let total: u64 = dims.iter().map(|&d| u64::from(d)).sum();
        prop_assert_eq!(
            std::fs::metadata(&path).unwrap().len(),
            shard_size(dims.len(), examples.len() as u64, total)
        );
        let header = read_shard_header(&path).unwrap();
        prop_assert_eq!(header.checkpoint_id, ckpt);
        prop_assert_eq!(&header.dims, &dims);

        let layers = dims
            .iter()
            .enumerate()
            .map(|(i, &dim)| attributor_core::store::LayerSpec { layer_id: i as u32, dim })
            .collect();
        let meta = attributor_core::store::CheckpointMeta {
            checkpoint_id: ckpt,
            epoch: 0,
            learning_rate: 0.1,
            shuffle_seed: 0,
            shard_path: "s.gshd".into(),
        };
        let manifest = GradientManifest::new(examples.len() as u32, layers, vec![meta]);
        let store = GradientStore::from_manifest(manifest, dir.path().to_path_buf()).unwrap();
        for (i, ex) in examples.iter().enumerate() {
            let got = store.read_example(ckpt, i).unwrap();
            for (g, w) in got.iter().zip(ex) {
                let gb: Vec<u32> = g.iter().map(|x| x.to_bits()).collect();
                let wb: Vec<u32> = w.iter().map(|x| x.to_bits()).collect();
                prop_assert_eq!(gb, wb);
            }
        }
        for layer in 0..dims.len() {
            let mut seen = 0;
            store.stream_layer(ckpt, layer, |i, g| {
                assert_eq!(g.len(), dims[layer] as usize);
                let want: Vec<u32> = examples[i][layer].iter().map(|x| x.to_bits()).collect();
                assert_eq!(g.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), want);
                seen += 1;
            }).unwrap();
            prop_assert_eq!(seen, examples.len());
        }
    }
}

#[test]
fn truncated_shard_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    let rs = build_store(dir.path(), 0, 4, &[3, 2], 1);
    drop(rs);
    let shard = dir.path().join("ckpt_0.gshd");
    let len = std::fs::metadata(&shard).unwrap().len();
    OpenOptions::new().write(true).open(&shard).unwrap().set_len(len - 4).unwrap();
    let err = GradientStore::open(&dir.path().join("manifest.json")).unwrap_err();
    assert!(matches!(err, Error::Corrupt { .. }), "{err}");
    assert_eq!(err.code(), "store_corrupt");
}

#[test]
fn bad_magic_is_corrupt() {
    let dir = tempfile::tempdir().unwrap();
    build_store(dir.path(), 0, 4, &[3], 1);
    let shard = dir.path().join("ckpt_0.gshd");
    let mut f = OpenOptions::new().write(true).open(&shard).unwrap();
    f.seek(SeekFrom::Start(0)).unwrap();
    f.write_all(b"XSHD").unwrap();
    drop(f);
    let err = GradientStore::open(&dir.path().join("manifest.json")).unwrap_err();
    assert!(matches!(err, Error::Corrupt { .. }), "{err}");
}

#[test]
fn header_length_is_twenty_bytes() {
    assert_eq!(HEADER_LEN, 20);
    assert_eq!(shard_size(2, 3, 6), 100);
}

#[test]
fn manifest_mismatch_is_inconsistent() {
    let dir = tempfile::tempdir().unwrap();
    build_store(dir.path(), 0, 4, &[3], 1);
    let path = dir.path().join("manifest.json");
    let mut manifest = GradientManifest::load(&path).unwrap();
    manifest.n_examples = 5;
    manifest.save(&path).unwrap();
    let err = GradientStore::open(&path).unwrap_err();
    assert!(matches!(err, Error::Consistency(_)), "{err}");
}

#[test]
fn missing_shard_is_not_found() {
    let dir = tempfile::tempdir().unwrap();
    build_store(dir.path(), 0, 4, &[3], 2);
    std::fs::remove_file(dir.path().join("ckpt_1.gshd")).unwrap();
    let err = GradientStore::open(&dir.path().join("manifest.json")).unwrap_err();
    assert_eq!(err.code(), "not_found");
}

#[test]
fn test_gradient_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.gshd");
    let tg = TestGradient::new(vec![vec![0.5, -1.25], vec![3.0]]);
    tg.write(&path, 7).unwrap();
    assert_eq!(TestGradient::read(&path, &[2, 1]).unwrap(), tg);
    assert!(matches!(TestGradient::read(&path, &[3]), Err(Error::Shape(_))));
}
