use std::fs;
use std::path::Path;

use cplx_core::ingest::{load_bundle, write_bundle, MANIFEST_FILE};
use cplx_core::{generate_pool, PoolConfig, PredictionBundle};
use proptest::prelude::*;
use serde_json::Value;

fn fixture() -> PredictionBundle {
    generate_pool(&PoolConfig { items: 6, models: 2, checkpoints: vec![2], layers: vec![3], seed: 9, ..Default::default() }).unwrap()
}

fn edit_manifest(dir: &Path, f: impl FnOnce(&mut Value)) {
    let path = dir.join(MANIFEST_FILE);
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    f(&mut v);
    fs::write(path, serde_json::to_string(&v).unwrap()).unwrap();
}

fn code(dir: &Path) -> &'static str {
    load_bundle(dir).map(|_| "ok").unwrap_or_else(|e| e.code())
}

#[test]
fn round_trip_preserves_content() {
    let bundle = fixture();
    let dir = tempfile::tempdir().unwrap();
    write_bundle(&bundle, dir.path()).unwrap();
    let back = load_bundle(dir.path()).unwrap();
    assert_eq!(back, bundle);
    assert_eq!(back.content_hash(), bundle.content_hash());
}

#[test]
fn manifest_level_mutations() {
    let bundle = fixture();
    type Mutation = Box<dyn Fn(&mut Value)>;
    let cases: Vec<(&str, Mutation)> = vec![
        ("invalid_manifest", Box::new(|v| v["k"] = 7.into())),
        ("invalid_manifest", Box::new(|v| v["format_version"] = 2.into())),
        ("duplicate_id", Box::new(|v| v["items"][1]["item_id"] = v["items"][0]["item_id"].clone())),
        ("duplicate_id", Box::new(|v| v["models"][1]["model_id"] = v["models"][0]["model_id"].clone())),
        ("manifest_parse", Box::new(|v| v["items"] = "nope".into())),
        ("shape_mismatch", Box::new(|v| v["models"][0]["layer_tensor"]["shape"][0] = 4.into())),
    ];
    for (expected, mutate) in cases {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&bundle, dir.path()).unwrap();
        edit_manifest(dir.path(), mutate);
        assert_eq!(code(dir.path()), expected);
    }
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(dir.path()), "manifest_missing");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn truncation_is_a_shape_mismatch(model in 0usize..2, layers in any::<bool>(), cut in 1usize..40) {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&fixture(), dir.path()).unwrap();
        let path = dir.path().join(if layers { "layers" } else { "ckpt" }).join(format!("model{model:02}.f32"));
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - cut]).unwrap();
        prop_assert_eq!(code(dir.path()), "shape_mismatch");
    }

    #[test]
    fn corrupted_probability_is_rejected(model in 0usize..2, offset in 0usize..36, value in prop_oneof![Just(-0.5f32), Just(1.5f32), Just(f32::NAN)]) {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&fixture(), dir.path()).unwrap();
        let path = dir.path().join("ckpt").join(format!("model{model:02}.f32"));
        let mut bytes = fs::read(&path).unwrap();
        bytes[offset * 4..offset * 4 + 4].copy_from_slice(&value.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        prop_assert_eq!(code(dir.path()), "probability_invalid");
    }

    #[test]
    fn final_slices_must_agree(model in 0usize..2, item in 0usize..6) {
        let dir = tempfile::tempdir().unwrap();
        write_bundle(&fixture(), dir.path()).unwrap();
        // Swap two classes in the last layer row: still a distribution, but no longer the final checkpoint.
        let path = dir.path().join("layers").join(format!("model{model:02}.f32"));
        let mut data: Vec<f32> = fs::read(&path).unwrap().chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        let start = (2 * 6 + item) * 3;
        data.swap(start, start + 1);
        if (data[start] - data[start + 1]).abs() > 1e-3 {
            let bytes: Vec<u8> = data.iter().flat_map(|x| x.to_le_bytes()).collect();
            fs::write(&path, bytes).unwrap();
            prop_assert_eq!(code(dir.path()), "final_slice_mismatch");
        }
    }
}
