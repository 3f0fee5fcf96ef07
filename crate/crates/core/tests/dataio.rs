use proptest::prelude::*;

use signrec::dataio;
use signrec::nn::{init_params, ModelParams};
use signrec::skeleton::{flatten_frame, GestureSequence, HandMode, SkeletonFrame, FEATURE_WIDTH};

fn finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |v| v.is_finite())
}

prop_compose! {
    fn arb_sequence(id: u32)(
        frames in prop::collection::vec(prop::collection::vec(finite(), FEATURE_WIDTH), 1..4),
        class_name in "[a-z][a-z0-9_ ]{0,8}",
        double in any::<bool>(),
        rotation in finite(),
    ) -> GestureSequence {
        let frames = frames.iter().map(|f| SkeletonFrame::from_flat(f).unwrap()).collect();
        let mode = if double { HandMode::Double } else { HandMode::Single };
        GestureSequence::new(frames, id % 3, class_name, id / 3, id, mode, rotation).unwrap()
    }
}

fn bits(seq: &GestureSequence) -> (u32, String, u32, u32, HandMode, u64, Vec<u64>) {
    let coords = seq.frames().iter().flat_map(|f| flatten_frame(f).map(f64::to_bits)).collect();
    (
        seq.class_id,
        seq.class_name.clone(),
        seq.signer_id,
        seq.repetition,
        seq.hand_mode,
        seq.rotation_deg.to_bits(),
        coords,
    )
}

fn model_bits(m: &ModelParams) -> Vec<(String, usize, usize, Vec<u64>)> {
    m.tensors()
        .iter()
        .map(|t| (t.name.clone(), t.rows, t.cols, t.data.iter().map(|v| v.to_bits()).collect()))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn dataset_round_trip_is_bitwise(a in arb_sequence(0), b in arb_sequence(1), c in arb_sequence(5)) {
        let tmp = tempfile::tempdir().unwrap();
        let data = vec![a, b, c];
        dataio::write_dataset(&data, tmp.path()).unwrap();
        let back = dataio::read_dataset(tmp.path()).unwrap();
        prop_assert_eq!(data.iter().map(bits).collect::<Vec<_>>(), back.iter().map(bits).collect::<Vec<_>>());
    }

    #[test]
    fn model_round_trip_is_bitwise(
        seed in any::<u64>(),
        layers in 1usize..4,
        hidden in 1usize..6,
        extreme in prop::collection::vec(finite(), 4),
    ) {
        let mut m = init_params(3, 2, hidden, layers, seed).unwrap();
        // Include values far from the initializer's range: subnormals, -0.0, huge.
        m.b_out[..3].copy_from_slice(&extreme[..3]);
        m.w_out.as_mut_slice()[0] = extreme[3];
        let text = dataio::model_to_string(&m);
        let back = dataio::parse_model(&text, std::path::Path::new("model.txt")).unwrap();
        prop_assert_eq!(model_bits(&m), model_bits(&back));
    }
}

#[test]
fn special_values_round_trip() {
    for v in [0.0, -0.0, f64::MIN_POSITIVE, 5e-324, -5e-324, f64::MAX, f64::MIN, 1.0 / 3.0] {
        let s = dataio::format_hex_f64(v);
        assert_eq!(dataio::parse_hex_f64(&s).map(f64::to_bits), Some(v.to_bits()), "{s}");
    }
}

#[test]
fn model_file_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("m.txt");
    let m = init_params(4, 60, 8, 2, 11).unwrap();
    dataio::write_model(&m, &path).unwrap();
    assert_eq!(model_bits(&dataio::read_model(&path).unwrap()), model_bits(&m));
}

#[test]
fn unwritable_target_is_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    std::fs::write(&file, "x").unwrap();
    let m = init_params(2, 1, 1, 1, 0).unwrap();
    let err = dataio::write_model(&m, &file.join("m.txt")).unwrap_err();
    assert!(matches!(err, signrec::DataError::Io { .. }));
    assert!(err.to_string().contains("plain"));
}
