use std::fs;
use std::path::Path;

use signrec::cli::{run, run_gradcheck_with, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};
use signrec::dataio;
use signrec::nn::{self, ForwardTrace, ModelParams};
use signrec::skeleton::{GestureSequence, HandMode, JointId, SkeletonFrame, Vec3, NUM_JOINTS};
use signrec::NnError;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("signrec").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn generate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["generate", "--out", s(dir)];
    args.extend_from_slice(extra);
    let (code, _, err) = call(&args);
    assert_eq!(code, EXIT_OK, "{err}");
}

const TINY: [&str; 8] = ["--classes", "2", "--signers", "2", "--reps", "3", "--frames", "12"];

#[test]
fn generate_defaults_writes_2700() {
    let tmp = tempfile::tempdir().unwrap();
    let (code, out, _) = call(&["generate", "--out", s(tmp.path())]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "2700 sequences written");
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 2701);
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    generate(&a, &TINY);
    generate(&b, &TINY);
    assert_eq!(dir_contents(&a), dir_contents(&b));
}

#[test]
fn normalize_is_idempotent_on_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let (raw, n1, n2) = (tmp.path().join("raw"), tmp.path().join("n1"), tmp.path().join("n2"));
    generate(&raw, &TINY);
    let (code, out, _) = call(&["normalize", "--in", s(&raw), "--out", s(&n1)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "12 sequences normalized, 0 degenerate frames");
    assert_eq!(call(&["normalize", "--in", s(&n1), "--out", s(&n2)]).0, EXIT_OK);
    assert_eq!(dir_contents(&n1), dir_contents(&n2));

    for seq in dataio::read_dataset(&n1).unwrap() {
        for f in seq.frames() {
            let c = f.joint(JointId::Spine);
            assert_eq!((c.x, c.y, c.z), (0.0, 0.0, 0.0));
        }
    }
}

#[test]
fn normalize_strict_rejects_horizontal_body_plane() {
    let tmp = tempfile::tempdir().unwrap();
    let mut joints = [Vec3::ZERO; NUM_JOINTS];
    // Shoulders level with and in front of the spine: the body plane is
    // horizontal, so its normal is vertical.
    joints[JointId::ShoulderLeft.index()] = Vec3 { x: -0.2, y: 0.0, z: 0.3 };
    joints[JointId::ShoulderRight.index()] = Vec3 { x: 0.2, y: 0.0, z: 0.3 };
    let frame = SkeletonFrame::new(joints).unwrap();
    let seq = GestureSequence::new(vec![frame; 3], 0, "flat", 0, 0, HandMode::Single, 0.0).unwrap();
    let input = tmp.path().join("in");
    dataio::write_dataset(&[seq], &input).unwrap();

    let out = tmp.path().join("out");
    let (code, _, err) = call(&["normalize", "--in", s(&input), "--out", s(&out), "--strict"]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("frame 0"), "{err}");

    let (code, stdout, _) = call(&["normalize", "--in", s(&input), "--out", s(&out)]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.contains("3 degenerate frames"), "{stdout}");
}

#[test]
fn train_overfits_tiny_dataset_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, &TINY);
    let train = |out: &Path| {
        call(&[
            "train", "--data", s(&data), "--out", s(out), "--epochs", "50", "--hidden", "16", "--seed", "3",
        ])
    };
    let (m1, m2) = (tmp.path().join("m1.txt"), tmp.path().join("m2.txt"));
    let (code, out, err) = train(&m1);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 50);
    assert!(lines[0].starts_with("epoch 1 loss "), "{}", lines[0]);
    assert_eq!(train(&m2).0, EXIT_OK);
    assert_eq!(fs::read(&m1).unwrap(), fs::read(&m2).unwrap());

    let (code, out, _) = call(&["eval", "--data", s(&data), "--model", s(&m1), "--confusion"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("accuracy 1.0000\n"), "{out}");
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn hand_filter_sets_class_count() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, &["--signers", "2", "--reps", "3", "--frames", "4"]);
    let model = tmp.path().join("m.txt");
    let (code, _, err) = call(&[
        "train", "--data", s(&data), "--out", s(&model), "--epochs", "1", "--hidden", "4", "--layers", "1",
        "--hand", "single",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(dataio::read_model(&model).unwrap().num_classes(), 16);

    // The single-hand model cannot score the double-hand subset.
    let (code, _, err) = call(&["eval", "--data", s(&data), "--model", s(&model), "--hand", "double"]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("16 classes"), "{err}");
}

#[test]
fn loocv_prints_one_row_per_signer() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, &["--classes", "2", "--signers", "3", "--reps", "3", "--frames", "6"]);
    let args = ["loocv", "--data", s(&data), "--epochs", "2", "--hidden", "4", "--layers", "1"];
    let (code, out, err) = call(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 3 + 1, "{out}");
    assert!(lines[5].trim_start().starts_with("mean"));
    assert_eq!(err.lines().filter(|l| l.starts_with("fold")).count(), 3);

    let mut jobs = args.to_vec();
    jobs.extend(["--jobs", "1"]);
    assert_eq!(call(&jobs).1, out);
}

#[test]
fn loocv_needs_two_signers() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    generate(&data, &["--classes", "2", "--signers", "1", "--reps", "3", "--frames", "4"]);
    let (code, _, err) = call(&["loocv", "--data", s(&data)]);
    assert_eq!(code, EXIT_FAILURE);
    assert!(err.contains("signers"), "{err}");
}

#[test]
fn missing_inputs_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let nowhere = tmp.path().join("nope");
    assert_eq!(call(&["eval", "--data", s(&nowhere), "--model", s(&nowhere)]).0, EXIT_FAILURE);
    assert_eq!(call(&["train", "--data", s(&nowhere), "--out", s(&nowhere)]).0, EXIT_FAILURE);
    assert_eq!(call(&["train", "--data", s(&nowhere)]).0, EXIT_USAGE);
}

fn corrupted_backward(m: &ModelParams, t: &ForwardTrace, d: &[f64]) -> Result<ModelParams, NnError> {
    let mut g = nn::backward(m, t, d)?;
    g.w_out.as_mut_slice()[0] *= 1.5;
    Ok(g)
}

#[test]
fn gradcheck_flags_corrupted_backward() {
    let mut out = Vec::new();
    let err = run_gradcheck_with(0, corrupted_backward, &mut out).unwrap_err();
    assert!(err.to_string().contains("W_out[0,0]"), "{err}");

    let (a, b) = (call(&["gradcheck", "--seed", "4"]), call(&["gradcheck", "--seed", "4"]));
    assert_eq!(a.0, EXIT_OK);
    assert_eq!(a.1, b.1);
}
