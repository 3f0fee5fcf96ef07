//! Text formats for datasets and trained models.
//!
//! Floating-point values that must survive a round trip bit for bit are
//! written as hexadecimal float literals (`-0x1.8p-3`).
//!
//! Dataset directory:
//!
//! ```text
//! manifest.tsv      path  class_id  class_name  signer_id  repetition  hand_mode  rotation_deg
//! g_<class>_<signer>_<rep>.csv
//!                   frame,j00x,j00y,j00z,...,j19x,j19y,j19z
//! ```
//!
//! Model file:
//!
//! ```text
//! SLRMODEL 1
//! layers=<n> input=<i> hidden=<h> classes=<k>
//! <name> <rows> <cols>
//! <row-major values, one matrix row per line>
//! ...
//! ```

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::DataError;
use crate::nn::ModelParams;
use crate::skeleton::{GestureSequence, HandMode, SkeletonFrame, FEATURE_WIDTH, NUM_JOINTS};

pub const MANIFEST_FILE: &str = "manifest.tsv";
pub const MODEL_MAGIC: &str = "SLRMODEL";
pub const MODEL_VERSION: u32 = 1;

const MANIFEST_COLUMNS: [&str; 7] = [
    "path",
    "class_id",
    "class_name",
    "signer_id",
    "repetition",
    "hand_mode",
    "rotation_deg",
];

/// Formats a finite `f64` as a C99-style hexadecimal float literal. The
/// mantissa is written in full precision with trailing zeros trimmed.
pub fn format_hex_f64(v: f64) -> String {
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & ((1u64 << 52) - 1);
    if exp_bits == 0x7ff {
        return if mantissa == 0 {
            format!("{sign}inf")
        } else {
            "nan".to_string()
        };
    }
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let digits = format!("{mantissa:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{exp:+}")
    }
}

/// Parses a hexadecimal float literal. Inexact or non-finite values are
/// rejected.
pub fn parse_hex_f64(s: &str) -> Option<f64> {
    hexf_parse::parse_hexf64(s, false)
        .ok()
        .filter(|v| v.is_finite())
}

fn gesture_file_name(seq: &GestureSequence) -> String {
    format!("g_{}_{}_{}.csv", seq.class_id, seq.signer_id, seq.repetition)
}

fn gesture_header() -> String {
    let mut h = String::from("frame");
    for j in 0..NUM_JOINTS {
        for axis in ["x", "y", "z"] {
            let _ = write!(h, ",j{j:02}{axis}");
        }
    }
    h
}

fn write_file(path: &Path, contents: &str) -> Result<(), DataError> {
    fs::write(path, contents).map_err(|e| DataError::io(path, e))
}

fn read_file(path: &Path) -> Result<String, DataError> {
    fs::read_to_string(path).map_err(|e| DataError::io(path, e))
}

/// Writes `manifest.tsv` plus one CSV per sequence into `dir` (created if
/// missing).
pub fn write_dataset(dataset: &[GestureSequence], dir: &Path) -> Result<(), DataError> {
    fs::create_dir_all(dir).map_err(|e| DataError::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut manifest = MANIFEST_COLUMNS.join("\t");
    manifest.push('\n');
    let mut seen = HashSet::new();
    let header = gesture_header();

    for (i, seq) in dataset.iter().enumerate() {
        let line = i + 2;
        let name = gesture_file_name(seq);
        if !seen.insert(name.clone()) {
            return Err(DataError::MalformedManifest {
                path: manifest_path,
                line,
                reason: format!("duplicate gesture path {name}"),
            });
        }
        if seq.class_name.contains(['\t', '\n', '\r']) || seq.class_name.is_empty() {
            return Err(DataError::MalformedManifest {
                path: manifest_path,
                line,
                reason: format!("class name {:?} is empty or contains tab/newline", seq.class_name),
            });
        }
        let _ = writeln!(
            manifest,
            "{name}\t{}\t{}\t{}\t{}\t{}\t{}",
            seq.class_id,
            seq.class_name,
            seq.signer_id,
            seq.repetition,
            seq.hand_mode.as_str(),
            format_hex_f64(seq.rotation_deg)
        );

        let mut body = String::with_capacity(seq.len() * FEATURE_WIDTH * 24);
        body.push_str(&header);
        body.push('\n');
        for (t, frame) in seq.frames().iter().enumerate() {
            let _ = write!(body, "{t}");
            for v in crate::skeleton::flatten_frame(frame) {
                body.push(',');
                body.push_str(&format_hex_f64(v));
            }
            body.push('\n');
        }
        write_file(&dir.join(&name), &body)?;
    }
    write_file(&manifest_path, &manifest)
}

/// One parsed manifest row.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub relative_path: String,
    pub class_id: u32,
    pub class_name: String,
    pub signer_id: u32,
    pub repetition: u32,
    pub hand_mode: HandMode,
    pub rotation_deg: f64,
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, DataError> {
    let text = read_file(path)?;
    let bad = |line: usize, reason: String| DataError::MalformedManifest {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.split('\t').eq(MANIFEST_COLUMNS) => {}
        Some((_, h)) => return Err(bad(1, format!("expected header {:?}, got {h:?}", MANIFEST_COLUMNS.join("\t")))),
        None => return Err(bad(1, "missing header row".into())),
    }
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in lines {
        let n = idx + 1;
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != MANIFEST_COLUMNS.len() {
            return Err(bad(n, format!("expected {} columns, got {}", MANIFEST_COLUMNS.len(), cols.len())));
        }
        let int = |i: usize| {
            cols[i]
                .parse::<u32>()
                .map_err(|_| bad(n, format!("{}: not a non-negative integer: {:?}", MANIFEST_COLUMNS[i], cols[i])))
        };
        let rel = cols[0];
        if rel.is_empty() || rel.contains(['/', '\\']) || rel == "." || rel == ".." {
            return Err(bad(n, format!("path {rel:?} must be a plain file name")));
        }
        if !seen.insert(rel.to_string()) {
            return Err(bad(n, format!("duplicate path {rel}")));
        }
        if cols[2].is_empty() {
            return Err(bad(n, "empty class name".into()));
        }
        let hand_mode = HandMode::parse(cols[5])
            .ok_or_else(|| bad(n, format!("hand_mode must be single or double, got {:?}", cols[5])))?;
        let rotation_deg = parse_hex_f64(cols[6])
            .ok_or_else(|| bad(n, format!("rotation_deg: unparsable hex float {:?}", cols[6])))?;
        rows.push(ManifestRow {
            relative_path: rel.to_string(),
            class_id: int(1)?,
            class_name: cols[2].to_string(),
            signer_id: int(3)?,
            repetition: int(4)?,
            hand_mode,
            rotation_deg,
        });
    }
    Ok(rows)
}

pub fn read_gesture_frames(path: &Path) -> Result<Vec<SkeletonFrame>, DataError> {
    let text = read_file(path)?;
    let bad = |line: usize, reason: String| DataError::MalformedGesture {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = text.lines().enumerate();
    let header = gesture_header();
    match lines.next() {
        Some((_, h)) if h == header => {}
        Some((_, h)) => {
            let n = h.split(',').count();
            return Err(bad(1, format!("bad header ({n} columns, expected {})", FEATURE_WIDTH + 1)));
        }
        None => return Err(bad(1, "empty file".into())),
    }
    let mut frames = Vec::new();
    let mut values = [0.0; FEATURE_WIDTH];
    for (idx, line) in lines {
        let n = idx + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != FEATURE_WIDTH + 1 {
            return Err(bad(
                n,
                format!("expected {} coordinate columns, got {}", FEATURE_WIDTH, cols.len().saturating_sub(1)),
            ));
        }
        if cols[0].parse::<usize>().ok() != Some(frames.len()) {
            return Err(bad(n, format!("frame index {:?}, expected {}", cols[0], frames.len())));
        }
        for (k, tok) in cols[1..].iter().enumerate() {
            values[k] = parse_hex_f64(tok)
                .ok_or_else(|| bad(n, format!("column {}: unparsable coordinate {tok:?}", k + 2)))?;
        }
        frames.push(SkeletonFrame::from_flat(&values).map_err(|e| bad(n, e.to_string()))?);
    }
    if frames.is_empty() {
        return Err(bad(1, "no frames".into()));
    }
    Ok(frames)
}

/// Loads a dataset written by [`write_dataset`], in manifest order.
pub fn read_dataset(dir: &Path) -> Result<Vec<GestureSequence>, DataError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let rows = read_manifest(&manifest_path)?;
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        let frames = read_gesture_frames(&dir.join(&row.relative_path))?;
        let seq = GestureSequence::new(
            frames,
            row.class_id,
            row.class_name,
            row.signer_id,
            row.repetition,
            row.hand_mode,
            row.rotation_deg,
        )
        .expect("frames checked non-empty");
        out.push(seq);
    }
    Ok(out)
}

pub fn write_model(model: &ModelParams, path: &Path) -> Result<(), DataError> {
    write_file(path, &model_to_string(model))
}

pub fn model_to_string(model: &ModelParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}");
    let _ = writeln!(
        out,
        "layers={} input={} hidden={} classes={}",
        model.num_layers(),
        model.input_size(),
        model.hidden_size(),
        model.num_classes()
    );
    for t in model.tensors() {
        let _ = writeln!(out, "{} {} {}", t.name, t.rows, t.cols);
        for row in t.data.chunks(t.cols) {
            let line: Vec<String> = row.iter().map(|&v| format_hex_f64(v)).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
    }
    out
}

pub fn read_model(path: &Path) -> Result<ModelParams, DataError> {
    let text = read_file(path)?;
    parse_model(&text, path)
}

/// Parses model text; `path` is used only for error messages.
pub fn parse_model(text: &str, path: &Path) -> Result<ModelParams, DataError> {
    let p = || path.to_path_buf();
    let lines: Vec<&str> = text.lines().collect();
    let truncated = |line: usize, reason: String| DataError::TruncatedFile {
        path: p(),
        line,
        reason,
    };
    let shape_err = |line: usize, reason: String| DataError::TensorShapeMismatch {
        path: p(),
        line,
        reason,
    };

    let first = lines.first().ok_or_else(|| truncated(1, "empty file".into()))?;
    let mut magic = first.split_whitespace();
    match (magic.next(), magic.next(), magic.next()) {
        (Some(MODEL_MAGIC), Some(v), None) if v == MODEL_VERSION.to_string() => {}
        _ => {
            return Err(DataError::VersionMismatch {
                path: p(),
                line: 1,
                found: first.to_string(),
            })
        }
    }

    let dims_line = lines.get(1).ok_or_else(|| truncated(2, "missing dimension line".into()))?;
    let dims = parse_dims(dims_line).ok_or_else(|| {
        shape_err(2, format!("expected `layers=<n> input=<i> hidden=<h> classes=<k>`, got {dims_line:?}"))
    })?;
    let [layers, input, hidden, classes] = dims;
    let mut model = ModelParams::zeros(classes, input, hidden, layers)
        .map_err(|e| shape_err(2, e.to_string()))?;

    let mut cursor = 2usize;
    for t in model.tensors_mut() {
        let header_no = cursor + 1;
        let header = lines
            .get(cursor)
            .ok_or_else(|| truncated(header_no, format!("missing tensor {}", t.name)))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != t.name {
            return Err(shape_err(header_no, format!("expected header `{} {} {}`, got {header:?}", t.name, t.rows, t.cols)));
        }
        let (rows, cols) = (parts[1].parse::<usize>(), parts[2].parse::<usize>());
        if rows != Ok(t.rows) || cols != Ok(t.cols) {
            return Err(shape_err(
                header_no,
                format!("{} is {}x{} but header says {}x{}", t.name, t.rows, t.cols, parts[1], parts[2]),
            ));
        }
        cursor += 1;
        let want = t.data.len();
        let mut filled = 0usize;
        while filled < want {
            let line_no = cursor + 1;
            let Some(line) = lines.get(cursor) else {
                return Err(truncated(line_no, format!("{} has {filled} of {want} values", t.name)));
            };
            let mut toks = line.split_whitespace().peekable();
            if toks.peek().is_none_or(|tok| !looks_numeric(tok)) {
                return Err(truncated(line_no, format!("{} has {filled} of {want} values", t.name)));
            }
            for tok in toks {
                if filled == want {
                    return Err(shape_err(line_no, format!("{} has more than {want} values", t.name)));
                }
                t.data[filled] = parse_hex_f64(tok)
                    .ok_or_else(|| shape_err(line_no, format!("unparsable value {tok:?} in {}", t.name)))?;
                filled += 1;
            }
            cursor += 1;
        }
    }
    if let Some((i, extra)) = lines.iter().enumerate().skip(cursor).find(|(_, l)| !l.trim().is_empty()) {
        let reason = format!("unexpected content after last tensor: {extra:?}");
        return Err(if looks_numeric(extra.trim()) {
            shape_err(i + 1, reason)
        } else {
            truncated(i + 1, reason)
        });
    }
    Ok(model)
}

fn looks_numeric(tok: &str) -> bool {
    tok.starts_with(|c: char| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
}

fn parse_dims(line: &str) -> Option<[usize; 4]> {
    let mut out = [0usize; 4];
    let keys = ["layers", "input", "hidden", "classes"];
    let parts: Vec<&str> = line.split_whitespace().collect();
    if parts.len() != 4 {
        return None;
    }
    for ((slot, key), part) in out.iter_mut().zip(keys).zip(parts) {
        let (k, v) = part.split_once('=')?;
        if k != key {
            return None;
        }
        *slot = v.parse().ok()?;
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use proptest::prelude::*;

    #[test]
    fn hex_literals() {
        assert_eq!(format_hex_f64(1.0), "0x1p+0");
        assert_eq!(format_hex_f64(-0.5), "-0x1p-1");
        assert_eq!(format_hex_f64(0.1), "0x1.999999999999ap-4");
        assert_eq!(format_hex_f64(0.0), "0x0p+0");
        assert_eq!(format_hex_f64(-0.0), "-0x0p+0");
        assert_eq!(format_hex_f64(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert_eq!(parse_hex_f64("0x1.8p+1"), Some(3.0));
        assert_eq!(parse_hex_f64("-0x0p+0").map(f64::to_bits), Some((-0.0f64).to_bits()));
        assert_eq!(parse_hex_f64("1.5"), None);
        assert_eq!(parse_hex_f64("inf"), None);
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in any::<u64>()) {
            let v = f64::from_bits(bits);
            prop_assume!(v.is_finite());
            let s = format_hex_f64(v);
            prop_assert_eq!(parse_hex_f64(&s).map(f64::to_bits), Some(bits), "{}", s);
        }
    }

    #[test]
    fn model_text_round_trip() {
        let m = init_params(3, 5, 4, 2, 1).unwrap();
        let text = model_to_string(&m);
        assert!(text.starts_with("SLRMODEL 1\nlayers=2 input=5 hidden=4 classes=3\nW_f.0 4 9\n"));
        let back = parse_model(&text, Path::new("m.txt")).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn version_mismatch() {
        let m = init_params(2, 2, 2, 1, 0).unwrap();
        let text = model_to_string(&m).replacen("SLRMODEL 1", "SLRMODEL 2", 1);
        let e = parse_model(&text, Path::new("m.txt")).unwrap_err();
        assert!(matches!(e, DataError::VersionMismatch { line: 1, .. }), "{e}");
    }

    #[test]
    fn short_tensor_is_truncated() {
        let m = init_params(2, 2, 2, 1, 0).unwrap();
        let text = model_to_string(&m);
        // Drop the last value of W_f.0's final row.
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let row = &mut lines[4];
        let cut = row.rfind(' ').unwrap();
        row.truncate(cut);
        let e = parse_model(&(lines.join("\n") + "\n"), Path::new("m.txt")).unwrap_err();
        assert!(matches!(e, DataError::TruncatedFile { line: 6, .. }), "{e}");
    }
}
