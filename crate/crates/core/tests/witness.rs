use std::f64::consts::PI;
use std::path::PathBuf;

use thermoqc_core::constitutive::{build_model, ModelSpec};
use thermoqc_core::fields::{zero_trace_mask, BoundaryMode, Grid, GridField, Rank, TestField};
use thermoqc_core::quasiconvexity::{garding_check, qc_quotient, BackgroundField};
use thermoqc_core::tensor::Mat;
use thermoqc_core::witness::{parse_manifest, replay, Witness, WitnessData, MANIFEST_NAME};
use thermoqc_core::Error;

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("thermoqc-witness-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn test_field(g: Grid, mode: BoundaryMode) -> TestField {
    let mut phi = GridField::from_fn(g, Rank::Vector, |x, out| out[0] = 0.1 * (2.0 * PI * x[0]).sin());
    let mut psi = GridField::from_fn(g, Rank::Scalar, |x, out| out[0] = 0.2 * (4.0 * PI * x[0]).cos());
    if mode == BoundaryMode::ZeroTrace {
        let mask = zero_trace_mask(g);
        for (c, m) in mask.iter().enumerate() {
            phi.cell_mut(c)[0] *= m;
            psi.cell_mut(c)[0] *= m;
        }
        psi.subtract_mean();
    }
    TestField::new(phi, psi, mode).unwrap()
}

fn garding_witness() -> Witness {
    let spec = ModelSpec::new("quadratic").with("dim", 1).with("alpha", 1);
    let model = build_model(&spec).unwrap();
    let g = Grid::new(1, 32).unwrap();
    let bg = BackgroundField::oscillatory(g, &Mat::identity(1), &Mat::identity(1), 0.5, 0.3, 1.0).unwrap();
    let field = test_field(g, BoundaryMode::ZeroTrace);
    let margin = garding_check(&model, &bg, 1.0, 0.5, std::slice::from_ref(&field)).unwrap().margins[0];
    Witness { model: spec, data: WitnessData::GardingMargin { background: bg, c0: 1.0, c1: 0.5, field }, recorded: margin }
}

fn qc_witness() -> Witness {
    let spec = ModelSpec::new("rank1defective").with("dim", 1).with("beta", 2);
    let model = build_model(&spec).unwrap();
    let field = test_field(Grid::new(1, 32).unwrap(), BoundaryMode::Periodic);
    let l1 = Mat::identity(1);
    let value = qc_quotient(&model, &l1, 0.0, &field).unwrap();
    Witness { model: spec, data: WitnessData::QcQuotient { lambda1: l1, lambda2: 0.0, field }, recorded: value }
}

#[test]
fn written_witnesses_replay() {
    for (tag, w) in [("garding", garding_witness()), ("qc", qc_witness())] {
        let dir = scratch(tag);
        w.write(&dir).unwrap();
        let v = replay(&dir).unwrap();
        assert!(v.confirmed, "{tag}: {v:?}");
        assert_eq!(v.recomputed, w.recorded, "{tag}");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}

#[test]
fn tampered_binary_is_rejected() {
    let dir = scratch("tamper");
    garding_witness().write(&dir).unwrap();
    let path = dir.join("phi.bin");
    let mut bytes = std::fs::read(&path).unwrap();
    let k = bytes.len() - 3;
    bytes[k] ^= 0x40;
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(replay(&dir), Err(Error::ChecksumMismatch(_))));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn other_format_versions_are_rejected() {
    let dir = scratch("version");
    qc_witness().write(&dir).unwrap();
    let path = dir.join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, text.replace("format_version=1", "format_version=7")).unwrap();
    assert!(matches!(replay(&dir), Err(Error::FormatVersion { found: 7, .. })));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn altered_value_is_not_confirmed() {
    let w = garding_witness();
    let (m, files) = w.encode();
    let line = m.lines().find(|l| l.starts_with("value=")).unwrap();
    let m = m.replace(line, &format!("value={:e}", w.recorded + 1e-3));
    let man = parse_manifest(&m).unwrap();
    let back = Witness::from_manifest(&man, |name| Ok(files.iter().find(|f| f.0 == name).unwrap().1.clone())).unwrap();
    assert!(!back.replay().unwrap().confirmed);
}
