use std::ffi::{c_char, CStr, CString};
use std::ptr;

use plankton::embedder::{encode, EmbedderConfig, EmbedderModel, InputShape, Variant};
use plankton_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { plk_last_error(buf.as_mut_ptr(), buf.len()) };
    assert!(n > 0, "no error recorded");
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn two_blobs() -> Vec<f64> {
    let mut pts = Vec::new();
    for i in 0..10 {
        let d = i as f64 * 0.01;
        pts.extend([d, -d]);
        pts.extend([5.0 + d, 5.0 - d]);
    }
    pts
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(plk_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn metrics_round_trip() {
    let clusters = [0usize, 0, 1, 1, 1];
    let classes = [0usize, 0, 1, 1, 0];
    let mut p = 0.0;
    let mut o = usize::MAX;
    unsafe {
        assert_eq!(plk_purity(clusters.as_ptr(), classes.as_ptr(), 5, &mut p), PlkStatus::Ok);
        assert_eq!(plk_overlaps(clusters.as_ptr(), classes.as_ptr(), 5, &mut o), PlkStatus::Ok);
    }
    assert!((p - 0.8).abs() < 1e-12);
    assert_eq!(o, 0);

    let merged = [0usize, 0, 0, 0];
    let labels = [0usize, 0, 1, 1];
    unsafe {
        assert_eq!(plk_overlaps(merged.as_ptr(), labels.as_ptr(), 4, &mut o), PlkStatus::Ok);
    }
    assert_eq!(o, 1);
}

#[test]
fn null_pointers_are_reported() {
    let c = [0usize];
    let mut p = 0.0;
    let st = unsafe { plk_purity(ptr::null(), c.as_ptr(), 1, &mut p) };
    assert_eq!(st, PlkStatus::NullPointer);
    assert!(last_error().contains("clusters"));
    let st = unsafe { plk_purity(c.as_ptr(), c.as_ptr(), 1, ptr::null_mut()) };
    assert_eq!(st, PlkStatus::NullPointer);
    let st = unsafe { plk_cluster_fit(ptr::null(), 3, 2, 2, 2.0, 1e-5, 10, 0, ptr::null_mut()) };
    assert_eq!(st, PlkStatus::NullPointer);
    assert_eq!(unsafe { plk_cluster_n_clusters(ptr::null()) }, 0);
    unsafe {
        plk_cluster_free(ptr::null_mut());
        plk_embedder_free(ptr::null_mut());
    }
}

#[test]
fn last_error_truncates_and_reports_length() {
    let c = [0usize];
    let st = unsafe { plk_purity(ptr::null(), c.as_ptr(), 1, &mut 0.0) };
    assert_eq!(st, PlkStatus::NullPointer);
    let full = unsafe { plk_last_error(ptr::null_mut(), 0) };
    let mut small = [1 as c_char; 4];
    assert_eq!(unsafe { plk_last_error(small.as_mut_ptr(), small.len()) }, full);
    assert_eq!(small[3], 0);
    assert_eq!(unsafe { CStr::from_ptr(small.as_ptr()) }.to_bytes().len(), 3);
}

#[test]
fn cluster_fit_assign_save_load() {
    let pts = two_blobs();
    let n = pts.len() / 2;
    let mut model = ptr::null_mut();
    let st = unsafe { plk_cluster_fit(pts.as_ptr(), n, 2, 2, 2.0, 1e-5, 300, 3, &mut model) };
    assert_eq!(st, PlkStatus::Ok);
    assert_eq!(unsafe { plk_cluster_n_clusters(model) }, 2);
    assert_eq!(unsafe { plk_cluster_dim(model) }, 2);

    let probe = [0.0, 0.0, 5.0, 5.0];
    let mut u = [0.0; 4];
    assert_eq!(unsafe { plk_cluster_assign(model, probe.as_ptr(), 2, 2.0, u.as_mut_ptr()) }, PlkStatus::Ok);
    assert!((u[0] + u[1] - 1.0).abs() < 1e-12);
    let a = if u[0] > u[1] { 0 } else { 1 };
    let b = if u[2] > u[3] { 0 } else { 1 };
    assert_ne!(a, b);

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("clusters.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { plk_cluster_save(model, path.as_ptr()) }, PlkStatus::Ok);
    let mut loaded = ptr::null_mut();
    assert_eq!(unsafe { plk_cluster_load(path.as_ptr(), &mut loaded) }, PlkStatus::Ok);
    let mut v = [0.0; 4];
    assert_eq!(unsafe { plk_cluster_assign(loaded, probe.as_ptr(), 2, 2.0, v.as_mut_ptr()) }, PlkStatus::Ok);
    assert_eq!(u, v);
    unsafe {
        plk_cluster_free(model);
        plk_cluster_free(loaded);
    }
}

#[test]
fn bad_arguments_map_to_status_codes() {
    let pts = two_blobs();
    let mut model = ptr::null_mut();
    let st = unsafe { plk_cluster_fit(pts.as_ptr(), 20, 2, 2, 1.0, 1e-5, 300, 0, &mut model) };
    assert_eq!(st, PlkStatus::InvalidArgument);
    assert!(model.is_null());

    let missing = CString::new("/nonexistent/clusters.json").unwrap();
    let st = unsafe { plk_cluster_load(missing.as_ptr(), &mut model) };
    assert_eq!(st, PlkStatus::Io);
    assert!(last_error().contains("/nonexistent/clusters.json"));

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, b"{not json").unwrap();
    let junk = CString::new(junk.to_str().unwrap()).unwrap();
    assert_eq!(unsafe { plk_cluster_load(junk.as_ptr(), &mut model) }, PlkStatus::Format);
    assert_eq!(unsafe { plk_embedder_load(junk.as_ptr(), &mut ptr::null_mut()) }, PlkStatus::Format);
}

#[test]
fn embedder_matches_library_encoding() {
    let mut cfg = EmbedderConfig::new(Variant::Vae, InputShape::Custom([1, 8, 8]), 3);
    cfg.channels = [2, 2, 2];
    cfg.seed = 5;
    let lib_model = EmbedderModel::<f32>::build(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    lib_model.to_checkpoint().unwrap().save(&path).unwrap();

    let cpath = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { plk_embedder_load(cpath.as_ptr(), &mut model) }, PlkStatus::Ok);
    assert_eq!(unsafe { plk_embedder_latent_dim(model) }, 3);
    assert_eq!(unsafe { plk_embedder_input_len(model) }, 64);

    let samples: Vec<f32> = (0..128).map(|i| (i % 7) as f32 / 7.0).collect();
    let mut out = [0f32; 6];
    assert_eq!(unsafe { plk_embedder_encode(model, samples.as_ptr(), 2, out.as_mut_ptr()) }, PlkStatus::Ok);
    let want = encode(&lib_model, &samples.chunks(64).collect::<Vec<_>>()).unwrap();
    assert_eq!(out.to_vec(), want.concat());
    unsafe { plk_embedder_free(model) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/plankton.h")).unwrap();
    for name in [
        "plk_last_error",
        "plk_version",
        "plk_purity",
        "plk_overlaps",
        "plk_cluster_fit",
        "plk_cluster_load",
        "plk_cluster_save",
        "plk_cluster_n_clusters",
        "plk_cluster_dim",
        "plk_cluster_assign",
        "plk_cluster_free",
        "plk_embedder_load",
        "plk_embedder_latent_dim",
        "plk_embedder_input_len",
        "plk_embedder_encode",
        "plk_embedder_free",
        "PLK_STATUS_NULL_POINTER",
        "typedef struct PlkEmbedder PlkEmbedder",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
}
