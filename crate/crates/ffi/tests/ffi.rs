use std::ffi::{CStr, CString};
use std::ptr;

use rac_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rac_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn dense_decomposition_round_trip() {
    unsafe {
        let g = rac_graph_complete(31);
        assert_eq!(rac_graph_edge_count(g), 465);
        assert!(rac_graph_is_tridivisible(g));
        let cfg = RacConfig {
            seed: 3,
            ..rac_config_default()
        };
        let mut res = ptr::null_mut();
        assert_eq!(rac_decompose(g, &cfg, &mut res), RacStatus::Ok);
        assert!(rac_result_ok(res));
        let k = rac_result_triangle_count(res);
        assert_eq!(k, 155);
        let mut buf = vec![0u32; 3 * k];
        assert_eq!(rac_result_triangles(res, buf.as_mut_ptr(), k), k);
        let mut ok = false;
        assert_eq!(rac_verify_decomposition(g, buf.as_ptr(), k, &mut ok), RacStatus::Ok);
        assert!(ok);
        // dropping a triangle breaks the partition
        assert_eq!(rac_verify_decomposition(g, buf.as_ptr(), k - 1, &mut ok), RacStatus::Ok);
        assert!(!ok);
        let json = CStr::from_ptr(rac_result_json(res)).to_str().unwrap();
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        assert_eq!(v["status"], "ok");
        assert_eq!(v["seed"], 3);
        rac_result_free(res);
        rac_graph_free(g);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let g = rac_graph_complete(6);
        let cfg = rac_config_default();
        let mut res = ptr::null_mut();
        assert_eq!(rac_decompose(g, &cfg, &mut res), RacStatus::NotTridivisible);
        assert!(res.is_null());
        assert!(last_error().contains("tridivisible"));
        assert_eq!(rac_decompose(ptr::null(), &cfg, &mut res), RacStatus::NullPointer);
        assert_eq!(rac_graph_add_edge(g, 2, 2), RacStatus::InvalidArgument);
        assert_eq!(rac_graph_add_edge(g, 0, 9), RacStatus::InvalidArgument);
        rac_graph_free(g);
        rac_graph_free(ptr::null_mut());
        rac_result_free(ptr::null_mut());
    }
}

#[test]
fn parse_build_and_count() {
    unsafe {
        let text = CString::new("3 3\n0 1\n1 2\n0 2\n").unwrap();
        let mut g = ptr::null_mut();
        assert_eq!(rac_graph_parse(text.as_ptr(), &mut g), RacStatus::Ok);
        assert_eq!(rac_graph_vertex_count(g), 3);
        let tri = [2u32, 0, 1];
        let mut ok = false;
        assert_eq!(rac_verify_decomposition(g, tri.as_ptr(), 1, &mut ok), RacStatus::Ok);
        assert!(ok);
        rac_graph_free(g);

        let bad = CString::new("3 2\n0 1\n").unwrap();
        assert_eq!(rac_graph_parse(bad.as_ptr(), &mut g), RacStatus::Parse);

        let h = rac_graph_new(4);
        assert_eq!(rac_graph_add_edge(h, 0, 1), RacStatus::Ok);
        assert_eq!(rac_graph_add_edge(h, 0, 1), RacStatus::Ok);
        assert_eq!(rac_graph_edge_count(h), 1);
        rac_graph_free(h);

        let mut c = 0u64;
        assert_eq!(rac_count_sts(7, false, &mut c), RacStatus::Ok);
        assert_eq!(c, 30);
        assert_eq!(rac_count_sts(13, false, &mut c), RacStatus::InvalidArgument);
        let mut d = false;
        assert_eq!(rac_design_divisibility(13, 3, 2, 1, &mut d), RacStatus::Ok);
        assert!(d);
        assert_eq!(rac_design_divisibility(13, 2, 2, 1, &mut d), RacStatus::InvalidArgument);
        assert!(!CStr::from_ptr(rac_version()).to_bytes().is_empty());
    }
}

#[test]
fn punctured_abort_or_success_returns_a_handle() {
    unsafe {
        let g = rac_graph_complete(127);
        let cfg = RacConfig {
            mode: RacMode::Punctured,
            epsilon: 0.005,
            seed: 1,
            ..rac_config_default()
        };
        let mut res = ptr::null_mut();
        let s = rac_decompose(g, &cfg, &mut res);
        assert!(
            s == RacStatus::Ok || s == RacStatus::StageAbort,
            "{s:?}: {}",
            last_error()
        );
        assert!(!res.is_null());
        assert_eq!(rac_result_ok(res), s == RacStatus::Ok);
        rac_result_free(res);
        rac_graph_free(g);
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/rac.h")).unwrap();
    for name in [
        "rac_last_error_message",
        "rac_config_default",
        "rac_graph_parse",
        "rac_decompose",
        "rac_result_triangles",
        "rac_verify_decomposition",
        "rac_count_sts",
        "RAC_STATUS_STAGE_ABORT",
        "typedef struct RacGraph RacGraph",
    ] {
        assert!(h.contains(name), "rac.h lacks {name}");
    }
}

/// Compiles and runs a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    // cargo test only builds the rlib, so ask for the staticlib explicitly
    let built = std::process::Command::new(env!("CARGO"))
        .args(["build", "--quiet", "--lib", "-p", "rac-ffi"])
        .current_dir(manifest)
        .status()
        .expect("cargo runs");
    assert!(built.success());
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("librac_ffi.a");
    assert!(lib.exists(), "missing {}", lib.display());
    let out = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("rac_smoke");
    let status = std::process::Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .status()
        .expect("cc runs");
    assert!(status.success());
    let run = std::process::Command::new(&out).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "35 1");
}
