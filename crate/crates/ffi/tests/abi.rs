use std::ffi::{CStr, CString};
use std::ptr;

use flisr_ffi::*;

fn last_error() -> String {
    let p = flisr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn rules_over_the_boundary() {
    assert_eq!(flisr_evaluate_rules(true, true, false), FlisrVerb::Open);
    assert_eq!(flisr_evaluate_rules(true, true, true), FlisrVerb::Open);
    assert_eq!(flisr_evaluate_rules(false, true, false), FlisrVerb::Close);
    assert_eq!(flisr_evaluate_rules(false, true, true), FlisrVerb::CloseNormallyOpen);
    assert_eq!(flisr_evaluate_rules(true, false, false), FlisrVerb::None);
    assert_eq!(flisr_evaluate_rules(false, false, true), FlisrVerb::None);
}

#[test]
fn message_round_trip() {
    let point = FlisrPoint { link_add: 0, asdu_ca: 23089, type_id: 1, ioa: 27, value: 1 };
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { flisr_encode_message(point, &mut s) }, FlisrStatus::Ok);
    let json = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_owned();
    assert!(json.contains(r#""Value":"1(ON)""#), "{json}");
    let mut back = FlisrPoint::default();
    assert_eq!(unsafe { flisr_decode_message(s, &mut back) }, FlisrStatus::Ok);
    unsafe { flisr_string_free(s) };
    assert_eq!(back, point);

    let bad = CString::new(r#"{"LinkAdd":0}"#).unwrap();
    assert_eq!(unsafe { flisr_decode_message(bad.as_ptr(), &mut back) }, FlisrStatus::InvalidMessage);
    assert!(!last_error().is_empty());
    let mut s = ptr::null_mut();
    let two = FlisrPoint { value: 2, ..point };
    assert_eq!(unsafe { flisr_encode_message(two, &mut s) }, FlisrStatus::InvalidMessage);
    assert!(s.is_null());
}

#[test]
fn kerry_scenario_through_handles() {
    let mut topo = ptr::null_mut();
    let site = CString::new("kerry").unwrap();
    assert_eq!(unsafe { flisr_topology_fixture(site.as_ptr(), &mut topo) }, FlisrStatus::Ok);
    assert_eq!(unsafe { flisr_topology_switch_count(topo) }, 8);

    let case = CString::new(r#"{"site":"kerry","faulted":["R186"],"down":["R185","R184"]}"#).unwrap();
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { flisr_run_scenario(topo, case.as_ptr(), &mut res) }, FlisrStatus::Ok);
    unsafe {
        assert_eq!(flisr_result_affected_pre(res), 250);
        assert_eq!(flisr_result_affected_post(res), 0);
        assert_eq!(flisr_result_cml_pre(res), 14250);
        assert_eq!(flisr_result_cml_post(res), 0);
        assert!(flisr_result_elapsed_ms(res) <= 10.0);
        let ops = CStr::from_ptr(flisr_result_operations(res)).to_str().unwrap();
        assert_eq!(ops, "R186 opened, R185 closed, R184 N/O point closed");
        let mut json = ptr::null_mut();
        assert_eq!(flisr_result_to_json(res, &mut json), FlisrStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(v["affected_pre"], 250);
        flisr_string_free(json);
        flisr_result_free(res);
        flisr_topology_free(topo);
    }
}

#[test]
fn topology_json_and_errors() {
    let doc = flisr::topology::export_topology(&flisr::fixtures::mullingar());
    let doc = CString::new(doc).unwrap();
    let mut topo = ptr::null_mut();
    assert_eq!(unsafe { flisr_topology_from_json(doc.as_ptr(), &mut topo) }, FlisrStatus::Ok);

    let wrong = CString::new(r#"{"site":"kerry","faulted":["NOPE"],"down":[]}"#).unwrap();
    let mut res = ptr::null_mut();
    assert_eq!(unsafe { flisr_run_scenario(topo, wrong.as_ptr(), &mut res) }, FlisrStatus::RunFailed);
    assert!(res.is_null());
    let junk = CString::new("not json").unwrap();
    assert_eq!(unsafe { flisr_run_scenario(topo, junk.as_ptr(), &mut res) }, FlisrStatus::InvalidScenario);
    unsafe { flisr_topology_free(topo) };

    let mut t2 = ptr::null_mut();
    assert_eq!(unsafe { flisr_topology_from_json(junk.as_ptr(), &mut t2) }, FlisrStatus::InvalidTopology);
    let nowhere = CString::new("atlantis").unwrap();
    assert_eq!(unsafe { flisr_topology_fixture(nowhere.as_ptr(), &mut t2) }, FlisrStatus::UnknownSite);
    assert!(last_error().contains("atlantis"));
    assert_eq!(unsafe { flisr_topology_fixture(ptr::null(), &mut t2) }, FlisrStatus::NullPointer);
    assert_eq!(unsafe { flisr_run_scenario(ptr::null(), junk.as_ptr(), &mut res) }, FlisrStatus::NullPointer);
    // Freeing NULL is a no-op.
    unsafe {
        flisr_topology_free(ptr::null_mut());
        flisr_result_free(ptr::null_mut());
        flisr_string_free(ptr::null_mut());
    }
}

#[test]
fn generated_header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/flisr.h")).unwrap();
    for name in [
        "typedef struct FlisrTopology FlisrTopology",
        "typedef struct FlisrResult FlisrResult",
        "FLISR_STATUS_OK = 0",
        "FLISR_VERB_CLOSE_NORMALLY_OPEN",
        "flisr_topology_from_json",
        "flisr_run_scenario",
        "flisr_result_operations",
        "flisr_last_error",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile_dir();
    let src = dir.join("probe.c");
    std::fs::write(
        &src,
        "#include \"flisr.h\"\nint main(void){FlisrPoint p={0};(void)p;return flisr_evaluate_rules(1,1,0)==FLISR_VERB_OPEN?0:1;}\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok())
        .ok_or(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("flisr-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
