use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn oscillo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oscillo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf8")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

#[test]
fn reduce_cancels_to_identity() {
    let o = oscillo(&["reduce", "x x'"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "e");
    let o = oscillo(&["reduce", "--word", "x y y' z", "--format", "json"]);
    assert_eq!(json(&o)["reduced"], "x z");
}

#[test]
fn dehn_reads_presentation_file() {
    let pres = tmp("pres_p2.txt");
    std::fs::write(&pres, "gens: x y\nrelator: x y'\npower: 2\n").unwrap();
    let p = pres.to_str().unwrap();
    let o = oscillo(&["dehn", "--pres", p, "--word", "x y' x y'", "--format", "json"]);
    assert!(o.status.success());
    let j = json(&o);
    assert_eq!(j["trivial"], true);
    assert_eq!(j["reduced"], "e");
    let o = oscillo(&["dehn", "--pres", p, "--word", "x y' x", "--format", "json"]);
    assert_eq!(json(&o)["trivial"], false);
}

#[test]
fn osc_enum_reports_elements_and_semantics() {
    let o = oscillo(&[
        "osc-enum",
        "--backend",
        "free",
        "--base",
        "x,y",
        "--n",
        "3",
        "--mirror",
        "--budget",
        "2",
        "--format",
        "json",
    ]);
    assert!(o.status.success());
    let j = json(&o);
    let els = j["elements"].as_array().unwrap();
    assert_eq!(j["count"].as_u64().unwrap() as usize, els.len());
    assert_eq!(els[0], "e");
    assert!(els.contains(&Value::from("x' y x'")));
    assert_eq!(j["semantics"], "UNDER_APPROXIMATION");
}

#[test]
fn affine_subcommands() {
    let o = oscillo(&["aff", "eval", "--word", "a b a'", "--format", "json"]);
    assert_eq!(json(&o)["map"], "a=0,t=2");
    let o = oscillo(&[
        "aff",
        "member",
        "--set",
        "SinvS",
        "--map",
        "a=0,t=1/2",
        "--format",
        "json",
    ]);
    assert_eq!(json(&o)["member"], true);
    let o = oscillo(&[
        "aff",
        "member",
        "--set",
        "SSinv",
        "--map",
        "a=0,t=1/2",
        "--format",
        "json",
    ]);
    assert_eq!(json(&o)["member"], false);
}

#[test]
fn co61_certificate_is_verified_and_replays() {
    let o = oscillo(&[
        "scenario",
        "co61",
        "--p",
        "2",
        "--budget",
        "12",
        "--format",
        "json",
        "--no-timings",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["verdict"], "Verified");
    assert!(j.get("timings_ms").is_none());
    let cert = tmp("co61.json");
    std::fs::write(&cert, &o.stdout).unwrap();
    let r = oscillo(&["replay", "--cert", cert.to_str().unwrap(), "--format", "json"]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(&r)["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn ex11_reports_orientation_with_witness() {
    let o = oscillo(&["scenario", "ex11", "--budget", "10", "--format", "json", "--no-timings"]);
    assert_eq!(o.status.code(), Some(0));
    let j = json(&o);
    assert_eq!(j["verdict"], "RefutedWithWitness");
    assert_eq!(j["details"]["orientation"]["smaller_product_set"], "SS^-1");
    assert!(j["details"]["witness"]["word_length"].as_u64().unwrap() <= 4);
}

#[test]
fn same_config_same_bytes() {
    let args = ["scenario", "ex0", "--format", "json", "--no-timings", "--seed", "3"];
    assert_eq!(oscillo(&args).stdout, oscillo(&args).stdout);
}

#[test]
fn exit_codes() {
    // usage errors
    assert_eq!(oscillo(&["osc-enum", "--bogus"]).status.code(), Some(1));
    assert_eq!(oscillo(&["osc-enum", "--n", "0"]).status.code(), Some(1));
    assert_eq!(oscillo(&["scenario", "nope"]).status.code(), Some(1));
    // no containment up to max-n leaves the upper bound open
    let o = oscillo(&[
        "estimate", "--base", "x,y", "--max-n", "3", "--budget", "1", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json(&o)["estimate"]["upper"], "unbounded_at_budget");
    assert_eq!(
        oscillo(&["refute-inclusion", "--base", "x,y", "--n", "2", "--budget", "2"])
            .status
            .code(),
        Some(0)
    );
}

#[test]
fn selftest_is_thread_count_independent() {
    let run = |t: &str| {
        oscillo(&[
            "selftest",
            "--seed",
            "7",
            "--threads",
            t,
            "--format",
            "json",
            "--no-timings",
        ])
    };
    let one = run("1");
    let eight = run("8");
    assert_eq!(one.status.code(), Some(0), "{}", stdout(&one));
    assert_eq!(eight.status.code(), Some(0));
    assert_eq!(one.stdout, eight.stdout);
    let j = json(&one);
    assert_eq!(j["criteria"].as_array().unwrap().len(), 9);
    assert_eq!(j["passed"], true);
}
