use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/data").join(name).display().to_string()
}

fn golden(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn pap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pap")).args(args).env_remove("PAP_PRODUCT_CAP").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str, text: &str) -> String {
    let dir = std::env::temp_dir().join(format!("pap-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn eval_surveillance() {
    let o = pap(&["eval", &data("surveillance.pap"), &data("surveillance.state")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("eval_surveillance.txt"));
    assert!(stdout(&o).contains("F move()"));
}

#[test]
fn eval_is_identical_with_explicit_level_one() {
    let a = pap(&["eval", &data("surveillance.pap"), &data("surveillance.state")]);
    let b = pap(&["eval", &data("surveillance.pap"), &data("surveillance.state"), "--p", "1.0"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn eval_trace_names_rule_three_first() {
    let o = pap(&["eval", &data("surveillance.pap"), &data("surveillance.state"), "--trace"]);
    assert_eq!(stdout(&o).lines().next(), Some("iter 1 rule 3 O send_warn(t80)"));
}

#[test]
fn eval_json_lines_golden() {
    let o = pap(&["--format", "json-lines", "eval", &data("surveillance.pap"), &data("surveillance.state"), "--trace"]);
    assert_eq!(stdout(&o), golden("eval_surveillance.jsonl"));
    for line in stdout(&o).lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn eval_clash_exits_two() {
    let empty = tmp("empty.state", "");
    let o = pap(&["eval", &data("clash.pap"), &empty]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("no consistent set exists"));
}

#[test]
fn eval_empty_program() {
    let empty = tmp("empty.pap", "");
    let o = pap(&["eval", &empty, &empty]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "{}\n");
}

#[test]
fn eval_rejects_negation_and_bad_input() {
    let o = pap(&["eval", &data("warn_ag.pap"), &data("warn_ag.state")]);
    assert_eq!(o.status.code(), Some(1));
    let bad = tmp("bad.pap", "action a().\nDo a( <- .");
    let o = pap(&["eval", &bad, &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.pap:2:"));
    let o = pap(&["eval", &data("power_warn.pap"), &data("power_warn.state"), "--p", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn check_warn_ag_candidates() {
    let cand = tmp("cand_a.ps", "{Do warn_ag(a), P warn_ag(a)}");
    let o = pap(&["check", &data("warn_ag.pap"), &data("warn_ag.state"), &cand]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("check_warn_ag_a.txt"));

    let cand = tmp("cand_b.ps", "{F open_ch(b), O warn_ag(b), Do warn_ag(b), P warn_ag(b)}");
    let o = pap(&["check", &data("warn_ag.pap"), &data("warn_ag.state"), &cand]);
    let out = stdout(&o);
    assert!(out.contains("rational: yes") && out.contains("reasonable: no"), "{out}");
}

#[test]
fn check_clash_candidate_and_parse_error() {
    let prog = tmp("a.pap", "action a().");
    let st = tmp("a.state", "");
    let cand = tmp("ow.ps", "{O a(), W a()}");
    let o = pap(&["check", &prog, &st, &cand]);
    assert!(stdout(&o).contains("PS2 fail"));
    let cand = tmp("broken.ps", "{O a(, }");
    assert_eq!(pap(&["check", &prog, &st, &cand]).status.code(), Some(1));
}

#[test]
fn step_erase_with_kripke() {
    let out = std::env::temp_dir().join(format!("pap-step-{}.state", std::process::id()));
    let o = pap(&[
        "step",
        &data("kripke.pap"),
        &data("kripke.state"),
        "erase(t80)",
        "--kripke",
        &data("kripke_table.dump"),
        "--out",
        &out.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), golden("step_erase.txt"));
    let written = std::fs::read_to_string(&out).unwrap();
    assert!(written.contains("t72") && !written.contains("t80"));
}

#[test]
fn step_noop_and_not_executable() {
    let prog = tmp("noop.pap", "action noop().");
    let st = tmp("noop.state", "d.f() = { rv{a: 0.5} }");
    let o = pap(&["step", &prog, &st, "noop()"]);
    assert_eq!(stdout(&o), "no changes\n");
    let o = pap(&["step", &data("kripke.pap"), &data("kripke.state"), "alpha1()"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("not possibly executable"));
    let o = pap(&["step", &data("kripke.pap"), &data("kripke.state"), "alpha1()", "--force"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn kripke_dump_and_check() {
    let o = pap(&["kripke", &data("kripke.state")]);
    assert_eq!(stdout(&o), golden("kripke_product.txt"));
    let o = pap(&["kripke", &data("kripke.state"), "--check", &data("kripke_table.dump")]);
    assert_eq!(stdout(&o), "compatible\n");
    let bad = std::fs::read_to_string(data("kripke_table.dump")).unwrap().replace("#2 p=0.1", "#2 p=0.15");
    let bad = tmp("bad.dump", &bad);
    let o = pap(&["kripke", &data("kripke.state"), "--check", &bad]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("incompatible: residual at t80"), "{}", stdout(&o));
}

#[test]
fn product_cap_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_pap"))
        .args(["kripke", &data("kripke.state")])
        .env("PAP_PRODUCT_CAP", "4")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceeds the cap of 4"));
}

#[test]
fn ic_check_verdicts_and_export() {
    let st = tmp("ic.state", "d.f() = { rv{a: 0.4}, rv{c: 0.5} }");
    let taut = tmp("taut.pap", "action put() { add: in(b, d.f()) }\nic true => 1 = 1.");
    let o = pap(&["ic-check", &taut, &st, "put()", "--p", "0.9"]);
    assert_eq!(stdout(&o), "ic 1: guaranteed (min 1.000)\n");
    let broken = tmp("broken.pap", "action put() { add: in(b, d.f()) }\nic in(b, d.f()) => 1 = 2.");
    let o = pap(&["ic-check", &broken, &st, "put()", "--p", "0.5"]);
    assert!(stdout(&o).starts_with("ic 1: not guaranteed (min 0.000)"));

    let lp = std::env::temp_dir().join(format!("pap-erase-{}.lp", std::process::id()));
    let prog = tmp(
        "erase.pap",
        &format!(
            "{}\nic in(\"Loc2\", surv.location(image1)) => in(t72, surv.identify(image1)).",
            std::fs::read_to_string(data("kripke.pap")).unwrap()
        ),
    );
    let o = pap(&[
        "ic-check",
        &prog,
        &data("kripke.state"),
        "erase(t80)",
        "--p",
        "0.5",
        "--export-lp",
        &lp.display().to_string(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&lp).unwrap();
    for section in ["\nK:", "\nCK_1:", "\nIC_1_lo:", "\nKK_1:", "\nIG_1_lo:", "\nbounds:"] {
        assert!(text.contains(section), "{section}");
    }
    assert_eq!(text.lines().filter(|l| l.starts_with("CK_")).count(), 3);
    assert_eq!(text.lines().filter(|l| l.starts_with("KK_")).count(), 4);
}

#[test]
fn parse_reports_spans() {
    let o = pap(&["parse", &data("warn_ag.pap")]);
    assert_eq!(o.status.code(), Some(0));
    let bad = tmp("unsafe.pap", "action a(X).\nDo a(X) <- .");
    let o = pap(&["parse", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unsafe.pap:2:1"));
}
