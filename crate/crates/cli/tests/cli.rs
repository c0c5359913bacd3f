use std::path::{Path, PathBuf};
use std::process::Command;
use tbnet_cli::export::{export_dot, export_records, load_records};
use tbnet_core::graph::{build_graph, BuildConfig};
use tbnet_core::net::parse_net;

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models").join(name)
}

fn tbnet(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tbnet")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn running() -> tbnet_core::net::TbNet {
    parse_net(&std::fs::read_to_string(model("running_example.tb")).unwrap()).unwrap()
}

#[test]
fn records_round_trip() {
    let net = running();
    for engine in [Default::default(), tbnet_core::symbolic::EngineConfig::without_ta()] {
        let g = build_graph(&net, BuildConfig { engine, time_limit: Some(3.into()), ..BuildConfig::default() });
        let text = export_records(&net, &g);
        assert_eq!(text.lines().count(), g.nodes.len() + g.edges.len());
        let back = load_records(&net, &text).unwrap();
        assert_eq!(back.nodes, g.nodes);
        assert_eq!(back.edges, g.edges);
        assert_eq!(back.initial, g.initial);
        assert_eq!(export_records(&net, &back), text);
    }
}

#[test]
fn gas_off_record_has_elapsed_window() {
    let net = running();
    let g = build_graph(&net, BuildConfig::default());
    let text = export_records(&net, &g);
    assert!(text.lines().any(|l| l.contains("\"TL - T0 >= 1/5\"") && l.contains("\"TL - T0 <= 1/2\"")));
}

#[test]
fn malformed_records_report_the_line() {
    let net = running();
    let err = load_records(&net, "{\"record\":\"node\",\"id\":0,\"marking\":[],\"constraint\":[],\"flags\":{\"initial\":true,\"deadlock\":false,\"not_expanded\":false}}\n{\"record\":\"edge\"}\n")
        .unwrap_err();
    assert!(err.to_string().starts_with("record line 2"), "{err}");
}

#[test]
fn net_without_transitions_is_a_single_box() {
    let net = parse_net("net idle\nplace P\ninit P{T0}\n").unwrap();
    let g = build_graph(&net, BuildConfig::default());
    let dot = export_dot(&net, &g);
    assert_eq!(dot.matches("[label=\"S").count(), 1);
    assert!(!dot.contains("->"));
    assert!(dot.contains("peripheries=2"));
}

#[test]
fn analyze_writes_dot_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("running_example.tb");
    let mut outputs = Vec::new();
    for i in 0..2 {
        let dot = dir.path().join(format!("g{i}.dot"));
        let rec = dir.path().join(format!("g{i}.jsonl"));
        let (code, _) = tbnet(&[
            "analyze",
            m.to_str().unwrap(),
            "--dot",
            dot.to_str().unwrap(),
            "--records",
            rec.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        outputs.push((std::fs::read(&dot).unwrap(), std::fs::read(&rec).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);
    let dot = String::from_utf8(outputs[0].0.clone()).unwrap();
    assert_eq!(dot.matches("[label=\"S").count(), 14);
}

#[test]
fn no_ta_with_limit_gives_twenty_five() {
    let (code, out) =
        tbnet(&["analyze", model("running_example.tb").to_str().unwrap(), "--no-ta", "--time-limit", "3"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("net running_example: 25 nodes"), "{out}");
}

#[test]
fn exit_codes() {
    assert_eq!(tbnet(&["analyze", "missing.tb"]).0, 2);
    assert_eq!(tbnet(&["analyze"]).0, 2);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tb");
    std::fs::write(&bad, "net x\nplace P\ntrans t pre P post Q tf [0, 1]\n").unwrap();
    assert_eq!(tbnet(&["analyze", bad.to_str().unwrap()]).0, 2);
    let (code, out) =
        tbnet(&["analyze", model("dead_token.tb").to_str().unwrap(), "--simulate", "--runs", "10", "--steps", "20"]);
    assert_eq!(code, 0);
    assert!(out.contains("0 violations"), "{out}");
}

#[test]
fn queries_from_records_match_live_graph() {
    let dir = tempfile::tempdir().unwrap();
    let m = model("running_example.tb");
    let rec = dir.path().join("g.jsonl");
    let q = dir.path().join("q.txt");
    std::fs::write(&q, "# checks\ndeadlocks\nmax #Flame + #NoFlame\nexists #IGNITE_PHASE_S >= 2\n").unwrap();
    let (code, live) =
        tbnet(&["analyze", m.to_str().unwrap(), "--records", rec.to_str().unwrap(), "--query", q.to_str().unwrap()]);
    assert_eq!(code, 0);
    let (code, loaded) =
        tbnet(&["eval", m.to_str().unwrap(), "--records", rec.to_str().unwrap(), "--query", q.to_str().unwrap()]);
    assert_eq!(code, 0);
    let live: Vec<&str> = live.lines().skip(1).collect();
    assert_eq!(live, loaded.lines().collect::<Vec<_>>());
    assert!(loaded.contains("definite: [], potential: []"));
}
