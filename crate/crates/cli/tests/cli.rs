use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use relucert::scenario::{left_cut_in_pattern, BenchReport};
use relucert::{
    load_network, Activation, Dataset, InputBox, InputRegion, Layer, Network, SafetyClaim,
    Verdict, VerdictStatus,
};
use serde_json::Value;
use tempfile::TempDir;

fn relucert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relucert"))
        .args(args)
        .env_remove("RELUCERT_THREADS")
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("stdout is not one JSON document ({e}): {}", String::from_utf8_lossy(&o.stdout))
    })
}

fn put(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn identity() -> Network {
    Network::new(
        1,
        vec![
            Layer::new(vec![vec![1.0], vec![-1.0]], vec![0.0, 0.0], Activation::Relu),
            Layer::new(vec![vec![1.0, -1.0]], vec![0.0], Activation::Linear),
        ],
        BTreeMap::new(),
    )
    .unwrap()
}

fn identity_claim(threshold: f64) -> SafetyClaim {
    SafetyClaim {
        name: "identity".into(),
        region: InputRegion::from_box(InputBox::new(vec![-2.0], vec![3.0]).unwrap()),
        objective: vec![1.0],
        threshold,
    }
}

fn patterns_json() -> String {
    serde_json::to_string(&vec![left_cut_in_pattern()]).unwrap()
}

#[test]
fn verify_exit_codes_follow_verdict() {
    let dir = TempDir::new().unwrap();
    let net = put(&dir, "id.json", &identity().to_json());
    let le3 = put(&dir, "le3.json", &identity_claim(3.0).to_json());
    let le29 = put(&dir, "le29.json", &identity_claim(2.9).to_json());

    let o = relucert(&["verify", "--network", s(&net), "--claim", s(&le3)]);
    assert_eq!(o.status.code(), Some(0));
    let v: Verdict = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.status, VerdictStatus::Proved);

    let out = dir.path().join("verdict.json");
    let o = relucert(&[
        "verify", "--network", s(&net), "--claim", s(&le29), "--mode", "parallel", "--output",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v = Verdict::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v.status, VerdictStatus::Violated);
    assert!(identity().forward(v.witness.as_ref().unwrap()).unwrap()[0] > 2.9);
}

#[test]
fn interrupted_search_exits_unknown() {
    // the root relaxation cannot decide this claim and the timeout stops
    // the search right after it
    let dir = TempDir::new().unwrap();
    let net = Network::new(
        2,
        vec![
            Layer::new(
                vec![vec![1.0, 1.0], vec![1.0, -1.0], vec![-1.0, 1.0], vec![-1.0, -1.0]],
                vec![0.0; 4],
                Activation::Relu,
            ),
            Layer::new(vec![vec![1.0, -0.7, 0.4, -1.0]], vec![0.0], Activation::Linear),
        ],
        BTreeMap::new(),
    )
    .unwrap();
    let claim = SafetyClaim {
        name: "tight".into(),
        region: InputRegion::from_box(InputBox::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()),
        objective: vec![1.0],
        threshold: 2.2,
    };
    let n = put(&dir, "n.json", &net.to_json());
    let c = put(&dir, "c.json", &claim.to_json());
    let o = relucert(&["verify", "--network", s(&n), "--claim", s(&c), "--timeout", "1e-9"]);
    let v: Verdict = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.status, VerdictStatus::Unknown, "{v:?}");
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn dumps_bounds_and_lp() {
    let dir = TempDir::new().unwrap();
    let net = put(&dir, "id.json", &identity().to_json());
    let claim = put(&dir, "c.json", &identity_claim(3.0).to_json());
    let b = dir.path().join("bounds.json");
    let lp = dir.path().join("lp.txt");
    let o = relucert(&[
        "verify", "--network", s(&net), "--claim", s(&claim), "--dump-bounds", s(&b), "--dump-lp",
        s(&lp),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let bounds: Value = serde_json::from_str(&std::fs::read_to_string(&b).unwrap()).unwrap();
    assert_eq!(bounds[0]["pre_hi"][0], 3.0);
    assert!(!std::fs::read_to_string(&lp).unwrap().is_empty());
}

#[test]
fn maximize_and_oracle_agree() {
    let dir = TempDir::new().unwrap();
    let net = put(&dir, "id.json", &identity().to_json());
    let region = put(
        &dir,
        "r.json",
        &serde_json::to_string(&identity_claim(0.0).region).unwrap(),
    );
    let o = relucert(&["maximize", "--network", s(&net), "--region", s(&region), "--objective", "-1"]);
    assert_eq!(o.status.code(), Some(0));
    let m = stdout_json(&o);
    assert_eq!(m["status"], "completed");
    assert!((m["upper_bound"].as_f64().unwrap() - 2.0).abs() <= 1e-9);

    let o = relucert(&["oracle", "--network", s(&net), "--region", s(&region), "--objective", "-1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!((stdout_json(&o)["maximum"].as_f64().unwrap() - 2.0).abs() <= 1e-9);
}

#[test]
fn data_pipeline_round_trips() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("ds.csv");
    let o = relucert(&[
        "gen", "--n-records", "1500", "--seed", "3", "--inject-violations", "1", "--output",
        s(&data),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let injected = stdout_json(&o)["injected"].clone();
    assert_eq!(injected.as_array().unwrap().len(), 1);

    let pats = put(&dir, "p.json", &patterns_json());
    let o = relucert(&["validate-data", "--data", s(&data), "--patterns", s(&pats)]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout_json(&o)[&left_cut_in_pattern().name]["indices"], injected);

    let clean = dir.path().join("clean.csv");
    let o = relucert(&[
        "sanitize", "--data", s(&data), "--patterns", s(&pats), "--output", s(&clean),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["removed"], injected);
    let ds = Dataset::read_csv(std::fs::File::open(&clean).unwrap()).unwrap();
    assert_eq!(ds.len(), 1499);
    let o = relucert(&["validate-data", "--data", s(&clean), "--patterns", s(&pats)]);
    assert_eq!(o.status.code(), Some(0));

    let net = dir.path().join("net.json");
    let o = relucert(&[
        "train", "--data", s(&clean), "--arch", "1x6", "--epochs", "3", "--output", s(&net),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let network = load_network(&std::fs::read_to_string(&net).unwrap()).unwrap();
    assert_eq!(network.hidden_layers()[0].width(), 6);

    let o = relucert(&["profile", "--network", s(&net), "--data", s(&clean), "--top-k", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let profiles = stdout_json(&o);
    assert_eq!(profiles.as_array().unwrap().len(), 6);
    assert!(profiles[0]["top_features"].as_array().unwrap().len() <= 2);

    let o = relucert(&["profile", "--network", s(&net), "--data", s(&clean), "--pretty"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(serde_json::from_slice::<Value>(&o.stdout).is_err());
}

#[test]
fn bench_writes_report_and_table() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("ds.csv");
    relucert(&["gen", "--n-records", "1000", "--seed", "9", "--output", s(&data)]);
    let report = dir.path().join("report.json");
    let table = dir.path().join("table.md");
    let o = relucert(&[
        "bench", "--data", s(&data), "--arch", "1x4,1x5", "--seeds", "4,5", "--epochs", "3",
        "--output", s(&report), "--table", s(&table), "--timeout", "60",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let parsed = BenchReport::parse(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed.rows.len(), 2);
    assert_eq!(parsed.rows[1].seed, 5);
    assert_eq!(stdout_json(&o), serde_json::from_str::<Value>(&parsed.to_json()).unwrap());
    assert!(std::fs::read_to_string(&table).unwrap().contains("I_1x4"));
}

#[test]
fn config_is_echoed_on_stderr() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("ds.csv");
    let o = relucert(&["gen", "--n-records", "10", "--output", s(&data)]);
    let line = String::from_utf8_lossy(&o.stderr);
    let echo: Value = serde_json::from_str(line.lines().next().unwrap()).unwrap();
    assert_eq!(echo["config"]["command"], "gen");
    assert_eq!(echo["config"]["seed"], 2018);
    assert_eq!(echo["RELUCERT_THREADS"], 1);
}

#[test]
fn usage_errors_exit_4() {
    assert_eq!(relucert(&[]).status.code(), Some(4));
    assert_eq!(relucert(&["verify"]).status.code(), Some(4));
    assert_eq!(
        relucert(&["verify", "--network", "/nonexistent", "--claim", "/nonexistent"]).status.code(),
        Some(4)
    );
    let dir = TempDir::new().unwrap();
    let net = put(&dir, "id.json", &identity().to_json());
    let claim = put(&dir, "c.json", &identity_claim(3.0).to_json());
    let o = relucert(&["verify", "--network", s(&net), "--claim", s(&claim), "--timeout", "0"]);
    assert_eq!(o.status.code(), Some(4));
    let o = Command::new(env!("CARGO_BIN_EXE_relucert"))
        .args(["verify", "--network", s(&net), "--claim", s(&claim)])
        .env("RELUCERT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn runtime_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    let bad = put(&dir, "bad.json", "{\"input_dim\": 1, \"layers\": []}");
    let claim = put(&dir, "c.json", &identity_claim(3.0).to_json());
    let o = relucert(&["verify", "--network", s(&bad), "--claim", s(&claim)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));

    // claim dimension does not fit the network
    let net = put(&dir, "id.json", &identity().to_json());
    let mut wide = identity_claim(3.0);
    wide.region = InputRegion::from_box(InputBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap());
    let c2 = put(&dir, "c2.json", &wide.to_json());
    let o = relucert(&["verify", "--network", s(&net), "--claim", s(&c2)]);
    assert_eq!(o.status.code(), Some(3));
}
