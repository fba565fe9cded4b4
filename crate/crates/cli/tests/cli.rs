//! End-to-end tests driving the `bad` binary.

use std::fs;
use std::process::Command;

const DDL: &str = r#"CREATE CONTINUOUS PUSH CHANNEL HotTopics(MyState) PERIOD duration("PT10S") {
  SELECT t.text FROM Tweets t WHERE t.state=MyState AND t.retweet_count>100 AND is_new(t)}"#;

fn bad() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bad"))
}

fn run(cmd: &mut Command) -> (String, String, bool) {
    let out = cmd.output().expect("spawn bad");
    (
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
        out.status.success(),
    )
}

#[test]
fn parse_prints_normalized_ddl_and_classes() {
    let dir = tempfile::tempdir().unwrap();
    let ddl = dir.path().join("channel.ddl");
    fs::write(&ddl, DDL).unwrap();

    let (stdout, stderr, ok) = run(bad().arg("parse").arg(&ddl));
    assert!(ok, "stderr: {stderr}");
    assert!(stdout.contains("CREATE CONTINUOUS PUSH CHANNEL HotTopics"), "{stdout}");
    assert!(stdout.contains("1 fixed, 1 parameterized, 0 join, freshness: true"), "{stdout}");

    let (json_out, _, ok) = run(bad().arg("parse").arg(&ddl).arg("--json"));
    assert!(ok);
    let doc: serde_json::Value = serde_json::from_str(&json_out).unwrap();
    assert_eq!(doc["definition"]["name"], "HotTopics");
}

#[test]
fn parse_rejects_bad_ddl() {
    let dir = tempfile::tempdir().unwrap();
    let ddl = dir.path().join("broken.ddl");
    fs::write(&ddl, "CREATE CONTINUOUS PUSH oops").unwrap();
    let (_, stderr, ok) = run(bad().arg("parse").arg(&ddl));
    assert!(!ok);
    assert!(!stderr.is_empty());
}

#[test]
fn run_executes_channel_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let ddl = dir.path().join("channel.ddl");
    let data = dir.path().join("tweets.ndjson");
    let subs = dir.path().join("subs.txt");
    fs::write(&ddl, DDL).unwrap();
    let mut lines = Vec::new();
    for pk in 0..100u64 {
        let state = if pk % 2 == 0 { "CA" } else { "TX" };
        let retweets = if pk % 4 < 2 { 500 } else { 5 };
        lines.push(format!(
            r#"{{"pk":{pk},"fields":{{"state":"{state}","retweet_count":{retweets},"text":"t{pk}"}}}}"#
        ));
    }
    fs::write(&data, lines.join("\n")).unwrap();
    fs::write(
        &subs,
        "SUBSCRIBE TO HotTopics(\"CA\") ON brokerA\nSUBSCRIBE TO HotTopics(\"TX\") ON brokerA\n",
    )
    .unwrap();

    let (stdout, stderr, ok) = run(bad()
        .arg("run")
        .args(["--mode", "aggregated-subs", "--executions", "2"])
        .arg("--ddl")
        .arg(&ddl)
        .arg("--data")
        .arg(&data)
        .arg("--subs")
        .arg(&subs));
    assert!(ok, "stderr: {stderr}");
    assert!(stderr.contains("ingested 100 records into Tweets"), "{stderr}");
    assert!(stdout.contains("execution 0:"), "{stdout}");
    assert!(stdout.contains("execution 1:"), "{stdout}");
    // 50 records pass the fixed predicate, half per state; one message per
    // state group in the first window, none in the second.
    assert!(stdout.contains("results 50, messages 2"), "{stdout}");
    assert!(stdout.contains("results 0, messages 0"), "{stdout}");
    assert!(stdout.contains("in-process brokers: 2 messages"), "{stdout}");
}

#[test]
fn bench_list_names_every_experiment() {
    let (stdout, _, ok) = run(bad().args(["bench", "list"]));
    assert!(ok);
    for name in ["subgroup-sweep", "plan-modes", "selectivity", "capacity", "scaling"] {
        assert!(stdout.lines().any(|l| l == name), "missing {name}");
    }
}

#[test]
fn bench_run_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    let out = dir.path().join("rows.csv");
    fs::write(
        &config,
        "subscriptions = 256\nrecords_per_sec = 50\nduration_secs = 2\nreps = 1\n",
    )
    .unwrap();
    let (_, stderr, ok) = run(bad()
        .args(["bench", "run", "plan-modes", "--seed", "7"])
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out));
    assert!(ok, "stderr: {stderr}");
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "experiment,mode,param,rep,wall_ms,records_scanned,results,bytes_delivered"
    );
    // 5 fractions x 2 modes x 1 rep.
    assert_eq!(lines.count(), 10);
}

#[test]
fn bench_run_rejects_unknown_experiment() {
    let (_, _, ok) = run(bad().args(["bench", "run", "nope"]));
    assert!(!ok);
}
