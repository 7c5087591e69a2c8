use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use psytest_core::format::parse_test;
use psytest_core::session_log::load_session_file;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn psytest(args: &[&str], stdin: &str, data_dir: &Path) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_psytest"))
        .args(args)
        .env("PSYTEST_DATA_DIR", data_dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn validate_good_and_gap() {
    let dir = tempfile::tempdir().unwrap();
    let good = psytest(
        &[
            "generate",
            "validate",
            fixture("yes_no.ptest.json").to_str().unwrap(),
        ],
        "",
        dir.path(),
    );
    assert_eq!(good.status.code(), Some(0), "{}", text(&good.stderr));

    let gap = psytest(
        &[
            "generate",
            "validate",
            fixture("gap.ptest.json").to_str().unwrap(),
        ],
        "",
        dir.path(),
    );
    assert_eq!(gap.status.code(), Some(1));
    assert!(text(&gap.stderr).contains("ORDINAL_GAP"));
}

#[test]
fn add_item_renumbers_and_still_validates() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.ptest.json");
    std::fs::copy(fixture("yes_no.ptest.json"), &file).unwrap();
    let f = file.to_str().unwrap();
    let out = psytest(
        &[
            "generate",
            "add-item",
            f,
            "--pos",
            "2",
            "--text",
            "I sleep well.",
        ],
        "",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let out = psytest(&["generate", "validate", f], "", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    // The new item is inert, which is only a warning.
    assert!(text(&out.stderr).contains("INERT_ITEM"));

    let doc = parse_test(&std::fs::read(&file).unwrap()).unwrap();
    let order: Vec<(&str, u32)> = doc
        .test
        .items_in_order()
        .iter()
        .map(|i| (i.text.as_str(), i.ordinal))
        .collect();
    assert_eq!(order[1], ("I sleep well.", 2));
    assert_eq!(doc.test.item(&"q2".into()).unwrap().ordinal, 3);
    assert_eq!(doc.test.item(&"q3".into()).unwrap().ordinal, 4);
}

#[test]
fn generator_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("t.ptest.json");
    std::fs::copy(fixture("yes_no.ptest.json"), &file).unwrap();
    let f = file.to_str().unwrap();
    let out = psytest(
        &[
            "generate",
            "set-bands",
            f,
            "--category",
            "pos",
            "--boundaries",
            "0,1,2",
            "--text",
            "a",
            "--text",
            "b",
        ],
        "",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("achievable scores span [0, 3]"));
    let out = psytest(
        &["generate", "del-item", f, "--ordinal", "9"],
        "",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
    // Failed edits leave the file untouched.
    assert_eq!(
        std::fs::read(&file).unwrap(),
        std::fs::read(fixture("yes_no.ptest.json")).unwrap()
    );
}

#[test]
fn run_appends_one_record_and_shows_interpretation() {
    let dir = tempfile::tempdir().unwrap();
    let t = fixture("yes_no.ptest.json");
    let out = psytest(
        &[
            "run",
            "--test",
            t.to_str().unwrap(),
            "--show-interpretation",
        ],
        "F\n34\n1\n1\n1\n",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("Answer each statement with Yes or No."));
    assert!(stdout.contains("Mostly positive answers."));

    let log = dir.path().join("psytest.sessions.ndjson");
    let loaded = load_session_file(&log, true).unwrap();
    assert_eq!(loaded.records.len(), 1);
    assert_eq!(loaded.records[0].result.categories[0].raw_score, 3.into());
}

#[test]
fn interrupted_run_leaves_log_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let t = fixture("yes_no.ptest.json");
    let out = psytest(
        &["run", "--test", t.to_str().unwrap()],
        "F\n34\n1\n",
        dir.path(),
    );
    assert_ne!(out.status.code(), Some(0));
    assert!(!dir.path().join("psytest.sessions.ndjson").exists());
}

#[test]
fn stats_with_no_sessions() {
    let dir = tempfile::tempdir().unwrap();
    let t = fixture("yes_no.ptest.json");
    let out = psytest(
        &["stats", "summary", "--test", t.to_str().unwrap()],
        "",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).trim(), "no sessions");
}

#[test]
fn stats_summary_and_export_after_runs() {
    let dir = tempfile::tempdir().unwrap();
    let t = fixture("yes_no.ptest.json");
    let t = t.to_str().unwrap();
    for (i, script) in ["M\n40\n2\n2\n2\n", "F\n22\n1\n2\n1\n"].iter().enumerate() {
        let id = format!("s{i}");
        let out = psytest(
            &["run", "--test", t, "--session-id", &id],
            script,
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    }
    let out = psytest(&["stats", "summary", "--test", t], "", dir.path());
    let stdout = text(&out.stdout);
    assert!(
        stdout.contains("n=2 mean=1 std_dev=1 min=0 max=2"),
        "{stdout}"
    );

    let out = psytest(
        &["stats", "export", "--format", "csv", "--test", t],
        "",
        dir.path(),
    );
    assert_eq!(
        text(&out.stdout),
        "session_id,sex,age,1,2,3,pos_raw,pos_band\ns0,M,40,1,1,1,0,1\ns1,F,22,0,1,0,2,2\n"
    );

    let csv_path = dir.path().join("summary.csv");
    let out = psytest(
        &[
            "stats",
            "export",
            "--test",
            t,
            "--table",
            "summary",
            "--out",
            csv_path.to_str().unwrap(),
        ],
        "",
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(csv_path).unwrap();
    assert!(csv.starts_with("category_id,category,n,mean,std_dev_population,"));
}
