//! The `glove` binary: subcommands, exit codes and the diagnostics split.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn glove(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_glove"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let o = glove(args, dir);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
    stdout(&o)
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Workspace {
        let ws = Workspace {
            dir: tempfile::tempdir().unwrap(),
        };
        ok(&["calibrate", "--out", "cal.txt", "--seed", "1"], ws.path());
        ws
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn model(&self) {
        ok(
            &["train", "--out", "words.dtree", "--per-class", "60", "--seed", "2"],
            self.path(),
        );
    }
}

#[test]
fn simulate_alphabet_hold_writes_forty_samples() {
    let ws = Workspace::new();
    let out = ok(
        &[
            "simulate",
            "--script",
            "alphabet:A",
            "--hold",
            "2s",
            "--trace-out",
            "a.trace",
        ],
        ws.path(),
    );
    assert_eq!(out.trim(), "40 samples");
    assert_eq!(fs::read_to_string(ws.file("a.trace")).unwrap().lines().count(), 40);
}

#[test]
fn simulate_word_has_moving_gyro() {
    let ws = Workspace::new();
    ok(&["simulate", "--script", "word:hello", "--out", "h.trace"], ws.path());
    let text = fs::read_to_string(ws.file("h.trace")).unwrap();
    let moving = text
        .lines()
        .any(|l| l.split(',').skip(9).any(|g| g.parse::<f64>().unwrap().abs() > 50.0));
    assert!(moving);
}

#[test]
fn simulate_is_reproducible_with_seed() {
    let ws = Workspace::new();
    let a = ok(&["simulate", "--script", "word:Z+alphabet:B", "--seed", "9"], ws.path());
    let b = ok(&["simulate", "--script", "word:Z+alphabet:B", "--seed", "9"], ws.path());
    let c = ok(
        &["simulate", "--script", "word:Z+alphabet:B", "--seed", "10"],
        ws.path(),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    for args in [
        vec!["simulate", "--script", "dance:X"],
        vec!["simulate", "--script", "alphabet:J"],
        vec!["simulate", "--script", "alphabet:A", "--hold", "soon"],
        vec!["frobnicate"],
        vec!["run"],
    ] {
        let o = glove(&args, ws.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn calibration_file_has_one_line_per_finger() {
    let ws = Workspace::new();
    let text = fs::read_to_string(ws.file("cal.txt")).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split(':').next().unwrap()).collect();
    assert_eq!(names, ["thumb", "index", "middle", "ring", "little"]);
    for line in text.lines() {
        let values = line.split(':').nth(1).unwrap();
        assert!(
            values.split(',').all(|v| v.split('.').nth(1).unwrap().len() == 2),
            "{line}"
        );
    }
}

#[test]
fn calibrate_from_trace_matches_generated_config() {
    let ws = Workspace::new();
    ok(
        &["simulate", "--script", "config", "--out", "cfg.trace", "--seed", "1"],
        ws.path(),
    );
    ok(&["calibrate", "--trace", "cfg.trace", "--out", "cal2.txt"], ws.path());
    let a = fs::read_to_string(ws.file("cal.txt")).unwrap();
    let b = fs::read_to_string(ws.file("cal2.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn calibrating_a_static_hold_collapses() {
    let ws = Workspace::new();
    fs::write(ws.file("quiet.profile"), "noise_sigma_adc=0\n").unwrap();
    ok(
        &[
            "simulate",
            "--script",
            "alphabet:A@10s",
            "--out",
            "a.trace",
            "--profile",
            "quiet.profile",
        ],
        ws.path(),
    );
    let o = glove(&["calibrate", "--trace", "a.trace", "--out", "bad.txt"], ws.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("thumb"), "{}", stderr(&o));
}

#[test]
fn run_without_calibration_exits_3() {
    let ws = Workspace::new();
    ok(&["simulate", "--script", "alphabet:A", "--out", "a.trace"], ws.path());
    let o = glove(&["run", "--trace", "a.trace"], ws.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("configuring phase"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn run_spells_a_held_letter_once() {
    let ws = Workspace::new();
    ok(
        &["simulate", "--script", "alphabet:A", "--out", "a.trace", "--seed", "4"],
        ws.path(),
    );
    let o = glove(&["run", "--trace", "a.trace", "--calibration", "cal.txt"], ws.path());
    assert!(o.status.success());
    assert_eq!(stdout(&o), "OUT;alphabet;A;29\n");
    assert!(stderr(&o).contains("warning"));
}

#[test]
fn run_without_model_never_emits_words() {
    let ws = Workspace::new();
    ok(
        &["simulate", "--script", "word:hello+word:J", "--out", "w.trace"],
        ws.path(),
    );
    let o = glove(&["run", "--trace", "w.trace", "--calibration", "cal.txt"], ws.path());
    assert!(o.status.success());
    assert!(!stdout(&o).contains("OUT;word"));
    assert!(stderr(&o).contains("no word model"));
}

#[test]
fn injected_garbage_lines_do_not_change_emissions() {
    let ws = Workspace::new();
    ws.model();
    ok(
        &[
            "simulate",
            "--script",
            "alphabet:C+word:goodbye+alphabet:W+shake+alphabet:W",
            "--out",
            "m.trace",
            "--seed",
            "8",
        ],
        ws.path(),
    );
    let clean = fs::read_to_string(ws.file("m.trace")).unwrap();
    let mut dirty = String::new();
    for (i, line) in clean.lines().enumerate() {
        dirty.push_str(line);
        dirty.push('\n');
        if i % 100 == 50 {
            dirty.push_str(["garbage", "1,2,3", "50,1,2,3,4,5,0.1,0.1,x,0,0,0"][i % 3]);
            dirty.push('\n');
        }
    }
    fs::write(ws.file("dirty.trace"), dirty).unwrap();
    let args = |t: &'static str| {
        [
            "run",
            "--trace",
            t,
            "--calibration",
            "cal.txt",
            "--model",
            "words.dtree",
        ]
    };
    let a = glove(&args("m.trace"), ws.path());
    let b = glove(&args("dirty.trace"), ws.path());
    assert!(b.status.success());
    assert_eq!(stdout(&a), stdout(&b));
    assert!(stdout(&a).lines().count() >= 4, "{}", stdout(&a));
    assert!(stderr(&b).contains("skipped"));
}

#[test]
fn run_accepts_wire_frames_on_stdin() {
    use std::io::Write;
    use std::process::Stdio;
    let ws = Workspace::new();
    let mut lines = String::from("CMD;calibrate\n");
    for seq in 0..40 {
        lines.push_str(&format!("E;{seq};233330;0.000,-1.000,0.000;0.000,0.000,0.000\n"));
    }
    let mut child = Command::new(env!("CARGO_BIN_EXE_glove"))
        .args(["run", "--frames", "-", "--calibration", "cal.txt"])
        .current_dir(ws.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(lines.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success());
    assert_eq!(stdout(&o), "OUT;alphabet;A;29\n");
    assert!(stderr(&o).contains("ERR;already-calibrated"));
}

#[test]
fn train_and_eval_word_corpus() {
    let ws = Workspace::new();
    let report = ok(
        &["train", "--out", "words.dtree", "--per-class", "100", "--seed", "3"],
        ws.path(),
    );
    assert!(report.starts_with("TRAIN;"), "{report}");
    let model = fs::read_to_string(ws.file("words.dtree")).unwrap();
    assert!(model.lines().any(|l| l == "version 1"), "{model}");

    ok(
        &[
            "simulate",
            "--corpus",
            "words",
            "--per-class",
            "20",
            "--out",
            "held",
            "--seed",
            "99",
        ],
        ws.path(),
    );
    let out = ok(
        &[
            "eval",
            "--corpus",
            "held",
            "--calibration",
            "cal.txt",
            "--model",
            "words.dtree",
        ],
        ws.path(),
    );
    let summary = out.lines().last().unwrap();
    let acc: f64 = summary
        .strip_prefix("EVAL;acc=")
        .and_then(|s| s.split(';').next())
        .unwrap()
        .parse()
        .unwrap();
    assert!(summary.ends_with(";n=140"), "{summary}");
    assert!(acc >= 0.9, "{out}");
    for label in ["hello", "sorry", "thankyou", "goodbye", "J", "Z", "none"] {
        assert!(out.lines().any(|l| l.starts_with(label)), "{label} missing from\n{out}");
    }
}

#[test]
fn eval_zero_noise_alphabet_is_perfect() {
    let ws = Workspace::new();
    fs::write(
        ws.file("quiet.profile"),
        "noise_sigma_adc=0\naccel_noise_g=0\ngyro_noise_dps=0\n",
    )
    .unwrap();
    ok(
        &[
            "simulate",
            "--corpus",
            "alphabet",
            "--per-class",
            "1",
            "--out",
            "alpha",
            "--profile",
            "quiet.profile",
        ],
        ws.path(),
    );
    let out = ok(&["eval", "--corpus", "alpha", "--calibration", "cal.txt"], ws.path());
    assert!(out.ends_with("EVAL;acc=1.0000;n=24\n"), "{out}");
}

#[test]
fn eval_names_unknown_manifest_label() {
    let ws = Workspace::new();
    ok(
        &["simulate", "--corpus", "alphabet", "--per-class", "1", "--out", "alpha"],
        ws.path(),
    );
    let manifest = ws.file("alpha/manifest.txt");
    let mut text = fs::read_to_string(&manifest).unwrap();
    text.push_str("A_0.trace wave\n");
    fs::write(&manifest, text).unwrap();
    let o = glove(&["eval", "--corpus", "alpha", "--calibration", "cal.txt"], ws.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("\"wave\""), "{}", stderr(&o));
}

#[test]
fn eval_missing_or_empty_corpus() {
    let ws = Workspace::new();
    fs::create_dir(ws.file("empty")).unwrap();
    let o = glove(&["eval", "--corpus", "empty", "--calibration", "cal.txt"], ws.path());
    assert_eq!(o.status.code(), Some(3));
    fs::write(ws.file("empty/manifest.txt"), "# nothing\n").unwrap();
    let o = glove(&["eval", "--corpus", "empty", "--calibration", "cal.txt"], ws.path());
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("empty"));
}

#[test]
fn config_file_is_read_and_flags_override_it() {
    let ws = Workspace::new();
    fs::write(ws.file("session.cfg"), "rate_hz=10\nseed=5\n").unwrap();
    let out = ok(
        &[
            "simulate",
            "--script",
            "alphabet:B",
            "--out",
            "b.trace",
            "--config",
            "session.cfg",
        ],
        ws.path(),
    );
    assert_eq!(out.trim(), "20 samples");
    let out = ok(
        &[
            "simulate",
            "--script",
            "alphabet:B",
            "--out",
            "b.trace",
            "--config",
            "session.cfg",
            "--rate",
            "40",
        ],
        ws.path(),
    );
    assert_eq!(out.trim(), "80 samples");
    fs::write(ws.file("bad.cfg"), "rate_hz=-1\n").unwrap();
    let o = glove(
        &["simulate", "--script", "alphabet:B", "--config", "bad.cfg"],
        ws.path(),
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn export_templates_is_json() {
    let ws = Workspace::new();
    let out = ok(&["export-templates"], ws.path());
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["letters"].as_array().unwrap().len(), 24);
    assert_eq!(doc["rate_hz"], 20.0);
    let motions: Vec<&str> = doc["motions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["name"].as_str().unwrap())
        .collect();
    for name in ["hello", "sorry", "thankyou", "goodbye", "J", "Z"] {
        assert!(motions.contains(&name), "{motions:?}");
    }
}
