use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lfx_core::landmark_data::{write_csv, write_manifest, Label};
use lfx_core::synth::{generate, generate_video, SynthConfig};

fn lfx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lfx"))
        .args(args)
        .env("LFX_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small model so training runs take seconds.
const SMALL_MODELS: &str = r#"
[model]
lstm_units = [4]
dense_units = [4, 4, 4, 4, 4]
conv_channels = [2, 2]

[training]
rounds = "1:4,1:8"
"#;

#[test]
fn synth_output_is_sized_and_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let args = |out: &Path, seed: &'static str| ["synth", "--n-real", "2", "--n-fake", "3", "--frames", "40", "--seed", seed, "--out", p(out)].map(String::from);
    for (out, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let argv = args(out, seed);
        ok(&lfx(&argv.iter().map(String::as_str).collect::<Vec<_>>()));
    }
    let read = |d: &Path| fs::read(d.join("landmarks.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    assert_eq!(fs::read(a.join("labels.csv")).unwrap(), fs::read(b.join("labels.csv")).unwrap());
    let rows = String::from_utf8(read(&a)).unwrap().lines().count();
    assert_eq!(rows, 1 + 5 * 40);
}

#[test]
fn synth_into_unwritable_path_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = lfx(&["synth", "--n-real", "1", "--n-fake", "1", "--frames", "5", "--out", p(&blocker.join("sub"))]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("lfx: "));
}

fn write_corpus(dir: &Path, lengths: &[(Label, usize)]) {
    let cfg = SynthConfig {
        frames: 1500,
        ..SynthConfig::default()
    };
    let seqs: Vec<_> = lengths
        .iter()
        .enumerate()
        .map(|(i, &(label, len))| {
            let mut s = generate_video(&cfg, label, i);
            s.frames.truncate(len);
            s
        })
        .collect();
    fs::create_dir_all(dir).unwrap();
    write_csv(fs::File::create(dir.join("landmarks.csv")).unwrap(), &seqs).unwrap();
    write_manifest(fs::File::create(dir.join("labels.csv")).unwrap(), &seqs).unwrap();
}

#[test]
fn preprocess_summary_counts_segments_and_drops() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &[(Label::Real, 599), (Label::Fake, 1500), (Label::Real, 720), (Label::Fake, 650)]);
    let stdout = ok(&lfx(&["preprocess", "--out", p(dir.path())]));
    // 599 -> 0, 1500 -> 2, 720 -> 1, 650 -> 1.
    assert_eq!(stdout.trim(), "videos=4 segments=4 dropped=1");
    let meta = fs::read_to_string(dir.path().join("segments/segments.csv")).unwrap();
    assert_eq!(meta.lines().count(), 1 + 4);
}

#[test]
fn preprocess_schema_violation_exits_1_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &[(Label::Real, 3)]);
    let csv = dir.path().join("landmarks.csv");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[2] = lines[2].replacen(',', ",x", 2);
    fs::write(&csv, lines.join("\n") + "\n").unwrap();
    let out = lfx(&["preprocess", "--out", p(dir.path())]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains('3'), "{err}");
}

#[test]
fn missing_inputs_are_environment_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&lfx(&["preprocess", "--out", p(dir.path())])), 2);
    assert_eq!(code(&lfx(&["train", "--out", p(dir.path())])), 2);
    assert_eq!(code(&lfx(&["report", p(&dir.path().join("absent"))])), 2);
    assert_eq!(code(&lfx(&["train", "--config", p(&dir.path().join("absent.toml"))])), 2);
}

#[test]
fn bad_config_and_flags_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[model]\nwidth = 3\n").unwrap();
    assert_eq!(code(&lfx(&["train", "--config", p(&cfg)])), 1);
    let corpus = dir.path().join("corpus");
    ok(&lfx(&["synth", "--n-real", "3", "--n-fake", "3", "--out", p(&corpus)]));
    ok(&lfx(&["preprocess", "--out", p(&corpus)]));
    assert_eq!(code(&lfx(&["train", "--out", p(&corpus), "--rounds", "3"])), 1);
}

#[test]
fn empty_report_dir_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = lfx(&["report", p(dir.path())]);
    assert_eq!(code(&out), 1);
}

#[test]
fn train_replays_and_reports_every_model() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let config = root.join("small.toml");
    fs::write(&config, SMALL_MODELS).unwrap();
    let corpus = root.join("corpus");
    let cfg = SynthConfig {
        n_real: 5,
        n_fake: 5,
        ..SynthConfig::default()
    };
    let seqs = generate(&cfg);
    fs::create_dir_all(&corpus).unwrap();
    write_csv(fs::File::create(corpus.join("landmarks.csv")).unwrap(), &seqs).unwrap();
    write_manifest(fs::File::create(corpus.join("labels.csv")).unwrap(), &seqs).unwrap();
    ok(&lfx(&["preprocess", "--out", p(&corpus)]));
    let segments = corpus.join("segments");

    let runs = root.join("runs");
    let train = |name: &str, extra: &[&str]| {
        let out = runs.join(name);
        let mut args = vec!["train", "--config", p(&config), "--segments", p(&segments), "--out", p(&out), "--seed", "5", "--quiet"];
        args.extend_from_slice(extra);
        let stdout = ok(&lfx(&args));
        for key in ["test_accuracy", "test_precision", "test_recall", "test_f1", "test_roc_auc"] {
            let line = stdout.lines().find(|l| l.starts_with(key)).expect(key);
            let v: f64 = line.split('=').nth(1).unwrap().parse().unwrap();
            assert!((0.0..=1.0).contains(&v), "{line}");
        }
        for file in ["report.txt", "model.ckpt", "config.toml"] {
            assert!(out.join(file).is_file(), "{name}: {file}");
        }
        out
    };
    let a = train("rnn", &["--model", "rnn"]);
    let replay = root.join("replay");
    let b = {
        let mut args = vec!["train", "--config", p(&config), "--segments", p(&segments), "--out", p(&replay), "--seed", "5", "--quiet"];
        args.extend_from_slice(&["--model", "rnn"]);
        ok(&lfx(&args));
        replay.clone()
    };
    for file in ["report.txt", "model.ckpt"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs on replay");
    }
    // A run's written config replays it without any flags.
    let again = root.join("again");
    ok(&lfx(&["train", "--config", p(&a.join("config.toml")), "--out", p(&again), "--quiet"]));
    assert_eq!(fs::read(a.join("report.txt")).unwrap(), fs::read(again.join("report.txt")).unwrap());

    train("ann", &["--model", "ann", "--epochs", "2", "--batch-size", "3"]);
    train("cnn", &["--model", "cnn", "--raster-res", "8", "--epochs", "1", "--noise-sigma", "0.05"]);

    let report = fs::read_to_string(runs.join("ann/report.txt")).unwrap();
    assert!(report.contains("rounds=2:3"), "{report}");
    let cnn = fs::read_to_string(runs.join("cnn/report.txt")).unwrap();
    assert!(cnn.contains("raster_resolution=8") && cnn.contains("noise_sigma=0.05"), "{cnn}");

    let table = ok(&lfx(&["report", p(&runs)]));
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 4, "{table}");
    let header: Vec<&str> = lines[0].split_whitespace().collect();
    assert_eq!(header, ["run", "model", "accuracy", "precision", "recall", "f1", "roc_auc"]);
    let models: Vec<&str> = lines[1..].iter().map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(models, ["ann", "cnn", "rnn"]);
}

#[test]
fn dump_images_writes_one_pgm_per_channel_and_splice() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), &[(Label::Fake, 720)]);
    ok(&lfx(&["preprocess", "--out", p(dir.path())]));
    let images = dir.path().join("images");
    let stdout = ok(&lfx(&["dump-images", "--segments", p(&dir.path().join("segments")), "--out", p(&images), "--raster-res", "8"]));
    assert!(stdout.contains("30 images"), "{stdout}");
    let files: Vec<_> = fs::read_dir(&images).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(files.len(), 30 * 68);
    assert!(files.contains(&"fake_000-0_29_67.pgm".to_string()), "{:?}", &files[..3]);
    let pgm = fs::read(images.join("fake_000-0_0_0.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n8 8\n255\n"));
    assert_eq!(pgm.len(), b"P5\n8 8\n255\n".len() + 64);
}
