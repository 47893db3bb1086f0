use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kanae::data::{synthetic_heartbeats, write_ucr};

fn kanae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kanae"))
        .args(args)
        .env_remove("KANAE_OUT")
        .output()
        .unwrap()
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

/// A tiny dataset plus a config file; returns the config path.
fn fixture(dir: &Path, extra: &str) -> PathBuf {
    write_ucr(&dir.join("train.tsv"), &synthetic_heartbeats(6, 6, 48, 1)).unwrap();
    write_ucr(&dir.join("test.tsv"), &synthetic_heartbeats(5, 5, 48, 2)).unwrap();
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "[data]\ntrain = \"train.tsv\"\ntest = \"test.tsv\"\n\n[model]\nfamily = \"kcae\"\ninput_length = 48\n\
             latent_dim = 4\nchannels = [2, 4]\n\n[train]\nepochs = 2\nseed = 3\n\n[output]\ndir = \"{}\"\n{extra}",
            dir.join("out").display()
        ),
    )
    .unwrap();
    cfg
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn missing_data_path_is_a_config_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[data]\ntest = \"nowhere.tsv\"\n").unwrap();
    let o = kanae(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
    let t = text(&o);
    assert!(t.contains("data.train"), "{t}");
    assert!(t.contains("data.test"), "{t}");
}

#[test]
fn unknown_keys_and_bad_values_are_all_listed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "");
    let o = kanae(&["train", "--config", cfg.to_str().unwrap(), "--train.epochs=0", "--model.colour=1"]);
    assert_eq!(o.status.code(), Some(2));
    let t = text(&o);
    assert!(t.contains("model.colour") && t.contains("train.epochs"), "{t}");
}

#[test]
fn train_writes_a_report_and_flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "");
    let o = kanae(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let run = dir.path().join("out/reconstruction/kcae/seed03");
    for f in ["report.json", "losses_train.csv", "losses_test.csv", "latent_test.csv", "model.ckpt", "config.toml"] {
        assert!(run.join(f).exists(), "{f}");
    }
    assert_eq!(report(&run.join("report.json"))["seed"], 3);

    let o = kanae(&["train", "--config", cfg.to_str().unwrap(), "--seed", "7", "--task.name=anomaly"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let r = report(&dir.path().join("out/anomaly/kcae/seed07/report.json"));
    assert_eq!(r["seed"], 7);
    assert!(r["anomaly"]["auc"].is_number());
}

#[test]
fn rerunning_a_written_config_reproduces_the_losses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "");
    assert_eq!(kanae(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let run = dir.path().join("out/reconstruction/kcae/seed03");
    let first = std::fs::read_to_string(run.join("report.json")).unwrap();
    std::fs::create_dir(dir.path().join("elsewhere")).unwrap();
    let saved = dir.path().join("elsewhere/saved.toml");
    std::fs::copy(run.join("config.toml"), &saved).unwrap();
    let o = kanae(&["train", "--config", saved.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let second = std::fs::read_to_string(run.join("report.json")).unwrap();
    let losses = |s: &str| {
        let v: kanae::tasks::TaskReport = serde_json::from_str(s).unwrap();
        serde_json::to_string(&v.loss_fields()).unwrap()
    };
    assert_eq!(losses(&first), losses(&second));
}

#[test]
fn bench_writes_every_run_and_refuses_to_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "\n[bench]\nfamilies = [\"ae\", \"kae\", \"cae\", \"kcae\"]\ntasks = [\"denoising\"]\n");
    let args = ["bench", "--config", cfg.to_str().unwrap(), "--train.seeds=[0, 1]", "--model.hidden=[16]", "--jobs", "2"];
    let o = kanae(&args);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let out = dir.path().join("out");
    let mut runs = 0;
    for family in ["ae", "kae", "cae", "kcae"] {
        for seed in ["seed00", "seed01"] {
            assert!(out.join("denoising").join(family).join(seed).join("report.json").exists());
            runs += 1;
        }
    }
    assert_eq!(runs, 8);
    let table = kanae::tasks::efficiency::read_table_csv(&out.join("efficiency.csv")).unwrap();
    assert_eq!(table.len(), 8);
    assert!(out.join("summary.md").exists());

    let o = kanae(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert_eq!(kanae(&forced).status.code(), Some(0));
}

#[test]
fn gradcheck_passes_and_detects_a_corrupted_gradient() {
    let o = kanae(&["gradcheck", "--small"]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let t = String::from_utf8_lossy(&o.stdout).to_string();
    for layer in ["linear", "conv1d", "conv_transpose1d", "batchnorm", "kan_linear", "kan_conv1d", "model_kcae"] {
        let rows = t.lines().filter(|l| l.split_whitespace().next() == Some(layer)).count();
        assert_eq!(rows, 1, "{layer}\n{t}");
    }
    let o = kanae(&["gradcheck", "--small", "--corrupt-gradient"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn inspect_prints_checkpoint_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "");
    assert_eq!(kanae(&["train", "--config", cfg.to_str().unwrap()]).status.code(), Some(0));
    let ckpt = dir.path().join("out/reconstruction/kcae/seed03/model.ckpt");
    let o = kanae(&["inspect", ckpt.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", text(&o));
    let meta: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(meta.is_object());
    let o = kanae(&["inspect", dir.path().join("missing.ckpt").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
