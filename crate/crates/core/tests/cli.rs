use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TOY_CONFIG: &str = "\
# small corpus for quick end-to-end runs
seed = 11
ladder = 1,2
n_perm = 99
epochs = 10
pixels_per_sample = 3000
synth.width = 128
synth.height = 128
synth.stroke_width_um = 6
";

fn reliefscan(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reliefscan"))
        .args(args)
        .current_dir(dir)
        .env("RELIEFSCAN_THREADS", "2")
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn setup(extra: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.cfg"), format!("{TOY_CONFIG}{extra}")).unwrap();
    dir
}

fn result_csvs(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("results_"))
        .collect();
    names.sort();
    names
}

#[test]
fn full_pipeline_writes_every_artifact_and_is_reproducible() {
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let dir = setup("out_dir = out\n");
        let d = dir.path();
        let synth = ok(&reliefscan(&["synth", "--config", "run.cfg"], d));
        assert!(synth.contains("14 samples from 3 papyri"), "{synth}");
        assert!(d.join("out/corpus/manifest.csv").exists());

        let run = ok(&reliefscan(&["run", "--config", "run.cfg", "--regimes", "matched,cross_res"], d));
        for line in run.lines().filter(|l| l.ends_with(".csv")) {
            assert!(d.join(line).exists(), "{line}");
        }
        assert_eq!(result_csvs(&d.join("out")), ["results_cross_res.csv", "results_matched.csv"]);
        assert_eq!(fs::read_to_string(d.join("out/config.txt")).unwrap(), format!("{TOY_CONFIG}out_dir = out\n"));

        let stats = ok(&reliefscan(&["stats", "--config", "run.cfg", "--regimes", "matched,cross_res"], d));
        assert!(stats.contains("stats.json"), "{stats}");
        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(d.join("out/stats.json")).unwrap()).unwrap();
        assert_eq!(json["regimes"].as_array().unwrap().len(), 2);
        assert!(json["missingness"]["n"].as_u64() == Some(14));

        let report = ok(&reliefscan(&["report", "--config", "run.cfg", "--regimes", "matched,cross_res"], d));
        assert!(report.contains("fig_dice_vs_pitch.svg"), "{report}");
        let svg = fs::read_to_string(d.join("out/fig_dice_vs_pitch.svg")).unwrap();
        assert_eq!(svg.matches(r#"class="box""#).count(), 4);
        assert!(fs::read_to_string(d.join("out/summary.md")).unwrap().contains("| 0.68 |"));

        let files = ["results_matched.csv", "results_cross_res.csv", "missingness.csv", "stats.json", "stats_pairwise.csv", "summary.csv", "fig_dice_vs_pitch.svg"];
        bytes.push(files.map(|f| fs::read(d.join("out").join(f)).unwrap()));
    }
    assert!(bytes[0] == bytes[1], "reruns differ");
}

#[test]
fn single_regime_emits_one_results_csv() {
    let dir = setup("out_dir = out\nladder = 1\n");
    let d = dir.path();
    ok(&reliefscan(&["synth", "--config", "run.cfg"], d));
    ok(&reliefscan(&["run", "--config", "run.cfg", "--regimes", "matched"], d));
    assert_eq!(result_csvs(&d.join("out")), ["results_matched.csv"]);
}

#[test]
fn flags_override_config() {
    let dir = setup("");
    let d = dir.path();
    let out = ok(&reliefscan(&["synth", "--config", "run.cfg", "--seed", "4", "--out", "elsewhere"], d));
    assert!(out.contains("elsewhere/corpus/manifest.csv"), "{out}");
    let eff = fs::read_to_string(d.join("elsewhere/corpus/effective_config.txt")).unwrap();
    assert!(eff.contains("seed = 4\n"), "{eff}");
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = setup("out_dir = out\nbogus = 1\n");
    let d = dir.path();
    let out = reliefscan(&["synth", "--config", "run.cfg"], d);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 11") && err.contains("bogus"), "{err}");

    fs::write(d.join("run.cfg"), TOY_CONFIG).unwrap();
    let out = reliefscan(&["stats", "--config", "run.cfg", "--out", "empty"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("results_matched.csv"));

    let out = reliefscan(&["run", "--config", "run.cfg", "--out", "empty"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest.csv"));

    let out = reliefscan(&["run", "--ladder", "4,2"], d);
    assert!(!out.status.success());
}
