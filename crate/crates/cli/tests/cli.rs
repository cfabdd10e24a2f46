use std::path::Path;
use std::process::{Command, Output};

fn blindeq(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blindeq"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("BLINDEQ_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path).expect("readable output")
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

const QUICK: [&str; 6] = ["--test-len", "1000", "--max-updates", "3000", "--seed", "3"];

#[test]
fn ser_vs_snr_writes_results_summary_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ser-vs-snr", "--channel", "h1", "--snr", "10:10:1", "--train", "500", "--trials", "1"];
    args.extend(QUICK);
    let o = blindeq(&args, dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let results = read(dir.path().join("results.csv"));
    assert_eq!(
        results.lines().next().unwrap(),
        "equalizer,channel,snr_db,trial,ser,rotation_deg,delay,updates,hhat_distance,wall_time_s,failed"
    );
    let names: Vec<String> = rows(&results).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(names, ["vae", "cma", "mmse"]);
    let summary = read(dir.path().join("results_summary.csv"));
    assert_eq!(summary.lines().next().unwrap(), "equalizer,channel,snr_db,mean_ser,median_ser,trials,failures");
    assert_eq!(summary.lines().count(), 4);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest"))).unwrap();
    assert_eq!(manifest["config"]["command"], "ser-vs-snr");
    assert_eq!(manifest["base_seed"], 3);
    assert_eq!(manifest["config"]["arms"][0]["vae"]["subseq_len"], 128);
}

#[test]
fn rerun_from_manifest_is_byte_identical_at_any_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a");
    let mut args = vec!["--jobs", "1", "ser-vs-snr", "--snr", "6:10:4", "--train", "300", "--trials", "2"];
    args.extend(QUICK);
    assert_eq!(code(&blindeq(&args, &first)), 0);
    let second = dir.path().join("b");
    let manifest = first.join("manifest");
    let o = blindeq(&["--jobs", "4", "rerun", manifest.to_str().unwrap()], &second);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["results.csv", "results_summary.csv"] {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap());
    }
}

#[test]
fn unknown_channel_is_a_usage_error_listing_presets() {
    let dir = tempfile::tempdir().unwrap();
    let o = blindeq(&["ser-vs-snr", "--channel", "h7"], dir.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("h1, h2, h3"), "{err}");
}

#[test]
fn tap_file_channels_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let taps = dir.path().join("mine.tsv");
    std::fs::write(&taps, "0.1\t0\n1\t0.2\n-0.2\t0.1\n").unwrap();
    let mut args = vec!["ser-vs-snr", "--channel", taps.to_str().unwrap(), "--snr", "10", "--train", "300", "--trials", "1", "--equalizers", "mmse"];
    args.extend(QUICK);
    let out = dir.path().join("o");
    assert_eq!(code(&blindeq(&args, &out)), 0);
    assert!(read(out.join("results.csv")).contains("mmse,mine,10,0,"));
    std::fs::write(&taps, "0.1\t0\nbad\n").unwrap();
    assert_eq!(code(&blindeq(&args, &out)), 1);
}

#[test]
fn ser_vs_train_cells_and_subseq_rule() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["ser-vs-train", "--snr", "10", "--sizes", "50,200", "--trials", "1"];
    args.extend(QUICK);
    assert_eq!(code(&blindeq(&args, dir.path())), 0);
    let names: Vec<String> = rows(&read(dir.path().join("results.csv"))).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(names, ["vae[L=50]", "cma[L=50]", "mmse[L=50]", "vae[L=200]", "cma[L=200]", "mmse[L=200]"]);
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path().join("manifest"))).unwrap();
    assert_eq!(manifest["config"]["arms"][0]["vae"]["subseq_len"], 50);
    assert_eq!(manifest["config"]["arms"][1]["vae"]["subseq_len"], 128);
    assert_eq!(code(&blindeq(&["ser-vs-train", "--sizes", ""], dir.path())), 2);
}

#[test]
fn hhat_robustness_curves_and_odd_lengths() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["hhat-robustness", "--lengths", "5,9", "--snr", "10", "--train", "500", "--trials", "2"];
    args.extend(QUICK);
    assert_eq!(code(&blindeq(&args, dir.path())), 0);
    let table = rows(&read(dir.path().join("results.csv")));
    let names: Vec<&str> = table.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(names, ["vae[hhat=5]", "vae[hhat=5]", "vae[hhat=9]", "vae[hhat=9]"]);
    for r in &table {
        assert_eq!(r[10], "0");
        assert!(r[8].parse::<f64>().unwrap() >= 0.0);
    }
    assert_eq!(code(&blindeq(&["hhat-robustness", "--lengths", "6"], dir.path())), 2);
}

#[test]
fn convergence_rows_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["convergence", "--subseq", "10,128", "--snr", "8:10:2", "--train", "500", "--trials", "1"];
    args.extend(QUICK);
    assert_eq!(code(&blindeq(&args, dir.path())), 0);
    let keys: Vec<(String, String)> = rows(&read(dir.path().join("results.csv")))
        .into_iter()
        .map(|r| {
            assert!(r[7].parse::<usize>().unwrap() > 0);
            (r[0].clone(), r[2].clone())
        })
        .collect();
    let want = [("vae[N=10]", "8"), ("vae[N=10]", "10"), ("vae[N=128]", "8"), ("vae[N=128]", "10")];
    assert_eq!(keys, want.map(|(a, b)| (a.to_string(), b.to_string())));
    assert_eq!(code(&blindeq(&["convergence", "--subseq", "0"], dir.path())), 2);
}

#[test]
fn bad_flags_exit_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&blindeq(&["ser-vs-snr", "--trials", "many"], dir.path())), 2);
    assert_eq!(code(&blindeq(&["ser-vs-snr", "--snr", "0:10:0"], dir.path())), 2);
    assert_eq!(code(&blindeq(&["ser-vs-snr", "--equalizers", "lms"], dir.path())), 2);
    assert_eq!(code(&blindeq(&["ser-vs-snr", "--trials", "0"], dir.path())), 2);
}

fn qpsk_rails(text: &str) -> Vec<(bool, bool)> {
    text.lines()
        .map(|l| {
            let mut it = l.split('\t').map(|v| v.parse::<f64>().unwrap() >= 0.0);
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

#[test]
fn equalize_recovers_a_noiseless_delta_channel() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("data");
    let taps = dir.path().join("delta.tsv");
    std::fs::write(&taps, "1\t0\n").unwrap();
    let o = blindeq(&["generate", "--channel", taps.to_str().unwrap(), "--snr", "300", "--train", "1500", "--test-len", "10"], &gen);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let input = gen.join("train_observed.tsv");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = blindeq(&["equalize", "--input", input.to_str().unwrap(), "--seed", "7"], &out);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = run("a");
    let detected = qpsk_rails(&read(a.join("symbols.tsv")));
    let sliced = qpsk_rails(&read(&input));
    // Rotations by k·90° act on the rail signs as a fixed permutation.
    let rotate = |(i, q): (bool, bool)| (!q, i);
    let matches = (0..4).any(|k| {
        detected.iter().zip(&sliced).all(|(&d, &s)| {
            let mut s = s;
            for _ in 0..k {
                s = rotate(s);
            }
            d == s
        })
    });
    assert!(matches);
    for f in ["hhat.tsv", "model.txt", "loss_trace.csv", "report.csv"] {
        assert!(a.join(f).is_file(), "{f}");
    }
    assert!(read(a.join("report.csv")).contains("sigma2_hat,"));
    let b = run("b");
    for f in ["symbols.tsv", "hhat.tsv", "model.txt", "loss_trace.csv", "report.csv"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
}

#[test]
fn equalize_input_errors_exit_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.tsv");
    std::fs::write(&empty, "").unwrap();
    let o = blindeq(&["equalize", "--input", empty.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    let broken = dir.path().join("broken.tsv");
    std::fs::write(&broken, "1\t1\n-1\t1\n1\toops\n").unwrap();
    let o = blindeq(&["equalize", "--input", broken.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let missing = dir.path().join("nope.tsv");
    assert_eq!(code(&blindeq(&["equalize", "--input", missing.to_str().unwrap()], dir.path())), 1);
}
