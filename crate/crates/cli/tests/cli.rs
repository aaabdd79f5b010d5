use std::path::Path;
use std::process::{Command, Output};

use flexdock::io::{write_chain, write_pdb};
use flexdock::synthetic::{synthetic_pair, SyntheticSpec};

fn flexdock(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexdock")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}\t")))
        .unwrap_or_else(|| panic!("no `{key}` in output:\n{out}"))
        .parse()
        .unwrap()
}

/// Two synthetic cases with bound structures; returns the manifest path.
fn manifest(dir: &Path) -> String {
    let mut m = String::new();
    for k in 0..2u64 {
        let p = synthetic_pair(&SyntheticSpec::new(10, 9, 0.4, 40 + k)).unwrap();
        let id = format!("c{k}");
        write_chain(&p.unbound.receptor, &dir.join(format!("{id}_r.pdb"))).unwrap();
        write_chain(&p.unbound.ligand, &dir.join(format!("{id}_l.pdb"))).unwrap();
        write_pdb(&p.bound, &dir.join(format!("{id}_b.pdb"))).unwrap();
        m.push_str(&format!("{id}\t{id}_r.pdb\t{id}_l.pdb\t{id}_b.pdb\n"));
    }
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, m).unwrap();
    path.display().to_string()
}

#[test]
fn unknown_subcommand_exits_2_with_usage() {
    let o = flexdock(&["dock-everything"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn unknown_config_key_exits_2_listing_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "sampler.n_steps = 20\nsampler.nsteps = 20\n").unwrap();
    let out = dir.path().join("t.cache");
    let o = flexdock(&["--config", cfg.to_str().unwrap(), "tables", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("sampler.nsteps"), "{e}");
    assert!(e.contains("sampler.n_steps") && e.contains("schedule.sigma_tr_max"), "{e}");
    assert!(!out.exists());
}

#[test]
fn bad_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.pdb");
    let o = flexdock(&["nma", "--pdb", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_prediction_equal_to_truth() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let preds = dir.path().join("preds");
    std::fs::create_dir(&preds).unwrap();
    for k in 0..2 {
        std::fs::copy(dir.path().join(format!("c{k}_b.pdb")), preds.join(format!("c{k}.pdb"))).unwrap();
    }
    let o = flexdock(&["eval", "--manifest", &m, "--predictions", preds.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    for k in 0..2 {
        let row: Vec<&str> = out.lines().find(|l| l.starts_with(&format!("c{k}\t"))).unwrap().split('\t').collect();
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0, "{out}");
        assert_eq!(row[2].parse::<f64>().unwrap(), 0.0, "{out}");
        assert_eq!(row[3].parse::<f64>().unwrap(), 1.0, "{out}");
    }
    assert!(out.contains("metric\tMean±Std\tMedian\t%<10"));
}

#[test]
fn deterministic_sampling_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let m = manifest(dir.path());
    let p = |s: &str| dir.path().join(s).display().to_string();
    let o = flexdock(&["train-toy", "--manifest", &m, "--steps", "3", "--out", &p("m.ckpt"), "--table", &p("t.cache")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let run = |out: &str| {
        let o = flexdock(&[
            "--seed", "7", "--deterministic", "sample", "--manifest", &m, "--checkpoint", &p("m.ckpt"), "--out", out,
            "--candidates", "3", "--table", &p("t.cache"),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    };
    run(&p("a"));
    run(&p("b"));
    for k in 0..2 {
        for f in [format!("c{k}.candidates.tsv"), format!("c{k}.pdb"), format!("c{k}.trajectory.pdb")] {
            let a = std::fs::read(dir.path().join("a").join(&f)).unwrap();
            let b = std::fs::read(dir.path().join("b").join(&f)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "{f} differs");
        }
        let tsv = std::fs::read_to_string(dir.path().join("a").join(format!("c{k}.candidates.tsv"))).unwrap();
        assert_eq!(tsv.lines().filter(|l| !l.starts_with('#')).count(), 4);
        let traj = std::fs::read_to_string(dir.path().join("a").join(format!("c{k}.trajectory.pdb"))).unwrap();
        assert_eq!(traj.matches("ENDMDL").count(), 41);
    }
}

#[test]
fn train_toy_overfits_two_synthetic_cases() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).display().to_string();
    std::fs::write(p("run.cfg"), "train.lr = 0.003\n").unwrap();
    let o = flexdock(&[
        "--config", &p("run.cfg"), "train-toy", "--synthetic", &p("toy"), "--steps", "500", "--out", &p("m.ckpt"),
        "--log", &p("loss.tsv"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let (first, last) = (field(&out, "initial_loss"), field(&out, "final_loss"));
    assert!(last < 0.1 * first, "{out}");
    let log = std::fs::read_to_string(p("loss.tsv")).unwrap();
    assert_eq!(log.lines().count(), 501);
    assert!(std::fs::read(p("m.ckpt")).unwrap().starts_with(b"HDCKPT1"));
}

#[test]
fn per_chain_dumps() {
    let dir = tempfile::tempdir().unwrap();
    manifest(dir.path());
    let p = |s: &str| dir.path().join(s).display().to_string();
    let o = flexdock(&["nma", "--pdb", &p("c0_r.pdb"), "--out", &p("nma")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let corr = std::fs::read_to_string(p("nma/correlation.tsv")).unwrap();
    assert_eq!(corr.lines().count(), 10);
    let o = flexdock(&["featurize", "--receptor", &p("c0_r.pdb"), "--ligand", &p("c0_l.pdb"), "--out", &p("feat")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(p("feat/nodes.tsv")).unwrap().lines().count(), 20);
    let o = flexdock(&[
        "noise", "--receptor", &p("c0_r.pdb"), "--ligand", &p("c0_l.pdb"), "--bound", &p("c0_b.pdb"), "--t", "0",
        "--tau", "0", "--out", &p("noised.pdb"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(field(&stdout(&o), "alpha"), 0.0);
    assert!(std::fs::read_to_string(p("noised.pdb")).unwrap().contains(" CA "));
}
