use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use molforge::config::{Preset, RunConfig};
use molforge::run::{self, Policy};
use molforge::runlog::{Ledger, LEDGER_HEADER, LOG_HEADER};
use molforge_core::molgraph::parse_smiles;
use molforge_core::properties::{penalized_logp, LogPTable, SaProxy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const TINY: &str = "io.preset=desk
mdp.max_steps=5
reward.kind=range
reward.property=mw
reward.lower=40
reward.upper=80
train.episodes=25
train.hidden=16
train.heads=3
train.batch_size=8
train.warmup=16
train.target_sync=10
train.checkpoint_every=10
";

fn molforge(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_molforge"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Header plus rows of equal width; `numeric` columns hold numbers or `na`.
fn check_table(text: &str, header: &str, numeric: &[&str]) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(header));
    let cols: Vec<&str> = header.split('\t').collect();
    let idx: Vec<usize> = numeric.iter().map(|n| cols.iter().position(|c| c == n).expect("column")).collect();
    lines
        .map(|l| {
            let f: Vec<String> = l.split('\t').map(str::to_string).collect();
            assert_eq!(f.len(), cols.len(), "row {l:?}");
            for &i in &idx {
                assert!(f[i] == "na" || f[i].parse::<f64>().is_ok(), "column {} = {:?}", cols[i], f[i]);
            }
            f
        })
        .collect()
}

/// Eval table rows, stopping at the blank line before the summary.
fn eval_rows(out: &str) -> Vec<Vec<String>> {
    let table = out.split("\n\n").next().unwrap().trim_end();
    check_table(
        &format!("{table}\n"),
        run::EVAL_HEADER,
        &["episode", "steps", "reward", "property", "mw", "logp", "penalized_logp", "similarity", "improvement"],
    )
}

fn summary_rows(out: &str) -> Vec<Vec<String>> {
    let summary = out.split("\n\n").nth(1).unwrap();
    check_table(
        summary,
        run::SUMMARY_HEADER,
        &["episodes", "unique", "mean_reward", "success_rate", "mean_similarity", "mean_improvement", "sd_improvement"],
    )
}

fn train_tiny(dir: &Path, seed: &str) -> PathBuf {
    let cfg = write(dir, "tiny.txt", TINY);
    let out = dir.join(format!("run-{seed}"));
    let o = molforge(
        &["train", "--config", cfg.to_str().unwrap(), "--seed", seed, "--out-dir", out.to_str().unwrap()],
        &[],
    );
    stdout(&o);
    out
}

#[test]
fn props_and_sim() {
    let out = stdout(&molforge(&["props", "C"], &[]));
    let row = out.lines().nth(1).unwrap();
    let mw: f64 = row.split('\t').nth(1).unwrap().parse().unwrap();
    assert!((mw - 16.043).abs() < 1e-3);
    assert_eq!(molforge(&["props", ""], &[]).status.code(), Some(1));
    assert_eq!(molforge(&["props"], &[]).status.code(), Some(1));
    assert_eq!(molforge(&["props", "C(("], &[]).status.code(), Some(1));
    assert_eq!(stdout(&molforge(&["sim", "CC(C)CO", "OCC(C)C"], &[])).trim(), "1");
    assert_eq!(molforge(&["frobnicate"], &[]).status.code(), Some(1));
}

#[test]
fn config_typos_exit_with_the_key_named() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.txt", "gamm=0.9\n");
    let o = molforge(&["train", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("\"gamm\""));
    let cfg = write(dir.path(), "range.txt", "reward.kind=range\nreward.lower=5\nreward.upper=1\n");
    assert_eq!(molforge(&["baseline", "greedy", "--config", cfg.to_str().unwrap()], &[]).status.code(), Some(1));
}

#[test]
fn training_is_reproducible_and_logs_are_well_formed() {
    let dir = TempDir::new().unwrap();
    let a = train_tiny(dir.path(), "7");
    let b = train_tiny(dir.path(), "7");
    for f in ["runlog.tsv", "ledger.tsv", "checkpoint.bin", "checkpoint-000010.bin", "greedy.tsv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = train_tiny(dir.path(), "8");
    assert_ne!(std::fs::read(a.join("runlog.tsv")).unwrap(), std::fs::read(c.join("runlog.tsv")).unwrap());

    let log = std::fs::read_to_string(a.join("runlog.tsv")).unwrap();
    let rows = check_table(&log, LOG_HEADER, &["episode", "epsilon", "head", "reward", "return", "loss_avg"]);
    assert_eq!(rows.len(), 25);
    let episodes: Vec<usize> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(episodes.windows(2).all(|w| w[1] > w[0]));
    assert!(rows.iter().all(|r| parse_smiles(&r[3]).is_ok()));

    let ledger_text = std::fs::read_to_string(a.join("ledger.tsv")).unwrap();
    check_table(&ledger_text, LEDGER_HEADER, &["best_reward", "first_episode"]);
    let ledger = Ledger::parse(&ledger_text).unwrap();
    let distinct: std::collections::BTreeSet<&str> = rows.iter().map(|r| r[3].as_str()).collect();
    assert_eq!(ledger.len(), distinct.len());

    check_table(&std::fs::read_to_string(a.join("greedy.tsv")).unwrap(), "policy\tsmiles\treward", &["reward"]);
    let resolved = RunConfig::parse(&std::fs::read_to_string(a.join("config.txt")).unwrap(), None).unwrap();
    assert_eq!(resolved.train.hidden, vec![16]);
    assert_eq!(resolved.seed, 7);
}

#[test]
fn eval_modes() {
    let dir = TempDir::new().unwrap();
    let run_dir = train_tiny(dir.path(), "1");
    let cfg = dir.path().join("tiny.txt");
    let ckpt = run_dir.join("checkpoint.bin");
    let args = |eps: &str, eval_dir: &str| {
        vec![
            "eval".to_string(),
            "--config".into(),
            cfg.to_str().unwrap().into(),
            "--checkpoint".into(),
            ckpt.to_str().unwrap().into(),
            "--episodes".into(),
            "12".into(),
            "--epsilon".into(),
            eps.into(),
            "--out-dir".into(),
            dir.path().join(eval_dir).to_str().unwrap().into(),
        ]
    };
    let run = |a: Vec<String>, envs: &[(&str, &str)]| stdout(&molforge(&a.iter().map(String::as_str).collect::<Vec<_>>(), envs));

    let greedy = run(args("0", "e0"), &[]);
    let rows = eval_rows(&greedy);
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r[2] == rows[0][2]));
    assert_eq!(summary_rows(&greedy)[0][2], "1");
    // Success flags follow the configured range.
    for r in &rows {
        let mw: f64 = r[6].parse().unwrap();
        assert_eq!(r[11], (40.0..=80.0).contains(&mw).to_string());
    }
    let written = std::fs::read_to_string(dir.path().join("e0/eval.tsv")).unwrap();
    assert_eq!(eval_rows(&written), rows);

    let random = run(args("1", "e1"), &[]);
    let unique: usize = summary_rows(&random)[0][2].parse().unwrap();
    assert!(unique > 1, "{unique}");
    // Thread count does not change results.
    assert_eq!(run(args("1", "e2"), &[("MOLFORGE_THREADS", "1")]), random);

    let big = write(dir.path(), "big.txt", &TINY.replace("train.hidden=16", "train.hidden=32"));
    let o = molforge(
        &["eval", "--config", big.to_str().unwrap(), "--checkpoint", ckpt.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("architecture mismatch"));
}

#[test]
fn baselines() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "b.txt", "mdp.max_steps=8\nreward.kind=maximize\nreward.property=logp\n");
    let c = cfg.to_str().unwrap();
    let greedy = stdout(&molforge(&["baseline", "greedy", "--config", c, "--episodes", "3"], &[]));
    let eps0 = stdout(&molforge(&["baseline", "eps-greedy", "--epsilon", "0", "--config", c, "--episodes", "3"], &[]));
    assert_eq!(greedy, eps0);
    let random = stdout(&molforge(&["baseline", "random", "--config", c, "--episodes", "40"], &[]));
    for r in eval_rows(&random) {
        let m = parse_smiles(&r[2]).unwrap();
        assert!(m.check_invariants().is_ok() && m.is_connected(), "{}", r[2]);
        assert_eq!(r[3], "8");
    }
    assert_eq!(
        molforge(&["baseline", "eps-greedy", "--epsilon", "1.5", "--config", c], &[]).status.code(),
        Some(1)
    );
}

#[test]
fn greedy_alkane_growth_is_monotone() {
    let mut cfg = RunConfig::parse("mdp.elements=C\nmdp.max_steps=38\nreward.property=penalized_logp\n", Some(Preset::Desk)).unwrap();
    cfg.seed = 0;
    let mut env = run::build_env(&cfg, &[]).unwrap();
    let path = run::run_policy(&mut env, Policy::Greedy, 0, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(path.len(), 39);
    let values: Vec<f64> = path
        .iter()
        .map(|s| penalized_logp(&s.molecule, LogPTable::bundled(), SaProxy::Zero).unwrap())
        .collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");
    assert_eq!(path.last().unwrap().molecule.atom_count(), 38);
}

#[test]
fn per_origin_reports() {
    let dir = TempDir::new().unwrap();
    let origins = write(dir.path(), "origins.txt", "# two starts\nCCCO\nCC(C)CN\n");
    let cfg = write(dir.path(), "c.txt", "mdp.max_steps=3\nreward.kind=constrained\nreward.delta=0.4\n");
    let out = stdout(&molforge(
        &[
            "baseline",
            "greedy",
            "--config",
            cfg.to_str().unwrap(),
            "--origins",
            origins.to_str().unwrap(),
            "--episodes",
            "4",
            "--per-origin",
        ],
        &[],
    ));
    let rows = eval_rows(&out);
    assert_eq!(rows.iter().filter(|r| r[1] == "CCCO").count(), 2);
    for r in &rows {
        let sim: f64 = r[9].parse().unwrap();
        assert_eq!(r[11], (sim >= 0.4).to_string());
        assert_ne!(r[10], "na");
    }
    let summary = summary_rows(&out);
    assert_eq!(summary.len(), 3);
    assert_eq!(summary[0][0], "all");
    assert_eq!(molforge(&["baseline", "greedy", "--config", cfg.to_str().unwrap()], &[]).status.code(), Some(1));
}

#[test]
fn inspect_listing() {
    let dir = TempDir::new().unwrap();
    let co = write(dir.path(), "co.txt", "mdp.elements=C,O\nreward.property=mw\n");
    let out = stdout(&molforge(&["inspect", "C1CCCCC1", "--config", co.to_str().unwrap()], &[]));
    let rows = check_table(&out, "action\tsmiles\treward", &["reward"]);
    assert_eq!(rows.iter().filter(|r| r[0].starts_with("atom ")).count(), 4);
    assert!(rows.iter().any(|r| r[0] == "none" && r[1] == "C1CCCCC1"));

    let run_dir = train_tiny(dir.path(), "2");
    let tiny = dir.path().join("tiny.txt");
    let out = stdout(&molforge(
        &[
            "inspect",
            "CCO",
            "--config",
            tiny.to_str().unwrap(),
            "--checkpoint",
            run_dir.join("checkpoint.bin").to_str().unwrap(),
        ],
        &[],
    ));
    let rows = check_table(&out, "action\tsmiles\treward\tq", &["reward", "q"]);
    let q: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(q.iter().copied().fold(f64::INFINITY, f64::min), 0.0);
    assert_eq!(q.iter().copied().fold(f64::NEG_INFINITY, f64::max), 1.0);
    assert_eq!(molforge(&["inspect", "C1CC"], &[]).status.code(), Some(1));
}

#[test]
fn restarts_from_ledger() {
    let dir = TempDir::new().unwrap();
    let run_dir = train_tiny(dir.path(), "3");
    let out_dir = dir.path().join("again");
    let cfg = write(dir.path(), "short.txt", &TINY.replace("train.episodes=25", "train.episodes=3"));
    let out = stdout(&molforge(
        &[
            "train",
            "--config",
            cfg.to_str().unwrap(),
            "--restart-from",
            run_dir.join("ledger.tsv").to_str().unwrap(),
            "--checkpoint",
            run_dir.join("checkpoint.bin").to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ],
        &[],
    ));
    let ledger = Ledger::parse(&std::fs::read_to_string(run_dir.join("ledger.tsv")).unwrap()).unwrap();
    let starts = ledger.top(5);
    for (k, e) in starts.iter().enumerate() {
        assert!(out.contains(&format!("# restart {k} from {}", e.smiles)));
        let log = std::fs::read_to_string(out_dir.join(format!("restart-{k}/runlog.tsv"))).unwrap();
        assert_eq!(log.lines().count(), 4);
        let cfg = RunConfig::parse(&std::fs::read_to_string(out_dir.join(format!("restart-{k}/config.txt"))).unwrap(), None).unwrap();
        assert_eq!(molforge_core::molgraph::canonical_key(&cfg.mdp.initial_molecule).as_str(), e.smiles);
    }
}
