use std::fs;
use std::path::Path;
use std::process::Command;

use moccas::metrics::{aggregate_t_at, TAt};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_moccas"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

/// Rows of a run CSV, skipping the hash comment.
fn read_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash: "));
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn smoke_single_random_trial() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"blobs\"\ndim = 2\nobjectives = 2\npool_size = 300\npolicies = [\"random\"]\ntrials = 1\nbudget = 10\n",
    );
    let out = dir.path().join("out");
    let status = bin()
        .args(["bench", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "1"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("runs/random_0.csv").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn run_csv_layout_is_stable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"ridges\"\ndim = 2\nobjectives = 3\npool_size = 400\npolicies = [\"moc_cas\"]\ntrials = 1\nn_init = 4\nbudget = 3\n",
    );
    let out = dir.path().join("out");
    assert!(bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let (header, rows) = read_rows(&out.join("runs/moc_cas_0.csv"));
    assert_eq!(
        header.join(","),
        "t,chosen_id,y1,y2,y3,feasible,P,fill,covered,acq_value,wall_ms"
    );
    assert_eq!(rows.len(), 7);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0], (i + 1).to_string());
        assert!(row[1].parse::<usize>().is_ok());
        assert!(row[5] == "0" || row[5] == "1");
        // warm-start rows carry no acquisition value
        assert_eq!(row[9].is_empty(), i < 4);
        assert_eq!(row[10], "0");
    }
}

#[test]
fn summary_t_at_matches_csv_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"blobs\"\ndim = 2\nobjectives = 2\npool_size = 600\nfeasible_fraction = 0.4\npolicies = [\"one_step\", \"moc_cas\"]\ntrials = 3\nseeds = [4, 9, 11]\nn_init = 10\nbudget = 30\nt_at = [5, 15, 38]\n",
    );
    let out = dir.path().join("out");
    assert!(bin().arg("bench").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for policy in ["one_step", "moc_cas"] {
        let mut aups = Vec::new();
        let mut per_x: Vec<Vec<TAt>> = vec![Vec::new(); 3];
        for seed in [4, 9, 11] {
            let (header, rows) = read_rows(&out.join(format!("runs/{policy}_{seed}.csv")));
            let f = header.iter().position(|h| h == "feasible").unwrap();
            let mut p = 0u64;
            let mut series = Vec::new();
            for row in &rows {
                p += row[f].parse::<u64>().unwrap();
                series.push(p);
            }
            let p_col = header.iter().position(|h| h == "P").unwrap();
            assert!(rows.iter().zip(&series).all(|(r, s)| r[p_col] == s.to_string()));
            aups.push(series.iter().sum::<u64>() as f64);
            for (k, x) in [5u64, 15, 38].iter().enumerate() {
                let first = series.iter().position(|v| v >= x);
                per_x[k].push(first.map_or(TAt::NotReached, |i| TAt::Reached(i + 1)));
            }
        }
        let mean = aups.iter().sum::<f64>() / 3.0;
        assert!((summary[policy]["aup"]["mean"].as_f64().unwrap() - mean).abs() < 1e-9);
        for (k, x) in ["5", "15", "38"].iter().enumerate() {
            let expected = aggregate_t_at(&per_x[k]);
            let got = &summary[policy]["t_at"][x];
            assert_eq!(got["not_reached"].as_u64().unwrap() as usize, expected.not_reached);
            match expected.mean {
                Some(m) => assert!((got["mean"].as_f64().unwrap() - m).abs() < 1e-9),
                None => assert!(got["mean"].is_null()),
            }
        }
    }
}

#[test]
fn config_hash_is_shared_by_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"blobs\"\ndim = 2\nobjectives = 2\npool_size = 300\npolicies = [\"straddle\"]\ntrials = 1\nbudget = 4\n",
    );
    let out = dir.path().join("out");
    assert!(bin().arg("bench").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    let hash = config["config_hash"].as_str().unwrap().to_string();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["straddle"]["config_hash"], hash.as_str());
    let csv = fs::read_to_string(out.join("runs/straddle_0.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), format!("# config_hash: {hash}"));
}

#[test]
fn ablate_via_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "problem = \"blobs\"\ndim = 2\nobjectives = 2\npool_size = 300\ntrials = 1\nbudget = 4\nn_init = 4\n",
    );
    let out = dir.path().join("out");
    let status = bin()
        .arg("ablate")
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--axis", "beta0", "--values", "2,4"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("beta0_2/summary.json").exists());
    assert!(out.join("beta0_4/runs/moc_cas_0.csv").exists());
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "problem = \"blobs\"\nr = -0.1\n");
    let out = bin().arg("bench").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("r: must be > 0"));

    let missing_out = write_config(dir.path(), "problem = \"blobs\"\n");
    let out = bin().arg("run").arg("--config").arg(&missing_out).output().unwrap();
    assert!(!out.status.success());

    let pool = dir.path().join("pool.csv");
    fs::write(&pool, "id,x1,y1\na,0.1,0.2\na,0.3,0.4\n").unwrap();
    let cfg = write_config(dir.path(), &format!("problem = \"pool\"\npool_path = {:?}\n", pool));
    let out = bin().arg("bench").arg("--config").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate id `a` at line 3"));
}

#[test]
fn pool_file_round_trip_through_bench() {
    let dir = tempfile::tempdir().unwrap();
    let problem = moccas::synthetic::make_smooth_problem(moccas::ProblemKind::Blobs, 2, 2, 5).unwrap();
    let pool = moccas::synthetic::make_pool(&problem, 250, 6).unwrap();
    let path = dir.path().join("pool.csv");
    pool.write_csv(&path).unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "problem = \"pool\"\npool_path = {:?}\nthresholds = [0.4, 0.4]\npolicies = [\"moc_cas\", \"random\"]\ntrials = 1\nbudget = 5\nn_init = 5\n",
            path
        ),
    );
    let out = dir.path().join("out");
    assert!(bin().arg("bench").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap().success());
    let (_, rows) = read_rows(&out.join("runs/moc_cas_0.csv"));
    let ids: std::collections::HashSet<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(ids.len(), 10);
    assert!(ids.iter().all(|id| pool.ids().iter().any(|p| p == id)));
}
