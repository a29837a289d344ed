use std::path::{Path, PathBuf};
use std::process::Command;

use hotspot::error::exit;
use hotspot::manifest::Manifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hotspot"))
}

fn run(args: &[&str], dir: &Path) -> (i32, String, String) {
    let out = bin()
        .args(args)
        .current_dir(dir)
        .env("HOTSPOT_THREADS", "1")
        .output()
        .expect("spawn");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Small noisy case-2 run that finishes in well under a second.
const SMALL: &str = r#"
preset = "case2"
t_end = 0.4
seed = 5
[mesh]
nx = 6
ny = 6
lx = 3.0
ly = 3.0
[output]
every = 5
"#;

#[test]
fn pde_run_writes_artifacts_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.toml", SMALL);
    let (code, stdout, stderr) = run(
        &["pde-run", "--config", "run.toml", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code, exit::OK, "{stderr}");
    assert!(stdout.contains("\"average_iterations\""));
    let out = dir.path().join("o");
    for f in [
        "stats.csv",
        "hotspots.csv",
        "summary.json",
        "snapshot_000000.vtk",
        "snapshot_000010.vtk",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let stats = std::fs::read_to_string(out.join("stats.csv")).unwrap();
    let mut lines = stats.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,time,iters,incr_A,incr_rho,min_A,max_A,min_rho,max_rho,linear_iters_1,linear_iters_2"
    );
    assert_eq!(lines.count(), 10);
    let m = Manifest::read(&out).unwrap();
    assert_eq!(m.seed, 5);
    assert_eq!(m.command, "pde-run");
    assert!(m.artifacts.contains_key("snapshot_000005.vtk"));
    assert!(m.verify(&out).unwrap().is_empty());
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.toml", SMALL);
    for out in ["a", "b"] {
        let (code, _, e) = run(
            &["pde-run", "--config", "run.toml", "--out", out],
            dir.path(),
        );
        assert_eq!(code, 0, "{e}");
    }
    let (ma, mb) = (
        Manifest::read(&dir.path().join("a")).unwrap(),
        Manifest::read(&dir.path().join("b")).unwrap(),
    );
    assert_eq!(ma.artifacts, mb.artifacts);
    assert!(!ma.artifacts.is_empty());

    // A different seed changes the noisy initial data.
    let (code, _, _) = run(
        &[
            "pde-run", "--config", "run.toml", "--out", "c", "--seed", "6",
        ],
        dir.path(),
    );
    assert_eq!(code, 0);
    let mc = Manifest::read(&dir.path().join("c")).unwrap();
    assert_ne!(
        ma.artifacts["snapshot_000000.vtk"],
        mc.artifacts["snapshot_000000.vtk"]
    );
}

#[test]
fn abm_run_deterministic_and_stochastic() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "abm.toml",
        "preset = \"case1\"\n[mesh]\nnx = 8\nny = 8\nlx = 0.64\nly = 0.64\n[abm]\nt_end = 2.4\nevery = 50\n",
    );
    let (code, stdout, e) = run(
        &["abm-run", "--config", "abm.toml", "--out", "d"],
        dir.path(),
    );
    assert_eq!(code, 0, "{e}");
    assert!(stdout.contains("\"steps\": 100"), "{stdout}");
    let csv = std::fs::read_to_string(dir.path().join("d/abm.csv")).unwrap();
    assert!(csv.starts_with("step,time,total_n,total_burglaries,mean_B\n"));
    for out in ["s1", "s2"] {
        let (code, _, e) = run(
            &[
                "abm-run",
                "--config",
                "abm.toml",
                "--out",
                out,
                "--stochastic",
                "--seed",
                "9",
            ],
            dir.path(),
        );
        assert_eq!(code, 0, "{e}");
    }
    let a = std::fs::read(dir.path().join("s1/abm.csv")).unwrap();
    let b = std::fs::read(dir.path().join("s2/abm.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn mesh_gen_roundtrips_through_file_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, e) = run(
        &["mesh-gen", "--preset", "case2-piecewise-eta", "--out", "m"],
        dir.path(),
    );
    assert_eq!(code, 0, "{e}");
    assert!(stdout.contains("\"nodes\": 10201"), "{stdout}");
    let vtk = std::fs::read_to_string(dir.path().join("m/mesh.vtk")).unwrap();
    assert!(vtk.contains("SCALARS eta double 1"));
    write(
        dir.path(),
        "f.toml",
        "preset = \"case1\"\nt_end = 0.08\n[mesh]\nkind = \"file\"\npath = \"m/mesh.txt\"\n[output]\nvtk = false\n",
    );
    let (code, _, e) = run(&["pde-run", "--config", "f.toml", "--out", "r"], dir.path());
    assert_eq!(code, 0, "{e}");
}

#[test]
fn sweep_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "run.toml", SMALL);
    let (code, stdout, e) = run(
        &[
            "sweep-eta",
            "--config",
            "run.toml",
            "--out",
            "s",
            "--etas",
            "0.9,0.3",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{e}");
    assert!(stdout.contains("\"failures\": []"), "{stdout}");
    let sweep = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert!(
        sweep.starts_with("eta,count,mean_diameter\n0.9,0,"),
        "{sweep}"
    );
    let fits = std::fs::read_to_string(dir.path().join("s/fits.txt")).unwrap();
    assert!(
        fits.contains("no fit"),
        "two points cannot be fitted: {fits}"
    );
    assert!(Manifest::read(&dir.path().join("s"))
        .unwrap()
        .artifacts
        .contains_key("eta_0.3/stats.csv"));

    let (code, stdout, e) = run(
        &[
            "analyze",
            "--config",
            "run.toml",
            "--input",
            "s/eta_0.3/snapshot_000010.vtk",
            "--out",
            "an",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{e}");
    assert!(stdout.contains("\"hotspots\""));

    write(
        dir.path(),
        "fit.csv",
        "eta,count,mean_diameter\n0.05,54,1.1\n0.1,31,1.5\n0.2,16,2.2\n0.3,13,2.9\n0.4,12,3.3\n",
    );
    let (code, _, e) = run(
        &["analyze", "--input", "fit.csv", "--out", "fa"],
        dir.path(),
    );
    assert_eq!(code, 0, "{e}");
    let fits = std::fs::read_to_string(dir.path().join("fa/fits.txt")).unwrap();
    assert!(fits.starts_with("count(eta): "));
}

#[test]
fn help_lists_every_subcommand_and_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, _) = run(&["--help"], dir.path());
    assert_eq!(code, 0);
    for sub in ["pde-run", "abm-run", "sweep-eta", "analyze", "mesh-gen"] {
        assert!(stdout.contains(sub), "{sub}");
        let (code, text, _) = run(&[sub, "--help"], dir.path());
        assert_eq!(code, 0);
        for flag in ["--config", "--out", "--seed", "--preset", "HOTSPOT_THREADS"] {
            assert!(text.contains(flag), "{sub} {flag}");
        }
    }
}

mod exit_codes {
    use super::*;

    #[test]
    fn usage() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(run(&["pde-run", "--bogus"], dir.path()).0, exit::USAGE);
        assert_eq!(
            run(&["pde-run", "--preset", "nope"], dir.path()).0,
            exit::USAGE
        );
        write(dir.path(), "bad.toml", "etta = 0.3\n");
        assert_eq!(
            run(&["pde-run", "--config", "bad.toml"], dir.path()).0,
            exit::USAGE
        );
        assert_eq!(
            run(
                &["sweep-eta", "--preset", "case1", "--etas", "1.5"],
                dir.path()
            )
            .0,
            exit::USAGE
        );
    }

    #[test]
    fn io() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, e) = run(&["pde-run", "--config", "missing.toml"], dir.path());
        assert_eq!(code, exit::IO);
        assert!(e.contains("missing.toml"));
    }

    #[test]
    fn mesh() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "bad.mesh",
            "mesh2d 4 1\n0 0\n1 0\n1 x\n0 1\n0 1 2 3\n",
        );
        write(
            dir.path(),
            "m.toml",
            "[mesh]\nkind = \"file\"\npath = \"bad.mesh\"\n",
        );
        let (code, _, e) = run(
            &["mesh-gen", "--config", "m.toml", "--out", "o"],
            dir.path(),
        );
        assert_eq!(code, exit::MESH);
        assert!(e.contains("bad.mesh:4"), "{e}");
    }

    #[test]
    fn convergence() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "c.toml",
            &format!("{SMALL}\n[solver]\nmax_iters = 1\ntol1 = 1e-14\ntol2 = 1e-14\n"),
        );
        let (code, _, e) = run(&["pde-run", "--config", "c.toml", "--out", "o"], dir.path());
        assert_eq!(code, exit::CONVERGENCE, "{e}");
        // Partial output is kept and accounted for.
        let m = Manifest::read(&dir.path().join("o")).unwrap();
        assert!(m.notes[0].contains("fixed-point"), "{:?}", m.notes);
    }

    #[test]
    fn degenerate() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "d.toml", &format!("b0 = -2.0\n{SMALL}"));
        let (code, _, e) = run(&["pde-run", "--config", "d.toml", "--out", "o"], dir.path());
        assert_eq!(code, exit::DEGENERATE, "{e}");
    }

    #[test]
    fn failure() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "few.csv",
            "eta,count,mean_diameter\n0.1,30,1.0\n0.2,15,2.0\n",
        );
        let (code, _, e) = run(&["analyze", "--input", "few.csv", "--out", "o"], dir.path());
        assert_eq!(code, exit::FAILURE, "{e}");
    }
}
