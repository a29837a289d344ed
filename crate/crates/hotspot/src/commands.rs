//! The subcommands. Each writes its artifacts plus `manifest.json` into the
//! output directory and returns a summary that is also written as
//! `summary.json`.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hotspot_core::abm::{run_abm, AbmEvent};
use hotspot_core::analysis::{
    detect_hotspots, emergence_time, fit_hotspot_count, fit_hotspot_diameter, BurglaryAccumulator,
    HotspotReport, EMERGENCE_WINDOW,
};
use hotspot_core::mesh::structured_quad_mesh;
use hotspot_core::params::equilibrium;
use hotspot_core::pde::{initial_state, run, RunEvent, Stepper};
use hotspot_core::{Mesh, NondimParams};

use crate::config::{Config, EtaSpec, MeshKind};
use crate::error::{CliError, Result};
use crate::manifest::Manifest;
use crate::output::{write_csv, write_vtk, AbmRow, CsvSink, HotspotRow, StatsRow, SweepRow};

/// Level above which hotspots are counted: the homogeneous steady state
/// `A_st + B`, or its area-weighted mean when the coefficients vary.
pub fn hotspot_baseline(params: &NondimParams, mesh: &Mesh) -> f64 {
    if let Ok(eq) = equilibrium(params) {
        return eq.a_bar;
    }
    let areas = mesh.nodal_areas();
    let total: f64 = areas.iter().sum();
    areas
        .iter()
        .enumerate()
        .map(|(i, w)| w * (params.a_st.at(i) + params.source.at(i)))
        .sum::<f64>()
        / total
}

/// Observers must return core errors; an output failure is kept aside and
/// reported in its own right once the run has stopped.
fn stash(slot: &mut Option<CliError>, e: CliError) -> hotspot_core::Error {
    let msg = e.to_string();
    *slot = Some(e);
    hotspot_core::Error::param(format!("output failed: {msg}"))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let path = dir.join(name);
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSummary {
    pub steps: usize,
    pub final_time: f64,
    /// Fixed-point passes per step, averaged over the steps taken.
    pub average_iterations: f64,
    pub max_iterations: usize,
    pub max_iterations_time: f64,
    pub hotspot_baseline: f64,
    pub hotspots: usize,
    pub mean_diameter: f64,
    pub emergence_time: Option<f64>,
    pub error: Option<String>,
}

struct Tracker {
    steps: usize,
    iter_sum: usize,
    max_iters: usize,
    max_time: f64,
    final_time: f64,
    probes: Vec<(f64, usize)>,
    last_report: Option<HotspotReport>,
}

/// Runs the continuum model described by `cfg` into `out`.
pub fn pde_run(cfg: &Config, out: &Path) -> Result<PdeSummary> {
    create_dir(out)?;
    let mesh = cfg.build_mesh()?;
    let (params, b0, rho0) = cfg.continuum(&mesh)?;
    let baseline = hotspot_baseline(&params, &mesh);
    let initial = initial_state(&mesh, &params, &b0, &rho0, &cfg.noise())?;
    let mut stepper = Stepper::new(&mesh, &params, cfg.solver_config())?;
    let mut burglaries = if params.theta_over_omega > 0.0 {
        Some(BurglaryAccumulator::new(
            &mesh,
            params.theta_over_omega,
            cfg.dt,
        )?)
    } else {
        None
    };

    let mut manifest = Manifest::new("pde-run", cfg.seed, cfg.to_toml());
    let mut written: Vec<String> = Vec::new();
    let mut stats = CsvSink::<StatsRow>::create(&out.join("stats.csv"))?;
    let mut hotspots = CsvSink::<HotspotRow>::create(&out.join("hotspots.csv"))?;
    let mut t = Tracker {
        steps: 0,
        iter_sum: 0,
        max_iters: 0,
        max_time: 0.0,
        final_time: 0.0,
        probes: Vec::new(),
        last_report: None,
    };

    let mut sink_err = None;
    let result = run(
        &mut stepper,
        initial,
        cfg.t_end,
        cfg.output.every,
        |event| {
            match event {
                RunEvent::Step { record, state, .. } => {
                    stats
                        .push(&StatsRow::from(record))
                        .map_err(|e| stash(&mut sink_err, e))?;
                    t.steps += 1;
                    t.iter_sum += record.iters;
                    if record.iters > t.max_iters {
                        t.max_iters = record.iters;
                        t.max_time = record.time;
                    }
                    t.final_time = record.time;
                    if let Some(acc) = burglaries.as_mut() {
                        acc.add(state)?;
                    }
                }
                RunEvent::Snapshot(state) => {
                    let report = detect_hotspots(state.a.values(), &mesh, baseline)?;
                    hotspots
                        .push(&HotspotRow {
                            time: state.time,
                            count: report.count,
                            mean_diameter: report.mean_diameter(),
                        })
                        .map_err(|e| stash(&mut sink_err, e))?;
                    t.probes.push((state.time, report.count));
                    t.last_report = Some(report);
                    if cfg.output.vtk {
                        let name = format!("snapshot_{:06}.vtk", state.step_index);
                        write_vtk(
                            &out.join(&name),
                            &mesh,
                            &[("A", state.a.values()), ("rho", state.rho.values())],
                            &format!("t = {}", state.time),
                        )
                        .map_err(|e| stash(&mut sink_err, e))?;
                        written.push(name);
                    }
                }
            }
            Ok(())
        },
    );

    if let Some(e) = sink_err {
        return Err(e);
    }
    stats.finish()?;
    hotspots.finish()?;
    for name in ["stats.csv", "hotspots.csv"] {
        manifest.record(out, name)?;
    }
    for name in &written {
        manifest.record(out, name)?;
    }
    if let Some(acc) = burglaries {
        let rows: Vec<ElementCount> = acc
            .counts()
            .iter()
            .enumerate()
            .map(|(element, &count)| ElementCount { element, count })
            .collect();
        write_csv(&out.join("burglaries.csv"), &rows)?;
        manifest.record(out, "burglaries.csv")?;
    }

    let report = t.last_report.unwrap_or(HotspotReport {
        count: 0,
        diameters: Vec::new(),
        areas: Vec::new(),
        threshold: baseline,
        components: Vec::new(),
    });
    let summary = PdeSummary {
        steps: t.steps,
        final_time: t.final_time,
        average_iterations: if t.steps > 0 {
            t.iter_sum as f64 / t.steps as f64
        } else {
            0.0
        },
        max_iterations: t.max_iters,
        max_iterations_time: t.max_time,
        hotspot_baseline: baseline,
        hotspots: report.count,
        mean_diameter: report.mean_diameter(),
        emergence_time: emergence_time(&t.probes, EMERGENCE_WINDOW),
        error: result.as_ref().err().map(|e| e.to_string()),
    };
    write_json(out, "summary.json", &summary)?;
    manifest.record(out, "summary.json")?;
    if let Some(e) = &summary.error {
        manifest.notes.push(format!("run stopped early: {e}"));
    }
    manifest.write(out)?;
    result?;
    Ok(summary)
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ElementCount {
    element: usize,
    count: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmSummary {
    pub steps: usize,
    pub dt: f64,
    pub final_time: f64,
    pub final_time_nondim: f64,
    pub total_burglaries: f64,
    pub mean_n: f64,
    pub hotspots: usize,
    pub mean_diameter: f64,
}

/// Runs the lattice model. Initial data are the continuum initial fields on
/// the mesh matching the lattice, converted to counts.
pub fn abm_run(cfg: &Config, out: &Path) -> Result<AbmSummary> {
    create_dir(out)?;
    let (model, engine, t_end) = cfg.abm()?;
    let lat = *model.lattice();
    let p = model.params().clone();
    let h_nd = 2.0 * (p.omega * p.dt).sqrt();
    let mesh = structured_quad_mesh(
        h_nd * (lat.nx - 1) as f64,
        h_nd * (lat.ny - 1) as f64,
        lat.nx - 1,
        lat.ny - 1,
    )?;
    let ic_cfg = Config {
        profile: crate::config::Profile::None,
        ..cfg.clone()
    };
    let (params, b0, rho0) = ic_cfg.continuum(&mesh)?;
    let init = initial_state(&mesh, &params, &b0, &rho0, &cfg.noise())?;
    let b_nd: Vec<f64> = init
        .a
        .values()
        .iter()
        .enumerate()
        .map(|(i, a)| a - params.a_st.at(i))
        .collect();
    let initial = model.state_from_nondim(&b_nd, init.rho.values(), engine)?;
    let baseline = hotspot_baseline(&model.nondim_params()?, &mesh);

    let mut manifest = Manifest::new("abm-run", cfg.seed, cfg.to_toml());
    let mut rows = CsvSink::<AbmRow>::create(&out.join("abm.csv"))?;
    let mut hotspots = CsvSink::<HotspotRow>::create(&out.join("hotspots.csv"))?;
    let mut written = Vec::new();
    let mut burglaries = 0.0;
    let mut steps = 0;
    let mut last: Option<HotspotReport> = None;
    let every = cfg.abm.every.unwrap_or(cfg.output.every);

    let mut sink_err = None;
    let final_state = run_abm(&model, initial, engine, t_end, every, |event| {
        match event {
            AbmEvent::Step(totals) => {
                rows.push(&AbmRow::from(totals))
                    .map_err(|e| stash(&mut sink_err, e))?;
                burglaries += totals.total_burglaries;
                steps += 1;
            }
            AbmEvent::Snapshot(state) => {
                let view = model.nondim_view(state);
                let report = detect_hotspots(&view.a, &mesh, baseline)?;
                hotspots
                    .push(&HotspotRow {
                        time: view.time,
                        count: report.count,
                        mean_diameter: report.mean_diameter(),
                    })
                    .map_err(|e| stash(&mut sink_err, e))?;
                last = Some(report);
                if cfg.output.vtk {
                    let name = format!("lattice_{:08}.vtk", state.step);
                    write_vtk(
                        &out.join(&name),
                        &mesh,
                        &[("A", &view.a), ("rho", &view.rho)],
                        &format!("t = {}", view.time),
                    )
                    .map_err(|e| stash(&mut sink_err, e))?;
                    written.push(name);
                }
            }
        }
        Ok(())
    });
    if let Some(e) = sink_err {
        return Err(e);
    }
    rows.finish()?;
    hotspots.finish()?;
    let final_state = final_state?;

    for name in ["abm.csv", "hotspots.csv"] {
        manifest.record(out, name)?;
    }
    for name in &written {
        manifest.record(out, name)?;
    }
    let report = last.expect("the initial snapshot is always delivered");
    let summary = AbmSummary {
        steps,
        dt: p.dt,
        final_time: final_state.t,
        final_time_nondim: p.omega * final_state.t,
        total_burglaries: burglaries,
        mean_n: final_state.total_criminals() / lat.site_count() as f64,
        hotspots: report.count,
        mean_diameter: report.mean_diameter(),
    };
    write_json(out, "summary.json", &summary)?;
    manifest.record(out, "summary.json")?;
    manifest.write(out)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<(f64, String)>,
    pub count_fit: Option<Vec<f64>>,
    pub diameter_fit: Option<Vec<f64>>,
}

fn eta_dir(eta: f64) -> String {
    format!("eta_{eta}")
}

/// One independent run per `eta`, in parallel on the current rayon pool.
/// Failed runs are reported and left out of the fits.
pub fn sweep_eta(cfg: &Config, etas: &[f64], out: &Path) -> Result<SweepSummary> {
    if etas.is_empty() {
        return Err(CliError::Usage("the eta list is empty".into()));
    }
    if let Some(bad) = etas.iter().find(|e| !(**e > 0.0 && **e <= 1.0)) {
        return Err(CliError::Usage(format!("eta {bad} is outside (0, 1]")));
    }
    create_dir(out)?;
    let results: Vec<(f64, Result<PdeSummary>)> = etas
        .par_iter()
        .map(|&eta| {
            let run_cfg = Config {
                eta: EtaSpec::Constant(eta),
                ..cfg.clone()
            };
            (eta, pde_run(&run_cfg, &out.join(eta_dir(eta))))
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (eta, r) in results {
        match r {
            Ok(s) => rows.push(SweepRow {
                eta,
                count: s.hotspots,
                mean_diameter: s.mean_diameter,
            }),
            Err(e) => failures.push((eta, e.to_string())),
        }
    }
    let mut manifest = Manifest::new("sweep-eta", cfg.seed, cfg.to_toml());
    write_csv(&out.join("sweep.csv"), &rows)?;
    manifest.record(out, "sweep.csv")?;

    let (fits_text, count_fit, diameter_fit) = fit_sweep(&rows);
    std::fs::write(out.join("fits.txt"), &fits_text)
        .map_err(|e| CliError::io(out.join("fits.txt"), e))?;
    manifest.record(out, "fits.txt")?;
    for (eta, e) in &failures {
        manifest.notes.push(format!("eta {eta} failed: {e}"));
    }
    for eta in rows.iter().map(|r| r.eta) {
        let sub = out.join(eta_dir(eta));
        if let Ok(m) = Manifest::read(&sub) {
            for (rel, hash) in m.artifacts {
                manifest
                    .artifacts
                    .insert(format!("{}/{rel}", eta_dir(eta)), hash);
            }
        }
    }
    let summary = SweepSummary {
        rows,
        failures,
        count_fit,
        diameter_fit,
    };
    write_json(out, "summary.json", &summary)?;
    manifest.record(out, "summary.json")?;
    manifest.write(out)?;
    Ok(summary)
}

type FitOutcome = (String, Option<Vec<f64>>, Option<Vec<f64>>);

fn fit_sweep(rows: &[SweepRow]) -> FitOutcome {
    let counts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eta, r.count as f64)).collect();
    let diams: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.count > 0)
        .map(|r| (r.eta, r.mean_diameter))
        .collect();
    let mut text = String::new();
    let count_fit = match fit_hotspot_count(&counts) {
        Ok(f) => {
            text.push_str(&crate::output::format_fit("count(eta)", &f));
            Some(f.coefficients)
        }
        Err(e) => {
            text.push_str(&format!("count(eta): no fit ({e})\n"));
            None
        }
    };
    let diameter_fit = match fit_hotspot_diameter(&diams) {
        Ok(f) => {
            text.push_str(&crate::output::format_fit("diameter(eta)", &f));
            Some(f.coefficients)
        }
        Err(e) => {
            text.push_str(&format!("diameter(eta): no fit ({e})\n"));
            None
        }
    };
    (text, count_fit, diameter_fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub input: PathBuf,
    pub baseline: f64,
    pub threshold: f64,
    pub hotspots: usize,
    pub mean_diameter: f64,
    pub diameters: Vec<f64>,
}

/// Hotspot report for the `A` field of a VTK snapshot written by this tool.
pub fn analyze(cfg: &Config, input: &Path, out: &Path) -> Result<AnalyzeSummary> {
    let (mesh, fields) = read_vtk(input)?;
    let a = fields
        .iter()
        .find(|(name, _)| name == "A")
        .map(|(_, v)| v)
        .ok_or_else(|| {
            CliError::Usage(format!("{} has no point field named A", input.display()))
        })?;
    let baseline = match cfg.continuum(&mesh) {
        Ok((params, _, _)) => hotspot_baseline(&params, &mesh),
        Err(_) => cfg.a_st + cfg.source,
    };
    let report = detect_hotspots(a, &mesh, baseline)?;
    create_dir(out)?;
    let summary = AnalyzeSummary {
        input: input.to_path_buf(),
        baseline,
        threshold: report.threshold,
        hotspots: report.count,
        mean_diameter: report.mean_diameter(),
        diameters: report.diameters.clone(),
    };
    let mut manifest = Manifest::new("analyze", cfg.seed, cfg.to_toml());
    write_json(out, "analysis.json", &summary)?;
    manifest.record(out, "analysis.json")?;
    manifest.write(out)?;
    Ok(summary)
}

/// Fits for an existing `sweep.csv`.
pub fn analyze_sweep(cfg: &Config, input: &Path, out: &Path) -> Result<FitSummary> {
    let mut reader = csv::Reader::from_path(input).map_err(|e| csv_read_error(input, e))?;
    let mut rows = Vec::new();
    for r in reader.deserialize::<SweepRow>() {
        rows.push(r.map_err(|e| csv_read_error(input, e))?);
    }
    // Unlike a sweep, which reports what it can, an explicit fit request
    // fails when the count data cannot be fitted.
    let counts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eta, r.count as f64)).collect();
    fit_hotspot_count(&counts)?;
    let (text, count_fit, diameter_fit) = fit_sweep(&rows);
    create_dir(out)?;
    std::fs::write(out.join("fits.txt"), &text)
        .map_err(|e| CliError::io(out.join("fits.txt"), e))?;
    let mut manifest = Manifest::new("analyze", cfg.seed, cfg.to_toml());
    manifest.record(out, "fits.txt")?;
    manifest.write(out)?;
    Ok(FitSummary {
        count_fit,
        diameter_fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub count_fit: Option<Vec<f64>>,
    pub diameter_fit: Option<Vec<f64>>,
}

fn csv_read_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Config(format!("{}: {other:?}", path.display())),
    }
}

/// Named nodal scalar field.
pub type PointField = (String, Vec<f64>);

/// Reads the legacy VTK layout produced by [`crate::output::format_vtk`].
pub fn read_vtk(path: &Path) -> Result<(Mesh, Vec<PointField>)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, message: &str| CliError::MeshParse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let mut nodes = Vec::new();
    let mut quads = Vec::new();
    let mut fields = Vec::new();
    let num = |line: usize, tok: Option<&str>| -> Result<usize> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| bad(line, "expected a count"))
    };
    while i < lines.len() {
        let mut tok = lines[i].split_whitespace();
        match tok.next() {
            Some("POINTS") => {
                let n = num(i + 1, tok.next())?;
                for k in 0..n {
                    let l = lines
                        .get(i + 1 + k)
                        .ok_or_else(|| bad(i + 1 + k, "missing point"))?;
                    let v: Vec<f64> = l
                        .split_whitespace()
                        .filter_map(|t| t.parse().ok())
                        .collect();
                    if v.len() != 3 {
                        return Err(bad(i + 2 + k, "expected three coordinates"));
                    }
                    nodes.push([v[0], v[1]]);
                }
                i += n;
            }
            Some("CELLS") => {
                let m = num(i + 1, tok.next())?;
                for k in 0..m {
                    let l = lines
                        .get(i + 1 + k)
                        .ok_or_else(|| bad(i + 1 + k, "missing cell"))?;
                    let v: Vec<usize> = l
                        .split_whitespace()
                        .filter_map(|t| t.parse().ok())
                        .collect();
                    if v.len() != 5 || v[0] != 4 {
                        return Err(bad(i + 2 + k, "only quadrilateral cells are supported"));
                    }
                    quads.push([v[1], v[2], v[3], v[4]]);
                }
                i += m;
            }
            Some("SCALARS") => {
                let name = tok
                    .next()
                    .ok_or_else(|| bad(i + 1, "unnamed scalar field"))?
                    .to_string();
                i += 1;
                if lines.get(i).map(|l| l.starts_with("LOOKUP_TABLE")) == Some(true) {
                    i += 1;
                }
                let n = nodes.len();
                let mut v = Vec::with_capacity(n);
                for k in 0..n {
                    let x = lines
                        .get(i + k)
                        .and_then(|l| l.trim().parse::<f64>().ok())
                        .ok_or_else(|| bad(i + k + 1, "bad scalar value"))?;
                    v.push(x);
                }
                fields.push((name, v));
                i += n;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    Ok((Mesh::new(nodes, quads)?, fields))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub nodes: usize,
    pub quads: usize,
    pub area: f64,
    pub max_diameter: f64,
}

/// Writes the configured mesh as text and VTK.
pub fn mesh_gen(cfg: &Config, out: &Path) -> Result<MeshSummary> {
    create_dir(out)?;
    let mesh = cfg.build_mesh()?;
    crate::mesh_io::write_mesh(&mesh, &out.join("mesh.txt"))?;
    let mut fields: Vec<(&str, Vec<f64>)> = Vec::new();
    if cfg.mesh.kind != MeshKind::File {
        let (params, _, _) = cfg.continuum(&mesh)?;
        let n = mesh.node_count();
        fields.push(("eta", params.eta.to_nodal(n)));
        fields.push(("A_st", params.a_st.to_nodal(n)));
        fields.push(("source", params.source.to_nodal(n)));
    }
    let refs: Vec<(&str, &[f64])> = fields.iter().map(|(n, v)| (*n, v.as_slice())).collect();
    write_vtk(&out.join("mesh.vtk"), &mesh, &refs, "mesh")?;
    let mut manifest = Manifest::new("mesh-gen", cfg.seed, cfg.to_toml());
    let summary = MeshSummary {
        nodes: mesh.node_count(),
        quads: mesh.quad_count(),
        area: mesh.area(),
        max_diameter: mesh.max_diameter(),
    };
    write_json(out, "summary.json", &summary)?;
    for name in ["mesh.txt", "mesh.vtk", "summary.json"] {
        manifest.record(out, name)?;
    }
    manifest.write(out)?;
    Ok(summary)
}
