//! Run configuration: TOML files layered over built-in presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use hotspot_core::abm::{AbmModel, Engine};
use hotspot_core::linsolve::SolverOptions;
use hotspot_core::mesh::{structured_quad_mesh, Lattice, Mesh};
use hotspot_core::pde::{CouplingMode, NormKind, SolverConfig};
use hotspot_core::profiles;
use hotspot_core::{Coefficient, DimensionalParams, NoiseSpec, NondimParams};

use crate::error::{CliError, Result};
use crate::mesh_io;
use crate::presets;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Constant(f64),
    Profile(EtaProfile),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaProfile {
    /// 0.9 / 0.3 / 0.12 / 0.03 in bands of `x1`.
    Banded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    None,
    HighwaySquare,
    HighwayEmbedded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub preset: Option<String>,
    pub eta: EtaSpec,
    pub a_st: f64,
    pub source: f64,
    pub theta_over_omega: f64,
    pub b0: f64,
    pub rho0: f64,
    pub profile: Profile,
    pub sigma_b: f64,
    pub sigma_rho: f64,
    pub delta_b: f64,
    pub delta_rho: f64,
    pub seed: u64,
    pub dt: f64,
    pub t_end: f64,
    pub mesh: MeshConfig,
    pub solver: SolverSection,
    pub output: OutputSection,
    pub abm: AbmSection,
    pub sweep: SweepSection,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            preset: None,
            eta: EtaSpec::Constant(0.9),
            a_st: 1.0 / 30.0,
            source: 1.0,
            theta_over_omega: 0.0,
            b0: 1.0,
            rho0: 0.8,
            profile: Profile::None,
            sigma_b: 0.0,
            sigma_rho: 0.0,
            delta_b: 1.0,
            delta_rho: 1.0,
            seed: 0,
            dt: 1.0 / 50.0,
            t_end: 200.0,
            mesh: MeshConfig::default(),
            solver: SolverSection::default(),
            output: OutputSection::default(),
            abm: AbmSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshKind {
    Structured,
    City,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    pub kind: MeshKind,
    pub lx: f64,
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
    /// Grid resolution of the city mesh.
    pub n: usize,
    pub path: Option<PathBuf>,
}

impl Default for MeshConfig {
    fn default() -> Self {
        MeshConfig {
            kind: MeshKind::Structured,
            lx: 16.0,
            ly: 16.0,
            nx: 200,
            ny: 200,
            n: 165,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Loose,
    Strong,
    Monolithic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormName {
    Consistent,
    Lumped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub mode: ModeName,
    pub tol1: f64,
    pub tol2: f64,
    pub max_iters: usize,
    pub linear_tol: f64,
    pub norm: NormName,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            mode: ModeName::Strong,
            tol1: 1e-6,
            tol2: 1e-6,
            max_iters: 200,
            linear_tol: 1e-12,
            norm: NormName::Consistent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Snapshot interval in steps.
    pub every: usize,
    pub vtk: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: PathBuf::from("out"),
            every: 50,
            vtk: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineName {
    Deterministic,
    Stochastic,
}

/// Dimensional lattice-model parameters. Unset values are derived from the
/// continuum configuration so that both models describe the same problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AbmSection {
    pub theta: f64,
    pub omega: f64,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub a_static: Option<f64>,
    pub dt: Option<f64>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub t_end: Option<f64>,
    pub engine: EngineName,
    pub every: Option<usize>,
}

impl Default for AbmSection {
    fn default() -> Self {
        AbmSection {
            theta: 0.58,
            omega: 1.0 / 15.0,
            gamma: None,
            eta: None,
            a_static: None,
            dt: None,
            nx: None,
            ny: None,
            t_end: None,
            engine: EngineName::Deterministic,
            every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub etas: Vec<f64>,
}

/// Command-line values that take precedence over files and presets.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, value) => {
                base.insert(key, value);
            }
        }
    }
}

fn parse_table(text: &str, origin: &str) -> Result<Table> {
    text.parse::<Table>()
        .map_err(|e| CliError::Config(format!("{origin}: {e}")))
}

impl Config {
    /// Layers, lowest first: defaults, preset, file, command line.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Config> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                parse_table(&text, &p.display().to_string())?
            }
            None => Table::new(),
        };
        let preset = overrides.preset.clone().or_else(|| {
            file.get("preset")
                .and_then(|v| v.as_str())
                .map(String::from)
        });
        let mut table = match &preset {
            Some(name) => {
                let text = presets::lookup(name).ok_or_else(|| {
                    CliError::Usage(format!(
                        "unknown preset '{name}' (known: {})",
                        presets::NAMES.join(", ")
                    ))
                })?;
                parse_table(text, name)?
            }
            None => Table::new(),
        };
        merge(&mut table, file);
        if let Some(name) = preset {
            table.insert("preset".into(), Value::String(name));
        }
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed)
                .map_err(|_| CliError::Usage("seed must fit in 63 bits".into()))?;
            table.insert("seed".into(), Value::Integer(seed));
        }
        if let Some(out) = &overrides.out {
            let output = table
                .entry("output")
                .or_insert_with(|| Value::Table(Table::new()));
            if let Value::Table(t) = output {
                t.insert("dir".into(), Value::String(out.display().to_string()));
            }
        }
        let config: Config = Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Config> {
        let config: Config = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CliError::Config(m.into()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be nonnegative");
        }
        if self.output.every == 0 {
            return bad("output.every must be at least 1");
        }
        if let EtaSpec::Constant(eta) = self.eta {
            if !(0.0..=1.0).contains(&eta) {
                return bad("eta must lie in [0, 1]");
            }
        }
        if self.mesh.kind == MeshKind::File && self.mesh.path.is_none() {
            return bad("mesh.kind = \"file\" needs mesh.path");
        }
        if self.profile == Profile::HighwayEmbedded
            && self.mesh.kind == MeshKind::Structured
            && self.mesh.lx != 24.0
        {
            return bad("the embedded highway is defined on [0, 24]^2");
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let m = &self.mesh;
        match m.kind {
            MeshKind::Structured => Ok(structured_quad_mesh(m.lx, m.ly, m.nx, m.ny)?),
            MeshKind::City => Ok(profiles::city_mesh(m.n, self.seed)?),
            MeshKind::File => mesh_io::read_mesh(m.path.as_deref().expect("validated")),
        }
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_b: self.sigma_b,
            sigma_rho: self.sigma_rho,
            delta_b: self.delta_b,
            delta_rho: self.delta_rho,
            seed: self.seed,
        }
    }

    /// Continuum coefficients, initial `B` and initial `rho` on `mesh`.
    pub fn continuum(&self, mesh: &Mesh) -> Result<(NondimParams, Coefficient, Coefficient)> {
        let eta = match self.eta {
            EtaSpec::Constant(v) => Coefficient::Constant(v),
            EtaSpec::Profile(EtaProfile::Banded) => profiles::piecewise_eta(mesh),
        };
        let (a_st, source, b0) = match self.profile {
            Profile::None => (
                Coefficient::Constant(self.a_st),
                Coefficient::Constant(self.source),
                Coefficient::Constant(self.b0),
            ),
            Profile::HighwaySquare => {
                let (lo, hi) = mesh.bounding_box();
                let hw =
                    profiles::highway_square(mesh, (hi[0] - lo[0]).max(hi[1] - lo[1]), self.seed);
                (hw.a_st, hw.source, hw.b0)
            }
            Profile::HighwayEmbedded => {
                let hw = profiles::highway_embedded(mesh, self.seed);
                (hw.a_st, hw.source, hw.b0)
            }
        };
        let params = NondimParams {
            eta,
            a_st,
            source,
            theta_over_omega: self.theta_over_omega,
            scales: None,
        };
        params.validate()?;
        Ok((params, b0, Coefficient::Constant(self.rho0)))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            mode: match s.mode {
                ModeName::Loose => CouplingMode::Loose,
                ModeName::Strong => CouplingMode::Strong,
                ModeName::Monolithic => CouplingMode::Monolithic,
            },
            tol1: s.tol1,
            tol2: s.tol2,
            max_fixed_point_iters: s.max_iters,
            dt: self.dt,
            linear: SolverOptions {
                tol: s.linear_tol,
                ..SolverOptions::default()
            },
            norm: match s.norm {
                NormName::Consistent => NormKind::Consistent,
                NormName::Lumped => NormKind::Lumped,
            },
            ..SolverConfig::default()
        }
    }

    /// Lattice model and engine. The lattice matches a structured mesh node
    /// for node, the nondimensional spacing `2 sqrt(omega dt)` matches the
    /// mesh spacing, and `Gamma = source omega^2 / theta`.
    pub fn abm(&self) -> Result<(AbmModel, Engine, f64)> {
        let a = &self.abm;
        if self.mesh.kind != MeshKind::Structured && (a.nx.is_none() || a.ny.is_none()) {
            return Err(CliError::Config(
                "the lattice model needs abm.nx and abm.ny on non-structured meshes".into(),
            ));
        }
        let nx = a.nx.unwrap_or(self.mesh.nx + 1);
        let ny = a.ny.unwrap_or(self.mesh.ny + 1);
        let h_nd = self.mesh.lx / (nx - 1).max(1) as f64;
        let dt = a.dt.unwrap_or(h_nd * h_nd / (4.0 * a.omega));
        let eta = match (a.eta, self.eta) {
            (Some(e), _) | (None, EtaSpec::Constant(e)) => e,
            (None, EtaSpec::Profile(_)) => {
                return Err(CliError::Config(
                    "the lattice model needs a constant abm.eta".into(),
                ));
            }
        };
        let params = DimensionalParams {
            theta: a.theta,
            omega: a.omega,
            gamma: a.gamma.unwrap_or(self.source * a.omega * a.omega / a.theta),
            eta,
            a_static: Coefficient::Constant(a.a_static.unwrap_or(self.a_st * a.omega)),
            lattice_h: 1.0,
            dt,
        };
        let model = AbmModel::new(Lattice::new(nx, ny, 1.0)?, params)?;
        let engine = match a.engine {
            EngineName::Deterministic => Engine::Deterministic,
            EngineName::Stochastic => Engine::Stochastic { seed: self.seed },
        };
        let t_end = a.t_end.unwrap_or(self.t_end / a.omega);
        Ok((model, engine, t_end))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn defaults_and_layering() {
        let c = Config::load(
            None,
            &Overrides {
                preset: Some("case3".into()),
                seed: Some(7),
                out: Some("x".into()),
            },
        )
        .unwrap();
        assert_eq!(c.eta, EtaSpec::Constant(0.03));
        assert_eq!(c.seed, 7);
        assert_eq!(c.output.dir, PathBuf::from("x"));
        assert_eq!(c.preset.as_deref(), Some("case3"));
        assert!(c.sigma_b > 0.0);
    }

    #[test]
    fn file_overrides_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "preset = \"case2\"\nt_end = 4.0\n[solver]\ntol1 = 1e-3\n[mesh]\nnx = 10\n",
        )
        .unwrap();
        let c = Config::load(Some(&path), &Overrides::default()).unwrap();
        assert_eq!(c.eta, EtaSpec::Constant(0.3));
        assert_eq!(c.t_end, 4.0);
        assert_eq!(c.solver.tol1, 1e-3);
        assert_eq!(c.mesh.nx, 10);
        assert_eq!(c.mesh.ny, 100);
    }

    #[test]
    fn rejects_unknown_keys_and_presets() {
        assert!(matches!(
            Config::from_toml("etta = 0.3"),
            Err(CliError::Config(_))
        ));
        let err = Config::load(
            None,
            &Overrides {
                preset: Some("nope".into()),
                ..Overrides::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Usage(_)));
        assert!(Config::from_toml("eta = 2.0").is_err());
        assert!(Config::from_toml("eta = \"banded\"").is_ok());
    }

    #[test]
    fn lattice_matches_mesh() {
        let c = Config::from_toml("[mesh]\nnx = 200\nny = 200\n").unwrap();
        let (model, engine, t_end) = c.abm().unwrap();
        assert_eq!(engine, Engine::Deterministic);
        assert_eq!(model.lattice().site_count(), 201 * 201);
        let p = model.params();
        assert_relative_eq!(2.0 * (p.omega * p.dt).sqrt(), 0.08, max_relative = 1e-12);
        assert_relative_eq!(
            p.gamma * p.theta / (p.omega * p.omega),
            1.0,
            max_relative = 1e-12
        );
        assert_relative_eq!(t_end, 3000.0, max_relative = 1e-12);
    }

    #[test]
    fn roundtrip() {
        let c = Config::load(
            None,
            &Overrides {
                preset: Some("highway-square".into()),
                ..Overrides::default()
            },
        )
        .unwrap();
        let back = Config::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
