//! Time stepping for the nondimensional continuum model.
//!
//! Each step solves the implicit-Euler system
//!
//! ```text
//! [(1+dt)/dt M + K_eta - N(rho)] A   = b_st + M A^n / dt
//! [1/dt M + K - D(A) + N(A)]     rho = b_s  + M rho^n / dt
//! ```
//!
//! either once in sequence ([`CouplingMode::Loose`]), by fixed-point
//! iteration until both relative increments drop below their tolerances
//! ([`CouplingMode::Strong`]), or monolithically with Newton's method on a
//! dense Jacobian ([`CouplingMode::Monolithic`], small meshes only).

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, DEFAULT_FLOOR};
use crate::field::{apply_sparse_noise, NoiseTarget, ScalarField};
use crate::linsolve::{lu_solve, solve, CsrMatrix, DenseMatrix, SolveReport, SolverOptions};
use crate::mesh::Mesh;
use crate::params::{Coefficient, NoiseSpec, NondimParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    Loose,
    Strong,
    Monolithic,
}

/// Discrete L2 norm used by the stopping criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `v^T M v` with the consistent mass matrix.
    Consistent,
    /// Row-sum lumped mass.
    Lumped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub mode: CouplingMode,
    pub tol1: f64,
    pub tol2: f64,
    pub max_fixed_point_iters: usize,
    pub dt: f64,
    pub linear: SolverOptions,
    pub norm: NormKind,
    /// Positivity floor for `A` at quadrature points.
    pub floor: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mode: CouplingMode::Strong,
            tol1: 1e-6,
            tol2: 1e-6,
            max_fixed_point_iters: 200,
            dt: 1.0 / 25.0,
            linear: SolverOptions::default(),
            norm: NormKind::Consistent,
            floor: DEFAULT_FLOOR,
            newton_tol: 1e-12,
            newton_max_iters: 50,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("time step must be positive"));
        }
        if !(self.tol1 > 0.0 && self.tol2 > 0.0) {
            return Err(Error::param("fixed-point tolerances must be positive"));
        }
        if self.max_fixed_point_iters == 0 {
            return Err(Error::param("max_fixed_point_iters must be at least 1"));
        }
        if !(self.linear.tol > 0.0) {
            return Err(Error::param("linear solver tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeState {
    pub time: f64,
    pub step_index: usize,
    pub a: ScalarField,
    pub rho: ScalarField,
}

impl PdeState {
    pub fn new(a: ScalarField, rho: ScalarField) -> Result<Self> {
        if a.mesh_id() != rho.mesh_id() {
            return Err(Error::DomainMismatch(
                "A and rho live on different meshes".into(),
            ));
        }
        Ok(PdeState {
            time: 0.0,
            step_index: 0,
            a,
            rho,
        })
    }

    /// Constant fields.
    pub fn uniform(mesh: &Mesh, a: f64, rho: f64) -> Self {
        PdeState {
            time: 0.0,
            step_index: 0,
            a: ScalarField::constant(mesh, a),
            rho: ScalarField::constant(mesh, rho),
        }
    }
}

/// Initial data `A = A_st + B0 + chi xi`, `rho = rho0 + chi xi`.
pub fn initial_state(
    mesh: &Mesh,
    params: &NondimParams,
    b0: &Coefficient,
    rho0: &Coefficient,
    noise: &NoiseSpec,
) -> Result<PdeState> {
    let n = mesh.node_count();
    for c in [&params.a_st, b0, rho0] {
        c.check_len(n)?;
    }
    noise.validate()?;
    let a: Vec<f64> = (0..n).map(|i| params.a_st.at(i) + b0.at(i)).collect();
    let a = apply_sparse_noise(
        &ScalarField::from_values(mesh, a)?,
        noise,
        NoiseTarget::Attractiveness,
    );
    let rho = apply_sparse_noise(
        &ScalarField::from_values(mesh, rho0.to_nodal(n))?,
        noise,
        NoiseTarget::Density,
    );
    PdeState::new(a, rho)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    pub fixed_point_iters: usize,
    pub incr_a: Vec<f64>,
    pub incr_rho: Vec<f64>,
    pub reports_a: Vec<SolveReport>,
    pub reports_rho: Vec<SolveReport>,
    /// Most negative `rho` after the step, if any node undershoots zero.
    pub rho_undershoot: Option<(usize, f64)>,
}

impl StepStats {
    pub fn last_increments(&self) -> (f64, f64) {
        (
            self.incr_a.last().copied().unwrap_or(0.0),
            self.incr_rho.last().copied().unwrap_or(0.0),
        )
    }

    pub fn linear_iterations(&self) -> (usize, usize) {
        (
            self.reports_a.iter().map(|r| r.iterations).sum(),
            self.reports_rho.iter().map(|r| r.iterations).sum(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual 2-norm before each update and after the last one.
    pub residuals: Vec<f64>,
}

/// Holds everything that depends on the mesh, coefficients and `dt` but not
/// on the state.
#[derive(Debug, Clone)]
pub struct Stepper {
    space: FemSpace,
    mesh_id: crate::mesh::MeshId,
    params: NondimParams,
    cfg: SolverConfig,
    mass: CsrMatrix,
    lumped: Vec<f64>,
    stiff_eta: CsrMatrix,
    stiff_unit: CsrMatrix,
    /// `(1+dt)/dt M + K_eta`
    base_a: CsrMatrix,
    /// `M/dt + K`
    base_rho: CsrMatrix,
    static_load: Vec<f64>,
    source_load: Vec<f64>,
    work: CsrMatrix,
    system: CsrMatrix,
}

impl Stepper {
    pub fn new(mesh: &Mesh, params: &NondimParams, cfg: SolverConfig) -> Result<Self> {
        params.validate()?;
        cfg.validate()?;
        let n = mesh.node_count();
        for c in [&params.eta, &params.a_st, &params.source] {
            c.check_len(n)?;
        }
        let space = FemSpace::new(mesh);
        let mass = space.mass();
        let lumped = mass.spmv(&alloc::vec![1.0; n])?;
        let stiff_eta = space.stiffness(&params.eta)?;
        let stiff_unit = space.stiffness(&Coefficient::Constant(1.0))?;
        let dt = cfg.dt;
        let mut base_a = space.zeros();
        base_a.assign_combination(&[((1.0 + dt) / dt, &mass), (1.0, &stiff_eta)])?;
        let mut base_rho = space.zeros();
        base_rho.assign_combination(&[(1.0 / dt, &mass), (1.0, &stiff_unit)])?;
        let static_load = space.static_attractiveness_load(&params.a_st, &params.eta, &mass)?;
        let source_load = space.rhs_density(&params.source, &alloc::vec![0.0; n], dt, &mass)?;
        let work = space.zeros();
        let system = space.zeros();
        Ok(Stepper {
            space,
            mesh_id: mesh.id(),
            params: params.clone(),
            cfg,
            mass,
            lumped,
            stiff_eta,
            stiff_unit,
            base_a,
            base_rho,
            static_load,
            source_load,
            work,
            system,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn params(&self) -> &NondimParams {
        &self.params
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn node_count(&self) -> usize {
        self.space.node_count()
    }

    fn check_state(&self, state: &PdeState) -> Result<()> {
        if state.a.mesh_id() != self.mesh_id || state.rho.mesh_id() != self.mesh_id {
            return Err(Error::DomainMismatch(
                "state does not belong to the stepper's mesh".into(),
            ));
        }
        Ok(())
    }

    /// Discrete L2 norm selected by the configuration.
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self.cfg.norm {
            NormKind::Consistent => {
                libm::sqrt(self.mass.quadratic_form(v).unwrap_or(f64::NAN).max(0.0))
            }
            NormKind::Lumped => {
                libm::sqrt(v.iter().zip(&self.lumped).map(|(x, m)| m * x * x).sum())
            }
        }
    }

    fn relative_increment(&self, new: &[f64], old: &[f64]) -> f64 {
        let diff: Vec<f64> = new.iter().zip(old).map(|(a, b)| a - b).collect();
        let d = self.norm(&diff);
        let o = self.norm(old);
        if o > 0.0 {
            d / o
        } else {
            d
        }
    }

    fn mass_over_dt(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.mass.spmv(v)?;
        let s = 1.0 / self.cfg.dt;
        out.iter_mut().for_each(|x| *x *= s);
        Ok(out)
    }

    fn rhs_a(&self, a_n: &[f64]) -> Result<Vec<f64>> {
        let mut b = self.mass_over_dt(a_n)?;
        b.iter_mut()
            .zip(&self.static_load)
            .for_each(|(x, s)| *x += s);
        Ok(b)
    }

    fn rhs_rho(&self, rho_n: &[f64]) -> Result<Vec<f64>> {
        let mut b = self.mass_over_dt(rho_n)?;
        b.iter_mut()
            .zip(&self.source_load)
            .for_each(|(x, s)| *x += s);
        Ok(b)
    }

    /// Step 1: attractiveness with frozen density.
    fn solve_a(
        &mut self,
        rho_k: &[f64],
        rhs: &[f64],
        guess: &[f64],
    ) -> Result<(Vec<f64>, SolveReport)> {
        self.work = self.space.weighted_mass(rho_k)?;
        self.system
            .assign_combination(&[(1.0, &self.base_a), (-1.0, &self.work)])?;
        solve(&self.system, rhs, Some(guess), &self.cfg.linear)
    }

    /// Step 2: density with the new attractiveness.
    fn solve_rho(
        &mut self,
        a: &[f64],
        rhs: &[f64],
        guess: &[f64],
    ) -> Result<(Vec<f64>, SolveReport)> {
        self.space
            .reaction_minus_advection_into(a, self.cfg.floor, &mut self.work)?;
        self.system
            .assign_combination(&[(1.0, &self.base_rho), (1.0, &self.work)])?;
        solve(&self.system, rhs, Some(guess), &self.cfg.linear)
    }

    /// Advances one step with the configured coupling mode.
    pub fn step(&mut self, state: &PdeState) -> Result<(PdeState, StepStats)> {
        match self.cfg.mode {
            CouplingMode::Loose => self.step_loose(state),
            CouplingMode::Strong => self.step_strong(state),
            CouplingMode::Monolithic => {
                let (next, report) = self.step_monolithic_newton(state)?;
                let stats = StepStats {
                    fixed_point_iters: report.iterations,
                    ..StepStats::default()
                };
                Ok((next, stats))
            }
        }
    }

    /// One pass of Steps 1 and 2 using `rho^n`.
    pub fn step_loose(&mut self, state: &PdeState) -> Result<(PdeState, StepStats)> {
        self.fixed_point(state, 1, false)
    }

    /// Fixed-point iteration of Steps 1 and 2 until both increments are below
    /// their tolerances.
    pub fn step_strong(&mut self, state: &PdeState) -> Result<(PdeState, StepStats)> {
        let max = self.cfg.max_fixed_point_iters;
        self.fixed_point(state, max, true)
    }

    fn fixed_point(
        &mut self,
        state: &PdeState,
        max_passes: usize,
        check: bool,
    ) -> Result<(PdeState, StepStats)> {
        self.check_state(state)?;
        let a_n = state.a.values();
        let rho_n = state.rho.values();
        let rhs_a = self.rhs_a(a_n)?;
        let rhs_rho = self.rhs_rho(rho_n)?;
        let mut a_k = a_n.to_vec();
        let mut rho_k = rho_n.to_vec();
        let mut stats = StepStats::default();
        let time = state.time + self.cfg.dt;

        loop {
            let (a_new, rep_a) = self.solve_a(&rho_k, &rhs_a, &a_k)?;
            let (rho_new, rep_rho) = match self.solve_rho(&a_new, &rhs_rho, &rho_k) {
                // A positive A^n that produces a non-positive iterate means
                // the coupling has left the admissible set: a divergence,
                // not bad input.
                Err(Error::Degenerate { .. }) if a_n.iter().all(|v| *v > self.cfg.floor) => {
                    return Err(Error::FixedPoint {
                        time,
                        iterations: stats.fixed_point_iters + 1,
                        incr_a: self.relative_increment(&a_new, &a_k),
                        incr_rho: f64::INFINITY,
                    });
                }
                other => other?,
            };
            let incr_a = self.relative_increment(&a_new, &a_k);
            let incr_rho = self.relative_increment(&rho_new, &rho_k);
            stats.fixed_point_iters += 1;
            stats.incr_a.push(incr_a);
            stats.incr_rho.push(incr_rho);
            stats.reports_a.push(rep_a);
            stats.reports_rho.push(rep_rho);
            a_k = a_new;
            rho_k = rho_new;

            if !check {
                break;
            }
            if incr_a < self.cfg.tol1 && incr_rho < self.cfg.tol2 {
                break;
            }
            if stats.fixed_point_iters >= max_passes
                || !(incr_a.is_finite() && incr_rho.is_finite())
            {
                return Err(Error::FixedPoint {
                    time,
                    iterations: stats.fixed_point_iters,
                    incr_a,
                    incr_rho,
                });
            }
        }

        self.finish(state, a_k, rho_k, stats)
    }

    fn finish(
        &self,
        state: &PdeState,
        a: Vec<f64>,
        rho: Vec<f64>,
        mut stats: StepStats,
    ) -> Result<(PdeState, StepStats)> {
        if let Some((node, &value)) = a.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Positivity { node, value });
        }
        stats.rho_undershoot = rho
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, v)| *v < 0.0)
            .min_by(|x, y| x.1.total_cmp(&y.1));
        let next = PdeState {
            time: state.time + self.cfg.dt,
            step_index: state.step_index + 1,
            a: ScalarField::from_values_unchecked(self.mesh_id, a),
            rho: ScalarField::from_values_unchecked(self.mesh_id, rho),
        };
        Ok((next, stats))
    }

    /// Residuals of both equations at `(a, rho)`.
    fn residual(
        &self,
        a: &[f64],
        rho: &[f64],
        rhs_a: &[f64],
        rhs_rho: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut sys_a = self.space.zeros();
        sys_a
            .assign_combination(&[(1.0, &self.base_a), (-1.0, &self.space.weighted_mass(rho)?)])?;
        let mut r_a = sys_a.spmv(a)?;
        r_a.iter_mut().zip(rhs_a).for_each(|(r, b)| *r -= b);

        let mut coupling = self.space.zeros();
        self.space
            .reaction_minus_advection_into(a, self.cfg.floor, &mut coupling)?;
        let mut sys_rho = self.space.zeros();
        sys_rho.assign_combination(&[(1.0, &self.base_rho), (1.0, &coupling)])?;
        let mut r_rho = sys_rho.spmv(rho)?;
        r_rho.iter_mut().zip(rhs_rho).for_each(|(r, b)| *r -= b);
        Ok((r_a, r_rho))
    }

    /// Solves the fully coupled step with Newton's method and a dense LU
    /// factorization of the `2n x 2n` Jacobian. Intended for small meshes.
    ///
    /// Stops when `||R||_2 <= newton_tol * max(1, ||b||_2)`.
    pub fn step_monolithic_newton(&mut self, state: &PdeState) -> Result<(PdeState, NewtonReport)> {
        self.check_state(state)?;
        let n = self.node_count();
        let rhs_a = self.rhs_a(state.a.values())?;
        let rhs_rho = self.rhs_rho(state.rho.values())?;
        let scale = libm::sqrt(rhs_a.iter().chain(&rhs_rho).map(|v| v * v).sum::<f64>()).max(1.0);
        let mut a = state.a.values().to_vec();
        let mut rho = state.rho.values().to_vec();
        let mut residuals = Vec::new();

        for iteration in 0..=self.cfg.newton_max_iters {
            let (r_a, r_rho) = self.residual(&a, &rho, &rhs_a, &rhs_rho)?;
            let norm = libm::sqrt(r_a.iter().chain(&r_rho).map(|v| v * v).sum::<f64>());
            residuals.push(norm);
            if !norm.is_finite() {
                break;
            }
            if norm <= self.cfg.newton_tol * scale {
                let report = NewtonReport {
                    iterations: iteration,
                    residuals,
                };
                let (next, _) = self.finish(state, a, rho, StepStats::default())?;
                return Ok((next, report));
            }
            if iteration == self.cfg.newton_max_iters {
                break;
            }

            let n_rho = self.space.weighted_mass(&rho)?;
            let n_a = self.space.weighted_mass(&a)?;
            let mut coupling = self.space.zeros();
            self.space
                .reaction_minus_advection_into(&a, self.cfg.floor, &mut coupling)?;
            let jd = self.space.divergence_jacobian(&a, &rho, self.cfg.floor)?;

            let mut jac = DenseMatrix::zeros(2 * n);
            let mut put = |m: &CsrMatrix, s: f64, r0: usize, c0: usize| {
                for i in 0..n {
                    for (j, v) in m.row(i) {
                        jac.add(r0 + i, c0 + j, s * v);
                    }
                }
            };
            put(&self.base_a, 1.0, 0, 0);
            put(&n_rho, -1.0, 0, 0);
            put(&n_a, -1.0, 0, n);
            put(&self.base_rho, 1.0, n, n);
            put(&coupling, 1.0, n, n);
            put(&jd, -1.0, n, 0);
            put(&n_rho, 1.0, n, 0);

            let mut rhs: Vec<f64> = r_a.iter().chain(&r_rho).map(|v| -v).collect();
            rhs = lu_solve(jac, &rhs)?;
            for i in 0..n {
                a[i] += rhs[i];
                rho[i] += rhs[n + i];
            }
        }
        Err(Error::Newton {
            iterations: self.cfg.newton_max_iters,
            residual: residuals.last().copied().unwrap_or(f64::NAN),
        })
    }

    pub fn stiffness_eta(&self) -> &CsrMatrix {
        &self.stiff_eta
    }

    pub fn stiffness_unit(&self) -> &CsrMatrix {
        &self.stiff_unit
    }
}

/// Per-step summary as written to the statistics CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub iters: usize,
    pub incr_a: f64,
    pub incr_rho: f64,
    pub min_a: f64,
    pub max_a: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub linear_iters_1: usize,
    pub linear_iters_2: usize,
}

impl StepRecord {
    pub fn new(state: &PdeState, stats: &StepStats) -> Self {
        let (incr_a, incr_rho) = stats.last_increments();
        let (l1, l2) = stats.linear_iterations();
        let (min_a, max_a) = min_max(state.a.values());
        let (min_rho, max_rho) = min_max(state.rho.values());
        StepRecord {
            step: state.step_index,
            time: state.time,
            iters: stats.fixed_point_iters,
            incr_a,
            incr_rho,
            min_a,
            max_a,
            min_rho,
            max_rho,
            linear_iters_1: l1,
            linear_iters_2: l2,
        }
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        })
}

pub enum RunEvent<'a> {
    Snapshot(&'a PdeState),
    /// Every step, with the state it produced.
    Step {
        record: &'a StepRecord,
        stats: &'a StepStats,
        state: &'a PdeState,
    },
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::param("t_end must be finite and nonnegative"));
    }
    let steps = libm::round(t_end / dt);
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::param(alloc::format!(
            "t_end {t_end} is not a multiple of dt {dt}"
        )));
    }
    Ok(steps as usize)
}

/// Advances `initial` to `t_end`. The observer sees the initial snapshot,
/// every step record, and a snapshot every `every` steps and at the end.
/// An error from a step is returned after all earlier events were delivered.
pub fn run<F>(
    stepper: &mut Stepper,
    initial: PdeState,
    t_end: f64,
    every: usize,
    mut observer: F,
) -> Result<PdeState>
where
    F: FnMut(RunEvent<'_>) -> Result<()>,
{
    if every == 0 {
        return Err(Error::param("snapshot interval must be at least 1"));
    }
    let dt = stepper.config().dt;
    let steps = step_count(t_end, dt)?;
    let start = initial.step_index;
    let t0 = initial.time;
    observer(RunEvent::Snapshot(&initial))?;
    let mut state = initial;
    for k in 1..=steps {
        let (mut next, stats) = stepper.step(&state)?;
        next.time = t0 + k as f64 * dt;
        let record = StepRecord::new(&next, &stats);
        observer(RunEvent::Step {
            record: &record,
            stats: &stats,
            state: &next,
        })?;
        if (next.step_index - start).is_multiple_of(every) || k == steps {
            observer(RunEvent::Snapshot(&next))?;
        }
        state = next;
    }
    Ok(state)
}
