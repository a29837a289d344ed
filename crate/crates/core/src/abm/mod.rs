//! Agent-based burglary model on a Cartesian lattice.
//!
//! Quantities here are dimensional. Site `s` carries dynamic attractiveness
//! `B_s` and criminal count `n_s`; the total attractiveness is
//! `A_s = A_st_s + B_s`. Each step:
//!
//! 1. every criminal burgles with probability `p_s = 1 - exp(-A_s dt)` and is
//!    then removed;
//! 2. the others move to one of the four neighbour slots with probability
//!    proportional to the slot's attractiveness;
//! 3. new criminals appear at rate `Gamma`;
//! 4. `B` diffuses (weight `eta`), decays (rate `omega`) and grows by `theta`
//!    per burglary.
//!
//! Both the `B` Laplacian and the walk use mirrored ghost slots at the
//! boundary: a missing neighbour counts with the site's own value, and a
//! criminal who picks it stays put. This keeps homogeneous states exactly
//! stationary.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};

use crate::error::{Error, Result};
use crate::mesh::Lattice;
use crate::params::{DimensionalParams, NondimParams};
use crate::rng;

/// `p = 1 - exp(-a dt)`, evaluated without cancellation for small `a dt`.
#[inline]
pub fn burglary_probability(a: f64, dt: f64) -> f64 {
    -libm::expm1(-a * dt)
}

/// Homogeneous equilibrium `(B, n)` of the lattice model for constant `A_st`.
pub fn lattice_equilibrium(params: &DimensionalParams) -> Result<(f64, f64)> {
    let a_st = params.a_static.as_constant().ok_or_else(|| {
        Error::param("lattice equilibrium needs a constant static attractiveness")
    })?;
    if !(params.omega > 0.0) {
        return Err(Error::param("omega must be positive"));
    }
    let b_bar = params.theta * params.gamma / params.omega;
    let p = burglary_probability(a_st + b_bar, params.dt);
    if p == 0.0 {
        return Err(Error::param("equilibrium attractiveness is zero"));
    }
    Ok((b_bar, params.gamma * params.dt / p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub b: Vec<f64>,
    pub n: Vec<f64>,
    pub t: f64,
    pub step: usize,
}

impl LatticeState {
    pub fn uniform(lattice: &Lattice, b: f64, n: f64) -> Self {
        LatticeState {
            b: alloc::vec![b; lattice.site_count()],
            n: alloc::vec![n; lattice.site_count()],
            t: 0.0,
            step: 0,
        }
    }

    pub fn total_criminals(&self) -> f64 {
        self.n.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Mean-field update equations.
    Deterministic,
    /// Sampled burglaries, walks and arrivals with the given seed.
    Stochastic { seed: u64 },
}

/// Per-step totals written to the ABM CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbmTotals {
    pub step: usize,
    pub time: f64,
    pub total_n: f64,
    pub total_burglaries: f64,
    pub mean_b: f64,
    /// Sites where `B` went negative (reported, not corrected).
    pub negative_b: usize,
}

/// A lattice with its dimensional parameters.
#[derive(Debug, Clone)]
pub struct AbmModel {
    lattice: Lattice,
    params: DimensionalParams,
    a_static: Vec<f64>,
}

impl AbmModel {
    pub fn new(lattice: Lattice, params: DimensionalParams) -> Result<Self> {
        lattice.validate()?;
        params.validate()?;
        params.a_static.check_len(lattice.site_count())?;
        let a_static = params.a_static.to_nodal(lattice.site_count());
        Ok(AbmModel {
            lattice,
            params,
            a_static,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn params(&self) -> &DimensionalParams {
        &self.params
    }

    fn check(&self, state: &LatticeState) -> Result<()> {
        let n = self.lattice.site_count();
        for len in [state.b.len(), state.n.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(())
    }

    pub fn attractiveness(&self, b: &[f64]) -> Vec<f64> {
        self.a_static.iter().zip(b).map(|(s, b)| s + b).collect()
    }

    /// `T_s`: attractiveness summed over the four slots of `s`.
    fn slot_weights(&self, a: &[f64], s: usize) -> ([f64; 4], f64) {
        let slots = self.lattice.neighbour_slots(s);
        let mut w = [0.0; 4];
        for (k, slot) in slots.iter().enumerate() {
            w[k] = a[slot.unwrap_or(s)];
        }
        (w, w.iter().sum())
    }

    fn totals(&self, state: &LatticeState, burglaries: f64) -> AbmTotals {
        let sites = self.lattice.site_count() as f64;
        AbmTotals {
            step: state.step,
            time: state.t,
            total_n: state.total_criminals(),
            total_burglaries: burglaries,
            mean_b: state.b.iter().sum::<f64>() / sites,
            negative_b: state.b.iter().filter(|&&b| b < 0.0).count(),
        }
    }

    /// `B' = [(1 - eta) B_s + eta/4 sum B_slot] (1 - omega dt) + theta E_s`.
    pub fn step_b(&self, b: &[f64], events: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let decay = 1.0 - p.omega * p.dt;
        (0..self.lattice.site_count())
            .map(|s| {
                let around: f64 = self
                    .lattice
                    .neighbour_slots(s)
                    .iter()
                    .map(|r| b[r.unwrap_or(s)])
                    .sum();
                ((1.0 - p.eta) * b[s] + 0.25 * p.eta * around) * decay + p.theta * events[s]
            })
            .collect()
    }

    /// `n'_s = A_s sum_{slots r} n_r (1 - p_r) / T_r + Gamma dt`, where a
    /// ghost slot of `s` refers to `s` itself.
    pub fn step_n_deterministic(&self, a: &[f64], n: &[f64]) -> Result<Vec<f64>> {
        let sites = self.lattice.site_count();
        let dt = self.params.dt;
        let mut flux = Vec::with_capacity(sites);
        for s in 0..sites {
            let (_, total) = self.slot_weights(a, s);
            if !(total > 0.0) {
                return Err(Error::ZeroNeighbourhood { site: s });
            }
            flux.push(n[s] * (1.0 - burglary_probability(a[s], dt)) / total);
        }
        Ok((0..sites)
            .map(|s| {
                let inflow: f64 = self
                    .lattice
                    .neighbour_slots(s)
                    .iter()
                    .map(|r| flux[r.unwrap_or(s)])
                    .sum();
                a[s] * inflow + self.params.gamma * dt
            })
            .collect())
    }

    /// Mean-field step with `E_s = n_s p_s`.
    pub fn step_deterministic(&self, state: &LatticeState) -> Result<(LatticeState, AbmTotals)> {
        self.check(state)?;
        let a = self.attractiveness(&state.b);
        let events: Vec<f64> = a
            .iter()
            .zip(&state.n)
            .map(|(&a, &n)| n * burglary_probability(a, self.params.dt))
            .collect();
        let n = self.step_n_deterministic(&a, &state.n)?;
        let b = self.step_b(&state.b, &events);
        let next = LatticeState {
            b,
            n,
            t: state.t + self.params.dt,
            step: state.step + 1,
        };
        let totals = self.totals(&next, events.iter().sum());
        Ok((next, totals))
    }

    /// Sampled step. Each lattice row draws from its own stream derived from
    /// `(seed, step, row)`, so results do not depend on traversal order.
    pub fn step_stochastic(
        &self,
        state: &LatticeState,
        seed: u64,
    ) -> Result<(LatticeState, AbmTotals)> {
        self.check(state)?;
        let p = &self.params;
        let a = self.attractiveness(&state.b);
        let sites = self.lattice.site_count();
        let nx = self.lattice.nx;
        let mut events = alloc::vec![0.0; sites];
        let mut n_next = alloc::vec![0.0; sites];
        let arrivals = if p.gamma > 0.0 {
            Some(
                Poisson::new(p.gamma * p.dt)
                    .map_err(|_| Error::param("invalid criminal generation rate"))?,
            )
        } else {
            None
        };
        let step_seed = rng::derive_seed(seed, state.step as u64);

        for row in 0..self.lattice.ny {
            let mut r = rng::stream(rng::derive_seed(step_seed, row as u64));
            for s in row * nx..(row + 1) * nx {
                let count = state.n[s];
                if count < 0.0 || count != libm::trunc(count) {
                    return Err(Error::param(
                        "stochastic engine needs nonnegative integer criminal counts",
                    ));
                }
                let mut left = count as u64;
                if left > 0 {
                    let prob = burglary_probability(a[s], p.dt);
                    let hits = sample_binomial(&mut r, left, prob);
                    events[s] = hits as f64;
                    left -= hits;
                }
                if left > 0 {
                    let (w, total) = self.slot_weights(&a, s);
                    if !(total > 0.0) {
                        return Err(Error::ZeroNeighbourhood { site: s });
                    }
                    // Multinomial split as a chain of conditional binomials.
                    let slots = self.lattice.neighbour_slots(s);
                    let mut rest = total;
                    for k in 0..4 {
                        let moved = if k == 3 {
                            left
                        } else {
                            sample_binomial(&mut r, left, (w[k] / rest).min(1.0))
                        };
                        n_next[slots[k].unwrap_or(s)] += moved as f64;
                        left -= moved;
                        rest -= w[k];
                        if left == 0 {
                            break;
                        }
                    }
                }
                if let Some(dist) = &arrivals {
                    let born: f64 = dist.sample(&mut r);
                    n_next[s] += born;
                }
            }
        }

        let b = self.step_b(&state.b, &events);
        let next = LatticeState {
            b,
            n: n_next,
            t: state.t + p.dt,
            step: state.step + 1,
        };
        let totals = self.totals(&next, events.iter().sum());
        Ok((next, totals))
    }

    pub fn step(&self, state: &LatticeState, engine: Engine) -> Result<(LatticeState, AbmTotals)> {
        match engine {
            Engine::Deterministic => self.step_deterministic(state),
            Engine::Stochastic { seed } => self.step_stochastic(state, seed),
        }
    }

    /// Lattice state from nondimensional initial fields: `B = omega B~`,
    /// `n = (omega/theta) rho~`. The stochastic engine gets Poisson counts
    /// with that mean, drawn from a stream derived from `seed`.
    pub fn state_from_nondim(
        &self,
        b_nd: &[f64],
        rho_nd: &[f64],
        engine: Engine,
    ) -> Result<LatticeState> {
        let sites = self.lattice.site_count();
        for v in [b_nd, rho_nd] {
            if v.len() != sites {
                return Err(Error::DimensionMismatch {
                    expected: sites,
                    found: v.len(),
                });
            }
        }
        let p = &self.params;
        if !(p.theta > 0.0) {
            return Err(Error::param(
                "theta must be positive to convert densities to counts",
            ));
        }
        let b = b_nd.iter().map(|v| p.omega * v).collect();
        let mean = rho_nd.iter().map(|v| (p.omega / p.theta * v).max(0.0));
        let n = match engine {
            Engine::Deterministic => mean.collect(),
            Engine::Stochastic { seed } => {
                let mut r = rng::stream(rng::derive_seed(seed, u64::MAX));
                mean.map(|m| {
                    if m > 0.0 {
                        let d: f64 = Poisson::new(m).map(|d| d.sample(&mut r)).unwrap_or(0.0);
                        d
                    } else {
                        0.0
                    }
                })
                .collect()
            }
        };
        Ok(LatticeState {
            b,
            n,
            t: 0.0,
            step: 0,
        })
    }

    /// Nondimensional view of a state for comparison with the continuum model.
    pub fn nondim_view(&self, state: &LatticeState) -> NondimView {
        let p = &self.params;
        let a = self.attractiveness(&state.b);
        NondimView {
            lattice: Lattice {
                h: 2.0 * libm::sqrt(p.omega * p.dt),
                ..self.lattice
            },
            time: p.omega * state.t,
            a: a.iter().map(|v| v / p.omega).collect(),
            rho: state.n.iter().map(|v| p.theta / p.omega * v).collect(),
        }
    }

    /// Continuum parameters matching this model.
    pub fn nondim_params(&self) -> Result<NondimParams> {
        crate::params::nondimensionalize(&self.params)
    }
}

fn sample_binomial<R: Rng>(r: &mut R, n: u64, p: f64) -> u64 {
    if p <= 0.0 || n == 0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p).map(|d| d.sample(r)).unwrap_or(0)
}

/// Attractiveness `A/omega` and density `theta n / omega` on a lattice with
/// spacing `2 sqrt(omega dt)`, at time `omega t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NondimView {
    pub lattice: Lattice,
    pub time: f64,
    pub a: Vec<f64>,
    pub rho: Vec<f64>,
}

pub enum AbmEvent<'a> {
    Snapshot(&'a LatticeState),
    Step(&'a AbmTotals),
}

/// Advances to `t_end` (dimensional). Snapshots go out at the start, every
/// `every` steps and at the end.
pub fn run_abm<F>(
    model: &AbmModel,
    initial: LatticeState,
    engine: Engine,
    t_end: f64,
    every: usize,
    mut observer: F,
) -> Result<LatticeState>
where
    F: FnMut(AbmEvent<'_>) -> Result<()>,
{
    if every == 0 {
        return Err(Error::param("snapshot interval must be at least 1"));
    }
    let dt = model.params().dt;
    let steps = crate::pde::step_count(t_end, dt)?;
    let t0 = initial.t;
    observer(AbmEvent::Snapshot(&initial))?;
    let mut state = initial;
    for k in 1..=steps {
        let (mut next, mut totals) = model.step(&state, engine)?;
        next.t = t0 + k as f64 * dt;
        totals.time = next.t;
        observer(AbmEvent::Step(&totals))?;
        if k % every == 0 || k == steps {
            observer(AbmEvent::Snapshot(&next))?;
        }
        state = next;
    }
    Ok(state)
}
