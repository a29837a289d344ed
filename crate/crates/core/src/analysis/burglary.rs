use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::fem::FemSpace;
use crate::mesh::Mesh;
use crate::pde::PdeState;

/// Running per-element burglary counts
/// `(theta/omega) dt sum_n (1 - exp(-mean_Q(A^n) dt)) int_Q rho^n`.
#[derive(Debug, Clone)]
pub struct BurglaryAccumulator {
    space: FemSpace,
    theta_over_omega: f64,
    dt: f64,
    counts: Vec<f64>,
    last_step: Option<usize>,
}

impl BurglaryAccumulator {
    pub fn new(mesh: &Mesh, theta_over_omega: f64, dt: f64) -> Result<Self> {
        if !(theta_over_omega >= 0.0 && theta_over_omega.is_finite()) {
            return Err(Error::param("theta/omega must be nonnegative"));
        }
        if !(dt > 0.0) {
            return Err(Error::param("time step must be positive"));
        }
        Ok(BurglaryAccumulator {
            space: FemSpace::new(mesh),
            theta_over_omega,
            dt,
            counts: alloc::vec![0.0; mesh.quad_count()],
            last_step: None,
        })
    }

    /// Adds the contribution of one state. States must arrive at consecutive
    /// step indices.
    pub fn add(&mut self, state: &PdeState) -> Result<()> {
        if let Some(last) = self.last_step {
            if state.step_index != last + 1 {
                return Err(Error::MissingSnapshots(alloc::format!(
                    "burglary counts need every step, but step {} follows step {last}; write snapshots every step",
                    state.step_index
                )));
            }
        }
        let (a, rho) = (state.a.values(), state.rho.values());
        if a.len() != self.space.node_count() || rho.len() != self.space.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.space.node_count(),
                found: a.len(),
            });
        }
        let factor = self.theta_over_omega * self.dt;
        for (e, count) in self.counts.iter_mut().enumerate() {
            let mean_a = self.space.element_integral(e, a) / self.space.element_measure(e);
            let p = -libm::expm1(-mean_a * self.dt);
            *count += factor * p * self.space.element_integral(e, rho);
        }
        self.last_step = Some(state.step_index);
        Ok(())
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn into_counts(self) -> Vec<f64> {
        self.counts
    }
}

/// Per-element burglary counts over a history of consecutive states.
pub fn burglary_counts<'a, I>(
    mesh: &Mesh,
    history: I,
    theta_over_omega: f64,
    dt: f64,
) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a PdeState>,
{
    let mut acc = BurglaryAccumulator::new(mesh, theta_over_omega, dt)?;
    for state in history {
        acc.add(state)?;
    }
    Ok(acc.into_counts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;
    use crate::mesh::structured_quad_mesh;
    use approx::assert_relative_eq;
    use std::vec;

    fn history(mesh: &Mesh, steps: usize) -> Vec<PdeState> {
        (0..steps)
            .map(|k| {
                let a = ScalarField::from_fn(mesh, |p| 1.0 + 0.1 * (p[0] + k as f64).sin());
                let rho = ScalarField::from_fn(mesh, |p| 0.5 + 0.2 * (p[1] * p[0]).cos());
                PdeState {
                    time: k as f64 * 0.1,
                    step_index: k,
                    a,
                    rho,
                }
            })
            .collect()
    }

    #[test]
    fn single_element_closed_form() {
        let mesh = structured_quad_mesh(1.0, 1.0, 1, 1).unwrap();
        let state = PdeState::uniform(&mesh, 1.5, 0.7);
        let counts = burglary_counts(&mesh, [&state], 0.3, 0.02).unwrap();
        assert_relative_eq!(
            counts[0],
            0.3 * 0.02 * (1.0 - (-1.5f64 * 0.02).exp()) * 0.7,
            max_relative = 1e-14
        );
        let zero = burglary_counts(&mesh, [&state], 0.0, 0.02).unwrap();
        assert_eq!(zero, vec![0.0]);
    }

    #[test]
    fn uniform_state_gives_uniform_counts() {
        let mesh = structured_quad_mesh(16.0, 16.0, 10, 10).unwrap();
        let states: Vec<PdeState> = (0..5)
            .map(|k| PdeState {
                step_index: k,
                ..PdeState::uniform(&mesh, 31.0 / 30.0, 30.0 / 31.0)
            })
            .collect();
        let counts = burglary_counts(&mesh, &states, 3.5, 0.04).unwrap();
        for c in &counts {
            assert_relative_eq!(*c, counts[0], max_relative = 1e-8);
        }
    }

    #[test]
    fn additive_over_windows() {
        let mesh = structured_quad_mesh(3.0, 2.0, 6, 4).unwrap();
        let states = history(&mesh, 8);
        let whole = burglary_counts(&mesh, &states, 2.0, 0.1).unwrap();
        let first = burglary_counts(&mesh, &states[..3], 2.0, 0.1).unwrap();
        let second = burglary_counts(&mesh, &states[3..], 2.0, 0.1).unwrap();
        for e in 0..whole.len() {
            assert_relative_eq!(whole[e], first[e] + second[e], max_relative = 1e-13);
        }
    }

    #[test]
    fn gaps_are_rejected() {
        let mesh = structured_quad_mesh(3.0, 2.0, 3, 2).unwrap();
        let states = history(&mesh, 4);
        let err = burglary_counts(&mesh, [&states[0], &states[2]], 1.0, 0.1).unwrap_err();
        assert!(matches!(err, Error::MissingSnapshots(_)));
    }
}
