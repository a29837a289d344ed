//! The lattice model and the continuum solver describe the same dynamics;
//! these tests drive both through the public API only.

use hotspot_core::abm::{lattice_equilibrium, AbmModel, Engine, LatticeState};
use hotspot_core::analysis::compare_fields;
use hotspot_core::mesh::{structured_quad_mesh, Lattice};
use hotspot_core::params::equilibrium;
use hotspot_core::pde::{PdeState, SolverConfig, Stepper};
use hotspot_core::{Coefficient, DimensionalParams, ScalarField};

fn case1(dt: f64) -> DimensionalParams {
    DimensionalParams {
        theta: 0.58,
        omega: 1.0 / 15.0,
        gamma: 0.0077,
        eta: 0.9,
        a_static: Coefficient::Constant(1.0 / 450.0),
        lattice_h: 1.0,
        dt,
    }
}

#[test]
fn equilibria_agree() {
    for dt in [1.0, 0.1, 0.01] {
        let model = AbmModel::new(Lattice::new(4, 4, 1.0).unwrap(), case1(dt)).unwrap();
        let (b, n) = lattice_equilibrium(model.params()).unwrap();
        let view = model.nondim_view(&LatticeState::uniform(model.lattice(), b, n));
        let eq = equilibrium(&model.nondim_params().unwrap()).unwrap();
        for a in &view.a {
            assert!((a - eq.a_bar).abs() < 1e-12);
        }
        // The lattice removal probability 1 - exp(-A dt) is first order in dt.
        let a_dim = eq.a_bar / 15.0;
        for r in &view.rho {
            assert!((r - eq.rho_bar).abs() <= eq.rho_bar * a_dim * dt);
        }
    }
}

#[test]
fn lattice_tracks_continuum_transient() {
    let params = case1(1.0);
    let model = AbmModel::new(Lattice::new(11, 11, 1.0).unwrap(), params).unwrap();
    let nd = model.nondim_params().unwrap();
    let span = 10.0 * 2.0 * (1.0f64 / 15.0).sqrt();
    let mesh = structured_quad_mesh(span, span, 10, 10).unwrap();

    // A smooth bump in B and a uniform criminal density; mesh nodes and
    // lattice sites coincide.
    let b0: Vec<f64> = mesh
        .nodes()
        .iter()
        .map(|p| 1.0 + 0.3 * (-((p[0] - 0.5 * span).powi(2) + (p[1] - 0.5 * span).powi(2))).exp())
        .collect();
    let rho0 = vec![0.9; b0.len()];
    let mut lattice = model
        .state_from_nondim(&b0, &rho0, Engine::Deterministic)
        .unwrap();
    let view0 = model.nondim_view(&lattice);

    let mut stepper = Stepper::new(
        &mesh,
        &nd,
        SolverConfig {
            dt: 1.0 / 15.0,
            tol1: 1e-10,
            tol2: 1e-10,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    let mut pde = PdeState {
        a: ScalarField::from_values(&mesh, view0.a.clone()).unwrap(),
        rho: ScalarField::from_values(&mesh, view0.rho.clone()).unwrap(),
        time: 0.0,
        step_index: 0,
    };
    // Three continuum time units.
    for _ in 0..45 {
        lattice = model.step(&lattice, Engine::Deterministic).unwrap().0;
        pde = stepper.step(&pde).unwrap().0;
    }
    let view = model.nondim_view(&lattice);
    assert!((view.time - pde.time).abs() < 1e-9);
    let cmp = compare_fields(&mesh, pde.a.values(), &view.lattice, &view.a).unwrap();
    let bump = pde.a.values().iter().cloned().fold(0.0, f64::max)
        - pde.a.values().iter().cloned().fold(f64::MAX, f64::min);
    assert!(bump > 0.01, "transient decayed too far to be informative");
    assert!(
        cmp.max < 0.25 * bump,
        "max difference {} vs bump height {bump}",
        cmp.max
    );
}
