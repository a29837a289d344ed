//! Model parameters, nondimensionalization and the homogeneous steady state.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// A model coefficient that is either uniform or given per node (or per
/// lattice site).
#[derive(Debug, Clone, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    Nodal(Vec<f64>),
}

impl Coefficient {
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Coefficient::Constant(c) => Some(*c),
            Coefficient::Nodal(_) => None,
        }
    }

    #[inline]
    pub fn at(&self, node: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Nodal(v) => v[node],
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Coefficient {
        match self {
            Coefficient::Constant(c) => Coefficient::Constant(f(*c)),
            Coefficient::Nodal(v) => Coefficient::Nodal(v.iter().map(|&x| f(x)).collect()),
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Nodal(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Nodal(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn all_finite(&self) -> bool {
        match self {
            Coefficient::Constant(c) => c.is_finite(),
            Coefficient::Nodal(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    /// Checks a nodal coefficient against the expected node count.
    pub fn check_len(&self, n: usize) -> Result<()> {
        match self {
            Coefficient::Nodal(v) if v.len() != n => Err(Error::DimensionMismatch {
                expected: n,
                found: v.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Expands to one value per node.
    pub fn to_nodal(&self, n: usize) -> Vec<f64> {
        match self {
            Coefficient::Constant(c) => alloc::vec![*c; n],
            Coefficient::Nodal(v) => v.clone(),
        }
    }
}

impl From<f64> for Coefficient {
    fn from(c: f64) -> Self {
        Coefficient::Constant(c)
    }
}

/// Dimensional parameters of the lattice model.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalParams {
    /// Attractiveness increment per burglary.
    pub theta: f64,
    /// Decay rate of the dynamic attractiveness (1/time).
    pub omega: f64,
    /// Criminal generation rate per site per unit time.
    pub gamma: f64,
    /// Neighbourhood-effect strength, in `[0, 1]`.
    pub eta: f64,
    /// Static attractiveness, uniform or per site.
    pub a_static: Coefficient,
    pub lattice_h: f64,
    pub dt: f64,
}

impl DimensionalParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("theta", self.theta),
            ("omega", self.omega),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ];
        for (name, v) in scalars {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(alloc::format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.eta > 1.0 {
            return Err(Error::param(alloc::format!(
                "eta must lie in [0, 1], got {}",
                self.eta
            )));
        }
        if !(self.a_static.all_finite() && self.a_static.min() >= 0.0) {
            return Err(Error::param(
                "static attractiveness must be finite and nonnegative",
            ));
        }
        if !(self.lattice_h > 0.0 && self.lattice_h.is_finite()) {
            return Err(Error::param("lattice spacing must be positive"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::param("time step must be positive"));
        }
        Ok(())
    }
}

/// Scales linking the lattice model to its continuum limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    /// `h^2 / dt`
    pub diffusivity: f64,
    /// `sqrt(D / omega)`
    pub length: f64,
    /// `theta * dt`
    pub epsilon: f64,
    /// `Gamma / h^2`
    pub gamma_density: f64,
}

/// Parameters of the nondimensional continuum system.
#[derive(Debug, Clone, PartialEq)]
pub struct NondimParams {
    pub eta: Coefficient,
    pub a_st: Coefficient,
    /// `Gamma * theta / omega^2`, the steady dynamic attractiveness.
    pub source: Coefficient,
    /// Only needed to turn densities back into burglary counts.
    pub theta_over_omega: f64,
    pub scales: Option<DerivedScales>,
}

impl NondimParams {
    pub fn constant(eta: f64, a_st: f64, source: f64) -> Self {
        NondimParams {
            eta: Coefficient::Constant(eta),
            a_st: Coefficient::Constant(a_st),
            source: Coefficient::Constant(source),
            theta_over_omega: 0.0,
            scales: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.all_finite() && self.eta.min() >= 0.0 && self.eta.max() <= 1.0) {
            return Err(Error::param("eta values must lie in [0, 1]"));
        }
        if !(self.a_st.all_finite() && self.a_st.min() >= 0.0) {
            return Err(Error::param("static attractiveness must be nonnegative"));
        }
        if !(self.source.all_finite() && self.source.min() >= 0.0) {
            return Err(Error::param("source must be nonnegative"));
        }
        if !(self.theta_over_omega.is_finite() && self.theta_over_omega >= 0.0) {
            return Err(Error::param("theta/omega must be nonnegative"));
        }
        Ok(())
    }
}

/// Maps lattice parameters to the nondimensional continuum parameters
/// (`A -> A/omega`, `t -> omega t`, source `Gamma theta / omega^2`).
pub fn nondimensionalize(p: &DimensionalParams) -> Result<NondimParams> {
    if !(p.omega > 0.0) {
        return Err(Error::param("omega must be positive to nondimensionalize"));
    }
    p.validate()?;
    let omega = p.omega;
    let diffusivity = p.lattice_h * p.lattice_h / p.dt;
    let scales = DerivedScales {
        diffusivity,
        length: libm::sqrt(diffusivity / omega),
        epsilon: p.theta * p.dt,
        gamma_density: p.gamma / (p.lattice_h * p.lattice_h),
    };
    Ok(NondimParams {
        eta: Coefficient::Constant(p.eta),
        a_st: p.a_static.map(|a| a / omega),
        source: Coefficient::Constant(p.gamma * p.theta / (omega * omega)),
        theta_over_omega: p.theta / omega,
        scales: Some(scales),
    })
}

/// Homogeneous steady state of the continuum system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumState {
    pub a_bar: f64,
    pub rho_bar: f64,
    pub b_bar: f64,
}

pub fn equilibrium(params: &NondimParams) -> Result<EquilibriumState> {
    let a_st = params
        .a_st
        .as_constant()
        .ok_or_else(|| Error::param("equilibrium needs a spatially constant A_st"))?;
    let b_bar = params
        .source
        .as_constant()
        .ok_or_else(|| Error::param("equilibrium needs a spatially constant source"))?;
    let a_bar = a_st + b_bar;
    if a_bar == 0.0 {
        return Err(Error::param("equilibrium attractiveness is zero"));
    }
    Ok(EquilibriumState {
        a_bar,
        rho_bar: b_bar / a_bar,
        b_bar,
    })
}

/// Sufficient condition for the homogeneous state to be unstable, i.e. for
/// hotspots to form: `B > A_st / 2` and
/// `eta < (3 rho + 1 - sqrt(12 rho)) / A`.
pub fn instability_predicate(params: &NondimParams) -> Result<bool> {
    let eq = equilibrium(params)?;
    let eta = params
        .eta
        .as_constant()
        .ok_or_else(|| Error::param("instability predicate needs a constant eta"))?;
    let a_st = params.a_st.as_constant().unwrap_or_default();
    let bound = (3.0 * eq.rho_bar + 1.0 - libm::sqrt(12.0 * eq.rho_bar)) / eq.a_bar;
    Ok(eq.b_bar > a_st / 2.0 && eta < bound)
}

/// Standard deviations and sparsity of the initial-condition noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_b: f64,
    pub sigma_rho: f64,
    pub delta_b: f64,
    pub delta_rho: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            sigma_b: 0.0,
            sigma_rho: 0.0,
            delta_b: 0.0,
            delta_rho: 0.0,
            seed: 0,
        }
    }

    /// Same sparsity for both fields.
    pub fn uniform(sigma_b: f64, sigma_rho: f64, delta: f64, seed: u64) -> Self {
        NoiseSpec {
            sigma_b,
            sigma_rho,
            delta_b: delta,
            delta_rho: delta,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_b >= 0.0 && self.sigma_rho >= 0.0) {
            return Err(Error::param(
                "noise standard deviations must be nonnegative",
            ));
        }
        for d in [self.delta_b, self.delta_rho] {
            if !(0.0..=1.0).contains(&d) {
                return Err(Error::param("noise sparsity must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dimensional(theta: f64, gamma: f64, omega: f64) -> DimensionalParams {
        DimensionalParams {
            theta,
            omega,
            gamma,
            eta: 0.9,
            a_static: Coefficient::Constant(1.0 / 450.0),
            lattice_h: 1.0,
            dt: 0.3,
        }
    }

    #[test]
    fn case1_lattice_parameters_give_unit_source() {
        let nd = nondimensionalize(&dimensional(0.58, 0.0077, 1.0 / 15.0)).unwrap();
        let s = nd.source.as_constant().unwrap();
        assert!((s - 1.0048).abs() < 1e-4, "{s}");
        assert_relative_eq!(nd.theta_over_omega, 0.58 * 15.0, max_relative = 1e-14);
        assert_relative_eq!(
            nd.a_st.as_constant().unwrap(),
            1.0 / 30.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn case2_lattice_parameters() {
        let nd = nondimensionalize(&dimensional(0.2339, 0.019, 1.0 / 15.0)).unwrap();
        // 0.019 * 0.2339 * 225
        assert_relative_eq!(
            nd.source.as_constant().unwrap(),
            0.999_922_5,
            max_relative = 1e-12
        );
    }

    #[test]
    fn derived_scales() {
        let nd = nondimensionalize(&dimensional(0.58, 0.0077, 1.0 / 15.0)).unwrap();
        let s = nd.scales.unwrap();
        assert_relative_eq!(s.diffusivity, 1.0 / 0.3);
        assert_relative_eq!(s.length, libm::sqrt(15.0 / 0.3));
        assert_relative_eq!(s.epsilon, 0.58 * 0.3);
        assert_relative_eq!(s.gamma_density, 0.0077);
    }

    #[test]
    fn zero_generation_gives_zero_source() {
        let nd = nondimensionalize(&dimensional(0.58, 0.0, 1.0 / 15.0)).unwrap();
        assert_eq!(nd.source.as_constant(), Some(0.0));
    }

    #[test]
    fn nonpositive_omega_is_rejected() {
        assert!(matches!(
            nondimensionalize(&dimensional(0.58, 0.0077, 0.0)),
            Err(Error::Parameter(_))
        ));
        assert!(nondimensionalize(&dimensional(0.58, 0.0077, -1.0)).is_err());
    }

    #[test]
    fn equilibrium_values() {
        let eq = equilibrium(&NondimParams::constant(0.9, 1.0 / 30.0, 1.0)).unwrap();
        assert_relative_eq!(eq.a_bar, 31.0 / 30.0, max_relative = 1e-15);
        assert_relative_eq!(eq.rho_bar, 30.0 / 31.0, max_relative = 1e-15);
        assert!((eq.a_bar - 1.0333).abs() < 1e-4);
        assert!((eq.rho_bar - 0.9677).abs() < 1e-4);

        let eq = equilibrium(&NondimParams::constant(0.9, 0.25, 0.0)).unwrap();
        assert_eq!((eq.a_bar, eq.rho_bar), (0.25, 0.0));

        let eq = equilibrium(&NondimParams::constant(0.9, 0.5, 2.0)).unwrap();
        assert_relative_eq!(eq.a_bar, 2.5);
        assert_relative_eq!(eq.rho_bar, 0.8);

        assert!(equilibrium(&NondimParams::constant(0.9, 0.0, 0.0)).is_err());
    }

    #[test]
    fn equilibrium_solves_steady_equations() {
        let eq = equilibrium(&NondimParams::constant(0.9, 1.0 / 30.0, 1.0)).unwrap();
        // A - rho A = A_st and rho A = B
        assert!((eq.a_bar - eq.rho_bar * eq.a_bar - 1.0 / 30.0).abs() < 1e-12);
        assert!((eq.rho_bar * eq.a_bar - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regime_classification_of_the_three_cases() {
        let p = |eta| NondimParams::constant(eta, 1.0 / 30.0, 1.0);
        assert!(!instability_predicate(&p(0.9)).unwrap());
        assert!(instability_predicate(&p(0.3)).unwrap());
        assert!(instability_predicate(&p(0.03)).unwrap());
    }

    #[test]
    fn instability_bound_vanishes_at_rho_one_third() {
        // A_st = 2 B gives rho = 1/3, where the bound is exactly zero.
        let p = NondimParams::constant(0.0, 2.0, 1.0);
        assert_relative_eq!(equilibrium(&p).unwrap().rho_bar, 1.0 / 3.0);
        assert!(!instability_predicate(&p).unwrap());
    }

    proptest::proptest! {
        #[test]
        fn instability_is_monotone_in_eta(
            a_st in 0.0f64..2.0, source in 0.01f64..3.0,
            eta1 in 0.0f64..1.0, frac in 0.0f64..1.0,
        ) {
            let hi = instability_predicate(&NondimParams::constant(eta1, a_st, source)).unwrap();
            let lo = instability_predicate(&NondimParams::constant(eta1 * frac, a_st, source)).unwrap();
            proptest::prop_assert!(!hi || lo);
        }
    }
}
