//! Nodal scalar fields and seeded sparse initial-condition noise.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshId};
use crate::params::NoiseSpec;
use crate::rng;

/// One real value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    mesh_id: MeshId,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        ScalarField {
            mesh_id: mesh.id(),
            values: alloc::vec![value; mesh.node_count()],
        }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::DimensionMismatch {
                expected: mesh.node_count(),
                found: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(alloc::format!(
                "non-finite field value at node {i}"
            )));
        }
        Ok(ScalarField {
            mesh_id: mesh.id(),
            values,
        })
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField {
            mesh_id: mesh.id(),
            values: mesh.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    pub(crate) fn from_values_unchecked(mesh_id: MeshId, values: Vec<f64>) -> Self {
        ScalarField { mesh_id, values }
    }

    pub fn mesh_id(&self) -> MeshId {
        self.mesh_id
    }

    pub fn belongs_to(&self, mesh: &Mesh) -> bool {
        self.mesh_id == mesh.id() && self.values.len() == mesh.node_count()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which initial field a noise draw perturbs. Each target uses its own
/// derived random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseTarget {
    Attractiveness,
    Density,
}

impl NoiseTarget {
    fn stream_index(self) -> u64 {
        match self {
            NoiseTarget::Attractiveness => 1,
            NoiseTarget::Density => 2,
        }
    }
}

/// Adds `chi_delta(x) * xi(x)` to every node: with probability `delta` a
/// draw from `N(0, sigma^2)`, otherwise nothing. Nodes are visited in mesh
/// order; for each node one uniform is drawn, followed by one normal when the
/// node is selected.
pub fn apply_sparse_noise(base: &ScalarField, spec: &NoiseSpec, which: NoiseTarget) -> ScalarField {
    let (sigma, delta) = match which {
        NoiseTarget::Attractiveness => (spec.sigma_b, spec.delta_b),
        NoiseTarget::Density => (spec.sigma_rho, spec.delta_rho),
    };
    let mut out = base.clone();
    add_sparse_noise(
        &mut out.values,
        sigma,
        delta,
        rng::derive_seed(spec.seed, which.stream_index()),
    );
    out
}

/// Slice version of [`apply_sparse_noise`], with an explicit stream seed.
pub fn add_sparse_noise(values: &mut [f64], sigma: f64, delta: f64, seed: u64) {
    if delta <= 0.0 {
        return;
    }
    let mut r = rng::stream(seed);
    for v in values.iter_mut() {
        let u: f64 = r.gen();
        if u < delta {
            let z: f64 = r.sample(StandardNormal);
            *v += sigma * z;
        }
    }
}

/// Seeded indicator mask `chi_delta`: 1 with probability `delta`, else 0.
pub fn sparsity_mask(n: usize, delta: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed);
    (0..n)
        .map(|_| {
            let u: f64 = r.gen();
            if u < delta {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_quad_mesh;

    fn spec(sigma: f64, delta: f64) -> NoiseSpec {
        NoiseSpec::uniform(sigma, sigma, delta, 11)
    }

    #[test]
    fn no_sparsity_leaves_field_untouched() {
        let mesh = structured_quad_mesh(1.0, 1.0, 10, 10).unwrap();
        let base = ScalarField::from_fn(&mesh, |p| p[0] + 2.0 * p[1]);
        let out = apply_sparse_noise(&base, &spec(0.5, 0.0), NoiseTarget::Attractiveness);
        assert_eq!(out, base);
    }

    #[test]
    fn zero_variance_leaves_field_untouched() {
        let mesh = structured_quad_mesh(1.0, 1.0, 10, 10).unwrap();
        let base = ScalarField::from_fn(&mesh, |p| p[0] + 2.0 * p[1]);
        let out = apply_sparse_noise(&base, &spec(0.0, 1.0), NoiseTarget::Density);
        assert_eq!(out.values(), base.values());
    }

    #[test]
    fn dense_noise_statistics() {
        let mut v = alloc::vec![1.0; 1_000_000];
        add_sparse_noise(&mut v, 0.05, 1.0, 99);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() < 4.0 * 0.05 / 1e3, "mean {mean}");
        assert!((var / 0.0025 - 1.0).abs() < 0.05, "var {var}");
    }

    #[test]
    fn perturbed_fraction_matches_delta() {
        let n = 100_000;
        let mut v = alloc::vec![0.0; n];
        add_sparse_noise(&mut v, 1.0, 0.3, 3);
        let hits = v.iter().filter(|&&x| x != 0.0).count() as f64;
        let sd = libm::sqrt(n as f64 * 0.3 * 0.7);
        assert!((hits - 0.3 * n as f64).abs() < 4.0 * sd, "{hits}");
    }

    #[test]
    fn noise_is_reproducible_and_target_specific() {
        let mesh = structured_quad_mesh(2.0, 2.0, 8, 8).unwrap();
        let base = ScalarField::constant(&mesh, 1.0);
        let s = spec(0.1, 0.5);
        let a = apply_sparse_noise(&base, &s, NoiseTarget::Attractiveness);
        let b = apply_sparse_noise(&base, &s, NoiseTarget::Attractiveness);
        let c = apply_sparse_noise(&base, &s, NoiseTarget::Density);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn field_length_is_checked() {
        let mesh = structured_quad_mesh(1.0, 1.0, 2, 2).unwrap();
        assert!(matches!(
            ScalarField::from_values(&mesh, alloc::vec![0.0; 5]),
            Err(Error::DimensionMismatch {
                expected: 9,
                found: 5
            })
        ));
        assert!(ScalarField::from_values(&mesh, alloc::vec![f64::NAN; 9]).is_err());
    }
}
