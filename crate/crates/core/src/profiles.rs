//! Spatially varying coefficient fields used by the experiment presets.

use alloc::vec::Vec;

use crate::error::Result;
use crate::field::sparsity_mask;
use crate::mesh::{irregular_region_mesh, Mesh};
use crate::params::Coefficient;
use crate::rng::derive_seed;

/// `eta` decreasing with `x1` in four bands of width 4 on `[0, 16]`.
pub fn banded_eta(x1: f64) -> f64 {
    if x1 >= 12.0 {
        0.03
    } else if x1 >= 8.0 {
        0.12
    } else if x1 >= 4.0 {
        0.3
    } else {
        0.9
    }
}

pub fn piecewise_eta(mesh: &Mesh) -> Coefficient {
    Coefficient::Nodal(mesh.nodes().iter().map(|p| banded_eta(p[1])).collect())
}

/// Static attractiveness, source and initial `B` of a highway scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct HighwayProfile {
    pub a_st: Coefficient,
    pub source: Coefficient,
    pub b0: Coefficient,
}

/// Diagonal ridge `exp(-20 (x0 + x1 - l)^2)` in the quadrant `x0 > l/2`,
/// `x1 < l/2`, zero elsewhere.
pub fn square_ridge(p: [f64; 2], l: f64) -> f64 {
    if p[0] > l / 2.0 && p[1] < l / 2.0 {
        let d = p[0] + p[1] - l;
        libm::exp(-20.0 * d * d)
    } else {
        0.0
    }
}

/// Two-segment ridge in `[0, 24]^2`: horizontal at `x1 = 20.8` for
/// `x0 < 9.5`, then along `x1 = 32.4923 - 16/13 x0`.
pub fn embedded_ridge(p: [f64; 2]) -> f64 {
    let d = if p[0] < 9.5 {
        20.8 - p[1]
    } else {
        32.4923 - 16.0 / 13.0 * p[0] - p[1]
    };
    libm::exp(-20.0 * d * d)
}

fn highway(
    mesh: &Mesh,
    ridge: impl Fn([f64; 2]) -> f64,
    mask_density: f64,
    seed: u64,
) -> HighwayProfile {
    let r: Vec<f64> = mesh.nodes().iter().map(|&p| ridge(p)).collect();
    let mask = sparsity_mask(mesh.node_count(), mask_density, derive_seed(seed, 3));
    let a_st = r.iter().map(|v| (v + 1.0) / 30.0).collect();
    let source: Vec<f64> = r.iter().zip(&mask).map(|(v, m)| v + m).collect();
    HighwayProfile {
        a_st: Coefficient::Nodal(a_st),
        b0: Coefficient::Nodal(source.clone()),
        source: Coefficient::Nodal(source),
    }
}

/// Highway across the lower-right quadrant of `[0, l]^2`. The unit source
/// is present on a seeded 10% of the nodes.
pub fn highway_square(mesh: &Mesh, l: f64, seed: u64) -> HighwayProfile {
    highway(mesh, |p| square_ridge(p, l), 0.1, seed)
}

/// Highway for the city-like region embedded in `[0, 24]^2`.
pub fn highway_embedded(mesh: &Mesh, seed: u64) -> HighwayProfile {
    highway(mesh, embedded_ridge, 0.1, seed)
}

/// Outline of the city-like region in `[0, 24]^2`, counter-clockwise.
pub const CITY_OUTLINE: [[f64; 2]; 18] = [
    [6.0, 0.5],
    [13.0, 0.5],
    [13.0, 3.0],
    [15.5, 3.0],
    [16.0, 7.0],
    [18.0, 10.0],
    [17.5, 14.0],
    [16.5, 18.0],
    [15.5, 22.5],
    [11.0, 23.5],
    [9.5, 21.0],
    [6.5, 21.5],
    [6.0, 18.0],
    [8.0, 15.5],
    [4.5, 14.0],
    [2.5, 11.0],
    [5.5, 9.5],
    [5.0, 5.0],
];

/// Even-odd point-in-polygon test.
pub fn inside_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let mut j = polygon.len() - 1;
    for i in 0..polygon.len() {
        let (a, b) = (polygon[i], polygon[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Jittered unstructured quadrilateral mesh of [`CITY_OUTLINE`] built from
/// an `n x n` grid on `[0, 24]^2`.
pub fn city_mesh(n: usize, seed: u64) -> Result<Mesh> {
    irregular_region_mesh(
        24.0,
        24.0,
        n,
        n,
        |c| inside_polygon(c, &CITY_OUTLINE),
        0.15,
        seed,
    )
}
