use alloc::vec::Vec;

use super::hotspots::detect_hotspots;
use crate::error::{Error, Result};
use crate::mesh::{Lattice, Mesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldComparison {
    /// `sqrt(sum_i area_i d_i^2)` with lumped nodal areas.
    pub l2: f64,
    pub max: f64,
    /// PDE hotspot count minus lattice hotspot count.
    pub hotspot_difference: i64,
}

/// Samples a lattice field at every mesh node by nearest site. The lattice
/// must span the mesh's bounding box.
pub fn lattice_to_mesh(mesh: &Mesh, lattice: &Lattice, values: &[f64]) -> Result<Vec<f64>> {
    lattice.validate()?;
    if values.len() != lattice.site_count() {
        return Err(Error::DimensionMismatch {
            expected: lattice.site_count(),
            found: values.len(),
        });
    }
    let (lo, hi) = mesh.bounding_box();
    let lat_hi = [
        lattice.origin[0] + (lattice.nx - 1) as f64 * lattice.h,
        lattice.origin[1] + (lattice.ny - 1) as f64 * lattice.h,
    ];
    let tol = 1e-6 * (hi[0] - lo[0]).max(hi[1] - lo[1]);
    for d in 0..2 {
        if (lo[d] - lattice.origin[d]).abs() > tol || (hi[d] - lat_hi[d]).abs() > tol {
            return Err(Error::DomainMismatch(alloc::format!(
                "lattice spans [{:?}, {:?}] but the mesh spans [{:?}, {:?}]",
                lattice.origin,
                lat_hi,
                lo,
                hi
            )));
        }
    }
    Ok(mesh
        .nodes()
        .iter()
        .map(|p| {
            let i = libm::round((p[0] - lattice.origin[0]) / lattice.h)
                .clamp(0.0, (lattice.nx - 1) as f64) as usize;
            let j = libm::round((p[1] - lattice.origin[1]) / lattice.h)
                .clamp(0.0, (lattice.ny - 1) as f64) as usize;
            values[lattice.index(i, j)]
        })
        .collect())
}

/// Difference metrics between a mesh field and a lattice field. Hotspots
/// are counted in both with the respective field mean as baseline.
pub fn compare_fields(
    mesh: &Mesh,
    pde: &[f64],
    lattice: &Lattice,
    abm: &[f64],
) -> Result<FieldComparison> {
    if pde.len() != mesh.node_count() {
        return Err(Error::DimensionMismatch {
            expected: mesh.node_count(),
            found: pde.len(),
        });
    }
    let sampled = lattice_to_mesh(mesh, lattice, abm)?;
    let areas = mesh.nodal_areas();
    let mut l2 = 0.0;
    let mut max = 0.0f64;
    for i in 0..pde.len() {
        let d = pde[i] - sampled[i];
        l2 += areas[i] * d * d;
        max = max.max(d.abs());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ours = detect_hotspots(pde, mesh, mean(pde))?.count as i64;
    let theirs = detect_hotspots(&sampled, mesh, mean(&sampled))?.count as i64;
    Ok(FieldComparison {
        l2: libm::sqrt(l2),
        max,
        hotspot_difference: ours - theirs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::structured_quad_mesh;
    use approx::assert_relative_eq;
    use std::vec;

    #[test]
    fn identical_and_shifted_fields() {
        let mesh = structured_quad_mesh(16.0, 16.0, 20, 20).unwrap();
        let lattice = Lattice::new(21, 21, 0.8).unwrap();
        let field: Vec<f64> = mesh
            .nodes()
            .iter()
            .map(|p| (p[0] * 0.3).sin() + p[1])
            .collect();
        let cmp = compare_fields(&mesh, &field, &lattice, &field).unwrap();
        assert_eq!(cmp.l2, 0.0);
        assert_eq!(cmp.max, 0.0);
        assert_eq!(cmp.hotspot_difference, 0);

        let shifted: Vec<f64> = field.iter().map(|v| v + 1e-3).collect();
        let cmp = compare_fields(&mesh, &field, &lattice, &shifted).unwrap();
        assert_relative_eq!(cmp.l2, 1e-3 * 16.0, max_relative = 1e-9);
        assert_relative_eq!(cmp.max, 1e-3, max_relative = 1e-9);
    }

    #[test]
    fn mismatched_domain() {
        let mesh = structured_quad_mesh(16.0, 16.0, 20, 20).unwrap();
        let lattice = Lattice::new(21, 21, 0.5).unwrap();
        let err = compare_fields(&mesh, &vec![0.0; 441], &lattice, &vec![0.0; 441]).unwrap_err();
        assert!(matches!(err, Error::DomainMismatch(_)));
    }
}
