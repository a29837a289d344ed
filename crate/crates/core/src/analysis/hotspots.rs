use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Probes with an unchanged hotspot count after which the pattern counts as
/// emerged.
pub const EMERGENCE_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct HotspotReport {
    pub count: usize,
    pub diameters: Vec<f64>,
    pub areas: Vec<f64>,
    pub threshold: f64,
    /// Node indices of each hotspot, ascending.
    pub components: Vec<Vec<usize>>,
}

impl HotspotReport {
    pub fn mean_diameter(&self) -> f64 {
        if self.diameters.is_empty() {
            0.0
        } else {
            self.diameters.iter().sum::<f64>() / self.diameters.len() as f64
        }
    }
}

/// Peaks less than this fraction of `|baseline|` above the baseline are
/// treated as a homogeneous field, so roundoff is never counted.
pub const MIN_PROMINENCE: f64 = 1e-3;

/// Connected regions where `field` exceeds `baseline + (max - baseline)/2`.
///
/// Components come from mesh node adjacency; single-node components are
/// discarded. Each hotspot's diameter is that of the circle with the same
/// area (sum of lumped nodal areas).
pub fn detect_hotspots(field: &[f64], mesh: &Mesh, baseline: f64) -> Result<HotspotReport> {
    let n = mesh.node_count();
    if field.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: field.len(),
        });
    }
    if !field.iter().all(|v| v.is_finite()) || !baseline.is_finite() {
        return Err(Error::param("hotspot detection needs finite values"));
    }
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = baseline + 0.5 * (max - baseline);
    let mut report = HotspotReport {
        count: 0,
        diameters: Vec::new(),
        areas: Vec::new(),
        threshold,
        components: Vec::new(),
    };
    if !(max - baseline > MIN_PROMINENCE * baseline.abs()) {
        return Ok(report);
    }

    let nodal_areas = mesh.nodal_areas();
    let mut seen = alloc::vec![false; n];
    let mut stack = Vec::new();
    for start in 0..n {
        if seen[start] || !(field[start] > threshold) {
            continue;
        }
        let mut component = Vec::new();
        seen[start] = true;
        stack.push(start);
        while let Some(v) = stack.pop() {
            component.push(v);
            for &w in mesh.neighbours(v) {
                if !seen[w] && field[w] > threshold {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        if component.len() < 2 {
            continue;
        }
        component.sort_unstable();
        let area: f64 = component.iter().map(|&v| nodal_areas[v]).sum();
        report.areas.push(area);
        report
            .diameters
            .push(2.0 * libm::sqrt(area / core::f64::consts::PI));
        report.components.push(component);
    }
    report.count = report.components.len();
    Ok(report)
}

/// Time of the first probe that completes a run of `window` probes with the
/// same nonzero hotspot count.
pub fn emergence_time(probes: &[(f64, usize)], window: usize) -> Option<f64> {
    if window == 0 {
        return None;
    }
    let mut run = 0;
    for (k, &(t, count)) in probes.iter().enumerate() {
        if k > 0 && probes[k - 1].1 == count {
            run += 1;
        } else {
            run = 1;
        }
        if run >= window && count > 0 {
            return Some(t);
        }
    }
    None
}
