//! Q1 finite elements: reference element, quadrature and assembly.
//!
//! All integrals use the 2x2 Gauss rule. Nodal weights `w` in `N(w)` and
//! `D(w)` are interpolated bilinearly to the quadrature points. Element
//! geometry (Jacobian-weighted quadrature weights and physical basis
//! gradients) and the element-to-CSR scatter map are computed once per mesh.
//!
//! Assembly is sequential over elements, so results are bit-reproducible.

mod reference;

use alloc::sync::Arc;
use alloc::vec::Vec;

pub use reference::{shape_gradients, shape_values, QuadratureRule, CORNERS};

use crate::error::{Error, Result};
use crate::linsolve::{CsrMatrix, CsrPattern};
use crate::mesh::Mesh;
use crate::params::Coefficient;

const NQ: usize = 4;

/// Default positivity floor for the weight of `D(w)`.
pub const DEFAULT_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, Copy)]
struct ElementGeometry {
    /// `det J * w_q`
    jxw: [f64; NQ],
    /// Physical basis gradients per quadrature point.
    grad: [[[f64; 2]; 4]; NQ],
}

/// Discrete Q1 space on a fixed mesh, with cached geometry and sparsity.
#[derive(Debug, Clone)]
pub struct FemSpace {
    n: usize,
    quads: Vec<[usize; 4]>,
    phi: [[f64; 4]; NQ],
    geometry: Vec<ElementGeometry>,
    pattern: Arc<CsrPattern>,
    scatter: Vec<[usize; 16]>,
}

impl FemSpace {
    pub fn new(mesh: &Mesh) -> Self {
        let rule = QuadratureRule::gauss2x2();
        let mut phi = [[0.0; 4]; NQ];
        let mut ref_grad = [[[0.0; 2]; 4]; NQ];
        for q in 0..NQ {
            let [xi, eta] = rule.points[q];
            phi[q] = shape_values(xi, eta);
            ref_grad[q] = shape_gradients(xi, eta);
        }

        let nodes = mesh.nodes();
        let geometry = mesh
            .quads()
            .iter()
            .map(|quad| {
                let mut geo = ElementGeometry {
                    jxw: [0.0; NQ],
                    grad: [[[0.0; 2]; 4]; NQ],
                };
                for q in 0..NQ {
                    // J = [[dx/dxi, dx/deta], [dy/dxi, dy/deta]]
                    let mut j = [[0.0; 2]; 2];
                    for a in 0..4 {
                        let p = nodes[quad[a]];
                        for r in 0..2 {
                            j[r][0] += p[r] * ref_grad[q][a][0];
                            j[r][1] += p[r] * ref_grad[q][a][1];
                        }
                    }
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    geo.jxw[q] = det * rule.weights[q];
                    for a in 0..4 {
                        let [gx, ge] = ref_grad[q][a];
                        geo.grad[q][a] = [
                            (j[1][1] * gx - j[1][0] * ge) / det,
                            (-j[0][1] * gx + j[0][0] * ge) / det,
                        ];
                    }
                }
                geo
            })
            .collect();

        let n = mesh.node_count();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            let nb = mesh.neighbours(i);
            let split = nb.partition_point(|&j| j < i);
            col_idx.extend_from_slice(&nb[..split]);
            col_idx.push(i);
            col_idx.extend_from_slice(&nb[split..]);
            row_ptr.push(col_idx.len());
        }
        let pattern =
            CsrPattern::new(n, n, row_ptr, col_idx).expect("mesh adjacency yields a valid pattern");
        let scatter = mesh
            .quads()
            .iter()
            .map(|quad| {
                let mut pos = [0usize; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        pos[4 * a + b] = pattern
                            .find(quad[a], quad[b])
                            .expect("element entries are in the pattern");
                    }
                }
                pos
            })
            .collect();

        FemSpace {
            n,
            quads: mesh.quads().to_vec(),
            phi,
            geometry,
            pattern: Arc::new(pattern),
            scatter,
        }
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn element_count(&self) -> usize {
        self.quads.len()
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn zeros(&self) -> CsrMatrix {
        CsrMatrix::zeros(self.pattern.clone())
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn interp(&self, e: usize, q: usize, v: &[f64]) -> f64 {
        let quad = &self.quads[e];
        let p = &self.phi[q];
        p[0] * v[quad[0]] + p[1] * v[quad[1]] + p[2] * v[quad[2]] + p[3] * v[quad[3]]
    }

    #[inline]
    fn interp_grad(&self, e: usize, q: usize, v: &[f64]) -> [f64; 2] {
        let quad = &self.quads[e];
        let g = &self.geometry[e].grad[q];
        let mut out = [0.0; 2];
        for a in 0..4 {
            out[0] += g[a][0] * v[quad[a]];
            out[1] += g[a][1] * v[quad[a]];
        }
        out
    }

    #[inline]
    fn coefficient_at(&self, e: usize, q: usize, c: &Coefficient) -> f64 {
        match c {
            Coefficient::Constant(v) => *v,
            Coefficient::Nodal(v) => self.interp(e, q, v),
        }
    }

    /// Runs `local` on every element and scatters the 4x4 result.
    fn assemble<F>(&self, out: &mut CsrMatrix, mut local: F) -> Result<()>
    where
        F: FnMut(usize, &mut [[f64; 4]; 4]) -> Result<()>,
    {
        let values = out.values_mut();
        values.iter_mut().for_each(|v| *v = 0.0);
        for (e, pos) in self.scatter.iter().enumerate() {
            let mut block = [[0.0; 4]; 4];
            local(e, &mut block)?;
            for a in 0..4 {
                for b in 0..4 {
                    values[pos[4 * a + b]] += block[a][b];
                }
            }
        }
        Ok(())
    }

    /// `M_ij = int phi_j phi_i`
    pub fn mass(&self) -> CsrMatrix {
        let mut m = self.zeros();
        self.assemble(&mut m, |e, block| {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let p = &self.phi[q];
                for a in 0..4 {
                    for b in 0..4 {
                        block[a][b] += geo.jxw[q] * p[a] * p[b];
                    }
                }
            }
            Ok(())
        })
        .expect("mass assembly cannot fail");
        m
    }

    /// `K_ij = int eta grad phi_j . grad phi_i`, with `eta` interpolated to
    /// the quadrature points.
    pub fn stiffness(&self, eta: &Coefficient) -> Result<CsrMatrix> {
        eta.check_len(self.n)?;
        let mut k = self.zeros();
        self.assemble(&mut k, |e, block| {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let c = self.coefficient_at(e, q, eta);
                if !(c >= 0.0) {
                    return Err(Error::param(alloc::format!(
                        "diffusion coefficient {c} is negative in element {e}"
                    )));
                }
                let g = &geo.grad[q];
                let s = geo.jxw[q] * c;
                for a in 0..4 {
                    for b in 0..4 {
                        block[a][b] += s * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                    }
                }
            }
            Ok(())
        })?;
        Ok(k)
    }

    /// `N(w)_ij = int w phi_j phi_i`
    pub fn weighted_mass(&self, w: &[f64]) -> Result<CsrMatrix> {
        self.check_len(w)?;
        let mut n = self.zeros();
        self.assemble(&mut n, |e, block| {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let s = geo.jxw[q] * self.interp(e, q, w);
                let p = &self.phi[q];
                for a in 0..4 {
                    for b in 0..4 {
                        block[a][b] += s * p[a] * p[b];
                    }
                }
            }
            Ok(())
        })?;
        Ok(n)
    }

    /// `D(w)_ij = int (2 grad w / w) phi_j . grad phi_i`. Fails when `w` at a
    /// quadrature point is not above `floor`.
    pub fn weighted_divergence(&self, w: &[f64], floor: f64) -> Result<CsrMatrix> {
        self.check_len(w)?;
        let mut d = self.zeros();
        self.assemble(&mut d, |e, block| {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let wq = self.interp(e, q, w);
                if !(wq > floor) {
                    return Err(Error::Degenerate {
                        element: e,
                        value: wq,
                        floor,
                    });
                }
                let gw = self.interp_grad(e, q, w);
                let s = geo.jxw[q] * 2.0 / wq;
                let p = &self.phi[q];
                let g = &geo.grad[q];
                for a in 0..4 {
                    let adv = s * (gw[0] * g[a][0] + gw[1] * g[a][1]);
                    for b in 0..4 {
                        block[a][b] += adv * p[b];
                    }
                }
            }
            Ok(())
        })?;
        Ok(d)
    }

    /// Writes `N(w) - D(w)` into `out` in a single pass.
    pub fn reaction_minus_advection_into(
        &self,
        w: &[f64],
        floor: f64,
        out: &mut CsrMatrix,
    ) -> Result<()> {
        self.check_len(w)?;
        self.assemble(out, |e, block| {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let wq = self.interp(e, q, w);
                if !(wq > floor) {
                    return Err(Error::Degenerate {
                        element: e,
                        value: wq,
                        floor,
                    });
                }
                let gw = self.interp_grad(e, q, w);
                let s = geo.jxw[q] * 2.0 / wq;
                let p = &self.phi[q];
                let g = &geo.grad[q];
                for a in 0..4 {
                    let react = geo.jxw[q] * wq * p[a];
                    let adv = s * (gw[0] * g[a][0] + gw[1] * g[a][1]);
                    for b in 0..4 {
                        block[a][b] += (react - adv) * p[b];
                    }
                }
            }
            Ok(())
        })
    }

    /// Derivative of `D(a) rho` with respect to the nodal values of `a`:
    /// `int 2 rho (grad phi_j / a - grad a phi_j / a^2) . grad phi_i`.
    pub fn divergence_jacobian(&self, a: &[f64], rho: &[f64], floor: f64) -> Result<CsrMatrix> {
        self.check_len(a)?;
        self.check_len(rho)?;
        let mut jac = self.zeros();
        self.assemble(&mut jac, |e, block| {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let aq = self.interp(e, q, a);
                if !(aq > floor) {
                    return Err(Error::Degenerate {
                        element: e,
                        value: aq,
                        floor,
                    });
                }
                let ga = self.interp_grad(e, q, a);
                let rq = self.interp(e, q, rho);
                let s = geo.jxw[q] * 2.0 * rq;
                let p = &self.phi[q];
                let g = &geo.grad[q];
                for i in 0..4 {
                    for j in 0..4 {
                        let dir = [
                            g[j][0] / aq - ga[0] * p[j] / (aq * aq),
                            g[j][1] / aq - ga[1] * p[j] / (aq * aq),
                        ];
                        block[i][j] += s * (dir[0] * g[i][0] + dir[1] * g[i][1]);
                    }
                }
            }
            Ok(())
        })?;
        Ok(jac)
    }

    /// Load vector `int f phi_i`.
    pub fn load(&self, f: &Coefficient) -> Result<Vec<f64>> {
        f.check_len(self.n)?;
        let mut b = alloc::vec![0.0; self.n];
        for (e, quad) in self.quads.iter().enumerate() {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let s = geo.jxw[q] * self.coefficient_at(e, q, f);
                for a in 0..4 {
                    b[quad[a]] += s * self.phi[q][a];
                }
            }
        }
        Ok(b)
    }

    /// `int eta grad g . grad phi_i`
    pub fn gradient_load(&self, eta: &Coefficient, g: &[f64]) -> Result<Vec<f64>> {
        eta.check_len(self.n)?;
        self.check_len(g)?;
        let mut b = alloc::vec![0.0; self.n];
        for (e, quad) in self.quads.iter().enumerate() {
            let geo = &self.geometry[e];
            for q in 0..NQ {
                let gg = self.interp_grad(e, q, g);
                let s = geo.jxw[q] * self.coefficient_at(e, q, eta);
                for a in 0..4 {
                    let gp = geo.grad[q][a];
                    b[quad[a]] += s * (gg[0] * gp[0] + gg[1] * gp[1]);
                }
            }
        }
        Ok(b)
    }

    /// Static part of the attractiveness right-hand side.
    ///
    /// Uniform `A_st` has no Laplacian, so the term is `A_st M 1`. A nodal
    /// `A_st` is taken in the H1 weak form `int A_st phi_i + int eta grad A_st
    /// . grad phi_i`, with the boundary flux of `A_st` assumed to vanish.
    pub fn static_attractiveness_load(
        &self,
        a_st: &Coefficient,
        eta: &Coefficient,
        mass: &CsrMatrix,
    ) -> Result<Vec<f64>> {
        match a_st {
            Coefficient::Constant(c) => {
                let ones = alloc::vec![1.0; self.n];
                let mut b = mass.spmv(&ones)?;
                b.iter_mut().for_each(|v| *v *= c);
                Ok(b)
            }
            Coefficient::Nodal(values) => {
                let mut b = self.load(a_st)?;
                let g = self.gradient_load(eta, values)?;
                b.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
                Ok(b)
            }
        }
    }

    /// Right-hand side of the attractiveness step:
    /// static load plus `M A_prev / dt`.
    pub fn rhs_attractiveness(
        &self,
        a_st: &Coefficient,
        eta: &Coefficient,
        a_prev: &[f64],
        dt: f64,
        mass: &CsrMatrix,
    ) -> Result<Vec<f64>> {
        let mut b = self.static_attractiveness_load(a_st, eta, mass)?;
        let ma = mass.spmv(a_prev)?;
        b.iter_mut().zip(&ma).for_each(|(x, y)| *x += y / dt);
        Ok(b)
    }

    /// Right-hand side of the density step: `int s phi_i + M rho_prev / dt`.
    pub fn rhs_density(
        &self,
        source: &Coefficient,
        rho_prev: &[f64],
        dt: f64,
        mass: &CsrMatrix,
    ) -> Result<Vec<f64>> {
        let mut b = match source {
            Coefficient::Constant(c) => {
                let mut b = mass.spmv(&alloc::vec![1.0; self.n])?;
                b.iter_mut().for_each(|v| *v *= c);
                b
            }
            Coefficient::Nodal(_) => self.load(source)?,
        };
        let mr = mass.spmv(rho_prev)?;
        b.iter_mut().zip(&mr).for_each(|(x, y)| *x += y / dt);
        Ok(b)
    }

    /// `int_Q v` over element `e`.
    pub fn element_integral(&self, e: usize, v: &[f64]) -> f64 {
        (0..NQ)
            .map(|q| self.geometry[e].jxw[q] * self.interp(e, q, v))
            .sum()
    }

    pub fn element_measure(&self, e: usize) -> f64 {
        self.geometry[e].jxw.iter().sum()
    }
}

/// Mass matrix of `mesh`.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    FemSpace::new(mesh).mass()
}

pub fn assemble_stiffness(mesh: &Mesh, eta: &Coefficient) -> Result<CsrMatrix> {
    FemSpace::new(mesh).stiffness(eta)
}

pub fn assemble_weighted_mass(mesh: &Mesh, w: &[f64]) -> Result<CsrMatrix> {
    FemSpace::new(mesh).weighted_mass(w)
}

pub fn assemble_weighted_divergence(mesh: &Mesh, w: &[f64], floor: f64) -> Result<CsrMatrix> {
    FemSpace::new(mesh).weighted_divergence(w, floor)
}
