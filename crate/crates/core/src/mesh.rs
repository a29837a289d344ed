//! Quadrilateral meshes and Cartesian lattices.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Content hash of a mesh, used to bind fields to the mesh they live on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeshId(pub u64);

/// Bilinear quadrilateral mesh. Quads list their nodes counter-clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    quads: Vec<[usize; 4]>,
    boundary: Vec<bool>,
    adj_ptr: Vec<usize>,
    adj_idx: Vec<usize>,
    spacing: Option<f64>,
    id: MeshId,
}

impl Mesh {
    /// Builds and validates a mesh: indices in range, no repeated node in a
    /// quad, positive Jacobian at all four corners of every quad.
    pub fn new(nodes: Vec<[f64; 2]>, quads: Vec<[usize; 4]>) -> Result<Self> {
        let n = nodes.len();
        if let Some(i) = nodes
            .iter()
            .position(|p| !(p[0].is_finite() && p[1].is_finite()))
        {
            return Err(Error::Topology(format!(
                "node {i} has non-finite coordinates"
            )));
        }
        for (e, q) in quads.iter().enumerate() {
            if let Some(&bad) = q.iter().find(|&&i| i >= n) {
                return Err(Error::Topology(format!(
                    "element {e} references node {bad} but the mesh has {n} nodes"
                )));
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    if q[a] == q[b] {
                        return Err(Error::Topology(format!(
                            "element {e} repeats node {}",
                            q[a]
                        )));
                    }
                }
            }
            for a in 0..4 {
                let jac = corner_jacobian(&nodes, q, a);
                if !(jac > 0.0) {
                    return Err(Error::Topology(format!(
                        "element {e} has non-positive Jacobian {jac:e} at corner {a} (not counter-clockwise or degenerate)"
                    )));
                }
            }
        }

        let mut edges: BTreeMap<(usize, usize), u32> = BTreeMap::new();
        for q in &quads {
            for a in 0..4 {
                let (i, j) = (q[a], q[(a + 1) % 4]);
                *edges.entry((i.min(j), i.max(j))).or_insert(0) += 1;
            }
        }
        let mut boundary = alloc::vec![false; n];
        for (&(i, j), &count) in &edges {
            if count == 1 {
                boundary[i] = true;
                boundary[j] = true;
            }
        }

        let mut neighbours: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
        for q in &quads {
            for &i in q {
                for &j in q {
                    if i != j {
                        neighbours[i].push(j);
                    }
                }
            }
        }
        let mut adj_ptr = Vec::with_capacity(n + 1);
        let mut adj_idx = Vec::new();
        adj_ptr.push(0);
        for mut list in neighbours {
            list.sort_unstable();
            list.dedup();
            adj_idx.extend_from_slice(&list);
            adj_ptr.push(adj_idx.len());
        }

        let id = hash_mesh(&nodes, &quads);
        Ok(Mesh {
            nodes,
            quads,
            boundary,
            adj_ptr,
            adj_idx,
            spacing: None,
            id,
        })
    }

    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn quad_count(&self) -> usize {
        self.quads.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn quads(&self) -> &[[usize; 4]] {
        &self.quads
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.boundary
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    /// Nodes sharing at least one element with `node`, sorted, excluding `node`.
    pub fn neighbours(&self, node: usize) -> &[usize] {
        &self.adj_idx[self.adj_ptr[node]..self.adj_ptr[node + 1]]
    }

    /// Cell size of a structured mesh.
    pub fn spacing(&self) -> Option<f64> {
        self.spacing
    }

    /// Largest element diameter.
    pub fn max_diameter(&self) -> f64 {
        self.quads
            .iter()
            .map(|q| {
                let d = |a: usize, b: usize| {
                    let (p, r) = (self.nodes[q[a]], self.nodes[q[b]]);
                    libm::hypot(p[0] - r[0], p[1] - r[1])
                };
                d(0, 2).max(d(1, 3))
            })
            .fold(0.0, f64::max)
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &self.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }

    /// Area of a quad (exact for the bilinear map).
    pub fn element_area(&self, e: usize) -> f64 {
        let q = self.quads[e];
        let mut twice = 0.0;
        for a in 0..4 {
            let p = self.nodes[q[a]];
            let r = self.nodes[q[(a + 1) % 4]];
            twice += p[0] * r[1] - r[0] * p[1];
        }
        0.5 * twice
    }

    pub fn area(&self) -> f64 {
        (0..self.quads.len()).map(|e| self.element_area(e)).sum()
    }

    /// Quarter-area lumping: each node gets a quarter of every incident quad.
    pub fn nodal_areas(&self) -> Vec<f64> {
        let mut areas = alloc::vec![0.0; self.nodes.len()];
        for (e, q) in self.quads.iter().enumerate() {
            let quarter = 0.25 * self.element_area(e);
            for &i in q {
                areas[i] += quarter;
            }
        }
        areas
    }

    /// Applies `f` to every node coordinate. The result is revalidated.
    pub fn map_nodes(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Mesh> {
        Mesh::new(
            self.nodes.iter().map(|&p| f(p)).collect(),
            self.quads.clone(),
        )
    }
}

fn corner_jacobian(nodes: &[[f64; 2]], q: &[usize; 4], a: usize) -> f64 {
    let p = nodes[q[a]];
    let next = nodes[q[(a + 1) % 4]];
    let prev = nodes[q[(a + 3) % 4]];
    let (ux, uy) = (next[0] - p[0], next[1] - p[1]);
    let (vx, vy) = (prev[0] - p[0], prev[1] - p[1]);
    ux * vy - uy * vx
}

fn hash_mesh(nodes: &[[f64; 2]], quads: &[[usize; 4]]) -> MeshId {
    const PRIME: u64 = 0x0000_0100_0000_01B3;
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    let mut eat = |word: u64| {
        for byte in word.to_le_bytes() {
            h ^= u64::from(byte);
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(nodes.len() as u64);
    eat(quads.len() as u64);
    for p in nodes {
        eat(p[0].to_bits());
        eat(p[1].to_bits());
    }
    for q in quads {
        for &i in q {
            eat(i as u64);
        }
    }
    MeshId(h)
}

/// Uniform `nx` by `ny` quad mesh of `[0, lx] x [0, ly]`. Nodes are numbered
/// row by row, starting at the origin.
pub fn structured_quad_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::param(
            "a structured mesh needs at least one cell per direction",
        ));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::param("domain lengths must be positive"));
    }
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Last row/column pinned to the exact domain edge.
            let x = if i == nx { lx } else { i as f64 * hx };
            let y = if j == ny { ly } else { j as f64 * hy };
            nodes.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut quads = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            quads.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    let mut mesh = Mesh::new(nodes, quads)?;
    mesh.spacing = Some(hx.max(hy));
    Ok(mesh)
}

/// Mesh of an irregular region: cells of the `nx` by `ny` grid on
/// `[0, lx] x [0, ly]` whose centres satisfy `inside` are kept, unused nodes
/// are dropped, and interior nodes are displaced by a seeded uniform jitter of
/// at most `jitter` times the cell size in each direction.
pub fn irregular_region_mesh(
    lx: f64,
    ly: f64,
    nx: usize,
    ny: usize,
    inside: impl Fn([f64; 2]) -> bool,
    jitter: f64,
    seed: u64,
) -> Result<Mesh> {
    if !(0.0..0.25).contains(&jitter) {
        return Err(Error::param("jitter must lie in [0, 0.25)"));
    }
    let grid = structured_quad_mesh(lx, ly, nx, ny)?;
    let (hx, hy) = (lx / nx as f64, ly / ny as f64);
    let kept: Vec<[usize; 4]> = grid
        .quads
        .iter()
        .filter(|q| {
            let c = q.iter().fold([0.0, 0.0], |acc, &i| {
                [
                    acc[0] + 0.25 * grid.nodes[i][0],
                    acc[1] + 0.25 * grid.nodes[i][1],
                ]
            });
            inside(c)
        })
        .copied()
        .collect();
    if kept.is_empty() {
        return Err(Error::param("region contains no grid cell"));
    }
    let mut renumber = alloc::vec![usize::MAX; grid.nodes.len()];
    let mut nodes = Vec::new();
    for q in &kept {
        for &i in q {
            if renumber[i] == usize::MAX {
                renumber[i] = 0;
            }
        }
    }
    for (old, slot) in renumber.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = nodes.len();
            nodes.push(grid.nodes[old]);
        }
    }
    let quads: Vec<[usize; 4]> = kept.iter().map(|q| q.map(|i| renumber[i])).collect();
    let plain = Mesh::new(nodes, quads)?;
    let mut r = rng::stream(seed);
    let mut jittered = plain.nodes.clone();
    for (i, p) in jittered.iter_mut().enumerate() {
        let dx: f64 = r.gen_range(-1.0..1.0);
        let dy: f64 = r.gen_range(-1.0..1.0);
        if !plain.boundary[i] {
            p[0] += jitter * hx * dx;
            p[1] += jitter * hy * dy;
        }
    }
    let mut mesh = Mesh::new(jittered, plain.quads)?;
    mesh.spacing = None;
    Ok(mesh)
}

/// Cartesian lattice of `nx * ny` sites with spacing `h`. Site `(i, j)` has
/// index `j * nx + i` and sits at `origin + (i h, j h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

impl Lattice {
    pub fn new(nx: usize, ny: usize, h: f64) -> Result<Self> {
        let lattice = Lattice {
            nx,
            ny,
            h,
            origin: [0.0, 0.0],
        };
        lattice.validate()?;
        Ok(lattice)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::param(
                "a lattice needs at least 2 sites per direction",
            ));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::param("lattice spacing must be positive"));
        }
        Ok(())
    }

    pub fn site_count(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, site: usize) -> [f64; 2] {
        let (i, j) = (site % self.nx, site / self.nx);
        [
            self.origin[0] + i as f64 * self.h,
            self.origin[1] + j as f64 * self.h,
        ]
    }

    /// The four neighbour slots (west, east, south, north); `None` where the
    /// slot falls outside the lattice.
    #[inline]
    pub fn neighbour_slots(&self, site: usize) -> [Option<usize>; 4] {
        let (i, j) = (site % self.nx, site / self.nx);
        [
            (i > 0).then(|| site - 1),
            (i + 1 < self.nx).then(|| site + 1),
            (j > 0).then(|| site - self.nx),
            (j + 1 < self.ny).then(|| site + self.nx),
        ]
    }
}
