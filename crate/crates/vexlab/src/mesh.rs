//! Criss-cross triangulation of a rectangle, ball sub-patches, and exact
//! quadrature for per-triangle-constant integrands.
//!
//! Every cell of the structured (nx-1) x (ny-1) grid is split into two
//! fixed-orientation triangles, so piecewise-linear fields have constant
//! gradients per triangle and every ball integral is a finite sum.

use crate::{Error, Result};

/// Axis-aligned rectangle (a1, b1) x (a2, b2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl Rect {
    pub const UNIT: Rect = Rect { a1: 0.0, b1: 1.0, a2: 0.0, b2: 1.0 };

    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Result<Rect> {
        let ok = a1.is_finite() && b1.is_finite() && a2.is_finite() && b2.is_finite();
        if !ok || b1 <= a1 || b2 <= a2 {
            return Err(Error::DegenerateRectangle(format!(
                "({a1}, {b1}) x ({a2}, {b2})"
            )));
        }
        Ok(Rect { a1, b1, a2, b2 })
    }

    pub fn width(&self) -> f64 {
        self.b1 - self.a1
    }

    pub fn height(&self) -> f64 {
        self.b2 - self.a2
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.a1 + self.b1), 0.5 * (self.a2 + self.b2)]
    }

    /// Whether the closed ball of radius `r` around `c` lies inside the rectangle.
    pub fn contains_ball(&self, c: [f64; 2], r: f64) -> bool {
        c[0] - r >= self.a1 && c[0] + r <= self.b1 && c[1] - r >= self.a2 && c[1] + r <= self.b2
    }
}

/// One triangle of the grid: vertex ids, exact area, barycenter, and the
/// gradients of its three hat functions (constant on the triangle).
#[derive(Clone, Debug)]
pub struct Triangle {
    pub nodes: [usize; 3],
    pub area: f64,
    pub barycenter: [f64; 2],
    /// grads[k] is the gradient of the hat function of nodes[k].
    pub grads: [[f64; 2]; 3],
}

/// Structured triangulation of a rectangle. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Grid {
    bounds: Rect,
    nx: usize,
    ny: usize,
    nodes: Vec<[f64; 2]>,
    tris: Vec<Triangle>,
}

impl Grid {
    /// Build the criss-cross grid with `nx` x `ny` nodes. Each of the
    /// (nx-1)(ny-1) cells is split along the same diagonal into two triangles.
    pub fn new(bounds: Rect, nx: usize, ny: usize) -> Result<Grid> {
        if nx < 2 || ny < 2 {
            return Err(Error::GridTooSmall { nx, ny });
        }
        let dx = bounds.width() / (nx - 1) as f64;
        let dy = bounds.height() / (ny - 1) as f64;

        let mut nodes = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                // Endpoints exact, interior nodes evenly spaced.
                let x = if i == nx - 1 { bounds.b1 } else { bounds.a1 + i as f64 * dx };
                let y = if j == ny - 1 { bounds.b2 } else { bounds.a2 + j as f64 * dy };
                nodes.push([x, y]);
            }
        }

        let mut tris = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let v00 = j * nx + i;
                let v10 = v00 + 1;
                let v01 = v00 + nx;
                let v11 = v01 + 1;
                tris.push(Triangle::from_nodes([v00, v10, v11], &nodes));
                tris.push(Triangle::from_nodes([v00, v11, v01], &nodes));
            }
        }
        Ok(Grid { bounds, nx, ny, nodes, tris })
    }

    pub fn bounds(&self) -> Rect {
        self.bounds
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn tri_count(&self) -> usize {
        self.tris.len()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn tris(&self) -> &[Triangle] {
        &self.tris
    }

    pub fn cell_size(&self) -> [f64; 2] {
        [
            self.bounds.width() / (self.nx - 1) as f64,
            self.bounds.height() / (self.ny - 1) as f64,
        ]
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        let i = n % self.nx;
        let j = n / self.nx;
        i == 0 || i == self.nx - 1 || j == 0 || j == self.ny - 1
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| self.is_boundary_node(n)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count()).filter(|&n| !self.is_boundary_node(n)).collect()
    }

    /// Whether the closed ball lies inside the domain.
    pub fn contains_ball(&self, center: [f64; 2], r: f64) -> bool {
        self.bounds.contains_ball(center, r)
    }

    /// Maximal set of triangles with all three vertices in the closed ball
    /// `B_r(center)` (inner approximation of the ball).
    pub fn ball_patch(&self, center: [f64; 2], r: f64) -> Result<Patch> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::BadRadius(r));
        }
        let r2 = r * r;
        let inside = |n: usize| {
            let p = self.nodes[n];
            let dx = p[0] - center[0];
            let dy = p[1] - center[1];
            dx * dx + dy * dy <= r2
        };

        let mut member = vec![false; self.tri_count()];
        let mut tri_ids = Vec::new();
        let mut area = Vec::new();
        for (tid, tri) in self.tris.iter().enumerate() {
            if tri.nodes.iter().all(|&n| inside(n)) {
                member[tid] = true;
                tri_ids.push(tid);
                area.push(tri.area);
            }
        }
        if tri_ids.is_empty() {
            return Err(Error::UnderResolvedBall { x: center[0], y: center[1], radius: r });
        }

        let mut in_patch = vec![false; self.node_count()];
        for &tid in &tri_ids {
            for &n in &self.tris[tid].nodes {
                in_patch[n] = true;
            }
        }
        // A patch node is a boundary node if it touches a non-member triangle
        // or lies on the domain boundary.
        let mut is_bdry = vec![false; self.node_count()];
        for (tid, tri) in self.tris.iter().enumerate() {
            if !member[tid] {
                for &n in &tri.nodes {
                    if in_patch[n] {
                        is_bdry[n] = true;
                    }
                }
            }
        }
        let mut nodes = Vec::new();
        let mut boundary_nodes = Vec::new();
        let mut interior_nodes = Vec::new();
        for n in 0..self.node_count() {
            if in_patch[n] {
                nodes.push(n);
                if is_bdry[n] || self.is_boundary_node(n) {
                    boundary_nodes.push(n);
                } else {
                    interior_nodes.push(n);
                }
            }
        }

        Ok(Patch {
            center,
            radius: r,
            area: pairwise_sum(&area),
            tris: tri_ids,
            nodes,
            boundary_nodes,
            interior_nodes,
            inside_domain: self.contains_ball(center, r),
        })
    }
}

impl Triangle {
    fn from_nodes(ids: [usize; 3], nodes: &[[f64; 2]]) -> Triangle {
        let [p0, p1, p2] = [nodes[ids[0]], nodes[ids[1]], nodes[ids[2]]];
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let area = 0.5 * two_a;
        debug_assert!(area > 0.0, "triangle orientation must be CCW");
        let grads = [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ];
        Triangle {
            nodes: ids,
            area,
            barycenter: [
                (p0[0] + p1[0] + p2[0]) / 3.0,
                (p0[1] + p1[1] + p2[1]) / 3.0,
            ],
            grads,
        }
    }
}

/// Ball sub-patch: the triangles of a grid whose vertices all lie in a
/// closed ball. Immutable after construction.
#[derive(Clone, Debug)]
pub struct Patch {
    center: [f64; 2],
    radius: f64,
    area: f64,
    /// Member triangle ids, ascending.
    tris: Vec<usize>,
    /// All member nodes, ascending.
    nodes: Vec<usize>,
    boundary_nodes: Vec<usize>,
    interior_nodes: Vec<usize>,
    /// Whether the closed ball itself lies inside the domain rectangle.
    /// Callers that require `B_2R` inside the domain must check separately.
    inside_domain: bool,
}

impl Patch {
    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn tri_ids(&self) -> &[usize] {
        &self.tris
    }

    pub fn tri_count(&self) -> usize {
        self.tris.len()
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.nodes
    }

    pub fn boundary_node_ids(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn interior_node_ids(&self) -> &[usize] {
        &self.interior_nodes
    }

    pub fn inside_domain(&self) -> bool {
        self.inside_domain
    }
}

/// Integration region: the whole grid or a ball patch of it.
#[derive(Clone, Copy)]
pub struct Region<'a> {
    grid: &'a Grid,
    patch: Option<&'a Patch>,
}

impl<'a> Region<'a> {
    pub fn whole(grid: &'a Grid) -> Region<'a> {
        Region { grid, patch: None }
    }

    pub fn ball(grid: &'a Grid, patch: &'a Patch) -> Region<'a> {
        Region { grid, patch: Some(patch) }
    }

    pub fn grid(&self) -> &'a Grid {
        self.grid
    }

    pub fn tri_count(&self) -> usize {
        match self.patch {
            Some(p) => p.tri_count(),
            None => self.grid.tri_count(),
        }
    }

    /// Global id of the k-th triangle of the region.
    pub fn tri_id(&self, k: usize) -> usize {
        match self.patch {
            Some(p) => p.tri_ids()[k],
            None => k,
        }
    }

    pub fn area(&self) -> f64 {
        match self.patch {
            Some(p) => p.area(),
            None => self.grid.bounds.area(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.tri_count() == 0
    }
}

/// Sum `value * area` over the region's triangles. `values` holds one entry
/// per grid triangle (global ids); only the region's triangles contribute.
/// Exact for per-triangle-constant integrands, and order-2 accurate for
/// smooth integrands sampled at barycenters.
pub fn integrate(region: Region<'_>, values: &[f64]) -> Result<f64> {
    if values.len() != region.grid().tri_count() {
        return Err(Error::ValueCountMismatch {
            expected: region.grid().tri_count(),
            got: values.len(),
        });
    }
    let tris = region.grid().tris();
    Ok(pairwise_map_sum(region.tri_count(), &|k| {
        let tid = region.tri_id(k);
        values[tid] * tris[tid].area
    }))
}

/// Mean value of `values` over the region (integral divided by region area).
pub fn mean_value(region: Region<'_>, values: &[f64]) -> Result<f64> {
    Ok(integrate(region, values)? / region.area())
}

/// Fixed-order pairwise summation; bit-reproducible regardless of chunking.
pub(crate) fn pairwise_map_sum<F: Fn(usize) -> f64>(n: usize, f: &F) -> f64 {
    fn go<F: Fn(usize) -> f64>(lo: usize, hi: usize, f: &F) -> f64 {
        if hi - lo <= 64 {
            let mut s = 0.0;
            for i in lo..hi {
                s += f(i);
            }
            s
        } else {
            let mid = lo + (hi - lo) / 2;
            go(lo, mid, f) + go(mid, hi, f)
        }
    }
    go(0, n, f)
}

pub(crate) fn pairwise_sum(x: &[f64]) -> f64 {
    pairwise_map_sum(x.len(), &|i| x[i])
}
