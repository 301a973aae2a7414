//! Discrete energy, weak residual, and Dirichlet solver for
//! `div(|grad u|^{p(x)-2} grad u) = g + div(F)`, plus the p(x)-harmonic
//! replacement on ball patches.
//!
//! The solver minimizes the regularized energy
//! `J_eps(u) = int (eps^2 + |grad u|^2)^{p(x)/2} / p(x) + int g u - int F . grad u`
//! by frozen-coefficient (Kacanov) linear solves with a backtracking line
//! search on `J_eps`, under an eps-continuation schedule. Sign convention:
//! the critical point satisfies
//! `int |grad u|^{p-2} grad u . grad z = -int g z + int F . grad z`.

use crate::mesh::{pairwise_map_sum, Grid, Patch};
use crate::spaces::ProblemSpec;
use crate::{Error, Result};

/// Node-valued scalar field (piecewise-linear via the grid's hat functions).
#[derive(Clone, Debug)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.node_count() {
            return Err(Error::NodeCountMismatch {
                expected: grid.node_count(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(ScalarField { values })
    }

    pub fn zeros(grid: &Grid) -> ScalarField {
        ScalarField { values: vec![0.0; grid.node_count()] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        ScalarField { values: grid.nodes().iter().map(|p| f(p[0], p[1])).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        ScalarField { values: self.values.iter().map(|v| c * v).collect() }
    }

    /// max |u| over the given node ids.
    pub fn max_abs_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&n| self.values[n].abs()).fold(0.0, f64::max)
    }
}

/// Per-triangle constant 2-vectors (gradients, flux samples).
#[derive(Clone, Debug)]
pub struct CellVectorField {
    vectors: Vec<[f64; 2]>,
}

impl CellVectorField {
    pub fn new(grid: &Grid, vectors: Vec<[f64; 2]>) -> Result<CellVectorField> {
        if vectors.len() != grid.tri_count() {
            return Err(Error::ValueCountMismatch {
                expected: grid.tri_count(),
                got: vectors.len(),
            });
        }
        Ok(CellVectorField { vectors })
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn norms(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v[0].hypot(v[1])).collect()
    }
}

/// Exact per-triangle gradient of the piecewise-linear interpolant of u.
pub fn gradient_of(grid: &Grid, u: &ScalarField) -> Result<CellVectorField> {
    if u.values.len() != grid.node_count() {
        return Err(Error::NodeCountMismatch {
            expected: grid.node_count(),
            got: u.values.len(),
        });
    }
    let vectors = grid
        .tris()
        .iter()
        .map(|t| {
            let mut g = [0.0, 0.0];
            for k in 0..3 {
                let v = u.values[t.nodes[k]];
                g[0] += v * t.grads[k][0];
                g[1] += v * t.grads[k][1];
            }
            g
        })
        .collect();
    Ok(CellVectorField { vectors })
}

/// Regularized flux `A(x, xi) = (eps^2 + |xi|^2)^{(p-2)/2} xi`. For `eps = 0`,
/// `p < 2` and `xi = 0` the flux is continued by zero.
pub fn regularized_flux(p: f64, eps: f64, xi: [f64; 2]) -> [f64; 2] {
    let w = flux_weight(p, eps, xi[0] * xi[0] + xi[1] * xi[1]);
    [w * xi[0], w * xi[1]]
}

/// The scalar weight `(eps^2 + |xi|^2)^{(p-2)/2}` with the zero-gradient guard.
pub(crate) fn flux_weight(p: f64, eps: f64, grad_sq: f64) -> f64 {
    let s = eps * eps + grad_sq;
    if s == 0.0 {
        // Limit for p > 2 is 0; for p < 2 the flux is continued by zero.
        return if p == 2.0 { 1.0 } else { 0.0 };
    }
    s.powf(0.5 * (p - 2.0))
}

fn energy_density(p: f64, eps: f64, grad_sq: f64) -> f64 {
    (eps * eps + grad_sq).powf(0.5 * p) / p
}

/// Solver configuration: eps-continuation schedule and tolerances.
#[derive(Clone, Debug)]
pub struct SolverSettings {
    /// Regularization continuation; the last entry is the final eps.
    pub eps_schedule: Vec<f64>,
    /// Convergence threshold on the max-norm of the weak residual.
    pub residual_tol: f64,
    /// Kacanov iteration cap per eps stage.
    pub max_stage_iterations: usize,
    /// Relative residual target of the inner conjugate-gradient solves.
    pub linear_rel_tol: f64,
    pub linear_max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4],
            residual_tol: 1e-8,
            max_stage_iterations: 60,
            linear_rel_tol: 1e-14,
            linear_max_iterations: 200_000,
        }
    }
}

impl SolverSettings {
    pub fn eps_final(&self) -> f64 {
        self.eps_schedule.last().copied().unwrap_or(0.0)
    }
}

/// Solve diagnostics. The energy history is non-increasing across accepted
/// iterations (within a stage by the line search, across stages because the
/// regularized energy is pointwise monotone in eps).
#[derive(Clone, Debug)]
pub struct SolveDiagnostics {
    pub outer_iterations: usize,
    pub linear_iterations: usize,
    pub final_residual: f64,
    pub energy_history: Vec<f64>,
    pub eps_used: Vec<f64>,
    pub converged: bool,
}

/// Discrete energy `J_eps(u)` over the whole grid, exact for the
/// barycenter-sampled data of the problem.
pub fn energy(u: &ScalarField, problem: &ProblemSpec, eps: f64) -> Result<f64> {
    if u.values.len() != problem.grid.node_count() {
        return Err(Error::NodeCountMismatch {
            expected: problem.grid.node_count(),
            got: u.values.len(),
        });
    }
    let sub = SubProblem::whole(problem);
    sub.energy(&u.values, eps)
}

/// Weak residual at the interior nodes (ascending node order): the gradient
/// of `J_eps` with respect to the interior values.
pub fn residual(u: &ScalarField, problem: &ProblemSpec, eps: f64) -> Result<Vec<f64>> {
    if u.values.len() != problem.grid.node_count() {
        return Err(Error::NodeCountMismatch {
            expected: problem.grid.node_count(),
            got: u.values.len(),
        });
    }
    let sub = SubProblem::whole(problem);
    Ok(sub.residual(&u.values, eps))
}

/// Dirichlet solve: minimize `J_eps` over fields matching `problem.boundary`
/// on the domain boundary, continuing eps down the schedule. Non-convergence
/// returns the best iterate with `converged = false` in the diagnostics.
pub fn solve_dirichlet(problem: &ProblemSpec) -> Result<(ScalarField, SolveDiagnostics)> {
    let report = crate::spaces::verify_assumptions(problem);
    if let Some(e) = report.entry("1.2") {
        if !e.passed() {
            return Err(Error::Precondition(format!(
                "assumption (1.2) {} fails: {}",
                crate::spaces::INEQ_1_2,
                e.detail
            )));
        }
    }
    let grid = &problem.grid;
    let mut u0 = vec![0.0; grid.node_count()];
    for (n, v) in u0.iter_mut().enumerate() {
        if grid.is_boundary_node(n) {
            *v = problem.boundary[n];
        }
    }
    let sub = SubProblem::whole(problem);
    let (values, diag) = minimize(&sub, u0, &problem.settings)?;
    Ok((ScalarField { values }, diag))
}

/// p(x)-harmonic replacement on a patch: minimize the regularized gradient
/// energy (no g, no F) over the patch with `v = u` on the patch boundary,
/// leaving `v = u` outside. If the solve does not beat the unregularized
/// patch energy of `u` itself, `u` is returned unchanged (it is admissible).
pub fn pxharmonic_replacement(
    u: &ScalarField,
    patch: &Patch,
    problem: &ProblemSpec,
) -> Result<(ScalarField, SolveDiagnostics)> {
    let grid = &problem.grid;
    if u.values.len() != grid.node_count() {
        return Err(Error::NodeCountMismatch {
            expected: grid.node_count(),
            got: u.values.len(),
        });
    }
    let sub = SubProblem::patch(problem, patch);
    if sub.free.is_empty() {
        // Every patch node is pinned; the replacement is u itself.
        let diag = SolveDiagnostics {
            outer_iterations: 0,
            linear_iterations: 0,
            final_residual: 0.0,
            energy_history: Vec::new(),
            eps_used: problem.settings.eps_schedule.clone(),
            converged: true,
        };
        return Ok((u.clone(), diag));
    }
    let (values, diag) = minimize(&sub, u.values.clone(), &problem.settings)?;
    let v = ScalarField { values };

    // Exact-energy safeguard: the discrete minimizer can only lower the
    // unregularized patch energy; if the eps-solve failed to, keep u.
    if sub.bare_energy(&v.values) > sub.bare_energy(&u.values) {
        return Ok((u.clone(), diag));
    }
    Ok((v, diag))
}

// ----------------------------------------------------------------------------
// Internal: restricted problem, assembly, PCG, and the descent loop
// ----------------------------------------------------------------------------

struct SubProblem<'a> {
    grid: &'a Grid,
    /// Triangles assembled over (global ids).
    tris: Vec<usize>,
    /// Free node ids, ascending; everything else is pinned.
    free: Vec<usize>,
    /// node id -> dof index, usize::MAX when pinned.
    dof_of: Vec<usize>,
    p: &'a [f64],
    g: Option<&'a [f64]>,
    f: Option<&'a [[f64; 2]]>,
}

impl<'a> SubProblem<'a> {
    fn whole(problem: &'a ProblemSpec) -> SubProblem<'a> {
        let grid = &problem.grid;
        let free = grid.interior_nodes();
        let mut dof_of = vec![usize::MAX; grid.node_count()];
        for (d, &n) in free.iter().enumerate() {
            dof_of[n] = d;
        }
        SubProblem {
            grid,
            tris: (0..grid.tri_count()).collect(),
            free,
            dof_of,
            p: problem.exponents.values(),
            g: Some(&problem.source),
            f: Some(&problem.flux),
        }
    }

    fn patch(problem: &'a ProblemSpec, patch: &Patch) -> SubProblem<'a> {
        let grid = &problem.grid;
        let free = patch.interior_node_ids().to_vec();
        let mut dof_of = vec![usize::MAX; grid.node_count()];
        for (d, &n) in free.iter().enumerate() {
            dof_of[n] = d;
        }
        SubProblem {
            grid,
            tris: patch.tri_ids().to_vec(),
            free,
            dof_of,
            p: problem.exponents.values(),
            g: None,
            f: None,
        }
    }

    fn tri_grad(&self, tid: usize, u: &[f64]) -> [f64; 2] {
        let t = &self.grid.tris()[tid];
        let mut g = [0.0, 0.0];
        for k in 0..3 {
            let v = u[t.nodes[k]];
            g[0] += v * t.grads[k][0];
            g[1] += v * t.grads[k][1];
        }
        g
    }

    fn energy(&self, u: &[f64], eps: f64) -> Result<f64> {
        let tris = self.grid.tris();
        let j = pairwise_map_sum(self.tris.len(), &|k| {
            let tid = self.tris[k];
            let t = &tris[tid];
            let gv = self.tri_grad(tid, u);
            let grad_sq = gv[0] * gv[0] + gv[1] * gv[1];
            let mut density = energy_density(self.p[tid], eps, grad_sq);
            if let Some(g) = self.g {
                let ubar = (u[t.nodes[0]] + u[t.nodes[1]] + u[t.nodes[2]]) / 3.0;
                density += g[tid] * ubar;
            }
            if let Some(f) = self.f {
                density -= f[tid][0] * gv[0] + f[tid][1] * gv[1];
            }
            density * t.area
        });
        if !j.is_finite() {
            return Err(Error::NonFiniteEnergy(format!("J_eps at eps = {eps}")));
        }
        Ok(j)
    }

    /// Unregularized gradient energy `int |grad u|^{p(x)}/p(x)` over the
    /// subdomain (no data terms); used by the replacement safeguard.
    fn bare_energy(&self, u: &[f64]) -> f64 {
        let tris = self.grid.tris();
        pairwise_map_sum(self.tris.len(), &|k| {
            let tid = self.tris[k];
            let gv = self.tri_grad(tid, u);
            let grad_sq = gv[0] * gv[0] + gv[1] * gv[1];
            energy_density(self.p[tid], 0.0, grad_sq) * tris[tid].area
        })
    }

    /// Gradient of `J_eps` with respect to the free node values.
    fn residual(&self, u: &[f64], eps: f64) -> Vec<f64> {
        let tris = self.grid.tris();
        let mut r = vec![0.0; self.free.len()];
        for &tid in &self.tris {
            let t = &tris[tid];
            let gv = self.tri_grad(tid, u);
            let grad_sq = gv[0] * gv[0] + gv[1] * gv[1];
            let w = flux_weight(self.p[tid], eps, grad_sq);
            for k in 0..3 {
                let dof = self.dof_of[t.nodes[k]];
                if dof == usize::MAX {
                    continue;
                }
                let mut v = w * (gv[0] * t.grads[k][0] + gv[1] * t.grads[k][1]);
                if let Some(g) = self.g {
                    v += g[tid] / 3.0;
                }
                if let Some(f) = self.f {
                    v -= f[tid][0] * t.grads[k][0] + f[tid][1] * t.grads[k][1];
                }
                r[dof] += v * t.area;
            }
        }
        r
    }

    /// Column pattern of the stiffness matrix on the free dofs.
    fn symbolic(&self) -> Csr {
        let n = self.free.len();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &tid in &self.tris {
            let nodes = self.grid.tris()[tid].nodes;
            for &ni in &nodes {
                let di = self.dof_of[ni];
                if di == usize::MAX {
                    continue;
                }
                for &nj in &nodes {
                    let dj = self.dof_of[nj];
                    if dj != usize::MAX {
                        adj[di].push(dj);
                    }
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        let nnz = cols.len();
        Csr { row_ptr, cols, vals: vec![0.0; nnz] }
    }

    /// Frozen-coefficient stiffness and right-hand side at the current u.
    fn assemble(&self, u: &[f64], eps: f64, a: &mut Csr) -> Vec<f64> {
        let tris = self.grid.tris();
        for v in a.vals.iter_mut() {
            *v = 0.0;
        }
        let mut rhs = vec![0.0; self.free.len()];
        for &tid in &self.tris {
            let t = &tris[tid];
            let gv = self.tri_grad(tid, u);
            let w = flux_weight(self.p[tid], eps, gv[0] * gv[0] + gv[1] * gv[1]);
            for i in 0..3 {
                let di = self.dof_of[t.nodes[i]];
                if di == usize::MAX {
                    continue;
                }
                if let Some(g) = self.g {
                    rhs[di] -= t.area * g[tid] / 3.0;
                }
                if let Some(f) = self.f {
                    rhs[di] += t.area * (f[tid][0] * t.grads[i][0] + f[tid][1] * t.grads[i][1]);
                }
                for j in 0..3 {
                    let c = w * t.area
                        * (t.grads[i][0] * t.grads[j][0] + t.grads[i][1] * t.grads[j][1]);
                    let dj = self.dof_of[t.nodes[j]];
                    if dj == usize::MAX {
                        rhs[di] -= c * u[t.nodes[j]];
                    } else {
                        a.add(di, dj, c);
                    }
                }
            }
        }
        rhs
    }
}

struct Csr {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn add(&mut self, row: usize, col: usize, v: f64) {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        let k = lo + self.cols[lo..hi].partition_point(|&c| c < col);
        debug_assert!(self.cols[k] == col);
        self.vals[k] += v;
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for (row, out) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *out = s;
        }
    }

    fn diag(&self, out: &mut Vec<f64>) {
        out.clear();
        for row in 0..self.row_ptr.len() - 1 {
            let mut d = 0.0;
            for k in self.row_ptr[row]..self.row_ptr[row + 1] {
                if self.cols[k] == row {
                    d = self.vals[k];
                }
            }
            out.push(if d > 0.0 { d } else { 1.0 });
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_map_sum(a.len(), &|i| a[i] * b[i])
}

/// Jacobi-preconditioned conjugate gradients with deterministic iteration
/// order; stops at the relative-residual target or on stagnation.
fn pcg(a: &Csr, b: &[f64], mut x: Vec<f64>, rel_tol: f64, max_iters: usize) -> (Vec<f64>, usize) {
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return (vec![0.0; n], 0);
    }
    let target = rel_tol * bnorm;

    let mut diag = Vec::new();
    a.diag(&mut diag);

    let mut r = vec![0.0; n];
    a.mul(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];

    let mut rnorm = dot(&r, &r).sqrt();
    let mut best = rnorm;
    let mut since_best = 0usize;
    let mut iters = 0usize;

    while rnorm > target && iters < max_iters {
        a.mul(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rnorm = dot(&r, &r).sqrt();
        iters += 1;

        // Stagnation exit: double precision caps the attainable residual.
        if rnorm < best * 0.99 {
            best = rnorm;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 250 {
                break;
            }
        }
    }
    (x, iters)
}

const ARMIJO_C1: f64 = 1e-4;

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped Kacanov descent over the eps schedule. `u0` carries the pinned
/// values; free entries are the starting guess.
fn minimize(
    sub: &SubProblem<'_>,
    mut u: Vec<f64>,
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let schedule = if settings.eps_schedule.is_empty() {
        vec![0.0]
    } else {
        settings.eps_schedule.clone()
    };

    let mut a = sub.symbolic();
    let mut diag = SolveDiagnostics {
        outer_iterations: 0,
        linear_iterations: 0,
        final_residual: f64::INFINITY,
        energy_history: Vec::new(),
        eps_used: schedule.clone(),
        converged: false,
    };

    let mut trial = u.clone();
    for (stage, &eps) in schedule.iter().enumerate() {
        let last_stage = stage + 1 == schedule.len();
        let mut res = sub.residual(&u, eps);
        let mut res_norm = max_abs(&res);
        if !res_norm.is_finite() {
            return Err(Error::NonFiniteEnergy("weak residual".into()));
        }

        let mut it = 0;
        while res_norm > settings.residual_tol && it < settings.max_stage_iterations {
            let rhs = sub.assemble(&u, eps, &mut a);
            let x0: Vec<f64> = sub.free.iter().map(|&n| u[n]).collect();
            let (x, lin_iters) =
                pcg(&a, &rhs, x0, settings.linear_rel_tol, settings.linear_max_iterations);
            diag.linear_iterations += lin_iters;

            // Direction to the frozen-coefficient solution; fall back to
            // steepest descent if it fails to be a descent direction.
            let mut d: Vec<f64> = sub
                .free
                .iter()
                .enumerate()
                .map(|(k, &n)| x[k] - u[n])
                .collect();
            let mut gd = dot(&res, &d);
            if !(gd < 0.0) {
                d = res.iter().map(|r| -r).collect();
                gd = -dot(&res, &res);
                if gd == 0.0 {
                    break;
                }
            }

            let j0 = sub.energy(&u, eps)?;
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                trial.copy_from_slice(&u);
                for (k, &n) in sub.free.iter().enumerate() {
                    trial[n] = u[n] + t * d[k];
                }
                let j1 = sub.energy(&trial, eps)?;
                if j1 <= j0 + ARMIJO_C1 * t * gd {
                    u.copy_from_slice(&trial);
                    diag.energy_history.push(j1);
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break; // no representable step decreases J: stage is done
            }

            diag.outer_iterations += 1;
            it += 1;
            res = sub.residual(&u, eps);
            res_norm = max_abs(&res);
            if !res_norm.is_finite() {
                return Err(Error::NonFiniteEnergy("weak residual".into()));
            }
        }

        if last_stage {
            diag.final_residual = res_norm;
            diag.converged = res_norm <= settings.residual_tol;
        }
    }
    Ok((u, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use crate::spaces::ExponentField;
    use proptest::prelude::*;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(Rect::UNIT, n, n).unwrap()
    }

    fn problem_with(
        grid: &Grid,
        p: ExponentField,
        g: f64,
        f: [f64; 2],
        boundary: impl Fn(f64, f64) -> f64,
    ) -> ProblemSpec {
        let b = ScalarField::from_fn(grid, boundary);
        ProblemSpec::new(
            grid.clone(),
            p,
            vec![g; grid.tri_count()],
            vec![f; grid.tri_count()],
            3.0,
            3.0,
            b.values().to_vec(),
            SolverSettings::default(),
        )
        .unwrap()
    }

    #[test]
    fn gradient_of_linear_fields() {
        let g = unit_grid(9);
        let u = ScalarField::from_fn(&g, |x, _| x);
        for v in gradient_of(&g, &u).unwrap().vectors() {
            assert!((v[0] - 1.0).abs() < 1e-13 && v[1].abs() < 1e-13);
        }
        let c = ScalarField::from_fn(&g, |_, _| 7.25);
        for v in gradient_of(&g, &c).unwrap().vectors() {
            assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
        }
        let w = ScalarField::from_fn(&g, |x, y| x + 2.0 * y);
        for v in gradient_of(&g, &w).unwrap().vectors() {
            assert!((v[0] - 1.0).abs() < 1e-13 && (v[1] - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn energy_closed_forms() {
        let g = unit_grid(9);
        let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();

        let zero = ScalarField::zeros(&g);
        let pr = problem_with(&g, p2.clone(), 0.0, [0.0, 0.0], |_, _| 0.0);
        assert_eq!(energy(&zero, &pr, 0.0).unwrap(), 0.0);

        let u = ScalarField::from_fn(&g, |x, _| x);
        let pr = problem_with(&g, p2.clone(), 0.0, [0.0, 0.0], |x, _| x);
        let j = energy(&u, &pr, 0.0).unwrap();
        assert!((j - 0.5).abs() < 1e-13, "J = {j}");

        let pr = problem_with(&g, p2, 0.0, [1.0, 0.0], |x, _| x);
        let j = energy(&u, &pr, 0.0).unwrap();
        assert!((j + 0.5).abs() < 1e-13, "J = {j}");
    }

    #[test]
    fn zero_gradient_flux_guard_for_singular_exponents() {
        // eps = 0 with p < 2: triangles with zero gradient use zero flux.
        let g = unit_grid(9);
        let p = ExponentField::constant(&g, 1.5, 4.0).unwrap();
        let pr = problem_with(&g, p, 0.0, [0.0, 0.0], |_, _| 3.0);
        let u = ScalarField::from_fn(&g, |_, _| 3.0);
        let r = residual(&u, &pr, 0.0).unwrap();
        assert!(r.iter().all(|v| v.is_finite()));
        assert!(max_abs(&r) == 0.0, "flat field has zero residual, got {}", max_abs(&r));
        assert_eq!(regularized_flux(1.5, 0.0, [0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn overflowing_energy_is_reported() {
        let g = unit_grid(9);
        let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        let pr = problem_with(&g, p2, 0.0, [0.0, 0.0], |_, _| 0.0);
        let u = ScalarField::from_fn(&g, |x, _| 1e200 * x);
        assert!(matches!(energy(&u, &pr, 0.0), Err(Error::NonFiniteEnergy(_))));
    }

    #[test]
    fn residual_vanishes_for_discrete_harmonic_linear() {
        let g = unit_grid(17);
        let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        let pr = problem_with(&g, p2, 0.0, [0.0, 0.0], |x, _| x);
        let u = ScalarField::from_fn(&g, |x, _| x);
        let r = residual(&u, &pr, 0.0).unwrap();
        assert!(max_abs(&r) < 1e-13, "residual {}", max_abs(&r));
    }

    #[test]
    fn constant_flux_term_telescopes_to_zero() {
        // With F constant and g = 0, the F part of the residual is
        // sum_T area F . grad(hat) = F . int grad(hat) = 0 for interior hats.
        let g = unit_grid(17);
        let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| 0.5 * x - 0.25 * y);
        let with_f = problem_with(&g, p2.clone(), 0.0, [1.3, -0.7], |x, y| 0.5 * x - 0.25 * y);
        let without = problem_with(&g, p2, 0.0, [0.0, 0.0], |x, y| 0.5 * x - 0.25 * y);
        let r1 = residual(&u, &with_f, 0.0).unwrap();
        let r0 = residual(&u, &without, 0.0).unwrap();
        for (a, b) in r1.iter().zip(&r0) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn residual_is_gradient_of_energy() {
        // Central finite differences of J_eps against the assembled residual.
        let g = unit_grid(9);
        let p = ExponentField::from_fn(&g, 4.0, |x, y| {
            1.5 + 0.5 * (0.5 + 0.5 * (3.0 * x).sin() * (2.0 * y).cos())
        })
        .unwrap();
        let pr = problem_with(&g, p, 0.4, [0.2, -0.1], |x, y| x * y);
        let mut u = ScalarField::from_fn(&g, |x, y| x * y + 0.3 * (4.0 * x).sin() * y);
        let eps = 1e-3;
        let r = residual(&u, &pr, eps).unwrap();
        let interior = g.interior_nodes();
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        let scale = max_abs(&r);
        for (k, &n) in interior.iter().enumerate() {
            let keep = u.values()[n];
            u.values_mut()[n] = keep + h;
            let jp = energy(&u, &pr, eps).unwrap();
            u.values_mut()[n] = keep - h;
            let jm = energy(&u, &pr, eps).unwrap();
            u.values_mut()[n] = keep;
            let fd = (jp - jm) / (2.0 * h);
            worst = worst.max((fd - r[k]).abs() / scale);
        }
        assert!(worst < 1e-6, "max relative FD mismatch {worst}");
    }

    #[test]
    fn dirichlet_solve_reproduces_linear_fields() {
        let g = unit_grid(33);
        let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        let pr = problem_with(&g, p2, 0.0, [0.0, 0.0], |x, _| x);
        let (u, diag) = solve_dirichlet(&pr).unwrap();
        assert!(diag.converged);
        let exact = ScalarField::from_fn(&g, |x, _| x);
        let err: f64 = u
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "max node error {err}");
    }

    #[test]
    fn dirichlet_solve_gate_on_assumption_1_2() {
        let g = unit_grid(5);
        let bad = ExponentField::new(&g, vec![1.0; g.tri_count()], 1.0, 1.0, 4.0).unwrap();
        let pr = problem_with(&g, bad, 0.0, [0.0, 0.0], |_, _| 0.0);
        assert!(matches!(solve_dirichlet(&pr), Err(Error::Precondition(_))));
    }

    #[test]
    fn energy_history_is_non_increasing() {
        let g = unit_grid(17);
        let p = ExponentField::from_fn(&g, 4.0, |x, y| {
            1.5 + 0.4 * (std::f64::consts::PI * x).sin() * (std::f64::consts::PI * y).sin()
        })
        .unwrap();
        let pr = problem_with(&g, p, 1.0, [0.1, 0.2], |x, y| x * x - y);
        let (_, diag) = solve_dirichlet(&pr).unwrap();
        assert!(diag.converged, "residual {}", diag.final_residual);
        for w in diag.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "energy increased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn replacement_of_harmonic_field_is_identity() {
        let g = unit_grid(33);
        let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        let pr = problem_with(&g, p2, 0.0, [0.0, 0.0], |x, _| x);
        let u = ScalarField::from_fn(&g, |x, y| 0.75 * x + 0.1 * y);
        let patch = g.ball_patch([0.5, 0.5], 0.3).unwrap();
        let (v, _) = pxharmonic_replacement(&u, &patch, &pr).unwrap();
        for &n in patch.node_ids() {
            assert!(
                (v.values()[n] - u.values()[n]).abs() < 1e-10,
                "node {n}: {} vs {}",
                v.values()[n],
                u.values()[n]
            );
        }
        // Outside the patch v is u by construction.
        for n in 0..g.node_count() {
            if !patch.node_ids().contains(&n) {
                assert_eq!(v.values()[n], u.values()[n]);
            }
        }
    }

    #[test]
    fn replacement_lowers_patch_energy() {
        let g = unit_grid(33);
        let p = ExponentField::from_fn(&g, 4.0, |x, y| 1.5 + 0.4 * x * y).unwrap();
        let pr = problem_with(&g, p.clone(), 0.0, [0.0, 0.0], |_, _| 0.0);
        let u = ScalarField::from_fn(&g, |x, y| {
            (3.0 * x).sin() * (2.0 * y).cos() + 0.5 * x * x
        });
        let patch = g.ball_patch([0.5, 0.5], 0.3).unwrap();
        let (v, diag) = pxharmonic_replacement(&u, &patch, &pr).unwrap();
        assert!(diag.converged);
        let sub = SubProblem::patch(&pr, &patch);
        assert!(sub.bare_energy(v.values()) <= sub.bare_energy(u.values()) + 1e-10);
    }

    #[test]
    fn replacement_respects_maximum_principle() {
        let g = unit_grid(33);
        let p = ExponentField::from_fn(&g, 4.0, |x, y| {
            1.5 + 0.5 * (0.5 + 0.5 * (x - y).sin())
        })
        .unwrap();
        let pr = problem_with(&g, p, 0.0, [0.0, 0.0], |_, _| 0.0);
        let u = ScalarField::from_fn(&g, |x, y| (7.0 * x).sin() * (5.0 * y).cos());
        let patch = g.ball_patch([0.45, 0.55], 0.28).unwrap();
        let (v, _) = pxharmonic_replacement(&u, &patch, &pr).unwrap();
        let inner = v.max_abs_over(patch.node_ids());
        let bdry = u.max_abs_over(patch.boundary_node_ids());
        assert!(inner <= bdry + 1e-6, "max principle: {inner} vs {bdry}");
    }

    #[test]
    fn quadratic_source_solve_hits_nodal_values() {
        // Exact solution |x|^2 with g = 4 (n = 2) under the weak sign
        // convention. On this stencil the discrete equations are exact for
        // quadratics, so the solve reproduces the nodal interpolant; the
        // order-2 convergence against |x|^2 itself lives in the harness
        // convergence study.
        for &n in &[9usize, 17, 33] {
            let g = unit_grid(n);
            let p2 = ExponentField::constant(&g, 2.0, 4.0).unwrap();
            let pr = problem_with(&g, p2, 4.0, [0.0, 0.0], |x, y| x * x + y * y);
            let (u, diag) = solve_dirichlet(&pr).unwrap();
            assert!(diag.converged);
            let exact = ScalarField::from_fn(&g, |x, y| x * x + y * y);
            let err: f64 = u
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "max node error {err} at {n}x{n}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn regularized_flux_is_monotone(
            p in 1.01f64..4.0,
            x1 in -3.0f64..3.0, y1 in -3.0f64..3.0,
            x2 in -3.0f64..3.0, y2 in -3.0f64..3.0,
            eps in 0.0f64..0.5,
        ) {
            let a1 = regularized_flux(p, eps, [x1, y1]);
            let a2 = regularized_flux(p, eps, [x2, y2]);
            let m = (a1[0] - a2[0]) * (x1 - x2) + (a1[1] - a2[1]) * (y1 - y2);
            prop_assert!(m >= -1e-12, "monotonicity defect {}", m);
        }
    }
}
