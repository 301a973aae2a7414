//! Manufactured problems with known solutions or radial oracles, chosen to
//! exercise constant and variable exponents, singular fluxes, and singular
//! sources.

use crate::mesh::Grid;
use crate::solver::{ScalarField, SolverSettings};
use crate::spaces::{ExponentField, ProblemSpec};
use crate::{Error, Result};
use std::f64::consts::PI;

/// Preset selector plus its parameters (unused parameters are ignored).
#[derive(Clone, Debug)]
pub struct PresetSpec {
    pub name: String,
    /// Constant exponent for the constant-p presets.
    pub p: f64,
    /// Radial flux exponent: `F = r^a e_r`.
    pub a: f64,
    /// Radial source exponent: `g = r^b`.
    pub b: f64,
}

impl PresetSpec {
    pub fn named(name: &str) -> PresetSpec {
        PresetSpec { name: name.into(), p: 2.0, a: -0.5, b: -1.5 }
    }

    /// Integrability exponents (t1, t2) appropriate for the preset's data.
    pub fn default_integrability(&self) -> (f64, f64) {
        match self.name.as_str() {
            // p ranges over [1.5, 1.9]: t2 must exceed n/(p- - 1) = 4.
            "px-smooth" => (4.0, 6.0),
            // g = r^b needs b t1 > -n; for b = -1.5 that means t1 < 4/3.
            "radial-source" => (1.25, 3.0),
            _ => (3.0, 3.0),
        }
    }
}

/// A problem together with the exact solution it was manufactured from.
pub struct Manufactured {
    pub label: String,
    pub problem: ProblemSpec,
    pub exact: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl Manufactured {
    pub fn exact_field(&self) -> ScalarField {
        ScalarField::from_fn(&self.problem.grid, &self.exact)
    }
}

/// Build a named preset on the given grid.
///
/// Presets: `linear` (p = 2, g = 0, F = 0, u = x1), `quadratic` (p = 2,
/// g = 2n, u = |x|^2), `radial-flux` (constant p, F = r^a e_r about the
/// domain center), `radial-source` (constant p, g = r^b), and `px-smooth`
/// (p(x) = 1.5 + 0.4 sin(pi x1) sin(pi x2) with a prescribed smooth u and g
/// generated by high-order numeric differentiation of the analytic flux).
pub fn manufactured_problem(
    spec: &PresetSpec,
    grid: Grid,
    sobolev_s: f64,
    t1: f64,
    t2: f64,
    settings: SolverSettings,
) -> Result<Manufactured> {
    match spec.name.as_str() {
        "linear" => {
            let exact = |x: f64, _: f64| x;
            let n = grid.tri_count();
            constant_p_problem(grid, 2.0, sobolev_s, t1, t2, settings, vec![0.0; n],
                vec![[0.0, 0.0]; n], exact, "linear")
        }
        "quadratic" => {
            // Laplacian of |x|^2 is 2n = 4 in the plane.
            let exact = |x: f64, y: f64| x * x + y * y;
            let n = grid.tri_count();
            constant_p_problem(grid, 2.0, sobolev_s, t1, t2, settings, vec![4.0; n],
                vec![[0.0, 0.0]; n], exact, "quadratic")
        }
        "radial-flux" => radial_flux(spec, grid, sobolev_s, t1, t2, settings),
        "radial-source" => radial_source(spec, grid, sobolev_s, t1, t2, settings),
        "px-smooth" => px_smooth(grid, sobolev_s, t1, t2, settings),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

#[allow(clippy::too_many_arguments)]
fn constant_p_problem(
    grid: Grid,
    p: f64,
    sobolev_s: f64,
    t1: f64,
    t2: f64,
    settings: SolverSettings,
    source: Vec<f64>,
    flux: Vec<[f64; 2]>,
    exact: impl Fn(f64, f64) -> f64 + Send + Sync + Clone + 'static,
    label: &str,
) -> Result<Manufactured> {
    let exponents = ExponentField::constant(&grid, p, sobolev_s)?;
    let boundary = ScalarField::from_fn(&grid, exact.clone());
    let problem = ProblemSpec::new(
        grid,
        exponents,
        source,
        flux,
        t1,
        t2,
        boundary.values().to_vec(),
        settings,
    )?;
    Ok(Manufactured { label: label.into(), problem, exact: Box::new(exact) })
}

fn barycenter_samples(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    grid.tris().iter().map(|t| f(t.barycenter[0], t.barycenter[1])).collect()
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Area-weighted average of `f` over a triangle, accurate for integrands with
/// a point singularity at `pole`: the child touching the pole is refined
/// recursively, everything else uses the degree-2 edge-midpoint rule.
fn cell_average_graded(
    f: &dyn Fn(f64, f64) -> f64,
    v: [[f64; 2]; 3],
    pole: [f64; 2],
    depth: usize,
) -> f64 {
    let touches = v
        .iter()
        .any(|&p| (p[0] - pole[0]).hypot(p[1] - pole[1]) < 1e-13);
    if !touches || depth == 0 {
        let m01 = midpoint(v[0], v[1]);
        let m12 = midpoint(v[1], v[2]);
        let m20 = midpoint(v[2], v[0]);
        return (f(m01[0], m01[1]) + f(m12[0], m12[1]) + f(m20[0], m20[1])) / 3.0;
    }
    let m01 = midpoint(v[0], v[1]);
    let m12 = midpoint(v[1], v[2]);
    let m20 = midpoint(v[2], v[0]);
    // Four equal-area children; only the pole-touching ones recurse.
    let children = [
        [v[0], m01, m20],
        [v[1], m12, m01],
        [v[2], m20, m12],
        [m01, m12, m20],
    ];
    children
        .iter()
        .map(|&c| cell_average_graded(f, c, pole, depth - 1))
        .sum::<f64>()
        / 4.0
}

/// Per-triangle samples of a radially singular field: barycenter values away
/// from the pole, graded cell averages on the triangles that touch it
/// (barycenter sampling loses the singular mass there).
fn radial_samples(grid: &Grid, pole: [f64; 2], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let nodes = grid.nodes();
    grid.tris()
        .iter()
        .map(|t| {
            let touches = t
                .nodes
                .iter()
                .any(|&n| (nodes[n][0] - pole[0]).hypot(nodes[n][1] - pole[1]) < 1e-13);
            if touches {
                // Depth keeps the innermost child well above coordinate
                // rounding; the unresolved mass fraction is ~2^{-depth/2}.
                let v = [nodes[t.nodes[0]], nodes[t.nodes[1]], nodes[t.nodes[2]]];
                cell_average_graded(&f, v, pole, 28)
            } else {
                f(t.barycenter[0], t.barycenter[1])
            }
        })
        .collect()
}

fn radial_flux(
    spec: &PresetSpec,
    grid: Grid,
    sobolev_s: f64,
    t1: f64,
    t2: f64,
    settings: SolverSettings,
) -> Result<Manufactured> {
    let (p, a) = (spec.p, spec.a);
    if !(p > 1.0) {
        return Err(Error::BadParams(format!("radial-flux needs p > 1, got {p}")));
    }
    // u' = r^{a/(p-1)} must integrate to a continuous profile, and F = r^a
    // must lie in L^{t2} in the continuum for some admissible t2.
    let kappa = a / (p - 1.0) + 1.0;
    if !(kappa > 0.0) {
        return Err(Error::BadParams(format!(
            "a = {a} <= -(p-1) = {} makes F fall outside L^t2 for every admissible t2",
            -(p - 1.0)
        )));
    }
    if !(a * t2 > -2.0) {
        return Err(Error::BadParams(format!(
            "a = {a} with t2 = {t2}: r^a is not in L^t2 (need a t2 > -n)"
        )));
    }
    let c = grid.bounds().center();
    let exact = move |x: f64, y: f64| {
        let r = (x - c[0]).hypot(y - c[1]);
        r.powf(kappa) / kappa
    };
    let f_component = |component: usize| {
        move |x: f64, y: f64| -> f64 {
            let (dx, dy) = (x - c[0], y - c[1]);
            let r = dx.hypot(dy);
            if r == 0.0 {
                return 0.0;
            }
            r.powf(a) * if component == 0 { dx / r } else { dy / r }
        }
    };
    let fx = radial_samples(&grid, c, f_component(0));
    let fy = radial_samples(&grid, c, f_component(1));
    let flux: Vec<[f64; 2]> = fx.into_iter().zip(fy).map(|(x, y)| [x, y]).collect();
    let n = grid.tri_count();
    constant_p_problem(grid, p, sobolev_s, t1, t2, settings, vec![0.0; n], flux, exact,
        "radial-flux")
}

fn radial_source(
    spec: &PresetSpec,
    grid: Grid,
    sobolev_s: f64,
    t1: f64,
    t2: f64,
    settings: SolverSettings,
) -> Result<Manufactured> {
    let (p, b) = (spec.p, spec.b);
    if !(p > 1.0) {
        return Err(Error::BadParams(format!("radial-source needs p > 1, got {p}")));
    }
    // u' = (r^{b+1}/(b+2))^{1/(p-1)}; continuity of u and integrability of
    // the radial balance bound b from below.
    if !(b > -2.0) || !((b + p) / (p - 1.0) > 0.0) {
        return Err(Error::BadParams(format!(
            "b = {b} is outside the admissible range (need b > max(-2, -p))"
        )));
    }
    if !(b * t1 > -2.0) {
        return Err(Error::BadParams(format!(
            "b = {b} with t1 = {t1}: r^b is not in L^t1 (need b t1 > -n)"
        )));
    }
    let c = grid.bounds().center();
    let e = (b + 1.0) / (p - 1.0);
    let scale = (b + 2.0).powf(-1.0 / (p - 1.0));
    let exact = move |x: f64, y: f64| {
        let r = (x - c[0]).hypot(y - c[1]);
        scale * r.powf(e + 1.0) / (e + 1.0)
    };
    let source = radial_samples(&grid, c, move |x: f64, y: f64| {
        let r = (x - c[0]).hypot(y - c[1]);
        if r == 0.0 {
            return 0.0; // measure-zero guard for collapsed quadrature points
        }
        r.powf(b)
    });
    let n = grid.tri_count();
    constant_p_problem(grid, p, sobolev_s, t1, t2, settings, source, vec![[0.0, 0.0]; n], exact,
        "radial-source")
}

/// Prescribed smooth solution with a genuinely variable exponent. The source
/// g is the divergence of the analytic flux `|grad u|^{p(x)-2} grad u`,
/// computed by 5-point central differences with step tied to the cell size.
fn px_smooth(
    grid: Grid,
    sobolev_s: f64,
    t1: f64,
    t2: f64,
    settings: SolverSettings,
) -> Result<Manufactured> {
    let exact = |x: f64, y: f64| x + 0.25 * (PI * x).sin() * (PI * y).sin();
    let grad_u = |x: f64, y: f64| -> [f64; 2] {
        [
            1.0 + 0.25 * PI * (PI * x).cos() * (PI * y).sin(),
            0.25 * PI * (PI * x).sin() * (PI * y).cos(),
        ]
    };
    let p_fn = |x: f64, y: f64| 1.5 + 0.4 * (PI * x).sin() * (PI * y).sin();
    let grad_p = |x: f64, y: f64| -> [f64; 2] {
        [
            0.4 * PI * (PI * x).cos() * (PI * y).sin(),
            0.4 * PI * (PI * x).sin() * (PI * y).cos(),
        ]
    };
    let flux = move |x: f64, y: f64| -> [f64; 2] {
        let gu = grad_u(x, y);
        let norm_sq = gu[0] * gu[0] + gu[1] * gu[1];
        let w = norm_sq.powf(0.5 * (p_fn(x, y) - 2.0));
        [w * gu[0], w * gu[1]]
    };
    let [dx, dy] = grid.cell_size();
    let h = 0.5 * dx.min(dy);
    let g = move |x: f64, y: f64| {
        let d1 = five_point_derivative(|t| flux(t, y)[0], x, h);
        let d2 = five_point_derivative(|t| flux(x, t)[1], y, h);
        d1 + d2
    };

    let exponents = ExponentField::from_fn(&grid, sobolev_s, p_fn)?.with_gradient(
        &grid,
        grid.tris().iter().map(|t| grad_p(t.barycenter[0], t.barycenter[1])).collect(),
    )?;
    let source = barycenter_samples(&grid, g);
    let flux_samples = vec![[0.0, 0.0]; grid.tri_count()];
    let boundary = ScalarField::from_fn(&grid, exact);
    let problem = ProblemSpec::new(
        grid,
        exponents,
        source,
        flux_samples,
        t1,
        t2,
        boundary.values().to_vec(),
        settings,
    )?;
    Ok(Manufactured { label: "px-smooth".into(), problem, exact: Box::new(exact) })
}

/// 5-point central difference, fourth-order accurate.
pub(crate) fn five_point_derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}
