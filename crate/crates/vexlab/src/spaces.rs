//! Variable-exponent space numerics: exponent fields, modulars, Luxemburg
//! norms, and the checker for the structural assumptions on p, g, and F.
//!
//! All fields are sampled per triangle (at barycenters), so every modular is
//! a finite sum and the Luxemburg norm reduces to a scalar root-find.

use crate::mesh::{pairwise_map_sum, Grid, Region};
use crate::solver::SolverSettings;
use crate::{Error, Result};

/// Relative tolerance of the Luxemburg norm root-find.
pub const LUXEMBURG_REL_TOL: f64 = 1e-12;

/// The measurable exponent p(x) with declared bounds and Sobolev data.
#[derive(Clone, Debug)]
pub struct ExponentField {
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    sobolev_s: f64,
    grad: Option<Vec<[f64; 2]>>,
}

impl ExponentField {
    /// Per-triangle exponent samples with declared bounds `p_minus <= p(x) <= p_plus`
    /// and the Sobolev exponent `s` of the gradient datum. Structural checks only;
    /// the assumption checker reports (rather than rejects) violated bounds.
    pub fn new(
        grid: &Grid,
        values: Vec<f64>,
        p_minus: f64,
        p_plus: f64,
        sobolev_s: f64,
    ) -> Result<ExponentField> {
        if values.len() != grid.tri_count() {
            return Err(Error::ValueCountMismatch {
                expected: grid.tri_count(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite())
            || !p_minus.is_finite()
            || !p_plus.is_finite()
            || !sobolev_s.is_finite()
        {
            return Err(Error::NonFinite("exponent field"));
        }
        Ok(ExponentField { values, p_minus, p_plus, sobolev_s, grad: None })
    }

    /// Constant exponent field; declared bounds collapse to the constant.
    pub fn constant(grid: &Grid, p: f64, sobolev_s: f64) -> Result<ExponentField> {
        let mut f = ExponentField::new(grid, vec![p; grid.tri_count()], p, p, sobolev_s)?;
        f.grad = Some(vec![[0.0, 0.0]; grid.tri_count()]);
        Ok(f)
    }

    /// Sample `p` at barycenters; declared bounds are the sampled min/max.
    pub fn from_fn(grid: &Grid, sobolev_s: f64, p: impl Fn(f64, f64) -> f64) -> Result<ExponentField> {
        let values: Vec<f64> =
            grid.tris().iter().map(|t| p(t.barycenter[0], t.barycenter[1])).collect();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        ExponentField::new(grid, values, lo, hi, sobolev_s)
    }

    /// Attach analytic per-triangle gradient samples of p.
    pub fn with_gradient(mut self, grid: &Grid, grad: Vec<[f64; 2]>) -> Result<ExponentField> {
        if grad.len() != grid.tri_count() {
            return Err(Error::ValueCountMismatch {
                expected: grid.tri_count(),
                got: grad.len(),
            });
        }
        self.grad = Some(grad);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, tri: usize) -> f64 {
        self.values[tri]
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn sobolev_s(&self) -> f64 {
        self.sobolev_s
    }

    pub fn grad_samples(&self) -> Option<&[[f64; 2]]> {
        self.grad.as_deref()
    }

    /// Effective infimum of p: declared lower bound capped by the sampled minimum.
    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(self.p_minus, f64::min)
    }
}

/// Discrete `L^s` norm of grad p. Uses the analytic samples when attached,
/// otherwise reconstructs node values of p by incident-triangle averaging and
/// differentiates the piecewise-linear interpolant.
pub fn grad_p_norm(grid: &Grid, p: &ExponentField) -> f64 {
    let s = p.sobolev_s();
    let norms: Vec<f64> = match p.grad_samples() {
        Some(g) => g.iter().map(|v| v[0].hypot(v[1])).collect(),
        None => {
            let mut node_sum = vec![0.0; grid.node_count()];
            let mut node_w = vec![0.0; grid.node_count()];
            for (tid, tri) in grid.tris().iter().enumerate() {
                for &n in &tri.nodes {
                    node_sum[n] += tri.area * p.value(tid);
                    node_w[n] += tri.area;
                }
            }
            let node_p: Vec<f64> =
                node_sum.iter().zip(&node_w).map(|(s, w)| s / w).collect();
            grid.tris()
                .iter()
                .map(|t| {
                    let mut g = [0.0, 0.0];
                    for k in 0..3 {
                        g[0] += node_p[t.nodes[k]] * t.grads[k][0];
                        g[1] += node_p[t.nodes[k]] * t.grads[k][1];
                    }
                    g[0].hypot(g[1])
                })
                .collect()
        }
    };
    let total = pairwise_map_sum(grid.tri_count(), &|t| {
        norms[t].powf(s) * grid.tris()[t].area
    });
    total.powf(1.0 / s)
}

/// The modular `int_region |v|^{p(x)} dx`, an exact per-triangle sum.
pub fn modular(values: &[f64], p: &ExponentField, region: Region<'_>) -> Result<f64> {
    let grid = region.grid();
    if values.len() != grid.tri_count() {
        return Err(Error::ValueCountMismatch {
            expected: grid.tri_count(),
            got: values.len(),
        });
    }
    if p.values.len() != grid.tri_count() {
        return Err(Error::ValueCountMismatch {
            expected: grid.tri_count(),
            got: p.values.len(),
        });
    }
    let tris = grid.tris();
    Ok(pairwise_map_sum(region.tri_count(), &|k| {
        let tid = region.tri_id(k);
        values[tid].abs().powf(p.values[tid]) * tris[tid].area
    }))
}

/// Luxemburg norm: the unique `lambda > 0` with `modular(values / lambda) = 1`,
/// found by bracketed bisection (the modular is strictly decreasing in lambda
/// for fields that are not identically zero on the region).
pub fn luxemburg_norm(values: &[f64], p: &ExponentField, region: Region<'_>) -> Result<f64> {
    let grid = region.grid();
    if values.len() != grid.tri_count() {
        return Err(Error::ValueCountMismatch {
            expected: grid.tri_count(),
            got: values.len(),
        });
    }
    if !values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("luxemburg_norm input"));
    }
    let zero = (0..region.tri_count()).all(|k| values[region.tri_id(k)] == 0.0);
    if zero {
        return Ok(0.0);
    }

    let tris = grid.tris();
    let modular_at = |lambda: f64| {
        pairwise_map_sum(region.tri_count(), &|k| {
            let tid = region.tri_id(k);
            (values[tid].abs() / lambda).powf(p.values[tid]) * tris[tid].area
        })
    };

    // Bracket the root of modular(1/lambda) - 1.
    let mut lo = 1.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while modular_at(hi) > 1.0 {
        hi *= 2.0;
        guard += 1;
        if guard > 2100 {
            return Err(Error::NonFinite("luxemburg_norm bracket"));
        }
    }
    while modular_at(lo) < 1.0 {
        lo *= 0.5;
        guard += 1;
        if guard > 4200 {
            return Err(Error::NonFinite("luxemburg_norm bracket"));
        }
    }
    // modular(lo) >= 1 >= modular(hi); bisect to relative tolerance.
    while hi - lo > LUXEMBURG_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if modular_at(mid) >= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Min/max exponent statistics over a region; `min` is the `p_m` of the
/// region when it is a closed ball patch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExponentStats {
    pub min: f64,
    pub max: f64,
}

impl ExponentStats {
    /// `p_m`, the minimum of p over the (closed) region.
    pub fn p_m(&self) -> f64 {
        self.min
    }
}

pub fn exponent_stats(p: &ExponentField, region: Region<'_>) -> Result<ExponentStats> {
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for k in 0..region.tri_count() {
        let v = p.values[region.tri_id(k)];
        min = min.min(v);
        max = max.max(v);
    }
    Ok(ExponentStats { min, max })
}

// ----------------------------------------------------------------------------
// Problem description and assumption checking
// ----------------------------------------------------------------------------

/// Full discrete problem: grid, exponent field, data g and F, integrability
/// exponents, Dirichlet boundary values, and solver settings.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub grid: Grid,
    pub exponents: ExponentField,
    /// Per-triangle source samples g.
    pub source: Vec<f64>,
    /// Per-triangle flux samples F.
    pub flux: Vec<[f64; 2]>,
    pub t1: f64,
    pub t2: f64,
    /// Per-node Dirichlet data; only boundary-node entries are read.
    pub boundary: Vec<f64>,
    pub settings: SolverSettings,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)] // constructor mirrors the type's fields
    pub fn new(
        grid: Grid,
        exponents: ExponentField,
        source: Vec<f64>,
        flux: Vec<[f64; 2]>,
        t1: f64,
        t2: f64,
        boundary: Vec<f64>,
        settings: SolverSettings,
    ) -> Result<ProblemSpec> {
        if source.len() != grid.tri_count() || flux.len() != grid.tri_count() {
            return Err(Error::ValueCountMismatch {
                expected: grid.tri_count(),
                got: source.len().min(flux.len()),
            });
        }
        if boundary.len() != grid.node_count() {
            return Err(Error::NodeCountMismatch {
                expected: grid.node_count(),
                got: boundary.len(),
            });
        }
        let finite = source.iter().all(|v| v.is_finite())
            && flux.iter().all(|v| v[0].is_finite() && v[1].is_finite())
            && boundary.iter().all(|v| v.is_finite())
            && t1.is_finite()
            && t2.is_finite();
        if !finite {
            return Err(Error::NonFinite("problem data"));
        }
        Ok(ProblemSpec { grid, exponents, source, flux, t1, t2, boundary, settings })
    }

    /// Space dimension of the discretization.
    pub fn dim(&self) -> f64 {
        2.0
    }
}

/// Report-schema inequality strings. Assumption failures are named with these
/// exact strings in reports and CLI output.
pub const INEQ_1_2: &str = "1 < p- <= p(x) <= p+";
pub const INEQ_1_3: &str = "grad p in L^s with s > n";
pub const INEQ_1_4: &str = "p(x) <= n";
pub const INEQ_1_5: &str = "t1 > n/p(x)";
pub const INEQ_1_6: &str = "g in L^t1";
pub const INEQ_1_7: &str = "t2 > n/(p(x)-1)";
pub const INEQ_1_8: &str = "F in L^t2";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssumptionStatus {
    Pass,
    /// Pass exactly at the boundary of the admissible range (e.g. p = n).
    Marginal,
    Fail,
}

#[derive(Clone, Debug)]
pub struct AssumptionEntry {
    /// Assumption id, e.g. "1.2".
    pub id: &'static str,
    /// Schema inequality string (one of the `INEQ_*` constants).
    pub inequality: &'static str,
    pub status: AssumptionStatus,
    /// Informational entries never gate an experiment.
    pub informational: bool,
    /// Required bound and attained value, for report rows.
    pub threshold: f64,
    pub measured: f64,
    pub detail: String,
}

impl AssumptionEntry {
    pub fn passed(&self) -> bool {
        self.status != AssumptionStatus::Fail
    }
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn entry(&self, id: &str) -> Option<&AssumptionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Failures that gate further analysis (informational entries excluded).
    pub fn hard_failures(&self) -> Vec<&AssumptionEntry> {
        self.entries
            .iter()
            .filter(|e| e.status == AssumptionStatus::Fail && !e.informational)
            .collect()
    }

    pub fn all_pass(&self) -> bool {
        self.hard_failures().is_empty()
    }
}

/// One pass/fail entry per structural assumption: exponent bounds, Sobolev
/// datum of p, p <= n (informational), and the integrability thresholds and
/// modulars of g and F. Strict inequalities use exact comparisons.
pub fn verify_assumptions(problem: &ProblemSpec) -> AssumptionReport {
    let n = problem.dim();
    let grid = &problem.grid;
    let p = &problem.exponents;
    let region = Region::whole(grid);
    let mut entries = Vec::new();

    let sampled_min = p.values.iter().copied().fold(f64::INFINITY, f64::min);
    let sampled_max = p.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p_inf = p.inf();

    // (1.2): 1 < p- and declared bounds consistent with the samples.
    {
        let ok = p.p_minus() > 1.0 && sampled_min >= p.p_minus() && sampled_max <= p.p_plus();
        entries.push(AssumptionEntry {
            id: "1.2",
            inequality: INEQ_1_2,
            status: if ok { AssumptionStatus::Pass } else { AssumptionStatus::Fail },
            informational: false,
            threshold: 1.0,
            measured: p_inf,
            detail: format!(
                "p- = {}, min p(T) = {}, max p(T) = {}, p+ = {}",
                p.p_minus(),
                sampled_min,
                sampled_max,
                p.p_plus()
            ),
        });
    }

    // (1.3): grad p in L^s with s > n (discrete norm must be finite).
    {
        let norm = grad_p_norm(grid, p);
        let ok = p.sobolev_s() > n && norm.is_finite();
        entries.push(AssumptionEntry {
            id: "1.3",
            inequality: INEQ_1_3,
            status: if ok { AssumptionStatus::Pass } else { AssumptionStatus::Fail },
            informational: false,
            threshold: n,
            measured: p.sobolev_s(),
            detail: format!("s = {}, |grad p|_Ls = {:.6e}", p.sobolev_s(), norm),
        });
    }

    // (1.4): p(x) <= n. Informational: when violated, Sobolev embedding gives
    // Hölder continuity directly; equality is a marginal pass.
    {
        let status = if sampled_max < n {
            AssumptionStatus::Pass
        } else if sampled_max == n {
            AssumptionStatus::Marginal
        } else {
            AssumptionStatus::Fail
        };
        entries.push(AssumptionEntry {
            id: "1.4",
            inequality: INEQ_1_4,
            status,
            informational: true,
            threshold: n,
            measured: sampled_max,
            detail: format!("max p(T) = {sampled_max}, n = {n}"),
        });
    }

    // (1.5): t1 > n / inf p, strictly, no tolerance.
    {
        let threshold = n / p_inf;
        let ok = p_inf > 0.0 && problem.t1 > threshold;
        entries.push(AssumptionEntry {
            id: "1.5",
            inequality: INEQ_1_5,
            status: if ok { AssumptionStatus::Pass } else { AssumptionStatus::Fail },
            informational: false,
            threshold,
            measured: problem.t1,
            detail: format!("t1 = {}, n/p(x) up to {}", problem.t1, threshold),
        });
    }

    // (1.6): finite discrete modular of g with exponent t1.
    {
        let t1_field = ExponentField::new(
            grid,
            vec![problem.t1; grid.tri_count()],
            problem.t1,
            problem.t1,
            p.sobolev_s(),
        )
        .expect("t1 exponent field");
        let m = modular(&problem.source, &t1_field, region).unwrap_or(f64::INFINITY);
        entries.push(AssumptionEntry {
            id: "1.6",
            inequality: INEQ_1_6,
            status: if m.is_finite() { AssumptionStatus::Pass } else { AssumptionStatus::Fail },
            informational: false,
            threshold: f64::INFINITY,
            measured: m,
            detail: format!("int |g|^t1 = {m:.6e}"),
        });
    }

    // (1.7): t2 > n / (inf p - 1), strictly.
    {
        let threshold = if p_inf > 1.0 { n / (p_inf - 1.0) } else { f64::INFINITY };
        let ok = problem.t2 > threshold;
        entries.push(AssumptionEntry {
            id: "1.7",
            inequality: INEQ_1_7,
            status: if ok { AssumptionStatus::Pass } else { AssumptionStatus::Fail },
            informational: false,
            threshold,
            measured: problem.t2,
            detail: format!("t2 = {}, n/(p(x)-1) up to {}", problem.t2, threshold),
        });
    }

    // (1.8): finite discrete modular of |F| with exponent t2.
    {
        let t2_field = ExponentField::new(
            grid,
            vec![problem.t2; grid.tri_count()],
            problem.t2,
            problem.t2,
            p.sobolev_s(),
        )
        .expect("t2 exponent field");
        let norms: Vec<f64> = problem.flux.iter().map(|f| f[0].hypot(f[1])).collect();
        let m = modular(&norms, &t2_field, region).unwrap_or(f64::INFINITY);
        entries.push(AssumptionEntry {
            id: "1.8",
            inequality: INEQ_1_8,
            status: if m.is_finite() { AssumptionStatus::Pass } else { AssumptionStatus::Fail },
            informational: false,
            threshold: f64::INFINITY,
            measured: m,
            detail: format!("int |F|^t2 = {m:.6e}"),
        });
    }

    AssumptionReport { entries }
}
