//! Radial reference solutions by direct one-dimensional quadrature of the
//! radial balance `(r |u'|^{p-2} u')' = r g + (r F_r)'`.
//!
//! Deliberately independent of the finite-element stack: the integrals here
//! are graded Gauss-Legendre sums in one radial variable, sharing no
//! quadrature or assembly code with the solver.

use crate::{Error, Result};

/// Subintervals of the cumulative radial quadrature.
pub const ORACLE_SUBINTERVALS: usize = 20_000;

/// Grading power of the radial breakpoints; clusters points at the origin
/// so mildly singular integrands (r^-1/2 and the like) resolve to ~1e-10.
const GRADING: f64 = 4.0;

const GAUSS_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_W: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

fn gauss5(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = 0.0;
    for k in 0..5 {
        s += GAUSS_W[k] * f(c + h * GAUSS_X[k]);
    }
    s * h
}

fn signed_pow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

/// Estimated power-law exponent of `f` between two small radii; `None` when
/// the values are too small to compare (e.g. identically zero data).
fn local_power(f: impl Fn(f64) -> f64, t1: f64, t2: f64) -> Option<f64> {
    let (v1, v2) = (f(t1), f(t2));
    if !(v1 > 1e-300) || !(v2 > 1e-300) || !v1.is_finite() || !v2.is_finite() {
        return None;
    }
    Some((v2 / v1).ln() / (t2 / t1).ln())
}

/// Radial problem data for the oracle.
pub enum RadialData<'a> {
    /// Regular at the origin: the homogeneous constant vanishes, so
    /// `|u'|^{p-2} u'(r) = F_r(r) + (1/r) int_0^r s g(s) ds`. The solution is
    /// anchored by its value at `anchor_r`.
    Regular {
        g: &'a dyn Fn(f64) -> f64,
        f_r: &'a dyn Fn(f64) -> f64,
        anchor_r: f64,
        anchor_u: f64,
    },
    /// Pure p-harmonic annulus (g = 0, F = 0): `|u'|^{p-2} u' = c / r` with
    /// the constant fixed by the two boundary values.
    Annulus {
        r_inner: f64,
        u_inner: f64,
        r_outer: f64,
        u_outer: f64,
    },
}

/// Tabulated radial solution at the requested sample radii.
pub struct RadialSamples {
    pub r: Vec<f64>,
    pub u: Vec<f64>,
}

impl RadialSamples {
    /// Solution value at the sample closest to `r`.
    pub fn nearest(&self, r: f64) -> f64 {
        let mut best = 0;
        let mut dist = f64::INFINITY;
        for (k, &rk) in self.r.iter().enumerate() {
            let d = (rk - r).abs();
            if d < dist {
                dist = d;
                best = k;
            }
        }
        self.u[best]
    }
}

/// High-resolution quadrature of the radial problem, reported at `samples`.
/// Sample radii are inserted as quadrature breakpoints, so no interpolation
/// error enters the reported values.
pub fn radial_oracle(p: f64, data: &RadialData<'_>, samples: &[f64]) -> Result<RadialSamples> {
    if !(p > 1.0) {
        return Err(Error::BadParams(format!("need p > 1, got {p}")));
    }
    if samples.is_empty() {
        return Err(Error::BadParams("no sample radii".into()));
    }
    match data {
        RadialData::Regular { g, f_r, anchor_r, anchor_u } => {
            regular(p, g, f_r, *anchor_r, *anchor_u, samples)
        }
        RadialData::Annulus { r_inner, u_inner, r_outer, u_outer } => {
            annulus(p, *r_inner, *u_inner, *r_outer, *u_outer, samples)
        }
    }
}

fn regular(
    p: f64,
    g: &dyn Fn(f64) -> f64,
    f_r: &dyn Fn(f64) -> f64,
    anchor_r: f64,
    anchor_u: f64,
    samples: &[f64],
) -> Result<RadialSamples> {
    if !(anchor_r > 0.0) || samples.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
        return Err(Error::BadParams("radii must be non-negative, anchor positive".into()));
    }
    let r_top = samples.iter().fold(anchor_r, |m, &r| m.max(r));

    // Integrability probe at the origin: the local power of s*g(s) must
    // exceed -1 for the cumulative integral to exist.
    if let Some(q) = local_power(|s| (s * g(s)).abs(), r_top * 1e-9, r_top * 1e-6) {
        if q <= -1.0 + 1e-9 {
            return Err(Error::BadParams(format!(
                "radial data is not integrable near 0 (s*g ~ s^{q:.3})"
            )));
        }
    }
    // Likewise u' ~ |F_r|^{1/(p-1)} must stay integrable.
    if let Some(q) = local_power(|s| f_r(s).abs(), r_top * 1e-9, r_top * 1e-6) {
        if q <= -(p - 1.0) * (1.0 - 1e-9) - 1e-12 {
            return Err(Error::BadParams(format!(
                "radial flux is not integrable near 0 (F_r ~ s^{q:.3})"
            )));
        }
    }

    // Graded breakpoints plus the anchor and every sample radius.
    let n = ORACLE_SUBINTERVALS;
    let mut pts: Vec<f64> = (0..=n)
        .map(|k| r_top * ((k as f64) / (n as f64)).powf(GRADING))
        .collect();
    pts.push(anchor_r);
    pts.extend_from_slice(samples);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * r_top);

    let exponent = 1.0 / (p - 1.0);
    // Cumulative I(t) = int_0^t s g(s) ds at the breakpoints.
    let mut i_cum = vec![0.0; pts.len()];
    for k in 1..pts.len() {
        i_cum[k] = i_cum[k - 1] + gauss5(|s| s * g(s), pts[k - 1], pts[k]);
    }
    // Cumulative u via u'(x) = signed_pow(F_r(x) + I(x)/x, 1/(p-1)).
    let mut u_cum = vec![0.0; pts.len()];
    for k in 1..pts.len() {
        let (lo, i_lo) = (pts[k - 1], i_cum[k - 1]);
        let du = gauss5(
            |x| {
                let i_x = i_lo + gauss5(|s| s * g(s), lo, x);
                signed_pow(f_r(x) + i_x / x, exponent)
            },
            lo,
            pts[k],
        );
        u_cum[k] = u_cum[k - 1] + du;
    }
    if u_cum.iter().any(|v| !v.is_finite()) || i_cum.iter().any(|v| !v.is_finite()) {
        return Err(Error::BadParams("radial data is not integrable near 0".into()));
    }

    let at = |r: f64| -> f64 {
        let k = pts
            .iter()
            .enumerate()
            .min_by(|a, b| {
                (a.1 - r).abs().partial_cmp(&(b.1 - r).abs()).unwrap()
            })
            .map(|(k, _)| k)
            .unwrap();
        u_cum[k]
    };
    let shift = anchor_u - at(anchor_r);
    let u: Vec<f64> = samples.iter().map(|&r| at(r) + shift).collect();
    Ok(RadialSamples { r: samples.to_vec(), u })
}

fn annulus(
    p: f64,
    r_inner: f64,
    u_inner: f64,
    r_outer: f64,
    u_outer: f64,
    samples: &[f64],
) -> Result<RadialSamples> {
    if !(r_inner > 0.0 && r_outer > r_inner) {
        return Err(Error::BadParams(format!(
            "need 0 < r_inner < r_outer, got {r_inner}, {r_outer}"
        )));
    }
    if samples.iter().any(|&r| r < r_inner * (1.0 - 1e-12) || r > r_outer * (1.0 + 1e-12)) {
        return Err(Error::BadParams("annulus samples outside [r_inner, r_outer]".into()));
    }
    let exponent = 1.0 / (p - 1.0);
    // u(r) - u_inner = signed_pow(c, 1/(p-1)) * T(r), T(r) = int s^{-1/(p-1)}.
    let t_of = |r: f64| -> f64 {
        let n = ORACLE_SUBINTERVALS;
        let mut s = 0.0;
        for k in 0..n {
            let a = r_inner + (r - r_inner) * (k as f64) / (n as f64);
            let b = r_inner + (r - r_inner) * ((k + 1) as f64) / (n as f64);
            s += gauss5(|x| x.powf(-exponent), a, b);
        }
        s
    };
    let t_total = t_of(r_outer);
    let scale = (u_outer - u_inner) / t_total;
    let u: Vec<f64> = samples.iter().map(|&r| u_inner + scale * t_of(r)).collect();
    Ok(RadialSamples { r: samples.to_vec(), u })
}
