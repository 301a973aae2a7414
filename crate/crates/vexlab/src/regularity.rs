//! Regularity analysis: the explicit exponents and constants of the decay
//! theory, measured gradient-energy profiles over shrinking balls, and the
//! pass/fail checks for decay, comparison, iteration, and growth estimates.
//!
//! Only exponents and explicitly defined constants are asserted; proof
//! bookkeeping constants are fitted and reported, never asserted.

use crate::mesh::{Grid, Region};
use crate::solver::{gradient_of, ScalarField};
use crate::spaces::{exponent_stats, ExponentField};
use crate::{Error, Result};

/// One report row: a named check with its threshold, measured value, margin,
/// and outcome.
#[derive(Clone, Debug)]
pub struct Verdict {
    pub name: String,
    pub threshold: f64,
    pub measured: f64,
    pub margin: f64,
    pub pass: bool,
}

/// The Hölder exponent `alpha = 1 - max(n/(t1 p_m), n/(t2 (p_m - 1)))` and
/// its two components.
#[derive(Clone, Copy, Debug)]
pub struct Alpha {
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

/// Requires the strict thresholds `t1 > n/p_m` and `t2 > n/(p_m - 1)`;
/// errors name the failing inequality.
pub fn compute_alpha(n: f64, p_m: f64, t1: f64, t2: f64) -> Result<Alpha> {
    if !(p_m > 1.0) {
        return Err(Error::Precondition(format!("p_m > 1 violated: p_m = {p_m}")));
    }
    if !(t1 > n / p_m) {
        return Err(Error::Precondition(format!(
            "t1 > n/p_m violated: t1 = {t1}, n/p_m = {}",
            n / p_m
        )));
    }
    if !(t2 > n / (p_m - 1.0)) {
        return Err(Error::Precondition(format!(
            "t2 > n/(p_m-1) violated: t2 = {t2}, n/(p_m-1) = {}",
            n / (p_m - 1.0)
        )));
    }
    let alpha1 = 1.0 - n / (t1 * p_m);
    let alpha2 = 1.0 - n / (t2 * (p_m - 1.0));
    Ok(Alpha { alpha: alpha1.min(alpha2), alpha1, alpha2 })
}

/// The explicitly defined constants of the decay machinery. The abstract
/// constant `c(n, s, p-, p+)` entering `R1` is user-supplied configuration;
/// `R1` is reported, not asserted against an independent truth.
#[derive(Clone, Copy, Debug)]
pub struct DecayConstants {
    pub n: f64,
    pub s: f64,
    pub beta: f64,
    pub delta: f64,
    pub q: f64,
    pub m: f64,
    pub eps0: f64,
    pub k: f64,
    pub r1: f64,
    pub c_abstract: f64,
}

pub fn compute_decay_constants(
    n: f64,
    s: f64,
    grad_p_norm: f64,
    diam: f64,
    energy_total: f64,
    c_abstract: f64,
) -> Result<DecayConstants> {
    if !(s > n) {
        return Err(Error::Precondition(format!("s > n violated: s = {s}, n = {n}")));
    }
    if !(c_abstract > 0.0) || !(diam > 0.0) || !(energy_total >= 0.0) || !(grad_p_norm >= 0.0) {
        return Err(Error::Precondition(
            "need c_abstract > 0, diam > 0, energy_total >= 0, grad_p_norm >= 0".into(),
        ));
    }
    let beta = 1.0 - n / s;
    let delta = (s - n) / (2.0 * s * n);
    let q = 0.5 * (n + s);
    let m = s * q * (1.0 + delta) / (s - q);
    let eps0 = 0.5 * f64::min(1.0, m - 1.0);
    let k = grad_p_norm * (1.0 + (0.5 * diam).powf(beta) * grad_p_norm);
    let r1 = f64::min(diam / 16.0, c_abstract * (energy_total + 1.0).powf(-m / beta));

    let c = DecayConstants { n, s, beta, delta, q, m, eps0, k, r1, c_abstract };
    debug_assert!(c.beta > 0.0 && c.beta < 1.0);
    debug_assert!(c.delta > 0.0 && c.q > n && c.q < s && c.m > 0.0);
    debug_assert!(c.eps0 > 0.0 && c.eps0 <= 0.5);
    Ok(c)
}

/// Which exponent weighs the gradient in the profile integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecayMode {
    /// `phi(r) = int_{B_r} |grad u|^{p(x)}`.
    Pointwise,
    /// `phi(r) = int_{B_r} |grad u|^{p_m}` with `p_m` frozen as the minimum
    /// of p over the outermost ball of the profile.
    FrozenMin,
}

/// Measured ball integrals of the gradient energy over a shrinking radius
/// ladder, with node oscillations of u per ball.
#[derive(Clone, Debug)]
pub struct DecayProfile {
    pub center: [f64; 2],
    /// Strictly decreasing radii.
    pub radii: Vec<f64>,
    pub phi: Vec<f64>,
    pub osc: Vec<f64>,
    pub mode: DecayMode,
    /// Minimum of p over the outermost patch.
    pub p_m: f64,
}

/// Integrate `|grad u|^{p}` over the patch ladder. Every ball `B_{2r}` must
/// stay inside the domain; radii must resolve at least one triangle.
pub fn decay_profile(
    grid: &Grid,
    u: &ScalarField,
    p: &ExponentField,
    center: [f64; 2],
    radii: &[f64],
    mode: DecayMode,
) -> Result<DecayProfile> {
    if radii.is_empty() {
        return Err(Error::EmptyRegion);
    }
    for w in radii.windows(2) {
        if !(w[1] < w[0]) {
            return Err(Error::Precondition(format!(
                "radii must be strictly decreasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if !grid.contains_ball(center, 2.0 * radii[0]) {
        return Err(Error::Precondition(format!(
            "ball B_2R escapes the domain (center ({}, {}), R = {})",
            center[0], center[1], radii[0]
        )));
    }

    let grads = gradient_of(grid, u)?;
    let norms = grads.norms();

    let outer = grid.ball_patch(center, radii[0])?;
    let p_m = exponent_stats(p, Region::ball(grid, &outer))?.p_m();

    let mut phi = Vec::with_capacity(radii.len());
    let mut osc = Vec::with_capacity(radii.len());
    for &r in radii {
        let patch = grid.ball_patch(center, r)?;
        let region = Region::ball(grid, &patch);
        let integrand: Vec<f64> = match mode {
            DecayMode::Pointwise => norms
                .iter()
                .zip(p.values())
                .map(|(g, pt)| g.powf(*pt))
                .collect(),
            DecayMode::FrozenMin => norms.iter().map(|g| g.powf(p_m)).collect(),
        };
        phi.push(crate::mesh::integrate(region, &integrand)?);

        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &node in patch.node_ids() {
            let v = u.values()[node];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        osc.push(hi - lo);
    }

    Ok(DecayProfile { center, radii: radii.to_vec(), phi, osc, mode, p_m })
}

/// Log-log least-squares fit; non-positive ordinates are dropped.
#[derive(Clone, Copy, Debug)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit in log space.
    pub residual: f64,
    pub used: usize,
    pub dropped: usize,
}

pub(crate) fn log_log_fit(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let dropped = xs.len() - pts.len();
    if pts.len() < 2 {
        return Err(Error::TooFewPoints { got: pts.len(), need: 2 });
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::TooFewPoints { got: 1, need: 2 });
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let ss: f64 = pts
        .iter()
        .map(|&(x, y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum();
    Ok(LogLogFit { slope, intercept, residual: (ss / n).sqrt(), used: pts.len(), dropped })
}

/// Least-squares slope of `log phi` against `log r`. Requires at least four
/// ladder radii; zero entries are dropped (reported in the fit).
pub fn fit_decay_slope(profile: &DecayProfile) -> Result<LogLogFit> {
    if profile.radii.len() < 4 {
        return Err(Error::TooFewPoints { got: profile.radii.len(), need: 4 });
    }
    log_log_fit(&profile.radii, &profile.phi)
}

/// Morrey decay check: the estimate bounds `phi` from above by
/// `C r^{n - p_m + alpha p_m}`, so the fitted slope must reach the exponent
/// up to the margin.
#[derive(Clone, Debug)]
pub struct MorreyCheck {
    pub verdict: Verdict,
    pub fit: LogLogFit,
    /// Largest `phi(r) / r^{n - p_m + alpha p_m}` over the ladder.
    pub fitted_c: f64,
}

pub fn check_morrey_decay(
    profile: &DecayProfile,
    n: f64,
    p_m: f64,
    alpha: f64,
    margin: f64,
) -> Result<MorreyCheck> {
    let threshold = n - p_m + alpha * p_m;
    // An identically zero profile satisfies the upper bound vacuously
    // (gradient-free fields have nothing to decay).
    if profile.radii.len() >= 4 && profile.phi.iter().all(|&v| v == 0.0) {
        return Ok(MorreyCheck {
            verdict: Verdict {
                name: "morrey_decay".into(),
                threshold,
                measured: f64::INFINITY,
                margin,
                pass: true,
            },
            fit: LogLogFit {
                slope: f64::INFINITY,
                intercept: f64::NEG_INFINITY,
                residual: 0.0,
                used: 0,
                dropped: profile.phi.len(),
            },
            fitted_c: 0.0,
        });
    }
    let fit = fit_decay_slope(profile)?;
    let fitted_c = profile
        .radii
        .iter()
        .zip(&profile.phi)
        .map(|(&r, &phi)| phi / r.powf(threshold))
        .fold(0.0, f64::max);
    Ok(MorreyCheck {
        verdict: Verdict {
            name: "morrey_decay".into(),
            threshold,
            measured: fit.slope,
            margin,
            pass: fit.slope >= threshold - margin,
        },
        fit,
        fitted_c,
    })
}

/// Energy comparison against the p(x)-harmonic replacement:
/// `int_patch |grad v|^{p(x)} <= (p+/p-) int_patch |grad u|^{p(x)} + slack`.
#[derive(Clone, Debug)]
pub struct EnergyComparisonCheck {
    pub verdict: Verdict,
    /// Achieved ratio of the two patch energies.
    pub ratio: f64,
    pub replaced_energy: f64,
    pub original_energy: f64,
}

pub const ENERGY_COMPARISON_SLACK: f64 = 1e-8;

pub fn check_energy_comparison(
    grid: &Grid,
    u: &ScalarField,
    v: &ScalarField,
    patch: &crate::mesh::Patch,
    p: &ExponentField,
) -> Result<EnergyComparisonCheck> {
    let region = Region::ball(grid, patch);
    let pu: Vec<f64> = gradient_of(grid, u)?.norms();
    let pv: Vec<f64> = gradient_of(grid, v)?.norms();
    let eu = crate::spaces::modular(&pu, p, region)?;
    let ev = crate::spaces::modular(&pv, p, region)?;
    let factor = p.p_plus() / p.p_minus();
    let ratio = if eu > 0.0 { ev / eu } else if ev == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(EnergyComparisonCheck {
        verdict: Verdict {
            name: "energy_comparison".into(),
            threshold: factor,
            measured: ratio,
            margin: ENERGY_COMPARISON_SLACK,
            pass: ev <= factor * eu + ENERGY_COMPARISON_SLACK,
        },
        ratio,
        replaced_energy: ev,
        original_energy: eu,
    })
}

/// Iteration-lemma check on a measured profile.
///
/// Hypothesis shape: `phi(r) <= A ((r/R)^a + eps) phi(R) + A R^b` for all
/// sampled pairs `r < R`; the smallest feasible `A` is reported. Conclusion
/// shape: `phi(r) <= C (r/R)^b (phi(R) + R^b)`; the smallest feasible `C`
/// is reported and compared against `c_max`. The verdict also requires `eps`
/// to sit below the smallness threshold `eps_max`.
#[derive(Clone, Debug)]
pub struct IterationLemmaCheck {
    pub verdict: Verdict,
    /// Smallest A for which the hypothesis holds on the sampled pairs.
    pub feasible_a: f64,
    /// Smallest C for which the conclusion holds on the sampled pairs.
    pub fitted_c: f64,
    pub hypothesis_ok: bool,
    pub conclusion_ok: bool,
    pub eps_flagged: bool,
}

pub fn check_iteration_lemma(
    profile: &DecayProfile,
    big_a: f64,
    a: f64,
    b: f64,
    eps: f64,
    eps_max: f64,
    c_max: f64,
) -> Result<IterationLemmaCheck> {
    if !(a > b && b >= 0.0) {
        return Err(Error::Precondition(format!("need a > b >= 0, got a = {a}, b = {b}")));
    }
    if !(eps >= 0.0) {
        return Err(Error::Precondition(format!("need eps >= 0, got {eps}")));
    }
    if profile.radii.len() < 2 {
        return Err(Error::TooFewPoints { got: profile.radii.len(), need: 2 });
    }
    // phi must be non-decreasing in r; radii are stored decreasing.
    for k in 1..profile.phi.len() {
        if profile.phi[k] > profile.phi[k - 1] * (1.0 + 1e-10) + 1e-300 {
            return Err(Error::DecreasingProfile(format!(
                "phi({}) = {} exceeds phi({}) = {}",
                profile.radii[k], profile.phi[k], profile.radii[k - 1], profile.phi[k - 1]
            )));
        }
    }

    let mut feasible_a = 0.0f64;
    let mut fitted_c = 0.0f64;
    for i in 0..profile.radii.len() {
        let big_r = profile.radii[i];
        let phi_r_outer = profile.phi[i];
        for j in i + 1..profile.radii.len() {
            let r = profile.radii[j];
            let phi_r = profile.phi[j];
            let ratio = r / big_r;
            let hyp_bound = (ratio.powf(a) + eps) * phi_r_outer + big_r.powf(b);
            feasible_a = feasible_a.max(phi_r / hyp_bound);
            let concl_bound = ratio.powf(b) * (phi_r_outer + big_r.powf(b));
            fitted_c = fitted_c.max(phi_r / concl_bound);
        }
    }

    let hypothesis_ok = feasible_a <= big_a;
    let conclusion_ok = fitted_c <= c_max;
    let eps_flagged = eps > eps_max;
    Ok(IterationLemmaCheck {
        verdict: Verdict {
            name: "iteration_lemma".into(),
            threshold: c_max,
            measured: fitted_c,
            margin: 0.0,
            pass: hypothesis_ok && conclusion_ok && !eps_flagged,
        },
        feasible_a,
        fitted_c,
        hypothesis_ok,
        conclusion_ok,
        eps_flagged,
    })
}

/// Dirichlet-growth check: `psi(r) = int_{B_r} |grad u|` must grow at least
/// like `r^{n - 1 + alpha}`. A profile that is identically zero (constant
/// field) passes vacuously.
#[derive(Clone, Debug)]
pub struct GrowthCheck {
    pub verdict: Verdict,
    pub radii: Vec<f64>,
    pub psi: Vec<f64>,
    /// Largest `psi(r) / r^{n - 1 + alpha}`.
    pub fitted_c: f64,
}

pub fn dirichlet_growth_check(
    grid: &Grid,
    u: &ScalarField,
    center: [f64; 2],
    radii: &[f64],
    alpha: f64,
    margin: f64,
) -> Result<GrowthCheck> {
    if radii.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let n = 2.0;
    let norms = gradient_of(grid, u)?.norms();
    let mut psi = Vec::with_capacity(radii.len());
    for &r in radii {
        let patch = grid.ball_patch(center, r)?;
        psi.push(crate::mesh::integrate(Region::ball(grid, &patch), &norms)?);
    }
    let threshold = n - 1.0 + alpha;
    let fitted_c = radii
        .iter()
        .zip(&psi)
        .map(|(&r, &v)| v / r.powf(threshold))
        .fold(0.0, f64::max);
    let (measured, pass) = match log_log_fit(radii, &psi) {
        Ok(fit) => (fit.slope, fit.slope >= threshold - margin),
        // All-zero psi: nothing grows, the bound holds vacuously.
        Err(Error::TooFewPoints { .. }) => (f64::INFINITY, true),
        Err(e) => return Err(e),
    };
    Ok(GrowthCheck {
        verdict: Verdict {
            name: "dirichlet_growth".into(),
            threshold,
            measured,
            margin,
            pass,
        },
        radii: radii.to_vec(),
        psi,
        fitted_c,
    })
}

/// Worst-case local Hölder exponent estimated from oscillation decay.
#[derive(Clone, Debug)]
pub struct HolderEstimate {
    /// Per-center slope of `log osc` vs `log r`, capped at 1; `None` marks a
    /// center where u is constant at every radius (Lipschitz or better).
    pub per_center: Vec<Option<f64>>,
    /// Minimum over centers; `None` when every center is constant.
    pub minimum: Option<f64>,
}

impl HolderEstimate {
    pub fn is_lipschitz_or_better(&self) -> bool {
        self.minimum.is_none()
    }
}

const OSC_FLOOR: f64 = 1e-14;

pub fn holder_exponent_estimate(
    grid: &Grid,
    u: &ScalarField,
    centers: &[[f64; 2]],
    radii: &[f64],
) -> Result<HolderEstimate> {
    if centers.is_empty() || radii.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let mut per_center = Vec::with_capacity(centers.len());
    for &c in centers {
        let mut rs = Vec::new();
        let mut oscs = Vec::new();
        for &r in radii {
            let patch = grid.ball_patch(c, r)?;
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &node in patch.node_ids() {
                let v = u.values()[node];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let osc = hi - lo;
            if osc > OSC_FLOOR {
                rs.push(r);
                oscs.push(osc);
            }
        }
        if rs.len() < 2 {
            per_center.push(None);
            continue;
        }
        let fit = log_log_fit(&rs, &oscs)?;
        per_center.push(Some(fit.slope.min(1.0)));
    }
    let minimum = per_center.iter().flatten().copied().fold(None, |acc: Option<f64>, v| {
        Some(acc.map_or(v, |a| a.min(v)))
    });
    Ok(HolderEstimate { per_center, minimum })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Rect;
    use proptest::prelude::*;

    #[test]
    fn alpha_hand_arithmetic() {
        let a = compute_alpha(2.0, 2.0, 3.0, 3.0).unwrap();
        assert!((a.alpha1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((a.alpha2 - 1.0 / 3.0).abs() < 1e-15);
        assert!((a.alpha - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn alpha_tends_to_one_for_bounded_data() {
        let a = compute_alpha(2.0, 2.0, 1e12, 1e12).unwrap();
        assert!(a.alpha > 1.0 - 1e-11 && a.alpha < 1.0);
    }

    #[test]
    fn alpha_threshold_violation_names_inequality() {
        let err = compute_alpha(2.0, 2.0, 3.0, 2.0).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t2 > n/(p_m-1)"), "got: {msg}");
        let err = compute_alpha(2.0, 2.0, 1.0, 3.0).unwrap_err();
        assert!(err.to_string().contains("t1 > n/p_m"));
    }

    #[test]
    fn paper_constants_hand_arithmetic() {
        let c = compute_decay_constants(2.0, 4.0, 0.5, 2.0_f64.sqrt(), 1.0, 1.0).unwrap();
        assert!((c.delta - 0.125).abs() < 1e-15);
        assert!((c.q - 3.0).abs() < 1e-15);
        assert!((c.m - 13.5).abs() < 1e-12);
        assert!((c.beta - 0.5).abs() < 1e-15);
        assert!((c.eps0 - 0.5).abs() < 1e-15);

        let c = compute_decay_constants(2.0, 8.0, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert!((c.delta - 3.0 / 16.0).abs() < 1e-15);
        assert!((c.q - 5.0).abs() < 1e-15);
        assert!((c.m - 95.0 / 6.0).abs() < 1e-12);
        assert!((c.beta - 0.75).abs() < 1e-15);
        assert_eq!(c.k, 0.0, "constant exponent has K = 0");
        assert!(c.r1 <= 1.0 / 16.0 + 1e-15);

        assert!(compute_decay_constants(2.0, 2.0, 0.0, 1.0, 0.0, 1.0).is_err());
    }

    fn synthetic_profile(radii: &[f64], phi: impl Fn(f64) -> f64) -> DecayProfile {
        DecayProfile {
            center: [0.5, 0.5],
            radii: radii.to_vec(),
            phi: radii.iter().map(|&r| phi(r)).collect(),
            osc: vec![0.0; radii.len()],
            mode: DecayMode::Pointwise,
            p_m: 2.0,
        }
    }

    fn ladder(r0: f64, levels: usize) -> Vec<f64> {
        (0..levels).map(|i| r0 * 2f64.powf(-(i as f64) / 2.0)).collect()
    }

    #[test]
    fn fit_recovers_exact_power_laws() {
        let radii = ladder(0.25, 9);
        let p1 = synthetic_profile(&radii, |r| r * r);
        let f1 = fit_decay_slope(&p1).unwrap();
        assert!((f1.slope - 2.0).abs() < 1e-9, "slope {}", f1.slope);
        assert!(f1.residual < 1e-12);

        let p2 = synthetic_profile(&radii, |r| 5.0 * r.powf(0.5));
        let f2 = fit_decay_slope(&p2).unwrap();
        assert!((f2.slope - 0.5).abs() < 1e-9, "slope {}", f2.slope);
    }

    #[test]
    fn fit_drops_zero_entries_and_errors_when_starved() {
        let radii = ladder(0.25, 5);
        let mut p = synthetic_profile(&radii, |r| r);
        p.phi[4] = 0.0;
        let f = fit_decay_slope(&p).unwrap();
        assert_eq!(f.dropped, 1);
        assert_eq!(f.used, 4);

        let short = synthetic_profile(&radii[..3], |r| r);
        assert!(matches!(fit_decay_slope(&short), Err(Error::TooFewPoints { .. })));

        let mut zeros = synthetic_profile(&radii, |_| 0.0);
        zeros.phi[0] = 1.0;
        assert!(matches!(fit_decay_slope(&zeros), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn morrey_check_thresholds() {
        let radii = ladder(0.25, 9);
        let steep = synthetic_profile(&radii, |r| r * r);
        let v = check_morrey_decay(&steep, 2.0, 2.0, 0.5, 0.05).unwrap();
        assert!((v.verdict.threshold - 1.0).abs() < 1e-15);
        assert!(v.verdict.pass);

        let shallow = synthetic_profile(&radii, |r| r.powf(0.5));
        let v = check_morrey_decay(&shallow, 2.0, 2.0, 0.5, 0.05).unwrap();
        assert!(!v.verdict.pass);

        // Gradient-free fields pass vacuously.
        let zero = synthetic_profile(&radii, |_| 0.0);
        let v = check_morrey_decay(&zero, 2.0, 2.0, 0.5, 0.05).unwrap();
        assert!(v.verdict.pass);
        assert_eq!(v.fitted_c, 0.0);
    }

    #[test]
    fn iteration_lemma_plugin_cases() {
        let radii = ladder(0.25, 9);
        // phi = r^b satisfies the conclusion with C well under 2.
        let p = synthetic_profile(&radii, |r| r);
        let c = check_iteration_lemma(&p, 8.0, 2.0, 1.0, 0.0, 0.5, 8.0).unwrap();
        assert!(c.verdict.pass);
        assert!(c.fitted_c <= 2.0, "fitted C {}", c.fitted_c);

        // Constant positive profile with b > 0 fails as r/R -> 0 on a wide ladder.
        let radii_wide = ladder(0.25, 13);
        let flat = synthetic_profile(&radii_wide, |_| 3.0);
        let c = check_iteration_lemma(&flat, 8.0, 2.0, 1.0, 0.0, 0.5, 8.0).unwrap();
        assert!(!c.conclusion_ok);
        assert!(!c.verdict.pass);

        // Oversized eps gets flagged even when the shapes hold.
        let p = synthetic_profile(&radii, |r| r);
        let c = check_iteration_lemma(&p, 8.0, 2.0, 1.0, 0.4, 0.05, 8.0).unwrap();
        assert!(c.eps_flagged && !c.verdict.pass);

        // Decreasing phi is a hard error.
        let mut bad = synthetic_profile(&radii, |r| r);
        bad.phi[3] = bad.phi[2] * 2.0;
        assert!(matches!(
            check_iteration_lemma(&bad, 8.0, 2.0, 1.0, 0.0, 0.5, 8.0),
            Err(Error::DecreasingProfile(_))
        ));

        assert!(check_iteration_lemma(&p, 8.0, 1.0, 1.0, 0.0, 0.5, 8.0).is_err());
    }

    #[test]
    fn energy_comparison_with_identical_fields_has_unit_ratio() {
        let g = Grid::new(Rect::UNIT, 33, 33).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() + x * y);
        let p = ExponentField::from_fn(&g, 4.0, |x, _| 1.6 + 0.3 * x).unwrap();
        let patch = g.ball_patch([0.5, 0.5], 0.3).unwrap();
        let c = check_energy_comparison(&g, &u, &u, &patch, &p).unwrap();
        assert!((c.ratio - 1.0).abs() < 1e-14);
        assert!(c.verdict.pass, "v = u sits under the p+/p- bound");
        assert!(c.verdict.threshold >= 1.0);
    }

    #[test]
    fn growth_check_on_linear_and_constant_fields() {
        let g = Grid::new(Rect::UNIT, 65, 65).unwrap();
        let radii = ladder(0.2, 7);
        let u = ScalarField::from_fn(&g, |x, _| x);
        let c = dirichlet_growth_check(&g, &u, [0.5, 0.5], &radii, 1.0, 0.15).unwrap();
        // psi(r) ~ pi r^2: slope about n = 2, passes for any alpha <= 1.
        assert!(c.verdict.pass, "slope {}", c.verdict.measured);
        assert!((c.verdict.measured - 2.0).abs() < 0.35, "slope {}", c.verdict.measured);

        let flat = ScalarField::from_fn(&g, |_, _| 4.0);
        let c = dirichlet_growth_check(&g, &flat, [0.5, 0.5], &radii, 0.9, 0.15).unwrap();
        assert!(c.verdict.pass);
        assert!(c.verdict.measured.is_infinite());
    }

    #[test]
    fn decay_profile_of_unit_gradient_is_patch_area() {
        let g = Grid::new(Rect::UNIT, 129, 129).unwrap();
        let u = ScalarField::from_fn(&g, |x, _| x);
        let p = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        let radii = ladder(0.2, 7);
        let prof = decay_profile(&g, &u, &p, [0.5, 0.5], &radii, DecayMode::FrozenMin).unwrap();
        assert_eq!(prof.p_m, 2.0);
        // Inner approximation trims a band of width <= sqrt(2) h from the
        // disk, so the deficit is below ~2 sqrt(2) h / r at every radius.
        let h = 1.0 / 128.0;
        for (&r, &phi) in prof.radii.iter().zip(&prof.phi) {
            let disk = std::f64::consts::PI * r * r;
            let rel = (disk - phi) / disk;
            let cap = 2.0 * std::f64::consts::SQRT_2 * h / r;
            assert!(rel >= 0.0 && rel < cap, "phi({r}) = {phi} vs {disk} (rel {rel}, cap {cap})");
        }
        // At the widest radius the deficit sits under 5%.
        let disk = std::f64::consts::PI * radii[0] * radii[0];
        assert!((disk - prof.phi[0]) / disk < 0.05);
        // Nested patches make phi non-decreasing in r.
        for w in prof.phi.windows(2) {
            assert!(w[1] <= w[0]);
        }

        let flat = ScalarField::from_fn(&g, |_, _| 1.0);
        let prof = decay_profile(&g, &flat, &p, [0.5, 0.5], &radii, DecayMode::Pointwise).unwrap();
        assert!(prof.phi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn decay_profile_rejects_escaping_balls_and_bad_ladders() {
        let g = Grid::new(Rect::UNIT, 33, 33).unwrap();
        let u = ScalarField::from_fn(&g, |x, _| x);
        let p = ExponentField::constant(&g, 2.0, 4.0).unwrap();
        assert!(decay_profile(&g, &u, &p, [0.5, 0.5], &[0.4], DecayMode::Pointwise).is_err());
        assert!(decay_profile(&g, &u, &p, [0.5, 0.5], &[0.1, 0.2], DecayMode::Pointwise).is_err());
    }

    #[test]
    fn scale_invariance_of_frozen_min_slope() {
        let g = Grid::new(Rect::UNIT, 65, 65).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| (2.0 * x).sin() * y + x * x);
        let p = ExponentField::from_fn(&g, 4.0, |x, _| 1.6 + 0.2 * x).unwrap();
        let radii = ladder(0.2, 7);
        let prof1 = decay_profile(&g, &u, &p, [0.5, 0.5], &radii, DecayMode::FrozenMin).unwrap();
        let prof3 =
            decay_profile(&g, &u.scaled(3.0), &p, [0.5, 0.5], &radii, DecayMode::FrozenMin)
                .unwrap();
        let s1 = fit_decay_slope(&prof1).unwrap().slope;
        let s3 = fit_decay_slope(&prof3).unwrap().slope;
        assert!((s1 - s3).abs() <= 1e-9, "slopes {s1} vs {s3}");
    }

    #[test]
    fn holder_estimate_examples() {
        let g = Grid::new(Rect::UNIT, 129, 129).unwrap();
        let radii = ladder(0.2, 7);

        let linear = ScalarField::from_fn(&g, |x, _| x);
        let est = holder_exponent_estimate(&g, &linear, &[[0.5, 0.5]], &radii).unwrap();
        let m = est.minimum.unwrap();
        assert!((m - 1.0).abs() <= 0.05, "estimate {m}");

        let sqrt_cone = ScalarField::from_fn(&g, |x, y| {
            2.0 * ((x - 0.5).hypot(y - 0.5)).sqrt()
        });
        let est = holder_exponent_estimate(&g, &sqrt_cone, &[[0.5, 0.5]], &radii).unwrap();
        let m = est.minimum.unwrap();
        assert!((m - 0.5).abs() <= 0.1, "estimate {m}");

        let flat = ScalarField::from_fn(&g, |_, _| 5.0);
        let est = holder_exponent_estimate(&g, &flat, &[[0.5, 0.5]], &radii).unwrap();
        assert!(est.is_lipschitz_or_better());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn alpha_monotone_in_thresholds(
            t1 in 1.2f64..20.0, t2 in 2.2f64..20.0, dp in 0.0f64..1.5, dt in 0.0f64..5.0
        ) {
            let a = compute_alpha(2.0, 2.0, t1, t2).unwrap();
            prop_assert!(a.alpha > 0.0 && a.alpha < 1.0);
            let more_t = compute_alpha(2.0, 2.0, t1 + dt, t2 + dt).unwrap();
            prop_assert!(more_t.alpha >= a.alpha - 1e-12);
            let more_p = compute_alpha(2.0, 2.0 + dp, t1, t2).unwrap();
            prop_assert!(more_p.alpha >= a.alpha - 1e-12);
        }

        #[test]
        fn r1_monotone_in_energy(e1 in 0.0f64..50.0, e2 in 0.0f64..50.0) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = compute_decay_constants(2.0, 4.0, 0.3, 1.5, lo, 1.0).unwrap();
            let b = compute_decay_constants(2.0, 4.0, 0.3, 1.5, hi, 1.0).unwrap();
            prop_assert!(b.r1 <= a.r1 + 1e-18);
            prop_assert!(a.r1 <= 1.5 / 16.0 + 1e-15);
        }
    }
}
