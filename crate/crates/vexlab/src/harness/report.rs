//! Flat-file report emission: verdict tables, profiles, and constants as
//! CSV, plus an optional SVG plot per profile. Outputs are byte-deterministic
//! for identical inputs (fixed float formatting, no timestamps).

use crate::regularity::{DecayProfile, LogLogFit, DecayConstants, Verdict};
use crate::Result;
use std::io::Write;
use std::path::Path;

/// One row of `report.csv`.
#[derive(Clone, Debug)]
pub struct ReportRow {
    pub name: String,
    pub threshold: f64,
    pub measured: f64,
    pub margin: f64,
    pub pass: bool,
}

impl From<&Verdict> for ReportRow {
    fn from(v: &Verdict) -> ReportRow {
        ReportRow {
            name: v.name.clone(),
            threshold: v.threshold,
            measured: v.measured,
            margin: v.margin,
            pass: v.pass,
        }
    }
}

pub(crate) fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.12e}")
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let mut out = String::from("name,threshold,measured,margin,pass\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.name,
            fmt_float(r.threshold),
            fmt_float(r.measured),
            fmt_float(r.margin),
            r.pass
        ));
    }
    write_file(path, &out)
}

pub fn write_profile_csv(path: &Path, profile: &DecayProfile) -> Result<()> {
    let mut out = String::from("r,phi,osc\n");
    for k in 0..profile.radii.len() {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt_float(profile.radii[k]),
            fmt_float(profile.phi[k]),
            fmt_float(profile.osc[k])
        ));
    }
    write_file(path, &out)
}

pub fn write_constants_csv(path: &Path, c: &DecayConstants) -> Result<()> {
    let mut out = String::from("n,s,beta,delta,q,m,eps0,K,R1\n");
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        fmt_float(c.n),
        fmt_float(c.s),
        fmt_float(c.beta),
        fmt_float(c.delta),
        fmt_float(c.q),
        fmt_float(c.m),
        fmt_float(c.eps0),
        fmt_float(c.k),
        fmt_float(c.r1)
    ));
    write_file(path, &out)
}

pub fn write_diagnostics_csv(path: &Path, diag: &crate::solver::SolveDiagnostics) -> Result<()> {
    let mut out = String::from("step,energy\n");
    for (k, e) in diag.energy_history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", k, fmt_float(*e)));
    }
    write_file(path, &out)
}

/// Log-log scatter of the profile with the fitted power law, as a single
/// self-contained SVG file.
pub fn write_profile_svg(path: &Path, profile: &DecayProfile, fit: Option<&LogLogFit>) -> Result<()> {
    let pts: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.phi)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&r, &p)| (r.ln(), p.ln()))
        .collect();
    let (w, h, pad) = (480.0, 360.0, 48.0);
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if pts.len() >= 2 {
        let (x0, x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.0), hi.max(p.0))
        });
        let (y0, y1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.1), hi.max(p.1))
        });
        let (xs, ys) = ((x1 - x0).max(1e-12), (y1 - y0).max(1e-12));
        let map = |x: f64, y: f64| -> (f64, f64) {
            (
                pad + (x - x0) / xs * (w - 2.0 * pad),
                h - pad - (y - y0) / ys * (h - 2.0 * pad),
            )
        };
        if let Some(fit) = fit {
            let (ax, ay) = map(x0, fit.slope * x0 + fit.intercept);
            let (bx, by) = map(x1, fit.slope * x1 + fit.intercept);
            svg.push_str(&format!(
                "<line x1=\"{ax:.2}\" y1=\"{ay:.2}\" x2=\"{bx:.2}\" y2=\"{by:.2}\" \
                 stroke=\"#888\" stroke-width=\"1.5\"/>\n"
            ));
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" font-size=\"13\" fill=\"#333\">slope {:.4}</text>\n",
                pad,
                pad - 12.0,
                fit.slope
            ));
        }
        for &(x, y) in &pts {
            let (px, py) = map(x, y);
            svg.push_str(&format!(
                "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"#1565c0\"/>\n"
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"#333\">log phi vs log r, \
             center ({:.4}, {:.4})</text>\n",
            pad,
            h - 14.0,
            profile.center[0],
            profile.center[1]
        ));
    }
    svg.push_str("</svg>\n");
    write_file(path, &svg)
}

pub fn write_convergence_csv(
    path: &Path,
    rows: &[(usize, f64, f64, f64)],
    l2_order: f64,
    max_order: f64,
) -> Result<()> {
    let mut out = String::from("resolution,h,l2_error,max_error\n");
    for &(res, h, l2, mx) in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            res,
            fmt_float(h),
            fmt_float(l2),
            fmt_float(mx)
        ));
    }
    out.push_str(&format!(
        "# fitted orders: l2 {}, max {}\n",
        fmt_float(l2_order),
        fmt_float(max_order)
    ));
    write_file(path, &out)
}
