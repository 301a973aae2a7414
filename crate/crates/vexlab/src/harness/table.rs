//! Node-value tables: plain text, one value per line, row-major node order,
//! with the header line `vexfield v1 <nx> <ny>`.

use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

pub fn write_node_table(path: &Path, nx: usize, ny: usize, values: &[f64]) -> Result<()> {
    if values.len() != nx * ny {
        return Err(Error::NodeCountMismatch { expected: nx * ny, got: values.len() });
    }
    let mut out = String::with_capacity(values.len() * 24 + 32);
    out.push_str(&format!("vexfield v1 {nx} {ny}\n"));
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_node_table(path: &Path) -> Result<(usize, usize, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::TableFormat("empty file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "vexfield" || parts[1] != "v1" {
        return Err(Error::TableFormat(format!(
            "bad header `{header}`, expected `vexfield v1 <nx> <ny>`"
        )));
    }
    let nx: usize = parts[2]
        .parse()
        .map_err(|_| Error::TableFormat(format!("bad nx `{}`", parts[2])))?;
    let ny: usize = parts[3]
        .parse()
        .map_err(|_| Error::TableFormat(format!("bad ny `{}`", parts[3])))?;
    let mut values = Vec::with_capacity(nx * ny);
    for (k, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| Error::TableFormat(format!("bad value `{line}` on line {}", k + 2)))?;
        values.push(v);
    }
    if values.len() != nx * ny {
        return Err(Error::TableFormat(format!(
            "expected {} values for {nx} x {ny}, got {}",
            nx * ny,
            values.len()
        )));
    }
    Ok((nx, ny, values))
}
