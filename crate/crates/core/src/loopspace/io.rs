//! Plain-text loop formats: CSV samples with a JSON sidecar, and `.poly`
//! polygons with one vertex per line.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::DiscreteLoop;

/// Fixed scientific formatting with 17 significant digits, so files round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Metadata stored next to a loop CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopSidecar {
    pub tau: f64,
    #[serde(rename = "N")]
    pub samples: usize,
    pub winding: Vec<i64>,
    pub metric: String,
    pub sigma: String,
}

pub fn loop_csv(q: &DiscreteLoop) -> String {
    let mut s = String::from("t");
    for i in 1..=q.dim() {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for (j, p) in q.points().enumerate() {
        s.push_str(&fmt_f64(q.time(j)));
        for x in p {
            s.push(',');
            s.push_str(&fmt_f64(*x));
        }
        s.push('\n');
    }
    s
}

/// `.poly` rendering: `t x₁ … xₙ` per vertex, closing vertex `x̃_N` included.
pub fn loop_poly(q: &DiscreteLoop) -> String {
    let mut s = String::new();
    for j in 0..=q.len() {
        s.push_str(&fmt_f64(j as f64 * q.step()));
        for x in q.extended(j as isize) {
            s.push(' ');
            s.push_str(&fmt_f64(x));
        }
        s.push('\n');
    }
    s
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes `<path>` (CSV) and `<path>.json` (sidecar with the same stem).
pub fn write_loop(path: &Path, q: &DiscreteLoop, metric: &str, sigma: &str) -> Result<()> {
    fs::write(path, loop_csv(q))?;
    let meta = LoopSidecar {
        tau: q.tau(),
        samples: q.len(),
        winding: q.winding().to_vec(),
        metric: metric.to_string(),
        sigma: sigma.to_string(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

pub fn read_loop(path: &Path) -> Result<(DiscreteLoop, LoopSidecar)> {
    let meta: LoopSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let text = fs::read_to_string(path)?;
    let q = parse_loop_csv(&text, &meta)?;
    Ok((q, meta))
}

pub fn parse_loop_csv(text: &str, meta: &LoopSidecar) -> Result<DiscreteLoop> {
    let n = meta.winding.len();
    let mut data = Vec::with_capacity(meta.samples * n);
    for (line_no, line) in text.lines().skip(1).enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n + 1 {
            return Err(Error::Parse(format!("line {}: expected {} fields", line_no + 2, n + 1)));
        }
        for f in &fields[1..] {
            data.push(f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 2)))?);
        }
    }
    if data.len() != meta.samples * n {
        return Err(Error::Parse("sample count does not match sidecar".into()));
    }
    DiscreteLoop::new(n, data, meta.winding.clone(), meta.tau)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let q = DiscreteLoop::circle(&[0.1, 0.7], (0, 1), 0.3, 1, 1.7, 24).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loop.csv");
        write_loop(&path, &q, "flat", "area").unwrap();
        let (r, meta) = read_loop(&path).unwrap();
        assert_eq!(r, q);
        assert_eq!(meta.samples, 24);
    }

    #[test]
    fn poly_has_closing_vertex() {
        let q = DiscreteLoop::straight(&[0.0, 0.0], vec![1, 0], 1.0, 8).unwrap();
        let poly = loop_poly(&q);
        assert_eq!(poly.lines().count(), 9);
        assert!(poly.lines().last().unwrap().starts_with("1.0000000000000000e0 1.0000000000000000e0"));
    }
}
