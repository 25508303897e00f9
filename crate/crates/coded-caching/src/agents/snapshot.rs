//! Flat text snapshots for learned parameters, so long runs can be
//! resumed or inspected.
//!
//! Format: one header line `<tag> <dim0> <dim1> ...`, then the values in
//! row-major order, one per line, printed with full f64 round-trip
//! precision.

use std::fmt::Write as _;
use std::path::Path;

use crate::agents::qlearning::QTable;
use crate::agents::vfa::VfaParams;
use crate::error::{Error, Result};

const QTABLE_TAG: &str = "qtable";
const VFA_TAG: &str = "vfa";

pub fn qtable_to_string(table: &QTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{QTABLE_TAG} {} {}",
        table.n_states(),
        table.n_actions()
    );
    for s in 0..table.n_states() {
        for a in 0..table.n_actions() {
            let _ = writeln!(out, "{:?}", table.get(s, a));
        }
    }
    out
}

pub fn qtable_from_str(text: &str) -> Result<QTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(QTABLE_TAG) {
        return Err(bad("not a qtable snapshot"));
    }
    let n_states = parse_dim(parts.next())?;
    let n_actions = parse_dim(parts.next())?;
    if parts.next().is_some() {
        return Err(bad("trailing header fields"));
    }
    let mut table = QTable::new(n_states, n_actions);
    for s in 0..n_states {
        for a in 0..n_actions {
            let v = parse_value(lines.next())?;
            if v != 0.0 {
                table.set(s, a, v);
            }
        }
    }
    if lines.next().is_some() {
        return Err(bad("trailing values"));
    }
    Ok(table)
}

pub fn vfa_to_string(params: &VfaParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{VFA_TAG} {}", params.eta.len());
    let _ = writeln!(out, "{:?}", params.omega1);
    let _ = writeln!(out, "{:?}", params.omega2);
    let _ = writeln!(out, "{:?}", params.beta);
    for v in params.eta.iter().chain(params.xi.iter()) {
        let _ = writeln!(out, "{v:?}");
    }
    out
}

pub fn vfa_from_str(text: &str) -> Result<VfaParams> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty snapshot"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(VFA_TAG) {
        return Err(bad("not a vfa snapshot"));
    }
    let c = parse_dim(parts.next())?;
    if parts.next().is_some() {
        return Err(bad("trailing header fields"));
    }
    let omega1 = parse_value(lines.next())?;
    let omega2 = parse_value(lines.next())?;
    let mut params = VfaParams::new(c, omega1, omega2)?;
    params.beta = parse_value(lines.next())?;
    for i in 0..c {
        params.eta[i] = parse_value(lines.next())?;
    }
    for i in 0..c {
        params.xi[i] = parse_value(lines.next())?;
    }
    if lines.next().is_some() {
        return Err(bad("trailing values"));
    }
    Ok(params)
}

pub fn save_qtable(table: &QTable, path: &Path) -> Result<()> {
    std::fs::write(path, qtable_to_string(table))?;
    Ok(())
}

pub fn load_qtable(path: &Path) -> Result<QTable> {
    qtable_from_str(&std::fs::read_to_string(path)?)
}

pub fn save_vfa(params: &VfaParams, path: &Path) -> Result<()> {
    std::fs::write(path, vfa_to_string(params))?;
    Ok(())
}

pub fn load_vfa(path: &Path) -> Result<VfaParams> {
    vfa_from_str(&std::fs::read_to_string(path)?)
}

fn bad(msg: &str) -> Error {
    Error::Snapshot(msg.into())
}

fn parse_dim(field: Option<&str>) -> Result<usize> {
    field
        .and_then(|f| f.parse().ok())
        .ok_or_else(|| bad("bad dimension field"))
}

fn parse_value(line: Option<&str>) -> Result<f64> {
    line.and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| bad("bad or missing value"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qtable_roundtrip_exact() {
        let mut t = QTable::new(3, 2);
        t.set(0, 1, 1.5);
        t.set(2, 0, -0.1 + 0.7); // not exactly representable, must survive
        let back = qtable_from_str(&qtable_to_string(&t)).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(t.get(s, a), back.get(s, a));
            }
        }
    }

    #[test]
    fn vfa_roundtrip_exact() {
        let mut p = VfaParams::new(4, 1.0, 0.01).unwrap();
        p.beta = 2.25;
        p.eta = vec![0.1, 0.2, 0.3, 0.4];
        p.xi = vec![-1.0, 0.0, 1e-300, 3.25159];
        let back = vfa_from_str(&vfa_to_string(&p)).unwrap();
        assert_eq!(p, back);
    }

    #[test]
    fn rejects_wrong_tag_and_truncation() {
        assert!(qtable_from_str("vfa 2").is_err());
        assert!(vfa_from_str("qtable 2 2\n0\n").is_err());
        assert!(qtable_from_str("qtable 2 2\n0\n0\n0\n").is_err());
        assert!(qtable_from_str("").is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.snap");
        let mut t = QTable::new(2, 2);
        t.set(1, 1, 42.0);
        save_qtable(&t, &path).unwrap();
        let back = load_qtable(&path).unwrap();
        assert_eq!(back.get(1, 1), 42.0);
    }
}
