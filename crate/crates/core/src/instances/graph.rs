//! Weighted graph files: a header line `n m`, then `m` lines `i j w` with
//! 1-based vertex indices and integer weights.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

pub fn read_graph(path: impl AsRef<Path>) -> Result<SymMatrix> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_graph(&text, &path.display().to_string())
}

/// `origin` labels parse errors.
pub fn parse_graph(text: &str, origin: &str) -> Result<SymMatrix> {
    let err = |line: usize, msg: String| Error::Parse { path: origin.to_string(), line, msg };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (hline, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 2 {
        return Err(err(hline + 1, "header must be `n m`".into()));
    }
    let n: usize = head[0].parse().map_err(|_| err(hline + 1, format!("bad vertex count {:?}", head[0])))?;
    let m: usize = head[1].parse().map_err(|_| err(hline + 1, format!("bad edge count {:?}", head[1])))?;

    let mut w = SymMatrix::zeros(n);
    let mut seen = HashSet::new();
    let mut count = 0;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(err(lineno, "edge line must be `i j w`".into()));
        }
        let vertex = |s: &str| -> Result<usize> {
            let v: usize = s.parse().map_err(|_| err(lineno, format!("bad vertex {s:?}")))?;
            if v == 0 || v > n {
                return Err(err(lineno, format!("vertex {v} outside 1..={n}")));
            }
            Ok(v - 1)
        };
        let i = vertex(fields[0])?;
        let j = vertex(fields[1])?;
        let weight: i64 = fields[2].parse().map_err(|_| err(lineno, format!("bad weight {:?}", fields[2])))?;
        if i == j {
            return Err(err(lineno, format!("self-loop at vertex {}", i + 1)));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(err(lineno, format!("duplicate edge {} {}", i + 1, j + 1)));
        }
        w.set(i, j, weight as f64);
        count += 1;
    }
    if count != m {
        return Err(err(hline + 1, format!("header announces {m} edges, found {count}")));
    }
    Ok(w)
}

/// Nonzero upper-triangle entries in row order. Weights must be integral.
pub fn render_graph(w: &SymMatrix) -> Result<String> {
    let n = w.dim();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = w.get(i, j);
            if v != 0.0 {
                if v.fract() != 0.0 || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("weight {v} is not an integer")));
                }
                edges.push((i + 1, j + 1, v as i64));
            }
        }
    }
    let mut out = format!("{} {}\n", n, edges.len());
    for (i, j, v) in edges {
        writeln!(out, "{i} {j} {v}").unwrap();
    }
    Ok(out)
}

pub fn write_graph(path: impl AsRef<Path>, w: &SymMatrix) -> Result<()> {
    std::fs::write(path, render_graph(w)?)?;
    Ok(())
}
