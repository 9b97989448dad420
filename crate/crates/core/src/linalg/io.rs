//! Plain-text matrix and graph formats.
//!
//! Matrix: a header line `<rows> <cols>` followed by one line of
//! whitespace-separated values per row.
//!
//! Graph: a header line `<n_vertices> <n_edges>` followed by one `u v [w]`
//! line per edge (0-indexed, weight defaults to 1).

use std::fmt::Write as _;

use nalgebra::DMatrix;

use super::graph::{Edge, Graph};
use crate::error::{Error, Result};

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse()
        .map_err(|_| Error::Parse { line, msg: format!("cannot parse {tok:?}") })
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut it = data_lines(text);
    let (no, h) = it.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let dims: Vec<&str> = h.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse { line: no, msg: "header must be `<rows> <cols>`".into() });
    }
    let rows: usize = parse_num(dims[0], no)?;
    let cols: usize = parse_num(dims[1], no)?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (no, l) in it {
        let vals: Vec<f64> = l.split_whitespace().map(|t| parse_num(t, no)).collect::<Result<_>>()?;
        if vals.len() != cols {
            return Err(Error::Parse { line: no, msg: format!("expected {cols} values, found {}", vals.len()) });
        }
        data.extend(vals);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse { line: 0, msg: format!("expected {rows} rows, found {seen}") });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for r in m.row_iter() {
        let line: Vec<String> = r.iter().map(|v| format!("{v}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut it = data_lines(text);
    let (no, h) = it.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let dims: Vec<&str> = h.split_whitespace().collect();
    if dims.len() != 2 {
        return Err(Error::Parse { line: no, msg: "header must be `<n_vertices> <n_edges>`".into() });
    }
    let n: usize = parse_num(dims[0], no)?;
    let n_edges: usize = parse_num(dims[1], no)?;
    let mut edges = Vec::with_capacity(n_edges);
    for (no, l) in it {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 && toks.len() != 3 {
            return Err(Error::Parse { line: no, msg: "edge line must be `u v [w]`".into() });
        }
        let w = if toks.len() == 3 { parse_num(toks[2], no)? } else { 1.0 };
        edges.push(Edge { u: parse_num(toks[0], no)?, v: parse_num(toks[1], no)?, w });
    }
    if edges.len() != n_edges {
        return Err(Error::Parse { line: 0, msg: format!("expected {n_edges} edges, found {}", edges.len()) });
    }
    Graph::new(n, edges)
}

pub fn format_graph(g: &Graph) -> String {
    let mut out = format!("{} {}\n", g.n_vertices(), g.edges().len());
    for e in g.edges() {
        let _ = writeln!(out, "{} {} {}", e.u, e.v, e.w);
    }
    out
}
