//! Text formats: edge lists, comparison files, weight files and score CSVs.
//!
//! Edge list: a header line `n m`, then `m` lines `i j [w] [er_flag]`
//! (0-based). Comparison file: a header line `L`, then one line `i j y` per
//! edge with `i > j`. Blank lines and lines starting with `#` are skipped.
//! Reals are written with 17 significant digits so they round-trip exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::graph::{Graph, WeightVector};
use crate::sampling::ComparisonData;

/// Formats `x` like C's `%.17g`.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (16 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

/// Non-empty, non-comment lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, t.split_whitespace().collect()))
        }
    })
}

fn field<T: std::str::FromStr>(line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {what} from '{tok}'")))
}

/// A parsed edge list. `weights` is all ones when the file has no weight
/// column; `weighted` records whether it had one.
#[derive(Debug, Clone)]
pub struct EdgeList {
    pub graph: Graph,
    pub weights: WeightVector,
    pub weighted: bool,
}

pub fn parse_edge_list(text: &str) -> Result<EdgeList> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header 'n m'"))?;
    if header.len() != 2 {
        return Err(parse_err(hl, "header must be 'n m'"));
    }
    let n: usize = field(hl, header[0], "vertex count")?;
    let m: usize = field(hl, header[1], "edge count")?;

    let mut rows: Vec<(usize, usize, usize, f64, Option<bool>)> = Vec::with_capacity(m);
    let mut weighted = None;
    let mut flagged = None;
    for (ln, toks) in lines {
        if !(2..=4).contains(&toks.len()) {
            return Err(parse_err(ln, "expected 'i j [w] [er_flag]'"));
        }
        let i: usize = field(ln, toks[0], "vertex")?;
        let j: usize = field(ln, toks[1], "vertex")?;
        for v in [i, j] {
            if v >= n {
                return Err(parse_err(ln, format!("vertex {v} out of range for n = {n}")));
            }
        }
        if i == j {
            return Err(parse_err(ln, format!("self-loop at vertex {i}")));
        }
        let w = match toks.get(2) {
            Some(t) => {
                let w: f64 = field(ln, t, "weight")?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(parse_err(ln, format!("weight {w} must be finite and >= 0")));
                }
                w
            }
            None => 1.0,
        };
        let er = match toks.get(3) {
            Some(&"0") => Some(false),
            Some(&"1") => Some(true),
            Some(t) => return Err(parse_err(ln, format!("er_flag must be 0 or 1, got '{t}'"))),
            None => None,
        };
        for (seen, now, what) in [(&mut weighted, toks.len() >= 3, "weight"), (&mut flagged, er.is_some(), "er_flag")] {
            match *seen {
                None => *seen = Some(now),
                Some(prev) if prev != now => {
                    return Err(parse_err(ln, format!("{what} column present on some lines only")))
                }
                _ => {}
            }
        }
        rows.push((ln, i.min(j), i.max(j), w, er));
    }
    if rows.len() != m {
        return Err(parse_err(hl, format!("header declares {m} edges, found {}", rows.len())));
    }
    rows.sort_by_key(|r| (r.1, r.2));
    for pair in rows.windows(2) {
        if (pair[0].1, pair[0].2) == (pair[1].1, pair[1].2) {
            return Err(parse_err(pair[1].0, format!("duplicate edge ({}, {})", pair[1].1, pair[1].2)));
        }
    }
    let graph = if flagged == Some(true) {
        Graph::with_er_mask(n, rows.iter().map(|r| (r.1, r.2, r.4.unwrap_or(false))))
    } else {
        Graph::new(n, rows.iter().map(|r| (r.1, r.2)))
    }
    .map_err(|e| parse_err(hl, e.to_string()))?;
    let weights = WeightVector::new(rows.iter().map(|r| r.3).collect())?;
    Ok(EdgeList {
        graph,
        weights,
        weighted: weighted == Some(true),
    })
}

/// Writes `lo hi` per edge, followed by the weight when `w` is given or the
/// graph carries ER flags, followed by the flag when present.
pub fn write_edge_list(g: &Graph, w: Option<&WeightVector>) -> Result<String> {
    if let Some(w) = w {
        g.check_weights(w)?;
    }
    let mut out = String::new();
    writeln!(out, "{} {}", g.n(), g.m()).unwrap();
    for (e, &(i, j)) in g.edges().iter().enumerate() {
        write!(out, "{i} {j}").unwrap();
        let weight = w.map(|w| w[e]);
        match (weight, g.er_mask()) {
            (Some(x), mask) => {
                write!(out, " {}", fmt_g17(x)).unwrap();
                if let Some(m) = mask {
                    write!(out, " {}", m[e] as u8).unwrap();
                }
            }
            (None, Some(m)) => write!(out, " 1 {}", m[e] as u8).unwrap(),
            (None, None) => {}
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses a comparison file against the graph it was sampled on.
pub fn parse_comparisons(text: &str, g: &Graph) -> Result<ComparisonData> {
    let mut lines = content_lines(text);
    let (hl, header) = lines.next().ok_or_else(|| parse_err(1, "missing header 'L'"))?;
    if header.len() != 1 {
        return Err(parse_err(hl, "header must be the repetition count L"));
    }
    let reps: usize = field(hl, header[0], "repetition count")?;
    if reps == 0 {
        return Err(parse_err(hl, "repetition count must be >= 1"));
    }
    let mut y = vec![f64::NAN; g.m()];
    for (ln, toks) in lines {
        if toks.len() != 3 {
            return Err(parse_err(ln, "expected 'i j y'"));
        }
        let i: usize = field(ln, toks[0], "vertex")?;
        let j: usize = field(ln, toks[1], "vertex")?;
        let v: f64 = field(ln, toks[2], "rate")?;
        if i <= j {
            return Err(parse_err(ln, format!("expected i > j, got ({i}, {j})")));
        }
        let e = g
            .edge_index(i, j)
            .ok_or_else(|| parse_err(ln, format!("({i}, {j}) is not an edge of the graph")))?;
        if !y[e].is_nan() {
            return Err(parse_err(ln, format!("duplicate entry for edge ({i}, {j})")));
        }
        y[e] = v;
    }
    if let Some(e) = y.iter().position(|v| v.is_nan()) {
        let (j, i) = g.edges()[e];
        return Err(parse_err(hl, format!("no entry for edge ({i}, {j})")));
    }
    ComparisonData::from_rates(y, reps).map_err(|e| parse_err(hl, e.to_string()))
}

pub fn write_comparisons(g: &Graph, data: &ComparisonData) -> Result<String> {
    data.check_graph(g)?;
    let mut out = format!("{}\n", data.reps());
    for (&(j, i), &y) in g.edges().iter().zip(data.y()) {
        writeln!(out, "{i} {j} {}", fmt_g17(y)).unwrap();
    }
    Ok(out)
}

pub fn write_theta_csv(theta: &[f64]) -> String {
    let mut out = String::from("vertex,theta\n");
    for (v, t) in theta.iter().enumerate() {
        writeln!(out, "{v},{}", fmt_g17(*t)).unwrap();
    }
    out
}

pub fn parse_theta_csv(text: &str) -> Result<Vec<f64>> {
    let mut theta = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let ln = i + 1;
        if ln == 1 {
            if line.trim() != "vertex,theta" {
                return Err(parse_err(ln, "expected header 'vertex,theta'"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (v, t) = line
            .split_once(',')
            .ok_or_else(|| parse_err(ln, "expected 'vertex,theta'"))?;
        let v: usize = field(ln, v.trim(), "vertex")?;
        if v != theta.len() {
            return Err(parse_err(ln, format!("expected vertex {}, got {v}", theta.len())));
        }
        theta.push(field(ln, t.trim(), "score")?);
    }
    Ok(theta)
}
