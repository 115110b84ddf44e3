//! Plain-text scheme files.
//!
//! ```text
//! dims 2 2
//! U
//! 1 0  0 0  0 0  0 0
//! ...
//! phi
//! 1 0  0 0
//! Z
//! 1 0  0 0
//! 0 0  -1 0
//! h
//! -1: 0
//! +1: 1
//! ```
//!
//! Complex entries are `re im` pairs in row-major order and may wrap across
//! lines freely. Optional blocks `L1`, `L2` (conserved pair) and `M` (target
//! observable) use the same layout. Lines starting with `#` are comments.

use std::fmt::Write as _;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{c, BipartiteDims, CMatrix, CVector, Operator, StateVector, C64};
use crate::scheme::{ConservedPair, MeasurementScheme, OutcomeMap};

/// A parsed scheme plus the optional observables stored alongside it.
#[derive(Clone, Debug)]
pub struct SchemeFile {
    pub scheme: MeasurementScheme,
    pub l1: Option<Operator>,
    pub l2: Option<Operator>,
    pub m: Option<Operator>,
}

impl SchemeFile {
    /// The conserved pair, if both halves were given.
    pub fn pair(&self) -> Result<Option<ConservedPair>> {
        match (&self.l1, &self.l2) {
            (Some(a), Some(b)) => Ok(Some(ConservedPair::new(a.clone(), b.clone())?)),
            _ => Ok(None),
        }
    }
}

const BLOCKS: [&str; 7] = ["U", "phi", "Z", "L1", "L2", "M", "h"];

#[derive(Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    line: usize,
    column: usize,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokens(line: &str, line_no: usize) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, ch) in line.char_indices() {
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(Token {
                    text: &line[s..i],
                    line: line_no,
                    column: line[..s].chars().count() + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(Token {
            text: &line[s..],
            line: line_no,
            column: line[..s].chars().count() + 1,
        });
    }
    out
}

fn number(tok: Token<'_>) -> Result<f64> {
    let v: f64 = tok
        .text
        .parse()
        .map_err(|_| parse_err(tok.line, tok.column, format!("expected a number, found `{}`", tok.text)))?;
    if !v.is_finite() {
        return Err(parse_err(tok.line, tok.column, "non-finite number"));
    }
    Ok(v)
}

fn count(tok: Token<'_>) -> Result<usize> {
    match tok.text.parse::<usize>() {
        Ok(v) if v > 0 => Ok(v),
        _ => Err(parse_err(
            tok.line,
            tok.column,
            format!("expected a positive integer, found `{}`", tok.text),
        )),
    }
}

/// Parses a scheme file and validates the scheme.
pub fn parse_scheme(text: &str, tol: &Tolerances) -> Result<SchemeFile> {
    let lines: Vec<(usize, Vec<Token<'_>>)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, tokens(l, i + 1)))
        .filter(|(_, t)| !t.is_empty() && !t[0].text.starts_with('#'))
        .collect();

    let mut it = lines.into_iter().peekable();
    let (first_line, head) = it
        .next()
        .ok_or_else(|| parse_err(1, 1, "empty file; expected `dims <dimS> <dimP>`"))?;
    if head[0].text != "dims" {
        return Err(parse_err(first_line, head[0].column, "expected `dims <dimS> <dimP>`"));
    }
    if head.len() != 3 {
        let col = head.get(3).map_or(head.last().unwrap().column, |t| t.column);
        return Err(parse_err(first_line, col, "`dims` takes exactly two integers"));
    }
    let (ds, dp) = (count(head[1])?, count(head[2])?);
    let dims = BipartiteDims::new(ds, dp)?;
    let joint = dims.joint();
    if joint > crate::config::DEFAULT_MAX_JOINT_DIM {
        return Err(Error::Capacity {
            dim: joint,
            max: crate::config::DEFAULT_MAX_JOINT_DIM,
        });
    }

    let mut blocks: std::collections::HashMap<&str, Vec<C64>> = Default::default();
    let mut h_entries: Option<Vec<(String, Vec<usize>)>> = None;

    while let Some((line_no, toks)) = it.next() {
        let key = toks[0];
        if !BLOCKS.contains(&key.text) {
            return Err(parse_err(
                line_no,
                key.column,
                format!("unknown block `{}` (expected one of {})", key.text, BLOCKS.join(", ")),
            ));
        }
        if toks.len() > 1 {
            return Err(parse_err(line_no, toks[1].column, "block name must stand alone on its line"));
        }
        if blocks.contains_key(key.text) || (key.text == "h" && h_entries.is_some()) {
            return Err(parse_err(line_no, key.column, format!("duplicate block `{}`", key.text)));
        }
        if key.text == "h" {
            let mut entries = Vec::new();
            while let Some((ln, t)) = it.peek() {
                if BLOCKS.contains(&t[0].text) {
                    break;
                }
                let (ln, t) = (*ln, t.clone());
                it.next();
                let label_tok = t[0];
                let Some(label) = label_tok.text.strip_suffix(':') else {
                    return Err(parse_err(ln, label_tok.column, "expected `<label>: <idx> ...`"));
                };
                if label.is_empty() {
                    return Err(parse_err(ln, label_tok.column, "empty outcome label"));
                }
                let idx = t[1..]
                    .iter()
                    .map(|tok| {
                        tok.text.parse::<usize>().map_err(|_| {
                            parse_err(tok.line, tok.column, format!("expected an index, found `{}`", tok.text))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                entries.push((label.to_string(), idx));
            }
            if entries.is_empty() {
                return Err(parse_err(line_no, key.column, "block `h` has no outcomes"));
            }
            h_entries = Some(entries);
            continue;
        }

        let entries = match key.text {
            "U" => joint * joint,
            "phi" => dp,
            "Z" | "L2" => dp * dp,
            _ => ds * ds,
        };
        let mut values = Vec::with_capacity(2 * entries);
        while values.len() < 2 * entries {
            let Some((ln, t)) = it.peek() else {
                return Err(parse_err(
                    line_no,
                    key.column,
                    format!(
                        "block `{}` ended after {} of {} entries",
                        key.text,
                        values.len() / 2,
                        entries
                    ),
                ));
            };
            if BLOCKS.contains(&t[0].text) {
                return Err(parse_err(
                    *ln,
                    t[0].column,
                    format!(
                        "block `{}` ended after {} of {} entries",
                        key.text,
                        values.len() / 2,
                        entries
                    ),
                ));
            }
            let t = t.clone();
            it.next();
            for tok in t {
                if values.len() == 2 * entries {
                    return Err(parse_err(
                        tok.line,
                        tok.column,
                        format!("too many values in block `{}`", key.text),
                    ));
                }
                values.push(number(tok)?);
            }
        }
        let z: Vec<C64> = values.chunks(2).map(|p| c(p[0], p[1])).collect();
        blocks.insert(key.text, z);
    }

    let missing = |name: &str| parse_err(first_line, 1, format!("missing block `{name}`"));
    let square = |name: &str, n: usize, data: &[C64]| -> Result<Operator> {
        Operator::from_matrix(CMatrix::from_row_slice(n, n, data)).map_err(|e| match e {
            Error::Contract(m) => Error::Contract(format!("block `{name}`: {m}")),
            other => other,
        })
    };
    let u = square("U", joint, blocks.get("U").ok_or_else(|| missing("U"))?)?;
    let phi_raw = blocks.get("phi").ok_or_else(|| missing("phi"))?;
    let phi = StateVector::new(CVector::from_column_slice(phi_raw)).map_err(|e| match e {
        Error::Contract(m) => Error::Contract(format!("block `phi`: {m}")),
        other => other,
    })?;
    let z = square("Z", dp, blocks.get("Z").ok_or_else(|| missing("Z"))?)?;
    let h_entries = h_entries.ok_or_else(|| missing("h"))?;
    let optional = |name: &str, n: usize| blocks.get(name).map(|d| square(name, n, d)).transpose();
    let l1 = optional("L1", ds)?;
    let l2 = optional("L2", dp)?;
    let m = optional("M", ds)?;

    let n_values = crate::scheme::spectral_projectors(&z, tol.degeneracy)?.values.len();
    let h = OutcomeMap::new(h_entries, n_values)?;
    let scheme = MeasurementScheme::new(dims, u, phi, z, h, tol)?;
    Ok(SchemeFile { scheme, l1, l2, m })
}

fn write_block(out: &mut String, name: &str, rows: usize, cols: usize, at: impl Fn(usize, usize) -> C64) {
    out.push_str(name);
    out.push('\n');
    for i in 0..rows {
        let line: Vec<String> = (0..cols)
            .map(|j| {
                let z = at(i, j);
                format!("{:e} {:e}", z.re, z.im)
            })
            .collect();
        out.push_str(&line.join("  "));
        out.push('\n');
    }
}

/// Serializes a scheme (and optional observables) in the format read by [`parse_scheme`].
pub fn write_scheme(
    scheme: &MeasurementScheme,
    pair: Option<&ConservedPair>,
    m: Option<&Operator>,
) -> String {
    let dims = scheme.dims();
    let mut out = String::new();
    let _ = writeln!(out, "dims {} {}", dims.system, dims.probe);
    let u = scheme.coupling().matrix();
    write_block(&mut out, "U", u.nrows(), u.ncols(), |i, j| u[(i, j)]);
    let phi = scheme.probe_state().vector();
    write_block(&mut out, "phi", 1, phi.len(), |_, j| phi[j]);
    let z = scheme.pointer().matrix();
    write_block(&mut out, "Z", z.nrows(), z.ncols(), |i, j| z[(i, j)]);
    if let Some(p) = pair {
        let (a, b) = (p.l1().matrix(), p.l2().matrix());
        write_block(&mut out, "L1", a.nrows(), a.ncols(), |i, j| a[(i, j)]);
        write_block(&mut out, "L2", b.nrows(), b.ncols(), |i, j| b[(i, j)]);
    }
    if let Some(m) = m {
        let a = m.matrix();
        write_block(&mut out, "M", a.nrows(), a.ncols(), |i, j| a[(i, j)]);
    }
    out.push_str("h\n");
    for (label, idx) in scheme.outcome_map().entries() {
        let idx: Vec<String> = idx.iter().map(|k| k.to_string()).collect();
        let _ = writeln!(out, "{label}: {}", idx.join(" "));
    }
    out
}
