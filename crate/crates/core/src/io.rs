//! Plain-text instance files.
//!
//! ```text
//! # comment
//! sstqp-instance 1
//! family psd
//! n 3
//! rho 1
//! rho0 2
//! seed 7
//! lambda 0.0000000000000000e0
//! xstar: 5.0000000000000000e-1 5.0000000000000000e-1 0.0000000000000000e0
//! Q:
//! <n rows of n reals>
//! ```
//!
//! Reals are written as `{:.16e}` (17 significant digits), which Rust's
//! parser reads back to the same bits. `rho0` and `xstar:` may be omitted for
//! custom instances.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::formulations::{Family, InstanceMeta, SparseStqpInstance};
use crate::linalg::SymMatrix;

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "sstqp-instance";
/// Larger asymmetry in a loaded `Q` is rejected; smaller is averaged away.
pub const SYMMETRY_TOL: f64 = 1e-12;

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn render(inst: &SparseStqpInstance) -> String {
    let m = &inst.meta;
    let mut s = String::new();
    writeln!(s, "{MAGIC} {FORMAT_VERSION}").unwrap();
    writeln!(s, "family {}", m.family).unwrap();
    writeln!(s, "n {}", inst.n).unwrap();
    writeln!(s, "rho {}", inst.rho).unwrap();
    if let Some(r0) = m.rho0 {
        writeln!(s, "rho0 {r0}").unwrap();
    }
    writeln!(s, "seed {}", m.seed).unwrap();
    writeln!(s, "lambda {}", real(m.lambda)).unwrap();
    if let Some(x) = &m.xstar {
        let xs: Vec<String> = x.iter().map(|&v| real(v)).collect();
        writeln!(s, "xstar: {}", xs.join(" ")).unwrap();
    }
    writeln!(s, "Q:").unwrap();
    for i in 0..inst.n {
        let row: Vec<String> = (0..inst.n).map(|j| real(inst.q.get(i, j))).collect();
        writeln!(s, "{}", row.join(" ")).unwrap();
    }
    s
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn reals(line: usize, text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(line, format!("'{t}' is not a finite real")))
        })
        .collect()
}

fn integer<T: std::str::FromStr>(line: usize, key: &str, text: &str) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| perr(line, format!("{key} expects an integer, got '{}'", text.trim())))
}

pub fn parse(text: &str) -> Result<SparseStqpInstance> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, head) = lines.next().ok_or_else(|| perr(0, "empty file"))?;
    match head.split_once(' ') {
        Some((MAGIC, v)) if v.trim() == FORMAT_VERSION.to_string() => {}
        Some((MAGIC, v)) => return Err(perr(ln, format!("unsupported version '{}'", v.trim()))),
        _ => return Err(perr(ln, format!("expected '{MAGIC} {FORMAT_VERSION}'"))),
    }

    let mut family = None;
    let (mut n, mut rho, mut rho0, mut seed, mut lambda) = (None, None, None, None, None);
    let mut xstar = None;
    let mut q_line = None;
    for (ln, l) in lines.by_ref() {
        if l == "Q:" {
            q_line = Some(ln);
            break;
        }
        if let Some(rest) = l.strip_prefix("xstar:") {
            xstar = Some(reals(ln, rest)?);
            continue;
        }
        let (key, val) = l.split_once(char::is_whitespace).unwrap_or((l, ""));
        match key {
            "family" => family = Some(val.trim().parse::<Family>().map_err(|e| perr(ln, e.to_string()))?),
            "n" => n = Some(integer::<usize>(ln, key, val)?),
            "rho" => rho = Some(integer::<usize>(ln, key, val)?),
            "rho0" => rho0 = Some(integer::<usize>(ln, key, val)?),
            "seed" => seed = Some(integer::<u64>(ln, key, val)?),
            "lambda" => {
                let v = reals(ln, val)?;
                if v.len() != 1 {
                    return Err(perr(ln, "lambda expects one real"));
                }
                lambda = Some(v[0]);
            }
            other => return Err(perr(ln, format!("unknown key '{other}'"))),
        }
    }
    let q_line = q_line.ok_or_else(|| perr(0, "missing 'Q:' block"))?;
    let n = n.ok_or_else(|| perr(q_line, "missing 'n'"))?;
    let rho = rho.ok_or_else(|| perr(q_line, "missing 'rho'"))?;
    if n == 0 {
        return Err(perr(q_line, "n must be positive"));
    }
    let mut rows = Vec::with_capacity(n);
    for (ln, l) in lines {
        let row = reals(ln, l)?;
        if row.len() != n {
            return Err(perr(ln, format!("Q row has {} entries, expected {n}", row.len())));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(perr(q_line, format!("Q has {} rows, expected {n}", rows.len())));
    }
    let asym = SymMatrix::asymmetry(&rows);
    if asym > SYMMETRY_TOL {
        return Err(perr(q_line, format!("Q is not symmetric (asymmetry {asym:e})")));
    }
    let q = SymMatrix::from_lower_fn(n, |i, j| {
        if rows[i][j] == rows[j][i] {
            rows[i][j]
        } else {
            0.5 * (rows[i][j] + rows[j][i])
        }
    });
    let meta = InstanceMeta {
        family: family.unwrap_or(Family::Custom),
        rho0,
        xstar,
        lambda: lambda.unwrap_or(0.0),
        seed: seed.unwrap_or(0),
    };
    SparseStqpInstance::with_meta(q, rho, meta)
}

pub fn read_instance(path: &Path) -> Result<SparseStqpInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse(&text)
}

pub fn write_instance(path: &Path, inst: &SparseStqpInstance) -> Result<()> {
    std::fs::write(path, render(inst)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
