//! Named state and witness sources (`werner:0.8`, `riccardi:a:b:pair`,
//! `file:path`, ...) and the matrix file format.
//!
//! A matrix file uses the record format:
//!
//! ```text
//! matrix-version=1
//! kind=matrix rows=4 cols=4 first=2 second=2
//! kind=row index=0 entries=0.25,0;0,0;0,0;0,0
//! ...
//! ```
//!
//! `first`/`second` are optional and give the bipartite split.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{invalid, mismatch, Error, Result};
use crate::record::{is_token, Record};
use crate::states::{random_density, riccardi_witness, werner_state, BellPair, DensityMatrix, Witness};
use crate::tensor::{ComplexMatrix, SubsystemDims, C64, DEFAULT_TOLERANCE};

/// Riccardi coefficients within this distance of the unit circle are
/// rescaled onto it; a hand-typed `0.7071:0.7071` is accepted this way.
pub const COEFFICIENT_RENORMALIZE_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub enum StateSource {
    Werner { p: f64 },
    Random { seed: u64, rank: usize },
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq)]
pub enum WitnessSource {
    Riccardi { a: f64, b: f64, pair: BellPair },
    File { path: PathBuf },
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| invalid(format!("cannot parse {what} from `{s}`")))
}

fn parse_int<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse()
        .map_err(|_| invalid(format!("cannot parse {what} from `{s}`")))
}

impl FromStr for StateSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.splitn(2, ':').collect();
        match parts.as_slice() {
            ["werner", p] => Ok(Self::Werner { p: parse_f64(p, "Werner weight")? }),
            ["random", rest] => {
                let (seed, rank) = rest
                    .split_once(':')
                    .ok_or_else(|| invalid("random state must be `random:seed:rank`"))?;
                Ok(Self::Random {
                    seed: parse_int(seed, "seed")?,
                    rank: parse_int(rank, "rank")?,
                })
            }
            ["file", path] if !path.is_empty() => Ok(Self::File { path: PathBuf::from(path) }),
            _ => Err(invalid(format!(
                "unknown state `{s}` (expected werner:p, random:seed:rank or file:path)"
            ))),
        }
    }
}

impl fmt::Display for StateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Werner { p } => write!(f, "werner:{p}"),
            Self::Random { seed, rank } => write!(f, "random:{seed}:{rank}"),
            Self::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl FromStr for WitnessSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err(invalid("empty witness file path"));
            }
            return Ok(Self::File { path: PathBuf::from(path) });
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["riccardi", a, b, pair] => Ok(Self::Riccardi {
                a: parse_f64(a, "coefficient a")?,
                b: parse_f64(b, "coefficient b")?,
                pair: pair.parse()?,
            }),
            ["riccardi", a, b] => Ok(Self::Riccardi {
                a: parse_f64(a, "coefficient a")?,
                b: parse_f64(b, "coefficient b")?,
                pair: BellPair::default(),
            }),
            _ => Err(invalid(format!(
                "unknown witness `{s}` (expected riccardi:a:b:pair or file:path)"
            ))),
        }
    }
}

impl fmt::Display for WitnessSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Riccardi { a, b, pair } => write!(f, "riccardi:{a}:{b}:{pair}"),
            Self::File { path } => write!(f, "file:{}", path.display()),
        }
    }
}

impl StateSource {
    /// Builds the bipartite state on `(d, d)`.
    pub fn resolve(&self, d: usize) -> Result<DensityMatrix> {
        let dims = SubsystemDims::square(d)?;
        let rho = match self {
            Self::Werner { p } => {
                if d != 2 {
                    return Err(invalid("Werner states are defined for d = 2"));
                }
                werner_state(*p)?
            }
            Self::Random { seed, rank } => random_density(d * d, *rank, *seed)?.with_dims(dims)?,
            Self::File { path } => {
                let (m, file_dims) = read_matrix_file(path)?;
                let rho = DensityMatrix::new(m, Some(file_dims.unwrap_or(dims)), DEFAULT_TOLERANCE)?;
                if rho.dims() != Some(dims) {
                    return Err(mismatch(format!("state file {} is not a ({d}, {d}) state", path.display())));
                }
                rho
            }
        };
        Ok(rho)
    }

    pub fn is_token(&self) -> bool {
        is_token(&self.to_string())
    }
}

impl WitnessSource {
    /// Builds the witness on `(d, d)`.
    pub fn resolve(&self, d: usize) -> Result<Witness> {
        let dims = SubsystemDims::square(d)?;
        match self {
            Self::Riccardi { a, b, pair } => {
                if d != 2 {
                    return Err(invalid("Riccardi witnesses are two-qubit operators (d = 2)"));
                }
                let norm = (a * a + b * b).sqrt();
                if (norm * norm - 1.0).abs() > COEFFICIENT_RENORMALIZE_TOL {
                    return Err(invalid(format!("Riccardi coefficients need a^2 + b^2 = 1, got {}", norm * norm)));
                }
                riccardi_witness(a / norm, b / norm, *pair)
            }
            Self::File { path } => {
                let (m, file_dims) = read_matrix_file(path)?;
                let w = Witness::new(m, file_dims.unwrap_or(dims), format!("file:{}", path.display()))?;
                if w.dims() != dims {
                    return Err(mismatch(format!("witness file {} is not a ({d}, {d}) operator", path.display())));
                }
                Ok(w)
            }
        }
    }

    pub fn is_token(&self) -> bool {
        is_token(&self.to_string())
    }
}

/// Serializes a matrix in the record format.
pub fn matrix_to_text(m: &ComplexMatrix, dims: Option<SubsystemDims>) -> String {
    let mut out = String::from("matrix-version=1\n");
    let mut header = Record::new()
        .field("kind", "matrix")
        .field("rows", m.rows())
        .field("cols", m.cols());
    if let Some(d) = dims {
        header = header.field("first", d.first()).field("second", d.second());
    }
    out.push_str(&format!("{header}\n"));
    for i in 0..m.rows() {
        let entries: Vec<String> = (0..m.cols())
            .map(|j| {
                let z = m.get(i, j);
                format!("{},{}", z.re, z.im)
            })
            .collect();
        let row = Record::new()
            .field("kind", "row")
            .field("index", i)
            .field("entries", entries.join(";"));
        out.push_str(&format!("{row}\n"));
    }
    out
}

pub fn parse_matrix_text(text: &str) -> Result<(ComplexMatrix, Option<SubsystemDims>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let perr = |line: usize, message: String| Error::Parse { line: line + 1, message };
    match lines.next() {
        Some((_, "matrix-version=1")) => {}
        Some((n, other)) => return Err(perr(n, format!("expected `matrix-version=1`, got `{other}`"))),
        None => return Err(perr(0, "empty matrix file".into())),
    }
    let (hn, header) = lines.next().ok_or_else(|| perr(1, "missing matrix header".into()))?;
    let header = Record::parse(header).map_err(|e| perr(hn, e.to_string()))?;
    if header.get("kind") != Some("matrix") {
        return Err(perr(hn, "first record must have kind=matrix".into()));
    }
    let rows: usize = header.parse_field("rows").map_err(|e| perr(hn, e.to_string()))?;
    let cols: usize = header.parse_field("cols").map_err(|e| perr(hn, e.to_string()))?;
    let dims = match (header.get("first"), header.get("second")) {
        (None, None) => None,
        _ => {
            let a: usize = header.parse_field("first").map_err(|e| perr(hn, e.to_string()))?;
            let b: usize = header.parse_field("second").map_err(|e| perr(hn, e.to_string()))?;
            Some(SubsystemDims::new(a, b)?)
        }
    };
    let mut entries = vec![C64::new(0.0, 0.0); rows * cols];
    let mut seen = vec![false; rows];
    for (n, line) in lines {
        let rec = Record::parse(line).map_err(|e| perr(n, e.to_string()))?;
        if rec.get("kind") != Some("row") {
            return Err(perr(n, "expected kind=row".into()));
        }
        let index: usize = rec.parse_field("index").map_err(|e| perr(n, e.to_string()))?;
        if index >= rows || seen[index] {
            return Err(perr(n, format!("row index {index} out of range or repeated")));
        }
        seen[index] = true;
        let values: Vec<&str> = rec
            .require("entries")
            .map_err(|e| perr(n, e.to_string()))?
            .split(';')
            .collect();
        if values.len() != cols {
            return Err(perr(n, format!("row has {} entries, expected {cols}", values.len())));
        }
        for (j, v) in values.iter().enumerate() {
            let (re, im) = v
                .split_once(',')
                .ok_or_else(|| perr(n, format!("entry `{v}` is not `re,im`")))?;
            let re: f64 = re.parse().map_err(|_| perr(n, format!("bad real part `{re}`")))?;
            let im: f64 = im.parse().map_err(|_| perr(n, format!("bad imaginary part `{im}`")))?;
            entries[index * cols + j] = C64::new(re, im);
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(invalid(format!("matrix row {missing} missing")));
    }
    let m = ComplexMatrix::new(rows, cols, entries)?;
    if let Some(d) = dims {
        if d.total() != rows || rows != cols {
            return Err(mismatch("subsystem dims do not match the matrix size"));
        }
    }
    Ok((m, dims))
}

pub fn read_matrix_file(path: &Path) -> Result<(ComplexMatrix, Option<SubsystemDims>)> {
    parse_matrix_text(&std::fs::read_to_string(path)?)
}

pub fn write_matrix_file(path: &Path, m: &ComplexMatrix, dims: Option<SubsystemDims>) -> Result<()> {
    std::fs::write(path, matrix_to_text(m, dims))?;
    Ok(())
}
