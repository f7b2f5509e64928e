//! FCIDUMP reader. The format is a Fortran namelist header followed by
//! records of one value and four 1-based orbital indices:
//!
//! ```text
//! &FCI NORB=3,NELEC=5,MS2=1,
//!  ORBSYM=1,1,1,
//!  ISYM=1,
//! &END
//!   -7.2831  1 1 0 0
//!    0.5312  1 2 1 2
//!  -63.1020  0 0 0 0
//! ```
//!
//! Record classes: four zero indices carry the core energy, `i j 0 0` a
//! one-body integral, four nonzero indices a two-body integral in chemists'
//! notation `(ij|kl)`. A record `i 0 0 0` is an orbital-energy annotation and
//! is skipped. Duplicate records overwrite earlier ones.

use crate::error::{CoreError, Result};
use crate::scalar::Real;
use std::path::Path;

/// One- and two-electron integrals over a spatial-orbital active space.
/// `h1` is symmetric; `h2` holds `(pq|rs)` with the full 8-fold permutation
/// symmetry materialized, so lookups are plain tensor reads.
#[derive(Debug, Clone)]
pub struct ActiveSpaceIntegrals<R> {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub core_energy: R,
    h1: Vec<R>,
    h2: Vec<R>,
}

impl<R: Real> ActiveSpaceIntegrals<R> {
    pub fn new(n_orbitals: usize, n_electrons: usize) -> Self {
        ActiveSpaceIntegrals {
            n_orbitals,
            n_electrons,
            core_energy: R::zero(),
            h1: vec![R::zero(); n_orbitals * n_orbitals],
            h2: vec![R::zero(); n_orbitals.pow(4)],
        }
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_orbitals
    }

    pub fn h1(&self, p: usize, q: usize) -> R {
        self.h1[p * self.n_orbitals + q]
    }

    /// Stores both `(p,q)` and `(q,p)`.
    pub fn set_h1(&mut self, p: usize, q: usize, v: R) {
        self.h1[p * self.n_orbitals + q] = v;
        self.h1[q * self.n_orbitals + p] = v;
    }

    pub fn h2(&self, p: usize, q: usize, r: usize, s: usize) -> R {
        let n = self.n_orbitals;
        self.h2[((p * n + q) * n + r) * n + s]
    }

    /// Stores `(pq|rs)` under all eight index permutations that leave a real
    /// chemists'-notation integral invariant.
    pub fn set_h2(&mut self, p: usize, q: usize, r: usize, s: usize, v: R) {
        let n = self.n_orbitals;
        for (a, b, c, d) in [
            (p, q, r, s),
            (q, p, r, s),
            (p, q, s, r),
            (q, p, s, r),
            (r, s, p, q),
            (s, r, p, q),
            (r, s, q, p),
            (s, r, q, p),
        ] {
            self.h2[((a * n + b) * n + c) * n + d] = v;
        }
    }
}

pub fn parse_fcidump<R: Real>(path: &Path) -> Result<ActiveSpaceIntegrals<R>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CoreError::io(path.display().to_string(), e))?;
    parse_fcidump_str(&text, &path.display().to_string())
}

/// Parse FCIDUMP text. `label` names the source in error messages.
pub fn parse_fcidump_str<R: Real>(text: &str, label: &str) -> Result<ActiveSpaceIntegrals<R>> {
    let err = |line: usize, msg: String| CoreError::Parse {
        path: label.to_string(),
        line,
        msg,
    };

    let mut lines = text.lines().enumerate();
    let mut header = String::new();
    let mut header_done = false;
    let mut first_data_line = 0usize;

    let (first_no, first_line) = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((no, l)) => break (no, l),
            None => return Err(err(1, "empty file".into())),
        }
    };
    if !first_line
        .trim_start()
        .to_ascii_uppercase()
        .starts_with("&FCI")
    {
        return Err(err(
            first_no + 1,
            format!(
                "expected header to start with &FCI, found {:?}",
                first_line.trim()
            ),
        ));
    }
    header.push_str(first_line.trim_start()[4..].trim_start());
    header.push(' ');
    if header_terminator(first_line) {
        header_done = true;
        first_data_line = first_no + 1;
    }
    if !header_done {
        for (no, l) in lines.by_ref() {
            header.push_str(l);
            header.push(' ');
            if header_terminator(l) {
                header_done = true;
                first_data_line = no + 1;
                break;
            }
        }
    }
    if !header_done {
        return Err(err(
            first_no + 1,
            "header never terminated with &END or /".into(),
        ));
    }

    let header_clean = header
        .replace("&END", " ")
        .replace("&end", " ")
        .replace('/', " ");
    let mut norb: Option<usize> = None;
    let mut nelec: Option<usize> = None;
    for token in header_clean
        .split([',', ' ', '\t'])
        .filter(|t| !t.is_empty())
    {
        if let Some((key, value)) = token.split_once('=') {
            let key = key.trim().to_ascii_uppercase();
            let value = value.trim();
            match key.as_str() {
                "NORB" => {
                    norb = Some(value.parse::<usize>().map_err(|_| {
                        err(
                            first_no + 1,
                            format!("NORB value {value:?} is not a non-negative integer"),
                        )
                    })?)
                }
                "NELEC" => {
                    nelec = Some(value.parse::<usize>().map_err(|_| {
                        err(
                            first_no + 1,
                            format!("NELEC value {value:?} is not a non-negative integer"),
                        )
                    })?)
                }
                _ => {}
            }
        }
    }
    let norb = norb.ok_or_else(|| err(first_no + 1, "header missing NORB".into()))?;
    let nelec = nelec.ok_or_else(|| err(first_no + 1, "header missing NELEC".into()))?;
    if norb == 0 {
        return Err(err(first_no + 1, "NORB must be positive".into()));
    }

    let mut ints = ActiveSpaceIntegrals::new(norb, nelec);

    for (no, l) in text.lines().enumerate().skip(first_data_line) {
        let line_no = no + 1;
        let trimmed = l.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(
                line_no,
                format!(
                    "expected 5 fields (value + 4 indices), found {}",
                    fields.len()
                ),
            ));
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| err(line_no, format!("unreadable value {:?}", fields[0])))?;
        let mut idx = [0usize; 4];
        for (k, f) in fields[1..].iter().enumerate() {
            idx[k] = f
                .parse::<usize>()
                .map_err(|_| err(line_no, format!("unreadable index {f:?}")))?;
        }
        for &i in &idx {
            if i > norb {
                return Err(CoreError::IndexRange {
                    path: label.to_string(),
                    msg: format!("line {line_no}: orbital index {i} outside [1, {norb}]"),
                });
            }
        }
        let v = R::of(value);
        match idx {
            [0, 0, 0, 0] => ints.core_energy = v,
            [i, 0, 0, 0] if i > 0 => { /* orbital-energy annotation, not used */ }
            [i, j, 0, 0] if i > 0 && j > 0 => ints.set_h1(i - 1, j - 1, v),
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                ints.set_h2(i - 1, j - 1, k - 1, l - 1, v)
            }
            _ => {
                return Err(err(
                    line_no,
                    format!(
                        "index pattern {:?} is neither core, one-body, nor two-body",
                        idx
                    ),
                ))
            }
        }
    }

    Ok(ints)
}

fn header_terminator(line: &str) -> bool {
    let upper = line.to_ascii_uppercase();
    upper.contains("&END") || line.trim_end().ends_with('/')
}
