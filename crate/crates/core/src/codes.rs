//! Binary linear component codes for generalized CSA.
//!
//! A user splits its packet into `k` segments and sends the `d` segments of a
//! codeword. The receiver can rebuild the packet from the segments it has
//! seen exactly when the corresponding generator columns span GF(2)^k.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Codes are stored as bit masks, so both dimensions are capped at 64.
pub const MAX_LENGTH: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodeError {
    #[error("generator matrix has no rows")]
    Empty,
    #[error("generator rows have different lengths")]
    Ragged,
    #[error("code length {0} exceeds {MAX_LENGTH}")]
    TooLong(usize),
    #[error("generator matrix has rank {rank}, expected full row rank {k}")]
    RankDeficient { rank: usize, k: usize },
    #[error("invalid generator character `{0}` (expected 0 or 1)")]
    BadSymbol(char),
    #[error("{0}")]
    Parameter(String),
    #[error("ensemble codes must share a dimension (found k={0} and k={1})")]
    DimensionMismatch(usize, usize),
    #[error("ensemble probabilities sum to {0}, expected 1")]
    BadMass(f64),
    #[error("ensemble line {line}: {msg}")]
    EnsembleSyntax { line: usize, msg: String },
}

/// `(d, k)` binary linear code given by a `k × d` generator matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentCode {
    k: usize,
    d: usize,
    /// Bit `j` of `rows[i]` is `G[i][j]`.
    rows: Vec<u64>,
    /// Bit `i` of `columns[j]` is `G[i][j]`.
    columns: Vec<u64>,
}

/// Size of the GF(2) span of `vectors`.
pub fn gf2_rank<I: IntoIterator<Item = u64>>(vectors: I) -> usize {
    // basis[b] holds a vector whose highest set bit is b.
    let mut basis = [0u64; 64];
    let mut rank = 0;
    for mut v in vectors {
        while v != 0 {
            let top = 63 - v.leading_zeros() as usize;
            if basis[top] == 0 {
                basis[top] = v;
                rank += 1;
                break;
            }
            v ^= basis[top];
        }
    }
    rank
}

impl ComponentCode {
    /// Builds a code from generator rows given as 0/1 vectors.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, CodeError> {
        let k = rows.len();
        if k == 0 {
            return Err(CodeError::Empty);
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(CodeError::Ragged);
        }
        if d > MAX_LENGTH {
            return Err(CodeError::TooLong(d));
        }
        let mut masks = Vec::with_capacity(k);
        for row in rows {
            let mut m = 0u64;
            for (j, &b) in row.iter().enumerate() {
                match b {
                    0 => {}
                    1 => m |= 1 << j,
                    other => return Err(CodeError::BadSymbol(char::from(b'0' + other.min(9)))),
                }
            }
            masks.push(m);
        }
        let rank = gf2_rank(masks.iter().copied());
        if rank != k {
            return Err(CodeError::RankDeficient { rank, k });
        }
        let columns = (0..d)
            .map(|j| {
                masks
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| *r >> j & 1 == 1)
                    .fold(0u64, |c, (i, _)| c | 1 << i)
            })
            .collect();
        Ok(Self {
            k,
            d,
            rows: masks,
            columns,
        })
    }

    /// `(d, 1)` repetition code.
    pub fn repetition(d: usize) -> Result<Self, CodeError> {
        if d == 0 {
            return Err(CodeError::Parameter("repetition length must be positive".into()));
        }
        Self::from_rows(&[vec![1; d]])
    }

    /// `(k+1, k)` single-parity-check code: identity plus an all-ones parity column.
    pub fn single_parity_check(k: usize) -> Result<Self, CodeError> {
        if k == 0 {
            return Err(CodeError::Parameter("parity-check dimension must be positive".into()));
        }
        let rows: Vec<Vec<u8>> = (0..k)
            .map(|i| {
                let mut r = vec![0u8; k + 1];
                r[i] = 1;
                r[k] = 1;
                r
            })
            .collect();
        Self::from_rows(&rows)
    }

    pub fn dimension(&self) -> usize {
        self.k
    }

    pub fn length(&self) -> usize {
        self.d
    }

    pub fn generator_row(&self, i: usize) -> u64 {
        self.rows[i]
    }

    /// Rank of the generator columns selected by `known` (bit `j` = position `j`).
    pub fn known_rank(&self, known: u64) -> usize {
        gf2_rank(
            self.columns
                .iter()
                .enumerate()
                .filter(|(j, _)| known >> j & 1 == 1)
                .map(|(_, &c)| c),
        )
    }

    /// True iff the segments at `known` determine all `k` information segments.
    pub fn decodable(&self, known: u64) -> bool {
        known.count_ones() as usize >= self.k && self.known_rank(known) == self.k
    }

    /// Encodes `k` information segments (one word each) into `d` coded segments.
    pub fn encode(&self, info: &[u64]) -> Vec<u64> {
        assert_eq!(info.len(), self.k, "expected {} segments", self.k);
        self.columns
            .iter()
            .map(|&col| {
                info.iter()
                    .enumerate()
                    .filter(|(i, _)| col >> i & 1 == 1)
                    .fold(0, |acc, (_, &s)| acc ^ s)
            })
            .collect()
    }

    /// MAP erasure decoding of the information segments from `(position,
    /// segment)` pairs. `None` when the known columns do not have rank `k`.
    pub fn solve(&self, known: &[(usize, u64)]) -> Option<Vec<u64>> {
        // Rows of [coefficients | rhs], eliminated to reduced echelon form.
        let mut eqs: Vec<(u64, u64)> = known.iter().map(|&(j, y)| (self.columns[j], y)).collect();
        let mut pivot_row = 0;
        let mut pivots = Vec::with_capacity(self.k);
        for bit in 0..self.k {
            let p = (pivot_row..eqs.len()).find(|&r| eqs[r].0 >> bit & 1 == 1)?;
            eqs.swap(pivot_row, p);
            let (pc, py) = eqs[pivot_row];
            for (r, eq) in eqs.iter_mut().enumerate() {
                if r != pivot_row && eq.0 >> bit & 1 == 1 {
                    eq.0 ^= pc;
                    eq.1 ^= py;
                }
            }
            pivots.push(pivot_row);
            pivot_row += 1;
        }
        Some(pivots.into_iter().map(|r| eqs[r].1).collect())
    }
}

impl fmt::Display for ComponentCode {
    /// Generator rows as 0/1 strings joined by `;`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            for j in 0..self.d {
                f.write_str(if row >> j & 1 == 1 { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

impl FromStr for ComponentCode {
    type Err = CodeError;

    /// Accepts a generator matrix such as `101;011`, or the shorthands
    /// `rep:<d>` and `spc:<k>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(d) = s.strip_prefix("rep:") {
            let d = d
                .parse()
                .map_err(|_| CodeError::Parameter(format!("bad repetition length `{d}`")))?;
            return Self::repetition(d);
        }
        if let Some(k) = s.strip_prefix("spc:") {
            let k = k
                .parse()
                .map_err(|_| CodeError::Parameter(format!("bad parity-check dimension `{k}`")))?;
            return Self::single_parity_check(k);
        }
        let rows = s
            .split(';')
            .map(|row| {
                row.trim()
                    .chars()
                    .map(|c| match c {
                        '0' => Ok(0u8),
                        '1' => Ok(1u8),
                        other => Err(CodeError::BadSymbol(other)),
                    })
                    .collect::<Result<Vec<u8>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        if rows.iter().all(Vec::is_empty) {
            return Err(CodeError::Empty);
        }
        Self::from_rows(&rows)
    }
}

/// Outcome of erasure decoding at a generalized user node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErasureOutcome {
    pub resolvable: bool,
    pub info_determined: bool,
}

/// Checks whether `known_positions` determine the user's packet. Resolution
/// is all-or-nothing, so `resolvable` equals `info_determined`.
pub fn erasure_decode(code: &ComponentCode, known_positions: &[usize]) -> ErasureOutcome {
    let mask = known_positions.iter().fold(0u64, |m, &j| {
        assert!(j < code.length(), "position {j} outside code of length {}", code.length());
        m | 1 << j
    });
    let ok = code.decodable(mask);
    ErasureOutcome {
        resolvable: ok,
        info_determined: ok,
    }
}

/// Set of component codes sharing a dimension, each drawn with a given probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeEnsemble {
    entries: Vec<(ComponentCode, f64)>,
}

impl CodeEnsemble {
    pub fn new(entries: Vec<(ComponentCode, f64)>) -> Result<Self, CodeError> {
        let first = entries.first().ok_or(CodeError::Empty)?.0.dimension();
        let mut total = 0.0;
        for (code, p) in &entries {
            if code.dimension() != first {
                return Err(CodeError::DimensionMismatch(first, code.dimension()));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(CodeError::Parameter(format!("probability {p} outside [0, 1]")));
            }
            total += p;
        }
        if (total - 1.0).abs() > crate::model::MASS_TOLERANCE {
            return Err(CodeError::BadMass(total));
        }
        Ok(Self { entries })
    }

    pub fn single(code: ComponentCode) -> Self {
        Self {
            entries: vec![(code, 1.0)],
        }
    }

    pub fn entries(&self) -> &[(ComponentCode, f64)] {
        &self.entries
    }

    pub fn dimension(&self) -> usize {
        self.entries[0].0.dimension()
    }

    pub fn max_length(&self) -> usize {
        self.entries.iter().map(|(c, _)| c.length()).max().unwrap_or(0)
    }

    pub fn mean_length(&self) -> f64 {
        self.entries.iter().map(|(c, p)| c.length() as f64 * p).sum()
    }

    /// `k / d̄`.
    pub fn rate(&self) -> f64 {
        self.dimension() as f64 / self.mean_length()
    }

    /// Index of a code drawn according to the ensemble probabilities.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, (_, p)) in self.entries.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.entries.len() - 1
    }

    /// Parses the ensemble file format: one `<probability> <code>` pair per
    /// line, `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CodeError> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let syntax = |msg: String| CodeError::EnsembleSyntax { line: n + 1, msg };
            let (p, code) = line
                .split_once(char::is_whitespace)
                .ok_or_else(|| syntax("expected `<probability> <code>`".into()))?;
            let p: f64 = p.parse().map_err(|_| syntax(format!("bad probability `{p}`")))?;
            let code: ComponentCode = code.parse().map_err(|e: CodeError| syntax(e.to_string()))?;
            entries.push((code, p));
        }
        Self::new(entries)
    }
}

/// Rate of an ensemble.
pub fn ensemble_rate(ens: &CodeEnsemble) -> f64 {
    ens.rate()
}
