//! Driver sequences `U_n ∈ [0,1]^{ns}` and best-of-K selection.
//!
//! Pseudorandom drivers come from ChaCha8 (`rand_chacha::ChaCha8Rng`), a
//! counter-based stream cipher generator: the value at any position depends
//! only on the 64-bit seed, the stream id and the block counter.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::csv::{fmt17, parse_f64};
use crate::error::{Error, Result};

/// Largest admissible `n * s`.
pub const MAX_ENTRIES: u64 = 1 << 31;

/// How a driver sequence was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    IidSeeded(u64),
    RadicalInverse(Vec<u64>),
    Lattice(Vec<u64>),
    /// Winner `index` of a best-of-`k` search whose candidate `i` used seed `seed + i`.
    Selected {
        k: usize,
        objective: String,
        seed: u64,
        index: usize,
    },
    Imported,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[u64]| v.iter().map(u64::to_string).collect::<Vec<_>>().join(";");
        match self {
            Provenance::IidSeeded(s) => write!(f, "iid-seeded:{s}"),
            Provenance::RadicalInverse(b) => write!(f, "radical-inverse:{}", join(b)),
            Provenance::Lattice(g) => write!(f, "lattice:{}", join(g)),
            Provenance::Selected { k, objective, seed, index } => {
                write!(f, "selected:k={k};objective={objective};seed={seed};index={index}")
            }
            Provenance::Imported => f.write_str("imported"),
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unrecognized provenance `{s}`"));
        let list = |v: &str| -> Result<Vec<u64>> {
            v.split(';').map(|t| t.trim().parse::<u64>().map_err(|_| bad())).collect()
        };
        let s = s.trim();
        if s == "imported" {
            return Ok(Provenance::Imported);
        }
        let (tag, rest) = s.split_once(':').ok_or_else(bad)?;
        match tag {
            "iid-seeded" => Ok(Provenance::IidSeeded(rest.parse().map_err(|_| bad())?)),
            "radical-inverse" => Ok(Provenance::RadicalInverse(list(rest)?)),
            "lattice" => Ok(Provenance::Lattice(list(rest)?)),
            "selected" => {
                let mut k = None;
                let mut objective = None;
                let mut seed = None;
                let mut index = None;
                for part in rest.split(';') {
                    let (key, val) = part.split_once('=').ok_or_else(bad)?;
                    match key {
                        "k" => k = val.parse().ok(),
                        "objective" => objective = Some(val.to_string()),
                        "seed" => seed = val.parse().ok(),
                        "index" => index = val.parse().ok(),
                        _ => return Err(bad()),
                    }
                }
                Ok(Provenance::Selected {
                    k: k.ok_or_else(bad)?,
                    objective: objective.ok_or_else(bad)?,
                    seed: seed.ok_or_else(bad)?,
                    index: index.ok_or_else(bad)?,
                })
            }
            _ => Err(bad()),
        }
    }
}

/// An `n × s` array of values in `[0, 1)`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverSequence {
    n: usize,
    s: usize,
    values: Vec<f64>,
    provenance: Provenance,
}

impl DriverSequence {
    pub fn new(s: usize, values: Vec<f64>, provenance: Provenance) -> Result<Self> {
        if s == 0 || values.len() % s != 0 {
            return Err(Error::Parameter(format!("{} values do not form rows of width {s}", values.len())));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(Error::Domain(format!("driver entry {v} outside [0, 1)")));
        }
        Ok(Self { n: values.len() / s, s, values, provenance })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.s
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.s..(i + 1) * self.s]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.s)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Prefix of the first `n` rows.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n);
        Self { n, s: self.s, values: self.values[..n * self.s].to_vec(), provenance: self.provenance.clone() }
    }

    /// Regenerates the sequence from its provenance, when that is possible.
    pub fn replay(&self) -> Option<Result<Self>> {
        match &self.provenance {
            Provenance::IidSeeded(seed) => Some(iid_driver(*seed, self.n, self.s)),
            Provenance::RadicalInverse(b) => Some(radical_inverse_driver(b, self.n)),
            Provenance::Selected { seed, index, .. } => {
                let mut d = match iid_driver(seed.wrapping_add(*index as u64), self.n, self.s) {
                    Ok(d) => d,
                    Err(e) => return Some(Err(e)),
                };
                d.provenance = self.provenance.clone();
                Some(Ok(d))
            }
            Provenance::Lattice(_) | Provenance::Imported => None,
        }
    }

    /// CSV text: a `# n,s,provenance` label line, a comment line with the
    /// values, then one row of `s` numbers per driver point.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 64);
        out.push_str("# n,s,provenance\n");
        out.push_str(&format!("# {},{},{}\n", self.n, self.s, self.provenance));
        for row in self.rows() {
            let fields: Vec<String> = row.iter().map(|&v| fmt17(v)).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().peekable();
        let mut meta = None;
        while let Some(line) = lines.next() {
            if line.trim() == "# n,s,provenance" {
                meta = lines.next();
                break;
            }
        }
        let meta = meta.and_then(|m| m.strip_prefix('#')).ok_or_else(|| Error::Schema("n,s,provenance".into()))?;
        let mut parts = meta.trim().splitn(3, ',');
        let parse_usize = |t: Option<&str>| -> Result<usize> {
            t.and_then(|v| v.trim().parse().ok()).ok_or_else(|| Error::Parse(format!("bad driver header `{meta}`")))
        };
        let n = parse_usize(parts.next())?;
        let s = parse_usize(parts.next())?;
        let provenance: Provenance = parts.next().unwrap_or("imported").parse()?;
        let mut values = Vec::with_capacity(n * s);
        for line in lines {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line.split(',').map(parse_f64).collect::<Result<_>>()?;
            if row.len() != s {
                return Err(Error::Dimension { expected: s, got: row.len() });
            }
            values.extend(row);
        }
        if values.len() != n * s {
            return Err(Error::Parse(format!("expected {n} driver rows, found {}", values.len() / s)));
        }
        Self::new(s, values, provenance)
    }
}

fn check_size(n: usize, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::Parameter("driver width must be positive".into()));
    }
    match (n as u64).checked_mul(s as u64) {
        Some(total) if total <= MAX_ENTRIES => Ok(()),
        _ => Err(Error::Size(format!("n*s = {n}*{s} exceeds 2^31"))),
    }
}

/// Seeded i.i.d. uniform driver from ChaCha8 stream 0.
pub fn iid_driver(seed: u64, n: usize, s: usize) -> Result<DriverSequence> {
    check_size(n, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values: Vec<f64> = (0..n * s).map(|_| rng.random::<f64>()).collect();
    Ok(DriverSequence { n, s, values, provenance: Provenance::IidSeeded(seed) })
}

/// Radical inverse of `i` in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let inv_b = 1.0 / b as f64;
    let mut f = inv_b;
    let mut out = 0.0;
    while i > 0 {
        out += (i % b) as f64 * f;
        i /= b;
        f *= inv_b;
    }
    out
}

/// Halton-type driver: row `i` (for `i = 1..=n`) holds the radical inverses of `i`.
pub fn radical_inverse_driver(bases: &[u64], n: usize) -> Result<DriverSequence> {
    check_size(n, bases.len())?;
    if let Some(b) = bases.iter().find(|&&b| b < 2) {
        return Err(Error::Parameter(format!("base {b} is below 2")));
    }
    for (i, &a) in bases.iter().enumerate() {
        for &b in &bases[i + 1..] {
            if num_integer::gcd(a, b) != 1 {
                return Err(Error::Parameter(format!("bases {a} and {b} are not coprime")));
            }
        }
    }
    let s = bases.len();
    let mut values = Vec::with_capacity(n * s);
    for i in 1..=n as u64 {
        values.extend(bases.iter().map(|&b| radical_inverse(i, b)));
    }
    Ok(DriverSequence { n, s, values, provenance: Provenance::RadicalInverse(bases.to_vec()) })
}

/// Result of a best-of-K search.
#[derive(Debug, Clone)]
pub struct Selection {
    pub driver: DriverSequence,
    pub score: f64,
    pub index: usize,
    /// Scores of all candidates in candidate order.
    pub scores: Vec<f64>,
}

impl Selection {
    pub fn median_score(&self) -> f64 {
        let mut s = self.scores.clone();
        s.sort_by(f64::total_cmp);
        let k = s.len();
        if k % 2 == 1 {
            s[k / 2]
        } else {
            0.5 * (s[k / 2 - 1] + s[k / 2])
        }
    }
}

/// Draws `k` i.i.d. drivers with seeds `seed + i` and keeps the one with the
/// smallest objective. Candidates are scored in parallel; the reduction runs
/// in candidate order with ties going to the lower index, so the result does
/// not depend on scheduling.
pub fn best_of_k<F>(k: usize, n: usize, s: usize, seed: u64, objective: &str, score: F) -> Result<Selection>
where
    F: Fn(&DriverSequence) -> Result<f64> + Sync,
{
    if k == 0 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    check_size(n, s)?;
    let scores: Vec<f64> = (0..k)
        .into_par_iter()
        .map(|i| {
            let d = iid_driver(seed.wrapping_add(i as u64), n, s)?;
            score(&d).map_err(|e| Error::Candidate { index: i, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;
    let mut index = 0;
    for (i, &v) in scores.iter().enumerate() {
        if v < scores[index] {
            index = i;
        }
    }
    let mut driver = iid_driver(seed.wrapping_add(index as u64), n, s)?;
    driver.provenance = Provenance::Selected { k, objective: objective.to_string(), seed, index };
    Ok(Selection { driver, score: scores[index], index, scores })
}
