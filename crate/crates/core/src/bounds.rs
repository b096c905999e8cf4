//! Closed-form bound evaluators. Logarithms are natural throughout.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

fn check_chain(alpha: f64, m: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Domain(format!("alpha = {alpha} outside [0, 1)")));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("M = {m} must be positive")));
    }
    Ok(())
}

fn check_n(n: f64) -> Result<()> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::Domain(format!("n = {n} must be at least 1")));
    }
    Ok(())
}

/// `alpha M / (n (1 - alpha))`.
pub fn gap_bound(alpha: f64, m: f64, n: usize) -> Result<f64> {
    check_chain(alpha, m)?;
    check_n(n as f64)?;
    Ok(alpha * m / (n as f64 * (1.0 - alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingBound {
    /// `2 exp(-((1-alpha)^2/M^2) (n c - 2M/(1-alpha))^2 / (8n))`.
    pub raw: f64,
    /// `raw` clamped to `[0, 1]`.
    pub clamped: f64,
}

/// Smallest `n` for which the Hoeffding bound applies: `4M / ((1 - alpha) c)`.
pub fn hoeffding_min_n(alpha: f64, m: f64, c: f64) -> Result<f64> {
    check_chain(alpha, m)?;
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Domain(format!("deviation c = {c} must be positive")));
    }
    Ok(4.0 * m / ((1.0 - alpha) * c))
}

/// Tail bound `P(|Δ_{n,A}| >= c)` for uniformly ergodic chains.
pub fn hoeffding_tail(alpha: f64, m: f64, n: usize, c: f64) -> Result<HoeffdingBound> {
    let min_n = hoeffding_min_n(alpha, m, c)?;
    check_n(n as f64)?;
    let nf = n as f64;
    if nf < min_n {
        return Err(Error::Precondition {
            message: format!("n = {n} below the validity threshold 4M/((1-alpha)c)"),
            min_n,
        });
    }
    let q = 1.0 - alpha;
    let t = nf * c - 2.0 * m / q;
    let raw = 2.0 * (-(q * q) / (m * m) * t * t / (8.0 * nf)).exp();
    Ok(HoeffdingBound { raw, clamped: raw.clamp(0.0, 1.0) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExistenceVariant {
    Chain,
    Pushback,
    ChainCoro45,
    PushbackCoro45,
}

impl fmt::Display for ExistenceVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExistenceVariant::Chain => "chain",
            ExistenceVariant::Pushback => "pushback",
            ExistenceVariant::ChainCoro45 => "chain-coro45",
            ExistenceVariant::PushbackCoro45 => "pushback-coro45",
        })
    }
}

impl FromStr for ExistenceVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "chain" => Ok(ExistenceVariant::Chain),
            "pushback" => Ok(ExistenceVariant::Pushback),
            "chain-coro45" => Ok(ExistenceVariant::ChainCoro45),
            "pushback-coro45" => Ok(ExistenceVariant::PushbackCoro45),
            other => Err(Error::Parse(format!("unknown existence variant `{other}`"))),
        }
    }
}

/// Inputs shared by the existence bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub alpha: f64,
    pub m: f64,
    pub n: usize,
    pub delta: f64,
    pub cardinality: f64,
    pub d: usize,
    /// Stand-in for the non-explicit absolute constant; defaults to 1.
    pub c: f64,
}

impl Default for BoundInputs {
    fn default() -> Self {
        Self { alpha: 0.0, m: 1.0, n: 1, delta: 1.0, cardinality: 1.0, d: 1, c: 1.0 }
    }
}

/// Existence bounds:
///
/// * `chain`: `8M/(1-alpha) sqrt(ln|Γ|/n) + δ`
/// * `pushback`: `chain` plus one gap term
/// * `chain-coro45`: `8M/(1-alpha) sqrt(d ln(3 + 4c²n)/n) + sqrt(d/n) + 2 gap`
/// * `pushback-coro45`: as above with a single gap term
pub fn existence_bound(b: &BoundInputs, variant: ExistenceVariant) -> Result<f64> {
    check_chain(b.alpha, b.m)?;
    check_n(b.n as f64)?;
    let n = b.n as f64;
    let lead = 8.0 * b.m / (1.0 - b.alpha);
    let gap = gap_bound(b.alpha, b.m, b.n)?;
    match variant {
        ExistenceVariant::Chain | ExistenceVariant::Pushback => {
            if !(b.cardinality >= 1.0) {
                return Err(Error::Domain(format!("cover cardinality {} below 1", b.cardinality)));
            }
            if !(b.delta > 0.0 && b.delta <= 1.0) {
                return Err(Error::Domain(format!("delta = {} outside (0, 1]", b.delta)));
            }
            let base = lead * (b.cardinality.ln() / n).sqrt() + b.delta;
            Ok(if variant == ExistenceVariant::Pushback { base + gap } else { base })
        }
        ExistenceVariant::ChainCoro45 | ExistenceVariant::PushbackCoro45 => {
            if b.d == 0 || !(b.c > 0.0) {
                return Err(Error::Domain(format!("need d >= 1 and c > 0, got d={}, c={}", b.d, b.c)));
            }
            let d = b.d as f64;
            let base = lead * (d * (3.0 + 4.0 * b.c * b.c * n).ln() / n).sqrt() + (d / n).sqrt();
            let gaps = if variant == ExistenceVariant::ChainCoro45 { 2.0 } else { 1.0 };
            Ok(base + gaps * gap)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardinalityBound {
    pub value: f64,
    /// True when the value overflowed to `+inf`.
    pub overflow: bool,
}

/// `(3 + 4 c² d δ^{-2})^d`.
pub fn cover_cardinality_bound(d: usize, delta: f64, c: f64) -> Result<CardinalityBound> {
    if d == 0 || !(delta > 0.0) || !(c > 0.0) {
        return Err(Error::Domain(format!("need d >= 1, delta > 0, c > 0 (got {d}, {delta}, {c})")));
    }
    let base = 3.0 + 4.0 * c * c * d as f64 / (delta * delta);
    let value = base.powi(d as i32);
    Ok(CardinalityBound { value, overflow: value.is_infinite() })
}

/// `(D + gap) ||f||`.
pub fn koksma_hlawka_budget(d_pushback: f64, alpha: f64, m: f64, n: usize, h1_norm: f64) -> Result<f64> {
    if !(d_pushback >= 0.0 && h1_norm >= 0.0) {
        return Err(Error::Domain("discrepancy and norm must be nonnegative".into()));
    }
    Ok((d_pushback + gap_bound(alpha, m, n)?) * h1_norm)
}

/// Upper cap-discrepancy budget `c (sqrt d + sqrt((d+1) ln n)) / sqrt n` and
/// the lower rate `n^{-1/2 - 1/(2d)}`.
pub fn sphere_bounds(n: f64, d: usize, c: f64) -> Result<(f64, f64)> {
    if !(n >= 2.0) || d == 0 || !(c > 0.0) {
        return Err(Error::Domain(format!("need n >= 2, d >= 1, c > 0 (got {n}, {d}, {c})")));
    }
    let df = d as f64;
    let upper = c * (df.sqrt() + ((df + 1.0) * n.ln()).sqrt()) / n.sqrt();
    let lower = n.powf(-0.5 - 0.5 / df);
    Ok((upper, lower))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_examples() {
        assert_eq!(gap_bound(0.0, 3.0, 10).unwrap(), 0.0);
        assert!((gap_bound(0.5, 2.0, 100).unwrap() - 0.02).abs() < 1e-17);
        assert!((gap_bound(0.25, 1.0, 1000).unwrap() - 1.0 / 3000.0).abs() < 1e-18);
        assert!(matches!(gap_bound(1.0, 1.0, 10), Err(Error::Domain(_))));
    }

    #[test]
    fn hoeffding_examples() {
        let h = hoeffding_tail(0.0, 1.0, 100, 0.5).unwrap();
        assert!((h.raw - 2.0 * (-2.88f64).exp()).abs() < 1e-15);
        let edge = hoeffding_tail(0.0, 1.0, 8, 0.5).unwrap();
        assert!((edge.raw - 2.0 * (-1.0f64 / 16.0).exp()).abs() < 1e-15);
        assert!(edge.raw > 1.0 && edge.clamped == 1.0);
    }

    #[test]
    fn hoeffding_precondition_names_min_n() {
        match hoeffding_tail(0.25, 1.0, 21, 0.25) {
            Err(Error::Precondition { min_n, .. }) => assert!((min_n - 64.0 / 3.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hoeffding_is_nonincreasing_past_threshold() {
        let mut last = f64::INFINITY;
        for n in 22..2000 {
            let h = hoeffding_tail(0.25, 1.0, n, 0.25).unwrap().raw;
            assert!(h <= last);
            last = h;
        }
    }

    #[test]
    fn existence_examples() {
        let b = BoundInputs { n: 256, delta: 1.0 / 16.0, cardinality: 16.0, ..Default::default() };
        let chain = existence_bound(&b, ExistenceVariant::Chain).unwrap();
        assert!((chain - (8.0 * (16f64.ln() / 256.0).sqrt() + 0.0625)).abs() < 1e-15);
        assert_eq!(existence_bound(&b, ExistenceVariant::Pushback).unwrap(), chain);
        let c = BoundInputs { n: 100, ..Default::default() };
        let v = existence_bound(&c, ExistenceVariant::ChainCoro45).unwrap();
        assert!((v - (8.0 * (403f64.ln() / 100.0).sqrt() + 0.1)).abs() < 1e-15);
        let bad = BoundInputs { cardinality: 0.5, ..b };
        assert!(matches!(existence_bound(&bad, ExistenceVariant::Chain), Err(Error::Domain(_))));
    }

    #[test]
    fn cardinality_examples() {
        assert_eq!(cover_cardinality_bound(1, 1.0, 1.0).unwrap().value, 7.0);
        assert_eq!(cover_cardinality_bound(2, 0.5, 1.0).unwrap().value, 1225.0);
        let huge = cover_cardinality_bound(400, 1e-10, 1.0).unwrap();
        assert!(huge.overflow);
        let mut last = f64::INFINITY;
        for k in 1..100 {
            let v = cover_cardinality_bound(2, k as f64 / 100.0, 1.0).unwrap().value;
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn koksma_hlawka_examples() {
        assert_eq!(koksma_hlawka_budget(0.25, 0.0, 1.0, 10, 2.0).unwrap(), 0.5);
        assert_eq!(koksma_hlawka_budget(0.25, 0.5, 1.0, 10, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn sphere_examples() {
        let (u, _) = sphere_bounds(std::f64::consts::E, 2, 1.0).unwrap();
        assert!((u - (2f64.sqrt() + 3f64.sqrt()) / std::f64::consts::E.sqrt()).abs() < 1e-15);
        assert!((sphere_bounds(100.0, 1, 1.0).unwrap().1 - 0.01).abs() < 1e-17);
        assert!((sphere_bounds(1e4, 2, 1.0).unwrap().1 - 1e-3).abs() < 1e-17);
    }
}
