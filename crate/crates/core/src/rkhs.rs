//! The spaces `H_q` of functions `f(x) = f0 + ∫_G 1{x < z} f̃(z) ρ(dz)`,
//! their norms, integration errors and Koksma–Hlawka checks.
//!
//! In one dimension `G` is the support interval `[a, b]`, `ρ` is Lebesgue
//! measure, `f0 = f(b)` and `f̃ = -f'`. Two-dimensional functions are products
//! `g(x) h(y)` on the unit square; there `ρ` is Lebesgue measure on the square
//! plus one-dimensional Lebesgue measure on each of the faces `z_1 = +inf` and
//! `z_2 = +inf`, which carry the terms where only one coordinate is constrained.

use std::fmt;
use std::sync::Arc;

use crate::discrepancy::{star_discrepancy_d1, star_discrepancy_exact};
use crate::error::{Error, Result};
use crate::measures::{Support, TargetMeasure};
use crate::points::PointSet;
use crate::quad::{adaptive_simpson, piecewise_simpson};

/// Quadrature tolerance for norms and integrals.
pub const QUAD_TOLERANCE: f64 = 1e-10;
/// Tolerance for the dual identity.
pub const DUAL_TOLERANCE: f64 = 1e-8;
/// Grid used to approximate `sup |f̃|` for `q = inf`.
const SUP_GRID: usize = 20_001;

type Scalar = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Exponent of the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormOrder {
    One,
    Two,
    Infinity,
}

impl NormOrder {
    /// The dual exponent `p` with `1/p + 1/q = 1`.
    pub fn dual(self) -> NormOrder {
        match self {
            NormOrder::One => NormOrder::Infinity,
            NormOrder::Two => NormOrder::Two,
            NormOrder::Infinity => NormOrder::One,
        }
    }
}

impl fmt::Display for NormOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormOrder::One => "1",
            NormOrder::Two => "2",
            NormOrder::Infinity => "inf",
        })
    }
}

impl std::str::FromStr for NormOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(NormOrder::One),
            "2" => Ok(NormOrder::Two),
            "inf" | "infinity" => Ok(NormOrder::Infinity),
            other => Err(Error::Parse(format!("unknown norm order `{other}`"))),
        }
    }
}

/// A one-dimensional function given with its derivative.
#[derive(Clone)]
pub struct Function1d {
    tag: String,
    f: Scalar,
    df: Scalar,
}

impl fmt::Debug for Function1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Function1d({})", self.tag)
    }
}

impl Function1d {
    pub fn new<F, D>(tag: impl Into<String>, f: F, df: D) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { tag: tag.into(), f: Arc::new(f), df: Arc::new(df) }
    }

    /// `Σ_k c_k x^k`.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        let c = coeffs.to_vec();
        let dc: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect();
        let horner = |c: &[f64], x: f64| c.iter().rev().fold(0.0, |acc, &v| acc * x + v);
        let names: Vec<String> = coeffs.iter().map(|v| format!("{v}")).collect();
        Self::new(format!("poly[{}]", names.join(";")), move |x| horner(&c, x), move |x| horner(&dc, x))
    }

    /// `a e^{b x}`.
    pub fn exponential(a: f64, b: f64) -> Self {
        Self::new(format!("exp[{a};{b}]"), move |x| a * (b * x).exp(), move |x| a * b * (b * x).exp())
    }

    pub fn constant(a: f64) -> Self {
        Self::new(format!("const[{a}]"), move |_| a, |_| 0.0)
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

#[derive(Debug, Clone)]
enum Shape {
    Line(Function1d),
    Product(Function1d, Function1d),
}

/// Element of `H_q` with its representation `(f0, f̃)`.
#[derive(Debug, Clone)]
pub struct H1Function {
    shape: Shape,
    q: NormOrder,
}

impl H1Function {
    pub fn line(f: Function1d, q: NormOrder) -> Self {
        Self { shape: Shape::Line(f), q }
    }

    /// `g(x) h(y)` on the unit square.
    pub fn product(g: Function1d, h: Function1d, q: NormOrder) -> Self {
        Self { shape: Shape::Product(g, h), q }
    }

    pub fn order(&self) -> NormOrder {
        self.q
    }

    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::Line(_) => 1,
            Shape::Product(..) => 2,
        }
    }

    pub fn tag(&self) -> String {
        match &self.shape {
            Shape::Line(f) => f.tag().to_string(),
            Shape::Product(g, h) => format!("{}*{}", g.tag(), h.tag()),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.shape {
            Shape::Line(f) => f.eval(x[0]),
            Shape::Product(g, h) => g.eval(x[0]) * h.eval(x[1]),
        }
    }
}

fn interval(measure: &TargetMeasure) -> Result<(f64, f64)> {
    if !measure.is_product() {
        return Err(Error::Capability("H_q functions need a product target on a box".into()));
    }
    Ok(match measure.support() {
        Support::UnitCube => (0.0, 1.0),
        Support::AxisBox { lo, hi } => (lo, hi),
        Support::Ball { .. } => unreachable!(),
    })
}

fn check_dim(f: &H1Function, measure: &TargetMeasure) -> Result<()> {
    if f.dim() != measure.dim() {
        return Err(Error::Dimension { expected: f.dim(), got: measure.dim() });
    }
    if f.dim() == 2 && !(measure.is_uniform() && matches!(measure.support(), Support::UnitCube)) {
        return Err(Error::Capability("two-dimensional functions need the uniform unit square".into()));
    }
    Ok(())
}

/// `(|f(b)|^q + ∫_a^b |f'|^q)^{1/q}`, or `max(|f(b)|, sup |f'|)` for `q = inf`.
fn line_norm(f: &Function1d, a: f64, b: f64, q: NormOrder) -> Result<f64> {
    let f0 = f.eval(b).abs();
    let v = match q {
        NormOrder::One => f0 + adaptive_simpson(|z| f.derivative(z).abs(), a, b, QUAD_TOLERANCE)?,
        NormOrder::Two => (f0 * f0 + adaptive_simpson(|z| f.derivative(z).powi(2), a, b, QUAD_TOLERANCE)?).sqrt(),
        NormOrder::Infinity => {
            (0..SUP_GRID).map(|k| f.derivative(a + (b - a) * k as f64 / (SUP_GRID - 1) as f64).abs()).fold(f0, f64::max)
        }
    };
    if !v.is_finite() {
        return Err(Error::Integrability(format!("norm of {} is not finite", f.tag())));
    }
    Ok(v)
}

/// `||f||_{H_q}` with `ρ` Lebesgue on `G = [0, 1]^d` (or the support interval).
///
/// For products the norm factorises: `||g ⊗ h|| = ||g|| ||h||`.
pub fn h_norm(f: &H1Function, q: NormOrder) -> Result<f64> {
    match &f.shape {
        Shape::Line(g) => line_norm(g, 0.0, 1.0, q),
        Shape::Product(g, h) => Ok(line_norm(g, 0.0, 1.0, q)? * line_norm(h, 0.0, 1.0, q)?),
    }
}

/// `h_norm` on the support interval of a one-dimensional target.
pub fn h_norm_on(f: &H1Function, q: NormOrder, measure: &TargetMeasure) -> Result<f64> {
    check_dim(f, measure)?;
    match &f.shape {
        Shape::Line(g) => {
            let (a, b) = interval(measure)?;
            line_norm(g, a, b, q)
        }
        Shape::Product(..) => h_norm(f, q),
    }
}

/// `∫ g dπ` for a one-dimensional target.
fn expectation_1d(g: &dyn Fn(f64) -> f64, measure: &TargetMeasure) -> Result<f64> {
    let (a, b) = interval(measure)?;
    match measure.density_bounds() {
        Some((_, _, mass)) => {
            let rho = |x: f64| measure.density_at(&[x]).unwrap_or(0.0);
            Ok(adaptive_simpson(|x| g(x) * rho(x), a, b, QUAD_TOLERANCE)? / mass)
        }
        None => Ok(adaptive_simpson(g, a, b, QUAD_TOLERANCE)? / (b - a)),
    }
}

/// `e(f, P) = ∫ f dπ - (1/n) Σ f(x_i)`.
pub fn integration_error(f: &H1Function, points: &PointSet, measure: &TargetMeasure) -> Result<f64> {
    check_dim(f, measure)?;
    if points.dim() != f.dim() {
        return Err(Error::Dimension { expected: f.dim(), got: points.dim() });
    }
    if points.is_empty() {
        return Err(Error::Parameter("integration error needs n >= 1".into()));
    }
    let n = points.len() as f64;
    let mean = points.rows().map(|x| f.eval(x)).sum::<f64>() / n;
    let integral = match &f.shape {
        Shape::Line(g) => expectation_1d(&|x| g.eval(x), measure)?,
        Shape::Product(g, h) => {
            adaptive_simpson(|x| g.eval(x), 0.0, 1.0, QUAD_TOLERANCE)?
                * adaptive_simpson(|y| h.eval(y), 0.0, 1.0, QUAD_TOLERANCE)?
        }
    };
    Ok(integral - mean)
}

/// `h̃(z) = π((-inf, z)) - (1/n) #{x_i < z}` in one dimension.
fn profile_1d(values: &[f64], measure: &TargetMeasure, z: f64) -> f64 {
    let below = values.iter().filter(|&&x| x < z).count() as f64;
    measure.axis_cdf(0, z).unwrap_or(f64::NAN) - below / values.len() as f64
}

/// `(∫_G |h̃|^2 dρ)^{1/2}` in one dimension.
fn l2_profile_1d(values: &[f64], measure: &TargetMeasure) -> Result<f64> {
    let (a, b) = interval(measure)?;
    let sq = piecewise_simpson(|z| profile_1d(values, measure, z).powi(2), a, b, values, QUAD_TOLERANCE * 1e-2)?;
    Ok(sq.max(0.0).sqrt())
}

/// `∫_G f̃ h̃ dρ` in one dimension.
fn dual_1d(g: &Function1d, values: &[f64], measure: &TargetMeasure) -> Result<f64> {
    let (a, b) = interval(measure)?;
    piecewise_simpson(|z| -g.derivative(z) * profile_1d(values, measure, z), a, b, values, QUAD_TOLERANCE)
}

/// Closed-form `∫∫ g'(z1) h'(z2) h̃(z1, z2)` over the unit square: on each
/// grid cell the count is constant and `h̃ = z1 z2 - c/n` separates.
fn dual_square(g: &Function1d, h: &Function1d, points: &PointSet) -> Result<f64> {
    let mut xs: Vec<f64> = points.column(0);
    let mut ys: Vec<f64> = points.column(1);
    let edges = |v: &mut Vec<f64>| {
        v.push(0.0);
        v.push(1.0);
        v.retain(|x| (0.0..=1.0).contains(x));
        v.sort_by(f64::total_cmp);
        v.dedup();
    };
    edges(&mut xs);
    edges(&mut ys);
    let moments = |f: &Function1d, e: &[f64]| -> Result<Vec<(f64, f64)>> {
        e.windows(2)
            .map(|w| {
                Ok((
                    adaptive_simpson(|z| f.derivative(z) * z, w[0], w[1], QUAD_TOLERANCE * 1e-2)?,
                    f.eval(w[1]) - f.eval(w[0]),
                ))
            })
            .collect()
    };
    let mx = moments(g, &xs)?;
    let my = moments(h, &ys)?;
    let n = points.len() as f64;
    let mut total = 0.0;
    for (i, w) in xs.windows(2).enumerate() {
        for (j, v) in ys.windows(2).enumerate() {
            let c = points.rows().filter(|p| p[0] <= w[0] && p[1] <= v[0]).count() as f64;
            total += mx[i].0 * my[j].0 - c / n * mx[i].1 * my[j].1;
        }
    }
    Ok(total)
}

/// Norm of the discrepancy profile `h̃` in `L_p(ρ)`.
pub fn profile_norm(points: &PointSet, p: NormOrder, measure: &TargetMeasure) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Parameter("discrepancy needs n >= 1".into()));
    }
    match (measure.dim(), p) {
        (1, NormOrder::Infinity) => star_discrepancy_d1(points.as_flat(), measure),
        (1, NormOrder::Two) => l2_profile_1d(points.as_flat(), measure),
        (2, NormOrder::Infinity) => Ok(star_discrepancy_exact(points, measure)?.upper),
        (2, NormOrder::Two) => {
            // interior square plus the two faces at +inf
            let unit = TargetMeasure::uniform_cube(1)?;
            let square = crate::discrepancy::lp_discrepancy(points, crate::discrepancy::LpOrder::Two, measure)?;
            let fx = l2_profile_1d(&points.column(0), &unit)?;
            let fy = l2_profile_1d(&points.column(1), &unit)?;
            Ok((square * square + fx * fx + fy * fy).sqrt())
        }
        (d, p) => Err(Error::Capability(format!("profile norm p={p} not available in d={d}"))),
    }
}

/// `∫ f̃ h̃ dρ`, which equals `e(f, P)`.
pub fn dual_form(f: &H1Function, points: &PointSet, measure: &TargetMeasure) -> Result<f64> {
    check_dim(f, measure)?;
    match &f.shape {
        Shape::Line(g) => dual_1d(g, points.as_flat(), measure),
        Shape::Product(g, h) => {
            let unit = TargetMeasure::uniform_cube(1)?;
            let interior = dual_square(g, h, points)?;
            // face z1 = +inf: f̃ = -g(1) h'(z2); face z2 = +inf: f̃ = -h(1) g'(z1)
            let face_y = g.eval(1.0) * dual_1d(h, &points.column(1), &unit)?;
            let face_x = h.eval(1.0) * dual_1d(g, &points.column(0), &unit)?;
            Ok(interior + face_x + face_y)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KhReport {
    pub tag: String,
    pub n: usize,
    pub p: NormOrder,
    pub error: f64,
    pub norm: f64,
    pub discrepancy: f64,
    pub budget: f64,
    pub holds: bool,
    /// `|e(f, P) - ∫ f̃ h̃ dρ|`.
    pub dual_residual: f64,
}

pub const KH_HEADER: &str = "f_tag,n,p,error,norm,discrepancy,budget,holds";

impl KhReport {
    pub fn csv_row(&self) -> String {
        use crate::csv::fmt17;
        format!(
            "{},{},{},{},{},{},{},{}",
            self.tag,
            self.n,
            self.p,
            fmt17(self.error),
            fmt17(self.norm),
            fmt17(self.discrepancy),
            fmt17(self.budget),
            self.holds
        )
    }
}

/// Checks `|e(f, P)| <= ||f||_{H_q} D_p(P)` and the dual identity.
///
/// A violated inequality or identity is an implementation fault and is
/// returned as a certificate failure.
pub fn kh_check(f: &H1Function, points: &PointSet, measure: &TargetMeasure, p: NormOrder) -> Result<KhReport> {
    if !matches!(p, NormOrder::Infinity | NormOrder::Two) {
        return Err(Error::Parameter("kh_check supports p = inf and p = 2".into()));
    }
    if f.order() != p.dual() {
        return Err(Error::Parameter(format!("need 1/p + 1/q = 1, got p={p}, q={}", f.order())));
    }
    let error = integration_error(f, points, measure)?;
    let norm = h_norm_on(f, f.order(), measure)?;
    let discrepancy = profile_norm(points, p, measure)?;
    let dual = dual_form(f, points, measure)?;
    let budget = norm * discrepancy;
    let slack = 1e-9 * (1.0 + budget);
    let holds = error.abs() <= budget + slack;
    let report = KhReport {
        tag: f.tag(),
        n: points.len(),
        p,
        error,
        norm,
        discrepancy,
        budget,
        holds,
        dual_residual: (error - dual).abs(),
    };
    if !holds {
        return Err(Error::CertificateFailure(format!("|e| = {} exceeds budget {budget}", error.abs())));
    }
    if report.dual_residual > DUAL_TOLERANCE {
        return Err(Error::CertificateFailure(format!("dual identity off by {}", report.dual_residual)));
    }
    Ok(report)
}

/// `Q(x, y) = 1 + min(1 - x, 1 - y)`.
pub fn kernel(x: f64, y: f64) -> f64 {
    1.0 + (1.0 - x).min(1.0 - y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit() -> TargetMeasure {
        TargetMeasure::uniform_cube(1).unwrap()
    }

    #[test]
    fn norm_examples() {
        let x = H1Function::line(Function1d::polynomial(&[0.0, 1.0]), NormOrder::One);
        assert!((h_norm(&x, NormOrder::One).unwrap() - 2.0).abs() < 1e-12);
        let c = Function1d::constant(-3.0);
        for q in [NormOrder::One, NormOrder::Two, NormOrder::Infinity] {
            assert!((h_norm(&H1Function::line(c.clone(), q), q).unwrap() - 3.0).abs() < 1e-12);
        }
        let e = H1Function::line(Function1d::exponential(1.0, 1.0), NormOrder::One);
        let want = 2.0 * std::f64::consts::E - 1.0;
        assert!((h_norm(&e, NormOrder::One).unwrap() - want).abs() < 1e-10);
    }

    #[test]
    fn representation_is_consistent() {
        let f = Function1d::polynomial(&[0.3, -1.0, 2.0, 0.5]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let x: f64 = rng.random();
            let rep = f.eval(1.0) + adaptive_simpson(|z| -f.derivative(z), x, 1.0, 1e-12).unwrap();
            assert!((rep - f.eval(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn integration_error_examples() {
        let m = unit();
        let half = PointSet::from_values(&[0.5]);
        let c = H1Function::line(Function1d::constant(2.0), NormOrder::One);
        assert!(integration_error(&c, &half, &m).unwrap().abs() < 1e-14);
        let x = H1Function::line(Function1d::polynomial(&[0.0, 1.0]), NormOrder::One);
        assert!(integration_error(&x, &half, &m).unwrap().abs() < 1e-14);
        let sq = H1Function::line(Function1d::polynomial(&[0.0, 0.0, 1.0]), NormOrder::One);
        assert!((integration_error(&sq, &half, &m).unwrap() - 1.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn worked_koksma_hlawka_case() {
        let sq = H1Function::line(Function1d::polynomial(&[0.0, 0.0, 1.0]), NormOrder::One);
        let r = kh_check(&sq, &PointSet::from_values(&[0.5]), &unit(), NormOrder::Infinity).unwrap();
        assert!((r.error - 1.0 / 12.0).abs() < 1e-12);
        assert!((r.budget - 1.0).abs() < 1e-10);
        assert!(r.holds);
        assert!(r.csv_row().ends_with(",true"));
    }

    #[test]
    fn l2_profile_matches_warnock() {
        let m = unit();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [1usize, 5, 17] {
            let v: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let p = PointSet::from_values(&v);
            let w = crate::discrepancy::lp_discrepancy(&p, crate::discrepancy::LpOrder::Two, &m).unwrap();
            assert!((profile_norm(&p, NormOrder::Two, &m).unwrap() - w).abs() < 1e-9);
        }
    }

    #[test]
    fn non_uniform_target() {
        let m = TargetMeasure::density(vec![crate::measures::Density1d::linear(2.0, -1.0).unwrap()]).unwrap();
        let f = H1Function::line(Function1d::exponential(0.5, 1.3), NormOrder::One);
        let p = PointSet::from_values(&[0.1, 0.35, 0.6, 0.9]);
        let r = kh_check(&f, &p, &m, NormOrder::Infinity).unwrap();
        assert!(r.dual_residual < 1e-9);
    }

    #[test]
    fn product_functions() {
        let m = TargetMeasure::uniform_cube(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let rows: Vec<[f64; 2]> = (0..12).map(|_| [rng.random(), rng.random()]).collect();
            let p = PointSet::from_rows(2, &rows).unwrap();
            let g = Function1d::polynomial(&[rng.random(), rng.random_range(-1.0..1.0), rng.random()]);
            let h = Function1d::exponential(rng.random(), rng.random_range(-1.0..1.0));
            for (q, pp) in [(NormOrder::One, NormOrder::Infinity), (NormOrder::Two, NormOrder::Two)] {
                let f = H1Function::product(g.clone(), h.clone(), q);
                let r = kh_check(&f, &p, &m, pp).unwrap();
                assert!(r.holds && r.dual_residual < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn order_mismatch_is_rejected() {
        let f = H1Function::line(Function1d::constant(1.0), NormOrder::Two);
        assert!(kh_check(&f, &PointSet::from_values(&[0.5]), &unit(), NormOrder::Infinity).is_err());
    }

    proptest! {
        #[test]
        fn kernel_is_positive_semidefinite(
            xs in prop::collection::vec(0.0f64..=1.0, 1..12),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let b: Vec<f64> = xs.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut form = 0.0;
            for (k, &x) in xs.iter().enumerate() {
                for (l, &y) in xs.iter().enumerate() {
                    form += b[k] * b[l] * kernel(x, y);
                }
            }
            prop_assert!(form >= -1e-12);
        }

        #[test]
        fn dual_identity_on_polynomials(
            coeffs in prop::collection::vec(-2.0f64..2.0, 1..5),
            xs in prop::collection::vec(0.0f64..1.0, 1..20),
        ) {
            let f = H1Function::line(Function1d::polynomial(&coeffs), NormOrder::Two);
            let r = kh_check(&f, &PointSet::from_values(&xs), &unit(), NormOrder::Two).unwrap();
            prop_assert!(r.dual_residual < DUAL_TOLERANCE);
        }
    }
}
