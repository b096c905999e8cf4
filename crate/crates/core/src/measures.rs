//! Target probability measures on `G ⊆ R^d`.
//!
//! Every measure exposes a CDF oracle over anchored boxes `(-inf, x) ∩ G`
//! with extended-real anchors, a deterministic generator pushing the uniform
//! law on `[0,1]^s` onto the measure, and (optionally) an unnormalized density.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::points::ExtReal;
use crate::quad::adaptive_simpson;
use crate::special::beta_reg_inv;

/// Absolute tolerance of quadrature-backed CDFs.
pub const CDF_TOLERANCE: f64 = 1e-10;

const TABLE_CELLS: usize = 256;
const CELL_TOL: f64 = 1e-14;

/// State-space descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    UnitCube,
    /// `[lo, hi]^d`
    AxisBox {
        lo: f64,
        hi: f64,
    },
    /// Euclidean ball of the given radius centred at the origin.
    Ball {
        radius: f64,
    },
}

impl Support {
    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            Support::UnitCube => x.iter().all(|&v| (0.0..=1.0).contains(&v)),
            Support::AxisBox { lo, hi } => x.iter().all(|&v| (lo..=hi).contains(&v)),
            Support::Ball { radius } => x.iter().map(|v| v * v).sum::<f64>() <= radius * radius,
        }
    }

    /// Lebesgue volume of the support in dimension `d`.
    pub fn volume(&self, d: usize) -> f64 {
        match *self {
            Support::UnitCube => 1.0,
            Support::AxisBox { lo, hi } => (hi - lo).powi(d as i32),
            Support::Ball { radius } => {
                let half = d as f64 / 2.0;
                PI.powf(half) / statrs::function::gamma::gamma(half + 1.0) * radius.powi(d as i32)
            }
        }
    }

    /// Uniform generator on the support: maps `[0,1]^d` onto `G`.
    pub fn uniform_point(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        match *self {
            Support::UnitCube => out.copy_from_slice(u),
            Support::AxisBox { lo, hi } => {
                for (o, &v) in out.iter_mut().zip(u) {
                    *o = lo + (hi - lo) * v;
                }
            }
            Support::Ball { radius } => {
                let d = u.len();
                let r = radius * u[0].powf(1.0 / d as f64);
                if d == 1 {
                    out[0] = radius * (2.0 * u[0] - 1.0);
                    return Ok(());
                }
                let dir = sphere_direction(&u[1..], d)?;
                for (o, v) in out.iter_mut().zip(dir) {
                    *o = r * v;
                }
            }
        }
        Ok(())
    }

    fn describe(&self) -> String {
        match *self {
            Support::UnitCube => "unit-cube".into(),
            Support::AxisBox { lo, hi } => format!("box[{lo},{hi}]"),
            Support::Ball { radius } => format!("ball(r={radius})"),
        }
    }
}

/// A positive density on `[0, 1]`, possibly unnormalized, with a tabulated CDF.
#[derive(Clone)]
pub struct Density1d {
    name: String,
    rho: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    rho_min: f64,
    rho_max: f64,
    mass: f64,
    /// `table[k] = ∫_0^{k/CELLS} rho`.
    table: Vec<f64>,
}

impl fmt::Debug for Density1d {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Density1d")
            .field("name", &self.name)
            .field("rho_min", &self.rho_min)
            .field("rho_max", &self.rho_max)
            .field("mass", &self.mass)
            .finish()
    }
}

impl Density1d {
    /// Builds a density from a closure with declared bounds.
    ///
    /// The total mass is computed by quadrature; when `declared_mass` is given
    /// it must agree with the quadrature to `1e-9`.
    pub fn new<F>(
        name: impl Into<String>,
        rho: F,
        rho_min: f64,
        rho_max: f64,
        declared_mass: Option<f64>,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let name = name.into();
        if !(rho_min > 0.0 && rho_max.is_finite() && rho_min <= rho_max) {
            return Err(Error::Parameter(format!(
                "density `{name}` needs 0 < rho_min <= rho_max < inf, got ({rho_min}, {rho_max})"
            )));
        }
        let slack = 1e-12 * rho_max;
        for k in 0..=1024 {
            let x = k as f64 / 1024.0;
            let v = rho(x);
            if !(v >= rho_min - slack && v <= rho_max + slack) {
                return Err(Error::Parameter(format!(
                    "density `{name}` takes value {v} at x={x}, outside declared [{rho_min}, {rho_max}]"
                )));
            }
        }
        let mut table = Vec::with_capacity(TABLE_CELLS + 1);
        table.push(0.0);
        let mut acc = 0.0;
        for k in 0..TABLE_CELLS {
            let a = k as f64 / TABLE_CELLS as f64;
            let b = (k + 1) as f64 / TABLE_CELLS as f64;
            acc += adaptive_simpson(&rho, a, b, CELL_TOL)?;
            table.push(acc);
        }
        let mass = acc;
        if let Some(m) = declared_mass {
            if (m - mass).abs() > 1e-9 {
                return Err(Error::Parameter(format!(
                    "declared mass {m} of `{name}` disagrees with quadrature {mass}"
                )));
            }
        }
        Ok(Self { name, rho: Arc::new(rho), rho_min, rho_max, mass, table })
    }

    /// `rho(x) = a + b x` on `[0, 1]`.
    pub fn linear(a: f64, b: f64) -> Result<Self> {
        let lo = a.min(a + b);
        let hi = a.max(a + b);
        Self::new(format!("linear({a},{b})"), move |x| a + b * x, lo, hi, Some(a + b / 2.0))
    }

    /// `rho(x) = exp(-lambda x)` on `[0, 1]`.
    pub fn exponential(lambda: f64) -> Result<Self> {
        let (lo, hi) = if lambda >= 0.0 { ((-lambda).exp(), 1.0) } else { (1.0, (-lambda).exp()) };
        let mass = if lambda == 0.0 { 1.0 } else { (1.0 - (-lambda).exp()) / lambda };
        Self::new(format!("exponential({lambda})"), move |x| (-lambda * x).exp(), lo, hi, Some(mass))
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(format!("constant({c})"), move |_| c, c, c, Some(c))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.rho)(x)
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.rho_min, self.rho_max)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Unnormalized integral `∫_0^x rho`, `x` clamped to `[0, 1]`.
    fn integral_to(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.mass;
        }
        let k = ((x * TABLE_CELLS as f64) as usize).min(TABLE_CELLS - 1);
        let a = k as f64 / TABLE_CELLS as f64;
        // Simpson on a sub-cell interval of a smooth density: an integrability
        // failure here would already have surfaced while building the table.
        self.table[k] + adaptive_simpson(&*self.rho, a, x, CELL_TOL).unwrap_or(f64::NAN)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        (self.integral_to(x) / self.mass).clamp(0.0, 1.0)
    }

    /// Inverse CDF by safeguarded Newton iteration inside the table cell.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let target = p * self.mass;
        let k = self.table.partition_point(|&v| v <= target).saturating_sub(1).min(TABLE_CELLS - 1);
        let mut lo = k as f64 / TABLE_CELLS as f64;
        let mut hi = (k + 1) as f64 / TABLE_CELLS as f64;
        let base = self.table[k];
        let cell_start = lo;
        let residual =
            |x: f64| base + adaptive_simpson(&*self.rho, cell_start, x, CELL_TOL).unwrap_or(f64::NAN) - target;
        let mut x = 0.5 * (lo + hi);
        for _ in 0..100 {
            let g = residual(x);
            if g > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            if g.abs() <= 1e-15 * self.mass || hi - lo <= 1e-16 {
                break;
            }
            let step = x - g / self.eval(x);
            x = if step > lo && step < hi { step } else { 0.5 * (lo + hi) };
        }
        x
    }
}

#[derive(Debug, Clone)]
enum MeasureKind {
    UniformCube,
    UniformBox {
        lo: f64,
        hi: f64,
    },
    UniformBall {
        radius: f64,
    },
    /// Product of one-dimensional densities on `[0,1]^d`.
    Density(Vec<Density1d>),
}

/// A target probability measure `pi` on `G ⊆ R^d`.
#[derive(Debug, Clone)]
pub struct TargetMeasure {
    dim: usize,
    kind: MeasureKind,
}

impl TargetMeasure {
    pub fn uniform_cube(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("dimension must be positive".into()));
        }
        Ok(Self { dim: d, kind: MeasureKind::UniformCube })
    }

    pub fn uniform_box(d: usize, lo: f64, hi: f64) -> Result<Self> {
        if d == 0 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Parameter(format!("invalid box [{lo}, {hi}]^{d}")));
        }
        Ok(Self { dim: d, kind: MeasureKind::UniformBox { lo, hi } })
    }

    pub fn uniform_ball(d: usize, radius: f64) -> Result<Self> {
        if d < 2 || !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Parameter(format!("invalid ball: d={d}, radius={radius}")));
        }
        Ok(Self { dim: d, kind: MeasureKind::UniformBall { radius } })
    }

    /// Product density on `[0,1]^d` with `d = factors.len() ∈ {1, 2}`.
    pub fn density(factors: Vec<Density1d>) -> Result<Self> {
        if !(1..=2).contains(&factors.len()) {
            return Err(Error::Capability(format!(
                "density-defined measures support d in {{1, 2}}, got {}",
                factors.len()
            )));
        }
        Ok(Self { dim: factors.len(), kind: MeasureKind::Density(factors) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Input dimension `s` of the generator.
    pub fn generator_dim(&self) -> usize {
        self.dim
    }

    pub fn support(&self) -> Support {
        match self.kind {
            MeasureKind::UniformCube | MeasureKind::Density(_) => Support::UnitCube,
            MeasureKind::UniformBox { lo, hi } => Support::AxisBox { lo, hi },
            MeasureKind::UniformBall { radius } => Support::Ball { radius },
        }
    }

    /// True when the measure is a product of one-dimensional marginals.
    pub fn is_product(&self) -> bool {
        !matches!(self.kind, MeasureKind::UniformBall { .. })
    }

    /// True when the measure is uniform on its support.
    pub fn is_uniform(&self) -> bool {
        !matches!(self.kind, MeasureKind::Density(_))
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            MeasureKind::UniformCube => format!("uniform-cube(d={})", self.dim),
            MeasureKind::UniformBox { .. } | MeasureKind::UniformBall { .. } => {
                format!("uniform-{}(d={})", self.support().describe(), self.dim)
            }
            MeasureKind::Density(f) => {
                let names: Vec<&str> = f.iter().map(Density1d::name).collect();
                format!("density[{}]", names.join("*"))
            }
        }
    }

    /// Marginal CDF of coordinate `j` for product measures.
    pub fn axis_cdf(&self, j: usize, x: f64) -> Option<f64> {
        match &self.kind {
            MeasureKind::UniformCube => Some(x.clamp(0.0, 1.0)),
            MeasureKind::UniformBox { lo, hi } => Some(((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
            MeasureKind::Density(f) => Some(f[j].cdf(x)),
            MeasureKind::UniformBall { .. } => None,
        }
    }

    /// Marginal quantile of coordinate `j` for product measures.
    pub fn axis_quantile(&self, j: usize, p: f64) -> Option<f64> {
        match &self.kind {
            MeasureKind::UniformCube => Some(p.clamp(0.0, 1.0)),
            MeasureKind::UniformBox { lo, hi } => Some(lo + (hi - lo) * p.clamp(0.0, 1.0)),
            MeasureKind::Density(f) => Some(f[j].quantile(p)),
            MeasureKind::UniformBall { .. } => None,
        }
    }

    /// `pi((-inf, anchor) ∩ G)`.
    pub fn cdf_box(&self, anchor: &[ExtReal]) -> Result<f64> {
        if anchor.len() != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: anchor.len() });
        }
        if anchor.iter().any(|a| a.is_neg_inf()) {
            return Ok(0.0);
        }
        if anchor.iter().all(|a| a.is_pos_inf()) {
            return Ok(1.0);
        }
        match &self.kind {
            MeasureKind::UniformBall { radius } => {
                if self.dim != 2 {
                    return Err(Error::Capability(format!("ball CDF available for d=2 only, got d={}", self.dim)));
                }
                Ok(disk_cdf(*radius, anchor[0].to_f64(), anchor[1].to_f64()))
            }
            _ => Ok(anchor.iter().enumerate().map(|(j, a)| self.axis_cdf(j, a.to_f64()).unwrap_or(f64::NAN)).product()),
        }
    }

    /// CDF at an `f64` anchor, with IEEE infinities standing for `±inf`.
    pub fn cdf_at(&self, anchor: &[f64]) -> Result<f64> {
        let ext: Vec<ExtReal> = anchor.iter().map(|&v| ExtReal::from(v)).collect();
        self.cdf_box(&ext)
    }

    /// Deterministic generator `psi(u)`.
    pub fn generate(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.generate_into(u, &mut out)?;
        Ok(out)
    }

    pub fn generate_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.generator_dim() {
            return Err(Error::Dimension { expected: self.generator_dim(), got: u.len() });
        }
        check_unit(u)?;
        match &self.kind {
            MeasureKind::Density(f) => {
                for ((o, &v), fj) in out.iter_mut().zip(u).zip(f) {
                    *o = fj.quantile(v);
                }
                Ok(())
            }
            _ => self.support().uniform_point(u, out),
        }
    }

    /// Unnormalized density, when the measure is density-defined.
    pub fn density_at(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            MeasureKind::Density(f) => Some(f.iter().zip(x).map(|(fj, &v)| fj.eval(v)).product()),
            _ => None,
        }
    }

    /// `(rho_min, rho_max, total mass)` for density-defined measures.
    pub fn density_bounds(&self) -> Option<(f64, f64, f64)> {
        match &self.kind {
            MeasureKind::Density(f) => Some(f.iter().fold((1.0, 1.0, 1.0), |acc, fj| {
                let (lo, hi) = fj.bounds();
                (acc.0 * lo, acc.1 * hi, acc.2 * fj.mass())
            })),
            _ => None,
        }
    }
}

fn check_unit(u: &[f64]) -> Result<()> {
    if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Domain(format!("driver value {v} outside [0, 1]")));
    }
    Ok(())
}

/// Uniform direction on `S^{d-1} ⊂ R^d` from `u ∈ [0,1]^{d-1}`.
///
/// `d = 2` uses the angle map `theta = 2 pi u`; `d = 3` the cylindrical map
/// `z = 1 - 2 u_1`, `phi = 2 pi u_2`. Higher `d` peel off the last coordinate
/// by inverting its Beta marginal and recurse on the remaining sphere.
pub fn sphere_direction(u: &[f64], d: usize) -> Result<Vec<f64>> {
    if d < 2 {
        return Err(Error::Domain(format!("sphere direction needs d >= 2, got {d}")));
    }
    if u.len() != d - 1 {
        return Err(Error::Dimension { expected: d - 1, got: u.len() });
    }
    check_unit(u)?;
    let mut out = vec![0.0; d];
    fill_direction(u, &mut out)?;
    Ok(out)
}

fn fill_direction(u: &[f64], out: &mut [f64]) -> Result<()> {
    let d = out.len();
    if d == 2 {
        let theta = 2.0 * PI * u[0];
        out[0] = theta.cos();
        out[1] = theta.sin();
        return Ok(());
    }
    let z = if d == 3 {
        1.0 - 2.0 * u[0]
    } else {
        let half = (d - 1) as f64 / 2.0;
        1.0 - 2.0 * beta_reg_inv(half, half, u[0])?
    };
    let ring = (1.0 - z * z).max(0.0).sqrt();
    fill_direction(&u[1..], &mut out[..d - 1])?;
    for v in &mut out[..d - 1] {
        *v *= ring;
    }
    out[d - 1] = z;
    Ok(())
}

/// Area of `{|y| <= r} ∩ {y1 < a, y2 < b}` divided by the disk area.
fn disk_cdf(r: f64, a: f64, b: f64) -> f64 {
    // antiderivative of h(y) = sqrt(r^2 - y^2)
    let big_h = |y: f64| {
        let y = y.clamp(-r, r);
        0.5 * (y * (r * r - y * y).max(0.0).sqrt() + r * r * (y / r).clamp(-1.0, 1.0).asin())
    };
    let int_h = |lo: f64, hi: f64| if hi > lo { big_h(hi) - big_h(lo) } else { 0.0 };
    let top = a.min(r);
    if top <= -r || b <= -r {
        return 0.0;
    }
    let total_h = int_h(-r, top);
    let clamp_part = if b >= r {
        total_h
    } else {
        let w = (r * r - b * b).sqrt();
        let inner = (top.min(w) - (-w)).max(0.0);
        let outer = int_h(-r, top.min(-w)) + int_h(w, top);
        b * inner + b.signum() * outer
    };
    ((total_h + clamp_part) / (PI * r * r)).clamp(0.0, 1.0)
}
