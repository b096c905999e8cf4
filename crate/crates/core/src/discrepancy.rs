//! Local, star, push-back and L_p discrepancies, and the kernel-power oracle.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, LazyLock, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bounds::gap_bound;
use crate::chains::{final_state, iterate_flat, ChainModel};
use crate::covers::DeltaCover;
use crate::csv::{fmt17, fmt_opt};
use crate::drivers::DriverSequence;
use crate::error::{Error, Result};
use crate::measures::TargetMeasure;
use crate::points::{ExtReal, PointSet};

/// Largest point count accepted by the exact sweep.
pub const SWEEP_MAX_POINTS: usize = 4096;
/// Largest number of grid cells (and cover tuples) held in memory.
pub const GRID_MAX_CELLS: usize = 1 << 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    AnchoredBox,
    SphericalCap,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::AnchoredBox => "anchored-box",
            Family::SphericalCap => "spherical-cap",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactSweep,
    CoverBracket,
    FormulaD1,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::ExactSweep => "exact-sweep",
            Method::CoverBracket => "cover-bracket",
            Method::FormulaD1 => "formula-d1",
        })
    }
}

/// A discrepancy value or bracket.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscrepancyReport {
    pub family: Family,
    pub n: usize,
    pub method: Method,
    pub lower: f64,
    pub upper: f64,
    /// Cover gap; zero for exact methods.
    pub delta: f64,
    pub alpha: Option<f64>,
    pub m: Option<f64>,
    pub bound_gap: Option<f64>,
    /// Largest Monte Carlo standard error of a kernel estimate; zero when exact.
    pub mc_se: f64,
    /// `max_A |(1/n) Σ_i K^i(x0, A) - pi(A)|` over the evaluated sets (push-back only).
    pub kernel_bias: Option<f64>,
    pub measure: String,
}

pub const REPORT_HEADER: &str = "family,n,method,lower,upper,delta,alpha,M,bound_gap";

impl DiscrepancyReport {
    fn exact(family: Family, n: usize, method: Method, value: f64, measure: String) -> Self {
        Self {
            family,
            n,
            method,
            lower: value,
            upper: value,
            delta: 0.0,
            alpha: None,
            m: None,
            bound_gap: None,
            mc_se: 0.0,
            kernel_bias: None,
            measure,
        }
    }

    pub(crate) fn bracket(family: Family, n: usize, lower: f64, delta: f64, measure: String) -> Self {
        Self {
            family,
            n,
            method: Method::CoverBracket,
            lower,
            upper: (lower + delta).min(1.0),
            delta,
            alpha: None,
            m: None,
            bound_gap: None,
            mc_se: 0.0,
            kernel_bias: None,
            measure,
        }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    pub fn is_exact(&self) -> bool {
        self.lower == self.upper
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.family,
            self.n,
            self.method,
            fmt17(self.lower),
            fmt17(self.upper),
            fmt17(self.delta),
            fmt_opt(self.alpha),
            fmt_opt(self.m),
            fmt_opt(self.bound_gap)
        )
    }
}

/// `(1/n) Σ 1{x_i ∈ A} - pi(A)` for `A = (-inf, anchor)`, or its closure when `closed`.
pub fn local_discrepancy(points: &PointSet, anchor: &[ExtReal], closed: bool, measure: &TargetMeasure) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::Parameter("local discrepancy needs n >= 1".into()));
    }
    if anchor.len() != points.dim() {
        return Err(Error::Dimension { expected: points.dim(), got: anchor.len() });
    }
    let inside = |x: &[f64]| x.iter().zip(anchor).all(|(&v, a)| if closed { a.at_or_above(v) } else { a.above(v) });
    let count = points.rows().filter(|x| inside(x)).count();
    Ok(count as f64 / points.len() as f64 - measure.cdf_box(anchor)?)
}

/// Closed-form star discrepancy in one dimension:
/// `max_i max(i/n - F(x_(i)), F(x_(i)) - (i-1)/n)`.
pub fn star_discrepancy_d1(values: &[f64], measure: &TargetMeasure) -> Result<f64> {
    if measure.dim() != 1 {
        return Err(Error::Dimension { expected: 1, got: measure.dim() });
    }
    if values.is_empty() {
        return Err(Error::Parameter("star discrepancy needs n >= 1".into()));
    }
    let mut x = values.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut sup = 0.0_f64;
    for (k, &v) in x.iter().enumerate() {
        let f = axis_value(measure, 0, v)?;
        let i = (k + 1) as f64;
        sup = sup.max(i / n - f).max(f - (i - 1.0) / n);
    }
    Ok(sup)
}

fn axis_value(measure: &TargetMeasure, j: usize, v: f64) -> Result<f64> {
    match measure.axis_cdf(j, v) {
        Some(f) => Ok(f),
        None => Err(Error::Capability("measure has no marginal CDF".into())),
    }
}

/// Exact star discrepancy: formula in `d = 1`, grid sweep for `d = 2, 3`.
pub fn star_discrepancy_exact(points: &PointSet, measure: &TargetMeasure) -> Result<DiscrepancyReport> {
    if points.dim() != measure.dim() {
        return Err(Error::Dimension { expected: measure.dim(), got: points.dim() });
    }
    if points.dim() == 1 {
        let v = star_discrepancy_d1(points.as_flat(), measure)?;
        return Ok(DiscrepancyReport::exact(
            Family::AnchoredBox,
            points.len(),
            Method::FormulaD1,
            v,
            measure.describe(),
        ));
    }
    let v = star_discrepancy_sweep(points, measure)?;
    Ok(DiscrepancyReport::exact(Family::AnchoredBox, points.len(), Method::ExactSweep, v, measure.describe()))
}

/// Cumulative counts over the grid spanned by the point coordinates.
struct Sweep {
    /// Per axis: sorted distinct coordinates followed by `+inf`.
    grids: Vec<Vec<f64>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    /// `closed[idx]` = number of points `p` with `p_j <= grid_j[idx_j]` for all `j`.
    closed: Vec<u32>,
}

impl Sweep {
    fn new(points: &PointSet) -> Result<Self> {
        let d = points.dim();
        let n = points.len();
        if n == 0 {
            return Err(Error::Parameter("star discrepancy needs n >= 1".into()));
        }
        if d > 3 || n > SWEEP_MAX_POINTS {
            return Err(Error::Budget(format!(
                "exact sweep limited to d <= 3 and n <= {SWEEP_MAX_POINTS} (got d={d}, n={n}); use the cover-bracket method"
            )));
        }
        let grids: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let mut g = points.column(j);
                g.sort_by(f64::total_cmp);
                g.dedup();
                g.push(f64::INFINITY);
                g
            })
            .collect();
        let shape: Vec<usize> = grids.iter().map(Vec::len).collect();
        let cells = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
        if cells > GRID_MAX_CELLS {
            return Err(Error::Budget(format!(
                "sweep grid of {cells} cells exceeds {GRID_MAX_CELLS}; use the cover-bracket method"
            )));
        }
        let strides = strides_of(&shape);
        let mut closed = vec![0u32; cells];
        for p in points.rows() {
            let mut flat = 0;
            for j in 0..d {
                flat += grids[j].partition_point(|&g| g < p[j]) * strides[j];
            }
            closed[flat] += 1;
        }
        prefix_sum(&mut closed, &shape, &strides);
        Ok(Self { grids, shape, strides, closed })
    }

    /// Largest `max(C/n - F, F - O/n)` over grid corners; `value` receives
    /// the per-axis grid indices and coordinates of a corner.
    fn sup<F>(&self, n: usize, value: F) -> f64
    where
        F: Fn(&[usize], &[f64]) -> f64 + Sync,
    {
        let d = self.shape.len();
        let nf = n as f64;
        (0..self.closed.len())
            .into_par_iter()
            .map_init(
                || (vec![0usize; d], vec![0.0; d]),
                |(idx, coords), flat| {
                    let mut below = 0usize;
                    let mut any_zero = false;
                    for j in 0..d {
                        idx[j] = (flat / self.strides[j]) % self.shape[j];
                        coords[j] = self.grids[j][idx[j]];
                        if idx[j] == 0 {
                            any_zero = true;
                        } else {
                            below += self.strides[j];
                        }
                    }
                    let c = self.closed[flat] as f64 / nf;
                    let o = if any_zero { 0.0 } else { self.closed[flat - below] as f64 / nf };
                    let f = value(idx, coords);
                    (c - f).max(f - o)
                },
            )
            .reduce(|| 0.0, f64::max)
    }
}

fn strides_of(shape: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; shape.len()];
    for j in (0..shape.len().saturating_sub(1)).rev() {
        strides[j] = strides[j + 1] * shape[j + 1];
    }
    strides
}

/// In-place inclusive prefix sums along every axis.
fn prefix_sum<T: Copy + std::ops::AddAssign>(a: &mut [T], shape: &[usize], strides: &[usize]) {
    for (j, &st) in strides.iter().enumerate() {
        for f in 0..a.len() {
            if (f / st) % shape[j] != 0 {
                let prev = a[f - st];
                a[f] += prev;
            }
        }
    }
}

/// Per-axis CDF tables over grid values, for product measures.
fn axis_tables(measure: &TargetMeasure, grids: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    if !measure.is_product() {
        return None;
    }
    Some(
        grids
            .iter()
            .enumerate()
            .map(|(j, g)| g.iter().map(|&v| measure.axis_cdf(j, v).unwrap_or(f64::NAN)).collect())
            .collect(),
    )
}

/// Exact star discrepancy by the grid sweep (any `d <= 3`).
pub fn star_discrepancy_sweep(points: &PointSet, measure: &TargetMeasure) -> Result<f64> {
    if points.dim() != measure.dim() {
        return Err(Error::Dimension { expected: measure.dim(), got: points.dim() });
    }
    let sweep = Sweep::new(points)?;
    match axis_tables(measure, &sweep.grids) {
        Some(tables) => {
            Ok(sweep.sup(points.len(), |idx, _| idx.iter().enumerate().fold(1.0, |acc, (j, &i)| acc * tables[j][i])))
        }
        None => {
            // surface capability errors before the parallel sweep
            measure.cdf_at(&vec![0.0; measure.dim()])?;
            Ok(sweep.sup(points.len(), |_, coords| measure.cdf_at(coords).unwrap_or(f64::NAN)))
        }
    }
}

/// Closed and open counts of the points in every distinct cover box.
struct CoverCounts {
    shape: Vec<usize>,
    strides: Vec<usize>,
    closed: Vec<u32>,
    open: Vec<u32>,
}

fn cover_shape(cover: &DeltaCover) -> Result<(Vec<usize>, Vec<usize>, Vec<Vec<f64>>)> {
    let d = cover.dim();
    let axes: Vec<Vec<f64>> = (0..d).map(|j| cover.unique_axis(j).iter().map(|a| a.to_f64()).collect()).collect();
    let shape: Vec<usize> = axes.iter().map(Vec::len).collect();
    let cells = shape.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s)).unwrap_or(usize::MAX);
    if cells > GRID_MAX_CELLS {
        return Err(Error::Budget(format!("cover with {cells} distinct boxes exceeds {GRID_MAX_CELLS}")));
    }
    let strides = strides_of(&shape);
    Ok((shape, strides, axes))
}

impl CoverCounts {
    fn new(points: &[f64], d: usize, shape: &[usize], strides: &[usize], axes: &[Vec<f64>]) -> Self {
        let cells: usize = shape.iter().product();
        let mut closed = vec![0u32; cells];
        let mut open = vec![0u32; cells];
        for p in points.chunks_exact(d) {
            let (mut fc, mut fo) = (Some(0usize), Some(0usize));
            for j in 0..d {
                // smallest anchor index whose closed / open box contains p
                let c = axes[j].partition_point(|&a| a < p[j]);
                let o = axes[j].partition_point(|&a| a <= p[j]);
                fc = fc.filter(|_| c < shape[j]).map(|f| f + c * strides[j]);
                fo = fo.filter(|_| o < shape[j]).map(|f| f + o * strides[j]);
            }
            if let Some(f) = fc {
                closed[f] += 1;
            }
            if let Some(f) = fo {
                open[f] += 1;
            }
        }
        prefix_sum(&mut closed, shape, strides);
        prefix_sum(&mut open, shape, strides);
        Self { shape: shape.to_vec(), strides: strides.to_vec(), closed, open }
    }
}

/// `pi` of every distinct cover box (closed and open readings agree for atomless targets).
fn cover_masses(cover: &DeltaCover, shape: &[usize], strides: &[usize], axes: &[Vec<f64>]) -> Result<Vec<f64>> {
    let measure = cover.measure();
    let cells: usize = shape.iter().product();
    if let Some(tables) = axis_tables(measure, axes) {
        return Ok((0..cells)
            .map(|f| (0..shape.len()).fold(1.0, |acc, j| acc * tables[j][(f / strides[j]) % shape[j]]))
            .collect());
    }
    (0..cells)
        .map(|f| {
            let anchor: Vec<ExtReal> =
                (0..shape.len()).map(|j| ExtReal::from(axes[j][(f / strides[j]) % shape[j]])).collect();
            measure.cdf_box(&anchor)
        })
        .collect()
}

/// Bracket `(L, L + δ)` with `L` the largest local discrepancy over the cover.
pub fn star_discrepancy_via_cover(points: &PointSet, cover: &DeltaCover) -> Result<DiscrepancyReport> {
    if points.is_empty() {
        return Err(Error::Parameter("star discrepancy needs n >= 1".into()));
    }
    if points.dim() != cover.dim() {
        return Err(Error::Dimension { expected: cover.dim(), got: points.dim() });
    }
    let (shape, strides, axes) = cover_shape(cover)?;
    let counts = CoverCounts::new(points.as_flat(), points.dim(), &shape, &strides, &axes);
    let masses = cover_masses(cover, &shape, &strides, &axes)?;
    let n = points.len() as f64;
    let lower = masses
        .iter()
        .zip(counts.closed.iter().zip(&counts.open))
        .map(|(&f, (&c, &o))| (c as f64 / n - f).abs().max((o as f64 / n - f).abs()))
        .fold(0.0, f64::max);
    debug_assert_eq!(counts.shape.len(), counts.strides.len());
    Ok(DiscrepancyReport::bracket(Family::AnchoredBox, points.len(), lower, cover.delta(), cover.measure().describe()))
}

/// An estimate of `K^i(x, A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelEstimate {
    pub value: f64,
    pub se: f64,
    pub exact: bool,
}

/// Driver block of replica `j`: ChaCha8 with the given seed on stream `j + 1`
/// (stream 0 is used by [`crate::drivers::iid_driver`]).
fn replica_block(seed: u64, j: usize, len: usize, out: &mut Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(j as u64 + 1);
    out.clear();
    out.extend((0..len).map(|_| rng.random::<f64>()));
}

/// `K^i(x, (-inf, anchor))`: exact for direct simulation, otherwise the mean
/// of `m` replicas `1{phi_i(x; U^(j)) ∈ A}`.
pub fn kernel_power(
    model: &ChainModel,
    x: &[f64],
    anchor: &[ExtReal],
    i: usize,
    m: usize,
    seed: u64,
) -> Result<KernelEstimate> {
    if i == 0 || m == 0 {
        return Err(Error::Parameter("kernel power needs i >= 1 and m >= 1".into()));
    }
    if model.is_direct() {
        let v = model.target().cdf_box(anchor)?;
        return Ok(KernelEstimate { value: v, se: 0.0, exact: true });
    }
    let s = model.driver_dim();
    let hits: usize = (0..m)
        .into_par_iter()
        .map_init(
            || (Vec::new(), vec![0.0; model.dim()]),
            |(block, y), j| -> Result<usize> {
                replica_block(seed, j, i * s, block);
                final_state(model, x, block, y)?;
                Ok(y.iter().zip(anchor).all(|(&v, a)| a.above(v)) as usize)
            },
        )
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let p = hits as f64 / m as f64;
    Ok(KernelEstimate { value: p, se: (p * (1.0 - p) / m as f64).sqrt(), exact: false })
}

/// How `K^i` enters the push-back discrepancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelMode {
    /// `K^i = pi`; direct simulation only.
    Analytic,
    /// Monte Carlo over `m` replicas; `tolerance` caps the certified
    /// standard error `1/(2 sqrt m)`.
    MonteCarlo { m: usize, seed: u64, tolerance: Option<f64> },
}

/// Mean kernel `(1/n) Σ_i K^i(x0, A)` over the distinct cover boxes.
#[derive(Debug)]
pub struct KernelTable {
    pub closed: Vec<f64>,
    pub open: Vec<f64>,
    /// Standard error of each entry (closed, open).
    pub se_closed: Vec<f64>,
    pub se_open: Vec<f64>,
}

type TableKey = (Vec<u64>, usize, usize, u64, u64, String);
type TableSlot = Arc<OnceLock<std::result::Result<Arc<KernelTable>, Error>>>;

/// Memoizes kernel tables by `(x0, n, m, seed, cover, model)`. Each key is
/// filled exactly once even under concurrent requests.
#[derive(Default)]
pub struct KernelOracle {
    slots: Mutex<HashMap<TableKey, TableSlot>>,
}

static ORACLE: LazyLock<KernelOracle> = LazyLock::new(KernelOracle::default);

impl KernelOracle {
    pub fn global() -> &'static KernelOracle {
        &ORACLE
    }

    pub fn len(&self) -> usize {
        self.slots.lock().map(|s| s.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn table(
        &self,
        model: &ChainModel,
        x0: &[f64],
        n: usize,
        m: usize,
        seed: u64,
        cover: &DeltaCover,
    ) -> Result<Arc<KernelTable>> {
        let key = (x0.iter().map(|v| v.to_bits()).collect(), n, m, seed, cover.fingerprint(), model.fingerprint());
        let slot = {
            let mut slots = self.slots.lock().map_err(|_| Error::InvalidState("kernel cache poisoned".into()))?;
            slots.entry(key).or_default().clone()
        };
        slot.get_or_init(|| mc_kernel_table(model, x0, n, m, seed, cover).map(Arc::new)).clone()
    }
}

fn mc_kernel_table(
    model: &ChainModel,
    x0: &[f64],
    n: usize,
    m: usize,
    seed: u64,
    cover: &DeltaCover,
) -> Result<KernelTable> {
    let d = model.dim();
    let s = model.driver_dim();
    let (shape, strides, axes) = cover_shape(cover)?;
    let cells: usize = shape.iter().product();
    if cells.saturating_mul(2) > GRID_MAX_CELLS {
        return Err(Error::Budget(format!("kernel table of {cells} boxes too large")));
    }
    // Integer sums of counts and squared counts make the reduction exact, so
    // the result does not depend on how replicas are split across threads.
    let zero = || (vec![0u64; cells], vec![0u128; cells], vec![0u64; cells], vec![0u128; cells]);
    let chunk = 256;
    let chunks: Vec<usize> = (0..m.div_ceil(chunk)).collect();
    let (sc, qc, so, qo) = chunks
        .into_par_iter()
        .map(|c| -> Result<_> {
            let mut acc = zero();
            let mut block = Vec::new();
            for j in c * chunk..((c + 1) * chunk).min(m) {
                replica_block(seed, j, n * s, &mut block);
                let path = iterate_flat(model, x0, &block)?;
                let counts = CoverCounts::new(path.as_flat(), d, &shape, &strides, &axes);
                for f in 0..cells {
                    let (a, b) = (counts.closed[f] as u64, counts.open[f] as u64);
                    acc.0[f] += a;
                    acc.1[f] += (a as u128) * (a as u128);
                    acc.2[f] += b;
                    acc.3[f] += (b as u128) * (b as u128);
                }
            }
            Ok(acc)
        })
        .try_reduce(zero, |mut a, b| {
            for f in 0..cells {
                a.0[f] += b.0[f];
                a.1[f] += b.1[f];
                a.2[f] += b.2[f];
                a.3[f] += b.3[f];
            }
            Ok(a)
        })?;
    let nm = (n * m) as f64;
    let mean = |sum: &[u64]| -> Vec<f64> { sum.iter().map(|&v| v as f64 / nm).collect() };
    let se = |sum: &[u64], sq: &[u128]| -> Vec<f64> {
        sum.iter()
            .zip(sq)
            .map(|(&a, &q)| {
                // variance of Y_j = count_j / n across replicas
                let mf = m as f64;
                let mu = a as f64 / mf;
                let var = (q as f64 / mf - mu * mu).max(0.0) / (n as f64 * n as f64);
                (var / mf).sqrt()
            })
            .collect()
    };
    Ok(KernelTable { closed: mean(&sc), open: mean(&so), se_closed: se(&sc, &qc), se_open: se(&so, &qo) })
}

/// Push-back discrepancy of `driver` for `model` started at `x0`.
///
/// With no cover and analytic kernels (direct simulation) the supremum over
/// all anchored boxes is evaluated exactly on the grid of the chain states,
/// using the mean kernel `(1/n) Σ_i K^i(x0, .)`. With a cover the result is
/// the bracket `(L, L + δ)`.
pub fn pushback_discrepancy(
    driver: &DriverSequence,
    model: &ChainModel,
    x0: &[f64],
    cover: Option<&DeltaCover>,
    mode: KernelMode,
) -> Result<DiscrepancyReport> {
    let n = driver.len();
    if n == 0 {
        return Err(Error::Parameter("push-back discrepancy needs n >= 1".into()));
    }
    if driver.width() != model.driver_dim() {
        return Err(Error::Dimension { expected: model.driver_dim(), got: driver.width() });
    }
    let states = iterate_flat(model, x0, driver.as_flat())?;
    let measure = model.target();
    let cert = model.certificate();
    let decorate = |mut r: DiscrepancyReport| -> Result<DiscrepancyReport> {
        if let Some(c) = cert {
            r.alpha = Some(c.alpha);
            r.m = Some(c.m);
            r.bound_gap = Some(gap_bound(c.alpha, c.m, n)?);
        }
        Ok(r)
    };
    match (mode, cover) {
        (KernelMode::Analytic, _) if !model.is_direct() => {
            Err(Error::Capability("analytic kernels are available for direct simulation only".into()))
        }
        (KernelMode::Analytic, None) => {
            let sweep = Sweep::new(&states)?;
            let mean_kernel = |coords: &[f64]| -> f64 {
                let anchor: Vec<ExtReal> = coords.iter().map(|&v| ExtReal::from(v)).collect();
                let mut total = 0.0;
                for i in 1..=n {
                    total += kernel_power(model, x0, &anchor, i, 1, 0).map(|k| k.value).unwrap_or(f64::NAN);
                }
                total / n as f64
            };
            measure.cdf_at(&vec![0.0; measure.dim()])?;
            let v = sweep.sup(n, |_, coords| mean_kernel(coords));
            let mut r = DiscrepancyReport::exact(Family::AnchoredBox, n, Method::ExactSweep, v, measure.describe());
            r.kernel_bias = Some(0.0);
            decorate(r)
        }
        (KernelMode::Analytic, Some(cover)) => {
            let (shape, strides, axes) = cover_shape(cover)?;
            let masses = cover_masses(cover, &shape, &strides, &axes)?;
            let mean: Vec<f64> = masses.iter().map(|&p| (0..n).map(|_| p).sum::<f64>() / n as f64).collect();
            let table = KernelTable {
                closed: mean.clone(),
                open: mean,
                se_closed: vec![0.0; masses.len()],
                se_open: vec![0.0; masses.len()],
            };
            decorate(bracket_from_table(&states, cover, &table, &masses, &shape, &strides, &axes))
        }
        (KernelMode::MonteCarlo { .. }, None) => Err(Error::Capability("Monte Carlo kernels need a cover".into())),
        (KernelMode::MonteCarlo { m, seed, tolerance }, Some(cover)) => {
            if m == 0 {
                return Err(Error::Parameter("need at least one replica".into()));
            }
            let certified = 0.5 / (m as f64).sqrt();
            if let Some(tol) = tolerance {
                if certified > tol {
                    return Err(Error::Tolerance(format!(
                        "m = {m} replicas certify a standard error of {certified:e} > {tol:e}"
                    )));
                }
            }
            let table = KernelOracle::global().table(model, x0, n, m, seed, cover)?;
            let (shape, strides, axes) = cover_shape(cover)?;
            let masses = cover_masses(cover, &shape, &strides, &axes)?;
            decorate(bracket_from_table(&states, cover, &table, &masses, &shape, &strides, &axes))
        }
    }
}

fn bracket_from_table(
    states: &PointSet,
    cover: &DeltaCover,
    table: &KernelTable,
    masses: &[f64],
    shape: &[usize],
    strides: &[usize],
    axes: &[Vec<f64>],
) -> DiscrepancyReport {
    let n = states.len();
    let counts = CoverCounts::new(states.as_flat(), states.dim(), shape, strides, axes);
    let nf = n as f64;
    let mut lower = 0.0_f64;
    let mut se = 0.0_f64;
    let mut bias = 0.0_f64;
    for f in 0..masses.len() {
        lower = lower
            .max((counts.closed[f] as f64 / nf - table.closed[f]).abs())
            .max((counts.open[f] as f64 / nf - table.open[f]).abs());
        se = se.max(table.se_closed[f]).max(table.se_open[f]);
        bias = bias.max((table.closed[f] - masses[f]).abs()).max((table.open[f] - masses[f]).abs());
    }
    let mut r = DiscrepancyReport::bracket(Family::AnchoredBox, n, lower, cover.delta(), cover.measure().describe());
    r.mc_se = se;
    r.kernel_bias = Some(bias);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpOrder {
    Two,
    Infinity,
}

/// L_p star discrepancy for the uniform target and uniform weight on `[0,1]^d`.
///
/// `p = 2` uses Warnock's closed form
/// `3^{-d} - (2/n) Σ_i ∏_j (1 - x_ij^2)/2 + (1/n^2) Σ_{i,k} ∏_j (1 - max(x_ij, x_kj))`.
pub fn lp_discrepancy(points: &PointSet, p: LpOrder, measure: &TargetMeasure) -> Result<f64> {
    let is_cube = measure.is_uniform() && matches!(measure.support(), crate::measures::Support::UnitCube);
    if !is_cube {
        return Err(Error::Capability("L_p discrepancy is implemented for the uniform cube only".into()));
    }
    if points.is_empty() {
        return Err(Error::Parameter("L_p discrepancy needs n >= 1".into()));
    }
    match p {
        LpOrder::Infinity => Ok(star_discrepancy_exact(points, measure)?.upper),
        LpOrder::Two => {
            let d = points.dim() as i32;
            let n = points.len() as f64;
            let single: f64 = points.rows().map(|x| x.iter().map(|v| 0.5 * (1.0 - v * v)).product::<f64>()).sum();
            let double: f64 = points
                .rows()
                .map(|x| {
                    points.rows().map(|y| x.iter().zip(y).map(|(a, b)| 1.0 - a.max(*b)).product::<f64>()).sum::<f64>()
                })
                .sum();
            let sq = 3f64.powi(-d) - 2.0 / n * single + double / (n * n);
            Ok(sq.max(0.0).sqrt())
        }
    }
}
