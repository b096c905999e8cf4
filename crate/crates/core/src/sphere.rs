//! Spherical caps on `S^d ⊂ R^{d+1}`: areas, inclusion, center sets with
//! measured mesh norm, cap covers and cap discrepancy brackets.

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::discrepancy::{DiscrepancyReport, Family};
use crate::drivers::best_of_k;
use crate::error::{Error, Result};
use crate::measures::sphere_direction;
use crate::points::PointSet;
use crate::special::{beta, beta_reg, dot_compensated};

/// Points farther than this from the unit sphere are rejected.
pub const ON_SPHERE_TOLERANCE: f64 = 1e-9;
/// Samples used to estimate the mesh norm.
pub const MESH_SAMPLES: usize = 100_000;
/// Default cap on the number of cover centers.
pub const DEFAULT_CENTER_BUDGET: usize = 1 << 22;

/// `C(x, t) = {y : <x, y> > t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphericalCap {
    center: Vec<f64>,
    t: f64,
}

impl SphericalCap {
    pub fn new(center: Vec<f64>, t: f64) -> Result<Self> {
        let norm = center.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("cap center has norm {norm}")));
        }
        if !(-1.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("cap height {t} outside [-1, 1]")));
        }
        Ok(Self { center, t })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn height(&self) -> f64 {
        self.t
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        dot_compensated(&self.center, y) > self.t
    }

    /// Normalized area of the cap on `S^d`, `d = center.len() - 1`.
    pub fn area(&self) -> f64 {
        cap_area(self.t, self.center.len() - 1).unwrap_or(f64::NAN)
    }
}

/// Normalized area of `C(x, t)` on `S^d`: `(1/2) I_{1-t^2}(d/2, 1/2)` for
/// `t >= 0` and `1 - area(-t)` for `t < 0`.
pub fn cap_area(t: f64, d: usize) -> Result<f64> {
    if !(-1.0..=1.0).contains(&t) {
        return Err(Error::Domain(format!("cap height {t} outside [-1, 1]")));
    }
    if d == 0 {
        return Err(Error::Domain("sphere dimension must be positive".into()));
    }
    if t < 0.0 {
        return Ok(1.0 - cap_area(-t, d)?);
    }
    if d == 2 {
        return Ok(0.5 * (1.0 - t));
    }
    Ok(0.5 * beta_reg(d as f64 / 2.0, 0.5, 1.0 - t * t)?)
}

/// Sufficient condition for `C(x, t) ⊆ C(y, u)` with `v = <x, y>`.
///
/// Writing `t = cos a`, `u = cos b`, `v = cos c`, the open caps nest when
/// `a + c < b`. For `a + c <= pi` this is `cos(a + c) > u`, i.e.
/// `t v - u > sqrt((1 - t²)(1 - v²))`, which expands to `t v > u` together with
/// `t² + u² + v² - 2tuv > 1`. The empty cap `t = 1` lies in every cap.
pub fn cap_subset(t: f64, u: f64, v: f64) -> bool {
    if t >= 1.0 {
        return true;
    }
    v > u && t + v >= 0.0 && t * v > u && t * t + u * u + v * v - 2.0 * t * u * v > 1.0
}

/// `c_d = 8 (d sqrt(pi) Γ(d/2) / Γ((d+1)/2))^{1/d}`.
pub fn mesh_constant(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("sphere dimension must be positive".into()));
    }
    // q_d = d sqrt(pi) Γ(d/2)/Γ((d+1)/2) obeys q_1 = pi, q_2 = 4,
    // q_{d+2} = q_d (d+2)/(d+1); small d use the exact recurrence.
    let q = if d <= 64 {
        let (mut q, mut k) = if d % 2 == 1 { (PI, 1usize) } else { (4.0, 2usize) };
        while k < d {
            q *= (k + 2) as f64 / (k + 1) as f64;
            k += 2;
        }
        q
    } else {
        let df = d as f64;
        (df.ln() + 0.5 * PI.ln() + ln_gamma(df / 2.0) - ln_gamma((df + 1.0) / 2.0)).exp()
    };
    Ok(8.0 * if d == 2 { q.sqrt() } else { q.powf(1.0 / d as f64) })
}

/// Uniform random point on `S^d`.
pub fn random_sphere_point(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let u: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    sphere_direction(&u, d + 1).expect("d + 1 >= 2")
}

/// Centers of the recursive zonal equal-area partition of `S^2` into `n` regions.
pub fn eq_partition_s2(n: usize) -> Result<PointSet> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 regions, got {n}")));
    }
    let mut pts = PointSet::with_capacity(3, n);
    let push_polar = |pts: &mut PointSet, theta: f64, phi: f64| {
        pts.push(&[theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()])
    };
    pts.push(&[0.0, 0.0, 1.0])?;
    if n == 2 {
        pts.push(&[0.0, 0.0, -1.0])?;
        return Ok(pts);
    }
    let nf = n as f64;
    let area = 4.0 * PI / nf;
    let theta_c = 2.0 * (1.0 / nf).sqrt().asin();
    let ideal = area.sqrt();
    let collars = (((PI - 2.0 * theta_c) / ideal).round() as usize).max(1);
    let fit = (PI - 2.0 * theta_c) / collars as f64;
    // region counts per collar, rounded with carry
    let cap_abs = |theta: f64| 4.0 * PI * (theta / 2.0).sin().powi(2);
    let mut counts = Vec::with_capacity(collars);
    let mut carry = 0.0;
    for i in 1..=collars {
        let y = (cap_abs(theta_c + i as f64 * fit) - cap_abs(theta_c + (i - 1) as f64 * fit)) / area;
        let m = (y + carry).round();
        carry += y - m;
        counts.push(m.max(0.0) as usize);
    }
    let assigned: usize = counts[..collars - 1].iter().sum();
    counts[collars - 1] = n - 2 - assigned;
    let mut cumulative = 1usize;
    let mut top = theta_c;
    let mut offset = 0.0_f64;
    for (i, &m) in counts.iter().enumerate() {
        cumulative += m;
        let bottom =
            if i + 1 == collars { PI - theta_c } else { 2.0 * (cumulative as f64 / nf).sqrt().min(1.0).asin() };
        if m > 0 {
            let mid = 0.5 * (top + bottom);
            let step = 2.0 * PI / m as f64;
            for k in 0..m {
                push_polar(&mut pts, mid, offset + (k as f64 + 0.5) * step)?;
            }
            // stagger neighbouring collars
            offset = (offset + 0.5 * step * (1.0 + (i as f64 * 0.618_033_988_749_895).fract())) % (2.0 * PI);
        }
        top = bottom;
    }
    pts.push(&[0.0, 0.0, -1.0])?;
    Ok(pts)
}

/// Uniform hash grid over `R^{D}` for nearest-center queries.
struct CenterGrid<'a> {
    centers: &'a PointSet,
    cell: f64,
    buckets: HashMap<Vec<i32>, Vec<u32>>,
}

impl<'a> CenterGrid<'a> {
    fn new(centers: &'a PointSet, cell: f64) -> Self {
        let mut buckets: HashMap<Vec<i32>, Vec<u32>> = HashMap::new();
        for (i, c) in centers.rows().enumerate() {
            buckets.entry(Self::key(c, cell)).or_default().push(i as u32);
        }
        Self { centers, cell, buckets }
    }

    fn key(x: &[f64], cell: f64) -> Vec<i32> {
        x.iter().map(|v| (v / cell).floor() as i32).collect()
    }

    /// Distance from `x` to the nearest center.
    fn nearest(&self, x: &[f64]) -> (f64, usize) {
        let home = Self::key(x, self.cell);
        let dim = x.len();
        let mut best = (f64::INFINITY, 0usize);
        let mut offs = vec![0i32; dim];
        let max_ring = (2.0 / self.cell).ceil() as i32 + 2;
        for r in 0..=max_ring {
            // enumerate the cells at Chebyshev distance exactly r
            offs.iter_mut().for_each(|o| *o = -r);
            loop {
                if offs.iter().any(|o| o.abs() == r) {
                    let key: Vec<i32> = home.iter().zip(&offs).map(|(h, o)| h + o).collect();
                    if let Some(list) = self.buckets.get(&key) {
                        for &i in list {
                            let c = self.centers.row(i as usize);
                            let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                            if d2 < best.0 {
                                best = (d2, i as usize);
                            }
                        }
                    }
                }
                let mut j = 0;
                loop {
                    if j == dim {
                        break;
                    }
                    offs[j] += 1;
                    if offs[j] <= r {
                        break;
                    }
                    offs[j] = -r;
                    j += 1;
                }
                if j == dim {
                    break;
                }
            }
            // any center outside rings 0..=r is at least r * cell away
            if best.0.sqrt() <= r as f64 * self.cell {
                break;
            }
        }
        (best.0.sqrt(), best.1)
    }
}

/// Surface area of `S^d`.
fn sphere_surface(d: usize) -> f64 {
    let h = (d as f64 + 1.0) / 2.0;
    2.0 * (h * PI.ln() - ln_gamma(h)).exp()
}

/// Estimated mesh norm `sup_x min_i |x - y_i|`: the maximum over seeded
/// uniform samples, followed by three ascent steps on the worst samples.
pub fn measure_mesh_norm(centers: &PointSet, samples: usize, seed: u64) -> Result<f64> {
    let dim = centers.dim();
    if dim < 2 || centers.is_empty() {
        return Err(Error::Parameter("mesh norm needs centers on S^d, d >= 1".into()));
    }
    let d = dim - 1;
    let spacing = (sphere_surface(d) / centers.len() as f64).powf(1.0 / d as f64);
    let grid = CenterGrid::new(centers, (2.0 * spacing).min(2.0));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<Vec<f64>> = (0..samples).map(|_| random_sphere_point(&mut rng, d)).collect();
    let mut dists: Vec<(f64, usize)> = xs.par_iter().enumerate().map(|(i, x)| (grid.nearest(x).0, i)).collect();
    dists.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = dists.first().map(|p| p.0).unwrap_or(0.0);
    for &(dist, i) in dists.iter().take(32) {
        let mut x = xs[i].clone();
        let mut cur = dist;
        let mut eta = 0.5 * cur;
        for _ in 0..3 {
            let (_, c) = grid.nearest(&x);
            let centre = centers.row(c);
            let mut improved = false;
            for _ in 0..12 {
                let mut y: Vec<f64> = x.iter().zip(centre).map(|(a, b)| a + eta * (a - b)).collect();
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                y.iter_mut().for_each(|v| *v /= norm);
                let (dy, _) = grid.nearest(&y);
                if dy > cur {
                    x = y;
                    cur = dy;
                    improved = true;
                    break;
                }
                eta *= 0.5;
            }
            if !improved {
                break;
            }
        }
        best = best.max(cur);
    }
    Ok(best)
}

/// Center set with its measured mesh norm.
#[derive(Debug, Clone)]
pub struct SphereCenters {
    pub centers: PointSet,
    pub mesh: f64,
    pub method: &'static str,
}

/// Candidates tried when centers are random (`d != 2`).
pub const RANDOM_CENTER_CANDIDATES: usize = 4;

/// `n` centers on `S^d` and their measured mesh norm; fails when the measured
/// norm exceeds `c_d n^{-1/d}`.
pub fn sphere_centers(n: usize, d: usize, seed: u64) -> Result<SphereCenters> {
    if n < 2 {
        return Err(Error::Parameter(format!("need at least 2 centers, got {n}")));
    }
    let (centers, method) = match d {
        0 => return Err(Error::Domain("sphere dimension must be positive".into())),
        1 => {
            let mut pts = PointSet::with_capacity(2, n);
            for k in 0..n {
                let a = 2.0 * PI * k as f64 / n as f64;
                pts.push(&[a.cos(), a.sin()])?;
            }
            (pts, "equal-arcs")
        }
        2 => (eq_partition_s2(n)?, "eq-partition"),
        _ => {
            let sel = best_of_k(RANDOM_CENTER_CANDIDATES, n, d, seed, "mesh-norm", |drv| {
                measure_mesh_norm(&sphere_points(drv.as_flat(), d)?, MESH_SAMPLES / 10, seed)
            })?;
            (sphere_points(sel.driver.as_flat(), d)?, "best-of-k")
        }
    };
    let mesh = measure_mesh_norm(&centers, MESH_SAMPLES, seed)?;
    let limit = mesh_constant(d)? * (n as f64).powf(-1.0 / d as f64);
    if mesh > limit {
        return Err(Error::CertificateFailure(format!("measured mesh norm {mesh} exceeds c_d N^(-1/d) = {limit}")));
    }
    Ok(SphereCenters { centers, mesh, method })
}

/// Points on `S^d` from a flat driver of width `d`.
pub fn sphere_points(flat: &[f64], d: usize) -> Result<PointSet> {
    let mut pts = PointSet::with_capacity(d + 1, flat.len() / d);
    for u in flat.chunks_exact(d) {
        pts.push(&sphere_direction(u, d + 1)?)?;
    }
    Ok(pts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapCoverMode {
    /// Sizes from the covering lemma; δ as requested.
    Lemma,
    /// User-chosen sizes; δ certified from the measured mesh norm.
    Override,
}

/// Caps `C(y_i, t)` for all centers and all heights `t = -1 + k/M_h`,
/// `k = 0..=2 M_h`, plus the whole sphere.
#[derive(Debug, Clone)]
pub struct CapCover {
    d: usize,
    centers: PointSet,
    m_h: usize,
    delta: f64,
    mesh: f64,
    mode: CapCoverMode,
}

/// Number of centers the covering lemma asks for:
/// `ceil(35^d c_d^d / (B(d/2, 1/2)^{2d} δ^{2d}))`.
pub fn lemma_center_count(delta: f64, d: usize) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!("delta {delta} outside (0, 1]")));
    }
    let c = mesh_constant(d)?;
    let b = beta(d as f64 / 2.0, 0.5);
    let di = d as i32;
    let raw = 35f64.powi(di) * c.powi(di) / (b.powi(2 * di) * delta.powi(2 * di));
    // exact integers land a few ulps off; snap before the ceiling
    let near = raw.round();
    Ok(if (raw - near).abs() <= 1e-12 * near.abs() { near } else { raw.ceil() })
}

/// `floor(N^{1/d} / c_d)`.
pub fn lemma_height_steps(n: usize, d: usize) -> Result<usize> {
    let c = mesh_constant(d)?;
    let root = if d == 2 { (n as f64).sqrt() } else { (n as f64).powf(1.0 / d as f64) };
    Ok((root / c).floor() as usize)
}

/// Cap cover sized by the covering lemma.
pub fn cap_cover(delta: f64, d: usize, center_budget: usize, seed: u64) -> Result<CapCover> {
    let n = lemma_center_count(delta, d)?;
    if n > center_budget as f64 {
        return Err(Error::Budget(format!(
            "the lemma needs {n} centers, above the budget of {center_budget}; use the override"
        )));
    }
    let n = n as usize;
    let m_h = lemma_height_steps(n, d)?.max(1);
    let sc = sphere_centers(n, d, seed)?;
    Ok(CapCover { d, centers: sc.centers, m_h, delta, mesh: sc.mesh, mode: CapCoverMode::Lemma })
}

/// Cap cover with `n` centers and `m_h` height steps, δ certified from the
/// measured mesh norm.
pub fn cap_cover_override(n: usize, m_h: usize, d: usize, seed: u64) -> Result<CapCover> {
    if m_h == 0 {
        return Err(Error::Parameter("need at least one height step".into()));
    }
    let sc = sphere_centers(n, d, seed)?;
    let delta = certified_cap_delta(sc.mesh, m_h, d)?;
    Ok(CapCover { d, centers: sc.centers, m_h, delta, mesh: sc.mesh, mode: CapCoverMode::Override })
}

/// Cover over explicit centers (all on the sphere).
pub fn cap_cover_from_centers(centers: PointSet, m_h: usize, seed: u64) -> Result<CapCover> {
    let d = centers
        .dim()
        .checked_sub(1)
        .filter(|&d| d >= 1)
        .ok_or_else(|| Error::Parameter("centers need dimension >= 2".into()))?;
    check_on_sphere(&centers)?;
    let mesh = measure_mesh_norm(&centers, MESH_SAMPLES, seed)?;
    let delta = certified_cap_delta(mesh, m_h, d)?;
    Ok(CapCover { d, centers, m_h, delta, mesh, mode: CapCoverMode::Override })
}

const DELTA_SCAN: usize = 1 << 16;

/// Largest sandwich gap for centers within chordal distance `mesh` of every
/// point and heights on the grid with `m_h` steps per unit.
///
/// For a cap of angular radius `a` and a center at angle `<= psi`, the inner
/// cap needs height `>= cos(a - psi)` and the outer cap height `<= cos(a + psi)`
/// (or the whole sphere). Both areas are monotone in `a`, so on each scan
/// interval `[a0, a1]` the gap is at most `area_out(a1) - area_in(a0)`.
pub fn certified_cap_delta(mesh: f64, m_h: usize, d: usize) -> Result<f64> {
    if m_h == 0 {
        return Err(Error::Parameter("need at least one height step".into()));
    }
    let psi = 2.0 * (0.5 * mesh).min(1.0).asin();
    let m = m_h as f64;
    let grid_up = |h: f64| ((h + 1.0) * m).ceil().min(2.0 * m) / m - 1.0;
    let grid_down = |h: f64| ((h + 1.0) * m).floor().max(0.0) / m - 1.0;
    let inner_area = |a: f64| -> Result<f64> {
        if a - psi <= 0.0 {
            return Ok(0.0);
        }
        cap_area(grid_up((a - psi).cos()).clamp(-1.0, 1.0), d)
    };
    let outer_area = |a: f64| -> Result<f64> {
        if a + psi >= PI {
            return Ok(1.0);
        }
        cap_area(grid_down((a + psi).cos()).clamp(-1.0, 1.0), d)
    };
    let mut worst = 0.0_f64;
    let mut prev_in = inner_area(0.0)?;
    for k in 1..=DELTA_SCAN {
        let a = PI * k as f64 / DELTA_SCAN as f64;
        let out = outer_area(a)?;
        worst = worst.max(out - prev_in);
        prev_in = inner_area(a)?;
    }
    Ok(worst.min(1.0))
}

impl CapCover {
    pub fn sphere_dim(&self) -> usize {
        self.d
    }

    pub fn centers(&self) -> &PointSet {
        &self.centers
    }

    pub fn height_steps(&self) -> usize {
        self.m_h
    }

    /// `T = {-1 + k/M_h : k = 0..=2 M_h}`.
    pub fn height(&self, k: usize) -> f64 {
        -1.0 + k as f64 / self.m_h as f64
    }

    pub fn heights(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=2 * self.m_h).map(|k| self.height(k))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mesh(&self) -> f64 {
        self.mesh
    }

    pub fn mode(&self) -> CapCoverMode {
        self.mode
    }

    /// `N (2 M_h + 1)` caps plus the whole sphere.
    pub fn cardinality(&self) -> f64 {
        self.centers.len() as f64 * (2 * self.m_h + 1) as f64 + 1.0
    }

    /// CSV rows `c_1..c_{d+1},t` for every cap (small covers only).
    pub fn to_csv(&self) -> Result<String> {
        if self.cardinality() > 1e7 {
            return Err(Error::Budget(format!("{} caps are too many to list", self.cardinality())));
        }
        let mut out = format!("# delta={}\n# mesh={}\n", crate::csv::fmt17(self.delta), crate::csv::fmt17(self.mesh));
        let cols: Vec<String> = (1..=self.d + 1).map(|j| format!("c{j}")).collect();
        out.push_str(&cols.join(","));
        out.push_str(",t\n");
        for c in self.centers.rows() {
            let head: Vec<String> = c.iter().map(|&v| crate::csv::fmt17(v)).collect();
            let head = head.join(",");
            for t in self.heights() {
                out.push_str(&format!("{head},{}\n", crate::csv::fmt17(t)));
            }
        }
        Ok(out)
    }
}

fn check_on_sphere(points: &PointSet) -> Result<()> {
    let bad: Vec<usize> = points
        .rows()
        .enumerate()
        .filter(|(_, p)| (dot_compensated(p, p).sqrt() - 1.0).abs() > ON_SPHERE_TOLERANCE)
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Domain(format!("points off the sphere at indices {bad:?}")))
    }
}

/// Largest `|#{p : <y, p> > t}/n - area(t)|` over grid heights `t` for one center.
fn center_sup(center: &[f64], points: &PointSet, m_h: usize, d: usize, buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend(points.rows().map(|p| dot_compensated(center, p)));
    buf.sort_unstable_by(f64::total_cmp);
    let n = buf.len() as f64;
    let m = m_h as f64;
    let top = 2 * m_h;
    let height = |k: usize| -1.0 + k as f64 / m;
    let eval = |k: usize, buf: &[f64]| {
        let t = height(k);
        let count = buf.len() - buf.partition_point(|&s| s <= t);
        (count as f64 / n - cap_area(t, d).unwrap_or(f64::NAN)).abs()
    };
    let mut best = eval(0, buf).max(eval(top, buf));
    for &s in buf.iter() {
        // smallest grid index with height >= s, then the neighbour below
        let mut k = (((s + 1.0) * m).ceil().max(0.0) as usize).min(top);
        while k > 0 && height(k - 1) >= s {
            k -= 1;
        }
        while k < top && height(k) < s {
            k += 1;
        }
        best = best.max(eval(k, buf));
        if k > 0 {
            best = best.max(eval(k - 1, buf));
        }
    }
    best
}

/// Bracket `(L, L + δ)` with `L` the largest local discrepancy over the cover caps.
pub fn cap_discrepancy_via_cover(points: &PointSet, cover: &CapCover) -> Result<DiscrepancyReport> {
    if points.dim() != cover.d + 1 {
        return Err(Error::Dimension { expected: cover.d + 1, got: points.dim() });
    }
    if points.is_empty() {
        return Err(Error::Parameter("cap discrepancy needs n >= 1".into()));
    }
    check_on_sphere(points)?;
    let lower = (0..cover.centers.len())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| center_sup(cover.centers.row(i), points, cover.m_h, cover.d, buf))
        .reduce(|| 0.0, f64::max);
    Ok(DiscrepancyReport::bracket(
        Family::SphericalCap,
        points.len(),
        lower,
        cover.delta,
        format!("uniform-sphere(d={})", cover.d),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapCoverValidation {
    pub samples: usize,
    pub max_gap: f64,
    pub delta: f64,
    pub passed: bool,
}

/// Samples random caps, sandwiches each between cover caps at the nearest
/// center (confirmed with [`cap_subset`]) and records the largest area gap.
pub fn validate_cap_cover(cover: &CapCover, samples: usize, seed: u64) -> Result<CapCoverValidation> {
    let d = cover.d;
    let spacing = (sphere_surface(d) / cover.centers.len() as f64).powf(1.0 / d as f64);
    let grid = CenterGrid::new(&cover.centers, (2.0 * spacing).min(2.0));
    let m = cover.m_h as f64;
    let top = 2 * cover.m_h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_gap = 0.0_f64;
    for _ in 0..samples {
        let x = random_sphere_point(&mut rng, d);
        let t: f64 = rng.random_range(-1.0..1.0);
        let (_, i) = grid.nearest(&x);
        let v = dot_compensated(&x, cover.centers.row(i)).clamp(-1.0, 1.0);
        let a = t.acos();
        let c = v.acos();
        // inner: smallest grid height whose cap sits inside C(x, t)
        let inner = if a - c <= 0.0 {
            None
        } else {
            let mut k = (((a - c).cos() + 1.0) * m).ceil().max(0.0) as usize;
            while k < top && !cap_subset(cover.height(k), t, v) {
                k += 1;
            }
            (k < top).then_some(k)
        };
        // outer: largest grid height whose cap contains C(x, t)
        let outer = if a + c >= PI {
            None
        } else {
            let mut k = (((a + c).cos() + 1.0) * m).floor().min(top as f64) as usize;
            while k > 0 && !cap_subset(t, cover.height(k), v) {
                k -= 1;
            }
            cap_subset(t, cover.height(k), v).then_some(k)
        };
        let area_in = inner.map(|k| cap_area(cover.height(k), d)).transpose()?.unwrap_or(0.0);
        let area_out = outer.map(|k| cap_area(cover.height(k), d)).transpose()?.unwrap_or(1.0);
        max_gap = max_gap.max(area_out - area_in);
    }
    Ok(CapCoverValidation { samples, max_gap, delta: cover.delta, passed: max_gap <= cover.delta + 1e-12 })
}

/// Sphere points as CSV `x,y,z[,...]`.
pub fn points_to_csv(points: &PointSet) -> String {
    let names = ["x", "y", "z", "w"];
    let header: Vec<String> =
        (0..points.dim()).map(|j| names.get(j).map(|s| s.to_string()).unwrap_or(format!("x{j}"))).collect();
    let mut out = header.join(",");
    out.push('\n');
    for p in points.rows() {
        let row: Vec<String> = p.iter().map(|&v| crate::csv::fmt17(v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cap_area_examples() {
        for d in 1..6 {
            assert!((cap_area(0.0, d).unwrap() - 0.5).abs() < 1e-15);
            assert_eq!(cap_area(1.0, d).unwrap(), 0.0);
        }
        assert_eq!(cap_area(0.5, 2).unwrap(), 0.25);
        assert!(matches!(cap_area(1.5, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn beta_route_matches_closed_form_on_s2() {
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let via_beta = 0.5 * beta_reg(1.0, 0.5, 1.0 - t * t).unwrap();
            assert!((via_beta - 0.5 * (1.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_area_circle() {
        // on S^1 the cap is an arc of half-angle acos t
        for &t in &[-0.8, -0.1, 0.3, 0.95] {
            let want = (t as f64).acos() / PI;
            assert!((cap_area(t, 1).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn cap_area_is_strictly_decreasing() {
        for d in [1, 2, 3, 5] {
            let mut last = f64::INFINITY;
            for k in 0..1000 {
                let t = -1.0 + 2.0 * k as f64 / 999.0;
                let a = cap_area(t, d).unwrap();
                assert!(a < last, "d={d} t={t}");
                last = a;
            }
        }
    }

    #[test]
    fn cap_subset_examples() {
        assert!(cap_subset(0.9, 0.1, 1.0));
        assert!(!cap_subset(0.5, 0.5, 0.9));
        assert!(cap_subset(0.9, 0.0, 0.5));
        // the quadratic alone would accept these
        assert!(!cap_subset(-0.9, 0.9, 1.0));
        assert!(!cap_subset(0.1, 0.9, 0.95));
        assert!(!cap_subset(-0.5, -0.9, 0.0));
    }

    #[test]
    fn mesh_constants() {
        assert_eq!(mesh_constant(2).unwrap(), 16.0);
        assert!((mesh_constant(1).unwrap() - 8.0 * PI).abs() < 1e-13);
        for d in 2..200 {
            assert!(mesh_constant(d).unwrap() < 21.0, "d={d}");
        }
        let general =
            |d: f64| 8.0 * ((d.ln() + 0.5 * PI.ln() + ln_gamma(d / 2.0) - ln_gamma((d + 1.0) / 2.0)) / d).exp();
        for d in [3usize, 7, 20, 64] {
            assert!((mesh_constant(d).unwrap() - general(d as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn eq_partition_sizes_and_norms() {
        for n in [2usize, 3, 7, 50, 1000] {
            let p = eq_partition_s2(n).unwrap();
            assert_eq!(p.len(), n);
            for r in p.rows() {
                assert!((r.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
            }
        }
        assert!(eq_partition_s2(1).is_err());
    }

    #[test]
    fn two_regions_are_antipodal() {
        let c = sphere_centers(2, 2, 0).unwrap();
        assert_eq!(c.centers.row(0), &[0.0, 0.0, 1.0]);
        assert_eq!(c.centers.row(1), &[0.0, 0.0, -1.0]);
        assert!((c.mesh - 2f64.sqrt()).abs() < 1e-3);
        assert!(c.mesh <= 2f64.sqrt() + 1e-12);
    }

    #[test]
    fn mesh_norm_shrinks_like_inverse_root() {
        let a = sphere_centers(1000, 2, 1).unwrap().mesh;
        let b = sphere_centers(16000, 2, 1).unwrap().mesh;
        assert!(b < a / 3.0 && b > a / 5.0, "{a} {b}");
    }

    #[test]
    fn lemma_counts() {
        assert_eq!(lemma_center_count(0.2, 2).unwrap(), 12_250_000.0);
        assert_eq!(lemma_height_steps(4096, 2).unwrap(), 4);
        assert!(matches!(cap_cover(0.2, 2, DEFAULT_CENTER_BUDGET, 0), Err(Error::Budget(_))));
    }

    #[test]
    fn override_cover_heights() {
        let c = cap_cover_override(4096, 4, 2, 0).unwrap();
        let t: Vec<f64> = c.heights().collect();
        assert_eq!(t.len(), 9);
        assert_eq!(t[0], -1.0);
        assert_eq!(t[1], -0.75);
        assert_eq!(t[8], 1.0);
        let n = 4096f64;
        assert!(n * 9.0 <= 4.0 * n.powf(1.5) / 16.0);
    }

    #[test]
    fn certified_delta_validates_by_sampling() {
        for (n, m_h) in [(2000usize, 50usize), (500, 1 << 20)] {
            let c = cap_cover_override(n, m_h, 2, 3).unwrap();
            let v = validate_cap_cover(&c, 5000, 4).unwrap();
            assert!(v.passed, "{v:?}");
            assert!(v.max_gap > 0.5 * c.delta(), "{v:?}");
        }
        let c = cap_cover_override(300, 20, 3, 5).unwrap();
        assert!(validate_cap_cover(&c, 2000, 6).unwrap().passed);
    }

    #[test]
    fn cap_discrepancy_examples() {
        let cover = cap_cover_override(64, 4, 2, 0).unwrap();
        let north = PointSet::from_rows(3, &[[0.0, 0.0, 1.0]]).unwrap();
        let r = cap_discrepancy_via_cover(&north, &cover).unwrap();
        assert!(r.lower >= 0.5);
        assert!(r.upper - r.lower <= cover.delta() + 1e-15);
        let full = SphericalCap::new(vec![0.0, 0.0, 1.0], -1.0).unwrap();
        assert_eq!(full.area(), 1.0);
        let empty = SphericalCap::new(vec![0.0, 0.0, 1.0], 1.0).unwrap();
        assert!(!empty.contains(&[0.0, 0.0, 1.0]) && empty.area() == 0.0);
    }

    #[test]
    fn off_sphere_points_are_listed() {
        let cover = cap_cover_override(16, 2, 2, 0).unwrap();
        let p = PointSet::from_rows(3, &[[0.0, 0.0, 1.0], [0.0, 0.0, 1.1]]).unwrap();
        match cap_discrepancy_via_cover(&p, &cover) {
            Err(Error::Domain(msg)) => assert!(msg.contains("[1]")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn center_sup_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let pts: Vec<Vec<f64>> = (0..40).map(|_| random_sphere_point(&mut rng, 2)).collect();
        let p = PointSet::from_rows(3, &pts).unwrap();
        let y = random_sphere_point(&mut rng, 2);
        let m_h = 37;
        let mut buf = Vec::new();
        let fast = center_sup(&y, &p, m_h, 2, &mut buf);
        let mut slow = 0.0_f64;
        for k in 0..=2 * m_h {
            let t = -1.0 + k as f64 / m_h as f64;
            let count = pts.iter().filter(|q| dot_compensated(&y, q) > t).count();
            slow = slow.max((count as f64 / 40.0 - cap_area(t, 2).unwrap()).abs());
        }
        assert_eq!(fast, slow);
    }
}
