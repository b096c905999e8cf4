//! Update functions `phi(x; u)`, their iterates, and ergodicity certificates.

use std::fmt;
use std::sync::Arc;

use crate::drivers::DriverSequence;
use crate::error::{Error, Result};
use crate::measures::{sphere_direction, Support, TargetMeasure};
use crate::points::PointSet;

/// States closer than this to the boundary of a hit-and-run body are rejected.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Source of an `(alpha, M)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateSource {
    Analytic,
    Minorization,
    Asserted,
}

impl fmt::Display for CertificateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertificateSource::Analytic => "analytic",
            CertificateSource::Minorization => "minorization",
            CertificateSource::Asserted => "asserted",
        })
    }
}

/// `sup_x ||K^j(x, .) - pi||_tv <= alpha^j M`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicityCertificate {
    pub alpha: f64,
    pub m: f64,
    pub source: CertificateSource,
}

impl ErgodicityCertificate {
    pub fn new(alpha: f64, m: f64, source: CertificateSource) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) || !(m > 0.0 && m.is_finite()) {
            return Err(Error::Certificate(format!("need alpha in [0,1) and M > 0, got ({alpha}, {m})")));
        }
        Ok(Self { alpha, m, source })
    }

    /// Certificate of direct simulation: `alpha = 0`.
    pub fn direct() -> Self {
        Self { alpha: 0.0, m: 1.0, source: CertificateSource::Analytic }
    }
}

/// Convex body with a chord oracle for hit-and-run.
pub trait ConvexBody: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Signed distance to the boundary, positive inside.
    fn depth(&self, x: &[f64]) -> f64;

    /// Parameters `(s_a, s_b)`, `s_a <= 0 <= s_b`, such that `x + s theta`
    /// meets the boundary at `s_a` and `s_b`.
    fn chord(&self, x: &[f64], theta: &[f64]) -> (f64, f64);

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct BallBody {
    pub dim: usize,
    pub radius: f64,
}

impl ConvexBody for BallBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn depth(&self, x: &[f64]) -> f64 {
        self.radius - x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn chord(&self, x: &[f64], theta: &[f64]) -> (f64, f64) {
        // |x + s theta|^2 = r^2 with |theta| = 1
        let b: f64 = x.iter().zip(theta).map(|(a, t)| a * t).sum();
        let c: f64 = x.iter().map(|v| v * v).sum::<f64>() - self.radius * self.radius;
        let disc = (b * b - c).max(0.0).sqrt();
        // stable roots: the product of the roots is c
        let far = if b >= 0.0 { -b - disc } else { -b + disc };
        let near = if far != 0.0 { c / far } else { 0.0 };
        (far.min(near), far.max(near))
    }

    fn describe(&self) -> String {
        format!("ball(d={},r={})", self.dim, self.radius)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoxBody {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

impl ConvexBody for BoxBody {
    fn dim(&self) -> usize {
        self.dim
    }

    fn depth(&self, x: &[f64]) -> f64 {
        x.iter().map(|&v| (v - self.lo).min(self.hi - v)).fold(f64::INFINITY, f64::min)
    }

    fn chord(&self, x: &[f64], theta: &[f64]) -> (f64, f64) {
        let mut s_a = f64::NEG_INFINITY;
        let mut s_b = f64::INFINITY;
        for (&xi, &ti) in x.iter().zip(theta) {
            if ti == 0.0 {
                continue;
            }
            let p = (self.lo - xi) / ti;
            let q = (self.hi - xi) / ti;
            s_a = s_a.max(p.min(q));
            s_b = s_b.min(p.max(q));
        }
        (s_a, s_b)
    }

    fn describe(&self) -> String {
        format!("box(d={},[{},{}])", self.dim, self.lo, self.hi)
    }
}

#[derive(Debug, Clone)]
pub enum UpdateKind {
    /// `phi(x; u) = psi(u)`.
    Direct,
    HitAndRun(Arc<dyn ConvexBody>),
    /// Independence sampler with the uniform proposal on the support.
    Metropolis,
}

/// An update function together with its target and certificate.
#[derive(Debug, Clone)]
pub struct ChainModel {
    kind: UpdateKind,
    target: Arc<TargetMeasure>,
    certificate: Option<ErgodicityCertificate>,
}

impl ChainModel {
    pub fn direct(target: Arc<TargetMeasure>) -> Self {
        Self { kind: UpdateKind::Direct, target, certificate: Some(ErgodicityCertificate::direct()) }
    }

    /// Independence Metropolis chain, certified by minorization.
    pub fn metropolis(target: Arc<TargetMeasure>) -> Result<Self> {
        let cert = certify_metropolis(&target)?;
        Ok(Self { kind: UpdateKind::Metropolis, target, certificate: Some(cert) })
    }

    /// Hit-and-run on `body` targeting the uniform law `target`; the
    /// certificate, if any, is asserted by the caller.
    pub fn hit_and_run(
        body: Arc<dyn ConvexBody>,
        target: Arc<TargetMeasure>,
        certificate: Option<(f64, f64)>,
    ) -> Result<Self> {
        if body.dim() != target.dim() || body.dim() < 2 {
            return Err(Error::Parameter(format!(
                "hit-and-run needs a body of dimension {} >= 2, got {}",
                target.dim(),
                body.dim()
            )));
        }
        let certificate =
            certificate.map(|(a, m)| ErgodicityCertificate::new(a, m, CertificateSource::Asserted)).transpose()?;
        Ok(Self { kind: UpdateKind::HitAndRun(body), target, certificate })
    }

    /// Hit-and-run on the target's own support (ball or axis box).
    pub fn hit_and_run_on_support(target: Arc<TargetMeasure>, certificate: Option<(f64, f64)>) -> Result<Self> {
        let d = target.dim();
        let body: Arc<dyn ConvexBody> = match target.support() {
            Support::Ball { radius } => Arc::new(BallBody { dim: d, radius }),
            Support::AxisBox { lo, hi } => Arc::new(BoxBody { dim: d, lo, hi }),
            Support::UnitCube => Arc::new(BoxBody { dim: d, lo: 0.0, hi: 1.0 }),
        };
        Self::hit_and_run(body, target, certificate)
    }

    pub fn kind(&self) -> &UpdateKind {
        &self.kind
    }

    pub fn target(&self) -> &Arc<TargetMeasure> {
        &self.target
    }

    pub fn certificate(&self) -> Option<ErgodicityCertificate> {
        self.certificate
    }

    pub fn with_certificate(mut self, cert: ErgodicityCertificate) -> Self {
        self.certificate = Some(cert);
        self
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.kind, UpdateKind::Direct)
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Row width `s` of the driver.
    pub fn driver_dim(&self) -> usize {
        match self.kind {
            UpdateKind::Direct => self.target.generator_dim(),
            UpdateKind::HitAndRun(_) => self.target.dim(),
            UpdateKind::Metropolis => self.target.dim() + 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self.kind {
            UpdateKind::Direct => "direct",
            UpdateKind::HitAndRun(_) => "hit-and-run",
            UpdateKind::Metropolis => "metropolis",
        }
    }

    /// Stable description used as a cache key component.
    pub fn fingerprint(&self) -> String {
        let body = match &self.kind {
            UpdateKind::HitAndRun(b) => b.describe(),
            _ => String::new(),
        };
        format!("{}|{}|{}", self.tag(), body, self.target.describe())
    }

    pub fn update(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.update_into(x, u, &mut out)?;
        Ok(out)
    }

    /// Writes `phi(x; u)` into `out`.
    pub fn update_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        if x.len() != d {
            return Err(Error::Dimension { expected: d, got: x.len() });
        }
        if u.len() != self.driver_dim() {
            return Err(Error::Dimension { expected: self.driver_dim(), got: u.len() });
        }
        match &self.kind {
            UpdateKind::Direct => self.target.generate_into(u, out),
            UpdateKind::HitAndRun(body) => hit_and_run_step(body.as_ref(), x, u, out),
            UpdateKind::Metropolis => self.metropolis_step(x, u, out),
        }
    }

    fn metropolis_step(&self, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let support = self.target.support();
        if !support.contains(x) {
            return Err(Error::Domain(format!("state {x:?} outside the support")));
        }
        if let Some(v) = u.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("driver value {v} outside [0, 1]")));
        }
        let rho_x = self.target.density_at(x).unwrap_or(1.0);
        if !(rho_x > 0.0 && rho_x.is_finite()) {
            return Err(Error::InvalidState(format!("density {rho_x} at the current state")));
        }
        support.uniform_point(&u[..d], out)?;
        let rho_y = self.target.density_at(out).unwrap_or(1.0);
        let accept = (rho_y / rho_x).min(1.0);
        if u[d] > accept {
            out.copy_from_slice(x);
        }
        Ok(())
    }
}

fn hit_and_run_step(body: &dyn ConvexBody, x: &[f64], u: &[f64], out: &mut [f64]) -> Result<()> {
    let d = body.dim();
    let depth = body.depth(x);
    if depth < -BOUNDARY_TOLERANCE || depth.is_nan() {
        return Err(Error::Domain(format!("state {x:?} outside {}", body.describe())));
    }
    if depth <= BOUNDARY_TOLERANCE {
        return Err(Error::Boundary { tolerance: BOUNDARY_TOLERANCE });
    }
    let theta = sphere_direction(&u[..d - 1], d)?;
    let w = u[d - 1];
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Domain(format!("driver value {w} outside [0, 1]")));
    }
    let (s_a, s_b) = body.chord(x, &theta);
    let s = w * s_a + (1.0 - w) * s_b;
    for ((o, &xi), &ti) in out.iter_mut().zip(x).zip(&theta) {
        *o = xi + s * ti;
    }
    Ok(())
}

/// Minorization certificate of the independence sampler with uniform proposal:
/// `K(x, .) >= beta pi` with `beta = mass / (vol(G) rho_max)`.
pub fn certify_metropolis(target: &TargetMeasure) -> Result<ErgodicityCertificate> {
    let (rho_min, rho_max, mass) = match target.density_bounds() {
        Some(b) => b,
        None if target.is_uniform() => (1.0, 1.0, target.support().volume(target.dim())),
        None => return Err(Error::Certificate("target has no density bounds".into())),
    };
    let vol = target.support().volume(target.dim());
    if !(rho_min > 0.0 && rho_max.is_finite() && mass > 0.0 && vol > 0.0 && vol.is_finite()) {
        return Err(Error::Certificate(format!(
            "need finite positive bounds, got rho in [{rho_min}, {rho_max}], mass {mass}, volume {vol}"
        )));
    }
    let beta = mass / (vol * rho_max);
    if beta <= 0.0 {
        return Err(Error::Certificate(format!("minorization constant {beta} is not positive")));
    }
    // Rounding can push beta a hair above 1 for constant densities.
    let alpha = if beta >= 1.0 - 1e-12 { 0.0 } else { 1.0 - beta };
    Ok(ErgodicityCertificate { alpha, m: 1.0, source: CertificateSource::Minorization })
}

/// `x_0` and the states `x_1 .. x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPath {
    pub start: Vec<f64>,
    pub points: PointSet,
}

impl ChainPath {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// CSV with columns `i,x_1,...,x_d`; row 0 is the start.
    pub fn to_csv(&self) -> String {
        let d = self.start.len();
        let mut out = String::from("i");
        for j in 1..=d {
            out.push_str(&format!(",x_{j}"));
        }
        out.push('\n');
        let mut push = |i: usize, row: &[f64]| {
            out.push_str(&i.to_string());
            for v in row {
                out.push(',');
                out.push_str(&crate::csv::fmt17(*v));
            }
            out.push('\n');
        };
        push(0, &self.start);
        for (i, row) in self.points.rows().enumerate() {
            push(i + 1, row);
        }
        out
    }
}

/// `x_i = phi(x_{i-1}; u_i)` for every driver row.
pub fn iterate_chain(model: &ChainModel, x0: &[f64], driver: &DriverSequence) -> Result<ChainPath> {
    if driver.width() != model.driver_dim() {
        return Err(Error::Dimension { expected: model.driver_dim(), got: driver.width() });
    }
    let points = iterate_flat(model, x0, driver.as_flat())?;
    Ok(ChainPath { start: x0.to_vec(), points })
}

/// Iterates over a flat row-major block of driver values.
pub fn iterate_flat(model: &ChainModel, x0: &[f64], flat: &[f64]) -> Result<PointSet> {
    let d = model.dim();
    let s = model.driver_dim();
    if x0.len() != d {
        return Err(Error::Dimension { expected: d, got: x0.len() });
    }
    let n = flat.len() / s;
    let mut coords = vec![0.0; n * d];
    let mut prev = x0.to_vec();
    for i in 0..n {
        let (head, tail) = coords.split_at_mut(i * d);
        let cur = &mut tail[..d];
        let x = if i == 0 { &prev[..] } else { &head[(i - 1) * d..] };
        model
            .update_into(x, &flat[i * s..(i + 1) * s], cur)
            .map_err(|e| Error::Step { index: i + 1, source: Box::new(e) })?;
        if i + 1 == n {
            prev.copy_from_slice(cur);
        }
    }
    PointSet::from_flat(d, coords)
}

/// Final state `phi_i(x; u_1..u_i)` without storing the path.
pub fn final_state(model: &ChainModel, x0: &[f64], flat: &[f64], out: &mut [f64]) -> Result<()> {
    let s = model.driver_dim();
    let mut cur = x0.to_vec();
    out.copy_from_slice(x0);
    for (i, u) in flat.chunks_exact(s).enumerate() {
        model.update_into(&cur, u, out).map_err(|e| Error::Step { index: i + 1, source: Box::new(e) })?;
        cur.copy_from_slice(out);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drivers::{iid_driver, Provenance};
    use crate::measures::Density1d;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear_target() -> Arc<TargetMeasure> {
        Arc::new(TargetMeasure::density(vec![Density1d::linear(2.0, -1.0).unwrap()]).unwrap())
    }

    fn disk_chain() -> ChainModel {
        let t = Arc::new(TargetMeasure::uniform_ball(2, 1.0).unwrap());
        ChainModel::hit_and_run_on_support(t, None).unwrap()
    }

    #[test]
    fn direct_ignores_state() {
        let t = Arc::new(TargetMeasure::uniform_cube(2).unwrap());
        let m = ChainModel::direct(t);
        assert_eq!(m.update(&[0.9, 0.9], &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
        assert_eq!(m.update(&[0.1, 0.2], &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
    }

    #[test]
    fn hit_and_run_worked_cases() {
        let m = disk_chain();
        let y = m.update(&[0.0, 0.0], &[0.3, 0.5]).unwrap();
        assert!(y[0].abs() < 1e-15 && y[1].abs() < 1e-15);
        // theta = (1, 0) at u_1 = 0
        let body = BallBody { dim: 2, radius: 1.0 };
        let (a, b) = body.chord(&[0.5, 0.0], &[1.0, 0.0]);
        assert!((a + 1.5).abs() < 1e-15 && (b - 0.5).abs() < 1e-15);
        let y = m.update(&[0.5, 0.0], &[0.0, 1.0]).unwrap();
        assert!((y[0] + 1.0).abs() < 1e-15);
        let y = m.update(&[0.0, 0.0], &[0.2, 0.0]).unwrap();
        let norm = (y[0] * y[0] + y[1] * y[1]).sqrt();
        assert!((norm - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hit_and_run_rejects_bad_states() {
        let m = disk_chain();
        assert!(matches!(m.update(&[2.0, 0.0], &[0.1, 0.1]), Err(Error::Domain(_))));
        assert!(matches!(m.update(&[1.0, 0.0], &[0.1, 0.1]), Err(Error::Boundary { .. })));
    }

    #[test]
    fn box_chord_is_slab_intersection() {
        let b = BoxBody { dim: 2, lo: 0.0, hi: 1.0 };
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (a, c) = b.chord(&[0.5, 0.25], &[s, s]);
        assert!((a + 0.25 / s).abs() < 1e-15);
        assert!((c - 0.5 / s).abs() < 1e-15);
    }

    #[test]
    fn metropolis_worked_cases() {
        let m = ChainModel::metropolis(linear_target()).unwrap();
        assert_eq!(m.update(&[0.5], &[0.2, 0.99]).unwrap(), vec![0.2]);
        assert_eq!(m.update(&[0.2], &[0.9, 0.7]).unwrap(), vec![0.2]);
        // the boundary u_{s+1} = A accepts
        let a = 1.1 / 1.8;
        assert_eq!(m.update(&[0.2], &[0.9, a]).unwrap(), vec![0.9]);
    }

    #[test]
    fn metropolis_with_constant_density_is_direct() {
        let t = Arc::new(TargetMeasure::density(vec![Density1d::constant(3.0).unwrap()]).unwrap());
        let m = ChainModel::metropolis(t).unwrap();
        assert_eq!(m.certificate().unwrap().alpha, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = rng.random::<f64>();
            let u = [rng.random::<f64>(), rng.random::<f64>()];
            assert_eq!(m.update(&[x], &u).unwrap(), vec![u[0]]);
        }
    }

    #[test]
    fn metropolis_certificate_for_linear_density() {
        let c = certify_metropolis(&linear_target()).unwrap();
        assert!((c.alpha - 0.25).abs() < 1e-12);
        assert_eq!(c.m, 1.0);
        assert_eq!(c.source, CertificateSource::Minorization);
    }

    /// Discretized independence-sampler kernel on `cells` midpoints.
    fn discretized_kernel(rho: impl Fn(f64) -> f64, cells: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mids: Vec<f64> = (0..cells).map(|k| (k as f64 + 0.5) / cells as f64).collect();
        let r: Vec<f64> = mids.iter().map(|&x| rho(x)).collect();
        let total: f64 = r.iter().sum();
        let pi: Vec<f64> = r.iter().map(|v| v / total).collect();
        let mut k = vec![vec![0.0; cells]; cells];
        for i in 0..cells {
            let mut stay = 1.0;
            for j in 0..cells {
                let p = (r[j] / r[i]).min(1.0) / cells as f64;
                k[i][j] = p;
                stay -= p;
            }
            k[i][i] += stay;
        }
        (k, pi)
    }

    #[test]
    fn tv_decay_respects_certificate() {
        let cells = 512;
        let rho = |x: f64| 2.0 - x;
        let cert = certify_metropolis(&linear_target()).unwrap();
        let (k, pi) = discretized_kernel(rho, cells);
        for start in (0..cells).step_by(cells / 16) {
            let mut row = vec![0.0; cells];
            row[start] = 1.0;
            for j in 1..=20 {
                let mut next = vec![0.0; cells];
                for (a, &w) in row.iter().enumerate() {
                    if w != 0.0 {
                        for (b, &p) in k[a].iter().enumerate() {
                            next[b] += w * p;
                        }
                    }
                }
                row = next;
                let tv: f64 = 0.5 * row.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
                let budget = cert.alpha.powi(j) * cert.m;
                assert!(tv <= budget + 1e-13, "start {start}, j={j}: tv {tv} > {budget}");
            }
        }
    }

    #[test]
    fn metropolis_kernel_law_matches_discretized_row() {
        // For x = 0.2 the one-step law has an atom at x and density
        // min(1, rho(y)/rho(x)) elsewhere; compare cell masses.
        let m = ChainModel::metropolis(linear_target()).unwrap();
        let x = 0.2;
        let cells = 16;
        let n = 100_000;
        let driver = iid_driver(77, n, 2).unwrap();
        let mut counts = vec![0usize; cells];
        let mut stays = 0usize;
        for u in driver.rows() {
            let y = m.update(&[x], u).unwrap()[0];
            if y == x {
                stays += 1;
            } else {
                counts[((y * cells as f64) as usize).min(cells - 1)] += 1;
            }
        }
        let rho = |y: f64| 2.0 - y;
        let accept_mass =
            |a: f64, b: f64| crate::quad::adaptive_simpson(|y| (rho(y) / rho(x)).min(1.0), a, b, 1e-13).unwrap();
        for (c, &count) in counts.iter().enumerate() {
            let p = accept_mass(c as f64 / cells as f64, (c + 1) as f64 / cells as f64);
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((count as f64 / n as f64 - p).abs() <= 3.0 * se + 1e-12, "cell {c}");
        }
        let p_stay = 1.0 - accept_mass(0.0, 1.0);
        let se = (p_stay * (1.0 - p_stay) / n as f64).sqrt();
        assert!((stays as f64 / n as f64 - p_stay).abs() <= 3.0 * se);
    }

    #[test]
    fn closure_holds_for_every_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let models = vec![
            ChainModel::direct(Arc::new(TargetMeasure::uniform_ball(2, 1.0).unwrap())),
            disk_chain(),
            ChainModel::hit_and_run_on_support(Arc::new(TargetMeasure::uniform_box(3, -1.0, 2.0).unwrap()), None)
                .unwrap(),
            ChainModel::metropolis(linear_target()).unwrap(),
        ];
        for m in &models {
            let support = m.target().support();
            let mut x = m.target().generate(&vec![0.5; m.target().generator_dim()]).unwrap();
            for _ in 0..10_000 {
                let u: Vec<f64> = (0..m.driver_dim()).map(|_| rng.random::<f64>()).collect();
                x = m.update(&x, &u).unwrap();
                assert!(support.contains(&x), "{}: {x:?}", m.tag());
            }
        }
    }

    #[test]
    fn empty_driver_gives_empty_path() {
        let m = ChainModel::direct(Arc::new(TargetMeasure::uniform_cube(1).unwrap()));
        let d = DriverSequence::new(1, vec![], Provenance::Imported).unwrap();
        let p = iterate_chain(&m, &[0.3], &d).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.start, vec![0.3]);
    }

    #[test]
    fn direct_path_equals_driver() {
        let m = ChainModel::direct(Arc::new(TargetMeasure::uniform_cube(1).unwrap()));
        let d = DriverSequence::new(1, vec![0.25, 0.75], Provenance::Imported).unwrap();
        let p = iterate_chain(&m, &[0.0], &d).unwrap();
        assert_eq!(p.points.as_flat(), &[0.25, 0.75]);
    }

    #[test]
    fn step_errors_carry_index() {
        let m = disk_chain();
        // u_d = 0 lands on the boundary, so step 2 fails
        let d = DriverSequence::new(2, vec![0.1, 0.0, 0.3, 0.5], Provenance::Imported).unwrap();
        let r = iterate_chain(&m, &[0.0, 0.0], &d);
        assert!(matches!(r, Err(Error::Step { index: 2, .. })));
    }

    proptest! {
        #[test]
        fn composition_identity(seed in any::<u64>(), n in 1usize..12, kind in 0usize..3) {
            let m = match kind {
                0 => ChainModel::direct(Arc::new(TargetMeasure::uniform_cube(2).unwrap())),
                1 => disk_chain(),
                _ => ChainModel::metropolis(linear_target()).unwrap(),
            };
            let x0 = vec![0.1; m.dim()];
            let d = iid_driver(seed, n, m.driver_dim()).unwrap();
            let full = iterate_chain(&m, &x0, &d).unwrap();
            for j in 0..n {
                let s = m.driver_dim();
                let mut mid = vec![0.0; m.dim()];
                final_state(&m, &x0, &d.as_flat()[..j * s], &mut mid).unwrap();
                let mut end = vec![0.0; m.dim()];
                final_state(&m, &mid, &d.as_flat()[j * s..], &mut end).unwrap();
                prop_assert_eq!(&end[..], full.points.row(n - 1));
            }
        }
    }
}
