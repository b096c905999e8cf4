//! Config-driven experiments: convergence studies, driver search, sphere
//! studies, Koksma–Hlawka checks and bound sweeps. Rows are written to the
//! sink as they are produced, so a failure leaves the finished rows behind.

use std::io::Write;
use std::sync::Arc;

use crate::bounds::{
    cover_cardinality_bound, existence_bound, gap_bound, hoeffding_tail, koksma_hlawka_budget, sphere_bounds,
    BoundInputs, ExistenceVariant,
};
use crate::chains::{iterate_flat, ChainModel};
use crate::config::Config;
use crate::covers::{quantile_cover, DeltaCover};
use crate::csv::fmt17;
use crate::discrepancy::{
    pushback_discrepancy, star_discrepancy_exact, star_discrepancy_via_cover, DiscrepancyReport, KernelMode,
    SWEEP_MAX_POINTS,
};
use crate::drivers::{best_of_k, iid_driver, DriverSequence, Provenance, Selection};
use crate::error::{Error, Result};
use crate::measures::{Density1d, TargetMeasure};
use crate::points::PointSet;
use crate::rkhs::{kh_check, Function1d, H1Function, KhReport, NormOrder, KH_HEADER};
use crate::sphere::{cap_cover_override, cap_discrepancy_via_cover, sphere_points, CapCover};

pub const TOOL: &str = concat!("mcqmc ", env!("CARGO_PKG_VERSION"));

/// Default number of best-of-K candidates.
pub const DEFAULT_K: usize = 32;
/// Default Monte Carlo replicas for kernel tables.
pub const DEFAULT_REPLICAS: usize = 100_000;

/// First lines of every output file: tool version and the effective config.
pub fn header(cfg: &Config) -> String {
    format!("# {TOOL}\n{}", cfg.echo())
}

fn io(e: std::io::Error) -> Error {
    Error::Io(e.to_string())
}

/// Seed of the best-of-K search at sample size `n`.
pub fn derived_seed(seed: u64, n: usize) -> u64 {
    seed.wrapping_add(1_000_003u64.wrapping_mul(n as u64))
}

/// Least-squares fit of `ln y` on `ln n`: `(slope, intercept, rms residual)`.
pub fn fit_loglog(ns: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if ns.len() != ys.len() || ns.len() < 2 {
        return Err(Error::Parameter("slope fit needs at least two points".into()));
    }
    if ns.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("slope fit needs positive values".into()));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok((slope, intercept, (rss / k).sqrt()))
}

/// `[measure]`: `kind` in `uniform-cube` (default), `uniform-box`,
/// `uniform-ball`, `linear`, `exponential`, `constant`; `d`, `lo`, `hi`,
/// `radius`, `a`, `b`, `lambda`, `c`.
pub fn measure_from(cfg: &Config) -> Result<Arc<TargetMeasure>> {
    let kind = cfg.get_str("measure", "kind").unwrap_or("uniform-cube").to_string();
    let d: usize = cfg.get_or("measure", "d", 1)?;
    let line = cfg.line_of("measure", "kind");
    let wrap = |r: Result<TargetMeasure>| r.map(Arc::new).map_err(|e| Error::Config { line, message: e.to_string() });
    let density = |f: Result<Density1d>| -> Result<TargetMeasure> {
        let f = f?;
        TargetMeasure::density(vec![f; d])
    };
    match kind.as_str() {
        "uniform-cube" => wrap(TargetMeasure::uniform_cube(d)),
        "uniform-box" => {
            let lo = cfg.require("measure", "lo")?;
            let hi = cfg.require("measure", "hi")?;
            wrap(TargetMeasure::uniform_box(d, lo, hi))
        }
        "uniform-ball" => {
            let r = cfg.get_or("measure", "radius", 1.0)?;
            wrap(TargetMeasure::uniform_ball(d, r))
        }
        "linear" => {
            let a = cfg.require("measure", "a")?;
            let b = cfg.require("measure", "b")?;
            wrap(density(Density1d::linear(a, b)))
        }
        "exponential" => {
            let l = cfg.require("measure", "lambda")?;
            wrap(density(Density1d::exponential(l)))
        }
        "constant" => {
            let c = cfg.get_or("measure", "c", 1.0)?;
            wrap(density(Density1d::constant(c)))
        }
        other => Err(Error::Config { line, message: format!("unknown measure kind `{other}`") }),
    }
}

/// `[chain]`: `kind` in `direct` (default), `metropolis`, `hit-and-run`;
/// `x0` (list, default the support centre); `alpha`, `m` assert a
/// certificate for hit-and-run.
pub fn chain_from(cfg: &Config, measure: Arc<TargetMeasure>) -> Result<(ChainModel, Vec<f64>)> {
    let kind = cfg.get_str("chain", "kind").unwrap_or("direct").to_string();
    let line = cfg.line_of("chain", "kind");
    let d = measure.dim();
    let centre = match measure.support() {
        crate::measures::Support::UnitCube => 0.5,
        crate::measures::Support::AxisBox { lo, hi } => 0.5 * (lo + hi),
        crate::measures::Support::Ball { .. } => 0.0,
    };
    let x0 = cfg.get_list::<f64>("chain", "x0")?.unwrap_or_else(|| vec![centre; d]);
    if x0.len() != d {
        return Err(Error::Config { line: cfg.line_of("chain", "x0"), message: format!("x0 needs {d} coordinates") });
    }
    let alpha: Option<f64> = cfg.get("chain", "alpha")?;
    let m: Option<f64> = cfg.get("chain", "m")?;
    let model = match kind.as_str() {
        "direct" => Ok(ChainModel::direct(measure)),
        "metropolis" => ChainModel::metropolis(measure),
        "hit-and-run" => ChainModel::hit_and_run_on_support(measure, alpha.zip(m)),
        other => return Err(Error::Config { line, message: format!("unknown chain kind `{other}`") }),
    }
    .map_err(|e| Error::Config { line, message: e.to_string() })?;
    Ok((model, x0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    ChainStar,
    Pushback,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "chain-star" => Ok(ObjectiveKind::ChainStar),
            "pushback" => Ok(ObjectiveKind::Pushback),
            other => Err(Error::Parse(format!("unknown objective `{other}`"))),
        }
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectiveKind::ChainStar => "chain-star",
            ObjectiveKind::Pushback => "pushback",
        })
    }
}

/// Per-axis level count `ceil(n^{1/(2d)})`; the cover uses `levels^d` points.
pub fn default_cover_size(n: usize, d: usize) -> usize {
    let levels = (n as f64).powf(0.5 / d as f64).ceil().max(1.0) as usize;
    levels.pow(d as u32)
}

/// Discrepancy functionals of a driver for a fixed chain, start and cover.
pub struct Objective<'a> {
    pub kind: ObjectiveKind,
    pub model: &'a ChainModel,
    pub x0: &'a [f64],
    pub cover: &'a DeltaCover,
    pub replicas: usize,
    pub kernel_seed: u64,
}

impl Objective<'_> {
    /// Chain star discrepancy: exact when a sweep is available, else a cover bracket.
    pub fn chain(&self, driver: &DriverSequence) -> Result<DiscrepancyReport> {
        let path = iterate_flat(self.model, self.x0, driver.as_flat())?;
        let measure = self.model.target();
        let exact_ok = path.dim() <= 3 && path.len() <= SWEEP_MAX_POINTS && (measure.is_product() || path.dim() == 2);
        if exact_ok {
            star_discrepancy_exact(&path, measure)
        } else {
            star_discrepancy_via_cover(&path, self.cover)
        }
    }

    /// Chain star discrepancy restricted to the cover.
    pub fn chain_on_cover(&self, driver: &DriverSequence) -> Result<DiscrepancyReport> {
        let path = iterate_flat(self.model, self.x0, driver.as_flat())?;
        star_discrepancy_via_cover(&path, self.cover)
    }

    pub fn mode(&self) -> KernelMode {
        if self.model.is_direct() {
            KernelMode::Analytic
        } else {
            KernelMode::MonteCarlo { m: self.replicas, seed: self.kernel_seed, tolerance: None }
        }
    }

    /// Push-back discrepancy: exact for direct simulation, else a cover bracket.
    pub fn pushback(&self, driver: &DriverSequence) -> Result<DiscrepancyReport> {
        if self.model.is_direct() {
            pushback_discrepancy(driver, self.model, self.x0, None, KernelMode::Analytic)
        } else {
            pushback_discrepancy(driver, self.model, self.x0, Some(self.cover), self.mode())
        }
    }

    pub fn score(&self, driver: &DriverSequence) -> Result<f64> {
        match self.kind {
            ObjectiveKind::ChainStar => Ok(self.chain(driver)?.midpoint()),
            ObjectiveKind::Pushback => Ok(self.pushback(driver)?.midpoint()),
        }
    }

    pub fn select(&self, k: usize, n: usize, seed: u64) -> Result<Selection> {
        best_of_k(k, n, self.model.driver_dim(), seed, &self.kind.to_string(), |d| self.score(d))
    }
}

/// Settings shared by `converge` and `search`.
pub struct ChainStudy {
    pub seed: u64,
    pub measure: Arc<TargetMeasure>,
    pub model: ChainModel,
    pub x0: Vec<f64>,
    pub ns: Vec<usize>,
    pub k: usize,
    pub objective: ObjectiveKind,
    pub replicas: usize,
    pub cover_size: Option<usize>,
    /// Stand-in for the absolute constant in the bounds.
    pub c: f64,
}

impl ChainStudy {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let seed = cfg.get_or("experiment", "seed", 0u64)?;
        let measure = measure_from(cfg)?;
        let (model, x0) = chain_from(cfg, measure.clone())?;
        let ns = cfg
            .get_list::<usize>("grid", "n")?
            .ok_or_else(|| Error::Config { line: cfg.line_of("grid", "n"), message: "missing `n` in [grid]".into() })?;
        if ns.is_empty() || ns.contains(&0) {
            return Err(Error::Config { line: cfg.line_of("grid", "n"), message: "n values must be positive".into() });
        }
        let k = cfg.get_or("driver", "k", DEFAULT_K)?;
        if k == 0 {
            return Err(Error::Config { line: cfg.line_of("driver", "k"), message: "k must be positive".into() });
        }
        let objective = cfg.get_or("driver", "objective", ObjectiveKind::ChainStar)?;
        let replicas = cfg.get_or("kernel", "replicas", DEFAULT_REPLICAS)?;
        let cover_size = cfg.get("cover", "points")?;
        let c = cfg.get_or("bounds", "c", 1.0)?;
        cfg.get_str("experiment", "kind");
        cfg.check_unused()?;
        Ok(Self { seed, measure, model, x0, ns, k, objective, replicas, cover_size, c })
    }

    pub fn cover(&self, n: usize) -> Result<DeltaCover> {
        let r = self.cover_size.unwrap_or_else(|| default_cover_size(n, self.measure.dim()));
        quantile_cover(self.measure.clone(), r, self.seed)
    }

    pub fn objective<'a>(&'a self, cover: &'a DeltaCover, n: usize) -> Objective<'a> {
        Objective {
            kind: self.objective,
            model: &self.model,
            x0: &self.x0,
            cover,
            replicas: self.replicas,
            kernel_seed: derived_seed(self.seed, n) ^ 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergeRow {
    pub n: usize,
    pub chain: DiscrepancyReport,
    pub pushback: DiscrepancyReport,
    pub delta: f64,
    pub cardinality: f64,
    pub bound_chain: f64,
    pub bound_pushback: f64,
    pub gap: f64,
    pub median_score: f64,
    pub winner: usize,
}

pub const CONVERGE_HEADER: &str = "n,k,lower,upper,pushback_lower,pushback_upper,delta,cardinality,bound_chain,bound_pushback,gap,median_score,winner,slope,residual";

#[derive(Debug, Clone)]
pub struct ConvergeSummary {
    pub rows: Vec<ConvergeRow>,
    pub slope: f64,
    pub residual: f64,
}

/// For each `n`: best-of-K driver, chain and push-back discrepancies, the
/// measured-δ cover and the matching existence bounds; then the fitted
/// slope of `ln upper` against `ln n`.
pub fn run_converge(cfg: &Config, out: &mut dyn Write) -> Result<ConvergeSummary> {
    let study = ChainStudy::from_config(cfg)?;
    out.write_all(header(cfg).as_bytes()).map_err(io)?;
    out.write_all(format!("{CONVERGE_HEADER}\n").as_bytes()).map_err(io)?;
    let mut rows = Vec::new();
    for &n in &study.ns {
        match converge_row(&study, n) {
            Ok(row) => {
                out.write_all(format!("{}\n", converge_csv(&row, study.k)).as_bytes()).map_err(io)?;
                out.flush().map_err(io)?;
                rows.push(row);
            }
            Err(e) => {
                let _ = writeln!(out, "# error at n={n}: {e}");
                let _ = out.flush();
                return Err(e);
            }
        }
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ups: Vec<f64> = rows.iter().map(|r| r.chain.upper).collect();
    let (slope, _, residual) = if rows.len() >= 2 { fit_loglog(&ns, &ups)? } else { (f64::NAN, 0.0, f64::NAN) };
    out.write_all(format!("fit,{},,,,,,,,,,,,{},{}\n", study.k, fmt17(slope), fmt17(residual)).as_bytes())
        .map_err(io)?;
    Ok(ConvergeSummary { rows, slope, residual })
}

fn converge_row(study: &ChainStudy, n: usize) -> Result<ConvergeRow> {
    let cover = study.cover(n)?;
    let obj = study.objective(&cover, n);
    let sel = obj.select(study.k, n, derived_seed(study.seed, n))?;
    let chain = obj.chain(&sel.driver)?;
    let pushback = obj.pushback(&sel.driver)?;
    let cert =
        study.model.certificate().ok_or_else(|| Error::Certificate("chain has no ergodicity certificate".into()))?;
    let inputs = BoundInputs {
        alpha: cert.alpha,
        m: cert.m,
        n,
        delta: cover.delta().max(f64::MIN_POSITIVE),
        cardinality: cover.cardinality(),
        d: study.measure.dim(),
        c: study.c,
    };
    Ok(ConvergeRow {
        n,
        delta: cover.delta(),
        cardinality: cover.cardinality(),
        bound_chain: existence_bound(&inputs, ExistenceVariant::Chain)?,
        bound_pushback: existence_bound(&inputs, ExistenceVariant::Pushback)?,
        gap: gap_bound(cert.alpha, cert.m, n)?,
        median_score: sel.median_score(),
        winner: sel.index,
        chain,
        pushback,
    })
}

fn converge_csv(r: &ConvergeRow, k: usize) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},,",
        r.n,
        k,
        fmt17(r.chain.lower),
        fmt17(r.chain.upper),
        fmt17(r.pushback.lower),
        fmt17(r.pushback.upper),
        fmt17(r.delta),
        fmt17(r.cardinality),
        fmt17(r.bound_chain),
        fmt17(r.bound_pushback),
        fmt17(r.gap),
        fmt17(r.median_score),
        r.winner
    )
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub n: usize,
    pub selection: Selection,
    /// Chain discrepancy of the winner on the search cover.
    pub chain: DiscrepancyReport,
    /// Push-back discrepancy of the winner.
    pub pushback: DiscrepancyReport,
    pub gap: f64,
    /// Per-candidate CSV.
    pub scores_csv: String,
    /// Winning driver as CSV.
    pub driver_csv: String,
}

pub const SEARCH_HEADER: &str = "candidate,seed,score";

/// Best-of-K search at the first `n` of the grid.
pub fn run_driver_search(cfg: &Config) -> Result<SearchOutcome> {
    let study = ChainStudy::from_config(cfg)?;
    let n = study.ns[0];
    let cover = study.cover(n)?;
    let obj = study.objective(&cover, n);
    let seed = derived_seed(study.seed, n);
    let selection = obj.select(study.k, n, seed)?;
    let chain =
        if study.model.is_direct() { obj.chain(&selection.driver)? } else { obj.chain_on_cover(&selection.driver)? };
    let pushback = obj.pushback(&selection.driver)?;
    let cert =
        study.model.certificate().ok_or_else(|| Error::Certificate("chain has no ergodicity certificate".into()))?;
    let gap = gap_bound(cert.alpha, cert.m, n)?;
    let mut scores_csv = header(cfg);
    scores_csv.push_str(&format!(
        "# best: index={},score={},chain={},pushback={},gap={},mc_se={}\n",
        selection.index,
        fmt17(selection.score),
        fmt17(chain.midpoint()),
        fmt17(pushback.midpoint()),
        fmt17(gap),
        fmt17(pushback.mc_se)
    ));
    scores_csv.push_str(SEARCH_HEADER);
    scores_csv.push('\n');
    for (i, s) in selection.scores.iter().enumerate() {
        scores_csv.push_str(&format!("{i},{},{}\n", seed.wrapping_add(i as u64), fmt17(*s)));
    }
    let driver_csv = format!("{}{}", header(cfg), selection.driver.to_csv());
    Ok(SearchOutcome { n, selection, chain, pushback, gap, scores_csv, driver_csv })
}

/// Objective score of an existing driver under the search settings of `cfg`.
pub fn rescore_driver(cfg: &Config, driver: &DriverSequence) -> Result<f64> {
    let study = ChainStudy::from_config(cfg)?;
    let n = driver.len();
    let cover = study.cover(n)?;
    study.objective(&cover, n).score(driver)
}

/// Settings of the sphere study.
pub struct SphereStudy {
    pub seed: u64,
    pub d: usize,
    pub ns: Vec<usize>,
    pub k: usize,
    pub score_centers: usize,
    pub report_centers: usize,
    pub heights: usize,
    pub check_floor: f64,
}

impl SphereStudy {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let seed = cfg.get_or("experiment", "seed", 0u64)?;
        let d = cfg.get_or("sphere", "d", 2usize)?;
        let ns = cfg.get_list::<usize>("grid", "n")?.unwrap_or_else(|| vec![64, 128, 256, 512, 1024]);
        if ns.iter().any(|&n| n < 2) {
            return Err(Error::Config {
                line: cfg.line_of("grid", "n"),
                message: "n values must be at least 2".into(),
            });
        }
        let k = cfg.get_or("driver", "k", DEFAULT_K)?;
        let score_centers = cfg.get_or("cover", "score_centers", 4096usize)?;
        let report_centers = cfg.get_or("cover", "centers", 1usize << 18)?;
        let heights = cfg.get_or("cover", "heights", 1usize << 20)?;
        let check_floor = cfg.get_or("sphere", "floor_constant", 100.0)?;
        cfg.get_str("experiment", "kind");
        cfg.check_unused()?;
        Ok(Self { seed, d, ns, k, score_centers, report_centers, heights, check_floor })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SphereRow {
    pub n: usize,
    pub report: DiscrepancyReport,
    pub score: f64,
    pub median_score: f64,
    pub beck_floor: f64,
    pub budget: f64,
}

#[derive(Debug, Clone)]
pub struct SphereSummary {
    pub rows: Vec<SphereRow>,
    pub slope: f64,
    pub residual: f64,
    /// Budget constant calibrated at the first `n`.
    pub c: f64,
    pub score_delta: f64,
    pub report_delta: f64,
    pub report_mesh: f64,
}

pub const SPHERE_HEADER: &str = "n,lower,upper,delta,score,median_score,beck_floor,budget,slope,residual";

/// Best-of-K point sets on `S^d`, selected on a coarse cover and reported on
/// a fine one.
pub fn run_sphere(cfg: &Config, out: &mut dyn Write) -> Result<SphereSummary> {
    let study = SphereStudy::from_config(cfg)?;
    let coarse = cap_cover_override(study.score_centers, study.heights, study.d, study.seed)?;
    let fine = cap_cover_override(study.report_centers, study.heights, study.d, study.seed)?;
    out.write_all(header(cfg).as_bytes()).map_err(io)?;
    writeln!(
        out,
        "# score cover: centers={},delta={},mesh={}\n# report cover: centers={},delta={},mesh={}\n{SPHERE_HEADER}",
        study.score_centers,
        fmt17(coarse.delta()),
        fmt17(coarse.mesh()),
        study.report_centers,
        fmt17(fine.delta()),
        fmt17(fine.mesh())
    )
    .map_err(io)?;
    let mut rows: Vec<SphereRow> = Vec::new();
    let mut c = f64::NAN;
    for &n in &study.ns {
        let row = sphere_row(&study, &coarse, &fine, n, &mut c);
        match row {
            Ok(row) => {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},,",
                    n,
                    fmt17(row.report.lower),
                    fmt17(row.report.upper),
                    fmt17(row.report.delta),
                    fmt17(row.score),
                    fmt17(row.median_score),
                    fmt17(row.beck_floor),
                    fmt17(row.budget)
                )
                .map_err(io)?;
                out.flush().map_err(io)?;
                rows.push(row);
            }
            Err(e) => {
                let _ = writeln!(out, "# error at n={n}: {e}");
                return Err(e);
            }
        }
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ups: Vec<f64> = rows.iter().map(|r| r.report.upper).collect();
    let (slope, _, residual) = if rows.len() >= 2 { fit_loglog(&ns, &ups)? } else { (f64::NAN, 0.0, f64::NAN) };
    writeln!(out, "fit,,,,,,,,{},{}", fmt17(slope), fmt17(residual)).map_err(io)?;
    Ok(SphereSummary {
        rows,
        slope,
        residual,
        c,
        score_delta: coarse.delta(),
        report_delta: fine.delta(),
        report_mesh: fine.mesh(),
    })
}

fn sphere_row(study: &SphereStudy, coarse: &CapCover, fine: &CapCover, n: usize, c: &mut f64) -> Result<SphereRow> {
    let d = study.d;
    let sel = best_of_k(study.k, n, d, derived_seed(study.seed, n), "cap", |drv| {
        Ok(cap_discrepancy_via_cover(&sphere_points(drv.as_flat(), d)?, coarse)?.lower)
    })?;
    let report = cap_discrepancy_via_cover(&sphere_points(sel.driver.as_flat(), d)?, fine)?;
    let (shape, beck) = sphere_bounds(n as f64, d, 1.0)?;
    if c.is_nan() {
        *c = report.upper / shape;
    }
    Ok(SphereRow {
        n,
        score: sel.score,
        median_score: sel.median_score(),
        beck_floor: beck / study.check_floor,
        budget: *c * shape,
        report,
    })
}

/// The test family: `family` in `poly` (cubic with coefficients in `[-2, 2]`)
/// and `exp` (`a e^{b x}`, `a ∈ [0.2, 2]`, `b ∈ [-2, 2]`), drawn from `rng_seed`.
pub fn test_function(family: &str, rng_seed: u64) -> Result<Function1d> {
    let drv = iid_driver(rng_seed, 1, 4)?;
    let u = drv.row(0);
    match family {
        "poly" => Ok(Function1d::polynomial(&[4.0 * u[0] - 2.0, 4.0 * u[1] - 2.0, 4.0 * u[2] - 2.0, 4.0 * u[3] - 2.0])),
        "exp" => Ok(Function1d::exponential(0.2 + 1.8 * u[0], 4.0 * u[1] - 2.0)),
        other => Err(Error::Parameter(format!("unknown function family `{other}`"))),
    }
}

/// Koksma–Hlawka checks on random point sets (d = 1 uniform, or d = 2
/// products of family members).
pub fn run_kh_check(cfg: &Config, out: &mut dyn Write) -> Result<Vec<KhReport>> {
    let seed = cfg.get_or("experiment", "seed", 0u64)?;
    let sets = cfg.get_or("kh", "sets", 100usize)?;
    let n = cfg.get_or("kh", "n", 32usize)?;
    let d = cfg.get_or("kh", "d", 1usize)?;
    let families = cfg.get_list::<String>("kh", "families")?.unwrap_or_else(|| vec!["poly".into(), "exp".into()]);
    let orders = cfg.get_list::<NormOrder>("kh", "p")?.unwrap_or_else(|| vec![NormOrder::Infinity, NormOrder::Two]);
    cfg.get_str("experiment", "kind");
    cfg.check_unused()?;
    if !(1..=2).contains(&d) {
        return Err(Error::Config {
            line: cfg.line_of("kh", "d"),
            message: "kh-check supports d = 1 and d = 2".into(),
        });
    }
    let measure = TargetMeasure::uniform_cube(d)?;
    out.write_all(header(cfg).as_bytes()).map_err(io)?;
    writeln!(out, "{KH_HEADER}").map_err(io)?;
    let mut reports = Vec::new();
    for set in 0..sets {
        let pts = PointSet::from_flat(d, iid_driver(seed.wrapping_add(set as u64), n, d)?.as_flat().to_vec())?;
        for (fi, fam) in families.iter().enumerate() {
            let fseed = seed.wrapping_add(1 << 32).wrapping_add((set * families.len() + fi) as u64);
            for &p in &orders {
                let g = test_function(fam, fseed)?;
                let f = if d == 1 {
                    H1Function::line(g, p.dual())
                } else {
                    H1Function::product(g, test_function(fam, fseed ^ 0xabcd)?, p.dual())
                };
                match kh_check(&f, &pts, &measure, p) {
                    Ok(r) => {
                        writeln!(out, "{}", r.csv_row()).map_err(io)?;
                        reports.push(r);
                    }
                    Err(e) => {
                        let _ = writeln!(out, "# error at set {set}: {e}");
                        return Err(e);
                    }
                }
            }
        }
    }
    Ok(reports)
}

pub const BOUNDS_HEADER: &str = "evaluator,alpha,M,n,c_dev,delta,cardinality,d,c,value,raw";

/// Evaluates one bound over a list of `n` values.
///
/// `[bounds]`: `evaluator` in `gap`, `hoeffding`, `existence`, `cardinality`,
/// `kh-budget`, `sphere`, `beck`; parameters `alpha`, `m`, `n` (list),
/// `c_dev`, `delta`, `cardinality`, `d`, `c`, `variant`, `discrepancy`, `norm`.
pub fn run_bounds(cfg: &Config, out: &mut dyn Write) -> Result<Vec<f64>> {
    let evaluator = cfg.require_str("bounds", "evaluator")?.to_string();
    let alpha = cfg.get_or("bounds", "alpha", 0.0)?;
    let m = cfg.get_or("bounds", "m", 1.0)?;
    let ns = cfg.get_list::<usize>("bounds", "n")?.unwrap_or_else(|| vec![1]);
    let c_dev = cfg.get_or("bounds", "c_dev", 0.5)?;
    let delta = cfg.get_or("bounds", "delta", 1.0)?;
    let cardinality = cfg.get_or("bounds", "cardinality", 1.0)?;
    let d = cfg.get_or("bounds", "d", 1usize)?;
    let c = cfg.get_or("bounds", "c", 1.0)?;
    let variant = cfg.get_or("bounds", "variant", ExistenceVariant::Chain)?;
    let disc = cfg.get_or("bounds", "discrepancy", 0.0)?;
    let norm = cfg.get_or("bounds", "norm", 1.0)?;
    cfg.get_str("experiment", "kind");
    cfg.get_str("experiment", "seed");
    cfg.check_unused()?;
    let line = cfg.line_of("bounds", "evaluator");
    out.write_all(header(cfg).as_bytes()).map_err(io)?;
    writeln!(out, "{BOUNDS_HEADER}").map_err(io)?;
    let mut values = Vec::new();
    for &n in &ns {
        let (value, raw) = match evaluator.as_str() {
            "gap" => {
                let v = gap_bound(alpha, m, n)?;
                (v, v)
            }
            "hoeffding" => {
                let h = hoeffding_tail(alpha, m, n, c_dev)?;
                (h.clamped, h.raw)
            }
            "existence" => {
                let b = BoundInputs { alpha, m, n, delta, cardinality, d, c };
                let v = existence_bound(&b, variant)?;
                (v, v)
            }
            "cardinality" => {
                let v = cover_cardinality_bound(d, delta, c)?.value;
                (v, v)
            }
            "kh-budget" => {
                let v = koksma_hlawka_budget(disc, alpha, m, n, norm)?;
                (v, v)
            }
            "sphere" => {
                let v = sphere_bounds(n as f64, d, c)?.0;
                (v, v)
            }
            "beck" => {
                let v = sphere_bounds(n as f64, d, c)?.1;
                (v, v)
            }
            other => return Err(Error::Config { line, message: format!("unknown evaluator `{other}`") }),
        };
        writeln!(
            out,
            "{evaluator},{},{},{n},{},{},{},{d},{},{},{}",
            fmt17(alpha),
            fmt17(m),
            fmt17(c_dev),
            fmt17(delta),
            fmt17(cardinality),
            fmt17(c),
            fmt17(value),
            fmt17(raw)
        )
        .map_err(io)?;
        values.push(value);
    }
    Ok(values)
}

/// Replays the driver of a provenance string, when it is replayable.
pub fn replay(prov: &Provenance, n: usize, s: usize) -> Option<Result<DriverSequence>> {
    match prov {
        Provenance::IidSeeded(seed) => Some(iid_driver(*seed, n, s)),
        Provenance::Selected { seed, index, .. } => Some(iid_driver(seed.wrapping_add(*index as u64), n, s)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::parse(text).unwrap()
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let ns = [16.0, 64.0, 256.0, 1024.0];
        let ys: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        let (s, b, r) = fit_loglog(&ns, &ys).unwrap();
        assert!((s + 0.5).abs() < 1e-12 && (b - 3f64.ln()).abs() < 1e-12 && r < 1e-12);
    }

    #[test]
    fn converge_small_grid() {
        let c = cfg("[experiment]\nkind = converge\nseed = 3\n[grid]\nn = 16, 64, 256\n[driver]\nk = 4\n");
        let mut buf = Vec::new();
        let s = run_converge(&c, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# mcqmc "));
        assert_eq!(s.rows.len(), 3);
        for r in &s.rows {
            // direct simulation: both discrepancies agree
            assert!((r.chain.upper - r.pushback.upper).abs() < 1e-12);
            assert_eq!(r.gap, 0.0);
        }
        assert!(text.lines().last().unwrap().starts_with("fit,"));
        let mut again = Vec::new();
        run_converge(&Config::parse_any(&text).unwrap(), &mut again).unwrap();
        assert_eq!(String::from_utf8(again).unwrap(), text);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let c = cfg("[experiment]\nkind = converge\n[grid]\nn = 16\n[driver]\nkk = 4\n");
        assert!(matches!(run_converge(&c, &mut Vec::new()), Err(Error::Config { line: 6, .. })));
        let c = cfg("[grid]\nn = 16\n[measure]\nkind = moon\n");
        assert!(matches!(run_converge(&c, &mut Vec::new()), Err(Error::Config { line: 4, .. })));
    }

    #[test]
    fn search_rescores_identically() {
        let c = cfg("[experiment]\nseed = 11\n[grid]\nn = 64\n[driver]\nk = 8\n");
        let s = run_driver_search(&c).unwrap();
        assert!(s.selection.score <= s.selection.median_score());
        let driver = DriverSequence::from_csv(&s.driver_csv).unwrap();
        assert_eq!(rescore_driver(&c, &driver).unwrap().to_bits(), s.selection.score.to_bits());
        let replayed = replay(driver.provenance(), 64, 1).unwrap().unwrap();
        assert_eq!(replayed.as_flat(), driver.as_flat());
    }

    #[test]
    fn bounds_sweep() {
        let c = cfg("[bounds]\nevaluator = hoeffding\nn = 8, 100\nc_dev = 0.5\n");
        let mut buf = Vec::new();
        let v = run_bounds(&c, &mut buf).unwrap();
        assert_eq!(v[0], 1.0);
        assert!((v[1] - 0.1122695256682674).abs() < 1e-15);
        let c = cfg("[bounds]\nevaluator = nope\n");
        assert!(matches!(run_bounds(&c, &mut Vec::new()), Err(Error::Config { line: 2, .. })));
    }

    #[test]
    fn kh_small() {
        let c = cfg("[kh]\nsets = 3\nn = 8\n");
        let mut buf = Vec::new();
        let r = run_kh_check(&c, &mut buf).unwrap();
        assert_eq!(r.len(), 3 * 2 * 2);
        assert!(r.iter().all(|x| x.holds));
        let c = cfg("[kh]\nsets = 2\nn = 6\nd = 2\n");
        assert!(run_kh_check(&c, &mut Vec::new()).unwrap().iter().all(|x| x.holds));
    }

    #[test]
    fn sphere_small() {
        let c =
            cfg("[grid]\nn = 16, 32\n[driver]\nk = 2\n[cover]\nscore_centers = 256\ncenters = 1024\nheights = 4096\n");
        let mut buf = Vec::new();
        let s = run_sphere(&c, &mut buf).unwrap();
        assert_eq!(s.rows.len(), 2);
        assert!((s.rows[0].budget - s.rows[0].report.upper).abs() < 1e-15);
        for r in &s.rows {
            assert!(r.report.lower >= r.beck_floor);
        }
    }
}
