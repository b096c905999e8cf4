//! δ-covers of the anchored-box family and their validation.
//!
//! A box cover is the product grid `∏_j {-inf, +inf} ∪ {z_j}` over the
//! coordinates of `r` reference points. Every grid anchor `a` contributes the
//! open box `(-inf, a)` and the closed box `(-inf, a]`; the closed reading is
//! the inner set of a sandwich, the open one the outer set. Axes keep repeated
//! coordinate values so that the cardinality is `(r + 2)^d`.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::csv::{fmt17, Table};
use crate::discrepancy::star_discrepancy_exact;
use crate::drivers::best_of_k;
use crate::error::{Error, Result};
use crate::measures::TargetMeasure;
use crate::points::{ExtReal, PointSet};

/// Slack allowed on top of δ when validating.
pub const VALIDATION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DeltaCover {
    measure: Arc<TargetMeasure>,
    /// Sorted anchors per axis, with multiplicity.
    axes: Vec<Vec<ExtReal>>,
    /// Sorted distinct anchors per axis.
    unique: Vec<Vec<ExtReal>>,
    delta: f64,
}

fn dedup_axis(axis: &[ExtReal]) -> Vec<ExtReal> {
    let mut u = axis.to_vec();
    u.dedup_by(|a, b| a.total_cmp(b).is_eq());
    u
}

impl DeltaCover {
    /// Cover from explicit per-axis anchors and a claimed δ.
    pub fn from_axes(measure: Arc<TargetMeasure>, mut axes: Vec<Vec<ExtReal>>, delta: f64) -> Result<Self> {
        if axes.len() != measure.dim() {
            return Err(Error::Dimension { expected: measure.dim(), got: axes.len() });
        }
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::Parameter(format!("delta {delta} outside (0, 1]")));
        }
        if axes.iter().any(Vec::is_empty) {
            return Err(Error::Parameter("cover axis without anchors".into()));
        }
        for axis in &mut axes {
            axis.sort_by(ExtReal::total_cmp);
        }
        let unique = axes.iter().map(|a| dedup_axis(a)).collect();
        Ok(Self { measure, axes, unique, delta })
    }

    /// The cover `{∅, G}` (all anchors infinite) with δ = 1.
    pub fn trivial(measure: Arc<TargetMeasure>) -> Self {
        let axes = vec![vec![ExtReal::NegInf, ExtReal::PosInf]; measure.dim()];
        Self::from_axes(measure, axes, 1.0).expect("trivial cover is well formed")
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn measure(&self) -> &Arc<TargetMeasure> {
        &self.measure
    }

    /// Anchors of axis `j`, with multiplicity.
    pub fn axis(&self, j: usize) -> &[ExtReal] {
        &self.axes[j]
    }

    /// Distinct anchors of axis `j`.
    pub fn unique_axis(&self, j: usize) -> &[ExtReal] {
        &self.unique[j]
    }

    /// Number of anchor tuples, `∏_j |axis_j|`.
    pub fn cardinality(&self) -> f64 {
        self.axes.iter().map(|a| a.len() as f64).product()
    }

    /// Number of distinct anchor tuples.
    pub fn distinct_cardinality(&self) -> usize {
        self.unique.iter().map(Vec::len).product()
    }

    /// Visits every distinct anchor tuple in lexicographic index order.
    pub fn for_each_anchor(&self, mut f: impl FnMut(&[usize], &[ExtReal])) {
        let d = self.dim();
        let mut idx = vec![0usize; d];
        let mut anchor: Vec<ExtReal> = self.unique.iter().map(|a| a[0]).collect();
        loop {
            f(&idx, &anchor);
            let mut j = d;
            loop {
                if j == 0 {
                    return;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < self.unique[j].len() {
                    anchor[j] = self.unique[j][idx[j]];
                    break;
                }
                idx[j] = 0;
                anchor[j] = self.unique[j][0];
            }
        }
    }

    /// Hash of the anchors and δ, used in cache keys.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for axis in &self.axes {
            axis.len().hash(&mut h);
            for a in axis {
                a.to_f64().to_bits().hash(&mut h);
            }
        }
        self.delta.to_bits().hash(&mut h);
        h.finish()
    }

    /// Removes one occurrence of `value` from axis `j`.
    pub fn without_anchor(&self, j: usize, value: ExtReal) -> Result<Self> {
        let mut axes = self.axes.clone();
        let pos = axes[j]
            .iter()
            .position(|a| a.total_cmp(&value).is_eq())
            .ok_or_else(|| Error::Parameter(format!("anchor {value} not on axis {j}")))?;
        axes[j].remove(pos);
        Self::from_axes(self.measure.clone(), axes, self.delta)
    }

    /// Tightest sandwich `(-inf, x] ⊆ (-inf, z) ⊆ (-inf, y)` for the test set
    /// with anchor `z`; `None` when some axis has no admissible outer anchor.
    pub fn sandwich(&self, z: &[ExtReal]) -> Option<(Vec<ExtReal>, Vec<ExtReal>)> {
        let mut inner = Vec::with_capacity(z.len());
        let mut outer = Vec::with_capacity(z.len());
        for (axis, &zj) in self.unique.iter().zip(z) {
            // inner: largest anchor a with (-inf, a] ⊆ (-inf, z_j) on this axis
            let fits = |a: &ExtReal| a.is_neg_inf() || a.total_cmp(&zj).is_lt() || (a.is_pos_inf() && zj.is_pos_inf());
            inner.push(*axis.iter().rev().find(|a| fits(a))?);
            outer.push(*axis.iter().find(|a| a.total_cmp(&zj).is_ge())?);
        }
        Some((inner, outer))
    }

    /// CSV export: δ and measure in comments, then `kind,a_1..a_d,oc` per anchor tuple.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = format!("# delta={}\n# measure={}\nkind", fmt17(self.delta), self.measure.describe());
        for j in 1..=d {
            out.push_str(&format!(",a_{j}"));
        }
        out.push_str(",oc\n");
        let mut idx = vec![0usize; d];
        loop {
            out.push_str("box");
            for (j, &i) in idx.iter().enumerate() {
                out.push(',');
                out.push_str(&self.axes[j][i].to_string());
            }
            out.push_str(",oc\n");
            let mut j = d;
            loop {
                if j == 0 {
                    return out;
                }
                j -= 1;
                idx[j] += 1;
                if idx[j] < self.axes[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
    }

    /// Rebuilds a cover written by [`DeltaCover::to_csv`].
    pub fn from_csv(text: &str, measure: Arc<TargetMeasure>) -> Result<Self> {
        let table = Table::parse(text)?;
        let delta = table
            .comments
            .iter()
            .find_map(|c| c.trim().strip_prefix("delta="))
            .ok_or_else(|| Error::Schema("delta".into()))
            .and_then(crate::csv::parse_f64)?;
        let d = measure.dim();
        let cols: Vec<usize> = (1..=d).map(|j| table.column(&format!("a_{j}"))).collect::<Result<_>>()?;
        let rows: Vec<Vec<ExtReal>> = table
            .rows
            .iter()
            .map(|r| cols.iter().map(|&c| r[c].parse::<ExtReal>()).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let first = rows.first().ok_or_else(|| Error::Parse("cover without sets".into()))?.clone();
        let mut axes = Vec::with_capacity(d);
        for j in 0..d {
            let axis: Vec<ExtReal> = rows
                .iter()
                .filter(|r| (0..d).all(|k| k == j || r[k].total_cmp(&first[k]).is_eq()))
                .map(|r| r[j])
                .collect();
            axes.push(axis);
        }
        Self::from_axes(measure, axes, delta)
    }
}

/// Reference points with their measured star discrepancy.
#[derive(Debug, Clone)]
pub struct ReferencePoints {
    pub points: PointSet,
    pub discrepancy: f64,
    pub method: &'static str,
}

/// Default number of candidates for non-product reference points.
pub const REFERENCE_CANDIDATES: usize = 32;

/// `r` reference points for `measure` and their achieved star discrepancy.
///
/// Product measures use the quantile mid-grid with `r^{1/d}` levels per axis.
/// Other measures take the best of [`REFERENCE_CANDIDATES`] uniform samples.
pub fn reference_points(measure: &TargetMeasure, r: usize, seed: u64) -> Result<ReferencePoints> {
    if r == 0 {
        return Err(Error::Parameter("need at least one reference point".into()));
    }
    let d = measure.dim();
    if measure.is_product() {
        let m = (r as f64).powf(1.0 / d as f64).round() as usize;
        if m.checked_pow(d as u32) != Some(r) {
            return Err(Error::Parameter(format!("r = {r} is not a {d}-th power")));
        }
        let levels: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                (1..=m)
                    .map(|i| {
                        let p = (2 * i - 1) as f64 / (2 * m) as f64;
                        measure.axis_quantile(j, p).expect("product measure has quantiles")
                    })
                    .collect()
            })
            .collect();
        let mut points = PointSet::with_capacity(d, r);
        let mut idx = vec![0usize; d];
        let mut row = vec![0.0; d];
        for _ in 0..r {
            for j in 0..d {
                row[j] = levels[j][idx[j]];
            }
            points.push(&row)?;
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < m {
                    break;
                }
                idx[j] = 0;
            }
        }
        let discrepancy = star_discrepancy_exact(&points, measure)?.upper;
        return Ok(ReferencePoints { points, discrepancy, method: "quantile-grid" });
    }
    let s = measure.generator_dim();
    let to_points = |flat: &[f64]| -> Result<PointSet> {
        let mut pts = PointSet::with_capacity(d, r);
        let mut y = vec![0.0; d];
        for u in flat.chunks_exact(s) {
            measure.generate_into(u, &mut y)?;
            pts.push(&y)?;
        }
        Ok(pts)
    };
    let sel = best_of_k(REFERENCE_CANDIDATES, r, s, seed, "star-discrepancy", |drv| {
        Ok(star_discrepancy_exact(&to_points(drv.as_flat())?, measure)?.upper)
    })?;
    let points = to_points(sel.driver.as_flat())?;
    Ok(ReferencePoints { points, discrepancy: sel.score, method: "best-of-k" })
}

/// Product-grid cover over the coordinates of `points`, with δ = 2 D*(points).
pub fn build_box_cover(points: &PointSet, measure: Arc<TargetMeasure>) -> Result<DeltaCover> {
    if points.is_empty() {
        return Err(Error::Parameter("cannot build a cover from no points".into()));
    }
    if points.dim() != measure.dim() {
        return Err(Error::Dimension { expected: measure.dim(), got: points.dim() });
    }
    let support = measure.support();
    if let Some(i) = (0..points.len()).find(|&i| !support.contains(points.row(i))) {
        return Err(Error::Domain(format!("reference point {i} lies outside the support")));
    }
    let achieved = star_discrepancy_exact(points, &measure)?.upper;
    let axes = (0..points.dim())
        .map(|j| {
            let mut axis = vec![ExtReal::NegInf, ExtReal::PosInf];
            axis.extend(points.rows().map(|r| ExtReal::Finite(r[j])));
            axis
        })
        .collect();
    DeltaCover::from_axes(measure, axes, (2.0 * achieved).min(1.0))
}

/// Reference points plus cover in one step.
pub fn quantile_cover(measure: Arc<TargetMeasure>, r: usize, seed: u64) -> Result<DeltaCover> {
    let refs = reference_points(&measure, r, seed)?;
    build_box_cover(&refs.points, measure)
}

#[derive(Debug, Clone)]
pub struct CoverValidation {
    pub samples: usize,
    pub max_gap: f64,
    pub delta: f64,
    pub passed: bool,
    /// Anchor of the test set with the largest gap.
    pub witness: Vec<ExtReal>,
}

/// Samples test sets `(-inf, z)` and checks that the tightest sandwich in the
/// cover has π-gap at most δ.
///
/// Anchors are drawn from the target law, with occasional infinite
/// coordinates and occasional exact hits on cover anchors.
pub fn validate_cover(cover: &DeltaCover, samples: usize, seed: u64) -> Result<CoverValidation> {
    let measure = cover.measure();
    let d = cover.dim();
    let s = measure.generator_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; s];
    let mut y = vec![0.0; d];
    let mut worst = (f64::NEG_INFINITY, Vec::new());
    for _ in 0..samples {
        u.iter_mut().for_each(|v| *v = rng.random::<f64>());
        measure.generate_into(&u, &mut y)?;
        let z: Vec<ExtReal> = (0..d)
            .map(|j| match rng.random_range(0..16) {
                0 => ExtReal::NegInf,
                1 | 2 => ExtReal::PosInf,
                3 | 4 => {
                    let axis = cover.axis(j);
                    axis[rng.random_range(0..axis.len())]
                }
                _ => ExtReal::Finite(y[j]),
            })
            .collect();
        let (inner, outer) =
            cover.sandwich(&z).ok_or_else(|| Error::NoSandwich { witness: z.iter().map(|a| a.to_f64()).collect() })?;
        let gap = measure.cdf_box(&outer)? - measure.cdf_box(&inner)?;
        if gap > worst.0 {
            worst = (gap, z);
        }
    }
    let max_gap = worst.0.max(0.0);
    Ok(CoverValidation {
        samples,
        max_gap,
        delta: cover.delta(),
        passed: max_gap <= cover.delta() + VALIDATION_SLACK,
        witness: worst.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::ExtReal::{Finite, NegInf, PosInf};

    fn unit(d: usize) -> Arc<TargetMeasure> {
        Arc::new(TargetMeasure::uniform_cube(d).unwrap())
    }

    #[test]
    fn quantile_mid_grid_in_one_dimension() {
        let r = reference_points(&unit(1), 3, 0).unwrap();
        let want = [1.0 / 6.0, 0.5, 5.0 / 6.0];
        for (a, b) in r.points.as_flat().iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((r.discrepancy - 1.0 / 6.0).abs() < 1e-15);
        let r1 = reference_points(&unit(1), 1, 0).unwrap();
        assert_eq!(r1.points.as_flat(), &[0.5]);
        assert_eq!(r1.discrepancy, 0.5);
    }

    #[test]
    fn quantile_grid_in_two_dimensions() {
        let r = reference_points(&unit(2), 4, 0).unwrap();
        let rows: Vec<Vec<f64>> = r.points.rows().map(<[f64]>::to_vec).collect();
        assert_eq!(rows, vec![vec![0.25, 0.25], vec![0.25, 0.75], vec![0.75, 0.25], vec![0.75, 0.75]]);
        assert!(matches!(reference_points(&unit(2), 5, 0), Err(Error::Parameter(_))));
    }

    #[test]
    fn one_dimensional_cover_example() {
        let c = quantile_cover(unit(1), 3, 0).unwrap();
        assert_eq!(c.cardinality(), 5.0);
        assert!((c.delta() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.axis(0)[0], NegInf);
        assert_eq!(c.axis(0)[4], PosInf);
    }

    #[test]
    fn two_dimensional_cardinality_counts_multiplicity() {
        let c = quantile_cover(unit(2), 4, 0).unwrap();
        assert_eq!(c.cardinality(), 36.0);
        assert_eq!(c.distinct_cardinality(), 16);
    }

    #[test]
    fn trivial_cover_passes() {
        let c = DeltaCover::trivial(unit(2));
        let v = validate_cover(&c, 200, 1).unwrap();
        assert!(v.passed);
        assert!(v.max_gap <= 1.0);
    }

    #[test]
    fn validation_gap_matches_quantile_spacing() {
        let c = quantile_cover(unit(1), 3, 0).unwrap();
        let v = validate_cover(&c, 1000, 3).unwrap();
        assert!(v.passed);
        assert!(v.max_gap > 1.0 / 3.0 - 1e-3 && v.max_gap <= 1.0 / 3.0 + 1e-15);
    }

    #[test]
    fn deleted_anchor_is_detected() {
        let c = quantile_cover(unit(1), 3, 0).unwrap();
        let broken = c.without_anchor(0, Finite(0.5)).unwrap();
        let v = validate_cover(&broken, 1000, 3).unwrap();
        assert!(!v.passed);
        let w = v.witness[0].to_f64();
        assert!(w > 1.0 / 6.0 && w <= 5.0 / 6.0, "witness {w}");
    }

    #[test]
    fn missing_outer_anchor_reports_no_sandwich() {
        let c = DeltaCover::from_axes(unit(1), vec![vec![NegInf, Finite(0.5)]], 0.5).unwrap();
        assert!(matches!(validate_cover(&c, 100, 0), Err(Error::NoSandwich { .. })));
    }

    #[test]
    fn csv_round_trip() {
        let c = quantile_cover(unit(2), 9, 0).unwrap();
        let back = DeltaCover::from_csv(&c.to_csv(), unit(2)).unwrap();
        assert_eq!(back.fingerprint(), c.fingerprint());
    }

    #[test]
    fn anchors_enumerate_distinct_tuples() {
        let c = quantile_cover(unit(2), 4, 0).unwrap();
        let mut count = 0;
        c.for_each_anchor(|_, _| count += 1);
        assert_eq!(count, 16);
    }

    #[test]
    fn ball_reference_points_use_search() {
        let m = Arc::new(TargetMeasure::uniform_ball(2, 1.0).unwrap());
        let refs = reference_points(&m, 16, 4).unwrap();
        assert_eq!(refs.method, "best-of-k");
        let c = build_box_cover(&refs.points, m).unwrap();
        assert!(validate_cover(&c, 500, 8).unwrap().passed);
    }
}
