//! Statistical checks of the measure generators against their CDFs.

use mcqmc_core::{Density1d, ExtReal, TargetMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const SAMPLES: usize = 100_000;

fn measures() -> Vec<(&'static str, TargetMeasure, (f64, f64))> {
    vec![
        ("uniform d=1", TargetMeasure::uniform_cube(1).unwrap(), (0.0, 1.0)),
        ("uniform d=2", TargetMeasure::uniform_cube(2).unwrap(), (0.0, 1.0)),
        ("box d=2", TargetMeasure::uniform_box(2, -1.0, 2.0).unwrap(), (-1.0, 2.0)),
        ("linear", TargetMeasure::density(vec![Density1d::linear(2.0, -1.0).unwrap()]).unwrap(), (0.0, 1.0)),
        ("exponential", TargetMeasure::density(vec![Density1d::exponential(3.0).unwrap()]).unwrap(), (0.0, 1.0)),
        ("constant", TargetMeasure::density(vec![Density1d::constant(2.5).unwrap()]).unwrap(), (0.0, 1.0)),
        (
            "product d=2",
            TargetMeasure::density(vec![Density1d::linear(1.0, 2.0).unwrap(), Density1d::exponential(-1.0).unwrap()])
                .unwrap(),
            (0.0, 1.0),
        ),
        ("disk", TargetMeasure::uniform_ball(2, 1.0).unwrap(), (-1.0, 1.0)),
    ]
}

fn sample(m: &TargetMeasure, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = m.generator_dim();
    (0..SAMPLES)
        .map(|_| {
            let u: Vec<f64> = (0..s).map(|_| rng.random::<f64>()).collect();
            m.generate(&u).unwrap()
        })
        .collect()
}

#[test]
fn ks_distance_at_100_anchors() {
    let limit = 3.0 / (SAMPLES as f64).sqrt();
    for (name, m, (lo, hi)) in measures() {
        let ys = sample(&m, 123);
        let mut rng = ChaCha8Rng::seed_from_u64(456);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let a: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(lo..hi)).collect();
            let emp = ys.iter().filter(|y| y.iter().zip(&a).all(|(v, b)| v < b)).count() as f64 / SAMPLES as f64;
            let anchor: Vec<ExtReal> = a.iter().map(|&v| ExtReal::Finite(v)).collect();
            worst = worst.max((emp - m.cdf_box(&anchor).unwrap()).abs());
        }
        assert!(worst < limit, "{name}: KS distance {worst} >= {limit}");
    }
}

#[test]
fn disk_equal_area_cells_chi_square() {
    let m = TargetMeasure::uniform_ball(2, 1.0).unwrap();
    let ys = sample(&m, 789);
    let (rings, sectors) = (4usize, 8usize);
    let mut counts = vec![0usize; rings * sectors];
    for y in &ys {
        let r2 = y[0] * y[0] + y[1] * y[1];
        assert!(r2 <= 1.0 + 1e-12);
        let ring = ((r2 * rings as f64) as usize).min(rings - 1);
        let angle = y[1].atan2(y[0]).rem_euclid(std::f64::consts::TAU);
        let sector = ((angle / std::f64::consts::TAU * sectors as f64) as usize).min(sectors - 1);
        counts[ring * sectors + sector] += 1;
    }
    let expected = SAMPLES as f64 / counts.len() as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new((counts.len() - 1) as f64).unwrap().inverse_cdf(0.999);
    assert!(chi2 < critical, "chi-square {chi2} >= {critical}");
}

#[test]
fn cdf_is_monotone_along_nested_anchors() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for (name, m, (lo, hi)) in measures() {
        let mut a: Vec<f64> = vec![lo - 0.1; m.dim()];
        let mut last = 0.0;
        for _ in 0..100 {
            let j = rng.random_range(0..m.dim());
            a[j] += rng.random::<f64>() * (hi - lo) / 20.0;
            let anchor: Vec<ExtReal> = a.iter().map(|&v| ExtReal::Finite(v)).collect();
            let v = m.cdf_box(&anchor).unwrap();
            assert!(v >= last - 1e-12, "{name}: cdf decreased from {last} to {v}");
            last = v;
        }
    }
}
