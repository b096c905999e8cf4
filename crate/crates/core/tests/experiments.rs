use mcqmc_core::config::Config;
use mcqmc_core::experiments::{run_converge, run_driver_search};

#[test]
fn single_iid_driver_has_monte_carlo_slope() {
    let cfg = Config::parse(
        "[experiment]\nseed = 8\n[grid]\nn = 16, 32, 64, 128, 256, 512, 1024, 2048, 4096\n[driver]\nk = 1\n",
    )
    .unwrap();
    let s = run_converge(&cfg, &mut std::io::sink()).unwrap();
    assert!((s.slope + 0.5).abs() <= 0.15, "slope {}", s.slope);
}

#[test]
fn metropolis_search_scores_agree_up_to_the_gap() {
    let cfg = Config::parse(
        "[experiment]\nseed = 21\n[measure]\nkind = linear\na = 2\nb = -1\n[chain]\nkind = metropolis\nx0 = 0.5\n\
         [grid]\nn = 128\n[driver]\nk = 4\nobjective = pushback\n[kernel]\nreplicas = 50000\n",
    )
    .unwrap();
    let s = run_driver_search(&cfg).unwrap();
    assert_eq!(s.chain.delta, s.pushback.delta);
    let diff = (s.chain.midpoint() - s.pushback.midpoint()).abs();
    assert!(diff <= s.gap + 3.0 * s.pushback.mc_se, "{diff} vs gap {} + 3 se {}", s.gap, s.pushback.mc_se);
    assert!(s.selection.score <= s.selection.median_score());
}
