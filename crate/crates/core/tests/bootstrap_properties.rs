use copsym::bootstrap::{bbar_process, draw_multipliers, replicate_process};
use copsym::rng::Stream;
use copsym::{pseudo_observations, run_test, run_test_empirical, BernsteinOrder, CopulaSpec, Sample, TestOptions};
use proptest::prelude::*;

fn sample_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 10..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bbar_vanishes_on_the_boundary(pairs in sample_strategy(), m in 1usize..20, seed in any::<u64>(), t in 0.0f64..=1.0) {
        let ps = pseudo_observations(&Sample::new(pairs).unwrap());
        let order = BernsteinOrder::new(m).unwrap();
        let draw = draw_multipliers(ps.len(), Stream::new(seed)).unwrap();
        for (u, v) in [(1.0, 1.0), (t, 0.0), (0.0, t)] {
            prop_assert!(bbar_process(&ps, order, &draw, u, v).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn replicate_process_is_antisymmetric(
        pairs in sample_strategy(),
        m in 1usize..20,
        seed in any::<u64>(),
        u in 0.001f64..0.999,
        v in 0.001f64..0.999,
    ) {
        let ps = pseudo_observations(&Sample::new(pairs).unwrap());
        let order = BernsteinOrder::new(m).unwrap();
        let draw = draw_multipliers(ps.len(), Stream::new(seed)).unwrap();
        let a = replicate_process(&ps, order, &draw, u, v).unwrap();
        let b = replicate_process(&ps, order, &draw, v, u).unwrap();
        prop_assert!((a + b).abs() <= 1e-12);
    }

    #[test]
    fn p_values_survive_a_column_swap(pairs in sample_strategy(), m in 1usize..16, seed in any::<u64>()) {
        let s = Sample::new(pairs).unwrap();
        let opts = TestOptions { replicates: 30, seed, ..Default::default() };
        let order = Some(BernsteinOrder::new(m).unwrap());
        let a = run_test(&s, order, &opts).unwrap();
        let b = run_test(&s.swapped(), order, &opts).unwrap();
        prop_assert_eq!(a.p_values, b.p_values);
        let a = run_test_empirical(&s, &opts).unwrap();
        let b = run_test_empirical(&s.swapped(), &opts).unwrap();
        prop_assert_eq!(a.p_values, b.p_values);
    }
}

#[test]
fn identical_results_for_one_and_many_workers() {
    let spec: CopulaSpec = "frank:tau=0.5:delta=0.25".parse().unwrap();
    let s = spec.sample(80, Stream::new(5)).unwrap();
    let opts = TestOptions { replicates: 120, seed: 31, ..Default::default() };
    let run = |w: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap();
        pool.install(|| (run_test(&s, None, &opts).unwrap(), run_test_empirical(&s, &opts).unwrap()))
    };
    let one = run(1);
    for w in [2, 5, 8] {
        assert_eq!(run(w), one, "{w} workers");
    }
}

/// P(p <= 0.05) under a symmetric null stays below 0.05 + 3 binomial SE.
#[test]
fn null_calibration_frank() {
    let spec: CopulaSpec = "frank:tau=0.25".parse().unwrap();
    let reps = 500usize;
    let order = Some(BernsteinOrder::new(13).unwrap());
    let mut hits = [0usize; 3];
    for rep in 0..reps as u64 {
        let st = Stream::new(4242).substream(rep);
        let s = spec.sample(100, st.substream(0)).unwrap();
        let opts = TestOptions { seed: st.substream(1).key(), ..Default::default() };
        let p = run_test(&s, order, &opts).unwrap().p_values.as_array();
        for k in 0..3 {
            hits[k] += usize::from(p[k] <= 0.05);
        }
    }
    let limit = 0.05 + 3.0 * (0.05f64 * 0.95 / reps as f64).sqrt();
    for (k, name) in ["R", "S", "T"].iter().enumerate() {
        let rate = hits[k] as f64 / reps as f64;
        assert!(rate <= limit, "{name}: rejection rate {rate} above {limit}");
    }
}
