use softsense::numerics::gradcheck::random_op_cases;

#[test]
fn every_op_matches_finite_differences_over_twenty_seeds() {
    let mut per_op = std::collections::BTreeMap::<&str, (usize, f64)>::new();
    for seed in 0..24 {
        for case in random_op_cases(seed) {
            let out = case.check(1e-3).expect("op builds");
            assert!(
                out.max_rel_error < 1e-4,
                "{} (seed {seed}) relative error {:.3e}",
                out.name,
                out.max_rel_error
            );
            let entry = per_op.entry(case.name).or_default();
            entry.0 += 1;
            entry.1 = entry.1.max(out.max_rel_error);
        }
    }
    for (name, (runs, worst)) in &per_op {
        assert!(*runs >= 20, "{name} only checked {runs} times");
        eprintln!("{name:>20}: {runs} runs, worst {worst:.2e}");
    }
}
