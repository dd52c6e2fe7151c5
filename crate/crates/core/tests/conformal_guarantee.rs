use cplx_core::conformal::{empirical_coverage, leave_one_out_thresholds, prediction_set};
use cplx_core::human::majority_labels;
use cplx_core::{generate_pool, Coupling, Execution, PoolConfig, DEFAULT_ALPHAS};

#[test]
fn coverage_and_nesting_on_a_large_pool() {
    for coupling in [Coupling::Aligned, Coupling::InvertedU] {
        let bundle = generate_pool(&PoolConfig { items: 1000, coupling, seed: 5, ..Default::default() }).unwrap();
        let majority = majority_labels(&bundle);
        for alpha in DEFAULT_ALPHAS {
            let cov = empirical_coverage(&bundle, &majority, alpha, Execution::Parallel).unwrap();
            assert!(cov >= 1.0 - alpha - 0.03, "{coupling} alpha {alpha}: {cov}");
        }
        let mut sorted = DEFAULT_ALPHAS.to_vec();
        sorted.sort_by(f64::total_cmp);
        let loo: Vec<_> = sorted
            .iter()
            .map(|&a| leave_one_out_thresholds(&bundle, &majority, a, Execution::Parallel).unwrap())
            .collect();
        for model in 0..bundle.model_count() {
            for item in 0..bundle.item_count() {
                let sets: Vec<Vec<usize>> = loo
                    .iter()
                    .filter_map(|t| t.per_model[model][item])
                    .map(|t| prediction_set(bundle.final_probs(model, item), t))
                    .collect();
                for pair in sets.windows(2) {
                    // Smaller alpha, larger set.
                    assert!(pair[1].iter().all(|c| pair[0].contains(c)));
                }
            }
        }
    }
}
