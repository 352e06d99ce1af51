//! Writes a metrics CSV for a synthetic evaluation set, ready to plot as an
//! over/under scatter of estimated against groundtruth energy.
//!
//! cargo run -p foodrec-core --example energy_scatter -- [N] [SEED] > scatter.csv

use foodrec_core::{
    classify_estimate, mean_error_rate, write_metrics_csv, EstimateClass, EvaluationRecord,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map_or(200, |a| a.parse().expect("N must be a count"));
    let seed: u64 = args
        .next()
        .map_or(1, |a| a.parse().expect("SEED must be an integer"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let records: Vec<EvaluationRecord> = (0..n)
        .map(|i| {
            let gt = rng.random_range(150.0..1800.0);
            // Skewed towards underestimation.
            let factor: f64 = rng.random_range(0.45..1.35);
            EvaluationRecord {
                occasion_id: format!("synthetic-{i:04}").into(),
                groundtruth_kcal: gt,
                estimated_kcal: gt * factor,
                estimator_id: "synthetic".into(),
            }
        })
        .collect();

    write_metrics_csv(&records, 0.1, std::io::stdout().lock()).expect("write csv");
    let (mut over, mut under) = (0, 0);
    for r in &records {
        match classify_estimate(r, 0.1) {
            EstimateClass::Over => over += 1,
            EstimateClass::Under => under += 1,
            EstimateClass::Exact => {}
        }
    }
    eprintln!(
        "{n} records, mean error rate {:.2}%, {over} over, {under} under, {} within 10%",
        mean_error_rate(&records).expect("non-empty records"),
        n - over - under
    );
}
