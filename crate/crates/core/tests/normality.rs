use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use speller_core::analysis::ks_normality;

fn standardized(mut x: Vec<f64>) -> Vec<f64> {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    x.iter_mut().for_each(|v| *v = (*v - m) / sd);
    x
}

#[test]
fn normal_sample_is_not_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let x: Vec<f64> = (0..500).map(|_| rng.sample(StandardNormal)).collect();
    let r = ks_normality(&x).unwrap();
    assert!(r.p_value > 0.05, "D {:.4}, p {:.4}", r.statistic, r.p_value);
}

#[test]
fn uniform_sample_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let x = standardized((0..500).map(|_| rng.random::<f64>()).collect());
    let r = ks_normality(&x).unwrap();
    assert!(r.p_value < 0.05, "D {:.4}, p {:.4}", r.statistic, r.p_value);
}

proptest! {
    #[test]
    fn statistic_is_a_cdf_distance(x in prop::collection::vec(-1e3f64..1e3, 4..60)) {
        if let Ok(r) = ks_normality(&x) {
            prop_assert!((0.0..=1.0).contains(&r.statistic));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
