//! The fast medcouple agrees with the quadratic reference on seeded samples.

use heatlens_core::stats::{medcouple, medcouple_naive, median};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` values of which at least 30% equal the sample median.
fn tied_sample(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let center = rng.random_range(-20i32..20) as f64;
        let ties = rng.random_range(n.div_ceil(10) * 3..=n);
        let mut xs = vec![center; ties];
        while xs.len() < n {
            let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            xs.push(center + side * rng.random_range(1i32..30) as f64 * 0.5);
        }
        let m = median(&xs).unwrap();
        if m == center {
            return xs;
        }
    }
}

#[test]
fn fast_path_matches_reference_on_1000_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut tied = 0;
    for i in 0..1000 {
        let n = rng.random_range(3..=500);
        let xs: Vec<f64> = if i % 2 == 0 {
            tied += 1;
            tied_sample(&mut rng, n)
        } else {
            (0..n).map(|_| rng.random_range(-1e3..1e3)).collect()
        };
        let fast = medcouple(&xs).value;
        let slow = medcouple_naive(&xs).value;
        assert!(
            (fast - slow).abs() <= 1e-9,
            "sample {i} (n={n}): fast {fast} reference {slow}"
        );
    }
    assert_eq!(tied, 500);
}
