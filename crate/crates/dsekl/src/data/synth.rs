//! Synthetic XOR benchmark data.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Dataset, SparseRow};

/// Interpretation of the XOR cluster noise parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XorNoise {
    /// Noise parameter is the per-coordinate standard deviation.
    StdDev(f64),
    /// Noise parameter is the per-coordinate variance.
    Variance(f64),
}

impl XorNoise {
    fn std_dev(self) -> f64 {
        match self {
            XorNoise::StdDev(s) => s,
            XorNoise::Variance(v) => v.sqrt(),
        }
    }
}

/// Generates the two-class XOR benchmark: class +1 is an isotropic Gaussian
/// mixture around [1,1] and [-1,-1], class -1 around [1,-1] and [-1,1], with
/// per-coordinate standard deviation 0.2. Classes are balanced up to
/// rounding and labels alternate, so any prefix is roughly balanced too.
pub fn generate_xor(n: usize, rng: &mut ChaCha8Rng) -> Dataset {
    generate_xor_with_noise(n, XorNoise::StdDev(0.2), rng)
}

/// As [`generate_xor`], with an explicit noise interpretation.
pub fn generate_xor_with_noise(n: usize, noise: XorNoise, rng: &mut ChaCha8Rng) -> Dataset {
    assert!(n >= 4, "XOR generator needs at least 4 points");
    let normal = Normal::new(0.0, noise.std_dev()).expect("valid std dev");
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        // both centers of a class are picked with equal probability
        let flip: bool = rng.gen_bool(0.5);
        let (cx, cy) = match (label > 0.0, flip) {
            (true, false) => (1.0, 1.0),
            (true, true) => (-1.0, -1.0),
            (false, false) => (1.0, -1.0),
            (false, true) => (-1.0, 1.0),
        };
        let x = cx + normal.sample(rng);
        let y = cy + normal.sample(rng);
        rows.push(SparseRow::from_dense(&[x, y]));
        labels.push(label);
    }
    Dataset::new(rows, labels).expect("generated labels are binary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn two_dimensional_and_balanced() {
        let mut rng = rng_from_seed(1);
        let ds = generate_xor(101, &mut rng);
        assert_eq!(ds.dim(), 2);
        let (pos, neg) = ds.class_counts();
        assert_eq!(pos, 51);
        assert_eq!(neg, 50);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = generate_xor(50, &mut rng_from_seed(9));
        let b = generate_xor(50, &mut rng_from_seed(9));
        for i in 0..a.len() {
            assert_eq!(a.row(i), b.row(i));
            assert_eq!(a.label(i), b.label(i));
        }
    }

    #[test]
    fn cluster_means_near_centers() {
        // law-of-large-numbers check: assign each point to its nearest
        // center and require the per-center sample means to be close
        let mut rng = rng_from_seed(123);
        let ds = generate_xor(4000, &mut rng);
        let centers = [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
        let mut sums = [(0.0f64, 0.0f64); 4];
        let mut counts = [0usize; 4];
        for i in 0..ds.len() {
            let d = ds.row(i).to_dense();
            let (mut best, mut best_d2) = (0, f64::INFINITY);
            for (c, &(cx, cy)) in centers.iter().enumerate() {
                let d2 = (d[0] - cx).powi(2) + (d[1] - cy).powi(2);
                if d2 < best_d2 {
                    best = c;
                    best_d2 = d2;
                }
            }
            sums[best].0 += d[0];
            sums[best].1 += d[1];
            counts[best] += 1;
        }
        for (c, &(cx, cy)) in centers.iter().enumerate() {
            assert!(counts[c] > 700, "center {c} drew {} points", counts[c]);
            let mx = sums[c].0 / counts[c] as f64;
            let my = sums[c].1 / counts[c] as f64;
            assert!((mx - cx).abs() < 0.05, "center {c} mean x {mx}");
            assert!((my - cy).abs() < 0.05, "center {c} mean y {my}");
        }
    }

    #[test]
    fn variance_interpretation_widens_clusters() {
        let std_ds = generate_xor_with_noise(2000, XorNoise::StdDev(0.2), &mut rng_from_seed(3));
        let var_ds = generate_xor_with_noise(2000, XorNoise::Variance(0.2), &mut rng_from_seed(3));
        let spread = |ds: &Dataset| {
            (0..ds.len())
                .map(|i| {
                    let d = ds.row(i).to_dense();
                    let (sx, sy) = (d[0].abs() - 1.0, d[1].abs() - 1.0);
                    sx * sx + sy * sy
                })
                .sum::<f64>()
        };
        assert!(spread(&var_ds) > spread(&std_ds));
    }
}
