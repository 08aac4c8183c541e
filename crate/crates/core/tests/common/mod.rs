#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spsketch::DenseMatrix;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Entries uniform in [-1, 1).
pub fn random_matrix(n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000);
    DenseMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0)).unwrap()
}

/// Random matrix rescaled to `||A||_F^2 = 1`.
pub fn random_unit_frobenius(n: usize, seed: u64) -> DenseMatrix {
    let a = random_matrix(n, seed);
    a.scale(1.0 / a.frobenius_norm()).unwrap()
}

pub fn to_nalgebra(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.n(), m.n(), m.as_slice())
}

/// Largest singular value from a full SVD.
pub fn svd_spectral_norm(m: &DenseMatrix) -> f64 {
    to_nalgebra(m)
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Largest |eigenvalue| of a symmetric matrix from a dense eigensolver.
pub fn symmetric_spectral_norm(m: &DenseMatrix) -> f64 {
    let a = to_nalgebra(m);
    let sym = (&a + a.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Pearson chi-square statistic for observed counts against probabilities.
pub fn chi_square(observed: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = observed.iter().sum();
    observed
        .iter()
        .zip(probs)
        .map(|(&o, &p)| {
            let e = p * total as f64;
            (o as f64 - e).powi(2) / e
        })
        .sum()
}

pub fn chi_square_critical(df: usize, alpha: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(1.0 - alpha)
}

/// Two-sample chi-square homogeneity statistic on a 2 x k table.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, usize) {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    let mut df: usize = 0;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        df += 1;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    (stat, df.saturating_sub(1))
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic KS critical value at level `alpha`.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n * m) as f64).sqrt()
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}
