mod common;

use common::{
    chi_square, chi_square_critical, chi_square_two_sample, ks_critical, ks_statistic,
    mean_and_se, random_unit_frobenius,
};
use num_rational::Ratio;
use proptest::prelude::*;
use spsketch::analysis::measure_error;
use spsketch::select::{OnePassSampler, SelectorState};
use spsketch::sparsifier::sparsify_with_samples;
use spsketch::{
    one_pass_sparsify, rng, run_select, threshold_zero, DenseMatrix, Entry, EntryStream,
    PowerIterationConfig,
};

type Q = Ratio<i128>;

/// Probability that the selector ends on position `k` of the qualifying
/// stream: chosen when seen, then never replaced.
fn exact_selection_probabilities(weights: &[i128]) -> Vec<Q> {
    let mut prefix = Vec::with_capacity(weights.len());
    let mut acc = 0i128;
    for &w in weights {
        acc += w;
        prefix.push(acc);
    }
    (0..weights.len())
        .map(|k| {
            let mut p = Q::new(weights[k], prefix[k]);
            for l in k + 1..weights.len() {
                p *= Q::from_integer(1) - Q::new(weights[l], prefix[l]);
            }
            p
        })
        .collect()
}

#[test]
fn exact_oracle_matches_squared_weight_distribution() {
    // integer entries on matrices up to 4x4, several stream orders
    let mut seed = 1u64;
    for n in 1..=4usize {
        for _ in 0..25 {
            let mut rng = rng::seeded(seed);
            seed += 1;
            use rand::Rng;
            let values: Vec<i128> = (0..n * n).map(|_| rng.random_range(-5i128..=5)).collect();
            let weights: Vec<i128> = values.iter().map(|v| v * v).filter(|&w| w > 0).collect();
            if weights.is_empty() {
                continue;
            }
            let total: i128 = weights.iter().sum();
            let probs = exact_selection_probabilities(&weights);
            for (w, p) in weights.iter().zip(&probs) {
                assert_eq!(*p, Q::new(*w, total));
            }
            let mut rev = weights.clone();
            rev.reverse();
            let rprobs = exact_selection_probabilities(&rev);
            for (w, p) in rev.iter().zip(&rprobs) {
                assert_eq!(*p, Q::new(*w, total));
            }
        }
    }
}

fn selection_counts(entries: &[Entry], n: usize, eps: f64, runs: u64) -> Vec<u64> {
    let keys: Vec<(usize, usize)> = entries.iter().map(|e| (e.row, e.col)).collect();
    let mut counts = vec![0u64; keys.len()];
    for seed in 0..runs {
        let mut stream = EntryStream::from_entries(n, entries.to_vec());
        let st = run_select(&mut stream, eps, seed).unwrap();
        let c = st.selection().unwrap();
        let k = keys.iter().position(|&k| k == (c.row, c.col)).unwrap();
        counts[k] += 1;
    }
    counts
}

#[test]
fn three_then_four_selects_four_with_prob_16_25() {
    let entries = vec![Entry::new(0, 0, 3.0), Entry::new(1, 1, 4.0)];
    let counts = selection_counts(&entries, 2, 1e-9, 100_000);
    // exact: 16/25 by the replacement product
    assert_eq!(
        exact_selection_probabilities(&[9, 16]),
        vec![Q::new(9, 25), Q::new(16, 25)]
    );
    let stat = chi_square(&counts, &[9.0 / 25.0, 16.0 / 25.0]);
    assert!(stat < chi_square_critical(1, 0.001), "chi2 = {stat}, counts {counts:?}");
}

#[test]
fn sampled_selection_matches_exact_on_small_matrix() {
    let a = DenseMatrix::from_rows(&[
        vec![1.0, -2.0, 0.0],
        vec![0.0, 3.0, 1.0],
        vec![2.0, 0.0, -1.0],
    ])
    .unwrap();
    let entries: Vec<Entry> = a.entries().filter(|e| e.value != 0.0).collect();
    let total = a.frobenius_norm_sq();
    let probs: Vec<f64> = entries.iter().map(|e| e.value * e.value / total).collect();
    let counts = selection_counts(&entries, 3, 0.1, 40_000);
    let stat = chi_square(&counts, &probs);
    assert!(stat < chi_square_critical(probs.len() - 1, 0.001), "chi2 = {stat}");

    let mut rev = entries.clone();
    rev.reverse();
    let mut rcounts = selection_counts(&rev, 3, 0.1, 40_000);
    rcounts.reverse();
    let (stat, df) = chi_square_two_sample(&counts, &rcounts);
    assert!(stat < chi_square_critical(df, 0.001), "two-sample chi2 = {stat}");
}

#[test]
fn copies_are_independent() {
    let a = DenseMatrix::from_diagonal(&[3.0, 4.0]).unwrap();
    let runs = 100_000u64;
    let (mut x, mut y, mut xy) = (0.0, 0.0, 0.0);
    for seed in 0..runs {
        let mut sampler = OnePassSampler::new(2, 1.0, 2, seed).unwrap();
        for e in a.entries() {
            sampler.feed(&e);
        }
        let pick = |k: usize| (sampler.selectors()[k].selection().unwrap().row == 0) as u8 as f64;
        let (i0, i1) = (pick(0), pick(1));
        x += i0;
        y += i1;
        xy += i0 * i1;
    }
    let r = runs as f64;
    let cov = xy / r - (x / r) * (y / r);
    let p = 9.0 / 25.0;
    let se = p * (1.0 - p) / r.sqrt();
    assert!(cov.abs() < 5.0 * se, "cov = {cov}, se = {se}");
}

#[test]
fn one_pass_and_in_memory_agree_in_distribution() {
    let n = 8;
    let a = random_unit_frobenius(n, 808);
    let eps = 0.5;
    let s = 1500;
    let h = threshold_zero(&a, eps).unwrap();
    let cfg = PowerIterationConfig::for_dimension(n);
    let trials = 200u64;

    let mut err_mem = Vec::new();
    let mut err_pass = Vec::new();
    let mut entry_mem = vec![Vec::new(); n * n];
    let mut entry_pass = vec![Vec::new(); n * n];
    for t in 0..trials {
        let mem = sparsify_with_samples(&a, eps, s, t).unwrap();
        let mut stream = EntryStream::from_matrix(&a);
        let pass = one_pass_sparsify(&mut stream, eps, s, 10_000 + t).unwrap();
        assert_eq!(stream.reads(), n * n);
        err_mem.push(measure_error(&a, &mem, &cfg).unwrap());
        err_pass.push(measure_error(&a, &pass, &cfg).unwrap());
        for (k, v) in mem.to_dense().as_slice().iter().enumerate() {
            entry_mem[k].push(*v);
        }
        for (k, v) in pass.to_dense().as_slice().iter().enumerate() {
            entry_pass[k].push(*v);
        }
    }
    let d = ks_statistic(&err_mem, &err_pass);
    assert!(d < ks_critical(200, 200, 0.001), "KS D = {d}");

    for k in 0..n * n {
        let (m1, se1) = mean_and_se(&entry_mem[k]);
        let (m2, se2) = mean_and_se(&entry_pass[k]);
        if h.as_slice()[k] == 0.0 {
            assert_eq!((m1, m2), (0.0, 0.0));
            continue;
        }
        let se = (se1 * se1 + se2 * se2).sqrt();
        assert!((m1 - m2).abs() <= 5.0 * se, "entry {k}: {m1} vs {m2}");
    }
}

#[test]
fn selector_record_size_is_fixed() {
    let size = std::mem::size_of::<SelectorState>();
    for n in [1usize, 10, 1000, 100_000] {
        let sampler = OnePassSampler::new(n, 1.0, 33, 0).unwrap();
        assert_eq!(sampler.memory_records(), 33);
        assert_eq!(std::mem::size_of_val(sampler.selectors()), 33 * size);
    }
}

fn stream_strategy() -> impl Strategy<Value = (usize, Vec<Entry>, Vec<usize>)> {
    (1usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0f64..2.0, n * n),
            Just((0..n * n).collect::<Vec<_>>()).prop_shuffle(),
        )
            .prop_map(move |(vals, order)| {
                let entries = vals
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| Entry::new(k / n, k % n, v))
                    .collect();
                (n, entries, order)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn final_weight_is_order_independent((n, entries, order) in stream_strategy(), eps in 0.05f64..3.0, seed in any::<u64>()) {
        let a = DenseMatrix::from_entries(n, entries.iter().copied()).unwrap();
        let expect: f64 = a
            .as_slice()
            .iter()
            .map(|v| v * v)
            .filter(|&w| w > (eps / (2.0 * n as f64)).powi(2))
            .sum();
        let shuffled: Vec<Entry> = order.iter().map(|&k| entries[k]).collect();
        let mut stream = EntryStream::from_entries(n, shuffled);
        let st = run_select(&mut stream, eps, seed).unwrap();
        prop_assert!((st.accumulated_weight() - expect).abs() <= 1e-12 * expect.max(1e-300));
        prop_assert_eq!(st.selection().is_none(), st.accumulated_weight() == 0.0);
        if let Some(c) = st.selection() {
            prop_assert_eq!(c.value, a.get(c.row, c.col));
        }
        prop_assert_eq!(stream.reads(), n * n);
    }
}
