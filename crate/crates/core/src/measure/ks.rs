//! Two-sample Kolmogorov-Smirnov statistic.

/// Coefficient `c(0.05)` of the asymptotic 5% critical value.
pub const KS_C_05: f64 = 1.358;

/// `sup_x |F_a(x) - F_b(x)|` over the empirical distribution functions.
/// Tied values are consumed together on both sides before comparing.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `c sqrt((n + m) / (n m))`.
pub fn ks_critical(n: usize, m: usize, c: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    c * ((n + m) / (n * m)).sqrt()
}

/// Asymptotic p-value from the Kolmogorov distribution with the usual
/// small-sample correction of the effective size.
pub fn ks_pvalue(d: f64, n: usize, m: usize) -> f64 {
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_observations() {
        assert_eq!(ks_statistic(&[1.0], &[2.0]), 1.0);
        assert_eq!(ks_statistic(&[1.0], &[1.0]), 0.0);
        assert_eq!(ks_statistic(&[], &[1.0]), 0.0);
    }

    #[test]
    fn two_by_two_exact_distribution() {
        // all 6 equally likely arrangements of two samples of size 2 from a
        // continuous law; D = 1 exactly for the 2 separated ones
        let pools = [[0.0, 1.0, 2.0, 3.0]];
        let mut counts = std::collections::BTreeMap::new();
        for pool in pools {
            for i in 0..4 {
                for j in i + 1..4 {
                    let a = [pool[i], pool[j]];
                    let b: Vec<f64> = (0..4).filter(|k| *k != i && *k != j).map(|k| pool[k]).collect();
                    let d = ks_statistic(&a, &b);
                    *counts.entry((d * 2.0).round() as u32).or_insert(0) += 1;
                }
            }
        }
        assert_eq!(counts.get(&2), Some(&2));
        assert_eq!(counts.get(&1), Some(&4));
        assert_eq!(counts.get(&0), None);
    }

    #[test]
    fn ties_are_grouped() {
        assert_eq!(ks_statistic(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]), 1.0 / 3.0);
        assert_eq!(ks_statistic(&[0.0; 5], &[0.0; 7]), 0.0);
    }

    #[test]
    fn critical_and_pvalue() {
        assert!((ks_critical(100, 100, KS_C_05) - 1.358 * 0.02f64.sqrt()).abs() < 1e-15);
        // lambda = 1.358 sits at the 5% point of the Kolmogorov law
        let n = 1_000_000;
        let d = ks_critical(n, n, KS_C_05);
        assert!((ks_pvalue(d, n, n) - 0.05).abs() < 1e-3);
        assert_eq!(ks_pvalue(0.0, 10, 10), 1.0);
        assert!(ks_pvalue(1.0, 50, 50) < 1e-10);
    }

    proptest! {
        #[test]
        fn statistic_is_symmetric_and_bounded(
            a in proptest::collection::vec(-10.0f64..10.0, 1..40),
            b in proptest::collection::vec(-10.0f64..10.0, 1..40),
        ) {
            let d = ks_statistic(&a, &b);
            prop_assert!((0.0..=1.0).contains(&d));
            prop_assert_eq!(d, ks_statistic(&b, &a));
            prop_assert_eq!(ks_statistic(&a, &a), 0.0);
        }
    }
}
