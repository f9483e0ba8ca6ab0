use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UTestMode {
    /// Enumerates every labeling of the pooled ranks; limited to 20 values.
    Exact,
    /// Normal approximation with tie and continuity corrections.
    NormalApprox,
    /// Exact when the pooled size allows it, otherwise the approximation.
    Auto,
}

pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UTest {
    /// `min(U1, U2)`.
    pub u: f64,
    /// `U` of the first sample: the number of pairs where it ranks higher,
    /// ties counting one half.
    pub u1: f64,
    /// Two-sided.
    pub p: f64,
    pub exact: bool,
}

/// Midranks of the pooled values, doubled so ties stay integral.
fn doubled_ranks(pooled: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|a, b| pooled[*a].total_cmp(&pooled[*b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && pooled[order[j + 1]] == pooled[order[i]] {
            j += 1;
        }
        // positions i..=j share the rank (i + 1 + j + 1) / 2
        for &k in &order[i..=j] {
            ranks[k] = (i + j + 2) as u64;
        }
        i = j + 1;
    }
    ranks
}

fn tie_groups(pooled: &[f64]) -> Vec<usize> {
    let mut v = pooled.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|x| **x == v[i]).count();
        out.push(j);
        i += j;
    }
    out
}

/// Two-sample Mann-Whitney test.
///
/// The exact mode counts, over all `C(n1 + n2, n1)` ways of choosing which
/// pooled values form the first sample, those whose `min(U1, U2)` is at most
/// the observed one. Ties are handled by running the count over the observed
/// midranks, so the test stays exact as a permutation test.
pub fn mann_whitney_u(xs: &[f64], ys: &[f64], mode: UTestMode) -> Result<UTest> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::domain("both samples must be non-empty"));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("samples must be finite"));
    }
    let (n1, n2) = (xs.len(), ys.len());
    let n = n1 + n2;
    let exact = match mode {
        UTestMode::Exact if n > EXACT_LIMIT => {
            return Err(Error::domain(format!(
                "exact mode supports at most {EXACT_LIMIT} pooled values, got {n}"
            )))
        }
        UTestMode::Exact => true,
        UTestMode::NormalApprox => false,
        UTestMode::Auto => n <= EXACT_LIMIT,
    };
    let pooled: Vec<f64> = xs.iter().chain(ys).copied().collect();
    let ranks = doubled_ranks(&pooled);
    let r1: u64 = ranks[..n1].iter().sum();
    // 2 U1 = 2 R1 - n1 (n1 + 1)
    let base = (n1 * (n1 + 1)) as u64;
    let nn = (n1 * n2) as u64;
    let u1x2 = r1 - base;
    let ux2 = u1x2.min(2 * nn - u1x2);
    let u1 = u1x2 as f64 / 2.0;
    let u = ux2 as f64 / 2.0;

    let p = if exact {
        exact_p(&ranks, n1, base, nn, ux2)
    } else {
        normal_p(u1, n1, n2, &tie_groups(&pooled))
    };
    Ok(UTest { u, u1, p, exact })
}

/// Counts subsets of size `n1` by doubled rank sum.
fn exact_p(ranks: &[u64], n1: usize, base: u64, nn: u64, ux2: u64) -> f64 {
    let max_sum: u64 = ranks.iter().sum();
    let width = max_sum as usize + 1;
    // counts[k][s]: subsets of size k with doubled rank sum s
    let mut counts = vec![vec![0u128; width]; n1 + 1];
    counts[0][0] = 1;
    for &r in ranks {
        for k in (1..=n1).rev() {
            let (lo, hi) = counts.split_at_mut(k);
            let (prev, cur) = (&lo[k - 1], &mut hi[0]);
            for s in (r as usize..width).rev() {
                cur[s] += prev[s - r as usize];
            }
        }
    }
    let (mut hit, mut total) = (0u128, 0u128);
    for (s, c) in counts[n1].iter().enumerate() {
        if *c == 0 {
            continue;
        }
        total += c;
        let u1x2 = s as u64 - base;
        if u1x2.min(2 * nn - u1x2) <= ux2 {
            hit += c;
        }
    }
    hit as f64 / total as f64
}

fn normal_p(u1: f64, n1: usize, n2: usize, ties: &[usize]) -> f64 {
    let (a, b) = (n1 as f64, n2 as f64);
    let n = a + b;
    let mu = a * b / 2.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum();
    let var = a * b / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if !(var > 0.0) {
        return 1.0;
    }
    let z = (((u1 - mu).abs() - 0.5) / var.sqrt()).max(0.0);
    let normal = Normal::standard();
    (2.0 * (1.0 - normal.cdf(z))).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_examples() {
        let t = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0], UTestMode::Exact).unwrap();
        assert_eq!((t.u, t.p), (0.0, 2.0 / 6.0));
        let t = mann_whitney_u(&[1.0, 4.0], &[2.0, 3.0], UTestMode::Exact).unwrap();
        assert_eq!((t.u, t.p), (2.0, 1.0));
    }

    #[test]
    fn midranks() {
        assert_eq!(doubled_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![7, 2, 7, 4]);
    }

    #[test]
    fn complete_separation_of_six() {
        let xs: Vec<f64> = (0..6).map(f64::from).collect();
        let ys: Vec<f64> = (10..16).map(f64::from).collect();
        let t = mann_whitney_u(&xs, &ys, UTestMode::Exact).unwrap();
        assert_eq!(t.u, 0.0);
        assert_eq!(t.p, 2.0 / 924.0);
    }

    #[test]
    fn errors() {
        assert!(mann_whitney_u(&[], &[1.0], UTestMode::Exact).is_err());
        let big: Vec<f64> = (0..11).map(f64::from).collect();
        assert!(mann_whitney_u(&big, &big, UTestMode::Exact).is_err());
        assert!(!mann_whitney_u(&big, &big, UTestMode::Auto).unwrap().exact);
    }

    #[test]
    fn approximation_tracks_the_exact_value() {
        let xs = [1.1, 2.3, 3.2, 4.8, 5.0, 7.7, 8.1, 9.9];
        let ys = [2.0, 4.1, 6.3, 6.9, 10.2, 11.0, 12.5, 13.3];
        let e = mann_whitney_u(&xs, &ys, UTestMode::Exact).unwrap();
        let a = mann_whitney_u(&xs, &ys, UTestMode::NormalApprox).unwrap();
        assert_eq!(e.u, a.u);
        assert!((e.p - a.p).abs() < 0.02, "{} vs {}", e.p, a.p);
    }

    #[test]
    fn all_tied_gives_p_one() {
        let t = mann_whitney_u(&[1.0, 1.0], &[1.0, 1.0, 1.0], UTestMode::Exact).unwrap();
        assert_eq!(t.p, 1.0);
        let t = mann_whitney_u(&[1.0, 1.0], &[1.0, 1.0, 1.0], UTestMode::NormalApprox).unwrap();
        assert_eq!(t.p, 1.0);
    }
}
