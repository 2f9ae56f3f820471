//! Krippendorff's alpha for nominal data with missing judgments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha {
    pub value: f64,
    /// Expected disagreement was zero (a single value in the whole matrix);
    /// `value` is 1.0 by convention.
    pub degenerate: bool,
    /// Units with at least two judgments.
    pub pairable_units: usize,
    /// Judgments inside pairable units.
    pub pairable_values: usize,
}

/// Alpha over a unit × coder matrix (`None` = missing). Units with fewer
/// than two values are ignored; at least two pairable units are required.
///
/// Built from the coincidence matrix: each pairable unit with `m` values
/// adds `n_c · (n_k − [c = k]) / (m − 1)` to cell `(c, k)`.
pub fn krippendorff_alpha<T: Ord + Clone>(matrix: &[Vec<Option<T>>]) -> Result<Alpha> {
    let mut coincidence: BTreeMap<(T, T), f64> = BTreeMap::new();
    let mut pairable_units = 0;
    let mut pairable_values = 0;
    for unit in matrix {
        let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
        for v in unit.iter().flatten() {
            *counts.entry(v).or_insert(0) += 1;
        }
        let m: usize = counts.values().sum();
        if m < 2 {
            continue;
        }
        pairable_units += 1;
        pairable_values += m;
        for (c, nc) in &counts {
            for (k, nk) in &counts {
                let pairs = (*nc * (*nk - usize::from(c == k))) as f64;
                if pairs > 0.0 {
                    *coincidence.entry(((*c).clone(), (*k).clone())).or_insert(0.0) += pairs / (m - 1) as f64;
                }
            }
        }
    }
    if pairable_units < 2 {
        return Err(Error::arg(format!(
            "alpha needs at least two units with two or more judgments, found {pairable_units}"
        )));
    }
    let mut marginals: BTreeMap<&T, f64> = BTreeMap::new();
    for ((c, _), v) in &coincidence {
        *marginals.entry(c).or_insert(0.0) += v;
    }
    let n: f64 = marginals.values().sum();
    let observed: f64 = coincidence
        .iter()
        .filter(|((c, k), _)| c != k)
        .map(|(_, v)| v)
        .sum::<f64>()
        / n;
    let mut expected = 0.0;
    for (c, nc) in &marginals {
        for (k, nk) in &marginals {
            if c != k {
                expected += nc * nk;
            }
        }
    }
    expected /= n * (n - 1.0);
    if expected == 0.0 {
        return Ok(Alpha {
            value: 1.0,
            degenerate: true,
            pairable_units,
            pairable_values,
        });
    }
    Ok(Alpha {
        value: 1.0 - observed / expected,
        degenerate: false,
        pairable_units,
        pairable_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[Option<bool>]]) -> Vec<Vec<Option<bool>>> {
        rows.iter().map(|r| r.to_vec()).collect()
    }

    const T: Option<bool> = Some(true);
    const F: Option<bool> = Some(false);
    const N: Option<bool> = None;

    #[test]
    fn perfect_agreement_is_one() {
        let a = krippendorff_alpha(&m(&[&[T, T, T], &[F, F, N], &[T, T, N]])).unwrap();
        assert_eq!(a.value, 1.0);
        assert!(!a.degenerate);
    }

    #[test]
    fn single_value_everywhere_is_degenerate() {
        let a = krippendorff_alpha(&m(&[&[T, T], &[T, T]])).unwrap();
        assert_eq!(a.value, 1.0);
        assert!(a.degenerate);
    }

    #[test]
    fn two_by_two_disagreement() {
        // o_TF = o_FT = 2, n = 4, D_o = 1, D_e = 2·2·2/(4·3) = 2/3.
        let a = krippendorff_alpha(&m(&[&[T, F], &[F, T]])).unwrap();
        assert!((a.value - (1.0 - 1.5)).abs() < 1e-12);
    }

    #[test]
    fn textbook_binary_example() {
        // 10 units, 2 coders; hand-computed from the coincidence matrix:
        // o_00 = 10, o_11 = 2, o_01 = o_10 = 4, n = 20, n0 = 14, n1 = 6.
        let a = [0, 1, 0, 0, 0, 0, 0, 0, 1, 0];
        let b = [1, 1, 1, 0, 0, 1, 0, 0, 0, 0];
        let rows: Vec<Vec<Option<u8>>> = a.iter().zip(b).map(|(x, y)| vec![Some(*x), Some(y)]).collect();
        let got = krippendorff_alpha(&rows).unwrap().value;
        let want = 1.0 - (19.0 * 8.0) / (2.0 * 14.0 * 6.0);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn unpairable_units_are_ignored() {
        let base = m(&[&[T, F, T], &[F, F, N], &[T, T, T]]);
        let mut with_noise = base.clone();
        with_noise.push(vec![T, N, N]);
        with_noise.push(vec![N, N, N]);
        assert_eq!(
            krippendorff_alpha(&base).unwrap().value,
            krippendorff_alpha(&with_noise).unwrap().value
        );
    }

    #[test]
    fn too_few_units_is_an_error() {
        assert!(krippendorff_alpha(&m(&[&[T, F]])).is_err());
        assert!(krippendorff_alpha(&m(&[&[T, N], &[F, N]])).is_err());
    }
}
