//! Least-squares primitives, index selection and single-node subspace pursuit.
//!
//! The selection rules here are shared by every algorithm in the crate, so
//! their tie-break (smallest index wins) is what makes the decentralized runs
//! reproducible bit-for-bit.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::support::SupportSet;

pub type DenseMatrix = DMatrix<f64>;
pub type RealVector = DVector<f64>;

/// Columns of `a` listed in `support`, in ascending index order.
pub fn submatrix(a: &DenseMatrix, support: &SupportSet) -> DenseMatrix {
    a.select_columns(support.indices())
}

/// Least-squares coefficients of `y` on the columns of `a_sub`.
///
/// Solved through a Householder QR factorization. The columns are treated as
/// rank deficient when any diagonal entry of `R` falls below
/// `max(M, k) * eps * max_column_norm`.
pub fn project_coefficients(y: &RealVector, a_sub: &DenseMatrix) -> Result<RealVector> {
    let (m, k) = a_sub.shape();
    if y.len() != m {
        return Err(Error::BadDimensions(format!(
            "measurement length {} does not match {} rows",
            y.len(),
            m
        )));
    }
    if k == 0 {
        return Ok(RealVector::zeros(0));
    }
    if k > m {
        return Err(Error::RankDeficient { rank: m, cols: k });
    }
    let max_norm = a_sub
        .column_iter()
        .map(|c| c.norm())
        .fold(0.0_f64, f64::max);
    let tol = m.max(k) as f64 * f64::EPSILON * max_norm;

    let qr = a_sub.clone().qr();
    let r = qr.r();
    let rank = r.diagonal().iter().filter(|d| d.abs() > tol).count();
    if rank < k {
        return Err(Error::RankDeficient { rank, cols: k });
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { rank, cols: k })
}

/// `y - a_sub * project_coefficients(y, a_sub)`.
pub fn residual(y: &RealVector, a_sub: &DenseMatrix) -> Result<RealVector> {
    let coeffs = project_coefficients(y, a_sub)?;
    Ok(y - a_sub * coeffs)
}

/// `|Aᵀ v|`, entrywise.
pub fn correlation_magnitudes(a: &DenseMatrix, v: &RealVector) -> RealVector {
    a.tr_mul(v).abs()
}

fn by_magnitude_then_index(v: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&i, &j| {
        v[j].abs()
            .total_cmp(&v[i].abs())
            .then_with(|| i.cmp(&j))
    }
}

/// Positions of the `k` largest-magnitude entries, ties to the smallest index.
pub fn top_k_indices(v: &[f64], k: usize) -> Result<SupportSet> {
    if k == 0 || k > v.len() {
        return Err(Error::BadK { k, max: v.len() });
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(by_magnitude_then_index(v));
    order.truncate(k);
    order.sort_unstable();
    Ok(SupportSet::from_sorted_unchecked(order, v.len()))
}

/// The `k` most frequent elements of `bag`, ties to the smallest index.
///
/// `universe` bounds the indices (every element must be `< universe`).
pub fn top_k_by_occurrence(bag: &[usize], k: usize, universe: usize) -> Result<SupportSet> {
    let mut counts: Vec<(usize, usize)> = Vec::new();
    let mut sorted = bag.to_vec();
    sorted.sort_unstable();
    for idx in sorted {
        if idx >= universe {
            return Err(Error::BadSupport(format!(
                "index {} exceeds universe size {}",
                idx + 1,
                universe
            )));
        }
        match counts.last_mut() {
            Some((last, c)) if *last == idx => *c += 1,
            _ => counts.push((idx, 1)),
        }
    }
    if k == 0 || k > counts.len() {
        return Err(Error::TooFewDistinct {
            k,
            distinct: counts.len(),
        });
    }
    counts.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = counts.into_iter().take(k).map(|(i, _)| i).collect();
    chosen.sort_unstable();
    Ok(SupportSet::from_sorted_unchecked(chosen, universe))
}

/// Checks the `M >= 2K` requirement shared by all pursuit variants.
pub(crate) fn check_dimensions(m: usize, n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::BadK { k, max: n });
    }
    if m < 2 * k {
        return Err(Error::BadDimensions(format!(
            "need M >= 2K, got M={m}, K={k}"
        )));
    }
    Ok(())
}

/// Support estimate from the `k` largest correlations `|Aᵀ y|`.
pub fn initial_selection(a: &DenseMatrix, y: &RealVector, k: usize) -> Result<SupportSet> {
    top_k_indices(correlation_magnitudes(a, y).as_slice(), k)
}

/// Expand-then-prune step of subspace pursuit.
///
/// Forms `previous ∪ top_k(|Aᵀ r|)`, projects `y` onto those columns and
/// keeps the `k` global indices whose coefficients are largest in magnitude.
pub fn expand_and_prune(
    a: &DenseMatrix,
    y: &RealVector,
    previous: &SupportSet,
    residual_vec: &RealVector,
    k: usize,
) -> Result<SupportSet> {
    let fresh = initial_selection(a, residual_vec, k)?;
    let candidates = previous.union(&fresh);
    let coeffs = project_coefficients(y, &submatrix(a, &candidates))?;
    let local = top_k_indices(coeffs.as_slice(), k)?;
    let global: Vec<usize> = local.iter().map(|pos| candidates.indices()[pos]).collect();
    Ok(SupportSet::from_sorted_unchecked(global, a.ncols()))
}

/// Output of [`subspace_pursuit`].
#[derive(Debug, Clone, PartialEq)]
pub struct PursuitResult {
    pub support: SupportSet,
    /// Residual norms of the initial estimate and of every accepted update.
    pub residual_norms: Vec<f64>,
    /// Iterations executed, including the final rejected one.
    pub iterations: usize,
}

/// Single-node subspace pursuit.
///
/// Stops when an update fails to reduce the residual norm (the update is
/// discarded) or after `max_iters` iterations.
pub fn subspace_pursuit(
    y: &RealVector,
    a: &DenseMatrix,
    k: usize,
    max_iters: usize,
) -> Result<PursuitResult> {
    let (m, n) = a.shape();
    check_dimensions(m, n, k)?;
    if y.len() != m {
        return Err(Error::BadDimensions(format!(
            "measurement length {} does not match {} rows",
            y.len(),
            m
        )));
    }

    let omega = initial_selection(a, y, k)?;
    let mut support = top_k_by_occurrence(omega.indices(), k, n)?;
    let mut resid = residual(y, &submatrix(a, &support))?;
    let mut norms = vec![resid.norm()];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let omega = expand_and_prune(a, y, &support, &resid, k)?;
        let proposal = top_k_by_occurrence(omega.indices(), k, n)?;
        let new_resid = residual(y, &submatrix(a, &proposal))?;
        let new_norm = new_resid.norm();
        if new_norm >= *norms.last().unwrap() {
            break;
        }
        support = proposal;
        resid = new_resid;
        norms.push(new_norm);
    }

    Ok(PursuitResult {
        support,
        residual_norms: norms,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng))
    }

    fn support(labels: &[usize], n: usize) -> SupportSet {
        SupportSet::from_one_based(labels, n).unwrap()
    }

    #[test]
    fn projection_onto_identity_columns() {
        let y = RealVector::from_vec(vec![3.0, 4.0, 5.0]);
        let a = DenseMatrix::identity(3, 3).columns(0, 2).into_owned();
        let c = project_coefficients(&y, &a).unwrap();
        assert_abs_diff_eq!(c[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(c[1], 4.0, epsilon = 1e-14);
        let r = residual(&y, &a).unwrap();
        assert_abs_diff_eq!(r, RealVector::from_vec(vec![0.0, 0.0, 5.0]), epsilon = 1e-14);
    }

    #[test]
    fn projection_onto_single_column() {
        let y = RealVector::from_vec(vec![4.0, 3.0]);
        let a = DenseMatrix::from_column_slice(2, 1, &[2.0, 0.0]);
        assert_abs_diff_eq!(project_coefficients(&y, &a).unwrap()[0], 2.0, epsilon = 1e-14);
        let r = residual(&y, &a).unwrap();
        assert_abs_diff_eq!(r, RealVector::from_vec(vec![0.0, 3.0]), epsilon = 1e-14);
    }

    #[test]
    fn recovers_known_coefficients() {
        let a = gaussian(8, 3, 11);
        let truth = RealVector::from_vec(vec![1.0, -2.0, 0.5]);
        let y = &a * &truth;
        let c = project_coefficients(&y, &a).unwrap();
        assert_abs_diff_eq!(c, truth, epsilon = 1e-10);
        assert!(residual(&y, &a).unwrap().norm() < 1e-10);
    }

    #[test]
    fn rank_deficient_columns_are_reported() {
        let col = [1.0, 2.0, 3.0];
        let a = DenseMatrix::from_column_slice(3, 2, &[col, col].concat());
        let y = RealVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(
            project_coefficients(&y, &a),
            Err(Error::RankDeficient { rank: 1, cols: 2 })
        );
        assert!(matches!(residual(&y, &a), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn top_k_examples() {
        assert_eq!(top_k_indices(&[0.5, -3.0, 2.0, 0.0], 2).unwrap(), support(&[2, 3], 4));
        assert_eq!(top_k_indices(&[1.0, 1.0, 0.0], 1).unwrap(), support(&[1], 3));
        assert_eq!(top_k_indices(&[0.0; 4], 2).unwrap(), support(&[1, 2], 4));
        assert_eq!(top_k_indices(&[1.0], 0), Err(Error::BadK { k: 0, max: 1 }));
        assert_eq!(top_k_indices(&[1.0], 2), Err(Error::BadK { k: 2, max: 1 }));
    }

    #[test]
    fn occurrence_examples() {
        let bag = [4, 7, 7, 2, 4, 4].map(|i| i - 1);
        assert_eq!(top_k_by_occurrence(&bag, 2, 10).unwrap(), support(&[4, 7], 10));
        let bag = [1, 1, 2, 2, 3].map(|i| i - 1);
        assert_eq!(top_k_by_occurrence(&bag, 2, 10).unwrap(), support(&[1, 2], 10));
        assert_eq!(top_k_by_occurrence(&[4], 1, 10).unwrap(), support(&[5], 10));
        assert_eq!(
            top_k_by_occurrence(&[1, 1], 2, 10),
            Err(Error::TooFewDistinct { k: 2, distinct: 1 })
        );
    }

    #[test]
    fn sp_on_identity() {
        let a = DenseMatrix::identity(4, 4);
        let y = RealVector::from_vec(vec![0.0, 0.0, 3.0, 0.0]);
        let out = subspace_pursuit(&y, &a, 1, 10).unwrap();
        assert_eq!(out.support, support(&[3], 4));
        assert_eq!(out.residual_norms.len(), 1);
        assert!(out.residual_norms[0] < 1e-12);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn sp_on_zero_measurement() {
        let a = gaussian(8, 20, 5);
        let y = RealVector::zeros(8);
        let out = subspace_pursuit(&y, &a, 3, 9).unwrap();
        assert_eq!(out.support, support(&[1, 2, 3], 20));
        assert_eq!(out.residual_norms.len(), 1);
        assert!(out.residual_norms[0] < 1e-12);
    }

    #[test]
    fn sp_rejects_bad_dimensions() {
        let a = gaussian(5, 20, 1);
        let y = RealVector::zeros(5);
        assert!(matches!(
            subspace_pursuit(&y, &a, 3, 9),
            Err(Error::BadDimensions(_))
        ));
        assert!(matches!(subspace_pursuit(&y, &a, 0, 9), Err(Error::BadK { .. })));
    }

    /// Normal-equation residual, independent of the QR route.
    fn oracle_residual_norm(y: &RealVector, a_sub: &DenseMatrix) -> f64 {
        let gram = a_sub.tr_mul(a_sub);
        let rhs = a_sub.tr_mul(y);
        let c = gram.cholesky().unwrap().solve(&rhs);
        (y - a_sub * c).norm()
    }

    #[test]
    fn sp_matches_exhaustive_search() {
        let (m, n) = (8, 20);
        let a = gaussian(m, n, 2024);
        let mut x = RealVector::zeros(n);
        x[1] = 1.3;
        x[8] = -0.9;
        x[16] = 2.1;
        let y = &a * &x;

        let mut best = (f64::INFINITY, Vec::new());
        for i in 0..n {
            for j in i + 1..n {
                for l in j + 1..n {
                    let s = vec![i, j, l];
                    let norm = oracle_residual_norm(&y, &a.select_columns(&s));
                    if norm < best.0 {
                        best = (norm, s);
                    }
                }
            }
        }
        assert_eq!(best.1, vec![1, 8, 16]);
        let out = subspace_pursuit(&y, &a, 3, 9).unwrap();
        assert_eq!(out.support.indices(), best.1.as_slice());
    }

    proptest! {
        #[test]
        fn residual_is_orthogonal_and_idempotent(seed in 0u64..5000, k in 1usize..5) {
            let a = gaussian(9, k, seed);
            let y = gaussian(9, 1, seed ^ 0xabcdef).column(0).into_owned();
            let r = residual(&y, &a).unwrap();
            for col in a.column_iter() {
                prop_assert!(col.dot(&r).abs() <= 1e-8 * y.norm());
            }
            let rr = residual(&r, &a).unwrap();
            prop_assert!((rr - &r).amax() <= 1e-10);
        }

        #[test]
        fn top_k_ignores_positive_scaling(
            v in proptest::collection::vec(-10.0f64..10.0, 1..30),
            scale in 0.01f64..100.0,
            k_frac in 0.0f64..1.0,
        ) {
            let k = 1 + ((v.len() - 1) as f64 * k_frac) as usize;
            let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
            // scaling can merge near-ties only through rounding; compare on exact powers of two
            let pow2 = 2f64.powi(scale.log2().round() as i32);
            let exact: Vec<f64> = v.iter().map(|x| x * pow2).collect();
            prop_assert_eq!(top_k_indices(&v, k).unwrap(), top_k_indices(&exact, k).unwrap());
            prop_assert_eq!(top_k_indices(&scaled, k).unwrap().len(), k);
        }

        #[test]
        fn occurrence_matches_count_vector(
            bag in proptest::collection::vec(0usize..12, 1..40),
            k_frac in 0.0f64..1.0,
        ) {
            let mut counts = vec![0.0; 12];
            for &i in &bag { counts[i] += 1.0; }
            let distinct = counts.iter().filter(|&&c| c > 0.0).count();
            let k = 1 + ((distinct - 1) as f64 * k_frac) as usize;
            prop_assert_eq!(
                top_k_by_occurrence(&bag, k, 12).unwrap(),
                top_k_indices(&counts, k).unwrap()
            );
        }

        #[test]
        fn sp_history_strictly_decreases(seed in 0u64..2000) {
            let a = gaussian(12, 30, seed);
            let y = gaussian(12, 1, seed + 7).column(0).into_owned();
            let out = subspace_pursuit(&y, &a, 4, 12).unwrap();
            prop_assert_eq!(out.support.len(), 4);
            prop_assert!(out.residual_norms.windows(2).all(|w| w[1] < w[0]));
            prop_assert!(out.iterations <= 12);
        }
    }
}
