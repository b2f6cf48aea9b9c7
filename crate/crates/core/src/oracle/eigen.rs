//! Principal direction of a set of unit vectors by power iteration.

use crate::error::{Error, Result};
use crate::scalar::{dot, norm, Scalar};

pub const MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalDirection<T> {
    /// Unit vector `v1` in signal space.
    pub v1: Vec<T>,
    /// Leading eigenvalue of the Gram matrix `s_Q^T s_Q`.
    pub sigma1: T,
    /// Leading eigenvector of the Gram matrix, entrywise nonnegative when all
    /// pairwise inner products are.
    pub nu1: Vec<T>,
    pub iterations: usize,
}

fn tolerance<T: Scalar>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(64.0))
}

/// Leading left singular vector of the matrix whose columns are `columns`.
///
/// Iterates on the `m x m` Gram matrix from the normalized all-ones vector
/// and maps the result back as `v1 = S nu1`, normalized.
pub fn principal_direction<T: Scalar>(columns: &[&[T]]) -> Result<PrincipalDirection<T>> {
    let m = columns.len();
    if m == 0 {
        return Err(Error::Shape("principal direction of an empty set".into()));
    }
    let len = columns[0].len();
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::WindowMismatch);
    }
    let gram: Vec<Vec<T>> = (0..m)
        .map(|i| (0..m).map(|j| dot(columns[i], columns[j])).collect())
        .collect();

    let tol = tolerance::<T>();
    let start = T::one() / T::lit(m as f64).sqrt();
    let mut nu = vec![start; m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let next: Vec<T> = gram.iter().map(|row| dot(row, &nu)).collect();
        let size = norm(&next);
        if size == T::zero() {
            return Err(Error::Shape("principal direction of zero vectors".into()));
        }
        let next: Vec<T> = next.into_iter().map(|v| v / size).collect();
        let change = next
            .iter()
            .zip(&nu)
            .map(|(a, b)| (*a - *b) * (*a - *b))
            .sum::<T>()
            .sqrt();
        nu = next;
        if change <= tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence(iterations));
    }
    let g_nu: Vec<T> = gram.iter().map(|row| dot(row, &nu)).collect();
    let sigma1 = dot(&nu, &g_nu).max(T::zero());
    let mut v1 = vec![T::zero(); len];
    for (c, w) in columns.iter().zip(&nu) {
        for (acc, v) in v1.iter_mut().zip(c.iter()) {
            *acc = *acc + *w * *v;
        }
    }
    let size = norm(&v1);
    for v in v1.iter_mut() {
        *v = *v / size;
    }
    Ok(PrincipalDirection { v1, sigma1, nu1: nu, iterations })
}
