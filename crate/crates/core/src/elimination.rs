//! Exact Gaussian elimination over the rationals.

use num_traits::{Signed, Zero};

use crate::Rational;

/// Solves the square system `a x = b` exactly with full pivoting.
///
/// Any nonzero pivot would do in exact arithmetic; the largest one keeps the
/// intermediate fractions small. Returns `None` when `a` is singular.
#[allow(clippy::needless_range_loop)]
pub(crate) fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    // col_of[k] is the unknown currently stored in column k.
    let mut col_of: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut best: Option<(usize, usize)> = None;
        for i in k..n {
            for j in k..n {
                if a[i][j].is_zero() {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((bi, bj)) => a[i][j].abs() > a[bi][bj].abs(),
                };
                if better {
                    best = Some((i, j));
                }
            }
        }
        let (pi, pj) = best?;
        a.swap(k, pi);
        b.swap(k, pi);
        if pj != k {
            for row in a.iter_mut() {
                row.swap(k, pj);
            }
            col_of.swap(k, pj);
        }
        let pivot = a[k][k].clone();
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let factor = &a[i][k] / &pivot;
            for j in k..n {
                let d = &factor * &a[k][j];
                a[i][j] -= d;
            }
            let d = &factor * &b[k];
            b[i] -= d;
        }
    }
    let mut y = vec![Rational::zero(); n];
    for k in (0..n).rev() {
        let mut acc = b[k].clone();
        for j in k + 1..n {
            acc -= &a[k][j] * &y[j];
        }
        y[k] = acc / &a[k][k];
    }
    let mut x = vec![Rational::zero(); n];
    for (k, v) in y.into_iter().enumerate() {
        x[col_of[k]] = v;
    }
    Some(x)
}
