//! Matrix multiply on row-major slices, split into fixed-size blocks that run
//! through [`crate::par`].

use crate::par;
use crate::scalar::Scalar;

const BLOCK_COLS: usize = 1024;
const BLOCK_ROWS: usize = 64;

#[derive(Clone, Copy)]
struct SharedMut<S>(*mut S);

// SAFETY: blocks write disjoint regions of the output matrix.
unsafe impl<S: Send> Send for SharedMut<S> {}
unsafe impl<S: Send> Sync for SharedMut<S> {}

/// `c[m×n] = a·b + beta·c`, with `a` logically `m×k` and `b` logically `k×n`.
///
/// `a_t` means `a` is stored as its transpose (`k×m` row-major); likewise
/// `b_t` for `b` stored as `n×k`. `c` is dense row-major.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<S: Scalar>(
    m: usize,
    k: usize,
    n: usize,
    a: &[S],
    a_t: bool,
    b: &[S],
    b_t: bool,
    beta: S,
    c: &mut [S],
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c[..m * n].iter_mut().for_each(|v| *v *= beta);
        return;
    }
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };

    if n >= 2 * BLOCK_COLS {
        let blocks = n.div_ceil(BLOCK_COLS);
        let cp = SharedMut(c.as_mut_ptr());
        let (ap, bp) = (a.as_ptr() as usize, b.as_ptr() as usize);
        par::for_each_index(blocks, move |j| {
            let cp = cp;
            let col0 = j * BLOCK_COLS;
            let cols = BLOCK_COLS.min(n - col0);
            // SAFETY: block j touches columns col0..col0+cols of c only; the
            // bounds were checked above.
            unsafe {
                S::gemm_raw(
                    m,
                    k,
                    cols,
                    S::one(),
                    ap as *const S,
                    rsa,
                    csa,
                    (bp as *const S).offset(col0 as isize * csb),
                    rsb,
                    csb,
                    beta,
                    cp.0.add(col0),
                    n as isize,
                    1,
                );
            }
        });
    } else if m >= 2 * BLOCK_ROWS {
        par::for_each_chunk_mut(&mut c[..m * n], BLOCK_ROWS * n, |j, chunk| {
            let row0 = j * BLOCK_ROWS;
            let rows = chunk.len() / n;
            // SAFETY: `chunk` is exactly rows×n of c; a is offset to row0.
            unsafe {
                S::gemm_raw(
                    rows,
                    k,
                    n,
                    S::one(),
                    a.as_ptr().offset(row0 as isize * rsa),
                    rsa,
                    csa,
                    b.as_ptr(),
                    rsb,
                    csb,
                    beta,
                    chunk.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        });
    } else {
        // SAFETY: sizes were checked above.
        unsafe {
            S::gemm_raw(
                m,
                k,
                n,
                S::one(),
                a.as_ptr(),
                rsa,
                csa,
                b.as_ptr(),
                rsb,
                csb,
                beta,
                c.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(m: usize, k: usize, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                for p in 0..k {
                    c[i * n + j] += a[i * k + p] * b[p * n + j];
                }
            }
        }
        c
    }

    fn transpose(r: usize, c: usize, x: &[f64]) -> Vec<f64> {
        let mut t = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                t[j * r + i] = x[i * c + j];
            }
        }
        t
    }

    #[test]
    fn matches_naive_in_every_layout_and_blocking() {
        for &(m, k, n) in &[(3, 4, 5), (1, 7, 2500), (150, 3, 9), (2, 1, 1)] {
            let a: Vec<f64> = (0..m * k).map(|i| (i as f64 * 0.37).sin()).collect();
            let b: Vec<f64> = (0..k * n).map(|i| (i as f64 * 0.11).cos()).collect();
            let want = naive(m, k, n, &a, &b);
            let at = transpose(m, k, &a);
            let bt = transpose(k, n, &b);
            for (aa, ta) in [(&a, false), (&at, true)] {
                for (bb, tb) in [(&b, false), (&bt, true)] {
                    let mut c = vec![1.0; m * n];
                    gemm(m, k, n, aa, ta, bb, tb, 0.0, &mut c);
                    for (x, y) in c.iter().zip(&want) {
                        assert!((x - y).abs() < 1e-12);
                    }
                }
            }
        }
    }
}
