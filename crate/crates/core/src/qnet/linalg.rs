//! Thin strided GEMM wrapper.

/// Strided view of a dense matrix stored in a slice.
#[derive(Clone, Copy)]
pub(crate) struct View<'a> {
    pub data: &'a [f64],
    pub rs: usize,
    pub cs: usize,
}

impl<'a> View<'a> {
    /// Row-major `rows × cols` slice.
    pub fn rows(data: &'a [f64], cols: usize) -> Self {
        Self { data, rs: cols, cs: 1 }
    }

    /// Transpose of a row-major `rows × cols` slice.
    pub fn transposed(data: &'a [f64], cols: usize) -> Self {
        Self { data, rs: 1, cs: cols }
    }
}

/// `c ← beta·c + a·b` where `a` is `m × k`, `b` is `k × n` and `c` is a
/// row-major `m × n` slice.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: View<'_>, b: View<'_>, beta: f64, c: &mut [f64]) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(c.len() >= m * n);
    if k > 0 {
        assert!((m - 1) * a.rs + (k - 1) * a.cs < a.data.len());
        assert!((k - 1) * b.rs + (n - 1) * b.cs < b.data.len());
    }
    if m == 1 && b.cs == 1 {
        // Packing dominates a single-row product.
        let c = &mut c[..n];
        if beta == 0.0 {
            c.fill(0.0);
        } else if beta != 1.0 {
            c.iter_mut().for_each(|v| *v *= beta);
        }
        for p in 0..k {
            let av = a.data[p * a.cs];
            let row = &b.data[p * b.rs..p * b.rs + n];
            for (cv, bv) in c.iter_mut().zip(row) {
                *cv += av * bv;
            }
        }
        return;
    }
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.rs as isize,
            a.cs as isize,
            b.data.as_ptr(),
            b.rs as isize,
            b.cs as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_product() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2×3
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3×2
        let mut c = [0.0; 4];
        gemm(2, 3, 2, View::rows(&a, 3), View::rows(&b, 2), 0.0, &mut c);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);

        // aᵀ·a  (3×2 · 2×3)
        let mut d = [1.0; 9];
        gemm(3, 2, 3, View::transposed(&a, 3), View::rows(&a, 3), 1.0, &mut d);
        assert_eq!(d, [18.0, 23.0, 28.0, 23.0, 30.0, 37.0, 28.0, 37.0, 46.0]);

        let mut e = [f64::NAN; 2];
        gemm(1, 3, 2, View::rows(&a[3..], 3), View::rows(&b, 2), 0.0, &mut e);
        assert_eq!(e, [139.0, 154.0]);
    }
}
