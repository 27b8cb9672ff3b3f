//! Scalar abstraction so the network runs in f32 for training and inference
//! and in f64 for gradient checking.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Real:
    Float + AddAssign + SubAssign + MulAssign + DivAssign + Sum + Default + Debug + Send + Sync + 'static
{
    const NAME: &'static str;

    fn of(v: f64) -> Self;
    fn f64(self) -> f64;

    /// `c = alpha * a * b + beta * c` with arbitrary strides (matrixmultiply).
    #[allow(clippy::too_many_arguments)]
    fn gemm_raw(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
        rsc: isize,
        csc: isize,
    );
}

macro_rules! impl_real {
    ($t:ty, $name:literal, $gemm:path) => {
        impl Real for $t {
            const NAME: &'static str = $name;

            #[inline]
            fn of(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn f64(self) -> f64 {
                self as f64
            }

            fn gemm_raw(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
                rsc: isize,
                csc: isize,
            ) {
                if m == 0 || n == 0 {
                    return;
                }
                let span = |rows: usize, cols: usize, rs: isize, cs: isize| {
                    if rows == 0 || cols == 0 {
                        0
                    } else {
                        ((rows - 1) as isize * rs + (cols - 1) as isize * cs) as usize + 1
                    }
                };
                assert!(a.len() >= span(m, k, rsa, csa), "gemm: a too short");
                assert!(b.len() >= span(k, n, rsb, csb), "gemm: b too short");
                assert!(c.len() >= span(m, n, rsc, csc), "gemm: c too short");
                // SAFETY: the asserts above bound every index the kernel touches,
                // and all strides are non-negative.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        rsc,
                        csc,
                    );
                }
            }
        }
    };
}

impl_real!(f32, "f32", matrixmultiply::sgemm);
impl_real!(f64, "f64", matrixmultiply::dgemm);

/// Row-major `out (m x n) = x (m x k) * w^T` where `w` is `(n x k)`.
/// Accumulates into `out` when `acc` is set.
pub fn matmul_xwt<F: Real>(x: &[F], w: &[F], out: &mut [F], m: usize, k: usize, n: usize, acc: bool) {
    let beta = if acc { F::one() } else { F::zero() };
    F::gemm_raw(m, k, n, F::one(), x, k as isize, 1, w, 1, k as isize, beta, out, n as isize, 1);
}

/// Row-major `out (m x k) = dy (m x n) * w` where `w` is `(n x k)`.
pub fn matmul_dyw<F: Real>(dy: &[F], w: &[F], out: &mut [F], m: usize, n: usize, k: usize, acc: bool) {
    let beta = if acc { F::one() } else { F::zero() };
    F::gemm_raw(m, n, k, F::one(), dy, n as isize, 1, w, k as isize, 1, beta, out, k as isize, 1);
}

/// Row-major weight gradient `dw (n x k) += dy^T (n x m) * x (m x k)`.
pub fn matmul_dytx<F: Real>(dy: &[F], x: &[F], dw: &mut [F], m: usize, n: usize, k: usize) {
    F::gemm_raw(n, m, k, F::one(), dy, 1, n as isize, x, k as isize, 1, F::one(), dw, k as isize, 1);
}

#[inline]
pub fn sigmoid<F: Real>(v: F) -> F {
    F::one() / (F::one() + (-v).exp())
}
