use core::fmt::{Debug, Display};
use core::iter::Sum;
use core::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating-point element type of tensors: `f32` for training, `f64` for
/// gradient checks.
pub trait Real:
    Float
    + FromPrimitive
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
{
    /// Converts an `f64` literal.
    fn lit(v: f64) -> Self;

    fn as_f64(self) -> f64;

    /// `c = alpha * op(a) * op(b) + beta * c` for row-major `m×k` and `k×n`
    /// operands. `a_t` / `b_t` mean the buffer holds the transpose.
    #[allow(clippy::too_many_arguments)]
    fn matmul(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_t: bool,
        b: &[Self],
        b_t: bool,
        c: &mut [Self],
        beta: Self,
    );
}

macro_rules! impl_real {
    ($t:ty, $gemm:ident) => {
        impl Real for $t {
            #[inline]
            fn lit(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn matmul(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_t: bool,
                b: &[Self],
                b_t: bool,
                c: &mut [Self],
                beta: Self,
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                if k == 0 {
                    if beta == 0.0 {
                        c[..m * n].fill(0.0);
                    } else {
                        c[..m * n].iter_mut().for_each(|v| *v *= beta);
                    }
                    return;
                }
                let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
                let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
                gemm::$gemm(m, k, n, a, rsa, csa, b, rsb, csb, beta, c, n as isize, 1);
            }
        }
    };
}

impl_real!(f32, sgemm);
impl_real!(f64, dgemm);

// The only unsafe code in the crate lives behind this module: bounds are
// checked by the callers above.
#[allow(unsafe_code)]
mod gemm {
    macro_rules! wrap {
        ($name:ident, $t:ty) => {
            #[allow(clippy::too_many_arguments)]
            pub(super) fn $name(
                m: usize,
                k: usize,
                n: usize,
                a: &[$t],
                rsa: isize,
                csa: isize,
                b: &[$t],
                rsb: isize,
                csb: isize,
                beta: $t,
                c: &mut [$t],
                rsc: isize,
                csc: isize,
            ) {
                // SAFETY: operand extents were asserted against m, k, n.
                unsafe {
                    matrixmultiply::$name(
                        m,
                        k,
                        n,
                        1.0,
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
                    )
                }
            }
        };
    }
    wrap!(sgemm, f32);
    wrap!(dgemm, f64);
}
