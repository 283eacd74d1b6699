//! Complex `log1p` and `expm1` accurate for small arguments.

use crate::C64;

/// `log(1 + z)`, accurate to relative rounding when `|z|` is small.
pub fn log1p(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    if z.norm() > 0.5 {
        return (C64::new(1.0, 0.0) + z).ln();
    }
    // |1 + z|^2 - 1 = 2x + x^2 + y^2
    let re = 0.5 * (2.0 * x + x * x + y * y).ln_1p();
    let im = y.atan2(1.0 + x);
    C64::new(re, im)
}

/// `exp(z) - 1`, accurate to relative rounding when `|z|` is small.
pub fn expm1(z: C64) -> C64 {
    let (x, y) = (z.re, z.im);
    let s = (0.5 * y).sin();
    let re = x.exp_m1() * y.cos() - 2.0 * s * s;
    let im = x.exp() * y.sin();
    C64::new(re, im)
}
