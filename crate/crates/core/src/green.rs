//! Free-space 2-D Green's function for `-lap u - k^2 u = delta` under
//! `exp(+i omega t)`: `g(r) = -(i/4) H0^(2)(k r)`.

use faer::c64;

use crate::model::MU_0;
use crate::special::hankel2_0;

#[inline]
pub fn green_2d(k: f64, r: f64) -> c64 {
    let h = hankel2_0(k * r);
    // -(i/4)(J - iY) = (-Y - iJ)/4, and h.im = -Y
    c64::new(0.25 * h.im, -0.25 * h.re)
}

/// Field of a unit line current: `E = -i omega mu0 g = -(omega mu0 / 4) H0^(2)(k r)`.
#[inline]
pub fn line_source_field(omega: f64, k: f64, r: f64) -> c64 {
    hankel2_0(k * r) * (-0.25 * omega * MU_0)
}
