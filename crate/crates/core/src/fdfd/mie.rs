//! Separation-of-variables solution for a homogeneous circular cylinder.

use faer::c64;

use crate::error::{Error, Result};
use crate::model::{BackgroundModel, Point, EPS_0, MU_0};
use crate::special::{bessel_jn_seq, derivative_seq, hankel2_seq};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub center: Point,
    pub radius: f64,
    pub eps_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Illumination {
    /// Unit line current; incident field `-(omega mu0 / 4) H0^(2)(k |x - x_t|)`.
    LineSource(Point),
    /// Unit-amplitude plane wave `exp(-i k (x cos a + y sin a))`.
    PlaneWave { angle_deg: f64 },
}

/// Scattered field of a lossless dielectric cylinder at `points`
/// (all outside the cylinder).
pub fn mie_reference(
    cylinder: &Cylinder,
    background: &BackgroundModel,
    freq_hz: f64,
    illumination: Illumination,
    points: &[Point],
) -> Result<Vec<c64>> {
    background.require_lossless()?;
    if !(cylinder.radius > 0.0) || !(cylinder.eps_r >= 1.0) {
        return Err(Error::InvalidArgument(format!("bad cylinder {cylinder:?}")));
    }
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    let k = omega * (MU_0 * EPS_0 * background.eps_r).sqrt();
    let k1 = omega * (MU_0 * EPS_0 * cylinder.eps_r).sqrt();
    let a = cylinder.radius;
    let order = (k.max(k1) * a).ceil() as usize + 15;

    // a_n = (k1 J_n'(k1a) J_n(ka) - k J_n'(ka) J_n(k1a))
    //     / (k H_n'(ka) J_n(k1a) - k1 J_n'(k1a) H_n(ka)),  a_{-n} = a_n
    let jka = bessel_jn_seq(order + 1, k * a);
    let jk1a = bessel_jn_seq(order + 1, k1 * a);
    let hka = hankel2_seq(order + 1, k * a);
    let djka = derivative_seq(&jka, k * a);
    let djk1a = derivative_seq(&jk1a, k1 * a);
    let dhka = derivative_seq(&hka, k * a);
    let coef: Vec<c64> = (0..=order)
        .map(|n| {
            let num = c64::new(k1 * djk1a[n] * jka[n] - k * djka[n] * jk1a[n], 0.0);
            let den = dhka[n] * (k * jk1a[n]) - hka[n] * (k1 * djk1a[n]);
            num / den
        })
        .collect();

    // Expansion of the incident field about the cylinder axis:
    // sum_n s_n J_n(k r) exp(i n phi).
    let (source_coef, phi0, scale): (Vec<c64>, f64, c64) = match illumination {
        Illumination::LineSource(src) => {
            let rel = Point::new(src.x - cylinder.center.x, src.y - cylinder.center.y);
            let rt = rel.norm();
            if rt <= a {
                return Err(Error::InvalidArgument("line source inside the cylinder".into()));
            }
            let h = hankel2_seq(order + 1, k * rt);
            (h, rel.y.atan2(rel.x), c64::new(-0.25 * omega * MU_0, 0.0))
        }
        Illumination::PlaneWave { angle_deg } => {
            // exp(-i k r cos(phi - a)) = sum_n (-i)^n J_n(kr) exp(i n (phi - a))
            let s = (0..=order + 1)
                .map(|n| c64::new(0.0, -1.0).powi(n as i32))
                .collect();
            (s, angle_deg.to_radians(), c64::new(1.0, 0.0))
        }
    };

    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let rel = Point::new(p.x - cylinder.center.x, p.y - cylinder.center.y);
        let r = rel.norm();
        if r < a {
            return Err(Error::InvalidArgument(
                "observation point inside the cylinder".into(),
            ));
        }
        let phi = rel.y.atan2(rel.x) - phi0;
        let h = hankel2_seq(order, k * r);
        let term = |n: usize| coef[n] * source_coef[n] * h[n];
        let mut sum = term(0);
        let mut last = c64::new(0.0, 0.0);
        for n in 1..=order {
            // Orders +n and -n contribute equally up to exp(+-i n phi).
            last = term(n) * (2.0 * (n as f64 * phi).cos());
            sum += last;
        }
        if !(last.norm() <= 1e-12 * sum.norm()) && sum.norm() > 0.0 {
            return Err(Error::NoConvergence(format!(
                "cylinder series: last term ratio {:.2e} at order {order}",
                last.norm() / sum.norm()
            )));
        }
        out.push(sum * scale);
    }
    Ok(out)
}
