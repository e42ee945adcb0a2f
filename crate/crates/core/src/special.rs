//! Special functions: gamma family, Bessel functions and the series used by
//! the closed-form spatial resolvents.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

pub use statrs::function::gamma::{gamma, ln_gamma};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;

#[derive(Debug, Error, PartialEq)]
pub enum SpecialError {
    #[error("argument {0} outside the domain")]
    DomainError(f64),
}

/// Lower incomplete gamma `gamma(a, x) = int_0^x s^{a-1} e^{-s} ds`, `a > 0`.
pub fn lower_gamma(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_li(a, x)
}

/// Upper incomplete gamma `Gamma(a, x)` for any real `a` and `x > 0`.
pub fn upper_gamma(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "upper_gamma needs x > 0");
    if a > 0.0 {
        statrs::function::gamma::gamma_ui(a, x)
    } else if a == 0.0 {
        exp_integral_e1(x)
    } else {
        // Gamma(a+1, x) = a Gamma(a, x) + x^a e^{-x}
        (upper_gamma(a + 1.0, x) - x.powf(a) * (-x).exp()) / a
    }
}

/// Exponential integral `E1(x) = Gamma(0, x)`, `x > 0`.
pub fn exp_integral_e1(x: f64) -> f64 {
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < EPS * sum.abs() {
                break;
            }
        }
        -EULER_GAMMA - x.ln() + sum
    } else {
        // modified Lentz on the continued fraction of e^x E1(x)
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// Modified Bessel function of the second kind `K_nu(z)`, `nu >= 0`, `z > 0`.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64, SpecialError> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(SpecialError::DomainError(z));
    }
    if nu < 0.0 || !nu.is_finite() {
        return Err(SpecialError::DomainError(nu));
    }
    let n = nu.round();
    let mu = nu - n;
    let (mut k0, mut k1) = bessel_k_pair(mu, z);
    for i in 0..n as usize {
        let next = 2.0 * (mu + 1.0 + i as f64) / z * k1 + k0;
        k0 = k1;
        k1 = next;
    }
    Ok(k0)
}

/// `(K_mu(x), K_{mu+1}(x))` for `|mu| <= 1/2` (Temme series / Steed's method).
fn bessel_k_pair(mu: f64, x: f64) -> (f64, f64) {
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < 1e-15 { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..500 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu * mu);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum, sum1 * 2.0 / x)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu * mu;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 1..10_000 {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        let kmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        (kmu, kmu * (mu + x + 0.5 - a1 * h) / x)
    }
}

fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / gamma(1.0 + mu);
    let gammi = 1.0 / gamma(1.0 - mu);
    let gam2 = 0.5 * (gammi + gampl);
    let gam1 = if mu.abs() > 1e-3 {
        (gammi - gampl) / (2.0 * mu)
    } else {
        // Taylor coefficients of 1/Gamma
        let m2 = mu * mu;
        -(0.577_215_664_901_532_9
            + m2 * (-0.042_002_635_034_095_2 + m2 * (-0.042_197_734_555_544_3 + m2 * 0.007_218_943_246_663)))
    };
    (gam1, gam2, gampl, gammi)
}

/// Bessel function of the first kind `J_0(x)`.
pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax <= 12.0 {
        let y = -0.25 * ax * ax;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let fk = k as f64;
            term *= y / (fk * fk);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 2 {
                break;
            }
        }
        sum
    } else {
        // Hankel asymptotic expansion
        let mut p = 0.0;
        let mut q = 0.0;
        let mut a = 1.0;
        let mut last = f64::INFINITY;
        for k in 0..60 {
            let fk = k as f64;
            if k > 0 {
                a *= -((2.0 * fk - 1.0).powi(2)) / (fk * 8.0 * ax);
            }
            if a.abs() > last {
                break;
            }
            last = a.abs();
            match k % 4 {
                0 => p += a,
                1 => q += a,
                2 => p -= a,
                _ => q -= a,
            }
        }
        let chi = ax - 0.25 * PI;
        (2.0 / (PI * ax)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// Modified Bessel function of the first kind `I_0(x)`.
pub fn bessel_i0(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..2000 {
        let fk = k as f64;
        term *= y / (fk * fk);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `ln Gamma(z)` for complex `z` with `Re z > 0` (Lanczos, g = 7).
pub fn ln_gamma_complex(z: Complex64) -> Complex64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = z - 1.0;
    let mut x = Complex64::new(C[0], 0.0);
    for (k, &c) in C.iter().enumerate().skip(1) {
        x += c / (z + k as f64);
    }
    let t = z + G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// `Re[ z^{-a} gamma(a, z) ]` with `a = 1 + i x`, `z > 0`.
///
/// Equals `e^{-z} sum_n z^n / prod_{k=0..n} (a + k)`.
pub fn cauchy_resolvent_core(z: f64, x: f64) -> f64 {
    if z <= 0.0 {
        return 1.0 / (1.0 + x * x);
    }
    if z > 600.0 {
        // gamma(a, z) = Gamma(a) up to e^{-z}
        let a = Complex64::new(1.0, x);
        return (ln_gamma_complex(a) - a * z.ln()).exp().re;
    }
    let a = Complex64::new(1.0, x);
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = 0usize;
    loop {
        n += 1;
        term = term * z / (a + n as f64);
        sum += term;
        if (n as f64) > z && term.norm() < 1e-18 * sum.norm() {
            break;
        }
        if n > 100_000 {
            break;
        }
    }
    (sum * (-z).exp()).re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // K_nu(z) = int_0^inf exp(-z cosh s) cosh(nu s) ds
    fn k_oracle(nu: f64, z: f64) -> f64 {
        quad::integrate(|s| (-z * s.cosh()).exp() * (nu * s).cosh(), 0.0, 40.0, 1e-15, 1e-13).value
    }

    #[test]
    fn bessel_k_half_integer_closed_form() {
        let k = bessel_k(0.5, 1.0).unwrap();
        let exact = (PI / 2.0).sqrt() * (-1.0f64).exp();
        assert!(rel(k, exact) < 1e-12);
        assert!((k - 0.46107).abs() < 1e-5);
    }

    #[test]
    fn bessel_k_matches_integral_representation() {
        for &(nu, z) in &[(0.0, 0.3), (1.0, 1.5), (2.0, 1.0), (1.5, 3.0), (2.5, 0.2), (0.25, 7.0), (3.0, 12.0)] {
            let k = bessel_k(nu, z).unwrap();
            assert!(rel(k, k_oracle(nu, z)) < 1e-10, "nu {nu} z {z}: {k} vs {}", k_oracle(nu, z));
        }
        assert!((bessel_k(2.0, 1.0).unwrap() - 1.62484).abs() < 1e-5);
    }

    #[test]
    fn bessel_k_small_argument_limit() {
        for &z in &[1e-3, 1e-5] {
            assert!((z * z * bessel_k(2.0, z).unwrap() - 2.0).abs() < 1e-5);
        }
        assert_eq!(bessel_k(1.0, 0.0), Err(SpecialError::DomainError(0.0)));
    }

    #[test]
    fn j0_i0_against_series_and_integral() {
        // J0(x) = (1/pi) int_0^pi cos(x sin s) ds
        for &x in &[0.0, 0.5, 2.404_825_557_695_773, 7.0, 11.9, 12.1, 20.0, 45.0] {
            let o = quad::integrate(|s| (x * s.sin()).cos(), 0.0, PI, 1e-15, 1e-14).value / PI;
            assert!((bessel_j0(x) - o).abs() < 1e-10, "J0({x})");
            let oi = quad::integrate(|s| (x * s.cos()).exp(), 0.0, PI, 1e-15, 1e-14).value / PI;
            assert!(rel(bessel_i0(x), oi) < 1e-12, "I0({x})");
        }
    }

    #[test]
    fn incomplete_gamma_negative_orders() {
        for &(a, x) in &[(-0.5, 1.0), (-1.5, 0.7), (0.0, 0.3), (0.0, 3.0), (-1.0, 2.0), (0.5, 1.0)] {
            let o = quad::integrate_to_inf(|s| s.powf(a - 1.0) * (-s).exp(), x, 1e-16, 1e-13).value;
            assert!(rel(upper_gamma(a, x), o) < 1e-9, "Gamma({a},{x})");
        }
        let lo = quad::integrate(|s| s.powf(-0.5) * (-s).exp(), 0.0, 1.0, 1e-15, 1e-12).value;
        assert!(rel(lower_gamma(0.5, 1.0), lo) < 1e-8);
    }

    #[test]
    fn cauchy_core_matches_defining_series() {
        // lambda sum (-z)^{n-1}/(n-1)! n/(pi(x^2+n^2)) = (lambda/pi) core
        for &(z, x) in &[(0.0, 0.0), (0.3, 0.0), (1.0, 0.5), (2.0, 3.0), (4.0, -7.0), (10.0, 1.0)] {
            let mut s = 0.0;
            let mut c = 1.0;
            for n in 1..200 {
                let fnn = n as f64;
                s += c * fnn / (x * x + fnn * fnn);
                c *= -z / fnn;
            }
            let core = cauchy_resolvent_core(z, x);
            assert!((core - s).abs() < 1e-10 * (1.0 + s.abs()), "z {z} x {x}: {core} vs {s}");
        }
        let big = cauchy_resolvent_core(650.0, 2.0);
        let near = {
            let a = Complex64::new(1.0, 2.0);
            (ln_gamma_complex(a) - a * 650f64.ln()).exp().re
        };
        assert_eq!(big, near);
    }

    #[test]
    fn complex_gamma_matches_real() {
        for &x in &[0.5, 1.0, 3.7, 10.0] {
            let z = ln_gamma_complex(Complex64::new(x, 0.0));
            assert!((z.re - ln_gamma(x)).abs() < 1e-12);
        }
        // |Gamma(1+iy)|^2 = pi y / sinh(pi y)
        let y = 1.3;
        let m = ln_gamma_complex(Complex64::new(1.0, y)).re.exp().powi(2);
        assert!(rel(m, PI * y / (PI * y).sinh()) < 1e-12);
    }
}
