//! Special functions: the Bessel function J₀, the half-integer modified
//! Bessel function K_{3/2}, the jump density of the relativistic Lévy
//! measure, and the closed-form marginal densities of the process.

use crate::levy::Vec2;
use crate::quad;

/// Bessel function of the first kind, order zero.
///
/// Power series for r < 8, Hankel-type asymptotic form beyond. The
/// asymptotic correction polynomials are the FreeBSD msun (fdlibm) rational
/// approximations valid on [8, ∞); relative accuracy is ~1e-14 over the
/// supported range.
pub fn bessel_j0(r: f64) -> f64 {
    let r = r.abs();
    if r < 8.0 {
        // J0(r) = Σ (-1)^k (r²/4)^k / (k!)². Worst-case cancellation at the
        // switch point loses ~3 digits, well within the accuracy target.
        let q = 0.25 * r * r;
        let mut term = 1.0;
        let mut sum = 1.0;
        let mut k = 1.0;
        loop {
            term *= -q / (k * k);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-3) {
                break;
            }
            k += 1.0;
            if k > 60.0 {
                break;
            }
        }
        sum
    } else {
        // J0(r) = sqrt(1/(π r)) (P(r) cos(r - π/4) - Q(r) sin(r - π/4)),
        // written via cc = cos r + sin r, ss = sin r - cos r to avoid
        // cancellation in the trig argument reduction.
        let s = r.sin();
        let c = r.cos();
        let mut ss = s - c;
        let mut cc = s + c;
        let z = -(2.0 * r).cos();
        if s * c < 0.0 {
            cc = z / ss;
        } else {
            ss = z / cc;
        }
        let u = pzero(r);
        let v = qzero(r);
        const INV_SQRT_PI: f64 = 0.564189583547756279280;
        INV_SQRT_PI * (u * cc - v * ss) / r.sqrt()
    }
}

// FreeBSD msun e_j0.c coefficients for the asymptotic correction factors on
// [8, ∞): P(r) ≈ 1 + pr(z)/ps(z), Q(r) ≈ (-0.125 + qr(z)/qs(z))/r, z = 1/r².
const PR8: [f64; 6] = [
    0.0,
    -7.03124999999900357484e-02,
    -8.08167041275349795626e+00,
    -2.57063105679704847262e+02,
    -2.48521641009428822144e+03,
    -5.25304380490729545272e+03,
];
const PS8: [f64; 5] = [
    1.16534364619668181717e+02,
    3.83374475364121826715e+03,
    4.05978572648472545552e+04,
    1.16752972564375915681e+05,
    4.76277284146730962675e+04,
];
const QR8: [f64; 6] = [
    0.0,
    7.32421874999935051953e-02,
    1.17682064682252693899e+01,
    5.57673380256401856059e+02,
    8.85919720756468632317e+03,
    3.70146267987185437560e+04,
];
const QS8: [f64; 6] = [
    1.63776026895689824414e+02,
    8.09834494656449805916e+03,
    1.42538291419120476348e+05,
    8.03309257119514397345e+05,
    8.40501579819060512818e+05,
    -3.43899293537866615225e+05,
];

fn pzero(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    let r = PR8[0] + z * (PR8[1] + z * (PR8[2] + z * (PR8[3] + z * (PR8[4] + z * PR8[5]))));
    let s = 1.0 + z * (PS8[0] + z * (PS8[1] + z * (PS8[2] + z * (PS8[3] + z * PS8[4]))));
    1.0 + r / s
}

fn qzero(x: f64) -> f64 {
    let z = 1.0 / (x * x);
    let r = QR8[0] + z * (QR8[1] + z * (QR8[2] + z * (QR8[3] + z * (QR8[4] + z * QR8[5]))));
    let s = 1.0 + z * (QS8[0] + z * (QS8[1] + z * (QS8[2] + z * (QS8[3] + z * (QS8[4] + z * QS8[5])))));
    (-0.125 + r / s) / x
}

/// Modified Bessel function of the third kind K_{3/2}(x), x > 0, via its
/// half-integer closed form √(π/(2x)) e^{-x} (1 + 1/x).
pub fn bessel_k32(x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k32 requires a positive argument");
    (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() * (1.0 + 1.0 / x)
}

/// Density of the jump (Lévy) measure of the relativistic 2D process at `y`.
///
/// For m_p > 0: m_p^{3/2} K_{3/2}(m_p|y|) / (√2 (π|y|)^{3/2}); for m_p = 0:
/// 1/(2π|y|³). Returns exactly 0 at y = 0 (the excluded point).
pub fn levy_jump_density(y: Vec2, m_p: f64) -> f64 {
    assert!(m_p >= 0.0, "particle mass must be nonnegative");
    jump_density_radial(y.norm(), m_p)
}

/// Radial profile of the jump density as a function of r = |y|.
pub fn jump_density_radial(r: f64, m_p: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if m_p == 0.0 {
        1.0 / (2.0 * std::f64::consts::PI * r.powi(3))
    } else {
        m_p.powf(1.5) * bessel_k32(m_p * r)
            / (std::f64::consts::SQRT_2 * (std::f64::consts::PI * r).powf(1.5))
    }
}

/// Radial density of the jump measure: μ(r) dr = ν({|y| ∈ dr}), i.e.
/// μ(r) = 2π r ρ(|y|=r). Closed form (m_p/r + 1/r²) e^{-m_p r}.
pub fn jump_radial_measure(r: f64, m_p: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    (m_p / r + 1.0 / (r * r)) * (-m_p * r).exp()
}

/// Total jump-measure mass above radius ε: ν(|y| > ε) = e^{-m_p ε}/ε.
pub fn jump_tail_mass(eps: f64, m_p: f64) -> f64 {
    assert!(eps > 0.0, "threshold must be positive");
    (-m_p * eps).exp() / eps
}

/// Second moment of jumps below the threshold: ∫_{|y|≤ε} |y|² dν.
pub fn jump_small_second_moment(eps: f64, m_p: f64) -> f64 {
    assert!(eps > 0.0, "threshold must be positive");
    if m_p == 0.0 {
        return eps;
    }
    let me = m_p * eps;
    if me < 1e-4 {
        // Series of -ε e^{-mε} + 2(1 - e^{-mε})/m around mε = 0.
        eps * (1.0 - me * me / 3.0 + me * me * me / 4.0)
    } else {
        -eps * (-me).exp() + 2.0 * (1.0 - (-me).exp()) / m_p
    }
}

/// Probability density of the process position at time t, evaluated at `y`.
///
/// m_p = 0: t / (2π (t² + |y|²)^{3/2});
/// m_p > 0: 2 (m_p/2π)^{3/2} · t e^{m_p t} (t²+|y|²)^{-3/4} K_{3/2}(m_p √(t²+|y|²)).
pub fn marginal_density(y: Vec2, t: f64, m_p: f64) -> f64 {
    marginal_density_radial(y.norm(), t, m_p)
}

/// Marginal density as a function of r = |y|.
pub fn marginal_density_radial(r: f64, t: f64, m_p: f64) -> f64 {
    assert!(t > 0.0, "time must be positive");
    assert!(m_p >= 0.0, "particle mass must be nonnegative");
    let s2 = t * t + r * r;
    if m_p == 0.0 {
        t / (2.0 * std::f64::consts::PI * s2.powf(1.5))
    } else {
        (m_p / (2.0 * std::f64::consts::PI)).powf(1.5) * 2.0 * t * (m_p * t).exp()
            / s2.powf(0.75)
            * bessel_k32(m_p * s2.sqrt())
    }
}

/// CDF of |X_t|: P(|X_t| ≤ R). Closed form for m_p = 0, adaptive radial
/// quadrature otherwise.
pub fn marginal_radial_cdf(radius: f64, t: f64, m_p: f64) -> f64 {
    assert!(t > 0.0, "time must be positive");
    if radius <= 0.0 {
        return 0.0;
    }
    if m_p == 0.0 {
        1.0 - t / (t * t + radius * radius).sqrt()
    } else {
        let (v, _) = quad::integrate_adaptive(
            |r| 2.0 * std::f64::consts::PI * r * marginal_density_radial(r, t, m_p),
            0.0,
            radius,
            1e-11,
        );
        v.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Oracle: J0(s) = (1/2π) ∫₀^{2π} cos(s sin t) dt by the trapezoid rule,
    /// spectrally accurate for periodic entire integrands.
    fn j0_by_integral(s: f64, n: usize) -> f64 {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        (0..n).map(|i| (s * (i as f64 * h).sin()).cos()).sum::<f64>() / n as f64
    }

    /// Oracle: K_ν(x) = ½ ∫₀^∞ t^{ν-1} e^{-x(t+1/t)/2} dt with ν = 3/2.
    fn k32_by_integral(x: f64) -> f64 {
        let (v, _) =
            quad::integrate_to_infinity(|t| t.sqrt() * (-0.5 * x * (t + 1.0 / t)).exp(), 0.0, 1.0, 1e-13);
        0.5 * v
    }

    #[test]
    fn j0_at_zero_is_one() {
        assert_eq!(bessel_j0(0.0), 1.0);
    }

    #[test]
    fn j0_vanishes_at_first_zero() {
        // First positive zero, itself cross-checked against the integral oracle.
        let r = 2.404825557695773;
        assert!(j0_by_integral(r, 512).abs() < 1e-12);
        assert!(bessel_j0(r).abs() < 1e-10);
    }

    #[test]
    fn j0_matches_integral_oracle() {
        for &s in &[0.1, 0.5, 1.0, 3.0, 7.5, 7.99, 8.0, 8.01, 12.0, 25.0, 50.0, 100.0] {
            let oracle = j0_by_integral(s, 4096);
            let got = bessel_j0(s);
            assert!(
                (got - oracle).abs() < 1e-12,
                "J0({s}): got {got}, oracle {oracle}"
            );
        }
    }

    #[test]
    fn j0_envelope_bound_large_r() {
        // |J0(r)| ≤ c/√r with the envelope constant fitted empirically: the
        // global sup of √r |J0(r)| sits on the first lobe, ≈ 0.7595 at r≈1.
        let mut c_fit: f64 = 0.0;
        let mut r: f64 = 0.01;
        while r < 200.0 {
            c_fit = c_fit.max(r.sqrt() * bessel_j0(r).abs());
            r += 0.01;
        }
        assert!(c_fit < 0.8, "fitted envelope constant {c_fit}");
        assert!(bessel_j0(100.0).abs() <= c_fit / 100.0f64.sqrt());
        assert!(bessel_j0(1e4).abs() <= c_fit / 1e2);
    }

    proptest! {
        #[test]
        fn j0_bounded_by_one(r in 0.0f64..1e4) {
            prop_assert!(bessel_j0(r).abs() <= 1.0 + 1e-14);
        }

        #[test]
        fn jump_density_times_r_cubed_tends_to_small_jump_limit(
            m_p in 0.0f64..5.0, r in 1e-6f64..1e-4
        ) {
            // Small jumps are mass-independent: ρ(y)|y|³ → 1/2π as |y| → 0.
            let v = jump_density_radial(r, m_p) * r.powi(3);
            prop_assert!((v - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-3);
        }
    }

    #[test]
    fn k32_matches_integral_oracle_at_one() {
        assert_relative_eq!(bessel_k32(1.0), k32_by_integral(1.0), max_relative = 1e-10);
    }

    #[test]
    fn k32_bounds() {
        // Small-argument bound K(x) ≤ c/x^{3/2} and large-argument decay
        // K(x) ≤ c e^{-x}/√x; both with c = √(π/2)·2 read off the closed form.
        let c = (std::f64::consts::PI / 2.0f64).sqrt() * 2.0;
        for &x in &[0.01, 0.1, 0.5, 1.0] {
            assert!(bessel_k32(x) <= c / x.powf(1.5));
        }
        for &x in &[2.0, 10.0, 40.0] {
            assert!(bessel_k32(x) <= c * (-x).exp() / x.sqrt());
        }
    }

    #[test]
    fn jump_density_examples() {
        assert_eq!(levy_jump_density(Vec2::ZERO, 1.0), 0.0);
        // m_p = 0, |y| = 2 → 1/(16π).
        assert_relative_eq!(
            levy_jump_density(Vec2::new(2.0, 0.0), 0.0),
            1.0 / (16.0 * std::f64::consts::PI),
            max_relative = 1e-14
        );
    }

    #[test]
    fn jump_density_consistent_with_radial_measure() {
        for &(r, m) in &[(0.3, 0.0), (0.3, 1.0), (2.0, 0.5), (5.0, 2.0)] {
            assert_relative_eq!(
                2.0 * std::f64::consts::PI * r * jump_density_radial(r, m),
                jump_radial_measure(r, m),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn jump_tail_mass_matches_quadrature() {
        for &(eps, m) in &[(1.0, 0.0), (0.3, 1.0), (0.1, 2.0)] {
            let (v, _) = quad::integrate_to_infinity(|r| jump_radial_measure(r, m), eps, 1.0, 1e-12);
            assert_relative_eq!(jump_tail_mass(eps, m), v, max_relative = 1e-8);
        }
        // m_p = 0, ε = 1 → unit rate.
        assert_eq!(jump_tail_mass(1.0, 0.0), 1.0);
    }

    #[test]
    fn jump_small_second_moment_matches_quadrature() {
        for &(eps, m) in &[(0.5, 0.0), (0.5, 1.0), (0.05, 3.0)] {
            let (v, _) = quad::integrate_adaptive(|r| r * r * jump_radial_measure(r, m), 0.0, eps, 1e-13);
            assert_relative_eq!(jump_small_second_moment(eps, m), v, max_relative = 1e-8);
        }
    }

    #[test]
    fn marginal_density_examples() {
        let t = 0.7;
        // m_p = 0, y = 0 → 1/(2πt²).
        assert_relative_eq!(
            marginal_density(Vec2::ZERO, t, 0.0),
            1.0 / (2.0 * std::f64::consts::PI * t * t),
            max_relative = 1e-14
        );
        // Rotational symmetry.
        let r = 1.3;
        for &mp in &[0.0, 1.0] {
            let a = marginal_density(Vec2::new(r, 0.0), t, mp);
            let b = marginal_density(Vec2::new(r / 2.0f64.sqrt(), r / 2.0f64.sqrt()), t, mp);
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn marginal_density_normalizes() {
        for &(t, mp) in &[(1.0, 0.0), (0.5, 1.0), (2.0, 0.3)] {
            let (v, _) = quad::integrate_to_infinity(
                |r| 2.0 * std::f64::consts::PI * r * marginal_density_radial(r, t, mp),
                0.0,
                t,
                1e-9,
            );
            assert!((v - 1.0).abs() < 1e-6, "t={t} mp={mp}: mass {v}");
        }
    }

    #[test]
    fn marginal_density_convolution_semigroup() {
        // (ρ_t * ρ_t)(y0) = ρ_{2t}(y0), checked by polar quadrature at desk scale.
        let t = 0.6;
        for &mp in &[0.0, 1.0] {
            for &y0 in &[0.0, 0.8] {
                let n_theta = 128;
                let conv = {
                    let angular = |r: f64| -> f64 {
                        (0..n_theta)
                            .map(|i| {
                                let th = 2.0 * std::f64::consts::PI * i as f64 / n_theta as f64;
                                let d = ((y0 - r * th.cos()).powi(2) + (r * th.sin()).powi(2)).sqrt();
                                marginal_density_radial(d, t, mp)
                            })
                            .sum::<f64>()
                            * (2.0 * std::f64::consts::PI / n_theta as f64)
                    };
                    let (v, _) = quad::integrate_to_infinity(
                        |r| r * marginal_density_radial(r, t, mp) * angular(r),
                        0.0,
                        t,
                        1e-7,
                    );
                    v
                };
                let direct = marginal_density_radial(y0, 2.0 * t, mp);
                assert!(
                    (conv - direct).abs() < 2e-4 * direct.max(1.0),
                    "mp={mp} y0={y0}: conv {conv} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn marginal_cdf_monotone_and_normalized() {
        for &mp in &[0.0, 1.0] {
            let mut last = 0.0;
            for i in 1..=20 {
                let r = i as f64 * 0.5;
                let c = marginal_radial_cdf(r, 1.0, mp);
                assert!(c >= last - 1e-12);
                last = c;
            }
            assert!(marginal_radial_cdf(500.0, 1.0, mp) > 0.998);
        }
    }
}
