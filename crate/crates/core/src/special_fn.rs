//! Log-gamma, digamma, normal and gamma distribution functions, and the
//! envelope `C(x)` that floors the gamma-kernel window mass.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_405_6;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("ln_gamma needs x > 0, got {x}"));
    }
    Ok(ln_gamma_pos(x))
}

pub(crate) fn ln_gamma_pos(x: f64) -> f64 {
    if x.is_infinite() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        // Γ(x) = Γ(x+1)/x keeps the Lanczos sum in its accurate range.
        return ln_gamma_pos(x + 1.0) - x.ln();
    }
    if x >= 10.0 {
        return stirling(x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + sum.ln()
}

fn stirling(x: f64) -> f64 {
    let r = 1.0 / x;
    let r2 = r * r;
    let series = r
        * (1.0 / 12.0
            + r2 * (-1.0 / 360.0
                + r2 * (1.0 / 1260.0
                    + r2 * (-1.0 / 1680.0 + r2 * (1.0 / 1188.0 + r2 * (-691.0 / 360_360.0))))));
    (x - 0.5) * x.ln() - x + LN_SQRT_2PI + series
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    ln_gamma_pos(n + 1.0) - ln_gamma_pos(k + 1.0) - ln_gamma_pos(n - k + 1.0)
}

/// Digamma `Ψ₀(x) = d/dx ln Γ(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return domain(format!("digamma needs x > 0, got {x}"));
    }
    Ok(digamma_pos(x))
}

pub(crate) fn digamma_pos(mut x: f64) -> f64 {
    if x.is_infinite() {
        return f64::INFINITY;
    }
    let mut shift = 0.0;
    while x < 6.0 {
        shift -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    // B_{2k}/(2k) for k = 1..=9.
    const C: [f64; 9] = [
        1.0 / 12.0,
        -1.0 / 120.0,
        1.0 / 252.0,
        -1.0 / 240.0,
        1.0 / 132.0,
        -691.0 / 32_760.0,
        1.0 / 12.0,
        -3617.0 / 8160.0,
        43_867.0 / 14_364.0,
    ];
    let tail = r2 * C.iter().rev().fold(0.0, |acc, c| acc * r2 + c);
    shift + x.ln() - 0.5 * r - tail
}

/// Inverse of digamma on `(0, ∞)`: returns `a` with `Ψ₀(a) = y`.
pub fn inverse_digamma(y: f64) -> f64 {
    // Starting point from the asymptotic expansion, then Newton on Ψ₀.
    let mut a = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y - digamma_pos(1.0))
    };
    for _ in 0..50 {
        let step = (digamma_pos(a) - y) / trigamma(a);
        let next = a - step;
        a = if next > 0.0 { next } else { 0.5 * a };
        if step.abs() <= 1e-14 * a {
            break;
        }
    }
    a
}

/// Trigamma `Ψ₁(x)` for `x > 0`.
pub fn trigamma(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < 6.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    acc + r + 0.5 * r2
        + r * r2 * (1.0 / 6.0 - r2 * (1.0 / 30.0 - r2 * (1.0 / 42.0 - r2 * (1.0 / 30.0))))
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

pub fn std_normal_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `Φ(x)`.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// `1 − Φ(x)`, accurate in the upper tail.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio `(1 − Φ(u))/φ(u)` for `u ≥ 0`.
pub fn mills_ratio(u: f64) -> f64 {
    if u < 5.0 {
        return std_normal_sf(u) / std_normal_pdf(u);
    }
    // Continued fraction 1/(u + 1/(u + 2/(u + 3/(u + ...)))), evaluated backwards.
    let mut tail = u;
    for k in (1..=60).rev() {
        tail = u + k as f64 / tail;
    }
    1.0 / tail
}

/// `ln Φ(x)`, finite for every finite `x`.
pub fn std_normal_ln_cdf(x: f64) -> f64 {
    if x > 0.0 {
        (-std_normal_sf(x)).ln_1p()
    } else if x > -5.0 {
        std_normal_cdf(x).ln()
    } else {
        std_normal_ln_pdf(x) + mills_ratio(-x).ln()
    }
}

/// Regularized lower incomplete gamma `P(shape, x)`, i.e. the CDF of
/// `Gamma(shape, 1)` at `x`.
pub fn gamma_cdf(x: f64, shape: f64) -> Result<f64> {
    if !(shape > 0.0) || !(x >= 0.0) {
        return domain(format!("gamma_cdf needs x >= 0 and shape > 0, got x={x}, shape={shape}"));
    }
    Ok(gamma_p_q(x, shape).0)
}

/// Upper tail `Q(shape, x) = 1 − P(shape, x)`.
pub fn gamma_sf(x: f64, shape: f64) -> Result<f64> {
    if !(shape > 0.0) || !(x >= 0.0) {
        return domain(format!("gamma_sf needs x >= 0 and shape > 0, got x={x}, shape={shape}"));
    }
    Ok(gamma_p_q(x, shape).1)
}

fn gamma_p_q(x: f64, a: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let ln_pref = a * x.ln() - x - ln_gamma_pos(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..100_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        let p = (ln_pref + sum.ln()).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        // Modified Lentz for the continued fraction of Q.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..100_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        let q = (ln_pref + h.ln()).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// Which exponent to use in the `x ≥ 1` branch of the envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExponentVariant {
    /// `exp(3/2 − 12/x)` as printed.
    AsPrinted,
    /// `exp(3/2 − 1/(12x))`, matching the Stirling step it is derived from.
    #[default]
    ConsistentWith35,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeParams {
    delta: f64,
    pub exponent_variant: ExponentVariant,
}

/// Largest value the envelope reports; the one-sided window carries about
/// half of the kernel mass, so larger floors cannot hold for large `m`.
pub const ENVELOPE_CAP: f64 = 0.5;

impl EnvelopeParams {
    pub fn new(delta: f64, exponent_variant: ExponentVariant) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return domain(format!("envelope delta must lie in (0, 1/2), got {delta}"));
        }
        Ok(EnvelopeParams {
            delta,
            exponent_variant,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

/// `ln C(x)` for the gamma-kernel window floor, before capping.
pub fn lemma8_envelope_ln(x: f64, params: &EnvelopeParams) -> Result<f64> {
    if !(x > 0.0) || x.is_infinite() {
        return domain(format!("envelope needs finite x > 0, got {x}"));
    }
    let d = params.delta;
    let ln_c = if x < 1.0 {
        2.0 * x.ln() - (2.0 * d * (1.0 + d) * (2.0 + d).sqrt()).ln()
            - 1.0 / (12.0 * x)
            - 2.0 * (1.0 + d) * d * d / (x * x)
    } else {
        let stirling_term = match params.exponent_variant {
            ExponentVariant::AsPrinted => 12.0 / x,
            ExponentVariant::ConsistentWith35 => 1.0 / (12.0 * x),
        };
        d.ln() + 1.5 - stirling_term - (2.0 * (2.0 * PI * (x + d)).sqrt()).ln()
            - x * d * d / (8.0 * (x - d) * (x - d))
    };
    Ok(ln_c.min(ENVELOPE_CAP.ln()))
}

/// The envelope `C(x)`, capped at [`ENVELOPE_CAP`].
pub fn lemma8_envelope(x: f64, params: &EnvelopeParams) -> Result<f64> {
    lemma8_envelope_ln(x, params).map(f64::exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: u64) -> f64 {
        (2..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn ln_gamma_anchors() {
        assert_eq!(ln_gamma(1.0).unwrap().abs() < 1e-15, true);
        assert!(ln_gamma(2.0).unwrap().abs() < 1e-15);
        let exact = ln_factorial(9);
        assert!((ln_gamma(10.0).unwrap() - exact).abs() < 1e-12 * exact);
        assert!((ln_gamma(10.0).unwrap() - 12.801_827_480_081_469).abs() < 1e-11);
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-1.5).is_err());
    }

    #[test]
    fn ln_gamma_integer_factorials() {
        for n in 1..170u64 {
            let exact = ln_factorial(n - 1);
            let got = ln_gamma(n as f64).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn ln_gamma_half_integers() {
        // Γ(n + 1/2) = (2n)! √π / (4^n n!)
        for n in 0..60u64 {
            let exact = ln_factorial(2 * n) + 0.5 * PI.ln()
                - (n as f64) * 4f64.ln()
                - ln_factorial(n);
            let got = ln_gamma(n as f64 + 0.5).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn digamma_anchors() {
        let euler = 0.577_215_664_901_532_9;
        assert!((digamma(1.0).unwrap() + euler).abs() < 1e-13);
        assert!((digamma(2.0).unwrap() - 0.42).abs() < 0.01);
        assert!((digamma(2.0).unwrap() - (1.0 - euler)).abs() < 1e-13);
        assert!(digamma(0.0).is_err());
        for x in [1e3, 1e5, 1e7] {
            assert!((digamma(x).unwrap() - (x - 1.0).ln()).abs() < 1.0 / x);
        }
    }

    #[test]
    fn inverse_digamma_round_trip() {
        for a in [0.01, 0.3, 1.0, 2.0, 7.5, 40.0, 1e4] {
            let y = digamma(a).unwrap();
            assert!((inverse_digamma(y) - a).abs() < 1e-10 * a, "a={a}");
        }
    }

    #[test]
    fn normal_cdf_anchors() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert!((1.0 - std_normal_cdf(40.0)).abs() < 1e-15);
        assert!(std_normal_sf(37.0) > 0.0);
        let lc = std_normal_ln_cdf(-40.0);
        let direct = std_normal_ln_pdf(-40.0) - 40f64.ln();
        assert!((lc - direct).abs() < 1e-3);
        assert!((std_normal_ln_cdf(-6.0) - 9.865_876_450_377e-10f64.ln()).abs() < 1e-10);
        assert!((std_normal_ln_cdf(-5.0 + 1e-9) - std_normal_ln_cdf(-5.0 - 1e-9)).abs() < 1e-7);
    }

    #[test]
    fn gamma_cdf_anchors() {
        assert_eq!(gamma_cdf(0.0, 3.0).unwrap(), 0.0);
        assert!((gamma_cdf(1.0, 1.0).unwrap() - (1.0 - (-1f64).exp())).abs() < 1e-14);
        assert!(gamma_cdf(-1.0, 1.0).is_err());
        assert!(gamma_cdf(1.0, 0.0).is_err());
        // Integer shape has a finite Poisson sum.
        let x: f64 = 3.7;
        let exact = 1.0 - (-x).exp() * (1.0 + x + x * x / 2.0 + x * x * x / 6.0);
        assert!((gamma_cdf(x, 4.0).unwrap() - exact).abs() < 1e-14);
    }

    #[test]
    fn envelope_params_validate() {
        assert!(EnvelopeParams::new(0.0, ExponentVariant::default()).is_err());
        assert!(EnvelopeParams::new(0.5, ExponentVariant::default()).is_err());
        let p = EnvelopeParams::new(0.25, ExponentVariant::default()).unwrap();
        assert!(lemma8_envelope(0.0, &p).is_err());
        assert!(lemma8_envelope(1e-3, &p).unwrap() < 1e-100);
    }
}
