//! The kernel catalog: densities `K(x; θ, φ)` on the real line, the unit
//! interval and the positive half line, plus location-scale views.

use std::f64::consts::{LN_2, PI};

use crate::density::Support;
use crate::error::{Error, Result};
use crate::special_fn::{ln_binomial, ln_gamma_pos, std_normal_ln_cdf, std_normal_ln_pdf};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_780_329_736_405_6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `2/h φ(z) Φ(λz)`, `z = (x−θ)/h`.
    SkewNormal { lambda: f64 },
    /// Isotropic normal `h^{-d} φ_d((x−θ)/h)`.
    MvNormal { dim: usize },
    DoubleExponential,
    Logistic,
    StudentT { nu: f64 },
    /// `θ` in `(0, 1]`, `φ = m` bins.
    Histogram,
    /// `θ = i` in `0..=n`, `φ = n`.
    Triangular,
    /// `θ = j` in `0..=k`, `φ = k`; the Beta(j+1, k−j+1) density.
    Bernstein,
    /// `θ = μ`, `φ = σ`.
    LogNormal,
    /// `θφ⁻¹ x^{θ−1} exp(−x^θ/φ)`.
    Weibull,
    /// Shape `θ = α`, scale `φ = β`.
    Gamma,
    /// `θ = z`, `φ = k`: `(kz)^k/Γ(k) x^{−k−1} e^{−kz/x}`.
    InverseGamma,
    /// Rate `θ`.
    Exponential,
    /// `θ⁻¹ 1{0 ≤ x ≤ θ}`.
    ScaledUniform,
}

/// Shape of a parameter space, for reports and validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamSpace {
    Real { dim: usize },
    Positive,
    /// `(0, 1]`.
    UnitInterval,
    /// Integers `≥ min`.
    Integer { min: u32 },
    Vacuous,
}

pub const FAMILY_NAMES: [&str; 14] = [
    "skew_normal",
    "mv_normal",
    "double_exponential",
    "logistic",
    "t",
    "histogram",
    "triangular",
    "bernstein",
    "lognormal",
    "weibull",
    "gamma",
    "inverse_gamma",
    "exponential",
    "scaled_uniform",
];

fn bad(family: &'static str, detail: String) -> Error {
    Error::Parameter { family, detail }
}

fn positive(family: &'static str, what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(family, format!("{what} must be positive and finite, got {v}")))
    }
}

fn positive_int(family: &'static str, what: &str, v: f64) -> Result<u64> {
    if v >= 1.0 && v.fract() == 0.0 && v < 1e9 {
        Ok(v as u64)
    } else {
        Err(bad(family, format!("{what} must be a positive integer, got {v}")))
    }
}

fn finite(family: &'static str, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(family, format!("{what} must be finite, got {v}")))
    }
}

impl KernelSpec {
    pub fn skew_normal(lambda: f64) -> Result<Self> {
        finite("skew_normal", "lambda", lambda)?;
        Ok(KernelSpec::SkewNormal { lambda })
    }

    pub fn normal() -> Self {
        KernelSpec::MvNormal { dim: 1 }
    }

    pub fn mv_normal(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(bad("mv_normal", "dimension must be at least 1".into()));
        }
        Ok(KernelSpec::MvNormal { dim })
    }

    pub fn student_t(nu: f64) -> Result<Self> {
        positive("t", "nu", nu)?;
        Ok(KernelSpec::StudentT { nu })
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::SkewNormal { .. } => "skew_normal",
            KernelSpec::MvNormal { .. } => "mv_normal",
            KernelSpec::DoubleExponential => "double_exponential",
            KernelSpec::Logistic => "logistic",
            KernelSpec::StudentT { .. } => "t",
            KernelSpec::Histogram => "histogram",
            KernelSpec::Triangular => "triangular",
            KernelSpec::Bernstein => "bernstein",
            KernelSpec::LogNormal => "lognormal",
            KernelSpec::Weibull => "weibull",
            KernelSpec::Gamma => "gamma",
            KernelSpec::InverseGamma => "inverse_gamma",
            KernelSpec::Exponential => "exponential",
            KernelSpec::ScaledUniform => "scaled_uniform",
        }
    }

    pub fn sample_space(&self) -> Support {
        match self {
            KernelSpec::SkewNormal { .. }
            | KernelSpec::MvNormal { .. }
            | KernelSpec::DoubleExponential
            | KernelSpec::Logistic
            | KernelSpec::StudentT { .. } => Support::RealLine,
            KernelSpec::Histogram | KernelSpec::Triangular | KernelSpec::Bernstein => {
                Support::UnitInterval
            }
            _ => Support::PositiveHalfLine,
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            KernelSpec::MvNormal { dim } => *dim,
            _ => 1,
        }
    }

    pub fn theta_space(&self) -> ParamSpace {
        match self {
            KernelSpec::SkewNormal { .. }
            | KernelSpec::DoubleExponential
            | KernelSpec::Logistic
            | KernelSpec::StudentT { .. }
            | KernelSpec::LogNormal => ParamSpace::Real { dim: 1 },
            KernelSpec::MvNormal { dim } => ParamSpace::Real { dim: *dim },
            KernelSpec::Histogram => ParamSpace::UnitInterval,
            KernelSpec::Triangular | KernelSpec::Bernstein => ParamSpace::Integer { min: 0 },
            _ => ParamSpace::Positive,
        }
    }

    pub fn phi_space(&self) -> ParamSpace {
        match self {
            KernelSpec::Histogram | KernelSpec::Triangular | KernelSpec::Bernstein => {
                ParamSpace::Integer { min: 1 }
            }
            KernelSpec::Exponential | KernelSpec::ScaledUniform => ParamSpace::Vacuous,
            _ => ParamSpace::Positive,
        }
    }

    pub fn needs_phi(&self) -> bool {
        self.phi_space() != ParamSpace::Vacuous
    }

    /// Checks `(θ, φ)` against the family's parameter space. `φ` is ignored for
    /// families with a vacuous hyper-parameter.
    pub fn validate(&self, theta: f64, phi: f64) -> Result<()> {
        let fam = self.name();
        match self {
            KernelSpec::SkewNormal { .. }
            | KernelSpec::MvNormal { .. }
            | KernelSpec::DoubleExponential
            | KernelSpec::Logistic
            | KernelSpec::StudentT { .. }
            | KernelSpec::LogNormal => {
                finite(fam, "location", theta)?;
                positive(fam, "scale", phi)
            }
            KernelSpec::Histogram => {
                positive_int(fam, "bin count m", phi)?;
                if (0.0..=1.0).contains(&theta) {
                    Ok(())
                } else {
                    Err(bad(fam, format!("theta must lie in [0, 1], got {theta}")))
                }
            }
            KernelSpec::Triangular | KernelSpec::Bernstein => {
                let n = positive_int(fam, "order", phi)?;
                if theta >= 0.0 && theta.fract() == 0.0 && theta <= n as f64 {
                    Ok(())
                } else {
                    Err(bad(fam, format!("index must be an integer in 0..={n}, got {theta}")))
                }
            }
            KernelSpec::Weibull | KernelSpec::Gamma | KernelSpec::InverseGamma => {
                positive(fam, "theta", theta)?;
                positive(fam, "phi", phi)
            }
            KernelSpec::Exponential | KernelSpec::ScaledUniform => positive(fam, "theta", theta),
        }
    }

    /// `K(x; θ, φ)`.
    pub fn eval(&self, x: f64, theta: f64, phi: f64) -> Result<f64> {
        match self {
            KernelSpec::Histogram => {
                self.validate(theta, phi)?;
                let m = phi;
                Ok(if in_unit(x) && bin_of(x, m) == bin_of(theta, m) { m } else { 0.0 })
            }
            KernelSpec::Triangular => {
                self.validate(theta, phi)?;
                Ok(triangular(x, theta, phi))
            }
            KernelSpec::ScaledUniform => {
                self.validate(theta, phi)?;
                Ok(if (0.0..=theta).contains(&x) { 1.0 / theta } else { 0.0 })
            }
            _ => self.ln_eval(x, theta, phi).map(f64::exp),
        }
    }

    /// `ln K(x; θ, φ)`, `−∞` where the kernel vanishes.
    pub fn ln_eval(&self, x: f64, theta: f64, phi: f64) -> Result<f64> {
        self.validate(theta, phi)?;
        if x.is_nan() {
            return Err(Error::Domain("x is NaN".into()));
        }
        let out = match *self {
            KernelSpec::SkewNormal { .. }
            | KernelSpec::MvNormal { dim: 1 }
            | KernelSpec::DoubleExponential
            | KernelSpec::Logistic
            | KernelSpec::StudentT { .. } => {
                let base = BaseDensity::of_native(self).expect("native location-scale family");
                base.ln_chi((x - theta) / phi) - phi.ln()
            }
            KernelSpec::MvNormal { dim } => {
                return Err(bad(
                    "mv_normal",
                    format!("scalar evaluation needs d = 1, kernel has d = {dim}; use ln_eval_vec"),
                ))
            }
            KernelSpec::Histogram => {
                if in_unit(x) && bin_of(x, phi) == bin_of(theta, phi) {
                    phi.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            KernelSpec::Triangular => triangular(x, theta, phi).ln(),
            KernelSpec::Bernstein => {
                if !in_unit(x) {
                    f64::NEG_INFINITY
                } else {
                    let (j, k) = (theta, phi);
                    let a = if j == 0.0 { 0.0 } else { j * x.ln() };
                    let b = if j == k { 0.0 } else { (k - j) * (-x).ln_1p() };
                    (k + 1.0).ln() + ln_binomial(k as u64, j as u64) + a + b
                }
            }
            KernelSpec::LogNormal => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let y = x.ln();
                    std_normal_ln_pdf((y - theta) / phi) - phi.ln() - y
                }
            }
            KernelSpec::Weibull => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let lx = x.ln();
                    theta.ln() - phi.ln() + (theta - 1.0) * lx - (theta * lx).exp() / phi
                }
            }
            KernelSpec::Gamma => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else if x == 0.0 {
                    gamma_at_zero(theta, phi)
                } else {
                    (theta - 1.0) * x.ln() - x / phi - ln_gamma_pos(theta) - theta * phi.ln()
                }
            }
            KernelSpec::InverseGamma => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    let (z, k) = (theta, phi);
                    k * (k * z).ln() - ln_gamma_pos(k) - (k + 1.0) * x.ln() - k * z / x
                }
            }
            KernelSpec::Exponential => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    theta.ln() - theta * x
                }
            }
            KernelSpec::ScaledUniform => {
                if (0.0..=theta).contains(&x) {
                    -theta.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        Ok(out)
    }

    /// `ln K` for a point in `ℝ^d`; only the normal family is multivariate.
    pub fn ln_eval_vec(&self, x: &[f64], theta: &[f64], phi: f64) -> Result<f64> {
        let d = self.dimension();
        if x.len() != d || theta.len() != d {
            return Err(bad(
                self.name(),
                format!("expected {d}-dimensional x and theta, got {} and {}", x.len(), theta.len()),
            ));
        }
        match self {
            KernelSpec::MvNormal { .. } => {
                positive("mv_normal", "scale", phi)?;
                let z: Vec<f64> = x.iter().zip(theta).map(|(a, b)| (a - b) / phi).collect();
                Ok(BaseDensity::Normal { dim: d }.ln_chi_vec(&z) - d as f64 * phi.ln())
            }
            _ => self.ln_eval(x[0], theta[0], phi),
        }
    }

    /// Points where `K(·; θ, φ)` is not smooth.
    pub fn kinks(&self, theta: f64, phi: f64) -> Vec<f64> {
        match self {
            KernelSpec::DoubleExponential => vec![theta],
            KernelSpec::Histogram => {
                let b = bin_of(theta, phi) as f64;
                vec![(b - 1.0) / phi, b / phi]
            }
            KernelSpec::Triangular => vec![(theta - 1.0) / phi, theta / phi, (theta + 1.0) / phi]
                .into_iter()
                .filter(|p| (0.0..=1.0).contains(p))
                .collect(),
            KernelSpec::ScaledUniform => vec![theta],
            _ => Vec::new(),
        }
    }

    /// The location-scale view of a kernel, when one exists.
    pub fn to_location_scale(&self) -> Result<LocationScaleView> {
        let (base, coordinates) = match self {
            KernelSpec::LogNormal => (BaseDensity::Normal { dim: 1 }, Coordinates::Log),
            KernelSpec::Weibull => (BaseDensity::Gumbel, Coordinates::Log),
            other => match BaseDensity::of_native(other) {
                Some(b) => (b, Coordinates::Native),
                None => return Err(Error::UnsupportedFamily(other.name().to_string())),
            },
        };
        Ok(LocationScaleView {
            base,
            coordinates,
            family: *self,
        })
    }
}

fn in_unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

/// Bin index `i` with `x ∈ ((i−1)/m, i/m]`; `x = 0` belongs to bin 1.
fn bin_of(x: f64, m: f64) -> i64 {
    ((x * m).ceil() as i64).max(1)
}

fn triangular(x: f64, i: f64, n: f64) -> f64 {
    if !in_unit(x) {
        return 0.0;
    }
    let u = n * x - i;
    if i == 0.0 {
        if x < 1.0 / n {
            2.0 * n * (1.0 - u)
        } else {
            0.0
        }
    } else if i == n {
        if u > -1.0 {
            2.0 * n * (1.0 + u)
        } else {
            0.0
        }
    } else if u.abs() < 1.0 {
        n * (1.0 - u.abs())
    } else {
        0.0
    }
}

fn gamma_at_zero(alpha: f64, beta: f64) -> f64 {
    if alpha < 1.0 {
        f64::INFINITY
    } else if alpha == 1.0 {
        -beta.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Base densities `χ` of the location-scale families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BaseDensity {
    SkewNormal { lambda: f64 },
    Normal { dim: usize },
    Laplace,
    Logistic,
    StudentT { nu: f64 },
    /// `W(z) = exp(z − e^z)`.
    Gumbel,
}

impl BaseDensity {
    fn of_native(k: &KernelSpec) -> Option<Self> {
        Some(match *k {
            KernelSpec::SkewNormal { lambda } => BaseDensity::SkewNormal { lambda },
            KernelSpec::MvNormal { dim } => BaseDensity::Normal { dim },
            KernelSpec::DoubleExponential => BaseDensity::Laplace,
            KernelSpec::Logistic => BaseDensity::Logistic,
            KernelSpec::StudentT { nu } => BaseDensity::StudentT { nu },
            _ => return None,
        })
    }

    pub fn dimension(&self) -> usize {
        match self {
            BaseDensity::Normal { dim } => *dim,
            _ => 1,
        }
    }

    /// `ln χ(z)` for scalar `z`; the normal base is evaluated as 1-dimensional.
    pub fn ln_chi(&self, z: f64) -> f64 {
        match *self {
            BaseDensity::SkewNormal { lambda } => {
                LN_2 + std_normal_ln_pdf(z) + std_normal_ln_cdf(lambda * z)
            }
            BaseDensity::Normal { .. } => std_normal_ln_pdf(z),
            BaseDensity::Laplace => -LN_2 - z.abs(),
            BaseDensity::Logistic => {
                let a = z.abs();
                -a - 2.0 * (-a).exp().ln_1p()
            }
            BaseDensity::StudentT { nu } => {
                ln_gamma_pos(0.5 * (nu + 1.0)) - ln_gamma_pos(0.5 * nu) - 0.5 * (nu * PI).ln()
                    - 0.5 * (nu + 1.0) * (z * z / nu).ln_1p()
            }
            BaseDensity::Gumbel => {
                if z > 709.0 {
                    f64::NEG_INFINITY
                } else {
                    z - z.exp()
                }
            }
        }
    }

    pub fn chi(&self, z: f64) -> f64 {
        self.ln_chi(z).exp()
    }

    pub fn ln_chi_vec(&self, z: &[f64]) -> f64 {
        match self {
            BaseDensity::Normal { .. } => {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                -0.5 * r2 - z.len() as f64 * LN_SQRT_2PI
            }
            _ => self.ln_chi(z[0]),
        }
    }

    /// `(∂_i χ(z) / χ(z))_i`.
    pub fn score(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dimension() {
            return Err(Error::Domain(format!(
                "score needs a {}-dimensional point, got {}",
                self.dimension(),
                z.len()
            )));
        }
        let s = match *self {
            BaseDensity::Normal { .. } => return Ok(z.iter().map(|v| -v).collect()),
            BaseDensity::SkewNormal { lambda } => {
                let t = lambda * z[0];
                -z[0] + lambda * (std_normal_ln_pdf(t) - std_normal_ln_cdf(t)).exp()
            }
            BaseDensity::Laplace => {
                if z[0] == 0.0 {
                    return Err(Error::NonDifferentiable(0.0));
                }
                -z[0].signum()
            }
            BaseDensity::Logistic => -(0.5 * z[0]).tanh(),
            BaseDensity::StudentT { nu } => -(nu + 1.0) * z[0] / (nu + z[0] * z[0]),
            BaseDensity::Gumbel => 1.0 - z[0].exp(),
        };
        Ok(vec![s])
    }

    /// `Σ z_i ∂_i χ(z)/χ(z)`.
    pub fn radial_score(&self, z: &[f64]) -> Result<f64> {
        Ok(self.score(z)?.iter().zip(z).map(|(s, v)| s * v).sum())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinates {
    Native,
    /// Location-scale in `y = ln x`.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationScaleView {
    pub base: BaseDensity,
    pub coordinates: Coordinates,
    pub family: KernelSpec,
}

impl LocationScaleView {
    pub fn dimension(&self) -> usize {
        self.base.dimension()
    }

    pub fn ln_chi(&self, z: f64) -> f64 {
        self.base.ln_chi(z)
    }

    pub fn chi(&self, z: f64) -> f64 {
        self.base.chi(z)
    }

    pub fn score(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.base.score(z)
    }

    /// Location and scale in view coordinates for native parameters `(θ, φ)`.
    pub fn location_scale(&self, theta: f64, phi: f64) -> (f64, f64) {
        match self.family {
            KernelSpec::Weibull => (phi.ln() / theta, 1.0 / theta),
            _ => (theta, phi),
        }
    }

    /// `ln(h^{-1} χ((y − loc)/h))` in view coordinates (1-dimensional).
    pub fn ln_kernel(&self, y: f64, loc: f64, scale: f64) -> f64 {
        self.base.ln_chi((y - loc) / scale) - scale.ln()
    }
}

/// Score ratios `χ'_i(z)/χ(z)` of a view's base density.
pub fn score_ratio(view: &LocationScaleView, z: &[f64]) -> Result<Vec<f64>> {
    view.score(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::Quadrature;

    fn integral(k: &KernelSpec, theta: f64, phi: f64) -> f64 {
        let q = Quadrature::with_tolerances(1e-10, 0.0);
        let (a, b) = match k.sample_space() {
            Support::RealLine => (f64::NEG_INFINITY, f64::INFINITY),
            Support::UnitInterval => (0.0, 1.0),
            Support::PositiveHalfLine => (0.0, f64::INFINITY),
        };
        let mut breaks = k.kinks(theta, phi);
        breaks.push(theta);
        q.integrate_with_breaks(|x| k.eval(x, theta, phi).unwrap(), a, b, &breaks)
            .unwrap()
            .value
    }

    #[test]
    fn catalog_examples() {
        let sn = KernelSpec::skew_normal(0.0).unwrap();
        assert!((sn.eval(0.0, 0.0, 1.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert_eq!(KernelSpec::Histogram.eval(0.3, 0.5, 2.0).unwrap(), 2.0);
        assert!((KernelSpec::Exponential.eval(1.0, 1.0, 0.0).unwrap() - (-1f64).exp()).abs() < 1e-16);
        assert!((KernelSpec::Gamma.ln_eval(1.0, 2.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(KernelSpec::ScaledUniform.ln_eval(2.0, 1.0, 0.0).unwrap(), f64::NEG_INFINITY);
        let t1 = KernelSpec::student_t(1.0).unwrap();
        assert!((t1.ln_eval(0.0, 0.0, 1.0).unwrap() - (1.0 / PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn parameter_validation() {
        assert!(KernelSpec::student_t(0.0).is_err());
        assert!(KernelSpec::mv_normal(0).is_err());
        assert!(KernelSpec::skew_normal(f64::NAN).is_err());
        assert!(KernelSpec::Gamma.eval(1.0, -1.0, 1.0).is_err());
        assert!(KernelSpec::Histogram.eval(0.5, 0.5, 2.5).is_err());
        assert!(KernelSpec::Triangular.eval(0.5, 4.0, 3.0).is_err());
        assert!(KernelSpec::normal().eval(0.0, 0.0, 0.0).is_err());
        // Outside the sample space is a zero, not an error.
        assert_eq!(KernelSpec::Exponential.eval(-1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(KernelSpec::Bernstein.eval(1.5, 1.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn every_family_normalized() {
        let cases: Vec<(KernelSpec, f64, f64)> = vec![
            (KernelSpec::skew_normal(3.0).unwrap(), 0.4, 0.7),
            (KernelSpec::normal(), -1.0, 2.0),
            (KernelSpec::DoubleExponential, 0.3, 0.5),
            (KernelSpec::Logistic, 1.0, 1.5),
            (KernelSpec::student_t(2.5).unwrap(), 0.0, 1.0),
            (KernelSpec::Histogram, 0.4, 5.0),
            (KernelSpec::Triangular, 0.0, 4.0),
            (KernelSpec::Triangular, 2.0, 4.0),
            (KernelSpec::Triangular, 4.0, 4.0),
            (KernelSpec::Bernstein, 3.0, 7.0),
            (KernelSpec::LogNormal, 0.2, 0.6),
            (KernelSpec::Weibull, 2.0, 1.5),
            (KernelSpec::Gamma, 3.5, 0.4),
            (KernelSpec::InverseGamma, 1.5, 4.0),
            (KernelSpec::Exponential, 2.0, 0.0),
            (KernelSpec::ScaledUniform, 0.7, 0.0),
        ];
        for (k, t, p) in cases {
            let v = integral(&k, t, p);
            assert!((v - 1.0).abs() < 1e-7, "{} ({t},{p}): {v}", k.name());
        }
    }

    #[test]
    fn triangular_edge_kernels_live_near_their_nodes() {
        let n = 4.0;
        assert!(KernelSpec::Triangular.eval(0.9, 4.0, n).unwrap() > 0.0);
        assert_eq!(KernelSpec::Triangular.eval(0.1, 4.0, n).unwrap(), 0.0);
        assert_eq!(KernelSpec::Triangular.eval(1.0, 4.0, n).unwrap(), 2.0 * n);
        assert_eq!(KernelSpec::Triangular.eval(0.0, 0.0, n).unwrap(), 2.0 * n);
        assert_eq!(KernelSpec::Triangular.eval(0.5, 2.0, n).unwrap(), n);
    }

    #[test]
    fn location_scale_views() {
        let w = KernelSpec::Weibull.to_location_scale().unwrap();
        assert!((w.chi(0.0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(w.coordinates, Coordinates::Log);
        for z in [-3.0, -0.5, 0.0, 1.2] {
            assert!((w.score(&[z]).unwrap()[0] - (1.0 - f64::exp(z))).abs() < 1e-15);
        }
        let ln = KernelSpec::LogNormal.to_location_scale().unwrap();
        assert_eq!(ln.base, BaseDensity::Normal { dim: 1 });
        for k in [
            KernelSpec::Gamma,
            KernelSpec::InverseGamma,
            KernelSpec::Exponential,
            KernelSpec::Histogram,
            KernelSpec::Triangular,
            KernelSpec::Bernstein,
            KernelSpec::ScaledUniform,
        ] {
            assert!(matches!(k.to_location_scale(), Err(Error::UnsupportedFamily(_))));
        }
    }

    #[test]
    fn weibull_view_matches_log_transformed_kernel() {
        // e^y K(e^y; θ, φ) = s⁻¹ W((y − loc)/s).
        let w = KernelSpec::Weibull.to_location_scale().unwrap();
        let (theta, phi) = (1.7, 2.3);
        let (loc, s) = w.location_scale(theta, phi);
        for y in [-2.0, -0.3, 0.0, 0.8, 1.9] {
            let direct = y + KernelSpec::Weibull.ln_eval(f64::exp(y), theta, phi).unwrap();
            assert!((w.ln_kernel(y, loc, s) - direct).abs() < 1e-12, "y={y}");
        }
    }

    #[test]
    fn score_examples() {
        let de = KernelSpec::DoubleExponential.to_location_scale().unwrap();
        assert_eq!(de.score(&[2.0]).unwrap()[0], -1.0);
        assert!(matches!(de.score(&[0.0]), Err(Error::NonDifferentiable(_))));
        let t = KernelSpec::student_t(1.0).unwrap().to_location_scale().unwrap();
        assert!((t.score(&[1.0]).unwrap()[0] + 1.0).abs() < 1e-15);
        let lg = KernelSpec::Logistic.to_location_scale().unwrap();
        assert!((lg.score(&[20.0]).unwrap()[0] + 1.0).abs() < 1e-8);
    }

    #[test]
    fn skew_normal_zero_is_normal() {
        let sn = KernelSpec::skew_normal(0.0).unwrap();
        let n = KernelSpec::normal();
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            let a = sn.eval(x, 0.3, 1.3).unwrap();
            let b = n.eval(x, 0.3, 1.3).unwrap();
            assert!((a - b).abs() <= 1e-14 * b.max(1e-300), "x={x}");
        }
    }

    #[test]
    fn mv_normal_vector_evaluation() {
        let k = KernelSpec::mv_normal(2).unwrap();
        let v = k.ln_eval_vec(&[0.0, 0.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((v + (2.0 * PI).ln()).abs() < 1e-15);
        assert!(k.ln_eval(0.0, 0.0, 1.0).is_err());
        assert!(k.ln_eval_vec(&[0.0], &[0.0, 0.0], 1.0).is_err());
    }
}
