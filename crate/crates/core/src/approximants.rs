//! Approximating mixtures `f_m` with `K(f₀; f_m) → 0`, one construction per
//! kernel family. Every mixing distribution is compactly supported.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::density::{DensitySpec, Support, Window};
use crate::error::{domain, Error, Result};
use crate::kernels::{Coordinates, KernelSpec, LocationScaleView};
use crate::mixture::{Atom, MixingDensity, MixingDistribution, MixtureDensity, MixtureKernel};
use crate::quadrature::Quadrature;
use crate::special_fn::{
    inverse_digamma, lemma8_envelope_ln, ln_gamma_pos, std_normal_cdf, EnvelopeParams,
    ExponentVariant,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    LocationScale,
    Histogram,
    Triangular,
    Bernstein,
    GammaEq15,
    InverseGamma,
    ExponentialTruncated,
    ScaledUniform,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::LocationScale,
        Family::Histogram,
        Family::Triangular,
        Family::Bernstein,
        Family::GammaEq15,
        Family::InverseGamma,
        Family::ExponentialTruncated,
        Family::ScaledUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::LocationScale => "location_scale",
            Family::Histogram => "histogram",
            Family::Triangular => "triangular",
            Family::Bernstein => "bernstein",
            Family::GammaEq15 => "gamma_eq15",
            Family::InverseGamma => "inverse_gamma",
            Family::ExponentialTruncated => "exponential_truncated",
            Family::ScaledUniform => "scaled_uniform",
        }
    }

    /// The family whose construction applies to `kernel`.
    pub fn for_kernel(kernel: &KernelSpec) -> Family {
        match kernel {
            KernelSpec::Histogram => Family::Histogram,
            KernelSpec::Triangular => Family::Triangular,
            KernelSpec::Bernstein => Family::Bernstein,
            KernelSpec::Gamma => Family::GammaEq15,
            KernelSpec::InverseGamma => Family::InverseGamma,
            KernelSpec::Exponential => Family::ExponentialTruncated,
            KernelSpec::ScaledUniform => Family::ScaledUniform,
            _ => Family::LocationScale,
        }
    }

    /// Convergence target: 0.01 for location-scale and compact-support
    /// families, 0.05 for the slower half-line constructions.
    pub fn default_target(self) -> f64 {
        match self {
            Family::GammaEq15 | Family::InverseGamma | Family::ScaledUniform => 0.05,
            _ => 0.01,
        }
    }

    pub fn default_ladder() -> Vec<f64> {
        (1..=8).map(|k| f64::from(1u32 << k)).collect()
    }

    fn integer_index(self) -> bool {
        !matches!(self, Family::LocationScale | Family::ExponentialTruncated)
    }

    fn min_index(self) -> f64 {
        match self {
            Family::GammaEq15 | Family::InverseGamma => 2.0,
            _ => 1.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown approximant family `{s}`")))
    }
}

fn check_support(f0: &DensitySpec, want: Support, what: &str) -> Result<()> {
    if f0.support() == want {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "{what} needs f0 on {want:?}, `{}` lives on {:?}",
            f0.name(),
            f0.support()
        )))
    }
}

fn check_index(family: Family, index: f64) -> Result<()> {
    let ok = index.is_finite()
        && index >= family.min_index()
        && (!family.integer_index() || index.fract() == 0.0);
    if family == Family::ExponentialTruncated && !(index > 1.0) {
        return domain(format!("truncation level must exceed 1, got {index}"));
    }
    if ok {
        Ok(())
    } else {
        domain(format!(
            "{family} index must be {} >= {}, got {index}",
            if family.integer_index() { "an integer" } else { "a number" },
            family.min_index()
        ))
    }
}

fn normalize(raw: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if raw.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return domain(format!("{what}: weights must be finite and non-negative"));
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return domain(format!("{what}: all weights vanish (f0 is zero on the grid)"));
    }
    Ok(raw.into_iter().map(|w| w / total).collect())
}

fn mass_or_err(f0: &DensitySpec, lo: f64, hi: f64) -> Result<f64> {
    let mass = f0.mass(lo, hi);
    if mass > 0.0 && mass.is_finite() {
        Ok(mass)
    } else {
        domain(format!(
            "`{}` has no mass on [{lo}, {hi}]; normalizing constant undefined",
            f0.name()
        ))
    }
}

fn breaks_inside(points: impl IntoIterator<Item = f64>, lo: f64, hi: f64) -> Vec<f64> {
    points.into_iter().filter(|p| *p > lo && *p < hi).collect()
}

/// `f_m(x) = t_m ∫_{|θ|<m} h^{-1} χ((x−θ)/h) f₀(θ) dθ` with `h = m^{-η}`.
/// `f0` lives in the view's coordinates.
pub fn location_scale_approximant(
    f0: &DensitySpec,
    view: LocationScaleView,
    m: f64,
    eta: f64,
) -> Result<MixtureDensity> {
    check_support(f0, Support::RealLine, "location-scale approximant")?;
    if view.dimension() != 1 {
        return Err(Error::Precondition(format!(
            "approximants are univariate, view has dimension {}",
            view.dimension()
        )));
    }
    if !(m >= 1.0 && m.is_finite()) {
        return domain(format!("m must be >= 1, got {m}"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return domain(format!("eta must be positive, got {eta}"));
    }
    let h = m.powf(-eta);
    let mass = mass_or_err(f0, -m, m)?;
    let base = f0.clone();
    let md = MixingDensity::new(
        -m,
        m,
        move |t| base.ln_pdf(t),
        1.0 / mass,
        &breaks_inside(f0.breakpoints().iter().copied(), -m, m),
    )?
    .with_splitter(move |x| {
        [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .flat_map(|k| [x - k * h, x + k * h])
            .collect()
    });
    MixtureDensity::new(
        MixtureKernel::LocationScale(view),
        MixingDistribution::density(md).times_point_mass(h),
        None,
    )
}

/// `t_m = (∫_{|x|<m} f₀)^{-1}`.
pub fn location_scale_t(f0: &DensitySpec, m: f64) -> Result<f64> {
    Ok(1.0 / mass_or_err(f0, -m, m)?)
}

/// `w_i ∝ f₀((i−1)/m) + f₀(i/m)`, `i = 1..=m`.
pub fn histogram_weights(f0: &DensitySpec, m: u32) -> Result<Vec<f64>> {
    check_support(f0, Support::UnitInterval, "histogram weights")?;
    if m == 0 {
        return domain("histogram needs m >= 1");
    }
    let mf = f64::from(m);
    let raw = (1..=m)
        .map(|i| f0.pdf(f64::from(i - 1) / mf) + f0.pdf(f64::from(i) / mf))
        .collect();
    normalize(raw, "histogram")
}

pub fn histogram_approximant(f0: &DensitySpec, m: u32) -> Result<MixtureDensity> {
    let w = histogram_weights(f0, m)?;
    let mf = f64::from(m);
    let atoms = w
        .into_iter()
        .enumerate()
        .map(|(i, w)| Atom::new((i as f64 + 0.5) / mf, w))
        .collect();
    MixtureDensity::native(KernelSpec::Histogram, MixingDistribution::discrete(atoms)?, Some(mf))
}

/// `w_i = f₀(i/n) / Σ_j f₀(j/n)`, `i = 0..=n`.
pub fn triangular_weights(f0: &DensitySpec, n: u32) -> Result<Vec<f64>> {
    check_support(f0, Support::UnitInterval, "triangular weights")?;
    if n == 0 {
        return domain("triangular kernels need n >= 1");
    }
    let nf = f64::from(n);
    normalize((0..=n).map(|i| f0.pdf(f64::from(i) / nf)).collect(), "triangular")
}

pub fn triangular_approximant(f0: &DensitySpec, n: u32) -> Result<MixtureDensity> {
    let w = triangular_weights(f0, n)?;
    let atoms = w
        .into_iter()
        .enumerate()
        .map(|(i, w)| Atom::new(i as f64, w))
        .collect();
    MixtureDensity::native(
        KernelSpec::Triangular,
        MixingDistribution::discrete(atoms)?,
        Some(f64::from(n)),
    )
}

/// CDF increments `w_j = F₀((j+1)/(k+1)) − F₀(j/(k+1))`, `j = 0..=k`.
pub fn bernstein_weights(f0: &DensitySpec, k: u32) -> Result<Vec<f64>> {
    check_support(f0, Support::UnitInterval, "Bernstein weights")?;
    let kf = f64::from(k) + 1.0;
    let raw = (0..=k)
        .map(|j| f0.mass(f64::from(j) / kf, f64::from(j + 1) / kf).max(0.0))
        .collect();
    normalize(raw, "bernstein")
}

/// `Σ_j w_j (k+1) C(k,j) x^j (1−x)^{k−j}`.
pub fn bernstein_approximant(f0: &DensitySpec, k: u32) -> Result<MixtureDensity> {
    if k == 0 {
        return domain("Bernstein order must be >= 1");
    }
    let w = bernstein_weights(f0, k)?;
    let atoms = w
        .into_iter()
        .enumerate()
        .map(|(j, w)| Atom::new(j as f64, w))
        .collect();
    MixtureDensity::native(
        KernelSpec::Bernstein,
        MixingDistribution::discrete(atoms)?,
        Some(f64::from(k)),
    )
}

/// Gamma kernels with scale `1/m` mixed over shape `α ∈ [2, 1+m²]` with
/// density `t_m m^{-1} f₀((α−1)/m)`.
pub fn gamma_eq15_approximant(f0: &DensitySpec, m: f64) -> Result<MixtureDensity> {
    check_support(f0, Support::PositiveHalfLine, "gamma approximant")?;
    if !(m >= 2.0 && m.is_finite()) {
        return domain(format!("m must be >= 2, got {m}"));
    }
    let mass = mass_or_err(f0, 1.0 / m, m)?;
    let (lo, hi) = (2.0, 1.0 + m * m);
    let ln_m = m.ln();
    let base = f0.clone();
    let breaks = breaks_inside(f0.breakpoints().iter().map(|b| m * b + 1.0), lo, hi);
    let md = MixingDensity::new(
        lo,
        hi,
        move |a| base.ln_pdf((a - 1.0) / m) - ln_m,
        1.0 / mass,
        &breaks,
    )?
    .with_splitter(move |x| {
        if !(x > 0.0) {
            return Vec::new();
        }
        // The kernel's α-mode solves ψ(α) = ln(mx).
        let mode = inverse_digamma((m * x).ln());
        let sd = mode.sqrt().max(1.0);
        [-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|k| mode + k * sd)
            .collect()
    });
    MixtureDensity::native(
        KernelSpec::Gamma,
        MixingDistribution::density(md).times_point_mass(1.0 / m),
        None,
    )
}

/// `t_m = (∫_{1/m}^m f₀)^{-1}`, shared by the gamma and inverse-gamma constructions.
pub fn half_line_t(f0: &DensitySpec, m: f64) -> Result<f64> {
    Ok(1.0 / mass_or_err(f0, 1.0 / m, m)?)
}

/// `t_m ∫_{1/m}^m K(x; k = m, z) f₀(z) dz` with the inverse-gamma kernel.
pub fn inverse_gamma_approximant(f0: &DensitySpec, m: f64) -> Result<MixtureDensity> {
    check_support(f0, Support::PositiveHalfLine, "inverse-gamma approximant")?;
    if !(m >= 2.0 && m.is_finite()) {
        return domain(format!("m must be >= 2, got {m}"));
    }
    let (lo, hi) = (1.0 / m, m);
    let mass = mass_or_err(f0, lo, hi)?;
    let base = f0.clone();
    let root_m = m.sqrt();
    let md = MixingDensity::new(
        lo,
        hi,
        move |z| base.ln_pdf(z),
        1.0 / mass,
        &breaks_inside(f0.breakpoints().iter().copied(), lo, hi),
    )?
    .with_splitter(move |x| {
        // In z the kernel is a gamma density with mode x and sd about x/√m.
        let s = x / root_m;
        [-16.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|k| x + k * s)
            .collect()
    });
    MixtureDensity::native(
        KernelSpec::InverseGamma,
        MixingDistribution::density(md).times_point_mass(m),
        None,
    )
}

/// A law for the exponential rate `θ` on `(0, ∞)`.
#[derive(Debug, Clone)]
pub enum RateLaw {
    Atoms(Vec<Atom>),
    Density(DensitySpec),
}

impl RateLaw {
    /// `∫ e^{−θx} dP(θ)`, the survival function of the induced mixture.
    pub fn laplace(&self, x: f64) -> Result<f64> {
        match self {
            RateLaw::Atoms(atoms) => Ok(atoms.iter().map(|a| a.weight * (-a.theta * x).exp()).sum()),
            RateLaw::Density(d) => {
                let q = Quadrature::with_tolerances(1e-13, 1e-11);
                let (a, b) = d.support().bounds();
                Ok(q
                    .integrate_with_breaks(|t| (d.ln_pdf(t) - t * x).exp(), a, b, d.breakpoints())?
                    .value)
            }
        }
    }
}

/// `P_a = P₀(· ∩ [1/a, a]) / P₀([1/a, a])` mixed with `K(x; θ) = θe^{−θx}`.
pub fn exponential_truncation(p0: &RateLaw, a: f64) -> Result<MixtureDensity> {
    if !(a > 1.0 && a.is_finite()) {
        return domain(format!("truncation level must exceed 1, got {a}"));
    }
    let (lo, hi) = (1.0 / a, a);
    let mixing = match p0 {
        RateLaw::Atoms(atoms) => {
            if atoms.iter().any(|t| !(t.theta > 0.0)) {
                return domain("exponential rates must be positive");
            }
            let kept: Vec<Atom> = atoms
                .iter()
                .filter(|t| t.theta >= lo && t.theta <= hi)
                .copied()
                .collect();
            let total: f64 = kept.iter().map(|t| t.weight).sum();
            if !(total > 0.0) {
                return domain(format!("P0 has no mass on [{lo}, {hi}]"));
            }
            MixingDistribution::discrete(
                kept.into_iter()
                    .map(|t| Atom {
                        weight: t.weight / total,
                        ..t
                    })
                    .collect(),
            )?
        }
        RateLaw::Density(d) => {
            check_support(d, Support::PositiveHalfLine, "exponential truncation")?;
            let mass = mass_or_err(d, lo, hi)?;
            let base = d.clone();
            MixingDistribution::density(MixingDensity::new(
                lo,
                hi,
                move |t| base.ln_pdf(t),
                1.0 / mass,
                &breaks_inside(d.breakpoints().iter().copied(), lo, hi),
            )?)
        }
    };
    MixtureDensity::native(KernelSpec::Exponential, mixing, None)
}

/// Positions `x1 < x2` with `f₀(x1) = a`, `f₀(x2) = b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub x1: f64,
    pub x2: f64,
}

const ZERO_PROXY: f64 = 1e-6;

impl Bracket {
    /// `a = 0.9 f₀(1e-6)` and `b = 0.01`.
    pub fn default_for(f0: &DensitySpec) -> Result<Bracket> {
        check_support(f0, Support::PositiveHalfLine, "scaled-uniform bracket")?;
        let a = 0.9 * f0.pdf(ZERO_PROXY);
        let b = 0.01;
        if !(a > b) {
            return domain(format!(
                "bracket needs f0(0+) > {}, `{}` has {}",
                b / 0.9,
                f0.name(),
                f0.pdf(ZERO_PROXY)
            ));
        }
        Ok(Bracket {
            x1: level_crossing(f0, a)?,
            x2: level_crossing(f0, b)?,
        })
    }
}

/// Smallest `x` with `f₀(x) = level` for decreasing `f₀`.
fn level_crossing(f0: &DensitySpec, level: f64) -> Result<f64> {
    let mut lo = ZERO_PROXY;
    let mut hi = 1.0;
    let mut guard = 0;
    while f0.pdf(hi) > level {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return domain(format!("`{}` never drops below {level}", f0.name()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f0.pdf(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

const TAIL_RESIDUAL: f64 = 1e-12;
const MAX_ATOMS: usize = 5_000_000;

/// Atoms `θ_i = i/m` and weights of the scaled-uniform construction for a
/// decreasing `f₀`; the infinite ladder is cut once the residual weight
/// drops below `1e-12`.
pub fn scaled_uniform_weights(f0: &DensitySpec, m: u32, bracket: Bracket) -> Result<Vec<Atom>> {
    check_support(f0, Support::PositiveHalfLine, "scaled-uniform weights")?;
    if m == 0 {
        return domain("scaled-uniform construction needs m >= 1");
    }
    let Bracket { x1, x2 } = bracket;
    if !(x1 > 0.0 && x2 > x1) {
        return domain(format!("bracket needs 0 < x1 < x2, got {x1}, {x2}"));
    }
    let mf = f64::from(m);
    let a = f0.pdf(x1);
    let f = |i: usize| f0.pdf(i as f64 / mf);
    let m1 = (mf * x1).floor() as usize;
    let m2 = ((mf * x2).floor() as usize).max(m1 + 1);

    let mut w: Vec<f64> = vec![0.0; m2 + 1];
    for (i, wi) in w.iter_mut().enumerate().skip(1) {
        let t = i as f64 / mf;
        *wi = if i < m1 {
            t * (f(i) - f(i + 1))
        } else if i == m1 {
            t * (f(i) - a)
        } else if i == m1 + 1 {
            t * (a - f(i))
        } else {
            t * (f(i - 1) - f(i))
        };
    }
    let mut i = m2 + 1;
    loop {
        let t = i as f64 / mf;
        w.push(t * (f(i - 1) - f(i)));
        if t * f(i) + f0.survival(t) < TAIL_RESIDUAL {
            break;
        }
        i += 1;
        if i > MAX_ATOMS {
            return domain(format!("scaled-uniform ladder exceeds {MAX_ATOMS} atoms"));
        }
    }
    if let Some(k) = w.iter().position(|v| *v < -1e-15 || v.is_nan()) {
        return Err(Error::Precondition(format!(
            "`{}` is not decreasing near x = {}",
            f0.name(),
            k as f64 / mf
        )));
    }
    for v in w.iter_mut() {
        *v = v.max(0.0);
    }
    let middle: f64 = w[m1..=m2].iter().sum();
    let outside: f64 = w.iter().sum::<f64>() - middle;
    if !(middle > 0.0) || outside >= 1.0 {
        return domain("scaled-uniform weights cannot be renormalized on the bracket");
    }
    let factor = (1.0 - outside) / middle;
    for v in &mut w[m1..=m2] {
        *v *= factor;
    }
    let total: f64 = w.iter().sum();
    Ok(w
        .into_iter()
        .enumerate()
        .filter(|(_, v)| *v > 0.0)
        .map(|(i, v)| Atom::new(i as f64 / mf, v / total))
        .collect())
}

pub fn scaled_uniform_approximant(
    f0: &DensitySpec,
    m: u32,
    bracket: Bracket,
) -> Result<MixtureDensity> {
    let atoms = scaled_uniform_weights(f0, m, bracket)?;
    MixtureDensity::native(KernelSpec::ScaledUniform, MixingDistribution::discrete(atoms)?, None)
}

/// A family of approximants `f_index` for a fixed `f₀` and kernel.
#[derive(Debug, Clone)]
pub struct ApproximantSequence {
    pub family: Family,
    pub f0: DensitySpec,
    pub kernel: KernelSpec,
    /// Bandwidth exponent, location-scale only.
    pub eta: f64,
    rate_law: Option<RateLaw>,
    bracket: Option<Bracket>,
    reference: DensitySpec,
}

impl ApproximantSequence {
    /// Sequence for the family implied by `kernel`. Log-coordinate kernels
    /// (lognormal, Weibull) work on `ln x`, so `reference()` is then the
    /// log-transformed `f₀`.
    pub fn new(f0: DensitySpec, kernel: KernelSpec) -> Result<Self> {
        let family = Family::for_kernel(&kernel);
        let mut reference = f0.clone();
        match family {
            Family::LocationScale => {
                let view = kernel.to_location_scale()?;
                if view.dimension() != 1 {
                    return Err(Error::Precondition(
                        "approximants are univariate; use a 1-dimensional kernel".into(),
                    ));
                }
                if view.coordinates == Coordinates::Log {
                    reference = f0.log_transform()?;
                } else {
                    check_support(&f0, Support::RealLine, "location-scale approximant")?;
                }
            }
            Family::Histogram | Family::Triangular | Family::Bernstein => {
                check_support(&f0, Support::UnitInterval, family.name())?;
            }
            Family::ExponentialTruncated => {
                return Err(Error::Precondition(
                    "exponential truncation needs a rate law; use ApproximantSequence::exponential".into(),
                ));
            }
            _ => check_support(&f0, Support::PositiveHalfLine, family.name())?,
        }
        let bracket = if family == Family::ScaledUniform {
            Some(Bracket::default_for(&f0)?)
        } else {
            None
        };
        Ok(ApproximantSequence {
            family,
            f0,
            kernel,
            eta: 0.5,
            rate_law: None,
            bracket,
            reference,
        })
    }

    /// Exponential-kernel sequence truncating `p0`, whose Laplace transform
    /// must be the survival function of `f0`.
    pub fn exponential(f0: DensitySpec, p0: RateLaw) -> Result<Self> {
        check_support(&f0, Support::PositiveHalfLine, "exponential truncation")?;
        for x in [0.5, 1.0, 2.0] {
            let (lt, sf) = (p0.laplace(x)?, f0.survival(x));
            if (lt - sf).abs() > 1e-6 * sf.max(1e-300) {
                return Err(Error::Precondition(format!(
                    "survival of `{}` at {x} is {sf}, but the rate law's Laplace transform is {lt}",
                    f0.name()
                )));
            }
        }
        Ok(ApproximantSequence {
            family: Family::ExponentialTruncated,
            reference: f0.clone(),
            f0,
            kernel: KernelSpec::Exponential,
            eta: 0.5,
            rate_law: Some(p0),
            bracket: None,
        })
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return domain(format!("eta must be positive, got {eta}"));
        }
        self.eta = eta;
        Ok(self)
    }

    pub fn with_bracket(mut self, bracket: Bracket) -> Self {
        self.bracket = Some(bracket);
        self
    }

    /// The density the approximants converge to, in their own coordinates.
    pub fn reference(&self) -> &DensitySpec {
        &self.reference
    }

    pub fn at(&self, index: f64) -> Result<MixtureDensity> {
        check_index(self.family, index)?;
        let f0 = &self.reference;
        match self.family {
            Family::LocationScale => {
                location_scale_approximant(f0, self.kernel.to_location_scale()?, index, self.eta)
            }
            Family::Histogram => histogram_approximant(f0, index as u32),
            Family::Triangular => triangular_approximant(f0, index as u32),
            Family::Bernstein => bernstein_approximant(f0, index as u32),
            Family::GammaEq15 => gamma_eq15_approximant(f0, index),
            Family::InverseGamma => inverse_gamma_approximant(f0, index),
            Family::ExponentialTruncated => {
                exponential_truncation(self.rate_law.as_ref().expect("set by constructor"), index)
            }
            Family::ScaledUniform => scaled_uniform_approximant(
                f0,
                index as u32,
                self.bracket.expect("set by constructor"),
            ),
        }
    }
}

/// Named lower bounds on `f_m` for the half-line constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBound {
    /// `K_m(x; 1+m²)` for `x < 1/m`.
    GammaSmallX,
    /// `1/(e x Γ(x⁻²+1))` for `x < 1/m`.
    GammaSmallXUniform,
    /// `x e^{−xm} m²` for `x > m + 1/m`.
    GammaLargeX,
    /// `e^{−x²} x³` for `x > m + 1/m`.
    GammaLargeXUniform,
    /// `C(x) φ_δ(x)` with the envelope `C` for `1/m ≤ x ≤ m + 1/m`.
    GammaMiddle,
    /// `x^{−x−1} e^{−1/x} / Γ(x)` for `x > m`.
    InverseGammaLargeX,
    /// `x^{−2/x} x^{−1/x−1} e^{−x⁻³} / Γ(1/x)` for `x < 1/m`.
    InverseGammaSmallX,
    /// `C(x) φ_δ(x)` with the normal-approximation `C` for `1/m ≤ x ≤ m`.
    InverseGammaMiddle,
}

impl LowerBound {
    pub fn name(self) -> &'static str {
        match self {
            LowerBound::GammaSmallX => "gamma_small_x",
            LowerBound::GammaSmallXUniform => "gamma_small_x_uniform",
            LowerBound::GammaLargeX => "gamma_large_x",
            LowerBound::GammaLargeXUniform => "gamma_large_x_uniform",
            LowerBound::GammaMiddle => "gamma_middle",
            LowerBound::InverseGammaLargeX => "inverse_gamma_large_x",
            LowerBound::InverseGammaSmallX => "inverse_gamma_small_x",
            LowerBound::InverseGammaMiddle => "inverse_gamma_middle",
        }
    }

    pub fn for_family(family: Family) -> &'static [LowerBound] {
        match family {
            Family::GammaEq15 => &[
                LowerBound::GammaSmallX,
                LowerBound::GammaSmallXUniform,
                LowerBound::GammaLargeX,
                LowerBound::GammaLargeXUniform,
                LowerBound::GammaMiddle,
            ],
            Family::InverseGamma => &[
                LowerBound::InverseGammaSmallX,
                LowerBound::InverseGammaLargeX,
                LowerBound::InverseGammaMiddle,
            ],
            _ => &[],
        }
    }

    /// Why `x` is outside the bound's range at `m`, if it is.
    fn out_of_range(self, x: f64, m: f64, delta: f64) -> Option<String> {
        let inside = match self {
            LowerBound::GammaSmallX | LowerBound::GammaSmallXUniform => x > 0.0 && x < 1.0 / m,
            LowerBound::GammaLargeX | LowerBound::GammaLargeXUniform => x > m + 1.0 / m,
            LowerBound::InverseGammaSmallX => x > 0.0 && x < 1.0 / m,
            LowerBound::InverseGammaLargeX => x > m,
            LowerBound::InverseGammaMiddle => x >= 1.0 / m && x <= m,
            LowerBound::GammaMiddle => {
                if !(delta > m.powf(-0.5) && m * delta > 1.0) {
                    return Some(format!("needs delta > m^(-1/2) and m > 1/delta (m = {m}, delta = {delta})"));
                }
                x >= 1.0 / m && x <= m + 1.0 / m
            }
        };
        (!inside).then(|| format!("x = {x} outside the range of {} at m = {m}", self.name()))
    }

    /// `ln` of the bound; `f0` supplies `φ_δ` for the middle bounds.
    fn ln_value(self, x: f64, m: f64, f0: &DensitySpec, delta: f64) -> Result<f64> {
        Ok(match self {
            LowerBound::GammaSmallX => {
                let a = 1.0 + m * m;
                (a - 1.0) * x.ln() - m * x + a * m.ln() - ln_gamma_pos(a)
            }
            LowerBound::GammaSmallXUniform => -1.0 - x.ln() - ln_gamma_pos(x.powi(-2) + 1.0),
            LowerBound::GammaLargeX => x.ln() - x * m + 2.0 * m.ln(),
            LowerBound::GammaLargeXUniform => -x * x + 3.0 * x.ln(),
            LowerBound::GammaMiddle => {
                let p = EnvelopeParams::new(delta, ExponentVariant::default())?;
                lemma8_envelope_ln(x, &p)? + f0.ln_phi_delta(x, delta, Window::OneSided)?
            }
            LowerBound::InverseGammaLargeX => (-x - 1.0) * x.ln() - 1.0 / x - ln_gamma_pos(x),
            LowerBound::InverseGammaSmallX => {
                let r = 1.0 / x;
                -2.0 * r * x.ln() - ln_gamma_pos(r) - (r + 1.0) * x.ln() - r * r * r
            }
            LowerBound::InverseGammaMiddle => {
                let c = if x < 1.0 {
                    std_normal_cdf(1.0 + delta / x) - std_normal_cdf(1.0)
                } else {
                    std_normal_cdf(1.0) - std_normal_cdf(1.0 - delta / x)
                };
                (0.5 * c).ln() + f0.ln_phi_delta(x, delta, Window::OneSided)?
            }
        })
    }

    fn default_grid(self, m: f64) -> Vec<f64> {
        match self {
            LowerBound::GammaSmallX
            | LowerBound::GammaSmallXUniform
            | LowerBound::InverseGammaSmallX => (1..10).map(|k| f64::from(k) / (10.0 * m)).collect(),
            LowerBound::GammaLargeX | LowerBound::GammaLargeXUniform => {
                let s = m + 1.0 / m;
                (1..=16).map(|k| s * (1.0 + f64::from(k) / 8.0)).collect()
            }
            LowerBound::InverseGammaLargeX => (1..=16).map(|k| m * (1.0 + f64::from(k) / 8.0)).collect(),
            LowerBound::GammaMiddle | LowerBound::InverseGammaMiddle => {
                let (lo, hi) = (1.0 / m, m);
                (0..=12).map(|k| lo * (hi / lo).powf(f64::from(k) / 12.0)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub bound: LowerBound,
    pub x: f64,
    pub ln_fm: f64,
    pub ln_bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub family: Family,
    pub m: f64,
    pub delta: f64,
    pub points: Vec<BoundPoint>,
    /// Grid points outside every bound's range, with the reason.
    pub skipped: Vec<(f64, String)>,
}

impl BoundReport {
    pub fn violations(&self) -> usize {
        self.points.iter().filter(|p| !p.holds).count()
    }
}

/// Relative slack allowed when comparing `f_m` with a bound.
const BOUND_RTOL: f64 = 1e-9;

/// Compares `f_m` against each lower bound of the family, on `grid` or on
/// per-bound default grids spanning each range.
pub fn verify_lower_bounds(
    seq: &ApproximantSequence,
    m: f64,
    grid: Option<&[f64]>,
    delta: f64,
) -> Result<BoundReport> {
    let bounds = LowerBound::for_family(seq.family);
    if bounds.is_empty() {
        return Err(Error::Precondition(format!(
            "no lower bounds are known for the {} family",
            seq.family
        )));
    }
    let fm = seq.at(m)?;
    let f0 = seq.reference();
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    let mut check = |b: LowerBound, x: f64| -> Result<()> {
        let ln_bound = b.ln_value(x, m, f0, delta)?;
        let ln_fm = fm.ln_eval(x)?;
        points.push(BoundPoint {
            bound: b,
            x,
            ln_fm,
            ln_bound,
            holds: ln_fm >= ln_bound + (-BOUND_RTOL).ln_1p(),
        });
        Ok(())
    };
    match grid {
        Some(xs) => {
            for &x in xs {
                let mut reasons = Vec::new();
                for &b in bounds {
                    match b.out_of_range(x, m, delta) {
                        None => check(b, x)?,
                        Some(r) => reasons.push(r),
                    }
                }
                if reasons.len() == bounds.len() {
                    skipped.push((x, reasons.join("; ")));
                }
            }
        }
        None => {
            for &b in bounds {
                for x in b.default_grid(m) {
                    match b.out_of_range(x, m, delta) {
                        None => check(b, x)?,
                        Some(r) => skipped.push((x, r)),
                    }
                }
            }
        }
    }
    Ok(BoundReport {
        family: seq.family,
        m,
        delta,
        points,
        skipped,
    })
}

/// `ln K_m(x; mv+1)`: gamma density with shape `mv+1` and scale `1/m`.
fn ln_gamma_kernel_v(x: f64, v: f64, m: f64) -> f64 {
    let a = m * v + 1.0;
    (a - 1.0) * x.ln() - m * x + a * m.ln() - ln_gamma_pos(a)
}

fn integrate_kernel_v(x: f64, m: f64, lo: f64, hi: f64) -> Result<f64> {
    if hi <= lo {
        return Ok(0.0);
    }
    let q = Quadrature::with_tolerances(1e-15, 1e-11);
    let sd = (x / m).sqrt();
    let breaks: Vec<f64> = [-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0]
        .iter()
        .map(|k| x + k * sd)
        .filter(|b| *b > lo && *b < hi)
        .collect();
    Ok(q
        .integrate_with_breaks(|v| ln_gamma_kernel_v(x, v, m).exp(), lo, hi, &breaks)?
        .value)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopePoint {
    pub m: f64,
    pub x: f64,
    pub delta: f64,
    pub envelope: f64,
    /// `∫ K_m(x; mv+1) dv` over the one-sided window.
    pub integral: f64,
    pub holds: bool,
}

/// Compares the envelope `C(x)` with the one-sided kernel integral:
/// `v ∈ [max(1/m, x), x+δ]` for `x < 1`, `v ∈ [x−δ, min(m, x)]` otherwise.
pub fn envelope_check(m: f64, x: f64, params: &EnvelopeParams) -> Result<EnvelopePoint> {
    if !(m > 0.0) || !(x > 1.0 / m && x <= m + 1.0 / m) {
        return domain(format!("envelope check needs 1/m < x <= m + 1/m, got x = {x}, m = {m}"));
    }
    let delta = params.delta();
    let (lo, hi) = if x < 1.0 {
        ((1.0 / m).max(x), x + delta)
    } else {
        (x - delta, m.min(x))
    };
    let integral = integrate_kernel_v(x, m, lo, hi)?;
    let envelope = lemma8_envelope_ln(x, params)?.exp();
    Ok(EnvelopePoint {
        m,
        x,
        delta,
        envelope,
        integral,
        holds: envelope <= integral * (1.0 + BOUND_RTOL),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Concentration {
    /// `∫_{1/m}^m K_m(x; mv+1) dv`, tends to 1.
    pub total: f64,
    /// Part of the above with `|x − v| ≥ δ`, tends to 0.
    pub tail: f64,
}

/// Mass and `δ`-tail mass of the gamma kernel viewed as a function of `v`.
pub fn gamma_kernel_concentration(m: f64, x: f64, delta: f64) -> Result<Concentration> {
    if !(m > 1.0 && x > 0.0 && delta > 0.0) {
        return domain(format!("needs m > 1, x > 0, delta > 0; got {m}, {x}, {delta}"));
    }
    let (lo, hi) = (1.0 / m, m);
    let total = integrate_kernel_v(x, m, lo, hi)?;
    let left = integrate_kernel_v(x, m, lo, (x - delta).min(hi))?;
    let right = integrate_kernel_v(x, m, (x + delta).max(lo), hi)?;
    Ok(Concentration {
        total,
        tail: left + right,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!("nope".parse::<Family>().is_err());
        assert_eq!(Family::for_kernel(&KernelSpec::normal()), Family::LocationScale);
    }

    #[test]
    fn location_scale_t_values() {
        let n = DensitySpec::std_normal();
        let t1 = location_scale_t(&n, 1.0).unwrap();
        assert!(close(t1, 1.0 / (std_normal_cdf(1.0) - std_normal_cdf(-1.0)), 1e-12));
        assert!(close(t1, 1.4659, 2e-3));
    }

    #[test]
    fn location_scale_normalized_and_bounded() {
        let n = DensitySpec::std_normal();
        let view = KernelSpec::normal().to_location_scale().unwrap();
        let fm = location_scale_approximant(&n, view, 4.0, 0.5).unwrap();
        assert!(close(fm.total_mass().unwrap(), 1.0, 1e-8));
        let t1 = location_scale_t(&n, 1.0).unwrap();
        let sup_chi = view.chi(0.0);
        for x in [-3.0, -1.0, 0.0, 0.7, 2.0] {
            assert!(fm.eval(x).unwrap() <= sup_chi * t1 / 0.5);
        }
        assert!(location_scale_approximant(&n, view, 0.5, 0.5).is_err());
    }

    #[test]
    fn location_scale_pointwise_limit() {
        let n = DensitySpec::std_normal();
        let seq = ApproximantSequence::new(n.clone(), KernelSpec::normal()).unwrap();
        let errs: Vec<f64> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&m| (seq.at(m).unwrap().eval(0.0).unwrap() - n.pdf(0.0)).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        // Normal kernels keep normality: f_m(0) = t_m-scaled N(0, 1 + h²) near 0.
        assert!(errs[3] < 0.02);
    }

    #[test]
    fn histogram_examples() {
        let w = histogram_weights(&DensitySpec::uniform(), 4).unwrap();
        assert!(w.iter().all(|v| close(*v, 0.25, 1e-15)));
        let lin = DensitySpec::polynomial("2x", Support::UnitInterval, vec![0.0, 1.0], vec![vec![0.0, 2.0]])
            .unwrap();
        let w = histogram_weights(&lin, 2).unwrap();
        assert!(close(w[0], 0.25, 1e-14) && close(w[1], 0.75, 1e-14));
    }

    #[test]
    fn histogram_sup_error_shrinks() {
        let f0 = DensitySpec::parabolic();
        let sup: Vec<f64> = [8, 32, 128]
            .iter()
            .map(|&m| {
                let g = histogram_approximant(&f0, m).unwrap();
                (0..=1000)
                    .map(|i| {
                        let x = f64::from(i) / 1000.0;
                        (g.eval(x).unwrap() - f0.pdf(x)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(sup.windows(2).all(|w| w[1] < w[0]), "{sup:?}");
        assert!(sup[2] < 0.05);
    }

    #[test]
    fn triangular_examples() {
        let w = triangular_weights(&DensitySpec::uniform(), 3).unwrap();
        assert!(w.iter().all(|v| close(*v, 0.25, 1e-15)));
        let w = triangular_weights(&DensitySpec::parabolic(), 10).unwrap();
        assert_eq!(w.len(), 11);
        assert!(w.iter().all(|v| *v >= 0.0));
        assert!(close(w.iter().sum::<f64>(), 1.0, 1e-14));
        let f0 = DensitySpec::parabolic();
        let errs: Vec<f64> = [8, 32, 128]
            .iter()
            .map(|&n| (triangular_approximant(&f0, n).unwrap().eval(0.5).unwrap() - 1.5).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn bernstein_examples() {
        let u = DensitySpec::uniform();
        let g = bernstein_approximant(&u, 7).unwrap();
        for x in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert!(close(g.eval(x).unwrap(), 1.0, 1e-12));
        }
        let f0 = DensitySpec::parabolic();
        let g = bernstein_approximant(&f0, 10).unwrap();
        assert!(close(g.total_mass().unwrap(), 1.0, 1e-9));
        let sup: Vec<f64> = [5, 20, 80]
            .iter()
            .map(|&k| {
                let g = bernstein_approximant(&f0, k).unwrap();
                (0..=500)
                    .map(|i| {
                        let x = f64::from(i) / 500.0;
                        (g.eval(x).unwrap() - f0.pdf(x)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        assert!(sup.windows(2).all(|w| w[1] < w[0]), "{sup:?}");
    }

    #[test]
    fn gamma_construction() {
        let e = DensitySpec::exponential(1.0).unwrap();
        let t2 = half_line_t(&e, 2.0).unwrap();
        assert!(close(t2, 1.0 / ((-0.5f64).exp() - (-2f64).exp()), 1e-12));
        assert!(close(t2, 2.1221, 2e-3));
        let g = DensitySpec::gamma(2.0, 1.0).unwrap();
        let fm = gamma_eq15_approximant(&g, 10.0).unwrap();
        assert!(close(fm.total_mass().unwrap(), 1.0, 1e-6));
        assert_eq!(fm.mixing().theta_range(), (2.0, 101.0));
        assert!(gamma_eq15_approximant(&DensitySpec::std_normal(), 4.0).is_err());
    }

    #[test]
    fn inverse_gamma_construction() {
        let g = DensitySpec::gamma(2.0, 1.0).unwrap();
        let fm = inverse_gamma_approximant(&g, 10.0).unwrap();
        assert!(close(fm.total_mass().unwrap(), 1.0, 1e-6));
        let errs: Vec<f64> = [10.0, 40.0, 160.0]
            .iter()
            .map(|&m| (inverse_gamma_approximant(&g, m).unwrap().eval(1.0).unwrap() - g.pdf(1.0)).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    }

    #[test]
    fn exponential_truncation_examples() {
        let point = RateLaw::Atoms(vec![Atom::new(1.0, 1.0)]);
        let fa = exponential_truncation(&point, 3.0).unwrap();
        for x in [0.0, 0.5, 2.0] {
            assert!(close(fa.eval(x).unwrap(), (-x).exp(), 1e-15));
        }
        let p0 = RateLaw::Density(DensitySpec::gamma(2.0, 1.0).unwrap());
        for x in [0.5, 1.0, 3.0] {
            assert!(close(p0.laplace(x).unwrap(), (1.0 + x).powi(-2), 1e-10));
        }
        let errs: Vec<f64> = [2.0, 4.0, 16.0]
            .iter()
            .map(|&a| (exponential_truncation(&p0, a).unwrap().eval(1.0).unwrap() - 0.25).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        assert!(exponential_truncation(&point, 1.0).is_err());
        let far = RateLaw::Atoms(vec![Atom::new(100.0, 1.0)]);
        assert!(exponential_truncation(&far, 2.0).is_err());
        let lomax = DensitySpec::lomax(2.0).unwrap();
        assert!(ApproximantSequence::exponential(lomax.clone(), p0).is_ok());
        assert!(ApproximantSequence::exponential(lomax, point).is_err());
    }

    #[test]
    fn scaled_uniform_examples() {
        let e = DensitySpec::exponential(1.0).unwrap();
        let br = Bracket::default_for(&e).unwrap();
        assert!(close(br.x2, 100f64.ln(), 1e-9));
        let atoms = scaled_uniform_weights(&e, 20, br).unwrap();
        assert!(atoms.iter().all(|a| a.weight > 0.0));
        assert!(close(atoms.iter().map(|a| a.weight).sum::<f64>(), 1.0, 1e-13));
        let errs: Vec<f64> = [20, 80, 320]
            .iter()
            .map(|&m| {
                let f = scaled_uniform_approximant(&e, m, br).unwrap();
                (f.eval(1.0).unwrap() - (-1f64).exp()).abs()
            })
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
        let g = DensitySpec::gamma(2.0, 1.0).unwrap();
        let br = Bracket { x1: 0.5, x2: 4.0 };
        assert!(matches!(scaled_uniform_weights(&g, 10, br), Err(Error::Precondition(_))));
    }

    #[test]
    fn sequence_validation() {
        assert!(ApproximantSequence::new(DensitySpec::std_normal(), KernelSpec::Gamma).is_err());
        assert!(ApproximantSequence::new(DensitySpec::uniform(), KernelSpec::normal()).is_err());
        let ln = ApproximantSequence::new(DensitySpec::gamma(2.0, 1.0).unwrap(), KernelSpec::LogNormal)
            .unwrap();
        assert_eq!(ln.reference().support(), Support::RealLine);
        let h = ApproximantSequence::new(DensitySpec::uniform(), KernelSpec::Histogram).unwrap();
        assert!(h.at(2.5).is_err());
        assert!(h.at(0.0).is_err());
        assert!(h.at(3.0).is_ok());
    }

    #[test]
    fn gamma_bounds_hold() {
        let e = DensitySpec::exponential(1.0).unwrap();
        let seq = ApproximantSequence::new(e, KernelSpec::Gamma).unwrap();
        let r = verify_lower_bounds(&seq, 10.0, Some(&[0.05, 12.0, -1.0]), 0.25).unwrap();
        assert_eq!(r.violations(), 0, "{r:?}");
        assert_eq!(r.skipped.len(), 1);
        assert!(r.points.iter().any(|p| p.bound == LowerBound::GammaSmallXUniform));
        assert!(r.points.iter().any(|p| p.bound == LowerBound::GammaLargeXUniform));
    }

    #[test]
    fn envelope_at_reference_point() {
        let p = EnvelopeParams::new(0.25, ExponentVariant::default()).unwrap();
        let r = envelope_check(100.0, 0.5, &p).unwrap();
        assert!(r.holds, "{r:?}");
        assert!(r.integral < 1.0);
        assert!(envelope_check(100.0, 0.001, &p).is_err());
    }

    #[test]
    fn gamma_kernel_concentrates() {
        let c = gamma_kernel_concentration(100.0, 1.0, 0.5).unwrap();
        assert!((c.total - 1.0).abs() < 0.02, "{c:?}");
        assert!(c.tail < 1e-3, "{c:?}");
    }
}
