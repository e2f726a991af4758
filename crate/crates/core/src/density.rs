//! Target densities `f₀`, the local infimum `φ_δ`, and the `x = e^y` change of
//! variables.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quadrature::{scan_points, Quadrature};
use crate::special_fn::{gamma_cdf, gamma_sf, ln_gamma_pos, std_normal_cdf, std_normal_sf};

pub(crate) type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    RealLine,
    UnitInterval,
    PositiveHalfLine,
}

impl Support {
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Support::RealLine => (f64::NEG_INFINITY, f64::INFINITY),
            Support::UnitInterval => (0.0, 1.0),
            Support::PositiveHalfLine => (0.0, f64::INFINITY),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let (a, b) = self.bounds();
        x >= a && x <= b && !x.is_nan() && x.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// `inf` over `|t − x| < δ`.
    TwoSided,
    /// `inf` over `[x, x+δ]` for `x < 1`, over `(x−δ, x]` for `x ≥ 1`.
    OneSided,
}

#[derive(Clone)]
pub struct DensitySpec {
    name: String,
    support: Support,
    ln_pdf: Fn1,
    cdf: Option<Fn1>,
    sf: Option<Fn1>,
    upper_bound: Option<f64>,
    breakpoints: Vec<f64>,
    continuous: bool,
}

impl fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensitySpec")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("upper_bound", &self.upper_bound)
            .field("analytic_cdf", &self.cdf.is_some())
            .finish()
    }
}

fn check_param(name: &str, ok: bool, detail: impl fmt::Display) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name}: {detail}")))
    }
}

impl DensitySpec {
    fn raw(name: impl Into<String>, support: Support, ln_pdf: Fn1) -> Self {
        DensitySpec {
            name: name.into(),
            support,
            ln_pdf,
            cdf: None,
            sf: None,
            upper_bound: None,
            breakpoints: Vec::new(),
            continuous: true,
        }
    }

    /// A user-supplied density; normalization is checked by quadrature.
    pub fn custom(
        name: impl Into<String>,
        support: Support,
        ln_pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        breakpoints: Vec<f64>,
    ) -> Result<Self> {
        let mut d = Self::raw(name, support, Arc::new(ln_pdf));
        d.breakpoints = breakpoints;
        d.validate_mass()?;
        Ok(d)
    }

    pub fn with_cdf(mut self, cdf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.cdf = Some(Arc::new(cdf));
        self
    }

    pub fn with_survival(mut self, sf: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.sf = Some(Arc::new(sf));
        self
    }

    /// Declares `f₀ ≤ m`; rejected if a 10⁴-point grid shows otherwise.
    pub fn with_upper_bound(mut self, m: f64) -> Result<Self> {
        let (a, b) = self.support.bounds();
        let worst = scan_points(a, b, 10_000)
            .into_iter()
            .chain(self.breakpoints.iter().copied())
            .map(|x| self.pdf(x))
            .fold(0.0, f64::max);
        if worst > m * (1.0 + 1e-12) {
            return domain(format!(
                "{}: declared bound {m} exceeded (grid maximum {worst})",
                self.name
            ));
        }
        self.upper_bound = Some(m);
        Ok(self)
    }

    pub fn discontinuous(mut self) -> Self {
        self.continuous = false;
        self
    }

    fn validate_mass(&self) -> Result<()> {
        let (a, b) = self.support.bounds();
        let grid_neg = scan_points(a, b, 512)
            .into_iter()
            .any(|x| (self.ln_pdf)(x).is_nan());
        if grid_neg {
            return domain(format!("{}: density evaluates to NaN", self.name));
        }
        let mass = self.total_mass()?;
        if (mass - 1.0).abs() > 1e-6 {
            return domain(format!("{}: integrates to {mass}, not 1", self.name));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> Result<f64> {
        let (a, b) = self.support.bounds();
        let q = Quadrature::with_tolerances(1e-9, 0.0);
        Ok(q.integrate_with_breaks(|x| self.pdf(x), a, b, &self.breakpoints)?.value)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn upper_bound(&self) -> Option<f64> {
        self.upper_bound
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    pub fn has_analytic_cdf(&self) -> bool {
        self.cdf.is_some() || self.sf.is_some()
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        if self.support.contains(x) {
            (self.ln_pdf)(x)
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (a, b) = self.support.bounds();
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        if let Some(c) = &self.cdf {
            return c(x);
        }
        if let Some(s) = &self.sf {
            return 1.0 - s(x);
        }
        self.integrate_pdf(a, x)
    }

    /// `F̄₀(x) = 1 − F₀(x)`.
    pub fn survival(&self, x: f64) -> f64 {
        let (a, b) = self.support.bounds();
        if x <= a {
            return 1.0;
        }
        if x >= b {
            return 0.0;
        }
        if let Some(s) = &self.sf {
            return s(x);
        }
        if let Some(c) = &self.cdf {
            return 1.0 - c(x);
        }
        self.integrate_pdf(x, b)
    }

    /// Mass of `[lo, hi]`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        if self.has_analytic_cdf() {
            let upper = self.survival(lo) - self.survival(hi);
            let lower = self.cdf(hi) - self.cdf(lo);
            // Difference of the smaller pair loses less precision.
            if self.cdf(lo) > 0.5 {
                upper
            } else {
                lower
            }
        } else {
            self.integrate_pdf(lo, hi)
        }
    }

    fn integrate_pdf(&self, lo: f64, hi: f64) -> f64 {
        let q = Quadrature::with_tolerances(1e-13, 1e-12);
        match q.integrate_with_breaks(|t| self.pdf(t), lo, hi, &self.breakpoints) {
            Ok(r) => r.value.clamp(0.0, 1.0),
            Err(e) => {
                log::warn!("{}: tail quadrature failed ({e})", self.name);
                f64::NAN
            }
        }
    }

    /// `ln φ_δ(x)`, the log of the local infimum of `f₀` around `x`.
    pub fn ln_phi_delta(&self, x: f64, delta: f64, window: Window) -> Result<f64> {
        if !(delta > 0.0) {
            return domain(format!("phi_delta needs delta > 0, got {delta}"));
        }
        if window == Window::OneSided && self.support != Support::PositiveHalfLine {
            return domain("one-sided phi_delta is defined for half-line densities only");
        }
        let at_x = self.ln_pdf(x);
        if at_x == f64::NEG_INFINITY {
            return Ok(at_x);
        }
        let (lo, hi) = match window {
            Window::TwoSided => (x - delta, x + delta),
            Window::OneSided if x < 1.0 => (x, x + delta),
            Window::OneSided => (x - delta, x),
        };
        let (a, b) = self.support.bounds();
        let (lo, hi) = (lo.max(a), hi.min(b));
        Ok(window_min(&|t| self.ln_pdf(t), lo, hi).min(at_x))
    }

    pub fn phi_delta(&self, x: f64, delta: f64, window: Window) -> Result<f64> {
        self.ln_phi_delta(x, delta, window).map(f64::exp)
    }

    /// `g₀(y) = e^y f₀(e^y)` on the real line.
    pub fn log_transform(&self) -> Result<DensitySpec> {
        if self.support != Support::PositiveHalfLine {
            return domain(format!(
                "log_transform needs a half-line density, `{}` lives on {:?}",
                self.name, self.support
            ));
        }
        let base = self.clone();
        let ln_pdf: Fn1 = {
            let b = base.clone();
            Arc::new(move |y: f64| y + b.ln_pdf(y.exp()))
        };
        let mut out = Self::raw(format!("log({})", self.name), Support::RealLine, ln_pdf);
        out.breakpoints = self
            .breakpoints
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p.ln())
            .collect();
        out.continuous = self.continuous;
        if self.has_analytic_cdf() {
            let (b1, b2) = (base.clone(), base);
            out.cdf = Some(Arc::new(move |y: f64| b1.cdf(y.exp())));
            out.sf = Some(Arc::new(move |y: f64| b2.survival(y.exp())));
        }
        Ok(out)
    }

    // Built-in densities.

    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        check_param("normal", mean.is_finite() && sd > 0.0, "needs finite mean, sd > 0")?;
        let c = -sd.ln() - 0.5 * (2.0 * PI).ln();
        let mut d = Self::raw(
            format!("normal({mean},{sd})"),
            Support::RealLine,
            Arc::new(move |x: f64| {
                let z = (x - mean) / sd;
                c - 0.5 * z * z
            }),
        );
        d.cdf = Some(Arc::new(move |x: f64| std_normal_cdf((x - mean) / sd)));
        d.sf = Some(Arc::new(move |x: f64| std_normal_sf((x - mean) / sd)));
        d.upper_bound = Some(c.exp());
        d.breakpoints = vec![mean];
        Ok(d)
    }

    pub fn std_normal() -> Self {
        Self::normal(0.0, 1.0).expect("valid parameters")
    }

    pub fn cauchy(loc: f64, scale: f64) -> Result<Self> {
        check_param("cauchy", loc.is_finite() && scale > 0.0, "needs finite loc, scale > 0")?;
        let c = -(PI * scale).ln();
        let mut d = Self::raw(
            format!("cauchy({loc},{scale})"),
            Support::RealLine,
            Arc::new(move |x: f64| {
                let z = (x - loc) / scale;
                c - (z * z).ln_1p()
            }),
        );
        let upper = move |z: f64| {
            if z > 0.0 {
                (1.0 / z).atan() / PI
            } else {
                0.5 - z.atan() / PI
            }
        };
        d.sf = Some(Arc::new(move |x: f64| upper((x - loc) / scale)));
        d.cdf = Some(Arc::new(move |x: f64| upper(-(x - loc) / scale)));
        d.upper_bound = Some(c.exp());
        d.breakpoints = vec![loc];
        Ok(d)
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        check_param("laplace", loc.is_finite() && scale > 0.0, "needs finite loc, scale > 0")?;
        let c = -(2.0 * scale).ln();
        let mut d = Self::raw(
            format!("laplace({loc},{scale})"),
            Support::RealLine,
            Arc::new(move |x: f64| c - (x - loc).abs() / scale),
        );
        let lower = move |z: f64| {
            if z < 0.0 {
                0.5 * z.exp()
            } else {
                1.0 - 0.5 * (-z).exp()
            }
        };
        d.cdf = Some(Arc::new(move |x: f64| lower((x - loc) / scale)));
        d.sf = Some(Arc::new(move |x: f64| lower(-(x - loc) / scale)));
        d.upper_bound = Some(c.exp());
        d.breakpoints = vec![loc];
        Ok(d)
    }

    pub fn normal_mixture(w: f64, m1: f64, s1: f64, m2: f64, s2: f64) -> Result<Self> {
        check_param(
            "normal_mixture",
            w > 0.0 && w < 1.0 && s1 > 0.0 && s2 > 0.0 && m1.is_finite() && m2.is_finite(),
            "needs 0 < w < 1, finite means, positive sds",
        )?;
        let a = Self::normal(m1, s1)?;
        let b = Self::normal(m2, s2)?;
        let (a1, b1, a2, b2, a3, b3) = (a.clone(), b.clone(), a.clone(), b.clone(), a, b);
        let mut d = Self::raw(
            format!("normal_mixture({w},{m1},{s1},{m2},{s2})"),
            Support::RealLine,
            Arc::new(move |x: f64| {
                let la = w.ln() + a1.ln_pdf(x);
                let lb = (1.0 - w).ln() + b1.ln_pdf(x);
                let m = la.max(lb);
                m + ((la - m).exp() + (lb - m).exp()).ln()
            }),
        );
        d.cdf = Some(Arc::new(move |x: f64| w * a2.cdf(x) + (1.0 - w) * b2.cdf(x)));
        d.sf = Some(Arc::new(move |x: f64| w * a3.survival(x) + (1.0 - w) * b3.survival(x)));
        d.breakpoints = vec![m1, m2];
        let bound = w / (s1 * (2.0 * PI).sqrt()) + (1.0 - w) / (s2 * (2.0 * PI).sqrt());
        d.upper_bound = Some(bound);
        Ok(d)
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        check_param("exponential", rate > 0.0 && rate.is_finite(), "needs rate > 0")?;
        let lr = rate.ln();
        let mut d = Self::raw(
            format!("exponential({rate})"),
            Support::PositiveHalfLine,
            Arc::new(move |x: f64| lr - rate * x),
        );
        d.cdf = Some(Arc::new(move |x: f64| -(-rate * x).exp_m1()));
        d.sf = Some(Arc::new(move |x: f64| (-rate * x).exp()));
        d.upper_bound = Some(rate);
        Ok(d)
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        check_param("gamma", shape > 0.0 && scale > 0.0, "needs shape > 0, scale > 0")?;
        let c = -ln_gamma_pos(shape) - shape * scale.ln();
        let mut d = Self::raw(
            format!("gamma({shape},{scale})"),
            Support::PositiveHalfLine,
            Arc::new(move |x: f64| {
                if x > 0.0 {
                    c + (shape - 1.0) * x.ln() - x / scale
                } else if shape == 1.0 {
                    c
                } else if shape > 1.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }),
        );
        d.cdf = Some(Arc::new(move |x: f64| gamma_cdf(x.max(0.0) / scale, shape).unwrap_or(f64::NAN)));
        d.sf = Some(Arc::new(move |x: f64| gamma_sf(x.max(0.0) / scale, shape).unwrap_or(f64::NAN)));
        if shape >= 1.0 {
            let mode = (shape - 1.0) * scale;
            d.upper_bound = Some(d.pdf(mode));
            d.breakpoints = vec![mode];
        }
        Ok(d)
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        check_param("lognormal", mu.is_finite() && sigma > 0.0, "needs finite mu, sigma > 0")?;
        let c = -sigma.ln() - 0.5 * (2.0 * PI).ln();
        let mut d = Self::raw(
            format!("lognormal({mu},{sigma})"),
            Support::PositiveHalfLine,
            Arc::new(move |x: f64| {
                if x <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                let y = x.ln();
                let z = (y - mu) / sigma;
                c - 0.5 * z * z - y
            }),
        );
        d.cdf = Some(Arc::new(move |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                std_normal_cdf((x.ln() - mu) / sigma)
            }
        }));
        d.sf = Some(Arc::new(move |x: f64| {
            if x <= 0.0 {
                1.0
            } else {
                std_normal_sf((x.ln() - mu) / sigma)
            }
        }));
        let mode = (mu - sigma * sigma).exp();
        d.upper_bound = Some(d.pdf(mode));
        d.breakpoints = vec![mode, mu.exp()];
        Ok(d)
    }

    /// `k/λ (x/λ)^{k−1} exp(−(x/λ)^k)`; shape 2, scale 1 has survival `e^{−x²}`.
    pub fn weibull(shape: f64, scale: f64) -> Result<Self> {
        check_param("weibull", shape > 0.0 && scale > 0.0, "needs shape > 0, scale > 0")?;
        let c = shape.ln() - scale.ln();
        let mut d = Self::raw(
            format!("weibull({shape},{scale})"),
            Support::PositiveHalfLine,
            Arc::new(move |x: f64| {
                if x > 0.0 {
                    let lz = (x / scale).ln();
                    c + (shape - 1.0) * lz - (shape * lz).exp()
                } else if shape == 1.0 {
                    c
                } else if shape > 1.0 {
                    f64::NEG_INFINITY
                } else {
                    f64::INFINITY
                }
            }),
        );
        d.cdf = Some(Arc::new(move |x: f64| -(-(x.max(0.0) / scale).powf(shape)).exp_m1()));
        d.sf = Some(Arc::new(move |x: f64| (-(x.max(0.0) / scale).powf(shape)).exp()));
        if shape >= 1.0 {
            let mode = scale * ((shape - 1.0) / shape).powf(1.0 / shape);
            d.upper_bound = Some(d.pdf(mode));
            d.breakpoints = vec![mode];
        }
        Ok(d)
    }

    /// Lomax `α(1+x)^{−α−1}`; `α = 2` gives `2(1+x)^{−3}`.
    pub fn lomax(alpha: f64) -> Result<Self> {
        check_param("lomax", alpha > 0.0 && alpha.is_finite(), "needs alpha > 0")?;
        let la = alpha.ln();
        let mut d = Self::raw(
            format!("lomax({alpha})"),
            Support::PositiveHalfLine,
            Arc::new(move |x: f64| la - (alpha + 1.0) * x.ln_1p()),
        );
        d.sf = Some(Arc::new(move |x: f64| (-alpha * x.max(0.0).ln_1p()).exp()));
        d.cdf = Some(Arc::new(move |x: f64| -(-alpha * x.max(0.0).ln_1p()).exp_m1()));
        d.upper_bound = Some(alpha);
        Ok(d)
    }

    pub fn beta(a: f64, b: f64) -> Result<Self> {
        check_param("beta", a > 0.0 && b > 0.0, "needs a > 0, b > 0")?;
        let c = ln_gamma_pos(a + b) - ln_gamma_pos(a) - ln_gamma_pos(b);
        let mut d = Self::raw(
            format!("beta({a},{b})"),
            Support::UnitInterval,
            Arc::new(move |x: f64| {
                let l = if a == 1.0 { 0.0 } else { (a - 1.0) * x.ln() };
                let r = if b == 1.0 { 0.0 } else { (b - 1.0) * (-x).ln_1p() };
                c + l + r
            }),
        );
        if a >= 1.0 && b >= 1.0 {
            let mode = if a + b > 2.0 { (a - 1.0) / (a + b - 2.0) } else { 0.5 };
            d.upper_bound = Some(d.pdf(mode));
        }
        Ok(d)
    }

    pub fn uniform() -> Self {
        Self::polynomial("uniform", Support::UnitInterval, vec![0.0, 1.0], vec![vec![1.0]])
            .expect("valid polynomial")
    }

    /// `6x(1−x)` on `[0, 1]`.
    pub fn parabolic() -> Self {
        Self::polynomial(
            "parabolic",
            Support::UnitInterval,
            vec![0.0, 1.0],
            vec![vec![0.0, 6.0, -6.0]],
        )
        .expect("valid polynomial")
    }

    /// Piecewise polynomial density: piece `i` lives on `[knots[i], knots[i+1])`
    /// with coefficients in increasing degree. Zero outside the knots.
    pub fn polynomial(
        name: impl Into<String>,
        support: Support,
        knots: Vec<f64>,
        coeffs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let name = name.into();
        if knots.len() != coeffs.len() + 1 || coeffs.is_empty() {
            return domain(format!("{name}: need one coefficient row per knot interval"));
        }
        if !knots.windows(2).all(|w| w[0] < w[1]) || !knots.iter().all(|k| k.is_finite()) {
            return domain(format!("{name}: knots must be finite and strictly increasing"));
        }
        let (sa, sb) = support.bounds();
        if knots[0] < sa || *knots.last().unwrap() > sb {
            return domain(format!("{name}: knots leave the declared support"));
        }
        let pieces = Arc::new(PiecewisePoly { knots, coeffs });
        for (i, w) in pieces.knots.windows(2).enumerate() {
            for j in 0..=64 {
                let x = w[0] + (w[1] - w[0]) * j as f64 / 64.0;
                if pieces.value_in(i, x) < -1e-12 {
                    return domain(format!("{name}: negative at x = {x}"));
                }
            }
        }
        let total = pieces.integral_to(f64::INFINITY);
        if (total - 1.0).abs() > 1e-6 {
            return domain(format!("{name}: integrates to {total}, not 1"));
        }
        let (p1, p2, p3) = (pieces.clone(), pieces.clone(), pieces.clone());
        let mut d = Self::raw(
            name,
            support,
            Arc::new(move |x: f64| p1.value(x).max(0.0).ln()),
        );
        d.cdf = Some(Arc::new(move |x: f64| p2.integral_to(x).clamp(0.0, 1.0)));
        d.sf = Some(Arc::new(move |x: f64| (1.0 - p3.integral_to(x)).clamp(0.0, 1.0)));
        d.breakpoints = pieces.knots.clone();
        let mut bound: f64 = 0.0;
        for (i, w) in pieces.knots.windows(2).enumerate() {
            for j in 0..=1000 {
                bound = bound.max(pieces.value_in(i, w[0] + (w[1] - w[0]) * j as f64 / 1000.0));
            }
        }
        d.continuous = pieces.is_continuous();
        d.upper_bound = Some(bound * (1.0 + 1e-9) + 1e-12);
        Ok(d)
    }
}

struct PiecewisePoly {
    knots: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
}

impl PiecewisePoly {
    fn value_in(&self, i: usize, x: f64) -> f64 {
        self.coeffs[i].iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn piece(&self, x: f64) -> Option<usize> {
        let n = self.knots.len();
        if x < self.knots[0] || x > self.knots[n - 1] {
            return None;
        }
        let i = self.knots.partition_point(|k| *k <= x);
        Some(i.saturating_sub(1).min(n - 2))
    }

    fn value(&self, x: f64) -> f64 {
        self.piece(x).map_or(0.0, |i| self.value_in(i, x))
    }

    fn antiderivative(&self, i: usize, x: f64) -> f64 {
        self.coeffs[i]
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (k, c)| acc * x + c / (k + 1) as f64)
            * x
    }

    fn integral_to(&self, x: f64) -> f64 {
        let mut total = 0.0;
        for (i, w) in self.knots.windows(2).enumerate() {
            if x <= w[0] {
                break;
            }
            let hi = x.min(w[1]);
            total += self.antiderivative(i, hi) - self.antiderivative(i, w[0]);
        }
        total
    }

    fn is_continuous(&self) -> bool {
        let n = self.knots.len();
        let inner = (1..n - 1).all(|j| {
            let k = self.knots[j];
            (self.value_in(j - 1, k) - self.value_in(j, k)).abs() < 1e-9
        });
        inner
    }
}

/// Minimum of `f` over `[lo, hi]`: 257-point scan, then golden-section
/// refinement around the best grid point.
pub(crate) fn window_min(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    if !(hi > lo) {
        return f(lo);
    }
    const N: usize = 256;
    let step = (hi - lo) / N as f64;
    let mut best = f64::INFINITY;
    let mut arg = 0usize;
    for i in 0..=N {
        let x = if i == N { hi } else { lo + step * i as f64 };
        let v = f(x);
        if v < best {
            best = v;
            arg = i;
        }
    }
    let mut a = lo + step * arg.saturating_sub(1) as f64;
    let mut b = (lo + step * (arg + 1) as f64).min(hi);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a) <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    best.min(fc).min(fd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_integrate_to_one() {
        let all = vec![
            DensitySpec::std_normal(),
            DensitySpec::cauchy(0.0, 1.0).unwrap(),
            DensitySpec::laplace(1.0, 0.5).unwrap(),
            DensitySpec::normal_mixture(0.3, -2.0, 0.5, 1.0, 1.5).unwrap(),
            DensitySpec::exponential(1.0).unwrap(),
            DensitySpec::gamma(2.0, 1.0).unwrap(),
            DensitySpec::gamma(0.7, 2.0).unwrap(),
            DensitySpec::lognormal(0.0, 1.0).unwrap(),
            DensitySpec::weibull(2.0, 1.0).unwrap(),
            DensitySpec::lomax(2.0).unwrap(),
            DensitySpec::beta(2.0, 5.0).unwrap(),
            DensitySpec::uniform(),
            DensitySpec::parabolic(),
        ];
        for d in all {
            let m = d.total_mass().unwrap();
            assert!((m - 1.0).abs() < 1e-7, "{}: {m}", d.name());
            if let Some(bound) = d.upper_bound() {
                assert!(d.clone().with_upper_bound(bound).is_ok(), "{}", d.name());
            }
        }
    }

    #[test]
    fn cdf_and_survival_agree_with_quadrature() {
        let d = DensitySpec::lomax(2.0).unwrap();
        assert!((d.survival(1.0) - 0.25).abs() < 1e-15);
        let q = Quadrature::with_tolerances(1e-13, 0.0);
        let tail = q.integrate(|x| d.pdf(x), 1.0, f64::INFINITY).unwrap().value;
        assert!((tail - 0.25).abs() < 1e-12);
        let e = DensitySpec::exponential(1.0).unwrap();
        assert!((e.survival(1.0) - (-1f64).exp()).abs() < 1e-16);
        assert_eq!(e.survival(0.0), 1.0);
        assert_eq!(DensitySpec::std_normal().survival(f64::NEG_INFINITY), 1.0);
        let b = DensitySpec::beta(2.0, 2.0).unwrap();
        let p = DensitySpec::parabolic();
        for x in [0.1, 0.35, 0.8] {
            assert!((b.cdf(x) - p.cdf(x)).abs() < 1e-11);
            assert!((p.cdf(x) - (3.0 * x * x - 2.0 * x * x * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn custom_density_is_validated() {
        let half = DensitySpec::custom("half", Support::UnitInterval, |_| 0.5f64.ln(), vec![]);
        assert!(half.is_err());
        let ok = DensitySpec::custom("tri", Support::UnitInterval, |x: f64| (2.0 * x).ln(), vec![]);
        assert!(ok.is_ok());
        assert!(DensitySpec::std_normal().with_upper_bound(0.1).is_err());
    }

    #[test]
    fn polynomial_rejects_bad_tables() {
        assert!(DensitySpec::polynomial("neg", Support::UnitInterval, vec![0.0, 1.0], vec![vec![2.0, -3.0]]).is_err());
        assert!(DensitySpec::polynomial("mass", Support::UnitInterval, vec![0.0, 1.0], vec![vec![2.0]]).is_err());
        assert!(DensitySpec::polynomial("knots", Support::UnitInterval, vec![0.0, 2.0], vec![vec![0.5]]).is_err());
        let step = DensitySpec::polynomial(
            "step",
            Support::UnitInterval,
            vec![0.0, 0.5, 1.0],
            vec![vec![0.5], vec![1.5]],
        )
        .unwrap();
        assert!(!step.is_continuous());
        assert_eq!(step.pdf(0.75), 1.5);
        assert!((step.cdf(0.75) - 0.625).abs() < 1e-15);
    }

    #[test]
    fn phi_delta_examples() {
        let u = DensitySpec::uniform();
        assert_eq!(u.phi_delta(0.5, 0.1, Window::TwoSided).unwrap(), 1.0);
        let n = DensitySpec::std_normal();
        let v = n.phi_delta(0.0, 0.1, Window::TwoSided).unwrap();
        assert!((v - n.pdf(0.1)).abs() < 1e-15);
        let e = DensitySpec::exponential(1.0).unwrap();
        for x in [1.0, 2.5, 7.0] {
            assert_eq!(e.phi_delta(x, 0.3, Window::OneSided).unwrap(), e.pdf(x));
        }
        assert!(n.phi_delta(0.0, 0.1, Window::OneSided).is_err());
        assert!(n.phi_delta(0.0, 0.0, Window::TwoSided).is_err());
    }

    #[test]
    fn phi_delta_interior_minimum_is_refined() {
        // Bimodal target: the window around the trough has an interior minimum.
        let d = DensitySpec::normal_mixture(0.5, -1.0, 0.4, 1.0, 0.4).unwrap();
        let got = d.phi_delta(0.05, 0.3, Window::TwoSided).unwrap();
        assert!((got - d.pdf(0.0)).abs() < 1e-12);
    }

    #[test]
    fn log_transform_examples() {
        let g = DensitySpec::lognormal(0.0, 1.0).unwrap().log_transform().unwrap();
        let n = DensitySpec::std_normal();
        for y in [-3.0, -1.0, 0.0, 0.5, 2.0] {
            assert!((g.pdf(y) - n.pdf(y)).abs() < 1e-15);
        }
        let w = DensitySpec::exponential(1.0).unwrap().log_transform().unwrap();
        for y in [-2.0, 0.0, 1.0] {
            assert!((w.ln_pdf(y) - (y - f64::exp(y))).abs() < 1e-15);
        }
        let g2 = DensitySpec::gamma(2.0, 1.0).unwrap().log_transform().unwrap();
        assert!((g2.total_mass().unwrap() - 1.0).abs() < 1e-8);
        assert!(n.log_transform().is_err());
    }
}
