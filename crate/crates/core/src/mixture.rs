//! Mixing distributions `P` and mixture densities `f_{P,φ}(x) = ∫ K(x; θ, φ) dP(θ)`.

use std::fmt;
use std::sync::Arc;

use crate::density::{Fn1, Support};
use crate::error::{domain, Error, Result};
use crate::kernels::{KernelSpec, LocationScaleView};
use crate::quadrature::Quadrature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub theta: f64,
    /// Per-atom hyper-parameter for joint `(θ, φ)` mixing.
    pub phi: Option<f64>,
    pub weight: f64,
}

impl Atom {
    pub fn new(theta: f64, weight: f64) -> Self {
        Atom {
            theta,
            phi: None,
            weight,
        }
    }
}

type Splitter = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A mixing density `t · p(θ)` on `[lo, hi]`.
#[derive(Clone)]
pub struct MixingDensity {
    lo: f64,
    hi: f64,
    ln_density: Fn1,
    ln_normalizer: f64,
    splitter: Option<Splitter>,
}

impl fmt::Debug for MixingDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MixingDensity")
            .field("lo", &self.lo)
            .field("hi", &self.hi)
            .field("normalizer", &self.ln_normalizer.exp())
            .finish()
    }
}

impl MixingDensity {
    /// Unnormalized log density `ln p` on `[lo, hi]`; the normalizer is given as
    /// `t` and checked against quadrature.
    pub fn new(
        lo: f64,
        hi: f64,
        ln_density: impl Fn(f64) -> f64 + Send + Sync + 'static,
        normalizer: f64,
        breaks: &[f64],
    ) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return domain(format!("mixing density needs a bounded interval, got [{lo}, {hi}]"));
        }
        if !(normalizer > 0.0 && normalizer.is_finite()) {
            return domain(format!("normalizer must be positive and finite, got {normalizer}"));
        }
        let md = MixingDensity {
            lo,
            hi,
            ln_density: Arc::new(ln_density),
            ln_normalizer: normalizer.ln(),
            splitter: None,
        };
        let q = Quadrature::with_tolerances(1e-14, 1e-11);
        let mass = q
            .integrate_with_breaks(|t| md.ln_pdf(t).exp(), lo, hi, breaks)?
            .value;
        if (mass - 1.0).abs() > 1e-8 {
            return domain(format!("mixing density integrates to {mass}, not 1"));
        }
        Ok(md)
    }

    /// Adds a rule giving `θ` breakpoints for the mixing integral at a given `x`.
    pub fn with_splitter(mut self, s: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.splitter = Some(Arc::new(s));
        self
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer.exp()
    }

    /// Normalized log density.
    pub fn ln_pdf(&self, theta: f64) -> f64 {
        if theta < self.lo || theta > self.hi {
            f64::NEG_INFINITY
        } else {
            self.ln_normalizer + (self.ln_density)(theta)
        }
    }
}

#[derive(Debug, Clone)]
pub enum MixingKind {
    Discrete(Vec<Atom>),
    Density(MixingDensity),
}

#[derive(Debug, Clone)]
pub struct MixingDistribution {
    pub kind: MixingKind,
    /// `h` in `P = F × δ(h)`.
    pub point_mass: Option<f64>,
}

impl MixingDistribution {
    /// Atoms with weights summing to one within `1e-12`. Zero weights are dropped.
    pub fn discrete(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return domain("discrete mixing distribution needs at least one atom");
        }
        if atoms.iter().any(|a| !(a.weight >= 0.0) || !a.theta.is_finite()) {
            return domain("atom weights must be non-negative and locations finite");
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return domain(format!("atom weights sum to {total}, not 1"));
        }
        let atoms: Vec<Atom> = atoms.into_iter().filter(|a| a.weight > 0.0).collect();
        Ok(MixingDistribution {
            kind: MixingKind::Discrete(atoms),
            point_mass: None,
        })
    }

    pub fn point(theta: f64) -> Self {
        MixingDistribution {
            kind: MixingKind::Discrete(vec![Atom::new(theta, 1.0)]),
            point_mass: None,
        }
    }

    pub fn density(d: MixingDensity) -> Self {
        MixingDistribution {
            kind: MixingKind::Density(d),
            point_mass: None,
        }
    }

    pub fn times_point_mass(mut self, h: f64) -> Self {
        self.point_mass = Some(h);
        self
    }

    /// Smallest interval containing the support of the `θ` marginal.
    pub fn theta_range(&self) -> (f64, f64) {
        match &self.kind {
            MixingKind::Discrete(atoms) => atoms.iter().fold(
                (f64::INFINITY, f64::NEG_INFINITY),
                |(lo, hi), a| (lo.min(a.theta), hi.max(a.theta)),
            ),
            MixingKind::Density(d) => d.interval(),
        }
    }

    /// Range of the hyper-parameter over atoms and the point mass, if any.
    pub fn phi_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if let MixingKind::Discrete(atoms) = &self.kind {
            for p in atoms.iter().filter_map(|a| a.phi) {
                lo = lo.min(p);
                hi = hi.max(p);
            }
        }
        if let Some(h) = self.point_mass {
            lo = lo.min(h);
            hi = hi.max(h);
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// `P([lo, hi])` for the `θ` marginal.
    pub fn mass(&self, lo: f64, hi: f64) -> Result<f64> {
        match &self.kind {
            MixingKind::Discrete(atoms) => Ok(atoms
                .iter()
                .filter(|a| a.theta >= lo && a.theta <= hi)
                .map(|a| a.weight)
                .sum()),
            MixingKind::Density(d) => {
                let (a, b) = (lo.max(d.lo), hi.min(d.hi));
                if a >= b {
                    return Ok(0.0);
                }
                let q = Quadrature::with_tolerances(1e-14, 1e-11);
                Ok(q.integrate(|t| d.ln_pdf(t).exp(), a, b)?.value)
            }
        }
    }
}

/// How the mixture reads `(θ, φ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixtureKernel {
    Native(KernelSpec),
    /// `θ` is a location and `φ` a scale in the view's coordinates.
    LocationScale(LocationScaleView),
}

impl MixtureKernel {
    fn ln_eval(&self, x: f64, theta: f64, phi: f64) -> Result<f64> {
        match self {
            MixtureKernel::Native(k) => k.ln_eval(x, theta, phi),
            MixtureKernel::LocationScale(v) => Ok(v.ln_kernel(x, theta, phi)),
        }
    }

    fn eval(&self, x: f64, theta: f64, phi: f64) -> Result<f64> {
        match self {
            MixtureKernel::Native(k) => k.eval(x, theta, phi),
            MixtureKernel::LocationScale(v) => Ok(v.ln_kernel(x, theta, phi).exp()),
        }
    }

    pub fn sample_space(&self) -> Support {
        match self {
            MixtureKernel::Native(k) => k.sample_space(),
            MixtureKernel::LocationScale(_) => Support::RealLine,
        }
    }

    fn needs_phi(&self) -> bool {
        match self {
            MixtureKernel::Native(k) => k.needs_phi(),
            MixtureKernel::LocationScale(_) => true,
        }
    }

    fn kinks(&self, theta: f64, phi: f64) -> Vec<f64> {
        match self {
            MixtureKernel::Native(k) => k.kinks(theta, phi),
            MixtureKernel::LocationScale(v) => match v.base {
                crate::kernels::BaseDensity::Laplace => vec![theta],
                _ => Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixtureDensity {
    kernel: MixtureKernel,
    mixing: MixingDistribution,
    /// Hyper-parameter `φ` shared by all atoms.
    hyper: Option<f64>,
    quad: Quadrature,
    steps: Option<Arc<StepTable>>,
}

/// `Σ w_i/θ_i · 1{x ≤ θ_i}` as suffix sums over sorted `θ`.
#[derive(Debug)]
struct StepTable {
    thetas: Vec<f64>,
    suffix: Vec<f64>,
}

impl StepTable {
    fn new(atoms: &[Atom]) -> Self {
        let mut pairs: Vec<(f64, f64)> = atoms.iter().map(|a| (a.theta, a.weight / a.theta)).collect();
        pairs.sort_by(|l, r| l.0.total_cmp(&r.0));
        let mut suffix = vec![0.0; pairs.len() + 1];
        for i in (0..pairs.len()).rev() {
            suffix[i] = suffix[i + 1] + pairs[i].1;
        }
        StepTable {
            thetas: pairs.into_iter().map(|p| p.0).collect(),
            suffix,
        }
    }

    fn eval(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.suffix[self.thetas.partition_point(|t| *t < x)]
    }
}

impl MixtureDensity {
    pub fn new(kernel: MixtureKernel, mixing: MixingDistribution, hyper: Option<f64>) -> Result<Self> {
        let m = MixtureDensity {
            kernel,
            mixing,
            hyper,
            quad: Quadrature {
                abs_tol: 1e-300,
                rel_tol: 1e-10,
                max_depth: 40,
                max_panels: 2000,
            },
            steps: None,
        };
        if m.kernel.needs_phi() {
            let missing = match &m.mixing.kind {
                MixingKind::Discrete(atoms) => atoms.iter().any(|a| m.phi_for(a).is_none()),
                MixingKind::Density(_) => m.shared_phi().is_none(),
            };
            if missing {
                return Err(Error::Precondition(
                    "kernel needs a hyper-parameter but neither atoms, point mass nor hyper provide one"
                        .into(),
                ));
            }
        }
        let mut m = m;
        if let MixingKind::Discrete(atoms) = &m.mixing.kind {
            for a in atoms {
                m.kernel.ln_eval(0.5, a.theta, m.phi_for(a).unwrap_or(f64::NAN))?;
            }
            if m.kernel == MixtureKernel::Native(KernelSpec::ScaledUniform) {
                m.steps = Some(Arc::new(StepTable::new(atoms)));
            }
        }
        Ok(m)
    }

    pub fn native(kernel: KernelSpec, mixing: MixingDistribution, hyper: Option<f64>) -> Result<Self> {
        Self::new(MixtureKernel::Native(kernel), mixing, hyper)
    }

    pub fn with_quadrature(mut self, q: Quadrature) -> Self {
        self.quad = q;
        self
    }

    pub fn kernel(&self) -> MixtureKernel {
        self.kernel
    }

    pub fn mixing(&self) -> &MixingDistribution {
        &self.mixing
    }

    pub fn hyper(&self) -> Option<f64> {
        self.hyper
    }

    fn shared_phi(&self) -> Option<f64> {
        self.mixing.point_mass.or(self.hyper)
    }

    fn phi_for(&self, a: &Atom) -> Option<f64> {
        a.phi.or_else(|| self.shared_phi())
    }

    pub fn sample_space(&self) -> Support {
        self.kernel.sample_space()
    }

    /// Non-smooth points of the mixture in `x`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if let MixingKind::Discrete(atoms) = &self.mixing.kind {
            for a in atoms {
                out.extend(self.kernel.kinks(a.theta, self.phi_for(a).unwrap_or(f64::NAN)));
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// `f_{P,φ}(x)`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        if !self.sample_space().contains(x) {
            return Ok(0.0);
        }
        if let Some(t) = &self.steps {
            return Ok(t.eval(x));
        }
        match &self.mixing.kind {
            MixingKind::Discrete(atoms) => {
                let mut s = 0.0;
                for a in atoms {
                    let phi = self.phi_for(a).unwrap_or(f64::NAN);
                    s += a.weight * self.kernel.eval(x, a.theta, phi)?;
                }
                Ok(s)
            }
            MixingKind::Density(_) => self.ln_eval(x).map(f64::exp),
        }
    }

    /// `ln f_{P,φ}(x)`, computed without underflow.
    pub fn ln_eval(&self, x: f64) -> Result<f64> {
        if !self.sample_space().contains(x) {
            return Ok(f64::NEG_INFINITY);
        }
        if let Some(t) = &self.steps {
            return Ok(t.eval(x).ln());
        }
        match &self.mixing.kind {
            MixingKind::Discrete(atoms) => {
                let mut terms = Vec::with_capacity(atoms.len());
                for a in atoms {
                    let phi = self.phi_for(a).unwrap_or(f64::NAN);
                    terms.push(a.weight.ln() + self.kernel.ln_eval(x, a.theta, phi)?);
                }
                Ok(log_sum_exp(&terms))
            }
            MixingKind::Density(d) => self.ln_eval_density(d, x),
        }
    }

    fn ln_eval_density(&self, d: &MixingDensity, x: f64) -> Result<f64> {
        let phi = self.shared_phi().unwrap_or(f64::NAN);
        let kernel = self.kernel;
        let ln_integrand = |t: f64| -> f64 {
            let lk = kernel.ln_eval(x, t, phi).unwrap_or(f64::NAN);
            if lk == f64::NEG_INFINITY {
                return lk;
            }
            lk + d.ln_pdf(t)
        };

        let mut probes: Vec<f64> = Vec::with_capacity(80);
        const N: usize = 64;
        let geometric = d.lo > 0.0 && d.hi / d.lo > 50.0;
        for i in 0..=N {
            let u = i as f64 / N as f64;
            probes.push(if geometric {
                d.lo * (d.hi / d.lo).powf(u)
            } else {
                d.lo + (d.hi - d.lo) * u
            });
        }
        let mut breaks = match &d.splitter {
            Some(s) => s(x),
            None => Vec::new(),
        };
        breaks.retain(|t| *t > d.lo && *t < d.hi);
        probes.extend(breaks.iter().copied());

        let mut best = f64::NEG_INFINITY;
        let mut arg = f64::NAN;
        for &t in &probes {
            let v = ln_integrand(t);
            if v.is_nan() {
                return domain(format!("mixture integrand is NaN at theta = {t} (x = {x})"));
            }
            if v > best {
                best = v;
                arg = t;
            }
        }
        if best == f64::NEG_INFINITY {
            return Ok(best);
        }
        // Bracket the best probe so the rule sees the peak, halving towards it
        // until the integrand is within e^-2 of the maximum.
        probes.sort_by(f64::total_cmp);
        probes.dedup();
        let k = probes.partition_point(|p| *p < arg);
        breaks.push(arg);
        let neighbours = [k.checked_sub(1), (k + 1 < probes.len()).then_some(k + 1)];
        for nb in neighbours.into_iter().flatten() {
            let far = probes[nb];
            breaks.push(far);
            for j in 1..=60 {
                let p = arg + (far - arg) * 0.5f64.powi(j);
                if p == arg {
                    break;
                }
                breaks.push(p);
                if ln_integrand(p) >= best - 2.0 {
                    break;
                }
            }
        }
        // `ln_integrand − best` loses about |best|·ε to cancellation.
        let mut quad = self.quad;
        quad.rel_tol = quad.rel_tol.max(64.0 * f64::EPSILON * best.abs());
        let r = quad.integrate_with_breaks(|t| (ln_integrand(t) - best).exp(), d.lo, d.hi, &breaks)?;
        Ok(best + r.value.ln())
    }

    /// `∫ f_{P,φ}` over the sample space.
    pub fn total_mass(&self) -> Result<f64> {
        let (a, b) = self.sample_space().bounds();
        let q = Quadrature::with_tolerances(1e-10, 1e-10);
        let mut breaks = self.breakpoints();
        let (lo, hi) = self.mixing.theta_range();
        breaks.extend([lo, hi, 0.5 * (lo + hi)]);
        let mut err = None;
        let r = q.integrate_with_breaks(
            |x| match self.eval(x) {
                Ok(v) => v,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            },
            a,
            b,
            &breaks,
        );
        if let Some(e) = err {
            return Err(e);
        }
        Ok(r?.value)
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_uniform_reconstruction() {
        let atoms = (1..=4).map(|i| Atom::new((i as f64 - 0.5) / 4.0, 0.25)).collect();
        let m = MixtureDensity::native(
            KernelSpec::Histogram,
            MixingDistribution::discrete(atoms).unwrap(),
            Some(4.0),
        )
        .unwrap();
        assert_eq!(m.eval(0.6).unwrap(), 1.0);
        assert!((m.ln_eval(0.6).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn exponential_point_mass() {
        let m = MixtureDensity::native(KernelSpec::Exponential, MixingDistribution::point(2.0), None)
            .unwrap();
        assert_eq!(m.eval(0.0).unwrap(), 2.0);
    }

    #[test]
    fn missing_hyper_is_rejected() {
        let r = MixtureDensity::native(KernelSpec::Gamma, MixingDistribution::point(2.0), None);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn discrete_weights_validated() {
        assert!(MixingDistribution::discrete(vec![Atom::new(0.0, 0.5)]).is_err());
        assert!(MixingDistribution::discrete(vec![]).is_err());
        assert!(MixingDistribution::discrete(vec![Atom::new(0.0, -0.5), Atom::new(1.0, 1.5)]).is_err());
    }

    #[test]
    fn density_mixing_matches_closed_form() {
        // Exponential kernel mixed over θ ~ Uniform[1, 2]:
        // f(x) = ∫_1^2 θ e^{−θx} dθ = (e^{−x}(1+x) − e^{−2x}(1+2x))/x².
        let md = MixingDensity::new(1.0, 2.0, |_| 0.0, 1.0, &[]).unwrap();
        let m = MixtureDensity::native(KernelSpec::Exponential, MixingDistribution::density(md), None)
            .unwrap();
        for x in [0.1f64, 1.0, 3.0, 50.0, 400.0] {
            let exact = ((-x).exp() * (1.0 + x) - (-2.0 * x).exp() * (1.0 + 2.0 * x)) / (x * x);
            let got = m.eval(x).unwrap();
            assert!((got - exact).abs() <= 1e-9 * exact, "x={x}: {got} vs {exact}");
        }
        // Far tail is still finite in log space.
        let l = m.ln_eval(2000.0).unwrap();
        assert!((l - (-2000.0 + (2001f64).ln() - (2000f64).powi(2).ln())).abs() < 1e-8);
        assert!((m.total_mass().unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixing_density_normalizer_checked() {
        assert!(MixingDensity::new(0.0, 2.0, |_| 0.0, 1.0, &[]).is_err());
        assert!(MixingDensity::new(0.0, 2.0, |_| 0.0, 0.5, &[]).is_ok());
    }
}
