//! Dirichlet-process mixture priors and Monte-Carlo estimates of
//! `Π*(K(f₀; f) < ε)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Gamma, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensitySpec;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::kl::kl_divergence;
use crate::mixture::{Atom, MixingDistribution, MixtureDensity};

pub const DEFAULT_TRUNCATION: usize = 500;
/// Bound on the expected leftover stick mass `(c/(1+c))^N`.
pub const MAX_RESIDUAL: f64 = 1e-6;
/// Per-draw KL tolerance.
pub const COARSE_TOL: f64 = 1e-4;
/// Tolerance for draws whose KL lands within `10 × COARSE_TOL` of some `ε`.
pub const FINE_TOL: f64 = 1e-7;
const WILSON_Z: f64 = 1.959963984540054;

/// A univariate distribution that can be sampled from a per-draw stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "snake_case", deny_unknown_fields)]
pub enum ParamDist {
    /// Consumes no randomness.
    Point { value: f64 },
    Normal { mean: f64, sd: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Uniform { lo: f64, hi: f64 },
    Gamma { shape: f64, scale: f64 },
    /// Finite support; probabilities are normalized on validation.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl ParamDist {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        match self {
            ParamDist::Point { value } if !value.is_finite() => bad(format!("point mass at {value}")),
            ParamDist::Normal { mean, sd } if !(mean.is_finite() && *sd > 0.0 && sd.is_finite()) => {
                bad(format!("normal({mean}, {sd})"))
            }
            ParamDist::LogNormal { mu, sigma } if !(mu.is_finite() && *sigma > 0.0 && sigma.is_finite()) => {
                bad(format!("lognormal({mu}, {sigma})"))
            }
            ParamDist::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                bad(format!("uniform({lo}, {hi})"))
            }
            ParamDist::Gamma { shape, scale } if !(*shape > 0.0 && *scale > 0.0 && shape.is_finite() && scale.is_finite()) => {
                bad(format!("gamma({shape}, {scale})"))
            }
            ParamDist::Discrete { values, probs } => {
                if values.is_empty() || values.len() != probs.len() {
                    return bad("discrete distribution needs matching non-empty values and probs".into());
                }
                if values.iter().any(|v| !v.is_finite()) || probs.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
                    return bad("discrete values must be finite and probs non-negative".into());
                }
                if !(probs.iter().sum::<f64>() > 0.0) {
                    return bad("discrete probs sum to zero".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParamDist::Point { value } => *value,
            ParamDist::Normal { mean, sd } => Normal::new(*mean, *sd).expect("validated").sample(rng),
            ParamDist::LogNormal { mu, sigma } => LogNormal::new(*mu, *sigma).expect("validated").sample(rng),
            ParamDist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            ParamDist::Gamma { shape, scale } => Gamma::new(*shape, *scale).expect("validated").sample(rng),
            ParamDist::Discrete { values, probs } => {
                let total: f64 = probs.iter().sum();
                let u = rng.random::<f64>() * total;
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                *values.iter().zip(probs).rev().find(|(_, p)| **p > 0.0).expect("validated").0
            }
        }
    }
}

/// Base measure `α/|α|` on `Θ` or `Θ × Φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseMeasure {
    pub theta: ParamDist,
    /// Independent `φ` component for joint `(θ, φ)` atoms.
    #[serde(default)]
    pub phi: Option<ParamDist>,
}

impl BaseMeasure {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, Option<f64>) {
        let t = self.theta.sample(rng);
        (t, self.phi.as_ref().map(|p| p.sample(rng)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DPSpec {
    pub base: BaseMeasure,
    pub concentration: f64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

impl DPSpec {
    pub fn new(base: BaseMeasure, concentration: f64) -> Result<Self> {
        let dp = DPSpec {
            base,
            concentration,
            truncation: DEFAULT_TRUNCATION,
        };
        dp.validate()?;
        Ok(dp)
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.concentration;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("concentration must be positive, got {c}")));
        }
        if self.truncation == 0 {
            return Err(Error::Domain("truncation must be at least 1".into()));
        }
        let r = self.expected_residual();
        if !(r < MAX_RESIDUAL) {
            return Err(Error::Domain(format!(
                "truncation {} leaves expected stick residual {r:.3e} for concentration {c}",
                self.truncation
            )));
        }
        self.base.theta.validate()?;
        if let Some(p) = &self.base.phi {
            p.validate()?;
        }
        Ok(())
    }

    /// `E Π_{j ≤ N} (1 − v_j) = (c/(1+c))^N`.
    pub fn expected_residual(&self) -> f64 {
        let c = self.concentration;
        (self.truncation as f64 * (c / (1.0 + c)).ln()).exp()
    }
}

/// Stream for draw `index` under `seed`.
pub fn draw_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// `v ~ Beta(1, c)` as `1 − U^{1/c}`.
fn beta_1c<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    // U in (0, 1]
    let u = 1.0 - rng.random::<f64>();
    -(u.ln() / c).exp_m1()
}

fn sample_atoms<R: Rng + ?Sized>(dp: &DPSpec, rng: &mut R) -> Vec<Atom> {
    let mut atoms = Vec::with_capacity(dp.truncation + 1);
    let mut left = 1.0f64;
    let mut used = 0.0f64;
    for _ in 0..dp.truncation {
        let v = beta_1c(rng, dp.concentration);
        let w = left * v;
        left *= 1.0 - v;
        let (theta, phi) = dp.base.sample(rng);
        atoms.push(Atom { theta, phi, weight: w });
        used += w;
        if left == 0.0 {
            break;
        }
    }
    let (theta, phi) = dp.base.sample(rng);
    atoms.push(Atom {
        theta,
        phi,
        weight: (1.0 - used).max(0.0),
    });
    atoms
}

/// One truncated stick-breaking draw; the leftover stick goes to an extra
/// base-measure atom so the weights sum to one.
pub fn stick_breaking_sample(dp: &DPSpec, seed: u64) -> Result<MixingDistribution> {
    dp.validate()?;
    stick_breaking_with(dp, &mut draw_rng(seed, 0))
}

pub fn stick_breaking_with<R: Rng + ?Sized>(dp: &DPSpec, rng: &mut R) -> Result<MixingDistribution> {
    MixingDistribution::discrete(sample_atoms(dp, rng))
}

/// What happened on one prior draw.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DrawRecord {
    pub index: u64,
    /// Indexing parameter for hierarchical draws.
    pub xi: Option<f64>,
    /// Shared hyper-parameter, when drawn from a hyper-prior.
    pub phi: Option<f64>,
    pub atoms: usize,
    /// `K(f₀; f_{P,φ})`; `None` after a failure.
    pub kl: Option<f64>,
    pub kl_error_bound: f64,
    pub refined: bool,
    pub error: Option<String>,
}

impl DrawRecord {
    pub fn hit(&self, epsilon: f64) -> bool {
        matches!(self.kl, Some(k) if k < epsilon)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassEstimate {
    pub epsilon: f64,
    pub hits: u64,
    pub draws: u64,
    pub fraction: f64,
    pub wilson_interval: (f64, f64),
}

impl MassEstimate {
    pub fn from_counts(epsilon: f64, hits: u64, draws: u64) -> Self {
        assert!(hits <= draws && draws > 0);
        let n = draws as f64;
        let p = hits as f64 / n;
        let z2 = WILSON_Z * WILSON_Z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = WILSON_Z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        let lo = (centre - half).clamp(0.0, 1.0).min(p);
        let hi = (centre + half).clamp(0.0, 1.0).max(p);
        MassEstimate {
            epsilon,
            hits,
            draws,
            fraction: p,
            wilson_interval: (lo, hi),
        }
    }

    pub fn from_draws(records: &[DrawRecord], epsilon: f64) -> Self {
        let hits = records.iter().filter(|r| r.hit(epsilon)).count() as u64;
        Self::from_counts(epsilon, hits, records.len() as u64)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.wilson_interval.1 - self.wilson_interval.0)
    }
}

/// Everything a prior-mass run needs besides the DP.
#[derive(Debug, Clone, Copy)]
pub struct MassProblem<'a> {
    pub f0: &'a DensitySpec,
    pub kernel: KernelSpec,
    /// Prior on a shared `φ`, independent of `P`.
    pub hyper_prior: Option<&'a ParamDist>,
    pub n_draws: u64,
    pub seed: u64,
}

impl MassProblem<'_> {
    fn validate(&self) -> Result<()> {
        if self.n_draws == 0 {
            return Err(Error::Domain("n_draws must be at least 1".into()));
        }
        if let Some(h) = self.hyper_prior {
            h.validate()?;
        }
        Ok(())
    }
}

fn evaluate_draw(
    p: &MassProblem<'_>,
    index: u64,
    dp_for: &(dyn Fn(f64) -> Result<DPSpec> + Sync),
    xi_prior: Option<&ParamDist>,
    epsilons: &[f64],
) -> DrawRecord {
    let mut rng = draw_rng(p.seed, index);
    let mut rec = DrawRecord {
        index,
        xi: None,
        phi: None,
        atoms: 0,
        kl: None,
        kl_error_bound: 0.0,
        refined: false,
        error: None,
    };
    let xi = xi_prior.map(|d| d.sample(&mut rng));
    rec.xi = xi;
    let out = dp_for(xi.unwrap_or(f64::NAN)).and_then(|dp| {
        dp.validate()?;
        let mixing = stick_breaking_with(&dp, &mut rng)?;
        rec.phi = p.hyper_prior.map(|h| h.sample(&mut rng));
        if let crate::mixture::MixingKind::Discrete(a) = &mixing.kind {
            rec.atoms = a.len();
        }
        let g = MixtureDensity::native(p.kernel, mixing, rec.phi)?;
        let coarse = kl_divergence(p.f0, &g, COARSE_TOL)?;
        let near = coarse.value.is_finite()
            && epsilons.iter().any(|e| (coarse.value - e).abs() < 10.0 * COARSE_TOL);
        if near {
            rec.refined = true;
            kl_divergence(p.f0, &g, FINE_TOL)
        } else {
            Ok(coarse)
        }
    });
    match out {
        Ok(r) => {
            rec.kl = Some(r.value);
            rec.kl_error_bound = r.abs_error_bound;
        }
        Err(e) => {
            log::warn!("prior draw {index}: {e}");
            rec.error = Some(e.to_string());
        }
    }
    rec
}

fn run_draws(
    p: &MassProblem<'_>,
    dp_for: &(dyn Fn(f64) -> Result<DPSpec> + Sync),
    xi_prior: Option<&ParamDist>,
    epsilons: &[f64],
) -> Result<Vec<DrawRecord>> {
    p.validate()?;
    if let Some(e) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::Domain(format!("epsilon must be positive, got {e}")));
    }
    Ok(crate::parallel::install(|| {
        (0..p.n_draws)
            .into_par_iter()
            .map(|i| evaluate_draw(p, i, dp_for, xi_prior, epsilons))
            .collect()
    }))
}

/// Per-draw KL values for a DP mixture prior. Draws near any of `epsilons`
/// are refined, so every `ε` in the list sees the same values.
pub fn sample_kl(p: &MassProblem<'_>, dp: &DPSpec, epsilons: &[f64]) -> Result<Vec<DrawRecord>> {
    dp.validate()?;
    run_draws(p, &|_| Ok(dp.clone()), None, epsilons)
}

/// As [`sample_kl`] with `ξ ~ xi_prior` drawn first on each stream.
pub fn sample_kl_hierarchical(
    p: &MassProblem<'_>,
    xi_prior: &ParamDist,
    dp_family: &(dyn Fn(f64) -> Result<DPSpec> + Sync),
    epsilons: &[f64],
) -> Result<Vec<DrawRecord>> {
    xi_prior.validate()?;
    run_draws(p, dp_family, Some(xi_prior), epsilons)
}

pub fn kl_mass_estimate(p: &MassProblem<'_>, dp: &DPSpec, epsilon: f64) -> Result<MassEstimate> {
    let draws = sample_kl(p, dp, &[epsilon])?;
    Ok(MassEstimate::from_draws(&draws, epsilon))
}

pub fn hierarchical_mass_estimate(
    p: &MassProblem<'_>,
    xi_prior: &ParamDist,
    dp_family: &(dyn Fn(f64) -> Result<DPSpec> + Sync),
    epsilon: f64,
) -> Result<MassEstimate> {
    let draws = sample_kl_hierarchical(p, xi_prior, dp_family, &[epsilon])?;
    Ok(MassEstimate::from_draws(&draws, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal_base() -> BaseMeasure {
        BaseMeasure {
            theta: ParamDist::Normal { mean: 0.0, sd: 1.0 },
            phi: Some(ParamDist::LogNormal { mu: 0.0, sigma: 0.5 }),
        }
    }

    #[test]
    fn tiny_concentration_gives_single_atom() {
        let dp = DPSpec::new(normal_base(), 1e-6).unwrap();
        let m = stick_breaking_sample(&dp, 7).unwrap();
        let crate::mixture::MixingKind::Discrete(atoms) = &m.kind else { panic!() };
        assert!(atoms[0].weight > 1.0 - 1e-9, "{}", atoms[0].weight);
    }

    #[test]
    fn weights_sum_to_one() {
        for (c, seed) in [(0.5, 1), (1.0, 2), (10.0, 3)] {
            let dp = DPSpec::new(normal_base(), c).unwrap();
            let mut rng = draw_rng(seed, 0);
            let atoms = sample_atoms(&dp, &mut rng);
            let s: f64 = atoms.iter().map(|a| a.weight).sum();
            assert!((s - 1.0).abs() < 1e-14, "{s}");
            assert!(atoms.last().unwrap().weight < 1e-6);
        }
    }

    #[test]
    fn truncation_residual_bound() {
        let dp = DPSpec::new(normal_base(), 10.0).unwrap();
        assert!(dp.expected_residual() < 1e-6);
        let too_big = DPSpec {
            concentration: 100.0,
            ..dp
        };
        assert!(too_big.validate().is_err());
        assert!(DPSpec::new(normal_base(), 0.0).is_err());
    }

    #[test]
    fn sampling_is_reproducible() {
        let dp = DPSpec::new(normal_base(), 2.0).unwrap();
        let a = stick_breaking_sample(&dp, 42).unwrap();
        let b = stick_breaking_sample(&dp, 42).unwrap();
        let c = stick_breaking_sample(&dp, 43).unwrap();
        let (crate::mixture::MixingKind::Discrete(a), crate::mixture::MixingKind::Discrete(b), crate::mixture::MixingKind::Discrete(c)) =
            (&a.kind, &b.kind, &c.kind)
        else {
            panic!()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn beta_one_c_mean() {
        let mut rng = draw_rng(5, 0);
        let n = 200_000;
        let c = 3.0;
        let m: f64 = (0..n).map(|_| beta_1c(&mut rng, c)).sum::<f64>() / n as f64;
        assert!((m - 0.25).abs() < 3e-3, "{m}");
    }

    #[test]
    fn wilson_interval_known_values() {
        let e = MassEstimate::from_counts(0.1, 0, 10);
        assert_eq!(e.wilson_interval.0, 0.0);
        assert!((e.wilson_interval.1 - 0.27753279986288926).abs() < 1e-12);
        let e = MassEstimate::from_counts(0.1, 10, 10);
        assert_eq!(e.wilson_interval.1, 1.0);
        let e = MassEstimate::from_counts(0.1, 50, 100);
        assert!((e.wilson_interval.0 - 0.4038315303659956).abs() < 1e-12);
        assert!((e.wilson_interval.1 - 0.5961684696340044).abs() < 1e-12);
    }

    #[test]
    fn discrete_param_dist() {
        let d = ParamDist::Discrete {
            values: vec![1.0, 2.0],
            probs: vec![0.0, 3.0],
        };
        d.validate().unwrap();
        let mut rng = draw_rng(1, 0);
        assert!((0..100).all(|_| d.sample(&mut rng) == 2.0));
        assert!(ParamDist::Discrete { values: vec![], probs: vec![] }.validate().is_err());
    }
}
