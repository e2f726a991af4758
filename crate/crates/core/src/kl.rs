//! Kullback–Leibler divergence `K(f; g) = ∫ f ln(f/g)` by adaptive quadrature.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::approximants::ApproximantSequence;
use crate::density::{DensitySpec, Support};
use crate::error::{Error, Result};
use crate::mixture::MixtureDensity;
use crate::quadrature::{scan_points, QuadError, Quadrature};
use crate::verdict::Verdict;

/// Where `g` vanishes, `f` values up to this are treated as zero mass.
/// `g` is read in log space, so a `g` below the smallest double still counts
/// as positive while `ln g` is finite.
const F_NEGLIGIBLE: f64 = 1e-12;
const SIGN_SCAN: usize = 64;

/// Anything that can report a log density.
pub trait LogDensity: Sync {
    fn ln_density(&self, x: f64) -> Result<f64>;
    fn domain(&self) -> Support;
    /// Points where the density is not smooth.
    fn kinks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl LogDensity for DensitySpec {
    fn ln_density(&self, x: f64) -> Result<f64> {
        Ok(self.ln_pdf(x))
    }

    fn domain(&self) -> Support {
        self.support()
    }

    fn kinks(&self) -> Vec<f64> {
        self.breakpoints().to_vec()
    }
}

impl LogDensity for MixtureDensity {
    fn ln_density(&self, x: f64) -> Result<f64> {
        self.ln_eval(x)
    }

    fn domain(&self) -> Support {
        self.sample_space()
    }

    fn kinks(&self) -> Vec<f64> {
        self.breakpoints()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KlResult {
    /// Nats; `+∞` when `g` vanishes where `f` has mass.
    pub value: f64,
    pub abs_error_bound: f64,
    /// Final quadrature panel boundaries.
    pub split_points: Vec<f64>,
    /// Part of the value coming from mapped infinite pieces.
    pub tail_contribution: f64,
    pub infinite: bool,
}

impl KlResult {
    fn infinite() -> Self {
        KlResult {
            value: f64::INFINITY,
            abs_error_bound: 0.0,
            split_points: Vec::new(),
            tail_contribution: f64::INFINITY,
            infinite: true,
        }
    }
}

/// `K(f; g)` over the support of `f`.
pub fn kl_divergence(f: &dyn LogDensity, g: &dyn LogDensity, tol: f64) -> Result<KlResult> {
    let (lo, hi) = f.domain().bounds();
    let mut breaks = f.kinks();
    breaks.extend(g.kinks());
    kl_divergence_on(|x| f.ln_density(x), |x| g.ln_density(x), lo, hi, &breaks, tol)
}

/// `K(f; g)` over `[lo, hi]` from log evaluators.
pub fn kl_divergence_on(
    ln_f: impl Fn(f64) -> Result<f64>,
    ln_g: impl Fn(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<KlResult> {
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    let mut first_err: Option<Error> = None;
    let mut log_ratio = |x: f64| -> Option<(f64, f64)> {
        let lf = match ln_f(x) {
            Ok(v) => v,
            Err(e) => {
                first_err.get_or_insert(e);
                return None;
            }
        };
        if lf == f64::NEG_INFINITY {
            return Some((lf, 0.0));
        }
        match ln_g(x) {
            Ok(lg) => Some((lf, lg)),
            Err(e) => {
                first_err.get_or_insert(e);
                None
            }
        }
    };

    let mut all_breaks: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi && b.is_finite())
        .collect();
    all_breaks.extend(sign_changes(&mut log_ratio, lo, hi));
    all_breaks.sort_by(f64::total_cmp);
    all_breaks.dedup();

    let integrand = |x: f64| -> f64 {
        let Some((lf, lg)) = log_ratio(x) else {
            return f64::NAN;
        };
        if lf == f64::NEG_INFINITY {
            return 0.0;
        }
        let fx = lf.exp();
        if lg == f64::NEG_INFINITY {
            return if fx > F_NEGLIGIBLE { f64::INFINITY } else { 0.0 };
        }
        fx * (lf - lg)
    };

    let q = Quadrature::with_tolerances(tol, 0.0);
    let r = q.integrate_with_breaks(integrand, lo, hi, &all_breaks);
    if let Some(e) = first_err {
        return Err(e);
    }
    match r {
        Ok(int) => {
            if int.value < -int.abs_error - tol {
                return Err(QuadError::NotConverged {
                    estimate: int.value,
                    residual: int.abs_error,
                }
                .into());
            }
            Ok(KlResult {
                value: int.value,
                abs_error_bound: int.abs_error,
                split_points: int.boundaries,
                tail_contribution: int.tail_value,
                infinite: false,
            })
        }
        Err(QuadError::Singular { .. }) => Ok(KlResult::infinite()),
        Err(e) => Err(e.into()),
    }
}

/// Roots of `ln f − ln g` found by a coarse scan and bisection.
fn sign_changes(
    log_ratio: &mut impl FnMut(f64) -> Option<(f64, f64)>,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    let mut ratio = |x: f64| -> f64 {
        match log_ratio(x) {
            Some((lf, lg)) if !lf.is_nan() && lg.is_finite() => lf - lg,
            _ => f64::NAN,
        }
    };
    let pts = scan_points(lo, hi, SIGN_SCAN);
    let vals: Vec<f64> = pts.iter().map(|&x| ratio(x)).collect();
    let mut roots = Vec::new();
    for i in 1..pts.len() {
        let (mut a, mut b) = (pts[i - 1], pts[i]);
        let (mut fa, fb) = (vals[i - 1], vals[i]);
        if fa.is_nan() || fb.is_nan() || fa == 0.0 || fa.signum() == fb.signum() {
            continue;
        }
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = ratio(mid);
            if fm.is_nan() {
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

/// Floors `f₀` at `m` and renormalizes: `f₁ = max(f₀, m)/c` with
/// `c = ∫ max(f₀, m)`.
pub fn floor_transform(f0: &DensitySpec, m: f64) -> Result<(DensitySpec, f64)> {
    if f0.support() != Support::UnitInterval {
        return Err(Error::Precondition(format!(
            "floor transform needs a density on [0, 1], `{}` lives on {:?}",
            f0.name(),
            f0.support()
        )));
    }
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Domain(format!("floor level must be positive, got {m}")));
    }
    let ln_m = m.ln();
    let mut crossing = |x: f64| Some((f0.ln_pdf(x), ln_m));
    let mut breaks = sign_changes(&mut crossing, 0.0, 1.0);
    breaks.extend(f0.breakpoints().iter().copied());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let q = Quadrature::with_tolerances(1e-13, 1e-12);
    let c = q
        .integrate_with_breaks(|x| f0.pdf(x).max(m), 0.0, 1.0, &breaks)?
        .value;
    let ln_c = c.ln();
    let base = f0.clone();
    let f1 = DensitySpec::custom(
        format!("floor({}, {m})", f0.name()),
        Support::UnitInterval,
        move |x| base.ln_pdf(x).max(ln_m) - ln_c,
        breaks,
    )?;
    Ok((f1, c))
}

#[derive(Debug, Clone, Serialize)]
pub struct Lemma4Check {
    /// `K(f₀; f)`.
    pub lhs: f64,
    /// `(c+1) ln c + K(f₁; f) + √K(f₁; f)`.
    pub rhs: f64,
    pub c: f64,
    pub kl_floored: f64,
    pub error_bound: f64,
    pub verdict: Verdict,
}

/// Checks `K(f₀; f) ≤ (c+1) ln c + K(f₁; f) + √K(f₁; f)` for the floor
/// transform `f₁` of `f₀` at level `m`.
pub fn lemma4_bound_check(
    f0: &DensitySpec,
    f: &dyn LogDensity,
    m: f64,
    tol: f64,
) -> Result<Lemma4Check> {
    let (f1, c) = floor_transform(f0, m)?;
    let lhs = kl_divergence(f0, f, tol)?;
    let floored = kl_divergence(&f1, f, tol)?;
    let k1 = floored.value.max(0.0);
    let rhs = (c + 1.0) * c.ln() + k1 + k1.sqrt();
    let error_bound = 2.0 * (lhs.abs_error_bound + floored.abs_error_bound);
    let verdict = if lhs.infinite || floored.infinite {
        Verdict::Indeterminate
    } else {
        Verdict::from_bool(lhs.value <= rhs + error_bound)
    };
    Ok(Lemma4Check {
        lhs: lhs.value,
        rhs,
        c,
        kl_floored: floored.value,
        error_bound,
        verdict,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub index: f64,
    pub result: Option<KlResult>,
    /// Set when the approximant or the integral could not be computed.
    pub error: Option<String>,
    pub runtime_ms: f64,
}

impl StudyRow {
    /// The KL value, `+∞` for flagged or failed entries.
    pub fn value(&self) -> f64 {
        self.result.as_ref().map_or(f64::INFINITY, |r| r.value)
    }

    fn error_bound(&self) -> f64 {
        self.result.as_ref().map_or(f64::INFINITY, |r| r.abs_error_bound)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub family: String,
    pub f0: String,
    pub target: f64,
    pub rows: Vec<StudyRow>,
    /// Final value below `target` and the last three values non-increasing
    /// within their error bounds.
    pub converged: bool,
}

/// `K(f₀; f_index)` along `ladder`. Indices run in parallel; the rows come
/// back in ladder order.
pub fn convergence_study(
    seq: &ApproximantSequence,
    ladder: &[f64],
    tol: f64,
    target: f64,
) -> Result<ConvergenceStudy> {
    if ladder.is_empty() {
        return Err(Error::Domain("empty index ladder".into()));
    }
    if !(target > 0.0) {
        return Err(Error::Domain(format!("target must be positive, got {target}")));
    }
    let f0 = seq.reference();
    let rows: Vec<StudyRow> = crate::parallel::install(|| {
        ladder
        .par_iter()
        .map(|&index| {
            let start = Instant::now();
            let out = seq.at(index).and_then(|fm| kl_divergence(f0, &fm, tol));
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            match out {
                Ok(r) => StudyRow {
                    index,
                    result: Some(r),
                    error: None,
                    runtime_ms,
                },
                Err(e) => {
                    log::warn!("{} at index {index}: {e}", seq.family);
                    StudyRow {
                        index,
                        result: None,
                        error: Some(e.to_string()),
                        runtime_ms,
                    }
                }
            }
        })
        .collect()
    });
    let converged = study_converged(&rows, target, tol);
    Ok(ConvergenceStudy {
        family: seq.family.to_string(),
        f0: seq.f0.name().to_string(),
        target,
        rows,
        converged,
    })
}

fn study_converged(rows: &[StudyRow], target: f64, tol: f64) -> bool {
    let tail = &rows[rows.len().saturating_sub(3)..];
    let last = tail.last().expect("non-empty ladder");
    if !(last.value() < target) || tail.iter().any(|r| !r.value().is_finite()) {
        return false;
    }
    tail.windows(2).all(|w| {
        w[1].value() <= w[0].value() + w[0].error_bound() + w[1].error_bound() + tol
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximants::ApproximantSequence;
    use crate::kernels::KernelSpec;
    use crate::mixture::{Atom, MixingDistribution};

    fn kl(f: &DensitySpec, g: &DensitySpec) -> KlResult {
        kl_divergence(f, g, 1e-10).unwrap()
    }

    #[test]
    fn identical_densities() {
        let n = DensitySpec::std_normal();
        let r = kl(&n, &n);
        assert!(r.value.abs() < 1e-10);
        assert!(!r.infinite);
    }

    #[test]
    fn gaussian_shift() {
        let f = DensitySpec::std_normal();
        let g = DensitySpec::normal(1.0, 1.0).unwrap();
        let r = kl(&f, &g);
        assert!((r.value - 0.5).abs() < 1e-8, "{}", r.value);
        assert!(r.abs_error_bound <= 1e-10);
        assert!(r.tail_contribution.is_finite());
    }

    #[test]
    fn histogram_pair() {
        let f = DensitySpec::uniform();
        let atoms = vec![Atom::new(0.25, 0.25), Atom::new(0.75, 0.75)];
        let g = MixtureDensity::native(
            KernelSpec::Histogram,
            MixingDistribution::discrete(atoms).unwrap(),
            Some(2.0),
        )
        .unwrap();
        let r = kl_divergence(&f, &g, 1e-10).unwrap();
        let exact = 0.5 * 2f64.ln() - 0.5 * 1.5f64.ln();
        assert!((r.value - exact).abs() < 1e-9, "{}", r.value);
        assert!(r.split_points.iter().any(|p| (p - 0.5).abs() < 1e-12));
    }

    #[test]
    fn vanishing_g_is_infinite() {
        let f = DensitySpec::std_normal();
        let g = DensitySpec::exponential(1.0).unwrap();
        let r = kl(&f, &g);
        assert!(r.infinite);
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn sign_changes_are_split_points() {
        let f = DensitySpec::std_normal();
        let g = DensitySpec::normal(0.0, 2.0).unwrap();
        // ln f = ln g at x² = 8 ln 2 / 3.
        let root = (8.0 * 2f64.ln() / 3.0).sqrt();
        let r = kl(&f, &g);
        assert!(r.split_points.iter().any(|p| (p - root).abs() < 1e-9));
        let exact = 2f64.ln() + 1.0 / 8.0 - 0.5;
        assert!((r.value - exact).abs() < 1e-9);
    }

    #[test]
    fn bad_tolerance() {
        let n = DensitySpec::std_normal();
        assert!(kl_divergence(&n, &n, 0.0).is_err());
    }

    #[test]
    fn floor_of_uniform_is_identity() {
        let (f1, c) = floor_transform(&DensitySpec::uniform(), 0.5).unwrap();
        assert!((c - 1.0).abs() < 1e-12);
        assert!((f1.pdf(0.3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn floor_of_parabolic() {
        let (f1, c) = floor_transform(&DensitySpec::parabolic(), 0.5).unwrap();
        // Crossings of 6x(1-x) = 1/2 solve x² - x + 1/12 = 0.
        let x1 = 0.5 - (1.0f64 / 4.0 - 1.0 / 12.0).sqrt();
        let lost = 2.0 * (0.5 * x1 - (3.0 * x1 * x1 - 2.0 * x1 * x1 * x1));
        assert!((c - (1.0 + lost)).abs() < 1e-10, "c = {c}");
        assert!((c - 1.0442).abs() < 1e-3);
        assert!(f1.pdf(0.01) >= 0.5 / c - 1e-12);
        assert!(floor_transform(&DensitySpec::std_normal(), 0.1).is_err());
    }

    #[test]
    fn floor_constant_shrinks() {
        let f0 = DensitySpec::parabolic();
        let cs: Vec<f64> = [0.1, 0.01, 0.001]
            .iter()
            .map(|&m| floor_transform(&f0, m).unwrap().1)
            .collect();
        assert!(cs.windows(2).all(|w| w[1] < w[0]), "{cs:?}");
        assert!(cs[2] - 1.0 < 1e-6);
    }

    #[test]
    fn lemma4_trivial_and_parabolic() {
        let u = DensitySpec::uniform();
        let r = lemma4_bound_check(&u, &u, 0.5, 1e-10).unwrap();
        assert!(r.lhs.abs() < 1e-10);
        assert_eq!(r.verdict, Verdict::Pass);
        let r = lemma4_bound_check(&DensitySpec::parabolic(), &u, 0.5, 1e-10).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert!(r.lhs > 0.1 && r.lhs < r.rhs);
    }

    #[test]
    fn histogram_study_is_exact() {
        let seq = ApproximantSequence::new(DensitySpec::uniform(), KernelSpec::Histogram).unwrap();
        let st = convergence_study(&seq, &[2.0, 4.0, 8.0], 1e-10, 0.01).unwrap();
        assert!(st.converged);
        assert!(st.rows.iter().all(|r| r.value().abs() < 1e-12));
        assert_eq!(st.rows.iter().map(|r| r.index).collect::<Vec<_>>(), vec![2.0, 4.0, 8.0]);
    }

    #[test]
    fn study_flags_bad_rows() {
        let seq = ApproximantSequence::new(DensitySpec::uniform(), KernelSpec::Histogram).unwrap();
        let st = convergence_study(&seq, &[2.0, 2.5], 1e-10, 0.01).unwrap();
        assert!(st.rows[1].error.is_some());
        assert!(!st.converged);
        assert!(convergence_study(&seq, &[], 1e-10, 0.01).is_err());
    }
}
