//! Numeric checks of the hypotheses that the KL-support theorems place on a
//! target density and a kernel.
//!
//! Integrability of `w(x) f₀(x)` is decided from the ends of the support: the
//! slope of `ln(w f₀)` against `ln |x|` (or against the log distance to a
//! finite endpoint) is fitted on `[T, 2T]` and compared with the borderline
//! exponent `−1`. Slopes within the margin are reported as indeterminate.

use std::fmt;

use crate::density::{window_min, DensitySpec, Support, Window};
use crate::error::{Error, Result};
use crate::kernels::{BaseDensity, Coordinates, KernelSpec, LocationScaleView, ParamSpace};
use crate::mixture::{Atom, MixingDistribution, MixingKind, MixtureDensity};
use crate::quadrature::{scan_points, QuadError, Quadrature};
use crate::verdict::Verdict;

pub const ETA_SWEEP: [f64; 3] = [0.25, 0.5, 1.0];
pub const DELTA_SWEEP: [f64; 3] = [0.5, 0.1, 0.02];

/// Where tail slopes are fitted and how close to `−1` counts as undecided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailPolicy {
    /// `T`; finite endpoints are probed at distance `1/T`.
    pub truncation: f64,
    pub margin: f64,
}

impl Default for TailPolicy {
    fn default() -> Self {
        TailPolicy {
            truncation: 1e4,
            margin: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckParams {
    /// Fixed `η`; `None` sweeps [`ETA_SWEEP`].
    pub eta: Option<f64>,
    /// Fixed `δ`; `None` sweeps [`DELTA_SWEEP`].
    pub delta: Option<f64>,
    /// Search radius for `l₁`, `l₂` and grid windows.
    pub radius: f64,
    pub tail: TailPolicy,
    /// Whether the prior's weak support is declared full.
    pub prior_support_declared: bool,
    pub cm_order: usize,
    /// Target `ε` for the tail part of the equicontinuity check.
    pub epsilon: f64,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            eta: None,
            delta: None,
            radius: 100.0,
            tail: TailPolicy::default(),
            prior_support_declared: true,
            cm_order: 6,
            epsilon: 0.1,
        }
    }
}

/// How an item's verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Computed,
    /// Sampled, not exhaustive.
    Evidence,
    /// Taken from configuration.
    Declared,
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Basis::Computed => "computed",
            Basis::Evidence => "evidence",
            Basis::Declared => "declared",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Witness {
    Point { x: f64, value: f64 },
    /// The integrand behaves like `r^exponent` near `at`.
    TailExponent { at: f64, exponent: f64 },
    Difference { x: f64, order: usize, value: f64 },
    Grid { x: f64, theta: f64, value: f64 },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Witness::Point { x, value } => write!(f, "x={x:e} value={value:e}"),
            Witness::TailExponent { at, exponent } => {
                write!(f, "integrand ~ r^{exponent:.4} near x={at:e}")
            }
            Witness::Difference { x, order, value } => {
                write!(f, "order {order} difference {value:e} at x={x:e}")
            }
            Witness::Grid { x, theta, value } => {
                write!(f, "x={x:e} theta={theta:e} value={value:e}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionItem {
    pub tag: String,
    pub verdict: Verdict,
    /// Integral, radius or bound; `inf` when divergent.
    pub value: f64,
    pub detail: String,
    pub basis: Basis,
    pub witness: Option<Witness>,
}

impl ConditionItem {
    fn computed(tag: &str, verdict: Verdict, value: f64, detail: impl Into<String>) -> Self {
        ConditionItem {
            tag: tag.to_string(),
            verdict,
            value,
            detail: detail.into(),
            basis: Basis::Computed,
            witness: None,
        }
    }

    fn with_witness(mut self, w: Option<Witness>) -> Self {
        self.witness = w;
        self
    }

    fn with_basis(mut self, b: Basis) -> Self {
        self.basis = b;
        self
    }
}

/// Theorem identifiers `2..=17` of the hypothesis catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Theorem(u8);

impl Theorem {
    pub fn new(id: u8) -> Result<Self> {
        if (2..=17).contains(&id) {
            Ok(Theorem(id))
        } else {
            Err(Error::Config(format!("theorem id must be in 2..=17, got {id}")))
        }
    }

    pub fn id(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Theorem> {
        (2..=17).map(Theorem)
    }

    pub fn accepts(self, kernel: &KernelSpec) -> bool {
        use KernelSpec as K;
        match self.0 {
            2 | 3 => kernel.to_location_scale().is_ok(),
            4 => matches!(kernel, K::SkewNormal { .. } | K::MvNormal { dim: 1 }),
            5 => matches!(kernel, K::MvNormal { .. }),
            6 => matches!(kernel, K::DoubleExponential),
            7 => matches!(kernel, K::Logistic),
            8 => matches!(kernel, K::StudentT { .. }),
            9 => matches!(kernel, K::Histogram),
            10 => matches!(kernel, K::Triangular),
            11 => matches!(kernel, K::Bernstein),
            12 => matches!(kernel, K::LogNormal),
            13 => matches!(kernel, K::Weibull),
            14 => matches!(kernel, K::Gamma),
            15 => matches!(kernel, K::InverseGamma),
            16 => matches!(kernel, K::Exponential),
            17 => matches!(kernel, K::ScaledUniform),
            _ => false,
        }
    }

    /// The theorem whose hypotheses are specific to `kernel`.
    pub fn for_kernel(kernel: &KernelSpec) -> Option<Theorem> {
        (4..=17).map(Theorem).find(|t| t.accepts(kernel))
    }

    fn target_support(self) -> Option<Support> {
        match self.0 {
            4..=8 => Some(Support::RealLine),
            9..=11 => Some(Support::UnitInterval),
            12..=17 => Some(Support::PositiveHalfLine),
            _ => None,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "theorem {}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub theorem: Option<Theorem>,
    pub items: Vec<ConditionItem>,
    pub l1: Option<f64>,
    pub l2: Option<f64>,
    pub eta_used: Option<f64>,
    pub delta_used: Option<f64>,
}

impl ConditionReport {
    fn new(theorem: Option<Theorem>) -> Self {
        ConditionReport {
            theorem,
            items: Vec::new(),
            l1: None,
            l2: None,
            eta_used: None,
            delta_used: None,
        }
    }

    /// Pass iff every item passes; any failure dominates.
    pub fn verdict(&self) -> Verdict {
        self.items.iter().fold(Verdict::Pass, |acc, i| acc.and(i.verdict))
    }

    pub fn item(&self, tag: &str) -> Option<&ConditionItem> {
        self.items.iter().find(|i| i.tag == tag)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionItem> {
        self.items.iter().filter(|i| i.verdict == Verdict::Fail)
    }
}

/// Named weights `w` for integrability checks of `w f₀`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    /// `|x|^p`.
    AbsPower(f64),
    /// `log₊ |x|`.
    LogPlusAbs,
    /// `|log x|^p`.
    AbsLogPower(f64),
    /// `exp(2 |log x|^{1+η})`.
    ExpLogPower(f64),
    /// `max(x^{−η−2}, x^{η+2})`.
    MinMaxPower(f64),
    /// `|log f₀(x)|`.
    Entropy,
    /// `|log(x f₀(x))|`.
    LogXDensity,
    /// `log(f₀(x)/φ_δ(x))`.
    LocalRatio { delta: f64, window: Window },
}

impl Weight {
    /// `ln w(x)` given `ln f₀(x)`.
    fn ln_weight(&self, f0: &DensitySpec, x: f64, ln_f: f64) -> f64 {
        match *self {
            Weight::AbsPower(p) => p * x.abs().ln(),
            Weight::LogPlusAbs => {
                let a = x.abs();
                if a > 1.0 {
                    a.ln().ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Weight::AbsLogPower(p) => p * x.ln().abs().ln(),
            Weight::ExpLogPower(eta) => 2.0 * x.ln().abs().powf(1.0 + eta),
            Weight::MinMaxPower(eta) => (eta + 2.0) * x.ln().abs(),
            Weight::Entropy => ln_f.abs().ln(),
            Weight::LogXDensity => (x.ln() + ln_f).abs().ln(),
            Weight::LocalRatio { delta, window } => match f0.ln_phi_delta(x, delta, window) {
                Ok(lp) => (ln_f - lp).max(0.0).ln(),
                Err(_) => f64::NAN,
            },
        }
    }

    fn kinks(&self) -> &'static [f64] {
        match self {
            Weight::AbsPower(_) | Weight::LogPlusAbs => &[-1.0, 0.0, 1.0],
            Weight::AbsLogPower(_) | Weight::ExpLogPower(_) | Weight::MinMaxPower(_) => &[1.0],
            _ => &[],
        }
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Weight::AbsPower(p) => write!(f, "|x|^{p}"),
            Weight::LogPlusAbs => f.write_str("log+|x|"),
            Weight::AbsLogPower(p) => write!(f, "|log x|^{p}"),
            Weight::ExpLogPower(eta) => write!(f, "exp(2|log x|^{})", 1.0 + eta),
            Weight::MinMaxPower(eta) => write!(f, "max(x^-{0}, x^{0})", eta + 2.0),
            Weight::Entropy => f.write_str("|log f0|"),
            Weight::LogXDensity => f.write_str("|log(x f0)|"),
            Weight::LocalRatio { delta, window } => {
                let w = match window {
                    Window::TwoSided => "two-sided",
                    Window::OneSided => "one-sided",
                };
                write!(f, "log(f0/phi_delta), delta={delta}, {w}")
            }
        }
    }
}

/// Outcome of one integrability check.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    /// `∫ w f₀`; `inf` when the tail is certified divergent.
    pub value: f64,
    pub verdict: Verdict,
    pub detail: String,
    pub witness: Option<Witness>,
}

impl MomentCheck {
    fn into_item(self, tag: &str) -> ConditionItem {
        ConditionItem::computed(tag, self.verdict, self.value, self.detail).with_witness(self.witness)
    }
}

/// `∫ w(x) f₀(x) dx < ∞` with the default tail policy.
pub fn check_moment(f0: &DensitySpec, weight: &Weight) -> MomentCheck {
    check_moment_with(f0, weight, &TailPolicy::default())
}

pub fn check_moment_with(f0: &DensitySpec, weight: &Weight, policy: &TailPolicy) -> MomentCheck {
    let ln_w = |x: f64| weight.ln_weight(f0, x, f0.ln_pdf(x));
    let mut check = certify(f0, &ln_w, weight.kinks(), policy);
    check.detail = format!("{weight}: {}", check.detail);
    check
}

#[derive(Debug, Clone, Copy)]
enum End {
    /// `x → sign · ∞`.
    Infinite(f64),
    /// `x → at` from the side `dir`.
    Finite { at: f64, dir: f64 },
}

struct TailFit {
    verdict: Verdict,
    note: String,
    witness: Option<Witness>,
}

fn fit_end(ln_q: &dyn Fn(f64) -> f64, end: End, policy: &TailPolicy) -> TailFit {
    const N: usize = 9;
    let t = policy.truncation;
    let pts: Vec<(f64, f64, f64)> = (0..N)
        .map(|k| {
            let s = 2f64.powf(k as f64 / (N - 1) as f64);
            let (x, r) = match end {
                End::Infinite(sign) => (sign * t * s, t * s),
                End::Finite { at, dir } => (at + dir * s / t, s / t),
            };
            (x, r.ln(), ln_q(x))
        })
        .collect();
    let anchor = match end {
        End::Infinite(sign) => sign * t,
        End::Finite { at, .. } => at,
    };
    if let Some(p) = pts.iter().find(|p| p.2.is_nan()) {
        return TailFit {
            verdict: Verdict::Indeterminate,
            note: format!("integrand undefined at x={:e}", p.0),
            witness: None,
        };
    }
    if let Some(p) = pts.iter().find(|p| p.2 == f64::INFINITY) {
        return TailFit {
            verdict: Verdict::Fail,
            note: format!("integrand infinite at x={:e}", p.0),
            witness: Some(Witness::Point {
                x: p.0,
                value: f64::INFINITY,
            }),
        };
    }
    if pts.iter().any(|p| p.2 == f64::NEG_INFINITY) {
        return TailFit {
            verdict: Verdict::Pass,
            note: format!("vanishes near x={anchor:e}"),
            witness: None,
        };
    }
    let n = N as f64;
    let mu = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.2).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.1 - mu) * (p.2 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.1 - mu) * (p.1 - mu)).sum();
    let slope = sxy / sxx;
    let m = policy.margin;
    let (pass, fail) = match end {
        End::Infinite(_) => (slope < -1.0 - m, slope > -1.0 + m),
        End::Finite { .. } => (slope > -1.0 + m, slope < -1.0 - m),
    };
    let verdict = if pass {
        Verdict::Pass
    } else if fail {
        Verdict::Fail
    } else {
        Verdict::Indeterminate
    };
    TailFit {
        verdict,
        note: format!("slope {slope:.4} near x={anchor:e}"),
        witness: (verdict == Verdict::Fail).then_some(Witness::TailExponent {
            at: anchor,
            exponent: slope,
        }),
    }
}

/// Certifies `∫ exp(ln f₀ + ln_w) < ∞` over the support of `f₀`.
fn certify(
    f0: &DensitySpec,
    ln_w: &dyn Fn(f64) -> f64,
    extra_breaks: &[f64],
    policy: &TailPolicy,
) -> MomentCheck {
    let ln_q = |x: f64| {
        let lf = f0.ln_pdf(x);
        if lf == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            lf + ln_w(x)
        }
    };
    let ends = match f0.support() {
        Support::RealLine => [End::Infinite(-1.0), End::Infinite(1.0)],
        Support::UnitInterval => [
            End::Finite { at: 0.0, dir: 1.0 },
            End::Finite { at: 1.0, dir: -1.0 },
        ],
        Support::PositiveHalfLine => [End::Finite { at: 0.0, dir: 1.0 }, End::Infinite(1.0)],
    };
    let fits: Vec<TailFit> = ends.iter().map(|e| fit_end(&ln_q, *e, policy)).collect();
    let notes = fits.iter().map(|f| f.note.as_str()).collect::<Vec<_>>().join("; ");
    if let Some(bad) = fits.iter().find(|f| f.verdict == Verdict::Fail) {
        return MomentCheck {
            value: f64::INFINITY,
            verdict: Verdict::Fail,
            detail: format!("divergent tail ({notes})"),
            witness: bad.witness,
        };
    }
    let tails_ok = fits.iter().all(|f| f.verdict == Verdict::Pass);

    let (a, b) = f0.support().bounds();
    let mut breaks: Vec<f64> = f0.breakpoints().to_vec();
    breaks.extend(extra_breaks.iter().copied().filter(|x| *x > a && *x < b));
    let q = Quadrature::with_tolerances(1e-10, 1e-6);
    let (value, quad_note, quad_ok) =
        match q.integrate_with_breaks(|x| ln_q(x).exp(), a, b, &breaks) {
            Ok(r) => (r.value, format!("quadrature error {:.1e}", r.abs_error), true),
            Err(QuadError::NotConverged { estimate, residual }) if estimate.is_finite() && residual.is_finite() => {
                (estimate, format!("quadrature residual {residual:.1e}"), true)
            }
            Err(e) => (f64::NAN, format!("quadrature: {e}"), false),
        };
    let verdict = if tails_ok && quad_ok {
        Verdict::Pass
    } else {
        Verdict::Indeterminate
    };
    MomentCheck {
        value,
        verdict,
        detail: format!("{quad_note}; {notes}"),
        witness: None,
    }
}

/// First passing check of a parameter sweep, else the first indeterminate,
/// else the first failure.
fn sweep(values: &[f64], mut run: impl FnMut(f64) -> MomentCheck) -> (MomentCheck, f64) {
    let mut best: Option<(MomentCheck, f64)> = None;
    for &v in values {
        let c = run(v);
        if c.verdict == Verdict::Pass {
            return (c, v);
        }
        let better = match &best {
            None => true,
            Some((b, _)) => b.verdict == Verdict::Fail && c.verdict == Verdict::Indeterminate,
        };
        if better {
            best = Some((c, v));
        }
    }
    best.expect("non-empty sweep")
}

fn etas(params: &CheckParams) -> Vec<f64> {
    params.eta.map_or_else(|| ETA_SWEEP.to_vec(), |e| vec![e])
}

fn deltas(params: &CheckParams) -> Vec<f64> {
    params.delta.map_or_else(|| DELTA_SWEEP.to_vec(), |d| vec![d])
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi == lo {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn declared(tag: &str, declared: bool, what: &str) -> ConditionItem {
    let (verdict, detail) = if declared {
        (Verdict::Pass, format!("{what}: declared, not verified"))
    } else {
        (Verdict::Indeterminate, format!("{what}: not declared"))
    };
    ConditionItem::computed(tag, verdict, f64::NAN, detail).with_basis(Basis::Declared)
}

// Kernel-side conditions.

/// `ln |ln χ(z)|`, finite where `ln χ` itself overflows.
fn ln_abs_ln_chi(base: &BaseDensity, z: f64) -> f64 {
    match base {
        BaseDensity::Gumbel if z > 30.0 => z + (-z * (-z).exp()).ln_1p(),
        _ => base.ln_chi(z).abs().ln(),
    }
}

fn ray_directions(d: usize) -> Vec<Vec<f64>> {
    if d == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let mut e1 = vec![0.0; d];
    e1[0] = 1.0;
    let diag = vec![1.0 / (d as f64).sqrt(); d];
    let neg = |v: &Vec<f64>| v.iter().map(|c| -c).collect::<Vec<_>>();
    vec![neg(&e1), neg(&diag), e1, diag]
}

fn scaled(dir: &[f64], r: f64) -> Vec<f64> {
    dir.iter().map(|c| c * r).collect()
}

fn max_jump(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> (f64, f64) {
    let mut prev = f(a);
    let mut worst = (0.0, a);
    for i in 1..=n {
        let x = a + (b - a) * i as f64 / n as f64;
        let v = f(x);
        let d = (v - prev).abs();
        if !(d <= worst.0) {
            worst = (d, x);
        }
        prev = v;
    }
    worst
}

/// B1, B2, B3 and B9 for a base density, scanning rays out to `radius`.
fn kernel_items(view: &LocationScaleView, radius: f64) -> (Vec<ConditionItem>, Option<f64>, Option<f64>) {
    const STEPS: usize = 100_000;
    let base = view.base;
    let d = base.dimension();
    let dirs = ray_directions(d);
    let step = radius / STEPS as f64;
    let mut items = Vec::new();

    // B1
    let mut sup = f64::NEG_INFINITY;
    let mut zero_at = None;
    for dir in &dirs {
        for i in (0..=STEPS).step_by(5) {
            let z = scaled(dir, step * i as f64);
            let l = base.ln_chi_vec(&z);
            if !(l > f64::NEG_INFINITY) {
                zero_at.get_or_insert(z[0]);
            }
            sup = sup.max(l);
        }
    }
    let along = |t: f64| base.ln_chi_vec(&scaled(&dirs[0], t)).exp();
    let (j_coarse, _) = max_jump(&along, -10.0, 10.0, 1000);
    let (j_fine, jx) = max_jump(&along, -10.0, 10.0, 8000);
    let continuous = j_fine <= 1e-12 || j_fine <= 0.9 * j_coarse;
    let b1 = if let Some(z) = zero_at {
        ConditionItem::computed("B1", Verdict::Fail, sup.exp(), "base density vanishes")
            .with_witness(Some(Witness::Point { x: z, value: 0.0 }))
    } else if !sup.is_finite() || !continuous {
        ConditionItem::computed(
            "B1",
            Verdict::Fail,
            sup.exp(),
            format!("unbounded or discontinuous base density (max jump {j_fine:e})"),
        )
        .with_witness(Some(Witness::Point { x: jx, value: j_fine }))
    } else {
        ConditionItem::computed(
            "B1",
            Verdict::Pass,
            sup.exp(),
            format!("positive on radius {radius}, sup {:.6e}", sup.exp()),
        )
    };
    items.push(b1);

    // B2: χ non-increasing along each ray beyond l₁.
    let mut last_rise = 0.0f64;
    for dir in &dirs {
        let mut prev = base.ln_chi_vec(&scaled(dir, 0.0));
        for i in 1..=STEPS {
            let r = step * i as f64;
            let l = base.ln_chi_vec(&scaled(dir, r));
            if l > prev + 1e-12 * prev.abs().max(1.0) {
                last_rise = last_rise.max(r);
            }
            prev = l;
        }
    }
    let l1 = (last_rise + step).max(step);
    let b2 = if l1 < radius {
        ConditionItem::computed("B2", Verdict::Pass, l1, format!("l1 = {l1:.6}"))
    } else {
        ConditionItem::computed("B2", Verdict::Fail, f64::INFINITY, format!("no l1 within radius {radius}"))
            .with_witness(Some(Witness::Point { x: last_rise, value: f64::NAN }))
    };
    items.push(b2);

    // B3: Σ z_i χ'_i/χ < −1 beyond l₂.
    let mut last_bad = 0.0f64;
    let mut bad_value = f64::NAN;
    for dir in &dirs {
        for i in 1..=STEPS {
            let r = step * i as f64;
            match base.radial_score(&scaled(dir, r)) {
                Ok(s) if s < -1.0 => {}
                Ok(s) => {
                    if r >= last_bad {
                        last_bad = r;
                        bad_value = s;
                    }
                }
                Err(_) => {}
            }
        }
    }
    let l2 = last_bad + step;
    let b3 = if l2 < radius {
        ConditionItem::computed("B3", Verdict::Pass, l2, format!("l2 = {l2:.6}"))
    } else {
        ConditionItem::computed("B3", Verdict::Fail, f64::INFINITY, format!("no l2 within radius {radius}"))
            .with_witness(Some(Witness::Point { x: last_bad, value: bad_value }))
    };
    items.push(b3);

    let b9 = if d == 1 {
        ConditionItem::computed("B9", Verdict::Pass, f64::NAN, "not required in one dimension")
    } else {
        let mut worst = f64::NEG_INFINITY;
        for dir in &dirs {
            let rs = linspace(radius / 2.0, radius, 9);
            let pts: Vec<(f64, f64)> = rs
                .iter()
                .map(|r| (r.ln(), base.ln_chi_vec(&scaled(dir, *r))))
                .collect();
            let slope = if pts.iter().any(|p| !p.1.is_finite()) {
                f64::NEG_INFINITY
            } else {
                (pts[8].1 - pts[0].1) / (pts[8].0 - pts[0].0)
            };
            worst = worst.max(slope);
        }
        let v = Verdict::from_bool(worst < -(d as f64));
        ConditionItem::computed("B9", v, worst, format!("log-log decay slope {worst:.4} vs -{d}"))
    };
    items.push(b9);
    (items, Some(l1), (l2 < radius).then_some(l2))
}

// Target-side conditions.

fn grid_window(support: Support, radius: f64) -> (f64, f64) {
    let (a, b) = support.bounds();
    (a.max(-radius), b.min(radius))
}

/// `0 < f₀ ≤ M` on the interior of the support (within `radius`).
fn positivity_bound(tag: &str, f0: &DensitySpec, radius: f64) -> ConditionItem {
    let (a, b) = f0.support().bounds();
    let (lo, hi) = grid_window(f0.support(), radius);
    let interior: Vec<f64> = linspace(lo, hi, 4097)
        .into_iter()
        .filter(|x| *x > a && *x < b)
        .collect();
    if let Some(x) = interior.iter().find(|x| !(f0.ln_pdf(**x) > f64::NEG_INFINITY)) {
        return ConditionItem::computed(tag, Verdict::Fail, 0.0, "density vanishes in the interior")
            .with_witness(Some(Witness::Point { x: *x, value: 0.0 }));
    }
    let sup = interior
        .iter()
        .copied()
        .chain(scan_points(a, b, 4096))
        .chain(f0.breakpoints().iter().copied())
        .map(|x| f0.pdf(x))
        .fold(0.0, f64::max);
    match f0.upper_bound() {
        Some(m) if sup <= m * (1.0 + 1e-12) => {
            ConditionItem::computed(tag, Verdict::Pass, m, format!("declared bound {m}, grid max {sup:.6e}"))
        }
        Some(m) => ConditionItem::computed(tag, Verdict::Fail, sup, format!("grid max exceeds declared bound {m}")),
        None if sup.is_finite() => {
            ConditionItem::computed(tag, Verdict::Pass, sup, format!("grid max {sup:.6e}"))
        }
        None => ConditionItem::computed(tag, Verdict::Fail, sup, "density unbounded on grid"),
    }
}

/// Continuity by the maximal jump on refining uniform grids.
pub fn check_continuity(f0: &DensitySpec, radius: f64) -> ConditionItem {
    let (lo, hi) = grid_window(f0.support(), radius.min(50.0));
    let f = |x: f64| f0.pdf(x);
    let (j1, _) = max_jump(&f, lo, hi, 8_000);
    let (j2, x2) = max_jump(&f, lo, hi, 64_000);
    let tag = "continuity";
    if !j2.is_finite() {
        return ConditionItem::computed(tag, Verdict::Fail, j2, "density not finite on the grid")
            .with_witness(Some(Witness::Point { x: x2, value: f(x2) }));
    }
    if j2 <= 1e-10 || j2 <= 0.9 * j1 {
        ConditionItem::computed(tag, Verdict::Pass, j2, format!("max jump {j1:.3e} -> {j2:.3e}"))
    } else {
        ConditionItem::computed(tag, Verdict::Fail, j2, format!("jump does not shrink ({j1:.3e} -> {j2:.3e})"))
            .with_witness(Some(Witness::Point { x: x2, value: j2 }))
    }
}

/// Non-increasing density on a log-spaced grid over the support.
pub fn check_decreasing(f0: &DensitySpec) -> ConditionItem {
    let (a, b) = f0.support().bounds();
    let grid: Vec<f64> = match f0.support() {
        Support::PositiveHalfLine => std::iter::once(0.0)
            .chain((0..=4096).map(|i| 10f64.powf(-8.0 + 12.0 * i as f64 / 4096.0)))
            .collect(),
        _ => scan_points(a, b, 4096),
    };
    let mut prev: Option<(f64, f64)> = None;
    let mut worst: Option<(f64, f64)> = None;
    for x in grid {
        let l = f0.ln_pdf(x);
        if l.is_nan() || l == f64::INFINITY {
            continue;
        }
        if let Some((_, pl)) = prev {
            let rise = l - pl;
            if rise > 1e-12 * pl.abs().max(1.0) && worst.map_or(true, |w| rise > w.1) {
                worst = Some((x, rise));
            }
        }
        prev = Some((x, l));
    }
    match worst {
        None => ConditionItem::computed("decreasing", Verdict::Pass, 0.0, "non-increasing on grid"),
        Some((x, rise)) => ConditionItem::computed(
            "decreasing",
            Verdict::Fail,
            rise,
            format!("largest rise of the log density {rise:.3e}"),
        )
        .with_witness(Some(Witness::Point { x, value: f0.pdf(x) })),
    }
}

/// 64 log-spaced points on `[1e-3, 1e3]`.
pub fn default_cm_grid() -> Vec<f64> {
    (0..64).map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 63.0)).collect()
}

/// Falsification test for complete monotonicity of the survival function:
/// `(−1)^n Δ_h^n F̄₀(x) ≥ −tol` for `n ≤ max_order` at every grid point.
pub fn check_completely_monotone(
    f0: &DensitySpec,
    max_order: usize,
    grid: &[f64],
) -> Result<ConditionItem> {
    if f0.support() != Support::PositiveHalfLine {
        return Err(Error::Precondition(
            "complete monotonicity is checked for half-line densities only".into(),
        ));
    }
    if max_order > 8 {
        return Err(Error::Precondition(format!("max_order must be at most 8, got {max_order}")));
    }
    let noise = if f0.has_analytic_cdf() { 0.0 } else { 1e-12 };
    for n in 0..=max_order {
        for &x in grid {
            let h = 0.5 * x / max_order.max(1) as f64;
            let vals: Vec<f64> = (0..=n).map(|k| f0.survival(x + k as f64 * h)).collect();
            let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut diff = 0.0;
            let mut binom = 1.0;
            for (k, v) in vals.iter().enumerate() {
                let sign = if (n - k) % 2 == 0 { 1.0 } else { -1.0 };
                diff += sign * binom * v;
                binom = binom * (n - k) as f64 / (k + 1) as f64;
            }
            let signed = if n % 2 == 0 { diff } else { -diff };
            let tol = 2f64.powi(n as i32) * (16.0 * f64::EPSILON * scale + noise);
            if !(signed >= -tol) {
                return Ok(ConditionItem::computed(
                    "completely_monotone",
                    Verdict::Fail,
                    signed,
                    format!("sign alternation breaks at order {n}"),
                )
                .with_witness(Some(Witness::Difference {
                    x,
                    order: n,
                    value: signed,
                })));
            }
        }
    }
    Ok(ConditionItem::computed(
        "completely_monotone",
        Verdict::Pass,
        max_order as f64,
        format!("orders 0..={max_order} alternate on {} points (finite check)", grid.len()),
    )
    .with_basis(Basis::Evidence))
}

fn local_ratio_item(
    tag: &str,
    f0: &DensitySpec,
    params: &CheckParams,
    window: Window,
) -> (ConditionItem, f64) {
    let (c, delta) = sweep(&deltas(params), |delta| {
        check_moment_with(f0, &Weight::LocalRatio { delta, window }, &params.tail)
    });
    (c.into_item(tag), delta)
}

fn eta_moment_item(
    tag: &str,
    f0: &DensitySpec,
    params: &CheckParams,
    weight: impl Fn(f64) -> Weight,
) -> (ConditionItem, f64) {
    let (c, eta) = sweep(&etas(params), |eta| check_moment_with(f0, &weight(eta), &params.tail));
    let mut item = c.into_item(tag);
    item.detail = format!("eta={eta}: {}", item.detail);
    (item, eta)
}

/// B7: both log-kernel integrals finite for some `η`.
fn b7_item(target: &DensitySpec, view: &LocationScaleView, params: &CheckParams) -> (ConditionItem, f64) {
    let base = view.base;
    let shifts = [(0.0, 1.0), (1.0, 0.5), (-2.0, 3.0)];
    let mut shifted = MomentCheck {
        value: 0.0,
        verdict: Verdict::Pass,
        detail: String::new(),
        witness: None,
    };
    for (a, b) in shifts {
        let ln_w = move |x: f64| ln_abs_ln_chi(&base, (x - a) / b);
        let c = certify(target, &ln_w, &[], &params.tail);
        shifted.value = shifted.value.max(c.value);
        if c.verdict != Verdict::Pass && shifted.verdict == Verdict::Pass {
            shifted.verdict = c.verdict;
            shifted.witness = c.witness;
            shifted.detail = format!("|log chi((x-{a})/{b})|: {}", c.detail);
        }
    }
    let (stretch, eta) = sweep(&etas(params), |eta| {
        let ln_w = move |x: f64| ln_abs_ln_chi(&base, 2.0 * x * x.abs().powf(eta));
        certify(target, &ln_w, &[0.0], &params.tail)
    });
    let verdict = stretch.verdict.and(shifted.verdict);
    let witness = if stretch.verdict != Verdict::Pass {
        stretch.witness
    } else {
        shifted.witness
    };
    let detail = format!(
        "eta={eta}: |log chi(2x|x|^eta)| {} ({}); shifted kernels {}{}",
        stretch.verdict,
        stretch.detail,
        shifted.verdict,
        if shifted.detail.is_empty() {
            String::new()
        } else {
            format!(" ({})", shifted.detail)
        }
    );
    let value = if verdict == Verdict::Fail {
        f64::INFINITY
    } else {
        stretch.value.max(shifted.value)
    };
    (
        ConditionItem::computed("B7", verdict, value, detail).with_witness(witness),
        eta,
    )
}

fn view_target(f0: &DensitySpec, view: &LocationScaleView) -> Result<DensitySpec> {
    match view.coordinates {
        Coordinates::Log => f0.log_transform(),
        Coordinates::Native if f0.support() == Support::RealLine => Ok(f0.clone()),
        Coordinates::Native => Err(Error::Precondition(format!(
            "location-scale checks need a density on the real line, `{}` lives on {:?}",
            f0.name(),
            f0.support()
        ))),
    }
}

/// B1 to B9 for a location-scale kernel and a target density. Log-coordinate
/// views are checked against `e^y f₀(e^y)`.
pub fn check_location_scale(
    f0: &DensitySpec,
    view: &LocationScaleView,
    params: &CheckParams,
) -> Result<ConditionReport> {
    if view.dimension() != 1 {
        return Err(Error::Precondition(
            "targets are univariate; use a one-dimensional view".into(),
        ));
    }
    let target = view_target(f0, view)?;
    let mut report = ConditionReport::new(None);
    let (mut kernel, l1, l2) = kernel_items(view, params.radius);
    let b9 = kernel.pop().expect("B9 item");
    report.items.extend(kernel);
    report.l1 = l1;
    report.l2 = l2;
    report.items.push(positivity_bound("B4", &target, params.radius));
    report
        .items
        .push(check_moment_with(&target, &Weight::Entropy, &params.tail).into_item("B5"));
    let (b6, delta) = local_ratio_item("B6", &target, params, Window::TwoSided);
    report.items.push(b6);
    report.delta_used = Some(delta);
    let (b7, eta) = b7_item(&target, view, params);
    report.items.push(b7);
    report.eta_used = Some(eta);
    report
        .items
        .push(declared("B8", params.prior_support_declared, "full weak support of the prior"));
    report.items.push(b9);
    Ok(report)
}

/// Hypothesis list of one theorem for `(f₀, kernel)`.
pub fn check_theorem(
    theorem: Theorem,
    f0: &DensitySpec,
    kernel: &KernelSpec,
    params: &CheckParams,
) -> Result<ConditionReport> {
    if !theorem.accepts(kernel) {
        return Err(Error::Incompatible {
            theorem: theorem.id(),
            kernel: kernel.name().to_string(),
        });
    }
    if let Some(s) = theorem.target_support() {
        if f0.support() != s {
            return Err(Error::Precondition(format!(
                "{theorem} needs a target on {s:?}, `{}` lives on {:?}",
                f0.name(),
                f0.support()
            )));
        }
    }
    let id = theorem.id();
    if id <= 3 {
        let view = kernel.to_location_scale()?;
        let mut r = check_location_scale(f0, &view, params)?;
        r.theorem = Some(theorem);
        return Ok(r);
    }
    let mut r = ConditionReport::new(Some(theorem));
    let tail = &params.tail;
    match id {
        4..=8 => {
            if kernel.dimension() != 1 {
                return Err(Error::Precondition(
                    "targets are univariate; multivariate normal checks use dim = 1".into(),
                ));
            }
            let view = kernel.to_location_scale()?;
            let (kernel_side, l1, l2) = kernel_items(&view, params.radius);
            r.items.extend(kernel_side.into_iter().take(3));
            r.l1 = l1;
            r.l2 = l2;
            r.items.push(check_continuity(f0, params.radius));
            r.items.push(positivity_bound("B4", f0, params.radius));
            r.items.push(check_moment_with(f0, &Weight::Entropy, tail).into_item("B5"));
            let (b6, delta) = local_ratio_item("B6", f0, params, Window::TwoSided);
            r.items.push(b6);
            r.delta_used = Some(delta);
            if id == 8 {
                r.items.push(check_moment_with(f0, &Weight::LogPlusAbs, tail).into_item("moment"));
            } else {
                let power = |eta: f64| {
                    if id <= 5 {
                        Weight::AbsPower(2.0 * (1.0 + eta))
                    } else {
                        Weight::AbsPower(1.0 + eta)
                    }
                };
                let (item, eta) = eta_moment_item("moment", f0, params, power);
                r.items.push(item);
                r.eta_used = Some(eta);
            }
            r.items.push(declared("B8", params.prior_support_declared, "full weak support of the prior"));
        }
        9..=11 => {
            r.items.push(check_continuity(f0, params.radius));
            r.items.push(declared(
                "prior_support",
                params.prior_support_declared,
                "weak support contains all mixing measures",
            ));
        }
        12 | 13 => {
            r.items.push(check_continuity(f0, params.radius));
            r.items.push(positivity_bound("positivity", f0, params.radius));
            if id == 12 {
                r.items
                    .push(check_moment_with(f0, &Weight::LogXDensity, tail).into_item("log_x_density"));
            } else {
                r.items.push(check_moment_with(f0, &Weight::Entropy, tail).into_item("B5"));
            }
            // The local-infimum condition is stated for e^y f₀(e^y); on the
            // half line itself it fails whenever f₀(0) = 0.
            let (b6, delta) = local_ratio_item("B6", &f0.log_transform()?, params, Window::TwoSided);
            r.items.push(b6);
            r.delta_used = Some(delta);
            let (item, eta) = if id == 12 {
                eta_moment_item("log_moment", f0, params, |eta| Weight::AbsLogPower(2.0 * (1.0 + eta)))
            } else {
                eta_moment_item("exp_log_moment", f0, params, Weight::ExpLogPower)
            };
            r.items.push(item);
            r.eta_used = Some(eta);
            let tag = if id == 12 { "B8" } else { "prior_support" };
            r.items.push(declared(tag, params.prior_support_declared, "full weak support of the prior"));
        }
        14 | 15 => {
            r.items.push(check_continuity(f0, params.radius));
            r.items.push(positivity_bound("B4", f0, params.radius));
            r.items.push(check_moment_with(f0, &Weight::Entropy, tail).into_item("B5"));
            let (b6, delta) = local_ratio_item("B6*", f0, params, Window::OneSided);
            r.items.push(b6);
            r.delta_used = Some(delta);
            let (b7, eta) = eta_moment_item("B7*", f0, params, Weight::MinMaxPower);
            r.items.push(b7);
            r.eta_used = Some(eta);
            r.items.push(declared("prior_support", params.prior_support_declared, "full weak support of the prior"));
        }
        16 => {
            r.items.push(check_continuity(f0, params.radius));
            r.items.push(check_moment_with(f0, &Weight::AbsPower(1.0), tail).into_item("mean"));
            r.items.push(check_moment_with(f0, &Weight::Entropy, tail).into_item("abs_log_density"));
            r.items.push(check_completely_monotone(f0, params.cm_order, &default_cm_grid())?);
            r.items.push(declared("prior_support", params.prior_support_declared, "full weak support of the prior"));
        }
        17 => {
            r.items.push(check_continuity(f0, params.radius));
            r.items.push(check_decreasing(f0));
            r.items.push(check_moment_with(f0, &Weight::Entropy, tail).into_item("abs_log_density"));
            r.items.push(declared("prior_support", params.prior_support_declared, "full weak support of the prior"));
        }
        _ => unreachable!("theorem ids are validated"),
    }
    Ok(r)
}

// Mixing-side conditions.

/// A compact parameter set `D`; `phi = None` leaves `φ` fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBox {
    pub theta: (f64, f64),
    pub phi: Option<(f64, f64)>,
}

impl ParamBox {
    pub fn new(theta: (f64, f64), phi: Option<(f64, f64)>) -> Result<Self> {
        let ok = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.0 <= r.1;
        if !ok(theta) || !phi.map_or(true, ok) {
            return Err(Error::Precondition("parameter box needs finite lo <= hi".into()));
        }
        Ok(ParamBox { theta, phi })
    }
}

fn ln_k(kernel: &KernelSpec, x: f64, theta: f64, phi: f64) -> f64 {
    kernel.ln_eval(x, theta, phi).unwrap_or(f64::NAN)
}

fn ln_inf_theta(kernel: &KernelSpec, x: f64, phi: f64, range: (f64, f64)) -> f64 {
    window_min(&|t| ln_k(kernel, x, t, phi), range.0, range.1)
}

fn ln_sup_theta(kernel: &KernelSpec, x: f64, phi: f64, range: (f64, f64)) -> f64 {
    -window_min(&|t| -ln_k(kernel, x, t, phi), range.0, range.1)
}

fn strip_hyper(p: &MixingDistribution) -> MixingDistribution {
    let kind = match &p.kind {
        MixingKind::Discrete(atoms) => MixingKind::Discrete(
            atoms
                .iter()
                .map(|a| Atom {
                    phi: None,
                    ..*a
                })
                .collect(),
        ),
        MixingKind::Density(d) => MixingKind::Density(d.clone()),
    };
    MixingDistribution {
        kind,
        point_mass: None,
    }
}

fn theta_domain_floor(kernel: &KernelSpec) -> f64 {
    match kernel.theta_space() {
        ParamSpace::Positive => 0.0,
        ParamSpace::UnitInterval => 0.0,
        _ => f64::NEG_INFINITY,
    }
}

fn theta_domain_ceiling(kernel: &KernelSpec) -> f64 {
    match kernel.theta_space() {
        ParamSpace::UnitInterval => 1.0,
        _ => f64::INFINITY,
    }
}

/// Integrability, positivity and continuity conditions for a compactly
/// supported mixing distribution `P_ε` inside `D`, with `C` the compact set of
/// sample points for the positivity and equicontinuity checks.
pub fn check_a_conditions(
    f0: &DensitySpec,
    kernel: &KernelSpec,
    p_eps: &MixingDistribution,
    phi_eps: Option<f64>,
    d: &ParamBox,
    c: (f64, f64),
    params: &CheckParams,
) -> Result<ConditionReport> {
    if matches!(kernel.theta_space(), ParamSpace::Integer { .. }) {
        return Err(Error::Precondition(format!(
            "`{}` has a discrete index; these checks need a continuous parameter",
            kernel.name()
        )));
    }
    let (tlo, thi) = p_eps.theta_range();
    let slack = 1e-12 * (1.0 + d.theta.0.abs().max(d.theta.1.abs()));
    if tlo < d.theta.0 - slack || thi > d.theta.1 + slack {
        return Err(Error::Precondition(format!(
            "D = [{}, {}] does not contain supp(P) = [{tlo}, {thi}]",
            d.theta.0, d.theta.1
        )));
    }
    let needs_phi = kernel.needs_phi();
    let phi0 = match (needs_phi, phi_eps) {
        (true, Some(p)) if p > 0.0 && p.is_finite() => p,
        (true, _) => {
            return Err(Error::Precondition(format!(
                "`{}` needs a positive hyper-parameter phi_eps",
                kernel.name()
            )))
        }
        (false, _) => 1.0,
    };
    if let (true, Some((a, b))) = (needs_phi, d.phi) {
        if phi0 < a || phi0 > b {
            return Err(Error::Precondition(format!("phi_eps = {phi0} outside D's [{a}, {b}]")));
        }
    }
    let space = kernel.sample_space();
    let (sa, sb) = space.bounds();
    if !(c.0 <= c.1) || c.0 < sa || c.1 > sb || !c.0.is_finite() || !c.1.is_finite() {
        return Err(Error::Precondition(format!("C = [{}, {}] is not a compact subset of {space:?}", c.0, c.1)));
    }
    kernel.validate(d.theta.0, phi0)?;
    kernel.validate(d.theta.1, phi0)?;

    let theta = d.theta;
    let neighbourhood: Vec<f64> = if needs_phi { vec![0.9 * phi0, 1.1 * phi0] } else { vec![phi0] };
    let tail = &params.tail;
    let mut r = ConditionReport::new(None);

    // A4
    let a4 = if !needs_phi {
        ConditionItem::computed("A4", Verdict::Pass, 0.0, "no hyper-parameter")
    } else {
        let xs = linspace(c.0, c.1, 16);
        let ts = linspace(theta.0, theta.1, 8);
        let omega = |h: f64| {
            let mut w = 0.0f64;
            for &x in &xs {
                for &t in &ts {
                    let k0 = ln_k(kernel, x, t, phi0).exp();
                    for s in [-1.0, 1.0] {
                        let k1 = ln_k(kernel, x, t, phi0 * (1.0 + s * h)).exp();
                        let dk = (k1 - k0).abs();
                        if !(dk <= w) {
                            w = dk;
                        }
                    }
                }
            }
            w
        };
        let (wide, narrow) = (omega(1e-2), omega(1e-4));
        let ok = narrow.is_finite() && (narrow <= 1e-12 || narrow <= 0.05 * wide);
        ConditionItem::computed(
            "A4",
            Verdict::from_bool(ok),
            narrow,
            format!("modulus in phi: {wide:.3e} at 1e-2, {narrow:.3e} at 1e-4"),
        )
        .with_basis(Basis::Evidence)
    };
    r.items.push(a4);

    // A5
    let mut a5 = ConditionItem::computed("A5", Verdict::Pass, 0.0, "");
    for &phi in &neighbourhood {
        let ln_w = |x: f64| {
            let one = ln_sup_theta(kernel, x, phi0, theta) - ln_inf_theta(kernel, x, phi, theta);
            let two = ln_sup_theta(kernel, x, phi, theta) - ln_inf_theta(kernel, x, phi0, theta);
            (one.abs() + two.abs()).ln()
        };
        let check = certify(f0, &ln_w, &[], tail);
        a5.value = a5.value.max(check.value);
        if check.verdict != Verdict::Pass && a5.verdict == Verdict::Pass {
            a5.verdict = check.verdict;
            a5.witness = check.witness;
        }
        a5.detail.push_str(&format!("phi={phi}: {}; ", check.detail));
    }
    r.items.push(a5);

    // A6
    let phis = if needs_phi { linspace(0.9 * phi0, 1.1 * phi0, 9) } else { vec![phi0] };
    let envelope = |x: f64, t: f64| phis.iter().map(|p| ln_k(kernel, x, t, *p).exp()).fold(0.0, f64::max);
    let mut a6 = ConditionItem::computed("A6", Verdict::Pass, 0.0, "");
    for x in linspace(c.0, c.1, 16) {
        let mass = match &p_eps.kind {
            MixingKind::Discrete(atoms) => atoms.iter().map(|a| a.weight * envelope(x, a.theta)).sum(),
            MixingKind::Density(dens) => {
                let (lo, hi) = dens.interval();
                Quadrature::with_tolerances(1e-12, 1e-8)
                    .integrate(|t| dens.ln_pdf(t).exp() * envelope(x, t), lo, hi)
                    .map_or(f64::INFINITY, |i| i.value)
            }
        };
        a6.value = a6.value.max(mass);
        if !mass.is_finite() {
            a6.verdict = Verdict::Fail;
            a6.witness = Some(Witness::Point { x, value: mass });
            break;
        }
    }
    a6.detail = format!("sup over C of the integrated phi-envelope: {:.6e}", a6.value);
    r.items.push(a6);

    // A7
    let base_mixing = strip_hyper(p_eps);
    let mut a7 = ConditionItem::computed("A7", Verdict::Pass, 0.0, "");
    let mut a_set = vec![phi0];
    if needs_phi {
        a_set.extend(neighbourhood.iter().copied());
    }
    for &phi in &a_set {
        let mixture = MixtureDensity::native(*kernel, base_mixing.clone(), needs_phi.then_some(phi))?;
        let ln_w = |x: f64| {
            let lf = mixture.ln_eval(x).unwrap_or(f64::NAN);
            (lf - ln_inf_theta(kernel, x, phi, theta)).abs().ln()
        };
        let check = certify(f0, &ln_w, &[], tail);
        a7.value = a7.value.max(check.value);
        if check.verdict != Verdict::Pass && a7.verdict == Verdict::Pass {
            a7.verdict = check.verdict;
            a7.witness = check.witness;
        }
        a7.detail.push_str(&format!("phi={phi}: {}; ", check.detail));
    }
    r.items.push(a7);

    // A8
    let xs = linspace(c.0, c.1, 64);
    let ts = linspace(theta.0, theta.1, 64);
    let ps = match (needs_phi, d.phi) {
        (true, Some((a, b))) => linspace(a, b, 8),
        _ => vec![phi0],
    };
    let mut low = (f64::INFINITY, f64::NAN, f64::NAN);
    for &x in &xs {
        for &t in &ts {
            for &p in &ps {
                let l = ln_k(kernel, x, t, p);
                if !(l >= low.0) {
                    low = (l, x, t);
                }
            }
        }
    }
    let c_inf = low.0.exp();
    let a8_ok = low.0 > f64::NEG_INFINITY;
    let a8 = ConditionItem::computed(
        "A8",
        Verdict::from_bool(a8_ok),
        c_inf,
        format!("inf over C x D of K = {c_inf:.6e}"),
    )
    .with_witness((!a8_ok).then_some(Witness::Grid {
        x: low.1,
        theta: low.2,
        value: c_inf,
    }));
    r.items.push(a8);

    // A9
    let width = (theta.1 - theta.0).max(1e-3 * (1.0 + theta.0.abs()));
    let floor = theta_domain_floor(kernel);
    let ceiling = theta_domain_ceiling(kernel);
    let xs9 = linspace(c.0, c.1, 16);
    let bound = c_inf * params.epsilon / 4.0;
    let mut found = None;
    let mut last_sup = f64::NAN;
    for k in 0..10 {
        let s = 0.5 * width * 2f64.powi(k);
        // Half-bounded parameters grow by decades toward their ends.
        let shrink = 10f64.powi(-(k + 1));
        let e_lo = if floor.is_finite() { floor + (theta.0 - floor) * shrink } else { theta.0 - s };
        let e_hi = if ceiling.is_finite() {
            ceiling - (ceiling - theta.1) * shrink
        } else if floor.is_finite() {
            floor + (theta.1 - floor) / shrink
        } else {
            theta.1 + s
        };
        let mut outside: Vec<f64> = Vec::new();
        if floor.is_finite() {
            outside.extend((1..32).map(|j| floor + (e_lo - floor) * j as f64 / 32.0));
        } else {
            outside.extend((0..32).map(|j| e_lo - 10.0 * s + 10.0 * s * j as f64 / 32.0));
        }
        if ceiling.is_finite() {
            outside.extend((1..=32).map(|j| e_hi + (ceiling - e_hi) * j as f64 / 32.0).filter(|t| *t > e_hi));
        } else if floor.is_finite() {
            outside.extend((1..=32).map(|j| floor + (e_hi - floor) * 10f64.powf(4.0 * j as f64 / 32.0)));
        } else {
            outside.extend((1..=32).map(|j| e_hi + 10.0 * s * j as f64 / 32.0));
        }
        let sup_out = xs9
            .iter()
            .flat_map(|&x| outside.iter().map(move |&t| (x, t)))
            .map(|(x, t)| ln_k(kernel, x, t, phi0).exp())
            .fold(0.0, |m: f64, v| if v.is_nan() { m } else { m.max(v) });
        last_sup = sup_out;
        if sup_out < bound {
            found = Some((e_lo, e_hi));
            break;
        }
    }
    let a9 = match found {
        None => ConditionItem::computed(
            "A9",
            Verdict::Fail,
            last_sup,
            format!("kernel mass outside every tried E exceeds c*eps/4 = {bound:.3e}"),
        ),
        Some(e) => {
            let ts: Vec<f64> = if floor.is_finite() && !ceiling.is_finite() {
                let (a, b) = ((e.0 - floor).ln(), (e.1 - floor).ln());
                linspace(a, b, 64).into_iter().map(|u| floor + u.exp()).collect()
            } else {
                linspace(e.0, e.1, 64)
            };
            let w = width;
            let omega = |h: f64| {
                let mut m = 0.0f64;
                for &x in &xs9 {
                    for &t in &ts {
                        let t2 = (t + h * w).min(e.1);
                        let dk = (ln_k(kernel, x, t2, phi0).exp() - ln_k(kernel, x, t, phi0).exp()).abs();
                        if !(dk <= m) {
                            m = dk;
                        }
                    }
                }
                m
            };
            let (wide, narrow) = (omega(1e-2), omega(1e-4));
            let ok = narrow.is_finite() && (narrow <= 1e-12 || narrow <= 0.05 * wide);
            ConditionItem::computed(
                "A9",
                Verdict::from_bool(ok),
                narrow,
                format!(
                    "E = [{:.4}, {:.4}], outside sup {last_sup:.3e} < {bound:.3e}; modulus {wide:.3e} -> {narrow:.3e}",
                    e.0, e.1
                ),
            )
        }
    }
    .with_basis(Basis::Evidence);
    r.items.push(a9);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(id: u8) -> Theorem {
        Theorem::new(id).unwrap()
    }

    fn p() -> CheckParams {
        CheckParams::default()
    }

    #[test]
    fn theorem_ids_outside_range_rejected() {
        assert!(matches!(Theorem::new(1), Err(Error::Config(_))));
        assert!(matches!(Theorem::new(18), Err(Error::Config(_))));
        assert_eq!(Theorem::all().count(), 16);
    }

    #[test]
    fn normal_third_absolute_moment() {
        let m = check_moment(&DensitySpec::std_normal(), &Weight::AbsPower(3.0));
        assert_eq!(m.verdict, Verdict::Pass);
        assert!((m.value - 1.5957691216057308).abs() < 1e-7, "{}", m.value);
    }

    #[test]
    fn cauchy_log_plus_moment() {
        let m = check_moment(&DensitySpec::cauchy(0.0, 1.0).unwrap(), &Weight::LogPlusAbs);
        assert_eq!(m.verdict, Verdict::Pass);
        assert!((m.value - 0.5831218080616376).abs() < 1e-7, "{}", m.value);
    }

    #[test]
    fn cauchy_power_moments() {
        let c = DensitySpec::cauchy(0.0, 1.0).unwrap();
        assert_eq!(check_moment(&c, &Weight::AbsPower(1.0)).verdict, Verdict::Indeterminate);
        let m = check_moment(&c, &Weight::AbsPower(1.5));
        assert_eq!(m.verdict, Verdict::Fail);
        assert!(m.value.is_infinite());
        assert!(matches!(m.witness, Some(Witness::TailExponent { .. })));
    }

    #[test]
    fn exponential_entropy_integral() {
        let m = check_moment(&DensitySpec::exponential(1.0).unwrap(), &Weight::Entropy);
        assert_eq!(m.verdict, Verdict::Pass);
        assert!((m.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn normal_local_ratio_small_delta() {
        let w = Weight::LocalRatio {
            delta: 0.1,
            window: Window::TwoSided,
        };
        let m = check_moment(&DensitySpec::std_normal(), &w);
        assert_eq!(m.verdict, Verdict::Pass);
        assert!((m.value - 0.08478845608028654).abs() < 1e-6, "{}", m.value);
    }

    #[test]
    fn min_max_power_fails_for_gamma_two() {
        // integrand ~ x^{-1-eta} at the origin
        for eta in ETA_SWEEP {
            let m = check_moment(&DensitySpec::gamma(2.0, 1.0).unwrap(), &Weight::MinMaxPower(eta));
            assert_eq!(m.verdict, Verdict::Fail, "eta {eta}");
        }
        let m = check_moment(&DensitySpec::gamma(4.0, 1.0).unwrap(), &Weight::MinMaxPower(0.25));
        assert_eq!(m.verdict, Verdict::Pass);
    }

    #[test]
    fn skew_normal_with_normal_truth() {
        let r = check_theorem(t(4), &DensitySpec::std_normal(), &KernelSpec::skew_normal(1.0).unwrap(), &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass, "{r:?}");
    }

    #[test]
    fn t_kernel_with_cauchy_truth() {
        let r = check_theorem(t(8), &DensitySpec::cauchy(0.0, 1.0).unwrap(), &KernelSpec::student_t(1.0).unwrap(), &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        let m = r.item("moment").unwrap();
        assert!((m.value - 0.5831218080616376).abs() < 1e-7);
    }

    #[test]
    fn laplace_and_logistic() {
        let r = check_theorem(t(6), &DensitySpec::laplace(0.0, 1.0).unwrap(), &KernelSpec::DoubleExponential, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        let r = check_theorem(t(7), &DensitySpec::std_normal(), &KernelSpec::Logistic, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
    }

    #[test]
    fn compact_support_theorems() {
        for (id, k) in [(9, KernelSpec::Histogram), (10, KernelSpec::Triangular), (11, KernelSpec::Bernstein)] {
            let r = check_theorem(t(id), &DensitySpec::parabolic(), &k, &p()).unwrap();
            assert_eq!(r.verdict(), Verdict::Pass, "theorem {id}");
        }
    }

    #[test]
    fn lognormal_kernel_checks_local_ratio_on_log_scale() {
        let r = check_theorem(t(12), &DensitySpec::lognormal(0.0, 1.0).unwrap(), &KernelSpec::LogNormal, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass, "{r:?}");
        // e^y f0(e^y) is N(0,1)
        assert!((r.item("B6").unwrap().value - 0.5239423).abs() < 1e-6);
    }

    #[test]
    fn weibull_kernel_rejects_exponential_truth() {
        let r = check_theorem(t(13), &DensitySpec::exponential(1.0).unwrap(), &KernelSpec::Weibull, &p()).unwrap();
        assert_eq!(r.item("exp_log_moment").unwrap().verdict, Verdict::Fail);
    }

    #[test]
    fn gamma_kernel_with_gamma_two_fails_min_max_moment() {
        let r = check_theorem(t(14), &DensitySpec::gamma(2.0, 1.0).unwrap(), &KernelSpec::Gamma, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Fail);
        let b7 = r.item("B7*").unwrap();
        assert_eq!(b7.verdict, Verdict::Fail);
        match b7.witness {
            Some(Witness::TailExponent { exponent, .. }) => assert!((exponent + 1.25).abs() < 1e-2),
            ref w => panic!("{w:?}"),
        }
        assert_eq!(r.eta_used, Some(0.25));
    }

    #[test]
    fn exponential_kernel_with_lomax() {
        let r = check_theorem(t(16), &DensitySpec::lomax(2.0).unwrap(), &KernelSpec::Exponential, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass, "{r:?}");
        assert_eq!(r.item("completely_monotone").unwrap().basis, Basis::Evidence);
    }

    #[test]
    fn scaled_uniform_needs_decreasing_density() {
        let r = check_theorem(t(17), &DensitySpec::exponential(1.0).unwrap(), &KernelSpec::ScaledUniform, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        assert!((r.item("abs_log_density").unwrap().value - 1.0).abs() < 1e-7);
        let r = check_theorem(t(17), &DensitySpec::gamma(2.0, 1.0).unwrap(), &KernelSpec::ScaledUniform, &p()).unwrap();
        assert_eq!(r.verdict(), Verdict::Fail);
        assert!(matches!(r.item("decreasing").unwrap().witness, Some(Witness::Point { x, .. }) if x < 1e-6));
    }

    #[test]
    fn normal_kernel_rejects_cauchy_truth() {
        let view = KernelSpec::normal().to_location_scale().unwrap();
        let r = check_location_scale(&DensitySpec::cauchy(0.0, 1.0).unwrap(), &view, &p()).unwrap();
        let b7 = r.item("B7").unwrap();
        assert_eq!(b7.verdict, Verdict::Fail);
        match b7.witness {
            Some(Witness::TailExponent { exponent, .. }) => assert!(exponent > -0.9),
            ref w => panic!("{w:?}"),
        }
    }

    #[test]
    fn normal_kernel_with_normal_truth_at_fixed_eta() {
        let view = KernelSpec::normal().to_location_scale().unwrap();
        let params = CheckParams { eta: Some(0.5), ..p() };
        let r = check_location_scale(&DensitySpec::std_normal(), &view, &params).unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        assert_eq!(r.eta_used, Some(0.5));
        assert!((r.item("B6").unwrap().value - 0.5239423).abs() < 1e-6);
    }

    #[test]
    fn incompatible_pairings() {
        let e = check_theorem(t(8), &DensitySpec::std_normal(), &KernelSpec::normal(), &p());
        assert!(matches!(e, Err(Error::Incompatible { theorem: 8, .. })));
        let e = check_theorem(t(16), &DensitySpec::std_normal(), &KernelSpec::Exponential, &p());
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn undeclared_support_is_indeterminate() {
        let params = CheckParams {
            prior_support_declared: false,
            ..p()
        };
        let r = check_theorem(t(9), &DensitySpec::parabolic(), &KernelSpec::Histogram, &params).unwrap();
        assert_eq!(r.verdict(), Verdict::Indeterminate);
        assert_eq!(r.item("prior_support").unwrap().basis, Basis::Declared);
    }

    #[test]
    fn complete_monotonicity() {
        let g = default_cm_grid();
        for d in [DensitySpec::lomax(2.0).unwrap(), DensitySpec::exponential(1.0).unwrap()] {
            assert_eq!(check_completely_monotone(&d, 6, &g).unwrap().verdict, Verdict::Pass);
        }
        let i = check_completely_monotone(&DensitySpec::weibull(2.0, 1.0).unwrap(), 6, &g).unwrap();
        assert_eq!(i.verdict, Verdict::Fail);
        assert!(matches!(i.witness, Some(Witness::Difference { order: 2, .. })));
        assert!(check_completely_monotone(&DensitySpec::std_normal(), 6, &g).is_err());
    }

    #[test]
    fn a_conditions_normal_kernel() {
        let d = ParamBox::new((-2.0, 2.0), Some((0.5, 1.0))).unwrap();
        let r = check_a_conditions(
            &DensitySpec::std_normal(),
            &KernelSpec::normal(),
            &MixingDistribution::point(0.0),
            Some(0.75),
            &d,
            (-3.0, 3.0),
            &p(),
        )
        .unwrap();
        assert_eq!(r.verdict(), Verdict::Pass);
        let a8 = r.item("A8").unwrap();
        assert!(a8.value > 0.0);
        assert_eq!(r.item("A9").unwrap().basis, Basis::Evidence);
    }

    #[test]
    fn a_conditions_scaled_uniform_positivity_fails() {
        let d = ParamBox::new((1.0, 2.0), None).unwrap();
        let r = check_a_conditions(
            &DensitySpec::exponential(1.0).unwrap(),
            &KernelSpec::ScaledUniform,
            &MixingDistribution::point(1.5),
            None,
            &d,
            (0.0, 3.0),
            &p(),
        )
        .unwrap();
        let a8 = r.item("A8").unwrap();
        assert_eq!(a8.verdict, Verdict::Fail);
        assert!(matches!(a8.witness, Some(Witness::Grid { x, theta, .. }) if x > theta));
    }

    #[test]
    fn a_conditions_exponential_kernel() {
        let d = ParamBox::new((0.25, 4.0), None).unwrap();
        let r = check_a_conditions(
            &DensitySpec::exponential(1.0).unwrap(),
            &KernelSpec::Exponential,
            &MixingDistribution::point(1.0),
            None,
            &d,
            (0.5, 3.0),
            &p(),
        )
        .unwrap();
        assert_eq!(r.item("A7").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.verdict(), Verdict::Pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn tail_verdicts_stable_under_truncation(p in prop_oneof![0.0f64..0.8, 1.2f64..3.0], k in 0usize..3) {
            let policy = TailPolicy { truncation: [1e4, 1e5, 1e6][k], margin: 0.1 };
            let m = check_moment_with(&DensitySpec::cauchy(0.0, 1.0).unwrap(), &Weight::AbsPower(p), &policy);
            let want = if p < 1.0 { Verdict::Pass } else { Verdict::Fail };
            prop_assert_eq!(m.verdict, want);
        }

        #[test]
        fn moment_checks_are_deterministic(p in 0.5f64..4.0) {
            let f0 = DensitySpec::laplace(0.0, 1.0).unwrap();
            let a = check_moment(&f0, &Weight::AbsPower(p));
            let b = check_moment(&f0, &Weight::AbsPower(p));
            prop_assert_eq!(a, b);
        }
    }
}
