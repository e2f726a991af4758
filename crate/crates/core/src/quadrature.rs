//! Adaptive Gauss–Kronrod (G7/K15) quadrature on finite and infinite intervals.
//!
//! Panels are refined globally, worst error first, with a fixed tie-break so
//! the result does not depend on anything but the integrand. Infinite ends are
//! mapped onto bounded `t` intervals: `x = t/(1-t^2)` for the whole line and
//! `x = a + t/(1-t)` for half lines.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("no convergence: estimate {estimate:e}, residual error {residual:e}")]
    NotConverged { estimate: f64, residual: f64 },
    #[error("integrand is not finite near x = {at}")]
    Singular { at: f64 },
}

/// Tolerances and limits for [`Quadrature::integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of bisections of an initial panel.
    pub max_depth: u32,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            abs_tol: 1e-8,
            rel_tol: 0.0,
            max_depth: 40,
            max_panels: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    /// Final panel boundaries in `x` coordinates, sorted.
    pub boundaries: Vec<f64>,
    /// Contribution of panels on mapped infinite pieces.
    pub tail_value: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Map {
    Identity,
    /// `x = a + t/(1-t)`, `t` in `[0, 1)`.
    Upper(f64),
    /// `x = b - t/(1-t)`, `t` in `[0, 1)`.
    Lower(f64),
    /// `x = t/(1-t^2)`, `t` in `(-1, 1)`.
    Whole,
}

impl Map {
    fn apply(self, t: f64) -> (f64, f64) {
        match self {
            Map::Identity => (t, 1.0),
            Map::Upper(a) => {
                let s = 1.0 - t;
                (a + t / s, 1.0 / (s * s))
            }
            Map::Lower(b) => {
                let s = 1.0 - t;
                (b - t / s, 1.0 / (s * s))
            }
            Map::Whole => {
                let s = 1.0 - t * t;
                (t / s, (1.0 + t * t) / (s * s))
            }
        }
    }

    fn x_at(self, t: f64) -> f64 {
        match self {
            Map::Identity => t,
            Map::Upper(_) | Map::Whole if t >= 1.0 => f64::INFINITY,
            Map::Lower(_) if t >= 1.0 => f64::NEG_INFINITY,
            Map::Whole if t <= -1.0 => f64::NEG_INFINITY,
            _ => self.apply(t).0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    segment: usize,
    map: Map,
    lo: f64,
    hi: f64,
    depth: u32,
    value: f64,
    error: f64,
    singular: bool,
}

impl Panel {
    fn rank_cmp(&self, other: &Self) -> Ordering {
        let a = if self.singular { f64::INFINITY } else { self.error };
        let b = if other.singular { f64::INFINITY } else { other.error };
        a.total_cmp(&b)
            .then_with(|| other.segment.cmp(&self.segment))
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

struct Ranked(Panel);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.0.rank_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, map: Map, lo: f64, hi: f64) -> (f64, f64, bool) {
    let centr = 0.5 * (lo + hi);
    let hlgth = 0.5 * (hi - lo);
    let mut singular = false;
    let mut eval = |t: f64| {
        let (x, jac) = map.apply(t);
        let y = f(x);
        let v = if y == 0.0 { 0.0 } else { y * jac };
        if !v.is_finite() {
            singular = true;
            0.0
        } else {
            v
        }
    };

    let fc = eval(centr);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..3 {
        let jtw = 2 * j + 1;
        let absc = hlgth * XGK[jtw];
        let f1 = eval(centr - absc);
        let f2 = eval(centr + absc);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        resg += WG[j] * (f1 + f2);
        resk += WGK[jtw] * (f1 + f2);
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let jtwm1 = 2 * j;
        let absc = hlgth * XGK[jtwm1];
        let f1 = eval(centr - absc);
        let f2 = eval(centr + absc);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        resk += WGK[jtwm1] * (f1 + f2);
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let value = resk * hlgth;
    let resabs = resabs * hlgth.abs();
    let resasc = resasc * hlgth.abs();
    let mut abserr = ((resk - resg) * hlgth).abs();
    if resasc != 0.0 && abserr != 0.0 {
        abserr = resasc * (200.0 * abserr / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        abserr = abserr.max(50.0 * f64::EPSILON * resabs);
    }
    (value, abserr, singular)
}

fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}

fn initial_panels(a: f64, b: f64, breaks: &[f64]) -> Vec<(Map, f64, f64)> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut nodes = Vec::with_capacity(pts.len() + 2);
    nodes.push(a);
    nodes.extend(pts);
    nodes.push(b);

    let mut out = Vec::new();
    for w in nodes.windows(2) {
        let (p, q) = (w[0], w[1]);
        match (p.is_finite(), q.is_finite()) {
            (true, true) => {
                if q > p {
                    out.push((Map::Identity, p, q));
                }
            }
            (false, false) => {
                for k in 0..4 {
                    let lo = -1.0 + 0.5 * k as f64;
                    out.push((Map::Whole, lo, lo + 0.5));
                }
            }
            (false, true) => {
                for (lo, hi) in [(0.0, 0.5), (0.5, 0.75), (0.75, 1.0)] {
                    out.push((Map::Lower(q), lo, hi));
                }
            }
            (true, false) => {
                for (lo, hi) in [(0.0, 0.5), (0.5, 0.75), (0.75, 1.0)] {
                    out.push((Map::Upper(p), lo, hi));
                }
            }
        }
    }
    // Lower-tail panels run in decreasing x; order them left to right.
    out.sort_by(|l, r| {
        let xl = l.0.x_at(if matches!(l.0, Map::Lower(_)) { l.2 } else { l.1 });
        let xr = r.0.x_at(if matches!(r.0, Map::Lower(_)) { r.2 } else { r.1 });
        xl.total_cmp(&xr)
    });
    out
}

impl Quadrature {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Quadrature {
            abs_tol,
            rel_tol,
            ..Quadrature::default()
        }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(
        &self,
        f: F,
        a: f64,
        b: f64,
    ) -> Result<Integral, QuadError> {
        self.integrate_with_breaks(f, a, b, &[])
    }

    /// Integrates `f` over `[a, b]` (either end may be infinite), starting
    /// from panels split at `breaks`.
    pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        a: f64,
        b: f64,
        breaks: &[f64],
    ) -> Result<Integral, QuadError> {
        if a.is_nan() || b.is_nan() {
            return Err(QuadError::Singular { at: f64::NAN });
        }
        if a == b {
            return Ok(Integral {
                value: 0.0,
                abs_error: 0.0,
                boundaries: vec![a],
                tail_value: 0.0,
                evaluations: 0,
            });
        }
        if a > b {
            let mut r = self.integrate_with_breaks(f, b, a, breaks)?;
            r.value = -r.value;
            r.tail_value = -r.tail_value;
            return Ok(r);
        }

        let mut evaluations = 0usize;
        let mut heap = BinaryHeap::new();
        let mut frozen: Vec<Panel> = Vec::new();
        let mut sum_val = 0.0;
        let mut sum_err = 0.0;
        let mut frozen_err = 0.0;
        let mut singular_count = 0usize;

        for (segment, (map, lo, hi)) in initial_panels(a, b, breaks).into_iter().enumerate() {
            let (value, error, singular) = kronrod(&mut f, map, lo, hi);
            evaluations += 15;
            if singular {
                singular_count += 1;
            }
            sum_val += value;
            sum_err += error;
            heap.push(Ranked(Panel {
                segment,
                map,
                lo,
                hi,
                depth: 0,
                value,
                error,
                singular,
            }));
        }

        loop {
            if singular_count >= 3 {
                let at = heap.peek().map(|p: &Ranked| p.0.map.x_at(0.5 * (p.0.lo + p.0.hi)));
                return Err(QuadError::Singular {
                    at: at.unwrap_or(f64::NAN),
                });
            }
            if singular_count == 0 {
                let tol = self.abs_tol.max(self.rel_tol * sum_val.abs());
                if sum_err <= tol {
                    let (v, e) = exact_sums(&heap, &frozen);
                    sum_val = v;
                    sum_err = e;
                    if sum_err <= self.abs_tol.max(self.rel_tol * sum_val.abs()) {
                        break;
                    }
                }
                if frozen_err > tol {
                    return Err(QuadError::NotConverged {
                        estimate: sum_val,
                        residual: sum_err,
                    });
                }
            }
            if heap.len() + frozen.len() >= self.max_panels {
                return Err(QuadError::NotConverged {
                    estimate: sum_val,
                    residual: sum_err,
                });
            }
            let Some(Ranked(worst)) = heap.pop() else {
                return Err(QuadError::NotConverged {
                    estimate: sum_val,
                    residual: sum_err,
                });
            };

            let mid = 0.5 * (worst.lo + worst.hi);
            let splittable = worst.depth < self.max_depth && mid > worst.lo && mid < worst.hi;
            if !splittable {
                if worst.singular {
                    return Err(QuadError::Singular {
                        at: worst.map.x_at(mid),
                    });
                }
                frozen_err += worst.error;
                frozen.push(worst);
                continue;
            }
            if worst.singular {
                singular_count -= 1;
            } else {
                sum_val -= worst.value;
                sum_err -= worst.error;
            }
            for (lo, hi) in [(worst.lo, mid), (mid, worst.hi)] {
                let (value, error, singular) = kronrod(&mut f, worst.map, lo, hi);
                evaluations += 15;
                if singular {
                    singular_count += 1;
                } else {
                    sum_val += value;
                    sum_err += error;
                }
                heap.push(Ranked(Panel {
                    segment: worst.segment,
                    map: worst.map,
                    lo,
                    hi,
                    depth: worst.depth + 1,
                    value,
                    error,
                    singular,
                }));
            }
        }

        let mut panels: Vec<Panel> = heap.into_iter().map(|r| r.0).chain(frozen).collect();
        panels.sort_by(|l, r| l.segment.cmp(&r.segment).then(l.lo.total_cmp(&r.lo)));
        let values: Vec<f64> = panels.iter().map(|p| p.value).collect();
        let errors: Vec<f64> = panels.iter().map(|p| p.error).collect();
        let tails: Vec<f64> = panels
            .iter()
            .filter(|p| p.map != Map::Identity)
            .map(|p| p.value)
            .collect();
        let mut boundaries: Vec<f64> = panels
            .iter()
            .flat_map(|p| [p.map.x_at(p.lo), p.map.x_at(p.hi)])
            .filter(|x| x.is_finite())
            .collect();
        boundaries.sort_by(f64::total_cmp);
        boundaries.dedup();
        Ok(Integral {
            value: pairwise_sum(&values),
            abs_error: pairwise_sum(&errors),
            boundaries,
            tail_value: pairwise_sum(&tails),
            evaluations,
        })
    }
}

fn exact_sums(heap: &BinaryHeap<Ranked>, frozen: &[Panel]) -> (f64, f64) {
    let mut v = 0.0;
    let mut e = 0.0;
    for p in heap.iter().map(|r| &r.0).chain(frozen.iter()) {
        v += p.value;
        e += p.error;
    }
    (v, e)
}

/// Points spread over `[a, b]`, uniform in the integrator's mapped coordinate.
/// Infinite ends are excluded.
pub fn scan_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    match (a.is_finite(), b.is_finite()) {
        (true, true) => (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect(),
        (false, false) => (1..n)
            .map(|i| Map::Whole.x_at(-1.0 + 2.0 * i as f64 / n as f64))
            .collect(),
        (true, false) => (0..n)
            .map(|i| Map::Upper(a).x_at(i as f64 / n as f64))
            .collect(),
        (false, true) => (0..n)
            .rev()
            .map(|i| Map::Lower(b).x_at(i as f64 / n as f64))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = Quadrature::default();
        let r = q.integrate(|x| x * x * x - 2.0 * x, -1.0, 2.0).unwrap();
        assert!((r.value - 0.75).abs() < 1e-14);
    }

    #[test]
    fn gaussian_whole_line() {
        let q = Quadrature::with_tolerances(1e-12, 0.0);
        let r = q
            .integrate(|x| (-0.5 * x * x).exp(), f64::NEG_INFINITY, f64::INFINITY)
            .unwrap();
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-11);
    }

    #[test]
    fn half_lines_both_orientations() {
        let q = Quadrature::with_tolerances(1e-12, 0.0);
        let up = q.integrate(|x| (-x).exp(), 1.0, f64::INFINITY).unwrap();
        assert!((up.value - (-1.0f64).exp()).abs() < 1e-12);
        let down = q.integrate(|x| x.exp(), f64::NEG_INFINITY, -1.0).unwrap();
        assert!((down.value - (-1.0f64).exp()).abs() < 1e-12);
        assert!(up.tail_value > 0.0);
    }

    #[test]
    fn breakpoints_help_discontinuities() {
        let q = Quadrature::with_tolerances(1e-12, 0.0);
        let f = |x: f64| if x < 0.3 { 1.0 } else { 3.0 };
        let r = q.integrate_with_breaks(f, 0.0, 1.0, &[0.3]).unwrap();
        assert!((r.value - (0.3 + 2.1)).abs() < 1e-13);
        assert!(r.boundaries.contains(&0.3));
    }

    #[test]
    fn integrable_endpoint_singularity() {
        let q = Quadrature::with_tolerances(1e-10, 0.0);
        let r = q.integrate(|x| x.ln(), 0.0, 1.0).unwrap();
        assert!((r.value + 1.0).abs() < 1e-10);
        // Power singularities converge only as fast as the depth cap allows.
        let q = Quadrature::with_tolerances(1e-5, 0.0);
        let r = q.integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0).unwrap();
        assert!((r.value - 2.0).abs() < 1e-5);
    }

    #[test]
    fn infinite_region_is_reported() {
        let q = Quadrature::default();
        let f = |x: f64| if x > 0.5 { f64::INFINITY } else { 1.0 };
        assert!(matches!(q.integrate(f, 0.0, 1.0), Err(QuadError::Singular { .. })));
    }

    #[test]
    fn reversed_limits_negate() {
        let q = Quadrature::default();
        let r = q.integrate(|x| x, 1.0, 0.0).unwrap();
        assert!((r.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn scan_points_cover_whole_line() {
        let p = scan_points(f64::NEG_INFINITY, f64::INFINITY, 8);
        assert_eq!(p.len(), 7);
        assert!(p.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p[3], 0.0);
    }
}
