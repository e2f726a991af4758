//! The five subcommands. Each returns whether every verdict passed.

use std::path::Path;

use klkit::approximants::{envelope_check, gamma_kernel_concentration, verify_lower_bounds, Family};
use klkit::conditions::{check_theorem, CheckParams, Theorem};
use klkit::kl::{convergence_study, kl_divergence};
use klkit::prior_mc::{sample_kl, sample_kl_hierarchical, BaseMeasure, DPSpec, MassEstimate, MassProblem, ParamDist};
use klkit::special_fn::{EnvelopeParams, ExponentVariant};
use klkit::{DensitySpec, Error, KernelSpec, Result, Support, Verdict};

use crate::config::{Command, ExperimentConfig};
use crate::output::{emit_csv, g12, opt, write_csv, SCHEMA};

pub const DEFAULT_KL_TOL: f64 = 1e-8;

pub fn run(cfg: &ExperimentConfig) -> Result<bool> {
    match cfg.command.ok_or_else(|| Error::Config("missing `command`".into()))? {
        Command::Check => check(cfg),
        Command::Approximate => approximate(cfg),
        Command::Converge => converge(cfg),
        Command::Priormass => priormass(cfg),
        Command::VerifyBounds => verify_bounds(cfg),
    }
}

fn check(cfg: &ExperimentConfig) -> Result<bool> {
    let f0 = cfg.f0()?;
    let kernel = cfg.kernel()?;
    let theorem = match cfg.theorem {
        Some(id) => Theorem::new(id)?,
        None => Theorem::for_kernel(&kernel).ok_or_else(|| {
            Error::Config(format!("no default theorem for kernel `{}`; pass --theorem", kernel.name()))
        })?,
    };
    let params = CheckParams {
        eta: cfg.eta,
        delta: cfg.delta,
        prior_support_declared: cfg.prior_support_declared.unwrap_or(true),
        ..CheckParams::default()
    };
    let report = check_theorem(theorem, &f0, &kernel, &params)?;
    println!("{theorem}: kernel {}, f0 {}: {}", kernel.name(), f0.name(), report.verdict());
    for (k, v) in [("eta", report.eta_used), ("delta", report.delta_used), ("l1", report.l1), ("l2", report.l2)] {
        if let Some(v) = v {
            println!("  {k} = {}", g12(v));
        }
    }
    for i in &report.items {
        print!("  {:<20} {:<13} {:>18}  [{}] {}", i.tag, i.verdict.to_string(), g12(i.value), i.basis, i.detail);
        match &i.witness {
            Some(w) => println!("; witness: {w}"),
            None => println!(),
        }
    }
    if let Some(path) = &cfg.output {
        let rows: Vec<Vec<String>> = report
            .items
            .iter()
            .map(|i| {
                vec![
                    SCHEMA.into(),
                    theorem.id().to_string(),
                    kernel.name().into(),
                    f0.name().into(),
                    i.tag.clone(),
                    i.verdict.to_string(),
                    g12(i.value),
                    i.basis.to_string(),
                    i.detail.clone(),
                    i.witness.map(|w| w.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(
            path,
            &["schema", "theorem", "kernel", "f0", "item", "verdict", "value", "basis", "detail", "witness"],
            &rows,
        )?;
    }
    Ok(report.verdict() != Verdict::Fail)
}

fn default_probes(support: Support) -> Vec<f64> {
    match support {
        Support::RealLine => (-4..=4).map(|k| 0.75 * k as f64).collect(),
        Support::PositiveHalfLine => vec![0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
        Support::UnitInterval => (1..10).map(|k| 0.1 * k as f64).collect(),
    }
}

fn approximate(cfg: &ExperimentConfig) -> Result<bool> {
    let seq = cfg.sequence()?;
    let index = cfg
        .index
        .ok_or_else(|| Error::Config("approximate needs `index`".into()))?;
    let fm = seq.at(index)?;
    let reference = seq.reference();
    let probes = cfg
        .probes
        .clone()
        .unwrap_or_else(|| default_probes(reference.support()));
    let mut rows = Vec::with_capacity(probes.len());
    for x in probes {
        rows.push(vec![
            SCHEMA.into(),
            seq.family.name().into(),
            reference.name().into(),
            g12(index),
            g12(x),
            g12(reference.pdf(x)),
            g12(fm.eval(x)?),
        ]);
    }
    let kl = kl_divergence(reference, &fm, cfg.tolerance.unwrap_or(DEFAULT_KL_TOL))?;
    eprintln!(
        "{} approximant of {} at index {}: KL = {} (error bound {})",
        seq.family,
        reference.name(),
        g12(index),
        g12(kl.value),
        g12(kl.abs_error_bound)
    );
    emit_csv(
        cfg.output.as_deref(),
        &["schema", "family", "f0", "index", "x", "f0_x", "fm_x"],
        &rows,
    )?;
    Ok(true)
}

fn converge(cfg: &ExperimentConfig) -> Result<bool> {
    let seq = cfg.sequence()?;
    let ladder = cfg.ladder.clone().unwrap_or_else(Family::default_ladder);
    let tol = cfg.tolerance.unwrap_or(DEFAULT_KL_TOL);
    let target = cfg.target.unwrap_or(seq.family.default_target());
    let study = convergence_study(&seq, &ladder, tol, target)?;
    let rows: Vec<Vec<String>> = study
        .rows
        .iter()
        .map(|r| {
            vec![
                SCHEMA.into(),
                study.family.clone(),
                study.f0.clone(),
                g12(r.index),
                opt(r.result.as_ref().map(|k| k.value)),
                opt(r.result.as_ref().map(|k| k.abs_error_bound)),
                g12(r.runtime_ms),
            ]
        })
        .collect();
    emit_csv(
        cfg.output.as_deref(),
        &["schema", "family", "f0", "index", "kl", "err_bound", "runtime_ms"],
        &rows,
    )?;
    for r in study.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("index {}: {}", g12(r.index), r.error.as_deref().unwrap_or_default());
    }
    eprintln!(
        "{} / {}: final KL {} vs target {}: {}",
        study.family,
        study.f0,
        opt(study.rows.last().and_then(|r| r.result.as_ref()).map(|k| k.value)),
        g12(target),
        if study.converged { "converged" } else { "not converged" }
    );
    Ok(study.converged)
}

/// A prior for real-line location-scale kernels when the config has none.
fn default_dp(kernel: &KernelSpec) -> Result<DPSpec> {
    if kernel.sample_space() != Support::RealLine || kernel.dimension() != 1 {
        return Err(Error::Config(format!(
            "no default DP for kernel `{}`; set `priormass.dp` in the config",
            kernel.name()
        )));
    }
    DPSpec::new(
        BaseMeasure {
            theta: ParamDist::Normal { mean: 0.0, sd: 1.0 },
            phi: Some(ParamDist::LogNormal { mu: 0.0, sigma: 0.5 }),
        },
        1.0,
    )
}

fn priormass(cfg: &ExperimentConfig) -> Result<bool> {
    let f0: DensitySpec = cfg.f0()?;
    let kernel = cfg.kernel()?;
    let pm = cfg.priormass.clone().unwrap_or_default();
    let epsilons = pm.epsilon.clone().unwrap_or_else(|| vec![0.5]);
    let problem = MassProblem {
        f0: &f0,
        kernel,
        hyper_prior: pm.hyper_prior.as_ref(),
        n_draws: pm.draws.unwrap_or(2000),
        seed: cfg.seed.unwrap_or(0),
    };
    let draws = match (&pm.xi_prior, &pm.dp_by_xi) {
        (Some(xi), Some(dps)) => {
            let ParamDist::Discrete { values, .. } = xi else {
                return Err(Error::Config("`xi_prior` must be discrete to index `dp_by_xi`".into()));
            };
            if values.len() != dps.len() {
                return Err(Error::Config(format!(
                    "`dp_by_xi` has {} entries for {} xi values",
                    dps.len(),
                    values.len()
                )));
            }
            let family = |x: f64| -> Result<DPSpec> {
                values
                    .iter()
                    .position(|v| *v == x)
                    .map(|i| dps[i].clone())
                    .ok_or_else(|| Error::Domain(format!("xi = {x} is not a support point")))
            };
            sample_kl_hierarchical(&problem, xi, &family, &epsilons)?
        }
        (None, None) => {
            let mut dp = match &pm.dp {
                Some(dp) => dp.clone(),
                None => default_dp(&kernel)?,
            };
            if let Some(c) = cfg.concentration {
                dp.concentration = c;
            }
            sample_kl(&problem, &dp, &epsilons)?
        }
        _ => return Err(Error::Config("`xi_prior` and `dp_by_xi` go together".into())),
    };
    let estimates: Vec<MassEstimate> = epsilons.iter().map(|e| MassEstimate::from_draws(&draws, *e)).collect();
    let failed = draws.iter().filter(|d| d.error.is_some()).count();
    let rows: Vec<Vec<String>> = estimates
        .iter()
        .map(|e| {
            vec![
                SCHEMA.into(),
                f0.name().into(),
                kernel.name().into(),
                g12(e.epsilon),
                e.hits.to_string(),
                e.draws.to_string(),
                g12(e.fraction),
                g12(e.wilson_interval.0),
                g12(e.wilson_interval.1),
                problem.seed.to_string(),
            ]
        })
        .collect();
    emit_csv(
        cfg.output.as_deref(),
        &["schema", "f0", "kernel", "epsilon", "hits", "draws", "fraction", "wilson_lo", "wilson_hi", "seed"],
        &rows,
    )?;
    if failed > 0 {
        eprintln!("{failed} draw(s) failed and were counted as misses");
    }
    if let Some(path) = &pm.draws_output {
        let rows: Vec<Vec<String>> = draws
            .iter()
            .map(|d| {
                vec![
                    SCHEMA.into(),
                    d.index.to_string(),
                    opt(d.xi),
                    opt(d.phi),
                    d.atoms.to_string(),
                    opt(d.kl),
                    g12(d.kl_error_bound),
                    d.refined.to_string(),
                    d.error.clone().unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(
            path,
            &["schema", "index", "xi", "phi", "atoms", "kl", "kl_error_bound", "refined", "error"],
            &rows,
        )?;
    }
    Ok(estimates.iter().all(|e| e.hits > 0))
}

fn verify_bounds(cfg: &ExperimentConfig) -> Result<bool> {
    let seq = cfg.sequence()?;
    let ms = cfg.ladder.clone().unwrap_or_else(|| vec![5.0, 10.0]);
    let delta = cfg.delta.unwrap_or(0.25);
    let mut rows = Vec::new();
    let mut violations = 0usize;
    for &m in &ms {
        let rep = verify_lower_bounds(&seq, m, cfg.probes.as_deref(), delta)?;
        violations += rep.violations();
        for p in &rep.points {
            rows.push(vec![
                SCHEMA.into(),
                p.bound.name().into(),
                g12(m),
                g12(p.x),
                g12(p.ln_fm),
                g12(p.ln_bound),
                p.holds.to_string(),
            ]);
        }
        for (x, why) in &rep.skipped {
            log::info!("m = {m}, x = {x}: skipped ({why})");
        }
    }
    if let Some(xs) = &cfg.envelope_x {
        if seq.family != Family::GammaEq15 {
            return Err(Error::Config("envelope checks apply to the gamma_eq15 family".into()));
        }
        let params = EnvelopeParams::new(delta, ExponentVariant::default())?;
        for &m in &ms {
            for &x in xs {
                if !(x > 1.0 / m && x <= m + 1.0 / m) {
                    log::info!("m = {m}, x = {x}: envelope skipped (needs 1/m < x <= m + 1/m)");
                    continue;
                }
                let e = envelope_check(m, x, &params)?;
                violations += usize::from(!e.holds);
                rows.push(vec![
                    SCHEMA.into(),
                    "envelope".into(),
                    g12(m),
                    g12(x),
                    g12(e.integral.ln()),
                    g12(e.envelope.ln()),
                    e.holds.to_string(),
                ]);
            }
            if m > 1.0 {
                let c = gamma_kernel_concentration(m, 1.0, delta)?;
                eprintln!(
                    "m = {}: kernel mass on [1/m, m] at x = 1 is {}, delta-tail {}",
                    g12(m),
                    g12(c.total),
                    g12(c.tail)
                );
            }
        }
    }
    emit_csv(
        cfg.output.as_deref(),
        &["schema", "bound", "m", "x", "ln_lhs", "ln_bound", "holds"],
        &rows,
    )?;
    eprintln!("{} comparisons, {violations} violation(s)", rows.len());
    Ok(violations == 0)
}

pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}
