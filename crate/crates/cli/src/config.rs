//! Experiment configuration: a strict JSON file, overlaid by command-line flags.

use std::path::{Path, PathBuf};

use klkit::approximants::{ApproximantSequence, Family, RateLaw};
use klkit::prior_mc::{DPSpec, ParamDist};
use klkit::{Atom, DensitySpec, Error, KernelSpec, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Check,
    Approximate,
    Converge,
    Priormass,
    VerifyBounds,
}

/// A named density with its parameters. Parameters the family does not use
/// are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityBlock {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

impl DensityBlock {
    fn params(&self) -> [(&'static str, Option<f64>); 11] {
        [
            ("loc", self.loc),
            ("scale", self.scale),
            ("mean", self.mean),
            ("sd", self.sd),
            ("rate", self.rate),
            ("shape", self.shape),
            ("mu", self.mu),
            ("sigma", self.sigma),
            ("alpha", self.alpha),
            ("a", self.a),
            ("b", self.b),
        ]
    }

    fn only(&self, allowed: &[&str]) -> Result<()> {
        let extra: Vec<&str> = self
            .params()
            .iter()
            .filter(|(k, v)| v.is_some() && !allowed.contains(k))
            .map(|(k, _)| *k)
            .collect();
        if extra.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "f0 `{}` does not take parameter(s) {}; it takes [{}]",
                self.name,
                extra.join(", "),
                allowed.join(", ")
            )))
        }
    }

    pub fn build(&self) -> Result<DensitySpec> {
        let or = |v: Option<f64>, d: f64| v.unwrap_or(d);
        match self.name.as_str() {
            "normal" => {
                self.only(&["mean", "sd"])?;
                DensitySpec::normal(or(self.mean, 0.0), or(self.sd, 1.0))
            }
            "cauchy" => {
                self.only(&["loc", "scale"])?;
                DensitySpec::cauchy(or(self.loc, 0.0), or(self.scale, 1.0))
            }
            "laplace" => {
                self.only(&["loc", "scale"])?;
                DensitySpec::laplace(or(self.loc, 0.0), or(self.scale, 1.0))
            }
            "exponential" => {
                self.only(&["rate"])?;
                DensitySpec::exponential(or(self.rate, 1.0))
            }
            "gamma" => {
                self.only(&["shape", "scale"])?;
                DensitySpec::gamma(or(self.shape, 1.0), or(self.scale, 1.0))
            }
            "lognormal" => {
                self.only(&["mu", "sigma"])?;
                DensitySpec::lognormal(or(self.mu, 0.0), or(self.sigma, 1.0))
            }
            "weibull" => {
                self.only(&["shape", "scale"])?;
                DensitySpec::weibull(or(self.shape, 1.0), or(self.scale, 1.0))
            }
            "lomax" => {
                self.only(&["alpha"])?;
                DensitySpec::lomax(or(self.alpha, 2.0))
            }
            "beta" => {
                self.only(&["a", "b"])?;
                DensitySpec::beta(or(self.a, 1.0), or(self.b, 1.0))
            }
            "uniform" => {
                self.only(&[])?;
                Ok(DensitySpec::uniform())
            }
            "parabolic" => {
                self.only(&[])?;
                Ok(DensitySpec::parabolic())
            }
            other => Err(Error::Config(format!(
                "unknown f0 `{other}`; known: {}",
                BUILT_DENSITIES.join(", ")
            ))),
        }
    }

    /// Rate law whose Laplace transform is this density's survival function.
    pub fn default_rate_law(&self) -> Result<RateLaw> {
        match self.name.as_str() {
            "exponential" => Ok(RateLaw::Atoms(vec![Atom::new(self.rate.unwrap_or(1.0), 1.0)])),
            "lomax" => Ok(RateLaw::Density(DensitySpec::gamma(self.alpha.unwrap_or(2.0), 1.0)?)),
            other => Err(Error::Config(format!(
                "no default rate law for f0 `{other}`; set `rate_law` in the config"
            ))),
        }
    }
}

const BUILT_DENSITIES: [&str; 11] = [
    "normal",
    "cauchy",
    "laplace",
    "exponential",
    "gamma",
    "lognormal",
    "weibull",
    "lomax",
    "beta",
    "uniform",
    "parabolic",
];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBlock {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl KernelBlock {
    pub fn named(name: &str) -> Self {
        KernelBlock {
            name: name.to_string(),
            ..Default::default()
        }
    }

    pub fn build(&self) -> Result<KernelSpec> {
        let reject = |what: &str| {
            Err(Error::Config(format!("kernel `{}` does not take `{what}`", self.name)))
        };
        let name = self.name.as_str();
        if self.nu.is_some() && name != "t" {
            return reject("nu");
        }
        if self.lambda.is_some() && name != "skew_normal" {
            return reject("lambda");
        }
        if self.dim.is_some() && !matches!(name, "mv_normal" | "normal") {
            return reject("dim");
        }
        Ok(match name {
            "skew_normal" => KernelSpec::skew_normal(self.lambda.unwrap_or(0.0))?,
            "normal" | "mv_normal" => KernelSpec::MvNormal {
                dim: self.dim.unwrap_or(1),
            },
            "double_exponential" | "laplace" => KernelSpec::DoubleExponential,
            "logistic" => KernelSpec::Logistic,
            "t" => KernelSpec::student_t(self.nu.unwrap_or(1.0))?,
            "histogram" => KernelSpec::Histogram,
            "triangular" => KernelSpec::Triangular,
            "bernstein" => KernelSpec::Bernstein,
            "lognormal" => KernelSpec::LogNormal,
            "weibull" => KernelSpec::Weibull,
            "gamma" => KernelSpec::Gamma,
            "inverse_gamma" => KernelSpec::InverseGamma,
            "exponential" => KernelSpec::Exponential,
            "scaled_uniform" => KernelSpec::ScaledUniform,
            other => {
                return Err(Error::Config(format!(
                    "unknown kernel `{other}`; known: {}",
                    klkit::kernels::FAMILY_NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorMassBlock {
    pub dp: Option<DPSpec>,
    /// Prior on a hyper-parameter shared by all atoms.
    #[serde(default)]
    pub hyper_prior: Option<ParamDist>,
    /// `ξ` prior; with it, `dp_by_xi` supplies one DP per support point.
    #[serde(default)]
    pub xi_prior: Option<ParamDist>,
    #[serde(default)]
    pub dp_by_xi: Option<Vec<DPSpec>>,
    #[serde(default)]
    pub epsilon: Option<Vec<f64>>,
    #[serde(default)]
    pub draws: Option<u64>,
    /// Per-draw CSV.
    #[serde(default)]
    pub draws_output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub f0: Option<DensityBlock>,
    #[serde(default)]
    pub kernel: Option<KernelBlock>,
    #[serde(default)]
    pub theorem: Option<u8>,
    /// Approximant family, or a kernel name standing for its family.
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub rate_law: Option<DensityBlock>,
    #[serde(default)]
    pub ladder: Option<Vec<f64>>,
    #[serde(default)]
    pub index: Option<f64>,
    #[serde(default)]
    pub probes: Option<Vec<f64>>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub target: Option<f64>,
    /// Envelope `x` points for `verify-bounds`.
    #[serde(default)]
    pub envelope_x: Option<Vec<f64>>,
    #[serde(default)]
    pub prior_support_declared: Option<bool>,
    #[serde(default)]
    pub priormass: Option<PriorMassBlock>,
    /// Overrides the DP concentration.
    #[serde(default)]
    pub concentration: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| {
            Error::Config(format!(
                "{}: line {}, column {}: {e}",
                origin.display(),
                e.line(),
                e.column()
            ))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text, path)
    }

    /// Fields set in `flags` win.
    pub fn overlay(mut self, flags: ExperimentConfig) -> Self {
        overlay!(
            self, flags, command, theorem, family, rate_law, ladder, index, probes, eta, delta, tolerance,
            target, envelope_x, prior_support_declared, concentration, seed, output
        );
        self.f0 = merge_density(self.f0, flags.f0);
        self.kernel = match (self.kernel, flags.kernel) {
            (Some(mut base), Some(top)) => {
                if top.name != base.name {
                    base = KernelBlock::named(&top.name);
                }
                overlay!(base, top, nu, lambda, dim);
                Some(base)
            }
            (a, b) => b.or(a),
        };
        if let Some(top) = flags.priormass {
            let mut base = self.priormass.unwrap_or_default();
            overlay!(base, top, dp, hyper_prior, xi_prior, dp_by_xi, epsilon, draws, draws_output);
            self.priormass = Some(base);
        }
        self
    }

    pub fn f0(&self) -> Result<DensitySpec> {
        self.f0
            .as_ref()
            .ok_or_else(|| Error::Config("missing `f0`".into()))?
            .build()
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        self.kernel
            .as_ref()
            .ok_or_else(|| Error::Config("missing `kernel`".into()))?
            .build()
    }

    /// Family and kernel for approximant commands: `family` (a family or
    /// kernel name) or else the kernel's family.
    pub fn family_and_kernel(&self) -> Result<(Family, KernelSpec)> {
        if let Some(name) = &self.family {
            if let Ok(f) = name.parse::<Family>() {
                let kernel = match (f, &self.kernel) {
                    (_, Some(k)) => k.build()?,
                    (Family::LocationScale, None) => KernelSpec::normal(),
                    (Family::GammaEq15, None) => KernelSpec::Gamma,
                    (Family::ExponentialTruncated, None) => KernelSpec::Exponential,
                    (f, None) => KernelBlock::named(f.name()).build()?,
                };
                if Family::for_kernel(&kernel) != f {
                    return Err(Error::Config(format!(
                        "kernel `{}` does not belong to family `{f}`",
                        kernel.name()
                    )));
                }
                return Ok((f, kernel));
            }
            let kernel = KernelBlock::named(name).build().map_err(|_| {
                Error::Config(format!(
                    "unknown family `{name}`; use one of {} or a kernel name",
                    Family::ALL.map(|f| f.name()).join(", ")
                ))
            })?;
            let kernel = match &self.kernel {
                Some(k) if k.name == *name => k.build()?,
                _ => kernel,
            };
            return Ok((Family::for_kernel(&kernel), kernel));
        }
        let kernel = self.kernel()?;
        Ok((Family::for_kernel(&kernel), kernel))
    }

    pub fn sequence(&self) -> Result<ApproximantSequence> {
        let (family, kernel) = self.family_and_kernel()?;
        let f0 = self.f0()?;
        let seq = if family == Family::ExponentialTruncated {
            let law = match &self.rate_law {
                Some(b) => RateLaw::Density(b.build()?),
                None => self
                    .f0
                    .as_ref()
                    .expect("f0 built above")
                    .default_rate_law()?,
            };
            ApproximantSequence::exponential(f0, law)?
        } else {
            ApproximantSequence::new(f0, kernel)?
        };
        match self.eta {
            Some(eta) => seq.with_eta(eta),
            None => Ok(seq),
        }
    }
}

fn merge_density(base: Option<DensityBlock>, top: Option<DensityBlock>) -> Option<DensityBlock> {
    match (base, top) {
        (Some(mut b), Some(t)) => {
            if t.name.is_empty() || t.name == b.name {
                overlay!(b, t, loc, scale, mean, sd, rate, shape, mu, sigma, alpha, a, b);
                Some(b)
            } else {
                Some(t)
            }
        }
        (b, t) => t.or(b),
    }
}
