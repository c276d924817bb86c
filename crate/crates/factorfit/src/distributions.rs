//! Distribution families, maximum-likelihood fitters, profile scans over
//! natural shape parameters, and Gamma differential entropy.
//!
//! The negative binomial uses the parameterization in which `p` multiplies the
//! observation count: mass(x) = Gamma(r+x) p^x (1-p)^r / (Gamma(x+1) Gamma(r)),
//! with mean r*p/(1-p). The Gamma scale maps to the same proportion scale via
//! p = scale/(1+scale), and fit results report both forms.

use crate::error::{Error, Result};
use crate::special::{digamma, lgamma, reg_inc_gamma_lower, reg_inc_gamma_upper, trigamma};
use crate::table::SeriesSample;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonParams {
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegBinParams {
    pub r: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricParams {
    /// Success probability; support {0,1,2,...}, mean (1-p)/p.
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogarithmicParams {
    /// Shape in (0,1); support {1,2,...}.
    pub theta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscreteUniformParams {
    pub a: i64,
    pub b: i64,
}

impl PoissonParams {
    pub fn mass(&self, x: u32) -> f64 {
        let l = self.lambda;
        (x as f64 * l.ln() - l - lgamma(x as f64 + 1.0)).exp()
    }

    /// P(X <= x) through the incomplete-gamma duality.
    pub fn cdf(&self, x: u32) -> f64 {
        reg_inc_gamma_upper(x as f64 + 1.0, self.lambda)
    }
}

impl NegBinParams {
    pub fn ln_mass(&self, x: u32) -> f64 {
        let xf = x as f64;
        lgamma(self.r + xf) - lgamma(xf + 1.0) - lgamma(self.r)
            + xf * self.p.ln()
            + self.r * (1.0 - self.p).ln()
    }

    pub fn mass(&self, x: u32) -> f64 {
        self.ln_mass(x).exp()
    }

    pub fn cdf(&self, x: u32) -> f64 {
        (0..=x).map(|k| self.mass(k)).sum::<f64>().min(1.0)
    }

    pub fn mean(&self) -> f64 {
        self.r * self.p / (1.0 - self.p)
    }

    /// The matching Gamma mixing distribution, scale p/(1-p).
    pub fn mixing_gamma(&self) -> GammaParams {
        GammaParams {
            shape: self.r,
            scale: self.p / (1.0 - self.p),
        }
    }
}

impl GammaParams {
    pub fn from_proportion(shape: f64, p: f64) -> Self {
        GammaParams {
            shape,
            scale: p / (1.0 - p),
        }
    }

    /// The scale expressed as a proportion, p = scale/(1+scale).
    pub fn proportion(&self) -> f64 {
        self.scale / (1.0 + self.scale)
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn ln_density(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (self.shape - 1.0) * z.ln()
            - z / self.scale
            - self.shape * self.scale.ln()
            - lgamma(self.shape)
    }

    pub fn density(&self, z: f64) -> f64 {
        if z < 0.0 {
            return 0.0;
        }
        if z == 0.0 {
            // Boundary limit: finite only at shape 1 (the exponential case).
            return if self.shape > 1.0 {
                0.0
            } else if self.shape == 1.0 {
                1.0 / self.scale
            } else {
                f64::INFINITY
            };
        }
        self.ln_density(z).exp()
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z <= 0.0 {
            return 0.0;
        }
        reg_inc_gamma_lower(self.shape, z / self.scale)
    }
}

impl GeometricParams {
    pub fn mass(&self, x: u32) -> f64 {
        self.p * (1.0 - self.p).powi(x as i32)
    }

    pub fn cdf(&self, x: u32) -> f64 {
        1.0 - (1.0 - self.p).powi(x as i32 + 1)
    }
}

impl LogarithmicParams {
    pub fn mass(&self, x: u32) -> f64 {
        if x == 0 {
            return 0.0;
        }
        -self.theta.powi(x as i32) / (x as f64 * (1.0 - self.theta).ln())
    }

    pub fn cdf(&self, x: u32) -> f64 {
        (1..=x).map(|k| self.mass(k)).sum::<f64>().min(1.0)
    }
}

impl DiscreteUniformParams {
    pub fn width(&self) -> i64 {
        self.b - self.a + 1
    }

    pub fn mass(&self, x: u32) -> f64 {
        let x = x as i64;
        if x < self.a || x > self.b {
            0.0
        } else {
            1.0 / self.width() as f64
        }
    }

    pub fn cdf(&self, x: u32) -> f64 {
        let x = x as i64;
        if x < self.a {
            0.0
        } else if x >= self.b {
            1.0
        } else {
            (x - self.a + 1) as f64 / self.width() as f64
        }
    }
}

/// Tagged union over every family's parameter record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionParams {
    DiscreteUniform(DiscreteUniformParams),
    Geometric(GeometricParams),
    Logarithmic(LogarithmicParams),
    Poisson(PoissonParams),
    NegBin(NegBinParams),
    Gamma(GammaParams),
}

impl DistributionParams {
    /// CDF evaluated at an integer point, for goodness-of-fit use.
    pub fn cdf_at(&self, x: u32) -> f64 {
        match self {
            DistributionParams::DiscreteUniform(d) => d.cdf(x),
            DistributionParams::Geometric(d) => d.cdf(x),
            DistributionParams::Logarithmic(d) => d.cdf(x),
            DistributionParams::Poisson(d) => d.cdf(x),
            DistributionParams::NegBin(d) => d.cdf(x),
            DistributionParams::Gamma(d) => d.cdf(x as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    Mle,
    Moments,
    MleFixedShape,
}

/// A fitted distribution with its sample log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitResult {
    pub params: DistributionParams,
    pub log_likelihood: f64,
    pub method: FitMethod,
    pub n: usize,
}

fn mean_u32(data: &[u32]) -> f64 {
    data.iter().map(|v| *v as f64).sum::<f64>() / data.len() as f64
}

fn require_nonempty(data_len: usize) -> Result<()> {
    if data_len == 0 {
        Err(Error::validation("sample is empty"))
    } else {
        Ok(())
    }
}

/// Poisson MLE: lambda is the sample mean.
pub fn fit_poisson(s: &SeriesSample) -> Result<FitResult> {
    let lambda = s.mean();
    if lambda <= 0.0 {
        return Err(Error::validation(
            "all-zero sample; Poisson rate would be 0",
        ));
    }
    let d = PoissonParams { lambda };
    let ll = s.values.iter().map(|x| d.mass(*x).ln()).sum();
    Ok(FitResult {
        params: DistributionParams::Poisson(d),
        log_likelihood: ll,
        method: FitMethod::Mle,
        n: s.n(),
    })
}

/// Geometric MLE: p = 1/(1 + mean).
pub fn fit_geometric(data: &[u32]) -> Result<FitResult> {
    require_nonempty(data.len())?;
    let xbar = mean_u32(data);
    if xbar <= 0.0 {
        return Err(Error::validation("geometric fit needs a positive mean"));
    }
    let d = GeometricParams {
        p: 1.0 / (1.0 + xbar),
    };
    let ll = data.iter().map(|x| d.mass(*x).ln()).sum();
    Ok(FitResult {
        params: DistributionParams::Geometric(d),
        log_likelihood: ll,
        method: FitMethod::Mle,
        n: data.len(),
    })
}

/// Logarithmic-series MLE: theta solves mean = -theta/((1-theta) ln(1-theta))
/// by bisection on (0, 1).
pub fn fit_logarithmic(data: &[u32]) -> Result<FitResult> {
    require_nonempty(data.len())?;
    if data.iter().any(|x| *x < 1) {
        return Err(Error::validation("logarithmic support starts at 1"));
    }
    let xbar = mean_u32(data);
    if xbar <= 1.0 {
        return Err(Error::validation("logarithmic fit needs mean > 1"));
    }
    let mean_of = |th: f64| -th / ((1.0 - th) * (1.0 - th).ln());
    let mut lo = 1e-12;
    let mut hi = 1.0 - 1e-14;
    if mean_of(hi) < xbar {
        return Err(Error::numeric("fit_logarithmic", "mean not bracketed"));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mean_of(mid) < xbar {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let d = LogarithmicParams {
        theta: 0.5 * (lo + hi),
    };
    let ll = data.iter().map(|x| d.mass(*x).ln()).sum();
    Ok(FitResult {
        params: DistributionParams::Logarithmic(d),
        log_likelihood: ll,
        method: FitMethod::Mle,
        n: data.len(),
    })
}

/// Discrete uniform via integer-rounded method of moments: the width comes
/// from the variance, the location from the mean. The straight MLE would be
/// (min, max); the moments form is kept because it matches the reference
/// outputs this crate reproduces.
pub fn fit_uniform_moments(data: &[u32]) -> Result<FitResult> {
    if data.len() < 2 {
        return Err(Error::validation("uniform fit needs at least 2 values"));
    }
    let xbar = mean_u32(data);
    let var = data
        .iter()
        .map(|x| {
            let d = *x as f64 - xbar;
            d * d
        })
        .sum::<f64>()
        / data.len() as f64;
    let width = (12.0 * var + 1.0).sqrt().round() as i64;
    let a = (xbar - (width as f64 - 1.0) / 2.0).round() as i64;
    let d = DiscreteUniformParams {
        a,
        b: a + width - 1,
    };
    let ll = data.iter().map(|x| d.mass(*x).ln()).sum();
    Ok(FitResult {
        params: DistributionParams::DiscreteUniform(d),
        log_likelihood: ll,
        method: FitMethod::Moments,
        n: data.len(),
    })
}

fn negbin_ll(data: &[u32], d: &NegBinParams) -> f64 {
    data.iter().map(|x| d.ln_mass(*x)).sum()
}

/// For a fixed r the likelihood is stationary in p at p = mean/(r + mean).
pub fn negbin_profile_p(r: f64, mean: f64) -> f64 {
    mean / (r + mean)
}

/// Profile fits over the given natural r values, p re-optimized per r.
pub fn profile_negbin(data: &[u32], r_list: &[u32]) -> Result<Vec<FitResult>> {
    require_nonempty(data.len())?;
    let xbar = mean_u32(data);
    if xbar <= 0.0 {
        return Err(Error::validation(
            "negative binomial fit needs a positive mean",
        ));
    }
    r_list
        .iter()
        .map(|r| {
            if *r < 1 {
                return Err(Error::validation("r must be at least 1"));
            }
            let d = NegBinParams {
                r: *r as f64,
                p: negbin_profile_p(*r as f64, xbar),
            };
            Ok(FitResult {
                params: DistributionParams::NegBin(d),
                log_likelihood: negbin_ll(data, &d),
                method: FitMethod::Mle,
                n: data.len(),
            })
        })
        .collect()
}

/// Best natural-r negative binomial: the profile argmax over r = 1..=r_max.
pub fn fit_negbin_natural_r(data: &[u32], r_max: u32) -> Result<FitResult> {
    if r_max < 1 {
        return Err(Error::validation("r_max must be at least 1"));
    }
    let rs: Vec<u32> = (1..=r_max).collect();
    let profile = profile_negbin(data, &rs)?;
    Ok(profile
        .into_iter()
        .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
        .expect("profile is non-empty"))
}

fn gamma_ll(data: &[f64], d: &GammaParams) -> f64 {
    data.iter().map(|z| d.ln_density(*z)).sum()
}

fn check_positive_sample(data: &[f64]) -> Result<()> {
    require_nonempty(data.len())?;
    if data.iter().any(|z| *z <= 0.0 || !z.is_finite()) {
        return Err(Error::validation(
            "gamma fit needs strictly positive finite values",
        ));
    }
    Ok(())
}

/// Full Gamma MLE. The shape solves ln(shape) - digamma(shape) = ln(mean) -
/// mean(ln x) by Newton iteration started at the moment estimate, with a
/// bisection fallback; the scale is mean/shape.
pub fn fit_gamma(data: &[f64]) -> Result<FitResult> {
    check_positive_sample(data)?;
    let n = data.len() as f64;
    let xbar = data.iter().sum::<f64>() / n;
    let mean_ln = data.iter().map(|z| z.ln()).sum::<f64>() / n;
    let s = xbar.ln() - mean_ln;
    if s <= 0.0 {
        return Err(Error::validation("degenerate sample: zero log-dispersion"));
    }
    let var = data.iter().map(|z| (z - xbar) * (z - xbar)).sum::<f64>() / n;
    let mut shape = if var > 0.0 { xbar * xbar / var } else { 1.0 };
    let f = |a: f64| a.ln() - digamma(a) - s;
    let mut solved = false;
    for _ in 0..100 {
        let fa = f(shape);
        let da = 1.0 / shape - trigamma(shape);
        let next = shape - fa / da;
        if !(next > 0.0) {
            break;
        }
        if (next - shape).abs() <= 1e-12 * shape {
            shape = next;
            solved = true;
            break;
        }
        shape = next;
    }
    if !solved {
        // Bisection fallback on a wide bracket.
        let mut lo = 1e-8;
        let mut hi = 1e8;
        if f(lo) < 0.0 || f(hi) > 0.0 {
            return Err(Error::numeric("fit_gamma", "shape equation not bracketed"));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        shape = 0.5 * (lo + hi);
    }
    let d = GammaParams {
        shape,
        scale: xbar / shape,
    };
    Ok(FitResult {
        params: DistributionParams::Gamma(d),
        log_likelihood: gamma_ll(data, &d),
        method: FitMethod::Mle,
        n: data.len(),
    })
}

/// Gamma MLE with the shape held fixed; the optimal scale is mean/shape.
pub fn fit_gamma_fixed_shape(data: &[f64], shape: f64) -> Result<FitResult> {
    check_positive_sample(data)?;
    if shape <= 0.0 {
        return Err(Error::validation("shape must be positive"));
    }
    let xbar = data.iter().sum::<f64>() / data.len() as f64;
    let d = GammaParams {
        shape,
        scale: xbar / shape,
    };
    Ok(FitResult {
        params: DistributionParams::Gamma(d),
        log_likelihood: gamma_ll(data, &d),
        method: FitMethod::MleFixedShape,
        n: data.len(),
    })
}

/// Fixed-shape fits over a list of shapes.
pub fn profile_gamma(data: &[f64], shapes: &[f64]) -> Result<Vec<FitResult>> {
    shapes
        .iter()
        .map(|s| fit_gamma_fixed_shape(data, *s))
        .collect()
}

/// Differential entropy of a Gamma law, in nats.
pub fn gamma_entropy(g: &GammaParams) -> f64 {
    g.shape + g.scale.ln() + lgamma(g.shape) + (1.0 - g.shape) * digamma(g.shape)
}

/// Families that may fail to admit any maximum-likelihood fit on count data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundedFamily {
    Bernoulli,
    Binomial,
    Hypergeometric,
}

/// Outcome of attempting a fit in a bounded-support family.
#[derive(Debug, Clone, Serialize)]
pub struct UnfittableVerdict {
    pub family: BoundedFamily,
    pub rejected: bool,
    pub reason: String,
    /// Present when the family does admit a fit (Bernoulli only).
    pub bernoulli_p: Option<f64>,
}

/// Check whether a bounded-support family admits an MLE fit for the data.
///
/// Bernoulli requires all values in {0,1}. Binomial and hypergeometric are
/// examined through their dispersion: both are underdispersed (variance below
/// the mean for any matching parameters), so overdispersed count data pushes
/// the profile likelihood to the unbounded-support limit and no finite
/// maximizer exists.
pub fn reject_unfittable(data: &[u32], family: BoundedFamily) -> Result<UnfittableVerdict> {
    require_nonempty(data.len())?;
    let xbar = mean_u32(data);
    let var = data
        .iter()
        .map(|x| {
            let d = *x as f64 - xbar;
            d * d
        })
        .sum::<f64>()
        / data.len() as f64;
    let verdict = match family {
        BoundedFamily::Bernoulli => {
            if data.iter().all(|x| *x <= 1) {
                UnfittableVerdict {
                    family,
                    rejected: false,
                    reason: "values lie in {0,1}; p estimated by the sample mean".into(),
                    bernoulli_p: Some(xbar),
                }
            } else {
                let mx = data.iter().max().unwrap();
                UnfittableVerdict {
                    family,
                    rejected: true,
                    reason: format!("values up to {mx} exceed the Bernoulli support {{0,1}}"),
                    bernoulli_p: None,
                }
            }
        }
        BoundedFamily::Binomial | BoundedFamily::Hypergeometric => {
            if var > xbar {
                UnfittableVerdict {
                    family,
                    rejected: true,
                    reason: format!(
                        "sample variance {var:.3} exceeds the mean {xbar:.3}; every member of \
                         this family is underdispersed, so the profile likelihood increases \
                         toward the unbounded-support limit and no finite maximizer exists"
                    ),
                    bernoulli_p: None,
                }
            } else {
                UnfittableVerdict {
                    family,
                    rejected: false,
                    reason: "dispersion is compatible; a bounded-support fit exists".into(),
                    bernoulli_p: None,
                }
            }
        }
    };
    Ok(verdict)
}
