//! Goodness-of-fit statistics (Kolmogorov-Smirnov, Anderson-Darling, binned
//! Pearson chi-square) and the combined-statistic conventions used in the
//! pipeline reports.
//!
//! K-S p-values come from the exact finite-n two-sided Kolmogorov distribution
//! (matrix method), with the Stephens-corrected asymptotic available as a
//! reference. A-D p-values use one of two fitted exponential approximations
//! selected by sample kind; the case-0 asymptotic is reported alongside.

use crate::distributions::DistributionParams;
use crate::error::{Error, Result};
use crate::special::{anderson_darling_sf_case0, chi2_sf, kolmogorov_exact_sf, kolmogorov_sf};
use serde::Serialize;

/// A-D p-value law for integer-valued samples: p = exp(-RATE*(A2 + SHIFT)).
pub const AD_P_INTEGER_RATE: f64 = 13.0 / 11.0;
pub const AD_P_INTEGER_SHIFT: f64 = 0.01;

/// A-D p-value law for real-valued samples:
/// p = exp(-(c0 + c1*A2 + c2*A2^2)).
pub const AD_P_REAL_COEFFS: [f64; 3] = [-0.0190296, 0.9446608, 0.2672157];

/// Selects which A-D p-value approximation applies to a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    Integer,
    Real,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdResult {
    pub a2: f64,
    pub p_value: f64,
    /// Case-0 asymptotic upper tail at the same A2, for reference.
    pub p_asymptotic: f64,
    /// True when some F(x) hit 0 or 1 and was clamped before taking logs.
    pub clamped: bool,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChisqGofResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub n_bins: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CombinedStatistic {
    pub cs: f64,
    pub p_cs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FisherCombined {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

/// Full battery result for one sample-distribution pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GofReport {
    pub ks_d: f64,
    pub p_ks: f64,
    pub ad_a2: f64,
    pub p_ad: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chisq: Option<ChisqGofResult>,
    pub cs: f64,
    pub p_cs: f64,
}

fn sorted_cdf_values<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<Vec<f64>> {
    if data.len() < 2 {
        return Err(Error::validation("test needs at least 2 observations"));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("sample contains non-finite values"));
    }
    let mut xs = data.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    Ok(xs.iter().map(|x| cdf(*x)).collect())
}

/// Two-sided Kolmogorov-Smirnov test. D is the larger of the one-sided gaps
/// taken before and after each sample point, so ties and discrete CDFs are
/// handled directly; the p-value is the exact finite-n null tail.
pub fn ks_test<F: Fn(f64) -> f64>(data: &[f64], cdf: F) -> Result<KsResult> {
    let f = sorted_cdf_values(data, cdf)?;
    let n = f.len();
    let nf = n as f64;
    let mut d = 0.0f64;
    for (k, fk) in f.iter().enumerate() {
        let upper = (k as f64 + 1.0) / nf - fk;
        let lower = fk - k as f64 / nf;
        d = d.max(upper).max(lower);
    }
    d = d.clamp(0.0, 1.0);
    Ok(KsResult {
        d,
        p_value: kolmogorov_exact_sf(n, d),
        n,
    })
}

/// Stephens-corrected asymptotic K-S p-value, kept as a reference
/// approximation: kolmogorov_sf((sqrt(n) + 0.12 + 0.11/sqrt(n)) * d).
pub fn ks_p_stephens(d: f64, n: usize) -> f64 {
    let rn = (n as f64).sqrt();
    kolmogorov_sf((rn + 0.12 + 0.11 / rn) * d)
}

/// Anderson-Darling A2 with a p-value from the fitted law for the sample
/// kind. CDF values are clamped to [1e-300, 1 - 1e-15] before taking logs;
/// `clamped` reports whether that fired.
pub fn ad_test<F: Fn(f64) -> f64>(data: &[f64], cdf: F, kind: SampleKind) -> Result<AdResult> {
    let f = sorted_cdf_values(data, cdf)?;
    let n = f.len();
    let nf = n as f64;
    let mut clamped = false;
    let f: Vec<f64> = f
        .iter()
        .map(|v| {
            let c = v.clamp(1e-300, 1.0 - 1e-15);
            if c != *v {
                clamped = true;
            }
            c
        })
        .collect();
    let mut sum = 0.0;
    for k in 1..=n {
        sum += (2 * k - 1) as f64 * (f[k - 1].ln() + (1.0 - f[n - k]).ln());
    }
    let a2 = -nf - sum / nf;
    let p_value = match kind {
        SampleKind::Integer => (-AD_P_INTEGER_RATE * (a2 + AD_P_INTEGER_SHIFT)).exp(),
        SampleKind::Real => {
            let [c0, c1, c2] = AD_P_REAL_COEFFS;
            (-(c0 + c1 * a2 + c2 * a2 * a2)).exp()
        }
    }
    .clamp(0.0, 1.0);
    Ok(AdResult {
        a2,
        p_value,
        p_asymptotic: anderson_darling_sf_case0(a2),
        clamped,
        n,
    })
}

/// Binned Pearson chi-square against a fitted distribution on count data.
///
/// Bins are built greedily left-to-right over the support so every bin's
/// expected count reaches `min_expected`; the final bin absorbs the tail and
/// is merged leftward if its expectation falls short. df = bins - 1 - (number
/// of parameters the family estimates from data).
pub fn chisq_gof(
    data: &[u32],
    dist: &DistributionParams,
    min_expected: f64,
) -> Result<ChisqGofResult> {
    if data.len() < 5 {
        return Err(Error::validation(
            "chi-square binning needs at least 5 observations",
        ));
    }
    if min_expected <= 0.0 {
        return Err(Error::validation("min_expected must be positive"));
    }
    let n = data.len() as f64;
    // (obs, exp) per closed bin; bin k-ranges are only needed transiently.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut last_hi: u32 = 0;
    let mut cur_e = 0.0;
    let mut cur_o = 0.0;
    let mut f_prev = 0.0;
    let mut k: u32 = 0;
    loop {
        let f_k = dist.cdf_at(k);
        cur_e += n * (f_k - f_prev).max(0.0);
        cur_o += data.iter().filter(|x| **x == k).count() as f64;
        if cur_e >= min_expected {
            bins.push((cur_o, cur_e));
            last_hi = k;
            cur_e = 0.0;
            cur_o = 0.0;
        }
        let remaining = n * (1.0 - f_k);
        f_prev = f_k;
        if cur_e + remaining < min_expected || remaining < 1e-12 || k >= 1_000_000 {
            break;
        }
        k += 1;
    }
    if bins.is_empty() {
        return Err(Error::validation(
            "fewer than 2 bins achievable at this min_expected",
        ));
    }
    // Tail bin from the last closed edge to infinity.
    let tail_e = n * (1.0 - dist.cdf_at(last_hi));
    let tail_o = data.iter().filter(|x| **x > last_hi).count() as f64;
    if tail_e < min_expected {
        let (o, e) = bins.pop().expect("checked non-empty");
        bins.push((o + tail_o, e + tail_e));
    } else {
        bins.push((tail_o, tail_e));
    }
    if bins.len() < 2 {
        return Err(Error::validation(
            "fewer than 2 bins achievable at this min_expected",
        ));
    }
    let statistic: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    let fitted = match dist {
        DistributionParams::Poisson(_)
        | DistributionParams::Geometric(_)
        | DistributionParams::Logarithmic(_) => 1usize,
        DistributionParams::DiscreteUniform(_)
        | DistributionParams::NegBin(_)
        | DistributionParams::Gamma(_) => 2usize,
    };
    let df = bins.len() as i64 - 1 - fitted as i64;
    if df < 1 {
        return Err(Error::numeric(
            "chisq_gof",
            "degrees of freedom fell below 1 after binning",
        ));
    }
    Ok(ChisqGofResult {
        statistic,
        df: df as u32,
        p_value: chi2_sf(statistic, df as u32),
        n_bins: bins.len(),
    })
}

/// The paired combined statistic: cs = ln(1/p_ks) + ln(1/p_ad), with
/// p_cs = exp(-cs/2) (the chi-square 2-df upper tail at cs).
pub fn combine_pair(p_ks: f64, p_ad: f64) -> CombinedStatistic {
    let cs = -(p_ks.ln() + p_ad.ln());
    CombinedStatistic {
        cs,
        p_cs: (-cs / 2.0).exp(),
    }
}

/// Combined statistic over an arbitrary p-value list: cs = sum ln(1/p). For
/// one or two p's the combined p keeps the paired convention exp(-cs/2);
/// for longer lists it is the chi-square upper tail at 2*cs on 2k-2 degrees
/// of freedom.
pub fn combine_many(p_list: &[f64]) -> Result<CombinedStatistic> {
    if p_list.is_empty() {
        return Err(Error::validation("empty p-value list"));
    }
    let cs: f64 = p_list.iter().map(|p| -p.ln()).sum();
    let k = p_list.len();
    let p_cs = if k <= 2 {
        (-cs / 2.0).exp()
    } else if cs.is_finite() {
        chi2_sf(2.0 * cs, 2 * k as u32 - 2)
    } else {
        0.0
    };
    Ok(CombinedStatistic { cs, p_cs })
}

/// Fisher's combination: statistic = 2*sum ln(1/p) ~ chi-square on 2k df.
pub fn fisher_combine(p_list: &[f64]) -> Result<FisherCombined> {
    if p_list.is_empty() {
        return Err(Error::validation("empty p-value list"));
    }
    let statistic: f64 = p_list.iter().map(|p| -2.0 * p.ln()).sum();
    let df = 2 * p_list.len() as u32;
    let p_value = if statistic.is_finite() {
        chi2_sf(statistic, df)
    } else {
        0.0
    };
    Ok(FisherCombined {
        statistic,
        df,
        p_value,
    })
}

/// K-S + A-D battery for count data against a fitted discrete (or
/// integer-evaluated) distribution, with an optional binned chi-square.
pub fn battery_counts(
    data: &[u32],
    dist: &DistributionParams,
    with_chisq: bool,
) -> Result<GofReport> {
    let xs: Vec<f64> = data.iter().map(|v| *v as f64).collect();
    let cdf = |t: f64| dist.cdf_at(t as u32);
    let ks = ks_test(&xs, cdf)?;
    let ad = ad_test(&xs, cdf, SampleKind::Integer)?;
    let chisq = if with_chisq {
        Some(chisq_gof(data, dist, 5.0)?)
    } else {
        None
    };
    let comb = combine_pair(ks.p_value, ad.p_value);
    Ok(GofReport {
        ks_d: ks.d,
        p_ks: ks.p_value,
        ad_a2: ad.a2,
        p_ad: ad.p_value,
        chisq,
        cs: comb.cs,
        p_cs: comb.p_cs,
    })
}

/// K-S + A-D battery for a real-valued sample against a continuous CDF.
pub fn battery_real<F: Fn(f64) -> f64 + Copy>(data: &[f64], cdf: F) -> Result<GofReport> {
    let ks = ks_test(data, cdf)?;
    let ad = ad_test(data, cdf, SampleKind::Real)?;
    let comb = combine_pair(ks.p_value, ad.p_value);
    Ok(GofReport {
        ks_d: ks.d,
        p_ks: ks.p_value,
        ad_a2: ad.a2,
        p_ad: ad.p_value,
        chisq: None,
        cs: comb.cs,
        p_cs: comb.p_cs,
    })
}
