//! End-to-end orchestration: screening, factorization, pooled and per-series
//! fits, rate profiles, association fits, factor populations, and density
//! curves, collected into one serializable report.
//!
//! Every section carries a `method` string naming the operations and
//! parameters that produced it, so each number in the report is traceable to
//! a library call. The run is deterministic for a fixed config; serializing
//! the same report twice yields byte-identical JSON.

use crate::distributions::{
    fit_gamma, fit_geometric, fit_logarithmic, fit_negbin_natural_r, fit_poisson,
    fit_uniform_moments, gamma_entropy, profile_gamma, profile_negbin, reject_unfittable,
    BoundedFamily, DistributionParams, FitMethod, FitResult, GammaParams, NegBinParams,
    UnfittableVerdict,
};
use crate::error::{Error, Result};
use crate::factorize::{als_fit_with, AlsGauge, AlsInit, AlsOptions, FactorPair};
use crate::gof::{
    battery_counts, battery_real, chisq_gof, combine_many, fisher_combine, CombinedStatistic,
    FisherCombined, GofReport,
};
use crate::independence::{
    chi_square_independence, row_contributions, screen_rows, ChiSquareResult,
};
use crate::mixture::{
    complementarity_check, coupled_gamma_mle, gamma_convolution_density, gamma_density_curve,
    joint_negbin_gamma_mle_with, CoupledGammaFit, DensityCurve, JointFit,
};
use crate::table::{ContingencyTable, SeriesSample};
use serde::Serialize;
use std::fmt::Write as _;

/// Version of the report layout, bumped on any field change.
pub const SCHEMA_VERSION: &str = "1.0";

/// Knobs for a pipeline run. The defaults reproduce the reference report on
/// the bundled dataset.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PipelineConfig {
    /// Row-withdrawal threshold for the screening stage.
    pub alpha: f64,
    /// Upper bound for integer shape searches (negative binomial r, joint fit).
    pub r_max: u32,
    /// Convergence tolerance for the factorization.
    pub tol: f64,
    /// Iteration cap for the factorization.
    pub max_iter: u32,
    pub als_init: AlsInit,
    pub als_gauge: AlsGauge,
    /// Evaluate the pooled goodness-of-fit battery at parameters rounded to
    /// reporting precision rather than at full precision. Per-series and
    /// profile batteries always use full precision.
    pub gof_at_display_precision: bool,
    /// Minimum expected count per bin in the chi-square goodness-of-fit test.
    pub min_expected: f64,
    /// Grid step for the density curves.
    pub curve_step: f64,
    /// Curve extent past the mean, in standard deviations.
    pub curve_span_sigmas: f64,
    /// Reserved; no stage of the default pipeline draws random numbers.
    pub seed: Option<u64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            alpha: 0.05,
            r_max: 64,
            tol: 1e-12,
            max_iter: 10_000,
            als_init: AlsInit::Constant(13.0 / 3.0),
            als_gauge: AlsGauge::Converged,
            gof_at_display_precision: true,
            min_expected: 5.0,
            curve_step: 0.01,
            curve_span_sigmas: 6.0,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LabeledChiSquare {
    pub label: String,
    #[serde(flatten)]
    pub result: ChiSquareResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScreeningSection {
    pub method: String,
    pub full: ChiSquareResult,
    /// Per-row contribution to the full-table statistic, against the
    /// full-table margins.
    pub row_contributions: Vec<LabeledChiSquare>,
    /// Rows withdrawn, in withdrawal order, each with the contribution that
    /// triggered it (computed against the margins in effect at that step).
    pub removed: Vec<LabeledChiSquare>,
    pub retained_rows: Vec<String>,
    pub reduced: ChiSquareResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorSection {
    pub method: String,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    #[serde(flatten)]
    pub factors: FactorPair,
}

#[derive(Debug, Clone, Serialize)]
pub struct PooledFit {
    pub family: String,
    pub fit: FitResult,
    /// Parameters the battery was evaluated at; differs from `fit.params`
    /// only when the config asks for reporting-precision evaluation.
    pub gof_params: DistributionParams,
    pub gof: GofReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedFamily {
    pub family: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PooledSection {
    pub method: String,
    pub n: usize,
    pub mean: f64,
    pub min: u32,
    pub max: u32,
    pub fits: Vec<PooledFit>,
    pub skipped: Vec<SkippedFamily>,
    pub unfittable: Vec<UnfittableVerdict>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesFit {
    pub label: String,
    pub lambda: f64,
    pub log_likelihood: f64,
    pub gof: GofReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesSection {
    pub method: String,
    pub rows: Vec<SeriesFit>,
    pub cols: Vec<SeriesFit>,
    /// Mean of the row rates after rounding each to 4 decimals, mirroring a
    /// report that averages printed values.
    pub row_lambda_display_mean: f64,
    pub col_lambda_display_mean: f64,
    pub sum_ln_inv_p_cs: f64,
    /// All per-series p_cs values combined (chi-square convention).
    pub combined: CombinedStatistic,
    /// The same values combined by Fisher's method.
    pub fisher: FisherCombined,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GammaFitRow {
    pub shape: f64,
    pub scale: f64,
    /// The scale as a proportion, scale/(1+scale).
    pub proportion: f64,
    pub log_likelihood: f64,
    pub fixed_shape: bool,
    pub gof: GofReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateGroup {
    pub name: String,
    pub values: Vec<f64>,
    pub mle: GammaFitRow,
    /// Fixed-shape fits at integer shapes around the MLE.
    pub profile: Vec<GammaFitRow>,
    /// The best row of `profile` by log-likelihood.
    pub natural: GammaFitRow,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComplementarityCheck {
    pub row_proportion: f64,
    pub col_proportion: f64,
    pub sum: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateSection {
    pub method: String,
    pub groups: Vec<RateGroup>,
    /// Sum of the natural-shape proportions of the row and column groups.
    pub complementarity: ComplementarityCheck,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NegbinProfileRow {
    pub r: u32,
    pub p: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    pub gof: GofReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct NegbinProfileSection {
    pub method: String,
    pub rows: Vec<NegbinProfileRow>,
    pub best_r: u32,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct JointGofRow {
    pub r: u32,
    pub p: f64,
    pub scale: f64,
    pub log_likelihood: f64,
    /// Pooled counts against the negative binomial.
    pub counts: GofReport,
    /// Series rates against the mixing Gamma.
    pub rates: GofReport,
    /// The four tail probabilities above combined.
    pub global: CombinedStatistic,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CoupledGofRow {
    pub r_b: u32,
    pub r_p: u32,
    pub q: f64,
    pub p: f64,
    pub log_likelihood: f64,
    /// Row rates against Gamma(r_b, q).
    pub rows: GofReport,
    /// Column rates against Gamma(r_p, 1/q).
    pub cols: GofReport,
    pub global: CombinedStatistic,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssociationSection {
    pub method: String,
    pub joint: JointFit,
    pub joint_gof: Vec<JointGofRow>,
    pub coupled: CoupledGammaFit,
    pub coupled_gof: Vec<CoupledGofRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PopulationFit {
    pub values: Vec<f64>,
    pub shape: f64,
    pub scale: f64,
    pub proportion: f64,
    pub log_likelihood: f64,
    pub entropy: f64,
    pub gof: GofReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct FactorPopulationSection {
    pub method: String,
    pub rows: PopulationFit,
    pub cols: PopulationFit,
    pub entropy_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveSection {
    pub method: String,
    /// Row-factor Gamma density (file FB.csv from the CLI).
    pub fb: DensityCurve,
    /// Column-factor Gamma density (file FP.csv).
    pub fp: DensityCurve,
    /// Density of the sum of the two factor variables (file AA.csv).
    pub aa: DensityCurve,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineReport {
    pub schema_version: String,
    pub generated_by: String,
    pub config: PipelineConfig,
    pub screening: ScreeningSection,
    pub factors: FactorSection,
    pub pooled_fits: PooledSection,
    pub series_fits: SeriesSection,
    pub gamma_of_lambdas: RateSection,
    pub negbin_profile: NegbinProfileSection,
    pub associations: AssociationSection,
    pub factor_populations: FactorPopulationSection,
    /// Column-factor entropy over row-factor entropy.
    pub entropy_ratio: f64,
    pub curves: CurveSection,
}

/// Round parameters to the precision a summary table would print them at.
///
/// Probabilities keep 5 decimals except the negative binomial's, which is
/// conventionally quoted to 3; a Poisson rate keeps 1. Integer endpoints are
/// already exact.
pub fn display_rounded(params: &DistributionParams) -> DistributionParams {
    fn round_to(x: f64, decimals: i32) -> f64 {
        let f = 10f64.powi(decimals);
        (x * f).round() / f
    }
    match params {
        DistributionParams::Poisson(d) => {
            DistributionParams::Poisson(crate::distributions::PoissonParams {
                lambda: round_to(d.lambda, 1),
            })
        }
        DistributionParams::NegBin(d) => DistributionParams::NegBin(NegBinParams {
            r: d.r,
            p: round_to(d.p, 3),
        }),
        DistributionParams::Geometric(d) => {
            DistributionParams::Geometric(crate::distributions::GeometricParams {
                p: round_to(d.p, 5),
            })
        }
        DistributionParams::Logarithmic(d) => {
            DistributionParams::Logarithmic(crate::distributions::LogarithmicParams {
                theta: round_to(d.theta, 5),
            })
        }
        DistributionParams::Gamma(d) => DistributionParams::Gamma(GammaParams {
            shape: round_to(d.shape, 3),
            scale: round_to(d.scale, 3),
        }),
        DistributionParams::DiscreteUniform(d) => DistributionParams::DiscreteUniform(*d),
    }
}

fn as_gamma(fit: &FitResult) -> GammaParams {
    match fit.params {
        DistributionParams::Gamma(g) => g,
        _ => unreachable!("gamma fitters return gamma parameters"),
    }
}

fn as_negbin(fit: &FitResult) -> NegBinParams {
    match fit.params {
        DistributionParams::NegBin(nb) => nb,
        _ => unreachable!("negative binomial fitters return negbin parameters"),
    }
}

fn gamma_row(fit: &FitResult, data: &[f64]) -> Result<GammaFitRow> {
    let g = as_gamma(fit);
    let gof = battery_real(data, move |z| g.cdf(z))?;
    Ok(GammaFitRow {
        shape: g.shape,
        scale: g.scale,
        proportion: g.proportion(),
        log_likelihood: fit.log_likelihood,
        fixed_shape: fit.method == FitMethod::MleFixedShape,
        gof,
    })
}

fn rate_group(name: &str, values: Vec<f64>) -> Result<RateGroup> {
    let mle_fit = fit_gamma(&values)?;
    let mle = gamma_row(&mle_fit, &values)?;
    let base = mle.shape.floor() as i64;
    let shapes: Vec<f64> = ((base - 2).max(1)..=base + 3).map(|k| k as f64).collect();
    let profile_fits = profile_gamma(&values, &shapes)?;
    let mut profile = Vec::with_capacity(profile_fits.len());
    for fit in &profile_fits {
        profile.push(gamma_row(fit, &values)?);
    }
    let natural = *profile
        .iter()
        .max_by(|a, b| a.log_likelihood.total_cmp(&b.log_likelihood))
        .expect("profile range is non-empty");
    Ok(RateGroup {
        name: name.into(),
        values,
        mle,
        profile,
        natural,
    })
}

/// Screening stage: full-table test, per-row contributions, worst-first row
/// withdrawal, and the reduced-table test. Also hands back the retained
/// table for the downstream stages.
pub fn screening_stage(
    input: &ContingencyTable,
    alpha: f64,
) -> Result<(ScreeningSection, ContingencyTable)> {
    let stage = "screening";
    let full = chi_square_independence(input).map_err(|e| e.in_stage(stage))?;
    let contributions = row_contributions(input).map_err(|e| e.in_stage(stage))?;
    let outcome = screen_rows(input, alpha).map_err(|e| e.in_stage(stage))?;
    let reduced = chi_square_independence(&outcome.retained).map_err(|e| e.in_stage(stage))?;
    let section = ScreeningSection {
        method: format!(
            "chi_square_independence + row_contributions; screen_rows(alpha={alpha}) withdraws \
             the worst row until every row contribution has p >= alpha"
        ),
        full,
        row_contributions: contributions
            .into_iter()
            .map(|(label, result)| LabeledChiSquare { label, result })
            .collect(),
        removed: outcome
            .removed
            .into_iter()
            .map(|(label, result)| LabeledChiSquare { label, result })
            .collect(),
        retained_rows: outcome.retained.row_labels().to_vec(),
        reduced,
    };
    Ok((section, outcome.retained))
}

/// Factorization stage on an already-screened table.
pub fn factor_stage(retained: &ContingencyTable, config: &PipelineConfig) -> Result<FactorSection> {
    let opts = AlsOptions {
        tol: config.tol,
        max_iter: config.max_iter,
        init: config.als_init,
        gauge: config.als_gauge,
    };
    let factors = als_fit_with(retained, &opts).map_err(|e| e.in_stage("factorize"))?;
    Ok(FactorSection {
        method: format!(
            "als_fit_with(tol={:e}, max_iter={}, init={:?}, gauge={:?}) on the retained table",
            opts.tol, opts.max_iter, opts.init, opts.gauge
        ),
        row_labels: retained.row_labels().to_vec(),
        col_labels: retained.col_labels().to_vec(),
        factors,
    })
}

/// Pooled-fit stage: every applicable family fitted to the pooled counts,
/// with its goodness-of-fit battery.
pub fn pooled_stage(pooled: &[u32], config: &PipelineConfig) -> Result<PooledSection> {
    let stage = "pooled_fits";
    if pooled.is_empty() {
        return Err(Error::validation("pooled sample is empty").in_stage(stage));
    }
    let pooled_mean = pooled.iter().map(|v| *v as f64).sum::<f64>() / pooled.len() as f64;
    let candidates: Vec<(&str, Result<FitResult>)> = vec![
        ("discrete_uniform", fit_uniform_moments(pooled)),
        ("geometric", fit_geometric(pooled)),
        ("logarithmic", fit_logarithmic(pooled)),
        ("negbin", fit_negbin_natural_r(pooled, config.r_max)),
        (
            "poisson",
            SeriesSample::new("pooled", pooled.to_vec()).and_then(|s| fit_poisson(&s)),
        ),
    ];
    let mut fits = Vec::new();
    let mut skipped = Vec::new();
    for (family, res) in candidates {
        match res {
            Ok(fit) => {
                let gof_params = if config.gof_at_display_precision {
                    display_rounded(&fit.params)
                } else {
                    fit.params
                };
                let mut gof =
                    battery_counts(pooled, &gof_params, false).map_err(|e| e.in_stage(stage))?;
                // The binned test needs enough mass per bin; when the sample
                // cannot support it the column is simply absent.
                if let Ok(c) = chisq_gof(pooled, &gof_params, config.min_expected) {
                    gof.chisq = Some(c);
                }
                fits.push(PooledFit {
                    family: family.into(),
                    fit,
                    gof_params,
                    gof,
                });
            }
            Err(Error::Validation(reason)) => skipped.push(SkippedFamily {
                family: family.into(),
                reason,
            }),
            Err(e) => return Err(e.in_stage(stage)),
        }
    }
    let unfittable = [
        BoundedFamily::Bernoulli,
        BoundedFamily::Binomial,
        BoundedFamily::Hypergeometric,
    ]
    .into_iter()
    .map(|f| reject_unfittable(pooled, f))
    .collect::<Result<Vec<_>>>()
    .map_err(|e| e.in_stage(stage))?;
    Ok(PooledSection {
        method: format!(
            "fit per family on pooled retained counts; battery_counts at {} parameters; \
             chisq_gof(min_expected={}) attached when at least two bins are supported",
            if config.gof_at_display_precision {
                "reporting-precision"
            } else {
                "full-precision"
            },
            config.min_expected
        ),
        n: pooled.len(),
        mean: pooled_mean,
        min: *pooled.iter().min().expect("pooled sample is non-empty"),
        max: *pooled.iter().max().expect("pooled sample is non-empty"),
        fits,
        skipped,
        unfittable,
    })
}

/// Per-series stage: one Poisson fit and battery per row and per column,
/// plus the combined statistics over all per-series p_cs values.
pub fn series_stage(retained: &ContingencyTable) -> Result<SeriesSection> {
    let stage = "series_fits";
    let series_of = |series: Result<SeriesSample>| -> Result<SeriesFit> {
        let s = series?;
        let fit = fit_poisson(&s)?;
        let lambda = match fit.params {
            DistributionParams::Poisson(p) => p.lambda,
            _ => unreachable!("poisson fitter returns poisson parameters"),
        };
        let gof = battery_counts(&s.values, &fit.params, false)?;
        Ok(SeriesFit {
            label: s.label,
            lambda,
            log_likelihood: fit.log_likelihood,
            gof,
        })
    };
    let mut rows = Vec::with_capacity(retained.n_rows());
    for i in 0..retained.n_rows() {
        rows.push(series_of(retained.row_series(i)).map_err(|e| e.in_stage(stage))?);
    }
    let mut cols = Vec::with_capacity(retained.n_cols());
    for j in 0..retained.n_cols() {
        cols.push(series_of(retained.col_series(j)).map_err(|e| e.in_stage(stage))?);
    }
    let round4 = |x: f64| (x * 1e4).round() / 1e4;
    let display_mean =
        |fits: &[SeriesFit]| fits.iter().map(|f| round4(f.lambda)).sum::<f64>() / fits.len() as f64;
    let p_cs_all: Vec<f64> = rows.iter().chain(&cols).map(|f| f.gof.p_cs).collect();
    let sum_ln_inv_p_cs = p_cs_all.iter().map(|p| (1.0 / p).ln()).sum::<f64>();
    let combined = combine_many(&p_cs_all).map_err(|e| e.in_stage(stage))?;
    let fisher = fisher_combine(&p_cs_all).map_err(|e| e.in_stage(stage))?;
    Ok(SeriesSection {
        method: "fit_poisson per row and column series; battery_counts at the exact rate; \
                 combine_many and fisher_combine over the per-series p_cs values"
            .into(),
        row_lambda_display_mean: display_mean(&rows),
        col_lambda_display_mean: display_mean(&cols),
        rows,
        cols,
        sum_ln_inv_p_cs,
        combined,
        fisher,
    })
}

/// Rate-profile stage: Gamma fits and integer-shape profiles for the row,
/// column, and combined rate samples, with the complementarity check.
pub fn rate_stage(row_rates: &[f64], col_rates: &[f64]) -> Result<RateSection> {
    let stage = "gamma_of_lambdas";
    let all_rates: Vec<f64> = row_rates.iter().chain(col_rates).copied().collect();
    let groups = vec![
        rate_group("all_series", all_rates).map_err(|e| e.in_stage(stage))?,
        rate_group("row_series", row_rates.to_vec()).map_err(|e| e.in_stage(stage))?,
        rate_group("col_series", col_rates.to_vec()).map_err(|e| e.in_stage(stage))?,
    ];
    let row_nat = GammaParams {
        shape: groups[1].natural.shape,
        scale: groups[1].natural.scale,
    };
    let col_nat = GammaParams {
        shape: groups[2].natural.shape,
        scale: groups[2].natural.scale,
    };
    let complementarity = ComplementarityCheck {
        row_proportion: row_nat.proportion(),
        col_proportion: col_nat.proportion(),
        sum: complementarity_check(&row_nat, &col_nat),
    };
    Ok(RateSection {
        method: "fit_gamma per group (all/rows/cols); profile_gamma over integer shapes \
                 floor(MLE)-2 ..= floor(MLE)+3; battery_real per fit; complementarity_check \
                 on the natural row and column fits"
            .into(),
        groups,
        complementarity,
    })
}

/// Count-profile stage: the negative binomial fitted at integer shapes
/// around the best natural r.
pub fn negbin_stage(pooled: &[u32], config: &PipelineConfig) -> Result<NegbinProfileSection> {
    let stage = "negbin_profile";
    let best = fit_negbin_natural_r(pooled, config.r_max).map_err(|e| e.in_stage(stage))?;
    let best_r = as_negbin(&best).r as u32;
    let r_list: Vec<u32> = (best_r.saturating_sub(2).max(1)..=best_r + 3).collect();
    let profile_fits = profile_negbin(pooled, &r_list).map_err(|e| e.in_stage(stage))?;
    let mut profile_rows = Vec::with_capacity(profile_fits.len());
    for fit in &profile_fits {
        let nb = as_negbin(fit);
        let gof = battery_counts(pooled, &fit.params, false).map_err(|e| e.in_stage(stage))?;
        profile_rows.push(NegbinProfileRow {
            r: nb.r as u32,
            p: nb.p,
            scale: nb.p / (1.0 - nb.p),
            log_likelihood: fit.log_likelihood,
            gof,
        });
    }
    Ok(NegbinProfileSection {
        method: format!(
            "fit_negbin_natural_r(r_max={}); profile_negbin over best_r-2 ..= best_r+3; \
             battery_counts at the exact profile parameters",
            config.r_max
        ),
        rows: profile_rows,
        best_r,
    })
}

/// Association stage: the shared-parameter joint fit on counts and rates,
/// and the reciprocal-scale coupled fit on the two rate samples, each with
/// per-natural-alternative batteries.
pub fn association_stage(
    pooled: &[u32],
    row_rates: &[f64],
    col_rates: &[f64],
    config: &PipelineConfig,
) -> Result<AssociationSection> {
    let stage = "associations";
    let all_rates: Vec<f64> = row_rates.iter().chain(col_rates).copied().collect();
    let joint = joint_negbin_gamma_mle_with(pooled, &all_rates, config.r_max)
        .map_err(|e| e.in_stage(stage))?;
    let mut joint_gof = Vec::with_capacity(joint.natural_alternatives.len());
    for nat in &joint.natural_alternatives {
        let nb = DistributionParams::NegBin(NegBinParams {
            r: nat.r as f64,
            p: nat.p,
        });
        let g = GammaParams::from_proportion(nat.r as f64, nat.p);
        let counts = battery_counts(pooled, &nb, false).map_err(|e| e.in_stage(stage))?;
        let rates = battery_real(&all_rates, move |z| g.cdf(z)).map_err(|e| e.in_stage(stage))?;
        let global = combine_many(&[counts.p_ks, counts.p_ad, rates.p_ks, rates.p_ad])
            .map_err(|e| e.in_stage(stage))?;
        joint_gof.push(JointGofRow {
            r: nat.r,
            p: nat.p,
            scale: g.scale,
            log_likelihood: nat.log_likelihood,
            counts,
            rates,
            global,
        });
    }
    let coupled = coupled_gamma_mle(row_rates, col_rates).map_err(|e| e.in_stage(stage))?;
    let mut coupled_gof = Vec::with_capacity(coupled.natural_alternatives.len());
    for nat in &coupled.natural_alternatives {
        let gb = GammaParams {
            shape: nat.r_b as f64,
            scale: nat.q,
        };
        let gp = GammaParams {
            shape: nat.r_p as f64,
            scale: 1.0 / nat.q,
        };
        let rows_gof =
            battery_real(row_rates, move |z| gb.cdf(z)).map_err(|e| e.in_stage(stage))?;
        let cols_gof =
            battery_real(col_rates, move |z| gp.cdf(z)).map_err(|e| e.in_stage(stage))?;
        let global = combine_many(&[rows_gof.p_ks, rows_gof.p_ad, cols_gof.p_ks, cols_gof.p_ad])
            .map_err(|e| e.in_stage(stage))?;
        coupled_gof.push(CoupledGofRow {
            r_b: nat.r_b,
            r_p: nat.r_p,
            q: nat.q,
            p: nat.p_bp,
            log_likelihood: nat.log_likelihood,
            rows: rows_gof,
            cols: cols_gof,
            global,
        });
    }
    Ok(AssociationSection {
        method: format!(
            "joint_negbin_gamma_mle_with(r_max={}) on pooled counts + all rates; \
             coupled_gamma_mle on row vs column rates; batteries per natural alternative; \
             combine_many over each row's four tail probabilities",
            config.r_max
        ),
        joint,
        joint_gof,
        coupled,
        coupled_gof,
    })
}

/// Factor-population stage: Gamma fits, batteries, and entropies of the two
/// factor vectors.
pub fn factor_population_stage(factors: &FactorPair) -> Result<FactorPopulationSection> {
    let stage = "factor_populations";
    let population = |values: &[f64]| -> Result<(PopulationFit, GammaParams)> {
        let fit = fit_gamma(values)?;
        let g = as_gamma(&fit);
        let gof = battery_real(values, move |z| g.cdf(z))?;
        Ok((
            PopulationFit {
                values: values.to_vec(),
                shape: g.shape,
                scale: g.scale,
                proportion: g.proportion(),
                log_likelihood: fit.log_likelihood,
                entropy: gamma_entropy(&g),
                gof,
            },
            g,
        ))
    };
    let (pop_rows, _) = population(&factors.a).map_err(|e| e.in_stage(stage))?;
    let (pop_cols, _) = population(&factors.b).map_err(|e| e.in_stage(stage))?;
    let entropy_ratio = pop_cols.entropy / pop_rows.entropy;
    Ok(FactorPopulationSection {
        method: "fit_gamma on the row and column factor populations; battery_real; \
                 gamma_entropy; ratio is cols over rows"
            .into(),
        rows: pop_rows,
        cols: pop_cols,
        entropy_ratio,
    })
}

/// Curve stage: the two factor-population densities and the density of
/// their sum.
pub fn curve_stage(
    g_rows: &GammaParams,
    g_cols: &GammaParams,
    config: &PipelineConfig,
) -> Result<CurveSection> {
    let stage = "curves";
    let fb = gamma_density_curve(g_rows, config.curve_step, config.curve_span_sigmas)
        .map_err(|e| e.in_stage(stage))?;
    let fp = gamma_density_curve(g_cols, config.curve_step, config.curve_span_sigmas)
        .map_err(|e| e.in_stage(stage))?;
    let aa = gamma_convolution_density(g_rows, g_cols, config.curve_step, config.curve_span_sigmas)
        .map_err(|e| e.in_stage(stage))?;
    Ok(CurveSection {
        method: format!(
            "gamma_density_curve on each factor-population fit and \
             gamma_convolution_density on their sum (step={}, span_sigmas={})",
            config.curve_step, config.curve_span_sigmas
        ),
        fb,
        fp,
        aa,
    })
}

/// Run every stage on the input table and collect the report.
///
/// Stage order: screening, factorization, pooled fits, per-series fits, rate
/// profiles, count profile, association fits, factor populations, curves.
/// Errors carry the name of the stage they surfaced in.
pub fn run_pipeline(input: &ContingencyTable, config: &PipelineConfig) -> Result<PipelineReport> {
    let (screening, retained) = screening_stage(input, config.alpha)?;
    let factor_section = factor_stage(&retained, config)?;
    let pooled = retained.pooled_values();
    let pooled_section = pooled_stage(&pooled, config)?;
    let series_section = series_stage(&retained)?;
    let row_rates: Vec<f64> = series_section.rows.iter().map(|f| f.lambda).collect();
    let col_rates: Vec<f64> = series_section.cols.iter().map(|f| f.lambda).collect();
    let rate_section = rate_stage(&row_rates, &col_rates)?;
    let negbin_section = negbin_stage(&pooled, config)?;
    let association_section = association_stage(&pooled, &row_rates, &col_rates, config)?;
    let population_section = factor_population_stage(&factor_section.factors)?;
    let g_rows = GammaParams {
        shape: population_section.rows.shape,
        scale: population_section.rows.scale,
    };
    let g_cols = GammaParams {
        shape: population_section.cols.shape,
        scale: population_section.cols.scale,
    };
    let curve_section = curve_stage(&g_rows, &g_cols, config)?;
    let entropy_ratio = population_section.entropy_ratio;

    Ok(PipelineReport {
        schema_version: SCHEMA_VERSION.into(),
        generated_by: format!("factorfit {}", env!("CARGO_PKG_VERSION")),
        config: *config,
        screening,
        factors: factor_section,
        pooled_fits: pooled_section,
        series_fits: series_section,
        gamma_of_lambdas: rate_section,
        negbin_profile: negbin_section,
        associations: association_section,
        factor_populations: population_section,
        entropy_ratio,
        curves: curve_section,
    })
}

/// Format a real number the way the text report prints it: four decimals,
/// scientific for extreme magnitudes, and explicit inf/nan.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a != 0.0 && (a >= 1e5 || a < 1e-4) {
        format!("{x:.3e}")
    } else {
        format!("{x:.4}")
    }
}

fn params_summary(params: &DistributionParams) -> String {
    match params {
        DistributionParams::DiscreteUniform(d) => format!("a={} b={}", d.a, d.b),
        DistributionParams::Geometric(d) => format!("p={}", fmt_real(d.p)),
        DistributionParams::Logarithmic(d) => format!("theta={}", fmt_real(d.theta)),
        DistributionParams::Poisson(d) => format!("lambda={}", fmt_real(d.lambda)),
        DistributionParams::NegBin(d) => format!("r={} p={}", d.r, fmt_real(d.p)),
        DistributionParams::Gamma(d) => {
            format!("shape={} scale={}", fmt_real(d.shape), fmt_real(d.scale))
        }
    }
}

/// The battery columns as one aligned text fragment, matching [`GOF_HEADER`].
pub fn gof_columns(g: &GofReport) -> String {
    format!(
        "{:>9} {:>9} {:>9} {:>9} {:>9} {:>9}",
        fmt_real(g.ks_d),
        fmt_real(g.p_ks),
        fmt_real(g.ad_a2),
        fmt_real(g.p_ad),
        fmt_real(g.cs),
        fmt_real(g.p_cs)
    )
}

/// Header line over [`gof_columns`] output.
pub const GOF_HEADER: &str = "        D      p_KS        A2      p_AD        CS      p_CS";

/// Render the report as aligned, human-readable text.
pub fn render_text(report: &PipelineReport) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(
        w,
        "pipeline report (schema {}, {})",
        report.schema_version, report.generated_by
    );

    let s = &report.screening;
    let _ = writeln!(w, "\n== screening ==");
    let chi_line = |r: &ChiSquareResult| {
        format!(
            "X2 = {:>9}  df = {:>3}  p = {}",
            fmt_real(r.statistic),
            r.df,
            fmt_real(r.p_value)
        )
    };
    let _ = writeln!(w, "full table       {}", chi_line(&s.full));
    let _ = writeln!(w, "row contributions (full-table margins):");
    for row in &s.row_contributions {
        let _ = writeln!(w, "  {:<18} {}", row.label, chi_line(&row.result));
    }
    if s.removed.is_empty() {
        let _ = writeln!(w, "removed: none");
    } else {
        for row in &s.removed {
            let _ = writeln!(w, "removed {:<18} {}", row.label, chi_line(&row.result));
        }
    }
    let _ = writeln!(w, "reduced table    {}", chi_line(&s.reduced));

    let f = &report.factors;
    let _ = writeln!(w, "\n== factors ==");
    let _ = writeln!(
        w,
        "residual S2 = {} after {} iterations ({})",
        fmt_real(f.factors.s_squared),
        f.factors.iterations,
        if f.factors.converged {
            "converged"
        } else {
            "iteration cap hit"
        }
    );
    let _ = writeln!(w, "row factors:");
    for (label, v) in f.row_labels.iter().zip(&f.factors.a) {
        let _ = writeln!(w, "  {:<18} {:>9}", label, fmt_real(*v));
    }
    let _ = writeln!(w, "col factors:");
    for (label, v) in f.col_labels.iter().zip(&f.factors.b) {
        let _ = writeln!(w, "  {:<18} {:>9}", label, fmt_real(*v));
    }

    let p = &report.pooled_fits;
    let _ = writeln!(
        w,
        "\n== pooled fits (n = {}, mean = {}, range {}..{}) ==",
        p.n,
        fmt_real(p.mean),
        p.min,
        p.max
    );
    let _ = writeln!(
        w,
        "{:<17} {:<24} {:>10}  {}    X2(df)      p_X2",
        "family", "params", "LE", GOF_HEADER
    );
    for fit in &p.fits {
        let chisq = match &fit.gof.chisq {
            Some(c) => format!(
                "{:>8}({:>2}) {:>9}",
                fmt_real(c.statistic),
                c.df,
                fmt_real(c.p_value)
            ),
            None => format!("{:>12} {:>9}", "-", "-"),
        };
        let _ = writeln!(
            w,
            "{:<17} {:<24} {:>10}  {} {}",
            fit.family,
            params_summary(&fit.gof_params),
            fmt_real(fit.fit.log_likelihood),
            gof_columns(&fit.gof),
            chisq
        );
    }
    for sk in &p.skipped {
        let _ = writeln!(w, "skipped {}: {}", sk.family, sk.reason);
    }
    for v in &p.unfittable {
        let verdict = if v.rejected { "no fit" } else { "fit exists" };
        let _ = writeln!(w, "{:?}: {} ({})", v.family, verdict, v.reason);
    }

    let se = &report.series_fits;
    let _ = writeln!(w, "\n== per-series Poisson fits ==");
    let _ = writeln!(
        w,
        "  {:<18} {:>9} {:>10}  {}",
        "series", "lambda", "LE", GOF_HEADER
    );
    for (title, list) in [("rows:", &se.rows), ("cols:", &se.cols)] {
        let _ = writeln!(w, "{title}");
        for fit in list {
            let _ = writeln!(
                w,
                "  {:<18} {:>9} {:>10}  {}",
                fit.label,
                fmt_real(fit.lambda),
                fmt_real(fit.log_likelihood),
                gof_columns(&fit.gof)
            );
        }
    }
    let _ = writeln!(
        w,
        "rounded-lambda means: rows {}, cols {}",
        fmt_real(se.row_lambda_display_mean),
        fmt_real(se.col_lambda_display_mean)
    );
    let _ = writeln!(
        w,
        "sum ln(1/p_CS) = {}; combined p = {} (chi-square), {} (Fisher)",
        fmt_real(se.sum_ln_inv_p_cs),
        fmt_real(se.combined.p_cs),
        fmt_real(se.fisher.p_value)
    );

    let r = &report.gamma_of_lambdas;
    let _ = writeln!(w, "\n== gamma fits of series rates ==");
    for group in &r.groups {
        let _ = writeln!(w, "group {} (n = {}):", group.name, group.values.len());
        let _ = writeln!(
            w,
            "   {:>9} {:>9} {:>9} {:>10}  {}",
            "shape", "scale", "p", "LE", GOF_HEADER
        );
        let row_line = |w: &mut String, row: &GammaFitRow, mark: &str| {
            let _ = writeln!(
                w,
                " {} {:>9} {:>9} {:>9} {:>10}  {}",
                mark,
                fmt_real(row.shape),
                fmt_real(row.scale),
                fmt_real(row.proportion),
                fmt_real(row.log_likelihood),
                gof_columns(&row.gof)
            );
        };
        row_line(w, &group.mle, "*");
        for row in &group.profile {
            row_line(w, row, " ");
        }
        let _ = writeln!(w, "  natural shape: {}", fmt_real(group.natural.shape));
    }
    let _ = writeln!(
        w,
        "complementarity: rows p {} + cols p {} = {}",
        fmt_real(r.complementarity.row_proportion),
        fmt_real(r.complementarity.col_proportion),
        fmt_real(r.complementarity.sum)
    );

    let nb = &report.negbin_profile;
    let _ = writeln!(w, "\n== negative binomial profile (pooled counts) ==");
    let _ = writeln!(
        w,
        "  {:>4} {:>9} {:>9} {:>10}  {}",
        "r", "p", "scale", "LE", GOF_HEADER
    );
    for row in &nb.rows {
        let mark = if row.r == nb.best_r { "*" } else { " " };
        let _ = writeln!(
            w,
            "{} {:>4} {:>9} {:>9} {:>10}  {}",
            mark,
            row.r,
            fmt_real(row.p),
            fmt_real(row.scale),
            fmt_real(row.log_likelihood),
            gof_columns(&row.gof)
        );
    }
    let _ = writeln!(w, "best natural r = {}", nb.best_r);

    let a = &report.associations;
    let _ = writeln!(w, "\n== associations ==");
    let _ = writeln!(
        w,
        "joint fit: r = {}  p = {}  LE = {}",
        fmt_real(a.joint.r_a),
        fmt_real(a.joint.p_a),
        fmt_real(a.joint.log_likelihood)
    );
    let _ = writeln!(
        w,
        "  {:>4} {:>9} {:>9} {:>11} {:>13} {:>9} {:>12} {:>9} {:>9}",
        "r", "p", "scale", "LE", "counts p_KS", "p_AD", "rates p_KS", "p_AD", "global p"
    );
    for row in &a.joint_gof {
        let _ = writeln!(
            w,
            "  {:>4} {:>9} {:>9} {:>11} {:>13} {:>9} {:>12} {:>9} {:>9}",
            row.r,
            fmt_real(row.p),
            fmt_real(row.scale),
            fmt_real(row.log_likelihood),
            fmt_real(row.counts.p_ks),
            fmt_real(row.counts.p_ad),
            fmt_real(row.rates.p_ks),
            fmt_real(row.rates.p_ad),
            fmt_real(row.global.p_cs)
        );
    }
    let _ = writeln!(
        w,
        "coupled fit: r_b = {}  r_p = {}  q = {}  p = {}  LE = {}",
        fmt_real(a.coupled.r_b),
        fmt_real(a.coupled.r_p),
        fmt_real(a.coupled.q),
        fmt_real(a.coupled.p_bp),
        fmt_real(a.coupled.log_likelihood)
    );
    let _ = writeln!(
        w,
        "  {:>4} {:>4} {:>9} {:>9} {:>11} {:>11} {:>9} {:>11} {:>9} {:>9}",
        "r_b", "r_p", "q", "p", "LE", "rows p_KS", "p_AD", "cols p_KS", "p_AD", "global p"
    );
    for row in &a.coupled_gof {
        let _ = writeln!(
            w,
            "  {:>4} {:>4} {:>9} {:>9} {:>11} {:>11} {:>9} {:>11} {:>9} {:>9}",
            row.r_b,
            row.r_p,
            fmt_real(row.q),
            fmt_real(row.p),
            fmt_real(row.log_likelihood),
            fmt_real(row.rows.p_ks),
            fmt_real(row.rows.p_ad),
            fmt_real(row.cols.p_ks),
            fmt_real(row.cols.p_ad),
            fmt_real(row.global.p_cs)
        );
    }

    let fp = &report.factor_populations;
    let _ = writeln!(w, "\n== factor populations ==");
    for (name, pop) in [("rows", &fp.rows), ("cols", &fp.cols)] {
        let _ = writeln!(
            w,
            "{name}: shape {}  scale {}  p {}  LE {}  h {}  (p_KS {}, p_AD {}, p_CS {})",
            fmt_real(pop.shape),
            fmt_real(pop.scale),
            fmt_real(pop.proportion),
            fmt_real(pop.log_likelihood),
            fmt_real(pop.entropy),
            fmt_real(pop.gof.p_ks),
            fmt_real(pop.gof.p_ad),
            fmt_real(pop.gof.p_cs)
        );
    }
    let _ = writeln!(
        w,
        "entropy ratio (cols/rows) = {}",
        fmt_real(fp.entropy_ratio)
    );

    let c = &report.curves;
    let _ = writeln!(w, "\n== curves ==");
    for (name, curve) in [("FB", &c.fb), ("FP", &c.fp), ("AA", &c.aa)] {
        let _ = writeln!(
            w,
            "{name}: {} points, mass {}, mean {}, variance {}",
            curve.grid.len(),
            fmt_real(curve.mass),
            fmt_real(curve.mean()),
            fmt_real(curve.variance())
        );
    }
    out
}
