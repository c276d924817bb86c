//! Constrained association fits: one negative binomial law tied to a Gamma
//! law on the rates through shared parameters, and a pair of Gamma laws whose
//! scales are forced to be reciprocal.

use factorfit::distributions::{fit_poisson, DistributionParams, GammaParams};
use factorfit::gof::{battery_counts, battery_real, combine_many};
use factorfit::independence::screen_rows;
use factorfit::mixture::{coupled_gamma_mle, joint_negbin_gamma_mle};
use factorfit::table::ContingencyTable;

fn main() -> factorfit::Result<()> {
    let table = screen_rows(&ContingencyTable::bundled_dataset(), 0.05)?.retained;
    let counts = table.pooled_values();

    let mut row_rates = Vec::new();
    for i in 0..table.n_rows() {
        let DistributionParams::Poisson(p) = fit_poisson(&table.row_series(i)?)?.params else {
            unreachable!()
        };
        row_rates.push(p.lambda);
    }
    let mut col_rates = Vec::new();
    for j in 0..table.n_cols() {
        let DistributionParams::Poisson(p) = fit_poisson(&table.col_series(j)?)?.params else {
            unreachable!()
        };
        col_rates.push(p.lambda);
    }
    let rates: Vec<f64> = row_rates.iter().chain(&col_rates).copied().collect();

    let joint = joint_negbin_gamma_mle(&counts, &rates)?;
    println!(
        "joint fit: r = {:.4}, p = {:.4}, LE = {:.4}",
        joint.r_a, joint.p_a, joint.log_likelihood
    );
    for alt in &joint.natural_alternatives {
        println!(
            "  integer r = {}: p = {:.4}, LE = {:.4}",
            alt.r, alt.p, alt.log_likelihood
        );
    }

    // Test the best integer variant on both samples it claims to describe.
    let best = joint.natural_alternatives[0];
    let nb = DistributionParams::NegBin(factorfit::distributions::NegBinParams {
        r: best.r as f64,
        p: best.p,
    });
    let counts_gof = battery_counts(&counts, &nb, false)?;
    let gamma = GammaParams::from_proportion(best.r as f64, best.p);
    let rates_gof = battery_real(&rates, |z| gamma.cdf(z))?;
    let global = combine_many(&[
        counts_gof.p_ks,
        counts_gof.p_ad,
        rates_gof.p_ks,
        rates_gof.p_ad,
    ])?;
    println!(
        "  r = {} battery: counts p_KS/p_AD = {:.4}/{:.4}, rates p_KS/p_AD = {:.4}/{:.4}, \
         global p = {:.4}",
        best.r, counts_gof.p_ks, counts_gof.p_ad, rates_gof.p_ks, rates_gof.p_ad, global.p_cs
    );

    let coupled = coupled_gamma_mle(&row_rates, &col_rates)?;
    println!(
        "\ncoupled fit: r_b = {:.4}, r_p = {:.4}, q = {:.4}, p = {:.4}, LE = {:.4}",
        coupled.r_b, coupled.r_p, coupled.q, coupled.p_bp, coupled.log_likelihood
    );
    for alt in &coupled.natural_alternatives {
        println!(
            "  integer (r_b, r_p) = ({}, {}): q = {:.4}, p = {:.4}, LE = {:.4}",
            alt.r_b, alt.r_p, alt.q, alt.p_bp, alt.log_likelihood
        );
    }

    let top = coupled.natural_alternatives[0];
    let rows_gamma = GammaParams {
        shape: top.r_b as f64,
        scale: top.q,
    };
    let cols_gamma = GammaParams {
        shape: top.r_p as f64,
        scale: 1.0 / top.q,
    };
    let rows_gof = battery_real(&row_rates, |z| rows_gamma.cdf(z))?;
    let cols_gof = battery_real(&col_rates, |z| cols_gamma.cdf(z))?;
    let global = combine_many(&[rows_gof.p_ks, rows_gof.p_ad, cols_gof.p_ks, cols_gof.p_ad])?;
    println!(
        "  ({}, {}) battery: rows p_KS/p_AD = {:.4}/{:.4}, cols p_KS/p_AD = {:.4}/{:.4}, \
         global p = {:.4}",
        top.r_b, top.r_p, rows_gof.p_ks, rows_gof.p_ad, cols_gof.p_ks, cols_gof.p_ad, global.p_cs
    );
    Ok(())
}
