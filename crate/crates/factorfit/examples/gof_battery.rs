//! Run each goodness-of-fit test by hand on one fitted family: two-sided
//! Kolmogorov-Smirnov with the exact finite-n tail, Anderson-Darling,
//! greedy-binned chi-square, and the combined statistic over the two
//! distribution-free p-values.

use factorfit::distributions::{DistributionParams, NegBinParams};
use factorfit::gof::{ad_test, chisq_gof, combine_pair, ks_test, SampleKind};
use factorfit::independence::screen_rows;
use factorfit::special::{kolmogorov_exact_sf, kolmogorov_sf};
use factorfit::table::ContingencyTable;

fn main() -> factorfit::Result<()> {
    let table = screen_rows(&ContingencyTable::bundled_dataset(), 0.05)?.retained;
    let counts = table.pooled_values();
    let xs: Vec<f64> = counts.iter().map(|v| *v as f64).collect();

    // Negative binomial at reporting precision for the pooled counts.
    let dist = DistributionParams::NegBin(NegBinParams { r: 11.0, p: 0.609 });
    let cdf = |t: f64| dist.cdf_at(t as u32);

    let ks = ks_test(&xs, cdf)?;
    println!(
        "K-S:  D = {:.6}, exact p = {:.6} (n = {})",
        ks.d, ks.p_value, ks.n
    );
    let asymptotic = kolmogorov_sf((ks.n as f64).sqrt() * ks.d);
    println!(
        "      asymptotic tail at the same D: {:.6} vs exact {:.6}",
        asymptotic,
        kolmogorov_exact_sf(ks.n, ks.d)
    );

    let ad = ad_test(&xs, cdf, SampleKind::Integer)?;
    println!(
        "A-D:  A2 = {:.6}, p = {:.6} (case-0 asymptotic {:.6}, clamped: {})",
        ad.a2, ad.p_value, ad.p_asymptotic, ad.clamped
    );

    let chisq = chisq_gof(&counts, &dist, 5.0)?;
    println!(
        "X2:   {:.6} on {} bins, df = {}, p = {:.6}",
        chisq.statistic, chisq.n_bins, chisq.df, chisq.p_value
    );

    let combined = combine_pair(ks.p_value, ad.p_value);
    println!(
        "combined: CS = {:.6}, p = {:.6}",
        combined.cs, combined.p_cs
    );
    Ok(())
}
