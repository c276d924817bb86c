//! Fit a Poisson rate to every row and column series, test each fit, and
//! combine the per-series p-values two ways: the product-form combined
//! statistic and Fisher's chi-square method.

use factorfit::distributions::{fit_poisson, DistributionParams};
use factorfit::gof::{battery_counts, combine_many, fisher_combine};
use factorfit::independence::screen_rows;
use factorfit::table::ContingencyTable;

fn main() -> factorfit::Result<()> {
    let table = screen_rows(&ContingencyTable::bundled_dataset(), 0.05)?.retained;

    let mut p_values = Vec::new();
    for (kind, count) in [("row", table.n_rows()), ("col", table.n_cols())] {
        for k in 0..count {
            let series = if kind == "row" {
                table.row_series(k)?
            } else {
                table.col_series(k)?
            };
            let fit = fit_poisson(&series)?;
            let DistributionParams::Poisson(p) = fit.params else {
                unreachable!()
            };
            let gof = battery_counts(&series.values, &fit.params, false)?;
            println!(
                "{} {:<16} lambda = {:>8.4}  LE = {:>9.4}  p_KS = {:.4}  p_AD = {:.4}  p_CS = {:.4}",
                kind, series.label, p.lambda, fit.log_likelihood, gof.p_ks, gof.p_ad, gof.p_cs
            );
            p_values.push(gof.p_cs);
        }
    }

    let combined = combine_many(&p_values)?;
    let fisher = fisher_combine(&p_values)?;
    println!("\ncombined over {} series:", p_values.len());
    println!(
        "  product form: CS = {:.4}, p = {:.4}",
        combined.cs, combined.p_cs
    );
    println!(
        "  Fisher: X2 = {:.4}, df = {}, p = {:.4}",
        fisher.statistic, fisher.df, fisher.p_value
    );
    Ok(())
}
