//! Treat the fitted Poisson rates themselves as a sample and fit Gamma
//! populations: free MLE, a profile over integer shapes, and the
//! complementarity of the row and column proportions at their natural shapes.

use factorfit::distributions::{
    fit_gamma, fit_poisson, profile_gamma, DistributionParams, FitResult, GammaParams,
};
use factorfit::independence::screen_rows;
use factorfit::mixture::complementarity_check;
use factorfit::table::ContingencyTable;

fn gamma_of(params: &DistributionParams) -> GammaParams {
    match params {
        DistributionParams::Gamma(g) => *g,
        _ => unreachable!(),
    }
}

fn report(name: &str, values: &[f64]) -> factorfit::Result<GammaParams> {
    let free_fit = fit_gamma(values)?;
    let free = gamma_of(&free_fit.params);
    println!(
        "{name}: n = {}, shape = {:.4}, scale = {:.4}, p = {:.4}, LE = {:.4}",
        values.len(),
        free.shape,
        free.scale,
        free.scale / (1.0 + free.scale),
        free_fit.log_likelihood
    );

    let base = free.shape.floor().max(1.0) as i64;
    let shapes: Vec<f64> = (base - 2..=base + 3)
        .filter(|s| *s >= 1)
        .map(|s| s as f64)
        .collect();
    let mut best: Option<FitResult> = None;
    for fit in profile_gamma(values, &shapes)? {
        let g = gamma_of(&fit.params);
        println!(
            "  shape {:>2}: scale = {:.4}, p = {:.4}, LE = {:.4}",
            g.shape,
            g.scale,
            g.scale / (1.0 + g.scale),
            fit.log_likelihood
        );
        if best.is_none_or(|b| fit.log_likelihood > b.log_likelihood) {
            best = Some(fit);
        }
    }
    Ok(gamma_of(&best.unwrap().params))
}

fn main() -> factorfit::Result<()> {
    let table = screen_rows(&ContingencyTable::bundled_dataset(), 0.05)?.retained;

    let row_rates: Vec<f64> = (0..table.n_rows())
        .map(|i| {
            let DistributionParams::Poisson(p) = fit_poisson(&table.row_series(i)?)?.params else {
                unreachable!()
            };
            Ok(p.lambda)
        })
        .collect::<factorfit::Result<_>>()?;
    let col_rates: Vec<f64> = (0..table.n_cols())
        .map(|j| {
            let DistributionParams::Poisson(p) = fit_poisson(&table.col_series(j)?)?.params else {
                unreachable!()
            };
            Ok(p.lambda)
        })
        .collect::<factorfit::Result<_>>()?;

    let all: Vec<f64> = row_rates.iter().chain(&col_rates).copied().collect();
    report("all rates", &all)?;
    let best_rows = report("row rates", &row_rates)?;
    let best_cols = report("col rates", &col_rates)?;

    let total = complementarity_check(&best_rows, &best_cols);
    println!(
        "\nnatural-shape proportions: rows {:.4} + cols {:.4} = {:.4}",
        best_rows.scale / (1.0 + best_rows.scale),
        best_cols.scale / (1.0 + best_cols.scale),
        total
    );
    Ok(())
}
