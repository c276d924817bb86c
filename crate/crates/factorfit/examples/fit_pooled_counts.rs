//! Fit the discrete families to the pooled cell counts of the screened table
//! and compare log-likelihoods, then show which bounded-support families
//! cannot be fitted at all.

use factorfit::distributions::{
    fit_geometric, fit_logarithmic, fit_negbin_natural_r, fit_poisson, fit_uniform_moments,
    reject_unfittable, BoundedFamily,
};
use factorfit::independence::screen_rows;
use factorfit::table::{ContingencyTable, SeriesSample};

fn main() -> factorfit::Result<()> {
    let table = screen_rows(&ContingencyTable::bundled_dataset(), 0.05)?.retained;
    let counts = table.pooled_values();
    let mean = counts.iter().map(|v| *v as f64).sum::<f64>() / counts.len() as f64;
    println!("pooled sample: n = {}, mean = {:.4}", counts.len(), mean);

    let pooled_series = SeriesSample::new("pooled", counts.clone())?;
    let fits = [
        ("discrete uniform", fit_uniform_moments(&counts)?),
        ("geometric", fit_geometric(&counts)?),
        ("logarithmic", fit_logarithmic(&counts)?),
        ("negative binomial", fit_negbin_natural_r(&counts, 64)?),
        ("poisson", fit_poisson(&pooled_series)?),
    ];

    println!("\n{:<18} {:>12}  params", "family", "LE");
    for (name, fit) in &fits {
        println!(
            "{:<18} {:>12.4}  {:?}",
            name, fit.log_likelihood, fit.params
        );
    }

    println!("\nbounded-support families:");
    for family in [
        BoundedFamily::Bernoulli,
        BoundedFamily::Binomial,
        BoundedFamily::Hypergeometric,
    ] {
        let verdict = reject_unfittable(&counts, family)?;
        let state = if verdict.rejected {
            "no fit"
        } else {
            "fit exists"
        };
        println!("  {:?}: {} ({})", verdict.family, state, verdict.reason);
    }
    Ok(())
}
