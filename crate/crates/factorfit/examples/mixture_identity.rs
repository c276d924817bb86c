//! Verify by adaptive quadrature that a Poisson law whose rate is Gamma
//! distributed marginalizes to a negative binomial, and show the matching
//! mixing density.

use factorfit::distributions::NegBinParams;
use factorfit::mixture::negbin_via_mixture;

fn main() -> factorfit::Result<()> {
    let nb = NegBinParams { r: 11.0, p: 0.609 };
    let mixing = nb.mixing_gamma();
    println!(
        "NegBin(r = {}, p = {}) is Poisson mixed over Gamma(shape = {}, scale = {:.6})",
        nb.r, nb.p, mixing.shape, mixing.scale
    );

    println!(
        "\n{:>3} {:>14} {:>14} {:>10}",
        "x", "closed form", "quadrature", "gap"
    );
    let mut worst: f64 = 0.0;
    for x in [0u32, 1, 5, 10, 17, 25, 40] {
        let direct = nb.mass(x);
        let integrated = negbin_via_mixture(nb.r, nb.p, x)?;
        let gap = (direct - integrated).abs();
        worst = worst.max(gap);
        println!("{x:>3} {direct:>14.10} {integrated:>14.10} {gap:>10.2e}");
    }
    println!("\nlargest absolute gap: {worst:.2e}");

    let mass: f64 = (0..200).map(|x| nb.mass(x)).sum();
    println!("mass of the first 200 terms: {mass:.12}");
    Ok(())
}
