//! Chi-square independence screening: test the whole table, rank each row's
//! contribution, then withdraw rows worst-first until the rest looks
//! homogeneous.

use factorfit::independence::{chi_square_independence, row_contributions, screen_rows};
use factorfit::table::ContingencyTable;

fn main() -> factorfit::Result<()> {
    let table = ContingencyTable::bundled_dataset();

    let full = chi_square_independence(&table)?;
    println!(
        "full table: X2 = {:.6}, df = {}, p = {:.4}",
        full.statistic, full.df, full.p_value
    );

    println!("\nper-row contributions (df = columns - 1):");
    let mut ranked = row_contributions(&table)?;
    ranked.sort_by(|a, b| b.1.statistic.total_cmp(&a.1.statistic));
    for (label, r) in &ranked {
        println!(
            "  {:<16} X2 = {:>9.6}  p = {:.6}",
            label, r.statistic, r.p_value
        );
    }

    let outcome = screen_rows(&table, 0.05)?;
    println!("\nwithdrawn at alpha = 0.05, in order:");
    for (label, r) in &outcome.removed {
        println!(
            "  {:<16} step contribution X2 = {:.6}, p = {:.6}",
            label, r.statistic, r.p_value
        );
    }

    let reduced = chi_square_independence(&outcome.retained)?;
    println!(
        "\nreduced table ({} rows): X2 = {:.6}, df = {}, p = {:.4}",
        outcome.retained.n_rows(),
        reduced.statistic,
        reduced.df,
        reduced.p_value
    );
    Ok(())
}
