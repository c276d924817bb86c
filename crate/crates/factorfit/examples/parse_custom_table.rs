//! Load a table from CSV text and run it through screening and
//! factorization. A table of exact products factors with zero residual and
//! loses no rows to screening.

use factorfit::factorize::{als_fit, residual};
use factorfit::independence::screen_rows;
use factorfit::table::ContingencyTable;

const CSV: &str = "\
,east,center,west
north,6,8,10
middle,9,12,15
south,12,16,20
";

fn main() -> factorfit::Result<()> {
    let table = ContingencyTable::parse_csv(CSV)?;
    println!(
        "parsed {} x {} table, grand total {}",
        table.n_rows(),
        table.n_cols(),
        table.grand_total()
    );

    let outcome = screen_rows(&table, 0.05)?;
    println!("rows withdrawn: {}", outcome.removed.len());

    let factors = als_fit(&outcome.retained, 1e-12, 10_000)?;
    println!("residual S2 = {:.3e}", factors.s_squared);
    println!(
        "check against the table: {:.3e}",
        residual(&factors, &outcome.retained)?
    );

    for (label, a) in table.row_labels().iter().zip(&factors.a) {
        println!("  {:<8} a = {:.4}", label, a);
    }
    for (label, b) in table.col_labels().iter().zip(&factors.b) {
        println!("  {:<8} b = {:.4}", label, b);
    }
    println!(
        "a[0] * b[0] = {:.4} (cell value {})",
        factors.a[0] * factors.b[0],
        table.cell(0, 0)
    );
    Ok(())
}
