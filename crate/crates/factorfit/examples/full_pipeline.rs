//! Run every stage against the bundled table and print the text report, or
//! the JSON report when called with "json" as the first argument.

use factorfit::pipeline::{render_text, run_pipeline, PipelineConfig};
use factorfit::table::ContingencyTable;

fn main() -> factorfit::Result<()> {
    let table = ContingencyTable::bundled_dataset();
    let report = run_pipeline(&table, &PipelineConfig::default())?;

    if std::env::args().nth(1).as_deref() == Some("json") {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("report serializes")
        );
    } else {
        print!("{}", render_text(&report));
    }
    Ok(())
}
