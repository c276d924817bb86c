//! Chi-square independence analysis and outlier-row screening.

use crate::error::{Error, Result};
use crate::special::chi2_sf;
use crate::table::ContingencyTable;
use serde::Serialize;

/// A chi-square statistic with its degrees of freedom and upper-tail p.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
}

impl ChiSquareResult {
    fn new(statistic: f64, df: u32) -> Self {
        ChiSquareResult {
            statistic,
            df,
            p_value: chi2_sf(statistic, df),
        }
    }
}

/// Expected counts under independence, E_ij = row_i * col_j / total.
#[derive(Debug, Clone, Serialize)]
pub struct ExpectedMatrix {
    pub values: Vec<Vec<f64>>,
}

/// Result of sequential worst-first row screening.
#[derive(Debug, Clone, Serialize)]
pub struct ScreenOutcome {
    pub retained: ContingencyTable,
    /// Rows removed, in removal order, with the contribution that removed them
    /// (computed against the margins in effect at that step).
    pub removed: Vec<(String, ChiSquareResult)>,
}

pub fn expected_counts(t: &ContingencyTable) -> Result<ExpectedMatrix> {
    let total = t.grand_total();
    if total <= 0.0 {
        return Err(Error::validation("table grand total must be positive"));
    }
    let rows = t.row_totals();
    let cols = t.col_totals();
    let values = rows
        .iter()
        .map(|r| cols.iter().map(|c| r * c / total).collect())
        .collect();
    Ok(ExpectedMatrix { values })
}

/// Global chi-square test of independence with df = (m-1)(n-1).
pub fn chi_square_independence(t: &ContingencyTable) -> Result<ChiSquareResult> {
    let e = expected_counts(t)?;
    let mut stat = 0.0;
    for i in 0..t.n_rows() {
        for j in 0..t.n_cols() {
            let eij = e.values[i][j];
            if eij <= 0.0 {
                return Err(Error::validation(format!(
                    "expected count is zero at ({i},{j}); degenerate margin"
                )));
            }
            let d = t.cell(i, j) as f64 - eij;
            stat += d * d / eij;
        }
    }
    let df = (t.n_rows() as u32 - 1) * (t.n_cols() as u32 - 1);
    Ok(ChiSquareResult::new(stat, df))
}

/// Per-row contributions to the global statistic, each tested at df = n-1.
pub fn row_contributions(t: &ContingencyTable) -> Result<Vec<(String, ChiSquareResult)>> {
    let e = expected_counts(t)?;
    let df = t.n_cols() as u32 - 1;
    let mut out = Vec::with_capacity(t.n_rows());
    for i in 0..t.n_rows() {
        let mut stat = 0.0;
        for j in 0..t.n_cols() {
            let eij = e.values[i][j];
            if eij <= 0.0 {
                return Err(Error::validation(format!(
                    "expected count is zero at ({i},{j}); degenerate margin"
                )));
            }
            let d = t.cell(i, j) as f64 - eij;
            stat += d * d / eij;
        }
        out.push((t.row_labels()[i].clone(), ChiSquareResult::new(stat, df)));
    }
    Ok(out)
}

/// Iteratively remove the row with the smallest contribution p-value while
/// that p-value is below `alpha`, recomputing margins after each removal.
pub fn screen_rows(t: &ContingencyTable, alpha: f64) -> Result<ScreenOutcome> {
    if !(0.0..1.0).contains(&alpha) || alpha <= 0.0 {
        return Err(Error::validation(format!(
            "alpha must be in (0,1), got {alpha}"
        )));
    }
    let mut current = t.clone();
    let mut removed = Vec::new();
    loop {
        let contributions = row_contributions(&current)?;
        let worst = contributions
            .into_iter()
            .min_by(|a, b| a.1.p_value.total_cmp(&b.1.p_value))
            .expect("table has rows");
        if worst.1.p_value >= alpha {
            break;
        }
        if current.n_rows() <= 2 {
            return Err(Error::validation("screening would leave fewer than 2 rows"));
        }
        current = current.drop_rows(&[worst.0.as_str()])?;
        removed.push(worst);
    }
    Ok(ScreenOutcome {
        retained: current,
        removed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn rank1_table() -> ContingencyTable {
        // O_ij = u_i * v_j holds exactly, so E == O and every statistic is 0.
        let u = [2u32, 3, 5];
        let v = [1u32, 4, 2, 3];
        ContingencyTable::new(
            u.iter().map(|x| format!("r{x}")).collect(),
            v.iter().map(|x| format!("c{x}")).collect(),
            u.iter()
                .map(|a| v.iter().map(|b| a * b).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn expected_counts_hand_case() {
        let t = ContingencyTable::new(
            vec!["a".into(), "b".into()],
            vec!["x".into(), "y".into()],
            vec![vec![1, 3], vec![2, 4]],
        )
        .unwrap();
        let e = expected_counts(&t).unwrap();
        close(e.values[0][0], 1.2, 1e-12);
        close(e.values[0][1], 2.8, 1e-12);
        close(e.values[1][0], 1.8, 1e-12);
        close(e.values[1][1], 4.2, 1e-12);
    }

    #[test]
    fn expected_counts_preserve_margins() {
        let t = ContingencyTable::bundled_dataset();
        let e = expected_counts(&t).unwrap();
        for (i, rt) in t.row_totals().iter().enumerate() {
            let s: f64 = e.values[i].iter().sum();
            close(s, *rt, 1e-9 * rt.max(1.0));
        }
        for (j, ct) in t.col_totals().iter().enumerate() {
            let s: f64 = e.values.iter().map(|r| r[j]).sum();
            close(s, *ct, 1e-9 * ct.max(1.0));
        }
    }

    #[test]
    fn rank1_table_is_exactly_independent() {
        let t = rank1_table();
        let g = chi_square_independence(&t).unwrap();
        close(g.statistic, 0.0, 1e-9);
        close(g.p_value, 1.0, 1e-12);
        for (_, c) in row_contributions(&t).unwrap() {
            close(c.statistic, 0.0, 1e-9);
        }
        let s = screen_rows(&t, 0.05).unwrap();
        assert!(s.removed.is_empty());
    }

    #[test]
    fn full_dataset_statistics() {
        let t = ContingencyTable::bundled_dataset();
        let g = chi_square_independence(&t).unwrap();
        close(g.statistic, 69.2604, 1e-3);
        assert_eq!(g.df, 90);

        let rows = row_contributions(&t).unwrap();
        let pm = rows.iter().find(|(l, _)| l == "P. mirabilis").unwrap();
        let pa = rows.iter().find(|(l, _)| l == "P. aeruginosa").unwrap();
        close(pm.1.statistic, 29.0742, 1e-3);
        close(pa.1.statistic, 26.2106, 1e-3);
        assert_eq!(pm.1.df, 9);
        assert!(pm.1.p_value < 0.01);
        assert!(pa.1.p_value < 0.02);

        // Contributions sum to the global statistic.
        let sum: f64 = rows.iter().map(|(_, c)| c.statistic).sum();
        close(sum, g.statistic, 1e-9 * g.statistic);
    }

    #[test]
    fn reduced_dataset_statistics() {
        let t = ContingencyTable::bundled_dataset()
            .drop_rows(&["P. mirabilis", "P. aeruginosa"])
            .unwrap();
        let g = chi_square_independence(&t).unwrap();
        close(g.statistic, 8.4921, 1e-3);
        assert_eq!(g.df, 72);
        assert!(g.p_value > 0.9999);
    }

    #[test]
    fn screening_matches_one_step_removal() {
        let t = ContingencyTable::bundled_dataset();
        let s = screen_rows(&t, 0.05).unwrap();
        let removed: Vec<&str> = s.removed.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(removed, vec!["P. mirabilis", "P. aeruginosa"]);
        assert_eq!(s.retained.n_rows(), 9);
        // Sequential removal lands on the same table as removing both at once.
        let one_step = t.drop_rows(&["P. mirabilis", "P. aeruginosa"]).unwrap();
        assert_eq!(s.retained, one_step);
        // A much stricter alpha removes nothing.
        assert!(screen_rows(&t, 1e-6).unwrap().removed.is_empty());
    }
}
