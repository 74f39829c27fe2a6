use serde::{Deserialize, Serialize};
use std::io::Write;

/// One cell of a success-rate or defense-rate table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub model: String,
    pub condition: String,
    pub n_b: usize,
    pub n_a: usize,
    pub rate: f64,
}

/// Writes rows as CSV with the header `model,condition,n_b,n_a,rate`.
pub fn write_rate_table<W: Write>(out: W, rows: &[RateRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    if rows.is_empty() {
        w.write_record(["model", "condition", "n_b", "n_a", "rate"])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_rows() {
        let mut buf = Vec::new();
        write_rate_table(
            &mut buf,
            &[RateRow {
                model: "stub".into(),
                condition: "1000us".into(),
                n_b: 3,
                n_a: 2,
                rate: 2.0 / 3.0,
            }],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("model,condition,n_b,n_a,rate"));
        assert!(lines.next().unwrap().starts_with("stub,1000us,3,2,0.666"));

        let mut empty = Vec::new();
        write_rate_table(&mut empty, &[]).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim(), "model,condition,n_b,n_a,rate");
    }
}
