use std::collections::BTreeMap;
use std::io::Write;

use super::retrieval::RecallCurve;
use crate::{Error, Result};

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Rows `k,category,recall`; category `all` holds the pooled curve.
pub fn write_recall_csv<W: Write>(w: W, curve: &RecallCurve) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "category", "recall"]).map_err(csv_err)?;
    let rows = std::iter::once(("all", &curve.overall)).chain(curve.per_category.iter().map(|(c, v)| (c.as_str(), v)));
    for (cat, values) in rows {
        for (i, r) in values.iter().enumerate() {
            out.write_record([(i + 1).to_string(), cat.to_string(), r.to_string()])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows `category,accuracy`.
pub fn write_accuracy_csv<W: Write>(w: W, accuracy: &BTreeMap<String, f64>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["category", "accuracy"]).map_err(csv_err)?;
    for (c, a) in accuracy {
        out.write_record([c.clone(), a.to_string()]).map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}
