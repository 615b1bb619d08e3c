//! Tabular outputs: feature rows and plot data as CSV.

use std::path::Path;

use crate::features::FeatureRecord;
use crate::relative::RatioTable;
use crate::{Error, Result};

/// Version of every JSON and CSV layout written by this crate.
pub const SCHEMA_VERSION: u32 = 1;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_features_csv(path: &Path, rows: &[FeatureRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        rows.push(rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            msg: e.to_string(),
        })?);
    }
    Ok(rows)
}

/// Ratio-versus-pile plot data, one line per table row.
pub fn write_ratio_plot_csv(path: &Path, tables: &[RatioTable]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "reference_pile",
        "source",
        "epoch",
        "pile",
        "operator",
        "ratio_mean",
        "ratio_std",
        "n",
    ])
    .map_err(|e| csv_err(path, e))?;
    for t in tables {
        for r in &t.rows {
            w.write_record([
                t.reference.pile.clone(),
                r.source.to_string(),
                r.epoch.to_string(),
                r.pile.clone(),
                r.operator.clone(),
                r.ratio_mean.to_string(),
                r.ratio_std.to_string(),
                r.n.to_string(),
            ])
            .map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Generic `(label, value)` plot series.
pub fn write_series_csv(path: &Path, header: [&str; 2], rows: &[(String, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for (l, v) in rows {
        w.write_record([l.clone(), v.to_string()])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{EndReason, FeatureKind, SignalSource};

    #[test]
    fn feature_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let row = FeatureRecord {
            trial_id: "t1".into(),
            pile_label: "0/32".into(),
            operator: "B".into(),
            source: SignalSource::Boom,
            epoch: 1,
            kind: FeatureKind::Zeta,
            value: 0.1 + 0.2,
            alpha1_s: 3.001,
            alpha2_s: 9.87654321,
            end_reason: EndReason::BucketExtension,
            f_min: 2.0,
            f_max: 500.0,
        };
        write_features_csv(&path, &[row.clone(), row.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("trial_id,pile_label,operator,source,epoch,kind,value"));
        assert!(text.contains(",boom,1,zeta,"));
        assert_eq!(read_features_csv(&path).unwrap(), vec![row.clone(), row]);
    }
}
