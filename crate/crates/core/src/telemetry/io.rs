//! Trial files: a JSON manifest next to per-channel (`t_s,value`) or wide
//! (`t_s,<name>,...`) CSV files.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Channel, ChannelName, TrialRecord};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub name: ChannelName,
    pub file: String,
    pub rate_hz: f64,
    pub units: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    pub trial_id: String,
    pub pile_label: String,
    pub operator: String,
    pub day: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_mass_kg: Option<f64>,
    pub channels: Vec<ChannelEntry>,
}

impl TrialManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: TrialManifest =
            serde_json::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
        if let Some(mass) = m.payload_mass_kg {
            if !(mass > 0.0) {
                return Err(Error::Schema(format!(
                    "{}: payload_mass_kg must be positive, got {mass}",
                    path.display()
                )));
            }
        }
        Ok(m)
    }
}

struct Table {
    header: Vec<String>,
    columns: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                msg: format!("{other:?}"),
            },
        })?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: e.to_string(),
        })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("t_s") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            msg: "header must start with `t_s`".into(),
        });
    }
    let mut columns = vec![Vec::new(); header.len()];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            msg: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        for (col, cell) in columns.iter_mut().zip(rec.iter()) {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                msg: format!("non-numeric cell `{cell}`"),
            })?;
            col.push(v);
        }
    }
    Ok(Table { header, columns })
}

/// Load every channel declared by `manifest`; file paths resolve against `base_dir`.
pub fn load_trial(manifest: &TrialManifest, base_dir: &Path) -> Result<TrialRecord> {
    let mut tables: HashMap<String, Table> = HashMap::new();
    let mut channels = BTreeMap::new();
    for entry in &manifest.channels {
        if !(entry.rate_hz > 0.0) {
            return Err(Error::Schema(format!(
                "channel {} declares non-positive rate {}",
                entry.name, entry.rate_hz
            )));
        }
        if !tables.contains_key(&entry.file) {
            let t = read_table(&base_dir.join(&entry.file))?;
            tables.insert(entry.file.clone(), t);
        }
        let table = &tables[&entry.file];
        let col = table
            .header
            .iter()
            .position(|h| h == entry.name.as_str())
            .or_else(|| (table.header.len() == 2 && table.header[1] == "value").then_some(1))
            .ok_or_else(|| {
                Error::Schema(format!(
                    "channel `{}` declared in manifest but absent from {}",
                    entry.name, entry.file
                ))
            })?;
        let samples = table.columns[col].clone();
        if samples.is_empty() {
            return Err(Error::Schema(format!("channel `{}` has no samples", entry.name)));
        }
        let t0 = table.columns[0][0];
        let ch = Channel::new(entry.name.as_str(), entry.rate_hz, t0, samples)?.with_units(&entry.units);
        channels.insert(entry.name, ch);
    }
    Ok(TrialRecord {
        trial_id: manifest.trial_id.clone(),
        pile_label: manifest.pile_label.clone(),
        operator: manifest.operator.clone(),
        day: manifest.day,
        payload_mass_kg: manifest.payload_mass_kg,
        channels,
    })
}

/// Load the trial whose manifest lives at `manifest_path`.
pub fn load_trial_dir(manifest_path: &Path) -> Result<TrialRecord> {
    let manifest = TrialManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    load_trial(&manifest, base)
}

/// Write one `t_s,value` CSV per channel plus `manifest.json` into `dir`.
/// Returns the manifest path.
pub fn write_trial(trial: &TrialRecord, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (name, ch) in &trial.channels {
        let file = format!("{name}.csv");
        let path = dir.join(&file);
        let mut out = String::with_capacity(ch.len() * 24 + 16);
        out.push_str("t_s,value\n");
        for (k, v) in ch.samples.iter().enumerate() {
            out.push_str(&format!("{},{}\n", ch.time(k), v));
        }
        fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
        entries.push(ChannelEntry {
            name: *name,
            file,
            rate_hz: ch.rate_hz,
            units: if ch.units.is_empty() {
                name.units().to_string()
            } else {
                ch.units.clone()
            },
        });
    }
    let manifest = TrialManifest {
        trial_id: trial.trial_id.clone(),
        pile_label: trial.pile_label.clone(),
        operator: trial.operator.clone(),
        day: trial.day,
        payload_mass_kg: trial.payload_mass_kg,
        channels: entries,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    f.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
