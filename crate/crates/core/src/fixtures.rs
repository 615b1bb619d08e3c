//! Laboratory sieve tables and regressed Rosin-Rammler parameters of the four
//! crushed-aggregate piles used as fixtures.

use crate::granulometry::{RosinRammlerModel, SieveTable};
use crate::Result;

pub const PILE_LABELS: [&str; 4] = ["0/32", "0/63", "0/90", "0/150"];

const SIEVE_CSV: [&str; 4] = [
    include_str!("../data/sieve_0_32.csv"),
    include_str!("../data/sieve_0_63.csv"),
    include_str!("../data/sieve_0_90.csv"),
    include_str!("../data/sieve_0_150.csv"),
];

/// Laboratory sample masses, kg.
const SAMPLE_MASS_KG: [f64; 4] = [25.0, 70.0, 90.0, 225.0];

/// Published regression results: (label, n, x_c mm, mean size mm).
pub const PUBLISHED_RR: [(&str, f64, f64, f64); 4] = [
    ("0/32", 0.8322, 12.0, 13.0),
    ("0/63", 0.7506, 16.0, 19.0),
    ("0/90", 0.5664, 20.0, 33.0),
    ("0/150", 0.8519, 78.0, 84.0),
];

/// Rock density measured by the laboratory, t/m³.
pub const ROCK_DENSITY_T_PER_M3: f64 = 2.63;

pub fn sieve_csv(label: &str) -> Option<&'static str> {
    PILE_LABELS.iter().position(|l| *l == label).map(|i| SIEVE_CSV[i])
}

pub fn sieve_table(label: &str) -> Option<Result<SieveTable>> {
    let i = PILE_LABELS.iter().position(|l| *l == label)?;
    Some(SieveTable::from_csv_str(SIEVE_CSV[i], SAMPLE_MASS_KG[i], label))
}

pub fn sieve_tables() -> Result<Vec<SieveTable>> {
    PILE_LABELS
        .iter()
        .map(|l| sieve_table(l).expect("bundled label"))
        .collect()
}

pub fn published_model(label: &str) -> Option<RosinRammlerModel> {
    PUBLISHED_RR
        .iter()
        .find(|r| r.0 == label)
        .map(|r| RosinRammlerModel { n: r.1, x_c_mm: r.2 })
}

pub fn published_mean_mm(label: &str) -> Option<f64> {
    PUBLISHED_RR.iter().find(|r| r.0 == label).map(|r| r.3)
}
