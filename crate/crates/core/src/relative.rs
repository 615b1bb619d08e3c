//! Reference-pile calibration, relative size estimates and z-score
//! classification from ζ features.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureKind, FeatureRecord, SignalSource};
use crate::stats::{mean, sample_std};
use crate::{Error, Result};

/// Which features a calibration applies to. `epoch = None` accepts any
/// epoch as long as the selected features agree on one; `operator = None`
/// pools operators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scope {
    pub source: SignalSource,
    pub epoch: Option<u32>,
    pub operator: Option<String>,
}

impl Scope {
    pub fn new(source: SignalSource) -> Self {
        Scope {
            source,
            epoch: None,
            operator: None,
        }
    }

    pub fn with_epoch(mut self, epoch: u32) -> Self {
        self.epoch = Some(epoch);
        self
    }

    pub fn with_operator(mut self, operator: impl Into<String>) -> Self {
        self.operator = Some(operator.into());
        self
    }

    fn admits(&self, f: &FeatureRecord) -> bool {
        f.kind == FeatureKind::Zeta
            && f.source == self.source
            && self.epoch.is_none_or(|e| e == f.epoch)
            && self.operator.as_deref().is_none_or(|o| o == f.operator)
    }
}

/// Distribution of ζ over trials of the reference pile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCalibration {
    pub source: SignalSource,
    pub epoch: u32,
    pub operator: Option<String>,
    pub pile_label: String,
    pub mu_ref: f64,
    pub sigma_ref: f64,
    pub n_trials: usize,
    pub xbar_ref_mm: Option<f64>,
}

impl ReferenceCalibration {
    /// Build from already known statistics.
    pub fn from_stats(
        source: SignalSource,
        epoch: u32,
        pile_label: &str,
        mu_ref: f64,
        sigma_ref: f64,
        n_trials: usize,
    ) -> Result<Self> {
        if !(mu_ref > 0.0 && mu_ref.is_finite()) {
            return Err(Error::DegenerateReference(format!(
                "reference mean ζ must be positive, got {mu_ref}"
            )));
        }
        if !(sigma_ref >= 0.0) || n_trials < 2 {
            return Err(Error::InsufficientData(format!(
                "reference needs σ ≥ 0 and at least 2 trials, got σ = {sigma_ref}, n = {n_trials}"
            )));
        }
        Ok(ReferenceCalibration {
            source,
            epoch,
            operator: None,
            pile_label: pile_label.to_string(),
            mu_ref,
            sigma_ref,
            n_trials,
            xbar_ref_mm: None,
        })
    }

    pub fn with_xbar(mut self, xbar_mm: f64) -> Self {
        self.xbar_ref_mm = Some(xbar_mm);
        self
    }

    pub fn z_score(&self, zeta: f64) -> Result<f64> {
        if !(self.sigma_ref > 0.0) {
            return Err(Error::DegenerateReference(format!(
                "reference {} has zero spread; z-scores are undefined",
                self.pile_label
            )));
        }
        Ok((zeta - self.mu_ref) / self.sigma_ref)
    }

    fn same_sensor(&self, f: &FeatureRecord) -> bool {
        f.kind == FeatureKind::Zeta && f.source == self.source && f.epoch == self.epoch
    }
}

/// Mean and sample standard deviation of the reference pile's ζ within
/// `scope`.
pub fn calibrate(features: &[FeatureRecord], scope: &Scope, pile: &str) -> Result<ReferenceCalibration> {
    let chosen: Vec<&FeatureRecord> = features
        .iter()
        .filter(|f| f.pile_label == pile && scope.admits(f))
        .collect();
    let epoch = match chosen.first() {
        Some(f) => f.epoch,
        None => 0,
    };
    if chosen.iter().any(|f| f.epoch != epoch) {
        return Err(Error::Scope(format!(
            "reference {pile} on {} mixes sensor epochs; select one",
            scope.source
        )));
    }
    let values: Vec<f64> = chosen.iter().map(|f| f.value).collect();
    let (Some(mu), Some(sigma)) = (mean(&values), sample_std(&values)) else {
        return Err(Error::InsufficientData(format!(
            "reference {pile} on {} has {} ζ values, need 2",
            scope.source,
            values.len()
        )));
    };
    let mut cal = ReferenceCalibration::from_stats(scope.source, epoch, pile, mu, sigma, values.len())?;
    cal.operator = scope.operator.clone();
    Ok(cal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeEstimate {
    pub ratio: f64,
    pub ratio_std: f64,
    pub xbar_est_mm: Option<f64>,
    pub n: usize,
    /// Set when the estimate uses a calibration made for another operator.
    pub cross_operator: bool,
}

/// Ratio of the mean ζ of `zeta_i` to the reference mean, with first-order
/// error propagation from both sample spreads.
pub fn relative_size(zeta_i: &[FeatureRecord], reference: &ReferenceCalibration) -> Result<RelativeEstimate> {
    if zeta_i.is_empty() {
        return Err(Error::InsufficientData("no ζ values to compare".into()));
    }
    if let Some(f) = zeta_i.iter().find(|f| !reference.same_sensor(f)) {
        return Err(Error::Scope(format!(
            "trial {} ({} epoch {}, {:?}) does not match reference scope {} epoch {}",
            f.trial_id, f.source, f.epoch, f.kind, reference.source, reference.epoch
        )));
    }
    let values: Vec<f64> = zeta_i.iter().map(|f| f.value).collect();
    let m = mean(&values).unwrap_or(0.0);
    if !(m > 0.0) {
        return Err(Error::Domain(format!("mean ζ must be positive, got {m}")));
    }
    let s = sample_std(&values).unwrap_or(0.0);
    let ratio = m / reference.mu_ref;
    let ratio_std = ratio * ((s / m).powi(2) + (reference.sigma_ref / reference.mu_ref).powi(2)).sqrt();
    let cross_operator = match &reference.operator {
        Some(op) => zeta_i.iter().any(|f| &f.operator != op),
        None => false,
    };
    Ok(RelativeEstimate {
        ratio,
        ratio_std,
        xbar_est_mm: reference.xbar_ref_mm.map(|x| ratio * x),
        n: values.len(),
        cross_operator,
    })
}

/// Two-sided probability bound of the z rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Confidence {
    #[serde(rename = "0.90")]
    P90,
    #[serde(rename = "0.95")]
    P95,
    #[serde(rename = "0.99")]
    P99,
}

impl Confidence {
    pub const ALL: [Confidence; 3] = [Confidence::P90, Confidence::P95, Confidence::P99];

    pub fn z(self) -> f64 {
        match self {
            Confidence::P90 => 1.645,
            Confidence::P95 => 1.960,
            Confidence::P99 => 2.576,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Confidence::P90 => "0.90",
            Confidence::P95 => "0.95",
            Confidence::P99 => "0.99",
        }
    }
}

impl std::str::FromStr for Confidence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "0.90" | "0.9" | "90" => Ok(Confidence::P90),
            "0.95" | "95" => Ok(Confidence::P95),
            "0.99" | "99" => Ok(Confidence::P99),
            other => Err(Error::Config(format!(
                "confidence must be 0.90, 0.95 or 0.99, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Smaller,
    Indistinguishable,
    Larger,
}

/// `|z| = z_p` counts as indistinguishable.
pub fn classify(zeta: f64, reference: &ReferenceCalibration, p: Confidence) -> Result<SizeClass> {
    let z = reference.z_score(zeta)?;
    Ok(if z > p.z() {
        SizeClass::Larger
    } else if z < -p.z() {
        SizeClass::Smaller
    } else {
        SizeClass::Indistinguishable
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub smaller: usize,
    pub indistinguishable: usize,
    pub larger: usize,
}

impl ClassCounts {
    pub fn add(&mut self, c: SizeClass) {
        match c {
            SizeClass::Smaller => self.smaller += 1,
            SizeClass::Indistinguishable => self.indistinguishable += 1,
            SizeClass::Larger => self.larger += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.smaller + self.indistinguishable + self.larger
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSummary {
    pub pile: String,
    pub source: SignalSource,
    pub epoch: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    pub mu: f64,
    pub sigma: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xbar_mm: Option<f64>,
}

impl From<&ReferenceCalibration> for ReferenceSummary {
    fn from(c: &ReferenceCalibration) -> Self {
        ReferenceSummary {
            pile: c.pile_label.clone(),
            source: c.source,
            epoch: c.epoch,
            operator: c.operator.clone(),
            mu: c.mu_ref,
            sigma: c.sigma_ref,
            n: c.n_trials,
            xbar_mm: c.xbar_ref_mm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub pile: String,
    pub operator: String,
    pub source: SignalSource,
    pub epoch: u32,
    pub ratio_mean: f64,
    pub ratio_std: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xbar_est_mm: Option<f64>,
    /// Counts at the report's primary confidence.
    pub class_counts: ClassCounts,
    pub class_counts_by_p: BTreeMap<Confidence, ClassCounts>,
    pub is_reference: bool,
    pub cross_operator: bool,
}

/// Ratio table for one reference, in the layout of a material summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub reference: ReferenceSummary,
    pub confidence: Confidence,
    pub rows: Vec<ReportRow>,
}

/// Sort key placing "0/32" before "0/150" before "0/1500".
pub fn pile_order_key(label: &str) -> (f64, String) {
    let upper = label.rsplit('/').next().and_then(|s| s.trim().parse::<f64>().ok());
    (upper.unwrap_or(f64::INFINITY), label.to_string())
}

/// Per (pile, operator) group in the reference's sensor scope: the mean and
/// sample spread of per-trial ratios `ζ / μ_ref` plus class counts. The
/// reference group itself comes out as `1 ± σ_ref / μ_ref`.
pub fn summarize(features: &[FeatureRecord], reference: &ReferenceCalibration, p: Confidence) -> Result<RatioTable> {
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for f in features.iter().filter(|f| reference.same_sensor(f)) {
        groups
            .entry((f.pile_label.clone(), f.operator.clone()))
            .or_default()
            .push(f.value);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((pile, operator), values) in groups {
        if values.is_empty() {
            log::warn!("skipping empty group {pile}/{operator}");
            continue;
        }
        let ratios: Vec<f64> = values.iter().map(|v| v / reference.mu_ref).collect();
        let ratio_mean = mean(&ratios).unwrap_or(0.0);
        let ratio_std = sample_std(&ratios).unwrap_or(0.0);
        let mut by_p = BTreeMap::new();
        for conf in Confidence::ALL {
            let mut counts = ClassCounts::default();
            for &v in &values {
                counts.add(classify(v, reference, conf)?);
            }
            by_p.insert(conf, counts);
        }
        let cross_operator = reference.operator.as_ref().is_some_and(|o| o != &operator);
        rows.push(ReportRow {
            is_reference: pile == reference.pile_label,
            xbar_est_mm: reference.xbar_ref_mm.map(|x| ratio_mean * x),
            class_counts: by_p[&p],
            class_counts_by_p: by_p,
            pile,
            operator,
            source: reference.source,
            epoch: reference.epoch,
            ratio_mean,
            ratio_std,
            n: values.len(),
            cross_operator,
        });
    }
    rows.sort_by(|a, b| {
        pile_order_key(&a.pile)
            .partial_cmp(&pile_order_key(&b.pile))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.operator.cmp(&b.operator))
    });
    Ok(RatioTable {
        reference: reference.into(),
        confidence: p,
        rows,
    })
}

/// Mean-size ratios against a reference pile, e.g. from sieve analysis.
pub fn size_ratios(means_mm: &[(String, f64)], reference_pile: &str) -> Result<Vec<(String, f64)>> {
    let reference = means_mm
        .iter()
        .find(|(l, _)| l == reference_pile)
        .map(|(_, x)| *x)
        .ok_or_else(|| Error::Config(format!("reference pile {reference_pile} has no mean size")))?;
    if !(reference > 0.0) {
        return Err(Error::DegenerateReference(format!(
            "reference mean size {reference} is not positive"
        )));
    }
    Ok(means_mm.iter().map(|(l, x)| (l.clone(), x / reference)).collect())
}
