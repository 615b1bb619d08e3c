//! Trial-to-feature processing with the default field parameters.

use serde::{Deserialize, Serialize};

use crate::cwt::{transform, Scalogram, WaveletSpec};
use crate::features::{
    beta_from, default_band, detect_window, scale_response, zeta_from, Axis, DetectorConfig, DetectorSource,
    ExcavationWindow, FeatureRecord, SignalSource, WaveletFeature,
};
use crate::relative::Confidence;
use crate::telemetry::{highpass, lift_force, Channel, ChannelName, CylinderGeometry, TrialRecord};
use crate::{Error, Result};

/// Onset detectors per feature source. In a config file every field is
/// optional and falls back to that source's default detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "DetectorsFile")]
pub struct Detectors {
    pub bucket: DetectorConfig,
    pub boom: DetectorConfig,
    pub lift: DetectorConfig,
}

impl Default for Detectors {
    fn default() -> Self {
        Detectors {
            bucket: DetectorConfig::for_source(SignalSource::Bucket),
            boom: DetectorConfig::for_source(SignalSource::Boom),
            lift: DetectorConfig::for_source(SignalSource::Lift),
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectorsFile {
    bucket: DetectorPatch,
    boom: DetectorPatch,
    lift: DetectorPatch,
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectorPatch {
    source: Option<DetectorSource>,
    axis: Option<Axis>,
    jerk_threshold: Option<f64>,
    end_extension_mm: Option<f64>,
    time_cap_s: Option<f64>,
}

impl DetectorPatch {
    fn apply(self, mut d: DetectorConfig) -> DetectorConfig {
        d.source = self.source.unwrap_or(d.source);
        d.axis = self.axis.unwrap_or(d.axis);
        d.jerk_threshold = self.jerk_threshold.unwrap_or(d.jerk_threshold);
        d.end_extension_mm = self.end_extension_mm.unwrap_or(d.end_extension_mm);
        d.time_cap_s = self.time_cap_s.unwrap_or(d.time_cap_s);
        d
    }
}

impl From<DetectorsFile> for Detectors {
    fn from(f: DetectorsFile) -> Self {
        let d = Detectors::default();
        Detectors {
            bucket: f.bucket.apply(d.bucket),
            boom: f.boom.apply(d.boom),
            lift: f.lift.apply(d.lift),
        }
    }
}

/// High-pass cutoffs in Hz applied before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Cutoffs {
    pub bucket: f64,
    pub boom: f64,
    pub lift: f64,
}

impl Default for Cutoffs {
    fn default() -> Self {
        Cutoffs {
            bucket: 4.0,
            boom: 2.0,
            lift: 2.0,
        }
    }
}

/// Frequency band of ζ. Unset ends default to the cutoff and the top of the
/// scale grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandPolicy {
    pub f_min_hz: Option<f64>,
    pub f_max_hz: Option<f64>,
}

/// Reference pile selection for calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    pub pile: String,
    pub operator: Option<String>,
    pub epoch: Option<u32>,
    /// Known mean size of the reference pile, mm.
    pub xbar_mm: Option<f64>,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            pile: "0/90".into(),
            operator: None,
            epoch: None,
            xbar_mm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detectors: Detectors,
    pub cutoffs: Cutoffs,
    pub wavelet: WaveletSpec,
    pub band: BandPolicy,
    pub geometry: CylinderGeometry,
    pub reference: ReferenceSpec,
    pub confidence: Confidence,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            detectors: Detectors::default(),
            cutoffs: Cutoffs::default(),
            wavelet: WaveletSpec::default(),
            band: BandPolicy::default(),
            geometry: CylinderGeometry::default(),
            reference: ReferenceSpec::default(),
            confidence: Confidence::P90,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        for d in [self.detectors.bucket, self.detectors.boom, self.detectors.lift] {
            d.validate()?;
        }
        for (name, c) in [
            ("bucket", self.cutoffs.bucket),
            ("boom", self.cutoffs.boom),
            ("lift", self.cutoffs.lift),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("{name} cutoff must be positive, got {c}")));
            }
        }
        self.wavelet.validate().map_err(cfg)?;
        CylinderGeometry::new(self.geometry.area_base_m2, self.geometry.area_rod_m2).map_err(cfg)?;
        if let (Some(a), Some(b)) = (self.band.f_min_hz, self.band.f_max_hz) {
            if !(a < b) {
                return Err(Error::Config(format!("band [{a}, {b}] Hz is empty")));
            }
        }
        Ok(())
    }

    pub fn detector(&self, source: SignalSource) -> &DetectorConfig {
        match source {
            SignalSource::Bucket => &self.detectors.bucket,
            SignalSource::Boom => &self.detectors.boom,
            SignalSource::Lift => &self.detectors.lift,
        }
    }

    pub fn cutoff(&self, source: SignalSource) -> f64 {
        match source {
            SignalSource::Bucket => self.cutoffs.bucket,
            SignalSource::Boom => self.cutoffs.boom,
            SignalSource::Lift => self.cutoffs.lift,
        }
    }
}

/// The unfiltered channel analysed for `source`.
pub fn source_signal(trial: &TrialRecord, source: SignalSource, geometry: &CylinderGeometry) -> Result<Channel> {
    match source.accel_channel() {
        Some(name) => Ok(trial.channel(name)?.clone()),
        None => lift_force(
            trial.channel(ChannelName::PBase)?,
            trial.channel(ChannelName::PRod)?,
            geometry,
        ),
    }
}

/// Intermediate products of one (trial, source) evaluation.
#[derive(Debug, Clone)]
pub struct SourceAnalysis {
    pub window: ExcavationWindow,
    pub scalogram: Scalogram,
    pub beta: WaveletFeature,
    pub zeta: WaveletFeature,
}

pub fn analyze(trial: &TrialRecord, source: SignalSource, cfg: &PipelineConfig) -> Result<SourceAnalysis> {
    let window = detect_window(trial, cfg.detector(source))?;
    let cutoff = cfg.cutoff(source);
    let filtered = highpass(&source_signal(trial, source, &cfg.geometry)?, cutoff)?;
    let scalogram = transform(&filtered, (window.alpha1_s, window.alpha2_s), &cfg.wavelet)?;
    let response = scale_response(&scalogram, &window, trial.mass_or_unit())?;
    let (lo, hi) = default_band(&scalogram, cutoff);
    let band = (cfg.band.f_min_hz.unwrap_or(lo), cfg.band.f_max_hz.unwrap_or(hi));
    let zeta = zeta_from(&response, &window, band, cutoff)?;
    let beta = beta_from(&response, &window);
    Ok(SourceAnalysis {
        window,
        scalogram,
        beta,
        zeta,
    })
}

/// β and ζ rows for one trial and source.
pub fn trial_features(trial: &TrialRecord, source: SignalSource, cfg: &PipelineConfig) -> Result<[FeatureRecord; 2]> {
    let a = analyze(trial, source, cfg)?;
    Ok([
        FeatureRecord::new(trial, source, &a.beta),
        FeatureRecord::new(trial, source, &a.zeta),
    ])
}

/// ζ alone, for callers that only need the value.
pub fn trial_zeta(trial: &TrialRecord, source: SignalSource, cfg: &PipelineConfig) -> Result<f64> {
    Ok(analyze(trial, source, cfg)?.zeta.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_detector_overrides_keep_source_defaults() {
        let cfg: PipelineConfig =
            serde_json::from_str(r#"{"detectors": {"boom": {"jerk_threshold": 600.0}}, "cutoffs": {"bucket": 5.0}}"#)
                .unwrap();
        assert_eq!(cfg.detectors.boom.jerk_threshold, 600.0);
        assert_eq!(cfg.detectors.boom.axis, DetectorConfig::boom().axis);
        assert_eq!(cfg.detectors.bucket, DetectorConfig::bucket());
        assert_eq!(cfg.cutoffs.bucket, 5.0);
        assert_eq!(cfg.cutoffs.boom, 2.0);
        let round: PipelineConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"cutofs": {}}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"detectors": {"bucket": {"threshold": 1.0}}}"#).is_err());
    }
}
