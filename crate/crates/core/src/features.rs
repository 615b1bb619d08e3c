//! Excavation window detection and the wavelet features β and ζ.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cwt::Scalogram;
use crate::stats::trapz_clipped;
use crate::telemetry::{derivative, ChannelName, TrialRecord};
use crate::{Error, Result};

/// Signal a feature is computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalSource {
    /// Bucket IMU, axis along the direction of travel (z).
    Bucket,
    /// Boom IMU, axis along the direction of travel (x).
    Boom,
    /// Lift cylinder force from the two pressure channels.
    Lift,
}

impl SignalSource {
    pub const ALL: [SignalSource; 3] = [SignalSource::Bucket, SignalSource::Boom, SignalSource::Lift];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalSource::Bucket => "bucket",
            SignalSource::Boom => "boom",
            SignalSource::Lift => "lift",
        }
    }

    /// Acceleration channel analysed for IMU sources.
    pub fn accel_channel(self) -> Option<ChannelName> {
        match self {
            SignalSource::Bucket => Some(ChannelName::BucketAccZ),
            SignalSource::Boom => Some(ChannelName::BoomAccX),
            SignalSource::Lift => None,
        }
    }

    /// Sensor epoch of a trial. The bucket IMU was swapped after day 1, so
    /// its data splits into epoch 1 (day 1) and epoch 2 (later days).
    pub fn epoch(self, day: u32) -> u32 {
        match self {
            SignalSource::Bucket if day >= 2 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for SignalSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SignalSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bucket" => Ok(SignalSource::Bucket),
            "boom" => Ok(SignalSource::Boom),
            "lift" => Ok(SignalSource::Lift),
            other => Err(Error::Config(format!(
                "unknown signal source `{other}` (bucket, boom, lift)"
            ))),
        }
    }
}

/// IMU used for onset detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorSource {
    BucketImu,
    BoomImu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub source: DetectorSource,
    pub axis: Axis,
    /// Jerk threshold, m/s³.
    pub jerk_threshold: f64,
    pub end_extension_mm: f64,
    pub time_cap_s: f64,
}

impl DetectorConfig {
    pub fn bucket() -> Self {
        DetectorConfig {
            source: DetectorSource::BucketImu,
            axis: Axis::Z,
            jerk_threshold: 750.0,
            end_extension_mm: 420.0,
            time_cap_s: 11.0,
        }
    }

    pub fn boom() -> Self {
        DetectorConfig {
            source: DetectorSource::BoomImu,
            axis: Axis::X,
            jerk_threshold: 500.0,
            ..DetectorConfig::bucket()
        }
    }

    /// Default detector for a feature source. Lift features are windowed
    /// with the bucket IMU.
    pub fn for_source(source: SignalSource) -> Self {
        match source {
            SignalSource::Boom => DetectorConfig::boom(),
            SignalSource::Bucket | SignalSource::Lift => DetectorConfig::bucket(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("jerk_threshold", self.jerk_threshold),
            ("end_extension_mm", self.end_extension_mm),
            ("time_cap_s", self.time_cap_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("detector {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn channel(&self) -> ChannelName {
        use ChannelName::*;
        match (self.source, self.axis) {
            (DetectorSource::BucketImu, Axis::X) => BucketAccX,
            (DetectorSource::BucketImu, Axis::Y) => BucketAccY,
            (DetectorSource::BucketImu, Axis::Z) => BucketAccZ,
            (DetectorSource::BoomImu, Axis::X) => BoomAccX,
            (DetectorSource::BoomImu, Axis::Y) => BoomAccY,
            (DetectorSource::BoomImu, Axis::Z) => BoomAccZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    BucketExtension,
    TimeCap,
    EndOfData,
}

impl EndReason {
    pub fn as_str(self) -> &'static str {
        match self {
            EndReason::BucketExtension => "bucket_extension",
            EndReason::TimeCap => "time_cap",
            EndReason::EndOfData => "end_of_data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcavationWindow {
    pub alpha1_s: f64,
    pub alpha2_s: f64,
    pub end_reason: EndReason,
}

impl ExcavationWindow {
    pub fn new(alpha1_s: f64, alpha2_s: f64, end_reason: EndReason) -> Result<Self> {
        if !(alpha2_s > alpha1_s) {
            return Err(Error::Range(format!(
                "empty excavation window [{alpha1_s}, {alpha2_s}]"
            )));
        }
        Ok(ExcavationWindow {
            alpha1_s,
            alpha2_s,
            end_reason,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.alpha2_s - self.alpha1_s
    }
}

/// Entry: first sample whose raw jerk magnitude exceeds the threshold.
/// Exit: the earliest of the bucket cylinder reaching the end extension, the
/// time cap and the end of data.
pub fn detect_window(trial: &TrialRecord, cfg: &DetectorConfig) -> Result<ExcavationWindow> {
    cfg.validate()?;
    let d_bucket = trial.channel(ChannelName::DBucket)?;
    let acc = trial.channel(cfg.channel())?;
    let jerk = derivative(acc)?;
    let k = jerk
        .samples
        .iter()
        .position(|j| j.abs() > cfg.jerk_threshold)
        .ok_or_else(|| {
            Error::NoExcavation(format!(
                "trial {}: |d/dt {}| never exceeds {} m/s³",
                trial.trial_id, acc.name, cfg.jerk_threshold
            ))
        })?;
    let alpha1 = jerk.time(k);

    let end_of_data = acc.end_time().min(d_bucket.end_time());
    let mut alpha2 = end_of_data;
    let mut reason = EndReason::EndOfData;
    let cap = alpha1 + cfg.time_cap_s;
    if cap <= alpha2 {
        alpha2 = cap;
        reason = EndReason::TimeCap;
    }
    let start = d_bucket.index_at_or_after(alpha1);
    if let Some(i) = (start..d_bucket.len()).find(|&i| d_bucket.samples[i] >= cfg.end_extension_mm) {
        let t = d_bucket.time(i);
        if t <= alpha2 && t > alpha1 {
            alpha2 = t;
            reason = EndReason::BucketExtension;
        }
    }
    if alpha2 <= alpha1 {
        return Err(Error::NoExcavation(format!(
            "trial {}: onset at {alpha1} s leaves no data for a window",
            trial.trial_id
        )));
    }
    ExcavationWindow::new(alpha1, alpha2, reason)
}

/// Per-scale statistic `(1 / (M (α₂ - α₁))) ∫ |W| dt`, rows ordered by
/// ascending frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleResponse {
    pub freqs_hz: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn scale_response(sc: &Scalogram, window: &ExcavationWindow, mass_kg: f64) -> Result<ScaleResponse> {
    if !(mass_kg > 0.0 && mass_kg.is_finite()) {
        return Err(Error::Domain(format!("mass must be positive, got {mass_kg}")));
    }
    let (t0, t1) = match (sc.times_s.first(), sc.times_s.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(Error::Range("scalogram has no time samples".into())),
    };
    if window.alpha1_s.max(t0) >= window.alpha2_s.min(t1) {
        return Err(Error::Range(format!(
            "window [{}, {}] s does not overlap scalogram [{t0}, {t1}] s",
            window.alpha1_s, window.alpha2_s
        )));
    }
    let scale = 1.0 / (mass_kg * window.duration_s());
    let mut rows: Vec<(f64, f64)> = sc
        .freqs_hz
        .iter()
        .zip(&sc.coeffs_mag)
        .map(|(&f, row)| {
            (
                f,
                scale * trapz_clipped(&sc.times_s, row, window.alpha1_s, window.alpha2_s),
            )
        })
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ScaleResponse {
        freqs_hz: rows.iter().map(|r| r.0).collect(),
        values: rows.iter().map(|r| r.1).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Beta,
    Zeta,
}

/// A mass- and duration-normalized wavelet response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletFeature {
    pub kind: FeatureKind,
    pub value: f64,
    pub window: ExcavationWindow,
    pub f_band: (f64, f64),
}

/// Largest per-scale response. The band reported is the full grid.
pub fn beta(sc: &Scalogram, window: &ExcavationWindow, mass_kg: f64) -> Result<WaveletFeature> {
    let r = scale_response(sc, window, mass_kg)?;
    Ok(beta_from(&r, window))
}

pub fn beta_from(r: &ScaleResponse, window: &ExcavationWindow) -> WaveletFeature {
    let value = r.values.iter().copied().fold(0.0, f64::max);
    WaveletFeature {
        kind: FeatureKind::Beta,
        value,
        window: *window,
        f_band: (r.freqs_hz[0], r.freqs_hz[r.freqs_hz.len() - 1]),
    }
}

/// Band `[max(cutoff, lowest grid frequency), highest grid frequency]`.
pub fn default_band(sc: &Scalogram, cutoff_hz: f64) -> (f64, f64) {
    (cutoff_hz.max(sc.bottom_frequency()), sc.top_frequency())
}

/// Frequency integral of the per-scale response over `f_band`, with
/// trapezoids in linear frequency on the log-spaced grid. `cutoff_hz` is the
/// high-pass cutoff applied before the transform; the band may not reach
/// below it.
pub fn zeta(
    sc: &Scalogram,
    window: &ExcavationWindow,
    mass_kg: f64,
    f_band: (f64, f64),
    cutoff_hz: f64,
) -> Result<WaveletFeature> {
    let r = scale_response(sc, window, mass_kg)?;
    zeta_from(&r, window, f_band, cutoff_hz)
}

pub fn zeta_from(
    r: &ScaleResponse,
    window: &ExcavationWindow,
    f_band: (f64, f64),
    cutoff_hz: f64,
) -> Result<WaveletFeature> {
    let (f_min, f_max) = f_band;
    if f_min < cutoff_hz {
        return Err(Error::Contract(format!(
            "band starts at {f_min} Hz, below the {cutoff_hz} Hz high-pass cutoff"
        )));
    }
    let lo = r.freqs_hz[0];
    let hi = r.freqs_hz[r.freqs_hz.len() - 1];
    let tol = 1e-9 * hi;
    if !(f_min < f_max) || f_min < lo - tol || f_max > hi + tol {
        return Err(Error::Domain(format!(
            "band [{f_min}, {f_max}] Hz outside scalogram range [{lo}, {hi}] Hz"
        )));
    }
    Ok(WaveletFeature {
        kind: FeatureKind::Zeta,
        value: trapz_clipped(&r.freqs_hz, &r.values, f_min, f_max),
        window: *window,
        f_band,
    })
}

/// One row of the feature report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub trial_id: String,
    pub pile_label: String,
    pub operator: String,
    pub source: SignalSource,
    pub epoch: u32,
    pub kind: FeatureKind,
    pub value: f64,
    pub alpha1_s: f64,
    pub alpha2_s: f64,
    pub end_reason: EndReason,
    pub f_min: f64,
    pub f_max: f64,
}

impl FeatureRecord {
    pub fn new(trial: &TrialRecord, source: SignalSource, f: &WaveletFeature) -> Self {
        FeatureRecord {
            trial_id: trial.trial_id.clone(),
            pile_label: trial.pile_label.clone(),
            operator: trial.operator.clone(),
            source,
            epoch: source.epoch(trial.day),
            kind: f.kind,
            value: f.value,
            alpha1_s: f.window.alpha1_s,
            alpha2_s: f.window.alpha2_s,
            end_reason: f.window.end_reason,
            f_min: f.f_band.0,
            f_max: f.f_band.1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::Channel;
    use std::collections::BTreeMap;

    fn flat_scalogram(values: &[f64], n_t: usize, dt: f64) -> Scalogram {
        let freqs: Vec<f64> = (0..values.len()).map(|i| 64.0 / (i as f64 + 1.0)).collect();
        Scalogram {
            scales_s: freqs.iter().map(|f| 1.0 / f).collect(),
            coi_half_width_s: vec![0.0; values.len()],
            freqs_hz: freqs,
            times_s: (0..n_t).map(|k| k as f64 * dt).collect(),
            coeffs_mag: values.iter().map(|&v| vec![v; n_t]).collect(),
            center_freq_hz: 1.0,
        }
    }

    #[test]
    fn constant_row_gives_c_over_mass() {
        let sc = flat_scalogram(&[3.0], 501, 0.01);
        let w = ExcavationWindow::new(0.5, 4.5, EndReason::TimeCap).unwrap();
        let b = beta(&sc, &w, 2.0).unwrap();
        assert!((b.value - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_scalogram_gives_zero_features() {
        let sc = flat_scalogram(&[0.0; 6], 200, 0.01);
        let w = ExcavationWindow::new(0.2, 1.5, EndReason::TimeCap).unwrap();
        assert_eq!(beta(&sc, &w, 1.0).unwrap().value, 0.0);
        assert_eq!(zeta(&sc, &w, 1.0, (16.0, 64.0), 4.0).unwrap().value, 0.0);
    }

    #[test]
    fn zeta_integrates_in_linear_frequency() {
        // rows 64, 32, 21.3, 16 Hz all at magnitude 2: ∫ over [16, 64] = 96
        let sc = flat_scalogram(&[2.0; 4], 300, 0.01);
        let w = ExcavationWindow::new(0.0, 2.0, EndReason::EndOfData).unwrap();
        let z = zeta(&sc, &w, 1.0, (16.0, 64.0), 4.0).unwrap();
        assert!((z.value - 96.0).abs() < 1e-9);
        let half = zeta(&sc, &w, 0.5, (16.0, 64.0), 4.0).unwrap();
        assert!((half.value - 2.0 * z.value).abs() < 1e-9);
    }

    #[test]
    fn band_errors() {
        let sc = flat_scalogram(&[1.0; 4], 100, 0.01);
        let w = ExcavationWindow::new(0.0, 0.5, EndReason::EndOfData).unwrap();
        assert!(matches!(zeta(&sc, &w, 1.0, (3.0, 64.0), 4.0), Err(Error::Contract(_))));
        assert!(matches!(zeta(&sc, &w, 1.0, (16.0, 100.0), 4.0), Err(Error::Domain(_))));
        assert!(matches!(zeta(&sc, &w, 1.0, (8.0, 64.0), 4.0), Err(Error::Domain(_))));
        let outside = ExcavationWindow::new(5.0, 6.0, EndReason::EndOfData).unwrap();
        assert!(matches!(beta(&sc, &outside, 1.0), Err(Error::Range(_))));
    }

    fn trial_with(acc: Vec<f64>, d_bucket: Vec<f64>) -> TrialRecord {
        let mut channels = BTreeMap::new();
        channels.insert(
            ChannelName::BucketAccZ,
            Channel::new("bucket_acc_z", 1000.0, 0.0, acc).unwrap(),
        );
        channels.insert(
            ChannelName::DBucket,
            Channel::new("d_bucket", 250.0, 0.0, d_bucket).unwrap(),
        );
        TrialRecord {
            trial_id: "t".into(),
            pile_label: "0/32".into(),
            operator: "A".into(),
            day: 1,
            payload_mass_kg: None,
            channels,
        }
    }

    #[test]
    fn window_ends_on_extension_cap_or_data() {
        // step of 2 m/s² at 2.0 s gives a 1000 m/s³ central-difference jerk
        let acc: Vec<f64> = (0..20_000).map(|k| if k >= 2000 { 2.0 } else { 0.0 }).collect();
        let ramp: Vec<f64> = (0..5000).map(|k| k as f64 * 0.2).collect();
        let w = detect_window(&trial_with(acc.clone(), ramp), &DetectorConfig::bucket()).unwrap();
        assert!((w.alpha1_s - 1.999).abs() < 1e-9);
        assert_eq!(w.end_reason, EndReason::BucketExtension);
        assert!((w.alpha2_s - 8.4).abs() < 1e-9);

        let w = detect_window(&trial_with(acc.clone(), vec![0.0; 5000]), &DetectorConfig::bucket()).unwrap();
        assert_eq!(w.end_reason, EndReason::TimeCap);
        assert!((w.duration_s() - 11.0).abs() < 1e-12);

        let short: Vec<f64> = acc[..6000].to_vec();
        let w = detect_window(&trial_with(short, vec![0.0; 5000]), &DetectorConfig::bucket()).unwrap();
        assert_eq!(w.end_reason, EndReason::EndOfData);
        assert!((w.alpha2_s - 5.999).abs() < 1e-9);
    }

    #[test]
    fn quiet_trial_has_no_excavation() {
        let acc: Vec<f64> = (0..3000).map(|k| 0.01 * (k as f64 * 0.3).sin()).collect();
        let err = detect_window(&trial_with(acc, vec![0.0; 750]), &DetectorConfig::bucket()).unwrap_err();
        assert!(matches!(err, Error::NoExcavation(_)));
    }

    #[test]
    fn missing_extension_channel_is_schema_error() {
        let mut t = trial_with(vec![0.0; 100], vec![0.0; 25]);
        t.channels.remove(&ChannelName::DBucket);
        assert!(matches!(
            detect_window(&t, &DetectorConfig::bucket()),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn epochs_split_bucket_imu_only() {
        assert_eq!(SignalSource::Bucket.epoch(1), 1);
        assert_eq!(SignalSource::Bucket.epoch(3), 2);
        assert_eq!(SignalSource::Boom.epoch(3), 1);
        assert_eq!("lift".parse::<SignalSource>().unwrap(), SignalSource::Lift);
    }
}
