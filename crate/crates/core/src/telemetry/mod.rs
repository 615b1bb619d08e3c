//! Excavation telemetry: uniformly sampled channels, trial records and the
//! channel-level signal operations used before wavelet analysis.

mod filter;
mod io;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use filter::{highpass, lowpass, Biquad, Butterworth};
pub use io::{load_trial, load_trial_dir, write_trial, ChannelEntry, TrialManifest, MANIFEST_FILE};

/// Registered channel names. Accelerations in m/s², pressures in bar,
/// cylinder extensions in mm and machine speed in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ChannelName {
    #[serde(rename = "bucket_acc_x")]
    BucketAccX,
    #[serde(rename = "bucket_acc_y")]
    BucketAccY,
    #[serde(rename = "bucket_acc_z")]
    BucketAccZ,
    #[serde(rename = "boom_acc_x")]
    BoomAccX,
    #[serde(rename = "boom_acc_y")]
    BoomAccY,
    #[serde(rename = "boom_acc_z")]
    BoomAccZ,
    #[serde(rename = "p_base")]
    PBase,
    #[serde(rename = "p_rod")]
    PRod,
    #[serde(rename = "d_bucket")]
    DBucket,
    #[serde(rename = "d_lift")]
    DLift,
    #[serde(rename = "speed")]
    Speed,
}

impl ChannelName {
    pub const ALL: [ChannelName; 11] = [
        ChannelName::BucketAccX,
        ChannelName::BucketAccY,
        ChannelName::BucketAccZ,
        ChannelName::BoomAccX,
        ChannelName::BoomAccY,
        ChannelName::BoomAccZ,
        ChannelName::PBase,
        ChannelName::PRod,
        ChannelName::DBucket,
        ChannelName::DLift,
        ChannelName::Speed,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelName::BucketAccX => "bucket_acc_x",
            ChannelName::BucketAccY => "bucket_acc_y",
            ChannelName::BucketAccZ => "bucket_acc_z",
            ChannelName::BoomAccX => "boom_acc_x",
            ChannelName::BoomAccY => "boom_acc_y",
            ChannelName::BoomAccZ => "boom_acc_z",
            ChannelName::PBase => "p_base",
            ChannelName::PRod => "p_rod",
            ChannelName::DBucket => "d_bucket",
            ChannelName::DLift => "d_lift",
            ChannelName::Speed => "speed",
        }
    }

    pub fn units(self) -> &'static str {
        match self {
            ChannelName::BucketAccX
            | ChannelName::BucketAccY
            | ChannelName::BucketAccZ
            | ChannelName::BoomAccX
            | ChannelName::BoomAccY
            | ChannelName::BoomAccZ => "m/s^2",
            ChannelName::PBase | ChannelName::PRod => "bar",
            ChannelName::DBucket | ChannelName::DLift => "mm",
            ChannelName::Speed => "m/s",
        }
    }
}

impl fmt::Display for ChannelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Schema(format!("unknown channel name `{s}`")))
    }
}

/// A uniformly sampled time series. Sample `k` sits at `t0_s + k / rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub name: String,
    pub rate_hz: f64,
    pub t0_s: f64,
    pub units: String,
    pub samples: Vec<f64>,
}

impl Channel {
    pub fn new(name: impl Into<String>, rate_hz: f64, t0_s: f64, samples: Vec<f64>) -> Result<Self> {
        if !(rate_hz > 0.0 && rate_hz.is_finite()) {
            return Err(Error::Domain(format!("rate_hz must be positive, got {rate_hz}")));
        }
        Ok(Channel {
            name: name.into(),
            rate_hz,
            t0_s,
            units: String::new(),
            samples,
        })
    }

    pub fn with_units(mut self, units: impl Into<String>) -> Self {
        self.units = units.into();
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0_s + k as f64 / self.rate_hz
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(|k| self.time(k))
    }

    /// Same metadata, new samples.
    pub fn with_samples(&self, samples: Vec<f64>) -> Channel {
        Channel {
            name: self.name.clone(),
            rate_hz: self.rate_hz,
            t0_s: self.t0_s,
            units: self.units.clone(),
            samples,
        }
    }

    /// Index of the first sample at or after `t`, clamped to the channel.
    pub fn index_at_or_after(&self, t: f64) -> usize {
        let k = ((t - self.t0_s) * self.rate_hz - 1e-9).ceil();
        (k.max(0.0) as usize).min(self.len())
    }

    /// Linear interpolation at time `t`; `None` outside the channel extent.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let u = (t - self.t0_s) * self.rate_hz;
        let last = (self.len() - 1) as f64;
        if u < -1e-9 || u > last + 1e-9 {
            return None;
        }
        let u = u.clamp(0.0, last);
        let k = u.floor() as usize;
        if k + 1 >= self.len() {
            return Some(self.samples[self.len() - 1]);
        }
        let w = u - k as f64;
        Some(self.samples[k] + w * (self.samples[k + 1] - self.samples[k]))
    }
}

/// One excavation pass with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial_id: String,
    pub pile_label: String,
    pub operator: String,
    pub day: u32,
    pub payload_mass_kg: Option<f64>,
    pub channels: BTreeMap<ChannelName, Channel>,
}

impl TrialRecord {
    pub fn channel(&self, name: ChannelName) -> Result<&Channel> {
        self.channels
            .get(&name)
            .ok_or_else(|| Error::Schema(format!("trial {} has no `{name}` channel", self.trial_id)))
    }

    /// Mass used to normalize features. Absent payloads count as 1 kg, which
    /// cancels in feature ratios.
    pub fn mass_or_unit(&self) -> f64 {
        self.payload_mass_kg.unwrap_or(1.0)
    }
}

/// Lift cylinder cross sections in m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CylinderGeometry {
    pub area_base_m2: f64,
    pub area_rod_m2: f64,
}

impl CylinderGeometry {
    pub fn new(area_base_m2: f64, area_rod_m2: f64) -> Result<Self> {
        if !(area_base_m2 > area_rod_m2 && area_rod_m2 > 0.0) {
            return Err(Error::Domain(format!(
                "cylinder areas must satisfy base > rod > 0, got {area_base_m2} / {area_rod_m2}"
            )));
        }
        Ok(CylinderGeometry {
            area_base_m2,
            area_rod_m2,
        })
    }
}

impl Default for CylinderGeometry {
    /// Lift cylinders of an 18 t loader.
    fn default() -> Self {
        CylinderGeometry {
            area_base_m2: 0.031415,
            area_rod_m2: 0.019175,
        }
    }
}

const PA_PER_BAR: f64 = 1.0e5;

/// Force of the two lift cylinders in newtons from base and rod pressures in bar.
/// Negative values are retraction forces.
pub fn lift_force(p_base: &Channel, p_rod: &Channel, geom: &CylinderGeometry) -> Result<Channel> {
    if p_base.len() != p_rod.len() || p_base.rate_hz != p_rod.rate_hz || p_base.t0_s != p_rod.t0_s {
        return Err(Error::Alignment(format!(
            "pressure channels differ: {} samples @ {} Hz vs {} samples @ {} Hz",
            p_base.len(),
            p_base.rate_hz,
            p_rod.len(),
            p_rod.rate_hz
        )));
    }
    let samples = p_base
        .samples
        .iter()
        .zip(&p_rod.samples)
        .map(|(&pb, &pr)| 2.0 * (geom.area_base_m2 * pb * PA_PER_BAR - geom.area_rod_m2 * pr * PA_PER_BAR))
        .collect();
    Ok(Channel {
        name: "lift_force".into(),
        rate_hz: p_base.rate_hz,
        t0_s: p_base.t0_s,
        units: "N".into(),
        samples,
    })
}

/// Time derivative by central differences, second-order one-sided at the ends.
pub fn derivative(ch: &Channel) -> Result<Channel> {
    let n = ch.len();
    if n < 3 {
        return Err(Error::Domain(format!("derivative needs at least 3 samples, got {n}")));
    }
    let x = &ch.samples;
    let r = ch.rate_hz;
    let mut out = Vec::with_capacity(n);
    out.push((4.0 * (x[1] - x[0]) - (x[2] - x[0])) * 0.5 * r);
    for k in 1..n - 1 {
        out.push((x[k + 1] - x[k - 1]) * 0.5 * r);
    }
    out.push((4.0 * (x[n - 1] - x[n - 2]) - (x[n - 1] - x[n - 3])) * 0.5 * r);
    let mut d = ch.with_samples(out);
    if !ch.units.is_empty() {
        d.units = format!("{}/s", ch.units);
    }
    Ok(d)
}

/// Resample to `target_hz`. Downsampling applies a zero-phase antialias
/// low-pass at 0.4 * target_hz first; upsampling interpolates linearly.
pub fn resample(ch: &Channel, target_hz: f64) -> Result<Channel> {
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return Err(Error::Domain(format!("target rate must be positive, got {target_hz}")));
    }
    if ch.is_empty() {
        return Err(Error::Domain("cannot resample an empty channel".into()));
    }
    if target_hz == ch.rate_hz {
        return Ok(ch.clone());
    }
    let source = if target_hz < ch.rate_hz {
        lowpass(ch, 0.4 * target_hz)?
    } else {
        ch.clone()
    };
    let duration = (ch.len() - 1) as f64 / ch.rate_hz;
    let n_out = (duration * target_hz + 1e-9).floor() as usize + 1;
    let samples = (0..n_out)
        .map(|k| {
            let t = ch.t0_s + k as f64 / target_hz;
            source.value_at(t).unwrap_or(source.samples[source.len() - 1])
        })
        .collect();
    let mut out = ch.with_samples(samples);
    out.rate_hz = target_hz;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn ch(rate: f64, samples: Vec<f64>) -> Channel {
        Channel::new("x", rate, 0.0, samples).unwrap()
    }

    #[test]
    fn lift_force_hand_values() {
        let g = CylinderGeometry::default();
        let zero = ch(250.0, vec![0.0; 4]);
        let f = lift_force(&zero, &zero, &g).unwrap();
        assert!(f.samples.iter().all(|&v| v == 0.0));

        let pb = ch(250.0, vec![100.0; 3]);
        let pr = ch(250.0, vec![50.0; 3]);
        let f = lift_force(&pb, &pr, &g).unwrap();
        for v in f.samples {
            assert!((v - 436_550.0).abs() < 1e-6, "{v}");
        }
        let f = lift_force(&ch(250.0, vec![0.0]), &ch(250.0, vec![100.0]), &g).unwrap();
        assert!((f.samples[0] + 383_500.0).abs() < 1e-6);
    }

    #[test]
    fn lift_force_rejects_misaligned_channels() {
        let g = CylinderGeometry::default();
        let a = ch(250.0, vec![1.0; 4]);
        let b = ch(250.0, vec![1.0; 5]);
        assert!(matches!(lift_force(&a, &b, &g), Err(Error::Alignment(_))));
        let c = ch(200.0, vec![1.0; 4]);
        assert!(matches!(lift_force(&a, &c, &g), Err(Error::Alignment(_))));
    }

    #[test]
    fn geometry_invariant() {
        assert!(CylinderGeometry::new(0.01, 0.02).is_err());
        assert!(CylinderGeometry::new(0.02, 0.0).is_err());
    }

    #[test]
    fn derivative_of_ramp_and_constant() {
        let rate = 100.0;
        let ramp: Vec<f64> = (0..50).map(|k| 5.0 * k as f64 / rate + 2.0).collect();
        let d = derivative(&ch(rate, ramp)).unwrap();
        assert!(d.samples.iter().all(|v| (v - 5.0).abs() < 1e-9));
        let d = derivative(&ch(rate, vec![9.81; 10])).unwrap();
        assert!(d.samples.iter().all(|&v| v == 0.0));
        assert!(matches!(derivative(&ch(rate, vec![1.0, 2.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn derivative_of_sine_matches_analytic() {
        let rate = 1000.0;
        let x: Vec<f64> = (0..2000).map(|k| (2.0 * PI * k as f64 / rate).sin()).collect();
        let d = derivative(&ch(rate, x)).unwrap();
        let err = d
            .samples
            .iter()
            .enumerate()
            .map(|(k, v)| (v - 2.0 * PI * (2.0 * PI * k as f64 / rate).cos()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4, "max error {err}");
    }

    #[test]
    fn resample_identity_and_upsampled_constant() {
        let c = ch(250.0, (0..100).map(|k| k as f64).collect());
        assert_eq!(resample(&c, 250.0).unwrap(), c);
        let c = ch(20.0, vec![3.5; 40]);
        let up = resample(&c, 1000.0).unwrap();
        assert_eq!(up.rate_hz, 1000.0);
        assert!(up.samples.iter().all(|&v| v == 3.5));
        assert!(matches!(resample(&c, 0.0), Err(Error::Domain(_))));
        assert!(matches!(resample(&c, -3.0), Err(Error::Domain(_))));
    }

    #[test]
    fn downsampled_tone_keeps_amplitude() {
        let rate = 1000.0;
        let x: Vec<f64> = (0..5000).map(|k| (2.0 * PI * 10.0 * k as f64 / rate).sin()).collect();
        let r = resample(&ch(rate, x), 250.0).unwrap();
        assert_eq!(r.rate_hz, 250.0);
        // steady-state amplitude away from the edges
        let mid = &r.samples[250..r.len() - 250];
        let amp = mid.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((amp - 1.0).abs() < 0.01, "amplitude {amp}");
    }

    #[test]
    fn channel_name_round_trip() {
        for c in ChannelName::ALL {
            assert_eq!(c.as_str().parse::<ChannelName>().unwrap(), c);
        }
        assert!("bucket_acc_w".parse::<ChannelName>().is_err());
    }
}
