//! Butterworth filters as cascaded biquads, applied forward-backward.

use std::f64::consts::PI;

use super::Channel;
use crate::{Error, Result};

/// Normalized second-order section, `a0 == 1`. Direct form II transposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Steady-state state vector for a constant input `x`.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let z2 = self.b[2] * x - self.a[1] * y;
        let z1 = self.b[1] * x - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, xs: &mut [f64], mut z: [f64; 2]) {
        for x in xs.iter_mut() {
            let input = *x;
            let y = self.b[0] * input + z[0];
            z[0] = self.b[1] * input - self.a[0] * y + z[1];
            z[1] = self.b[2] * input - self.a[1] * y;
            *x = y;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Low,
    High,
}

/// Even-order digital Butterworth filter designed by the bilinear transform
/// with a prewarped cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Butterworth {
    pub sections: Vec<Biquad>,
    pub cutoff_hz: f64,
    pub rate_hz: f64,
}

impl Butterworth {
    pub fn highpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        Self::design(Kind::High, order, cutoff_hz, rate_hz)
    }

    pub fn lowpass(order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        Self::design(Kind::Low, order, cutoff_hz, rate_hz)
    }

    fn design(kind: Kind, order: usize, cutoff_hz: f64, rate_hz: f64) -> Result<Self> {
        if order == 0 || !order.is_multiple_of(2) {
            return Err(Error::Domain(format!(
                "filter order must be even and positive, got {order}"
            )));
        }
        if !(cutoff_hz > 0.0 && cutoff_hz < 0.5 * rate_hz) {
            return Err(Error::Domain(format!(
                "cutoff {cutoff_hz} Hz must lie in (0, Nyquist = {} Hz)",
                0.5 * rate_hz
            )));
        }
        let k = 2.0 * rate_hz;
        let wc = k * (PI * cutoff_hz / rate_hz).tan();
        let sections = (1..=order / 2)
            .map(|i| {
                // pole pair quality factor of the analog prototype
                let q = 1.0 / (2.0 * (PI * (2 * i - 1) as f64 / (2 * order) as f64).cos());
                let a0 = k * k + wc * k / q + wc * wc;
                let a1 = (2.0 * wc * wc - 2.0 * k * k) / a0;
                let a2 = (k * k - wc * k / q + wc * wc) / a0;
                let b = match kind {
                    Kind::High => {
                        let g = k * k / a0;
                        [g, -2.0 * g, g]
                    }
                    Kind::Low => {
                        let g = wc * wc / a0;
                        [g, 2.0 * g, g]
                    }
                };
                Biquad { b, a: [a1, a2] }
            })
            .collect();
        Ok(Butterworth {
            sections,
            cutoff_hz,
            rate_hz,
        })
    }

    /// Magnitude response of a single (causal) pass at `f_hz`.
    pub fn gain(&self, f_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / self.rate_hz;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        self.sections
            .iter()
            .map(|s| {
                let nr = s.b[0] + s.b[1] * c1 + s.b[2] * c2;
                let ni = s.b[1] * s1 + s.b[2] * s2;
                let dr = 1.0 + s.a[0] * c1 + s.a[1] * c2;
                let di = s.a[0] * s1 + s.a[1] * s2;
                ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
            })
            .product()
    }

    fn pass(&self, xs: &mut [f64]) {
        let mut level = xs[0];
        for s in &self.sections {
            let z = s.steady_state(level);
            s.run(xs, z);
            level *= s.dc_gain();
        }
    }

    /// Forward-backward filtering with odd-reflection padding at both ends and
    /// steady-state initial conditions. Zero phase; squared magnitude.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let settle = (3.0 * self.rate_hz / self.cutoff_hz).ceil() as usize;
        let pad = settle.max(3 * (2 * self.sections.len() + 1)).min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        ext.extend((1..=pad).rev().map(|k| 2.0 * x[0] - x[k]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|k| 2.0 * x[n - 1] - x[n - 1 - k]));
        self.pass(&mut ext);
        ext.reverse();
        self.pass(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

pub const DEFAULT_ORDER: usize = 4;

/// Zero-phase 4th-order Butterworth high-pass.
pub fn highpass(ch: &Channel, cutoff_hz: f64) -> Result<Channel> {
    let f = Butterworth::highpass(DEFAULT_ORDER, cutoff_hz, ch.rate_hz)?;
    Ok(ch.with_samples(f.filtfilt(&ch.samples)))
}

/// Zero-phase 4th-order Butterworth low-pass.
pub fn lowpass(ch: &Channel, cutoff_hz: f64) -> Result<Channel> {
    let f = Butterworth::lowpass(DEFAULT_ORDER, cutoff_hz, ch.rate_hz)?;
    Ok(ch.with_samples(f.filtfilt(&ch.samples)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(f: f64, rate: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| (2.0 * PI * f * k as f64 / rate).sin()).collect()
    }

    /// Steady-state amplitude from the middle half of the record.
    fn amplitude(x: &[f64]) -> f64 {
        let n = x.len();
        x[n / 4..3 * n / 4].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    fn db(r: f64) -> f64 {
        20.0 * r.log10()
    }

    #[test]
    fn butterworth_half_power_at_cutoff() {
        let f = Butterworth::highpass(4, 2.0, 1000.0).unwrap();
        assert!((f.gain(2.0) - 0.5f64.sqrt()).abs() < 1e-9);
        let f = Butterworth::lowpass(4, 100.0, 1000.0).unwrap();
        assert!((f.gain(100.0) - 0.5f64.sqrt()).abs() < 1e-9);
        assert!((f.gain(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cutoff_at_or_above_nyquist_is_rejected() {
        let c = Channel::new("a", 100.0, 0.0, vec![0.0; 10]).unwrap();
        assert!(matches!(highpass(&c, 50.0), Err(Error::Domain(_))));
        assert!(matches!(highpass(&c, 80.0), Err(Error::Domain(_))));
        assert!(matches!(highpass(&c, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_is_rejected_by_40_db() {
        let c = Channel::new("a", 1000.0, 0.0, vec![9.81; 5000]).unwrap();
        let y = highpass(&c, 2.0).unwrap();
        let peak = y.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak < 0.0981, "peak {peak}");
    }

    #[test]
    fn passband_tone_within_one_db() {
        let c = Channel::new("a", 1000.0, 0.0, tone(10.0, 1000.0, 8000)).unwrap();
        let y = highpass(&c, 2.0).unwrap();
        assert!(db(amplitude(&y.samples)).abs() < 1.0);
    }

    #[test]
    fn stopband_tone_attenuated_20_db() {
        let c = Channel::new("a", 1000.0, 0.0, tone(0.5, 1000.0, 20000)).unwrap();
        let y = highpass(&c, 4.0).unwrap();
        assert!(db(amplitude(&y.samples)) < -20.0);
    }

    #[test]
    fn repeated_highpass_matches_single_in_passband() {
        let c = Channel::new("a", 1000.0, 0.0, tone(20.0, 1000.0, 6000)).unwrap();
        let once = highpass(&c, 4.0).unwrap();
        let twice = highpass(&once, 4.0).unwrap();
        let r = amplitude(&twice.samples) / amplitude(&once.samples);
        assert!(db(r).abs() < 1.0);
    }

    #[test]
    fn input_is_not_mutated_and_rate_is_kept() {
        let c = Channel::new("a", 250.0, 1.5, tone(7.0, 250.0, 500)).unwrap();
        let before = c.clone();
        let y = highpass(&c, 2.0).unwrap();
        assert_eq!(c, before);
        assert_eq!(y.rate_hz, 250.0);
        assert_eq!(y.t0_s, 1.5);
        assert_eq!(y.len(), c.len());
    }
}
