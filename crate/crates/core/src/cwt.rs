//! Continuous wavelet transform with analytic wavelets on a log-spaced scale
//! grid, evaluated in the frequency domain.
//!
//! Scales are in seconds. A mother wavelet whose spectral peak sits at `f_c`
//! cycles per unit scale responds at `f = f_c / s` Hz when stretched by `s`.
//! Coefficients use L1 normalization, so a sinusoid of amplitude `A` shows a
//! coefficient modulus of `A` at its matched scale.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::telemetry::Channel;
use crate::{Error, Result};

pub const MIN_WINDOW_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WaveletFamily {
    /// Generalized Morse wavelet; `symmetry` is gamma and `time_bandwidth` is P².
    AnalyticMorse { symmetry: f64, time_bandwidth: f64 },
    /// Analytic Morlet with its spectral peak at `center_cycles` cycles per unit scale.
    Morlet { center_cycles: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Normalization {
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub voices_per_octave: u32,
    pub normalization: Normalization,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        WaveletSpec {
            family: WaveletFamily::AnalyticMorse {
                symmetry: 3.0,
                time_bandwidth: 60.0,
            },
            voices_per_octave: 10,
            normalization: Normalization::L1,
        }
    }
}

impl WaveletSpec {
    pub fn morlet() -> Self {
        WaveletSpec {
            family: WaveletFamily::Morlet {
                center_cycles: 6.0 / (2.0 * PI),
            },
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(4..=48).contains(&self.voices_per_octave) {
            return Err(Error::Domain(format!(
                "voices_per_octave must be in [4, 48], got {}",
                self.voices_per_octave
            )));
        }
        match self.family {
            WaveletFamily::AnalyticMorse {
                symmetry,
                time_bandwidth,
            } => {
                if !(symmetry > 0.0 && time_bandwidth > symmetry) {
                    return Err(Error::Domain(format!(
                        "Morse wavelet needs symmetry > 0 and time_bandwidth > symmetry, got ({symmetry}, {time_bandwidth})"
                    )));
                }
            }
            WaveletFamily::Morlet { center_cycles } => {
                if !(center_cycles > 0.0) {
                    return Err(Error::Domain(format!(
                        "Morlet center must be positive, got {center_cycles}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Peak angular frequency of the mother wavelet (rad per unit scale).
    fn peak_radians(&self) -> f64 {
        match self.family {
            WaveletFamily::AnalyticMorse {
                symmetry,
                time_bandwidth,
            } => {
                let beta = time_bandwidth / symmetry;
                (beta / symmetry).powf(1.0 / symmetry)
            }
            WaveletFamily::Morlet { center_cycles } => 2.0 * PI * center_cycles,
        }
    }

    /// `f_c`: the frequency maximizing the wavelet's Fourier magnitude.
    pub fn center_frequency(&self) -> f64 {
        self.peak_radians() / (2.0 * PI)
    }

    /// Fourier transform of the mother wavelet at angular frequency `w`,
    /// scaled to a peak value of 2 (L1 normalization). Zero for `w <= 0`.
    pub fn fourier(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self.family {
            WaveletFamily::AnalyticMorse {
                symmetry,
                time_bandwidth,
            } => {
                let beta = time_bandwidth / symmetry;
                let wp = self.peak_radians();
                2.0 * (beta * (w / wp).ln() - w.powf(symmetry) + wp.powf(symmetry)).exp()
            }
            WaveletFamily::Morlet { .. } => {
                let w0 = self.peak_radians();
                2.0 * (-0.5 * (w - w0) * (w - w0)).exp()
            }
        }
    }

    /// Time spread of the mother wavelet at unit scale.
    fn time_spread(&self) -> f64 {
        match self.family {
            WaveletFamily::AnalyticMorse { time_bandwidth, .. } => time_bandwidth.sqrt() / self.peak_radians(),
            WaveletFamily::Morlet { .. } => 1.0,
        }
    }
}

pub fn scale_to_frequency(s: f64, f_c: f64) -> Result<f64> {
    if !(s > 0.0 && f_c > 0.0) {
        return Err(Error::Domain(format!(
            "scale and center frequency must be positive, got ({s}, {f_c})"
        )));
    }
    Ok(f_c / s)
}

pub fn frequency_to_scale(f: f64, f_c: f64) -> Result<f64> {
    if !(f > 0.0 && f_c > 0.0) {
        return Err(Error::Domain(format!(
            "frequency and center frequency must be positive, got ({f}, {f_c})"
        )));
    }
    Ok(f_c / f)
}

/// CWT modulus of one channel window. Row `i` belongs to scale `scales_s[i]`
/// (ascending) and frequency `freqs_hz[i]` (descending).
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub freqs_hz: Vec<f64>,
    pub scales_s: Vec<f64>,
    pub times_s: Vec<f64>,
    pub coeffs_mag: Vec<Vec<f64>>,
    pub center_freq_hz: f64,
    /// Half-width of the edge-affected region per scale, seconds.
    pub coi_half_width_s: Vec<f64>,
}

impl Scalogram {
    pub fn n_freqs(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn n_times(&self) -> usize {
        self.times_s.len()
    }

    pub fn top_frequency(&self) -> f64 {
        self.freqs_hz.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn bottom_frequency(&self) -> f64 {
        self.freqs_hz.iter().copied().fold(f64::MAX, f64::min)
    }

    /// True when coefficient (`row`, `col`) is within the cone of influence
    /// of the window edges. Such values are kept but less reliable.
    pub fn in_cone_of_influence(&self, row: usize, col: usize) -> bool {
        let t = self.times_s[col];
        let (t0, t1) = (self.times_s[0], self.times_s[self.n_times() - 1]);
        let w = self.coi_half_width_s[row];
        t - t0 < w || t1 - t < w
    }

    /// Write `freq_hz,t_s,magnitude` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        let io = |e| Error::io(path, e);
        writeln!(w, "freq_hz,t_s,magnitude").map_err(io)?;
        for (fr, row) in self.freqs_hz.iter().zip(&self.coeffs_mag) {
            for (t, m) in self.times_s.iter().zip(row) {
                writeln!(w, "{fr},{t},{m}").map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Symmetric (edge-repeating) reflection of index `i` into `[0, n)`.
fn mirror(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let j = i.rem_euclid(period) as usize;
    if j < n {
        j
    } else {
        2 * n - 1 - j
    }
}

/// Log-spaced scales from a period of two samples up to the window length.
pub fn scale_grid(spec: &WaveletSpec, rate_hz: f64, n_samples: usize) -> Vec<f64> {
    let fc = spec.center_frequency();
    let s_min = 2.0 * fc / rate_hz;
    let s_max = fc * n_samples as f64 / rate_hz;
    let v = spec.voices_per_octave as f64;
    let count = (v * (s_max / s_min).log2() + 1e-9).floor() as usize + 1;
    (0..count).map(|i| s_min * (i as f64 / v).exp2()).collect()
}

/// Transform `ch` restricted to `[t_start, t_end]`.
pub fn transform(ch: &Channel, window: (f64, f64), spec: &WaveletSpec) -> Result<Scalogram> {
    spec.validate()?;
    let (t_start, t_end) = window;
    let eps = 0.5 / ch.rate_hz;
    if ch.is_empty() || !(t_start <= t_end) || t_start < ch.t0_s - eps || t_end > ch.end_time() + eps {
        return Err(Error::Range(format!(
            "window [{t_start}, {t_end}] s outside channel `{}` extent [{}, {}] s",
            ch.name,
            ch.t0_s,
            ch.end_time()
        )));
    }
    let first = ch.index_at_or_after(t_start);
    let last = ((t_end - ch.t0_s) * ch.rate_hz + 1e-9).floor() as usize;
    let last = last.min(ch.len() - 1);
    if last < first || last + 1 - first < MIN_WINDOW_SAMPLES {
        return Err(Error::Domain(format!(
            "window holds {} samples, need at least {MIN_WINDOW_SAMPLES}",
            (last + 1).saturating_sub(first)
        )));
    }
    let segment = &ch.samples[first..=last];
    let n = segment.len();
    let times_s: Vec<f64> = (first..=last).map(|k| ch.time(k)).collect();

    let n_fft = (2 * n).next_power_of_two();
    let left = (n_fft - n) / 2;
    let mut spectrum: Vec<Complex64> = (0..n_fft)
        .map(|k| Complex64::new(segment[mirror(k as isize - left as isize, n)], 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(n_fft).process(&mut spectrum);
    let inverse = planner.plan_fft_inverse(n_fft);

    let scales = scale_grid(spec, ch.rate_hz, n);
    let bin_w = 2.0 * PI * ch.rate_hz / n_fft as f64;
    let norm = 1.0 / n_fft as f64;
    let coeffs_mag: Vec<Vec<f64>> = scales
        .par_iter()
        .map(|&s| {
            let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
            for k in 1..=n_fft / 2 {
                let psi = spec.fourier(s * k as f64 * bin_w);
                if psi != 0.0 {
                    buf[k] = spectrum[k] * psi;
                }
            }
            inverse.process(&mut buf);
            buf[left..left + n].iter().map(|c| c.norm() * norm).collect()
        })
        .collect();

    let fc = spec.center_frequency();
    let spread = spec.time_spread();
    Ok(Scalogram {
        freqs_hz: scales.iter().map(|s| fc / s).collect(),
        coi_half_width_s: scales.iter().map(|s| std::f64::consts::SQRT_2 * spread * s).collect(),
        scales_s: scales,
        times_s,
        coeffs_mag,
        center_freq_hz: fc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone_channel(f: f64, rate: f64, secs: f64) -> Channel {
        let n = (rate * secs) as usize;
        let x = (0..n).map(|k| (2.0 * PI * f * k as f64 / rate).sin()).collect();
        Channel::new("tone", rate, 0.0, x).unwrap()
    }

    fn time_average(sc: &Scalogram) -> Vec<f64> {
        sc.coeffs_mag
            .iter()
            .map(|r| r.iter().sum::<f64>() / r.len() as f64)
            .collect()
    }

    #[test]
    fn scale_frequency_conversions() {
        assert_eq!(scale_to_frequency(1.0, 0.3).unwrap(), 0.3);
        assert_eq!(scale_to_frequency(2.0, 10.0).unwrap(), 5.0);
        for &s in &[0.001, 0.37, 12.5] {
            let f = scale_to_frequency(s, 0.2995).unwrap();
            assert!((frequency_to_scale(f, 0.2995).unwrap() - s).abs() <= 1e-15 * s.max(1.0));
        }
        assert!(scale_to_frequency(0.0, 1.0).is_err());
        assert!(scale_to_frequency(1.0, -1.0).is_err());
        assert!(frequency_to_scale(-1.0, 1.0).is_err());
    }

    #[test]
    fn morse_peak_is_normalized_to_two() {
        let spec = WaveletSpec::default();
        let wp = 2.0 * PI * spec.center_frequency();
        assert!((spec.fourier(wp) - 2.0).abs() < 1e-12);
        assert!(spec.fourier(wp * 1.05) < 2.0);
        assert!(spec.fourier(wp * 0.95) < 2.0);
        assert_eq!(spec.fourier(-1.0), 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut s = WaveletSpec {
            voices_per_octave: 3,
            ..Default::default()
        };
        assert!(s.validate().is_err());
        s.voices_per_octave = 49;
        assert!(s.validate().is_err());
        s.voices_per_octave = 12;
        s.family = WaveletFamily::AnalyticMorse {
            symmetry: 3.0,
            time_bandwidth: 2.0,
        };
        assert!(s.validate().is_err());
        assert!(WaveletSpec::morlet().validate().is_ok());
    }

    #[test]
    fn grid_spans_nyquist_to_window() {
        let spec = WaveletSpec::default();
        let s = scale_grid(&spec, 1000.0, 1000);
        let fc = spec.center_frequency();
        assert!((fc / s[0] - 500.0).abs() < 1e-9);
        assert!(fc / s[s.len() - 1] >= 1.0 - 1e-9);
        assert!(fc / s[s.len() - 1] < 2f64.powf(0.1));
    }

    #[test]
    fn zero_signal_gives_zero_scalogram() {
        let ch = Channel::new("z", 1000.0, 0.0, vec![0.0; 512]).unwrap();
        let sc = transform(&ch, (0.0, 0.511), &WaveletSpec::default()).unwrap();
        assert!(sc.coeffs_mag.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_amplitude_is_preserved_at_matched_scale() {
        let ch = tone_channel(25.0, 1000.0, 4.0);
        let sc = transform(&ch, (0.0, ch.end_time()), &WaveletSpec::default()).unwrap();
        let i = sc
            .freqs_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 25.0).abs().total_cmp(&(b.1 - 25.0).abs()))
            .unwrap()
            .0;
        let mid = sc.coeffs_mag[i][2000];
        assert!((mid - 1.0).abs() < 0.05, "{mid}");
    }

    #[test]
    fn tone_localization_within_one_voice() {
        for spec in [WaveletSpec::default(), WaveletSpec::morlet()] {
            let ch = tone_channel(25.0, 1000.0, 2.0);
            let sc = transform(&ch, (0.0, ch.end_time()), &spec).unwrap();
            let avg = time_average(&sc);
            let imax = (0..avg.len()).max_by(|&a, &b| avg[a].total_cmp(&avg[b])).unwrap();
            let voices = (sc.freqs_hz[imax] / 25.0).log2().abs() * spec.voices_per_octave as f64;
            assert!(voices <= 1.0, "{} Hz", sc.freqs_hz[imax]);
        }
    }

    #[test]
    fn window_errors() {
        let ch = tone_channel(10.0, 1000.0, 1.0);
        let spec = WaveletSpec::default();
        assert!(matches!(transform(&ch, (-0.5, 0.5), &spec), Err(Error::Range(_))));
        assert!(matches!(transform(&ch, (0.5, 1.5), &spec), Err(Error::Range(_))));
        assert!(matches!(transform(&ch, (0.1, 0.12), &spec), Err(Error::Domain(_))));
    }

    #[test]
    fn time_shift_moves_columns() {
        let rate = 1000.0;
        let n = 2048;
        let burst = |shift: usize| -> Vec<f64> {
            (0..n)
                .map(|k| {
                    let t = (k as f64 - 800.0 - shift as f64) / rate;
                    (-t * t / (2.0 * 0.02f64.powi(2))).exp() * (2.0 * PI * 60.0 * t).cos()
                })
                .collect()
        };
        let spec = WaveletSpec::default();
        let a = Channel::new("a", rate, 0.0, burst(0)).unwrap();
        let b = Channel::new("b", rate, 0.0, burst(100)).unwrap();
        let sa = transform(&a, (0.0, a.end_time()), &spec).unwrap();
        let sb = transform(&b, (0.0, b.end_time()), &spec).unwrap();
        for (ra, rb) in sa.coeffs_mag.iter().zip(&sb.coeffs_mag).filter(|(r, _)| r[800] > 1e-3) {
            let pa = (0..n).max_by(|&x, &y| ra[x].total_cmp(&ra[y])).unwrap();
            let pb = (0..n).max_by(|&x, &y| rb[x].total_cmp(&rb[y])).unwrap();
            assert!((pb as isize - pa as isize - 100).abs() <= 1, "{pa} {pb}");
        }
    }

    #[test]
    fn mirror_indexing() {
        let v: Vec<usize> = (-3..7).map(|i| mirror(i, 4)).collect();
        assert_eq!(v, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
    }
}
