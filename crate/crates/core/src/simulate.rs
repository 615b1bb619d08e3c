//! Synthetic excavation trials built from sampled particle populations. The
//! ground truth (sizes, masses, onset time) is known exactly, which makes the
//! simulator an oracle for the feature pipeline.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::granulometry::RosinRammlerModel;
use crate::telemetry::{Channel, ChannelName, TrialRecord};
use crate::{Error, Result};

const CDF_GRID: usize = 4096;

/// A rock pile: Rosin-Rammler mass law truncated to `[d_min_mm, d_max_mm]`.
/// Material below `d_min_mm` is treated as silent fines and not sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RockPileSpec {
    pub label: String,
    pub model: RosinRammlerModel,
    pub density_t_per_m3: f64,
    pub d_min_mm: f64,
    pub d_max_mm: f64,
}

impl RockPileSpec {
    pub fn new(label: impl Into<String>, model: RosinRammlerModel, d_min_mm: f64, d_max_mm: f64) -> Result<Self> {
        let spec = RockPileSpec {
            label: label.into(),
            model,
            density_t_per_m3: crate::fixtures::ROCK_DENSITY_T_PER_M3,
            d_min_mm,
            d_max_mm,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        RosinRammlerModel::new(self.model.n, self.model.x_c_mm)?;
        if !(self.density_t_per_m3 > 0.0) {
            return Err(Error::Domain(format!(
                "density must be positive, got {}",
                self.density_t_per_m3
            )));
        }
        if !(self.d_min_mm > 0.0 && self.d_max_mm > self.d_min_mm && self.d_max_mm.is_finite()) {
            return Err(Error::Domain(format!(
                "pile {}: need 0 < d_min < d_max, got [{}, {}] mm",
                self.label, self.d_min_mm, self.d_max_mm
            )));
        }
        if self.d_max_mm < self.model.quantile(0.01)? {
            return Err(Error::Domain(format!(
                "pile {}: d_max {} mm lies below the 1st percentile of the size law",
                self.label, self.d_max_mm
            )));
        }
        Ok(())
    }

    /// The same pile with every length multiplied by `factor`.
    pub fn scaled(&self, factor: f64, label: impl Into<String>) -> Result<Self> {
        let model = RosinRammlerModel::new(self.model.n, self.model.x_c_mm * factor)?;
        let spec = RockPileSpec {
            label: label.into(),
            model,
            density_t_per_m3: self.density_t_per_m3,
            d_min_mm: self.d_min_mm * factor,
            d_max_mm: self.d_max_mm * factor,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Particle mass in kg for a diameter in mm (`ρ d³`).
    pub fn mass_kg(&self, d_mm: f64) -> f64 {
        self.density_t_per_m3 * 1e3 * (d_mm * 1e-3).powi(3)
    }

    /// Mass fraction finer than `x` within the sampled size range.
    pub fn truncated_cdf(&self, x_mm: f64) -> f64 {
        let lo = self.model.cdf_unchecked(self.d_min_mm);
        let hi = self.model.cdf_unchecked(self.d_max_mm);
        let x = x_mm.clamp(self.d_min_mm, self.d_max_mm);
        (self.model.cdf_unchecked(x) - lo) / (hi - lo)
    }
}

/// Lower bound of the rendered size range for every preset, mm.
pub const PRESET_D_MIN_MM: f64 = 8.0;

/// Name of the bundled campaign with all five presets.
pub const FIVE_PILES: &str = "five-piles";

/// The five bundled piles: the four crushed piles with their regressed
/// parameters (upper bound at the sieve where passing reaches 100% or, for
/// 0/150, beyond the last sieve), and a coarse 0/1500 pile whose mean size is
/// about four times that of 0/150.
pub fn presets() -> Vec<RockPileSpec> {
    let rows: [(&str, f64, f64, f64); 5] = [
        ("0/32", 0.8322, 12.0, 45.0),
        ("0/63", 0.7506, 16.0, 63.0),
        ("0/90", 0.5664, 20.0, 90.0),
        ("0/150", 0.8519, 78.0, 300.0),
        ("0/1500", 0.85, 310.0, 1500.0),
    ];
    rows.iter()
        .map(|&(label, n, x_c, d_max)| {
            RockPileSpec::new(label, RosinRammlerModel { n, x_c_mm: x_c }, PRESET_D_MIN_MM, d_max)
                .expect("valid preset")
        })
        .collect()
}

pub fn preset(label: &str) -> Option<RockPileSpec> {
    presets().into_iter().find(|p| p.label == label)
}

/// Base pile for scale-family comparisons: every size scales together, so
/// mean-size ratios between members are exact.
pub fn scale_family_base() -> RockPileSpec {
    RockPileSpec::new("family-1", RosinRammlerModel { n: 1.0, x_c_mm: 50.0 }, 30.0, 100.0).expect("valid base")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticlePopulation {
    pub diameters_mm: Vec<f64>,
    pub masses_kg: Vec<f64>,
}

impl ParticlePopulation {
    pub fn len(&self) -> usize {
        self.diameters_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diameters_mm.is_empty()
    }

    pub fn total_mass_kg(&self) -> f64 {
        self.masses_kg.iter().sum()
    }

    /// `(d_mm, m_kg)` pairs for [`crate::granulometry::empirical_mass_cdf`].
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.diameters_mm
            .iter()
            .copied()
            .zip(self.masses_kg.iter().copied())
            .collect()
    }
}

/// Tabulated number-frequency CDF on a log grid. The number density of
/// particles is the mass density divided by `d³`.
struct SizeSampler {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl SizeSampler {
    fn new(spec: &RockPileSpec) -> Self {
        let (lo, hi) = (spec.d_min_mm.ln(), spec.d_max_mm.ln());
        let grid: Vec<f64> = (0..CDF_GRID)
            .map(|i| (lo + (hi - lo) * i as f64 / (CDF_GRID - 1) as f64).exp())
            .collect();
        let m = spec.model;
        let dens: Vec<f64> = grid
            .iter()
            .map(|&d| {
                let r = d / m.x_c_mm;
                m.n / m.x_c_mm * r.powf(m.n - 1.0) * (-r.powf(m.n)).exp() / (d * d * d)
            })
            .collect();
        let mut cdf = vec![0.0; CDF_GRID];
        for i in 1..CDF_GRID {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (grid[i] - grid[i - 1]);
        }
        let total = cdf[CDF_GRID - 1];
        cdf.iter_mut().for_each(|c| *c /= total);
        SizeSampler { grid, cdf }
    }

    fn draw(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c <= u).clamp(1, CDF_GRID - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        self.grid[k - 1] + w * (self.grid[k] - self.grid[k - 1])
    }
}

/// Draw particles until their total mass reaches `target_mass_kg`. Sizes
/// follow the number frequency implied by the truncated mass law, so the
/// mass-weighted empirical CDF converges to [`RockPileSpec::truncated_cdf`].
pub fn sample_population(spec: &RockPileSpec, target_mass_kg: f64, seed: u64) -> Result<ParticlePopulation> {
    spec.validate()?;
    if !(target_mass_kg > 0.0 && target_mass_kg.is_finite()) {
        return Err(Error::Domain(format!(
            "target mass must be positive, got {target_mass_kg}"
        )));
    }
    let sampler = SizeSampler::new(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut diameters_mm = Vec::new();
    let mut masses_kg = Vec::new();
    let mut total = 0.0;
    while total < target_mass_kg {
        let d = sampler.draw(rng.gen::<f64>());
        let m = spec.mass_kg(d);
        diameters_mm.push(d);
        masses_kg.push(m);
        total += m;
    }
    Ok(ParticlePopulation {
        diameters_mm,
        masses_kg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationStats {
    /// Number mean diameter.
    pub d_bar_mm: f64,
    /// Mass-weighted mean diameter.
    pub x_bar_mm: f64,
    pub mass_kg: f64,
    pub n: usize,
}

pub fn population_stats(pop: &ParticlePopulation) -> Result<PopulationStats> {
    if pop.is_empty() {
        return Err(Error::Domain("statistics of an empty population".into()));
    }
    let n = pop.len();
    let mass: f64 = pop.total_mass_kg();
    let d_bar = pop.diameters_mm.iter().sum::<f64>() / n as f64;
    let x_bar = pop
        .diameters_mm
        .iter()
        .zip(&pop.masses_kg)
        .map(|(d, m)| d * m)
        .sum::<f64>()
        / mass;
    Ok(PopulationStats {
        d_bar_mm: d_bar,
        x_bar_mm: x_bar,
        mass_kg: mass,
        n,
    })
}

/// Carrier frequency of an impact, `c1 / (d + c2)` Hz with `d` in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierMap {
    pub c1_hz_mm: f64,
    pub c2_mm: f64,
}

impl CarrierMap {
    pub fn eval(&self, d_mm: f64) -> f64 {
        self.c1_hz_mm / (d_mm + self.c2_mm)
    }
}

/// Slow oscillation from the operator working the bucket lever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorOscillation {
    pub freq_hz: f64,
    pub accel_amplitude_m_s2: f64,
    pub extension_amplitude_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSynthesisConfig {
    pub duration_s: f64,
    pub imu_rate_hz: f64,
    pub hydraulic_rate_hz: f64,
    pub speed_rate_hz: f64,
    /// First bucket-pile contact.
    pub onset_s: f64,
    /// Time from onset until the bucket cylinder reaches full curl.
    pub dig_duration_s: f64,
    /// Relative drop of the collision rate from the start to the end of the
    /// dig (0 = uniform, 1 = rate falls to zero).
    pub end_thinning: f64,
    pub collisions_enabled: bool,
    /// Impact amplitude is `amplitude_ref_m_s2 · (d / d_ref_mm)^p`.
    pub amplitude_exponent: f64,
    pub amplitude_ref_m_s2: f64,
    pub d_ref_mm: f64,
    pub carrier: CarrierMap,
    /// Quality factor of each impact ring-down; the decay time is
    /// `Q / (π f)` and so grows with particle size.
    pub quality_factor: f64,
    /// Impacts at or above this fraction of the IMU rate are not rendered.
    pub max_carrier_fraction: f64,
    pub entry_impact_m_s2: f64,
    pub entry_impact_hz: f64,
    /// Share of the bucket response that reaches the boom IMU.
    pub boom_gain: f64,
    pub oscillation: OperatorOscillation,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for TrialSynthesisConfig {
    fn default() -> Self {
        TrialSynthesisConfig {
            duration_s: 16.0,
            imu_rate_hz: 1000.0,
            hydraulic_rate_hz: 250.0,
            speed_rate_hz: 20.0,
            onset_s: 3.0,
            dig_duration_s: 7.0,
            end_thinning: 0.6,
            collisions_enabled: true,
            amplitude_exponent: 3.0,
            amplitude_ref_m_s2: 2.0,
            d_ref_mm: 50.0,
            carrier: CarrierMap {
                c1_hz_mm: 3000.0,
                c2_mm: 0.0,
            },
            quality_factor: 8.0,
            max_carrier_fraction: 0.45,
            entry_impact_m_s2: 20.0,
            entry_impact_hz: 40.0,
            boom_gain: 0.5,
            oscillation: OperatorOscillation {
                freq_hz: 0.9,
                accel_amplitude_m_s2: 1.5,
                extension_amplitude_mm: 8.0,
            },
            noise_std: 0.02,
            seed: 0,
        }
    }
}

impl TrialSynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("imu_rate_hz", self.imu_rate_hz),
            ("hydraulic_rate_hz", self.hydraulic_rate_hz),
            ("speed_rate_hz", self.speed_rate_hz),
            ("dig_duration_s", self.dig_duration_s),
            ("d_ref_mm", self.d_ref_mm),
            ("carrier.c1_hz_mm", self.carrier.c1_hz_mm),
            ("quality_factor", self.quality_factor),
            ("max_carrier_fraction", self.max_carrier_fraction),
            ("entry_impact_hz", self.entry_impact_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("synthesis {name} must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("onset_s", self.onset_s),
            ("amplitude_ref_m_s2", self.amplitude_ref_m_s2),
            ("amplitude_exponent", self.amplitude_exponent),
            ("carrier.c2_mm", self.carrier.c2_mm),
            ("entry_impact_m_s2", self.entry_impact_m_s2),
            ("boom_gain", self.boom_gain),
            ("noise_std", self.noise_std),
            ("oscillation.freq_hz", self.oscillation.freq_hz),
            (
                "oscillation.accel_amplitude_m_s2",
                self.oscillation.accel_amplitude_m_s2,
            ),
            (
                "oscillation.extension_amplitude_mm",
                self.oscillation.extension_amplitude_mm,
            ),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("synthesis {name} must be non-negative, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.end_thinning) || self.max_carrier_fraction >= 0.5 {
            return Err(Error::Config(
                "end_thinning must lie in [0, 1] and max_carrier_fraction below 0.5".into(),
            ));
        }
        if self.onset_s + self.dig_duration_s.min(11.0) + 0.5 > self.duration_s {
            return Err(Error::Config(format!(
                "onset {} s plus dig {} s does not fit in {} s",
                self.onset_s, self.dig_duration_s, self.duration_s
            )));
        }
        if self.hydraulic_rate_hz > self.imu_rate_hz {
            return Err(Error::Config("hydraulic rate may not exceed the IMU rate".into()));
        }
        Ok(())
    }
}

/// Identity of a synthesized trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub trial_id: String,
    pub pile_label: String,
    pub operator: String,
    pub day: u32,
}

/// Position in `[0, 1]` of an impact within the dig, with density falling
/// linearly from 1 to `1 - thinning`.
fn thinned_position(u: f64, thinning: f64) -> f64 {
    if thinning <= 1e-12 {
        return u;
    }
    // invert F(x) = (x - θx²/2) / (1 - θ/2)
    let a = thinning / 2.0;
    let c = u * (1.0 - a);
    (1.0 - (1.0 - 4.0 * a * c).max(0.0).sqrt()) / (2.0 * a)
}

/// Add `amp · exp(-t/τ) · sin(2πft + φ)` starting at `t_start`.
fn add_ring(buf: &mut [f64], rate: f64, t_start: f64, amp: f64, f: f64, tau: f64, phase: f64) {
    let k0 = (t_start * rate).ceil().max(0.0) as usize;
    if k0 >= buf.len() {
        return;
    }
    let len = ((7.0 * tau * rate).ceil() as usize + 1).min(buf.len() - k0);
    let dt = 1.0 / rate;
    let t0 = k0 as f64 * dt - t_start;
    // complex rotation avoids a sin/exp per sample
    let decay = (-dt / tau).exp();
    let (sw, cw) = (2.0 * PI * f * dt).sin_cos();
    let env = amp * (-t0 / tau).exp();
    let (mut s, mut c) = (2.0 * PI * f * t0 + phase).sin_cos();
    s *= env;
    c *= env;
    for y in &mut buf[k0..k0 + len] {
        *y += s;
        let s_next = (s * cw + c * sw) * decay;
        c = (c * cw - s * sw) * decay;
        s = s_next;
    }
}

/// Rise time of an impact relative to its decay time.
const RISE_FRACTION: f64 = 1.0 / 3.0;

/// Damped sinusoid with a smooth attack: the envelope
/// `exp(-t/τ) - exp(-t/τ_r)` is scaled to peak at `amp`. Without the attack,
/// the jump at the start would spread energy over all frequencies.
fn add_impact(buf: &mut [f64], rate: f64, t_start: f64, amp: f64, f: f64, tau: f64, phase: f64) {
    let tau_r = tau * RISE_FRACTION;
    let t_peak = (tau / tau_r).ln() * tau * tau_r / (tau - tau_r);
    let peak = (-t_peak / tau).exp() - (-t_peak / tau_r).exp();
    add_ring(buf, rate, t_start, amp / peak, f, tau, phase);
    add_ring(buf, rate, t_start, -amp / peak, f, tau_r, phase);
}

/// Bucket-side impact response on the IMU grid.
fn render_impacts(
    pop: &ParticlePopulation,
    cfg: &TrialSynthesisConfig,
    rng: &mut ChaCha8Rng,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let rate = cfg.imu_rate_hz;
    let mut acc = vec![0.0; n];
    // loaded mass per IMU sample, integrated later for the pressures
    let mut loaded = vec![0.0; n];
    let start = cfg.onset_s + 0.05;
    let span = cfg.dig_duration_s - 0.05;
    for (&d, &m) in pop.diameters_mm.iter().zip(&pop.masses_kg) {
        let t = start + span * thinned_position(rng.gen::<f64>(), cfg.end_thinning);
        let phase = rng.gen::<f64>() * 2.0 * PI;
        let k = ((t * rate) as usize).min(n - 1);
        loaded[k] += m;
        if !cfg.collisions_enabled {
            continue;
        }
        let f = cfg.carrier.eval(d);
        if f >= cfg.max_carrier_fraction * rate {
            continue;
        }
        let amp = cfg.amplitude_ref_m_s2 * (d / cfg.d_ref_mm).powf(cfg.amplitude_exponent);
        let tau = cfg.quality_factor / (PI * f);
        add_impact(&mut acc, rate, t, amp, f, tau, phase);
    }
    (acc, loaded)
}

/// Render all registry channels for one excavation of `pop`.
pub fn synthesize_trial(pop: &ParticlePopulation, cfg: &TrialSynthesisConfig, meta: &TrialMeta) -> Result<TrialRecord> {
    cfg.validate()?;
    if pop.is_empty() {
        return Err(Error::Config(
            "cannot synthesize a trial from an empty population".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rate = cfg.imu_rate_hz;
    let n = (cfg.duration_s * rate).round() as usize;
    let times: Vec<f64> = (0..n).map(|k| k as f64 / rate).collect();
    let onset = cfg.onset_s;
    let dig_end = onset + cfg.dig_duration_s;

    let (impacts, loaded) = render_impacts(pop, cfg, &mut rng, n);
    let mut entry = vec![0.0; n];
    if cfg.collisions_enabled || cfg.entry_impact_m_s2 > 0.0 {
        add_ring(
            &mut entry,
            rate,
            onset,
            cfg.entry_impact_m_s2,
            cfg.entry_impact_hz,
            0.02,
            0.0,
        );
    }
    let osc = cfg.oscillation;
    let sway: Vec<f64> = times
        .iter()
        .map(|&t| {
            if t >= onset {
                osc.accel_amplitude_m_s2 * (2.0 * PI * osc.freq_hz * (t - onset)).sin()
            } else {
                0.0
            }
        })
        .collect();
    let mut noise = |len: usize, std: f64| -> Vec<f64> {
        (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            })
            .collect::<Vec<f64>>()
    };

    let mut channels = BTreeMap::new();
    let mut put = |name: ChannelName, rate: f64, samples: Vec<f64>| -> Result<()> {
        channels.insert(
            name,
            Channel::new(name.as_str(), rate, 0.0, samples)?.with_units(name.units()),
        );
        Ok(())
    };
    let nz = noise(n, cfg.noise_std);
    put(
        ChannelName::BucketAccZ,
        rate,
        (0..n).map(|k| impacts[k] + entry[k] + sway[k] + nz[k]).collect(),
    )?;
    let nx = noise(n, cfg.noise_std);
    put(
        ChannelName::BucketAccX,
        rate,
        (0..n).map(|k| 0.3 * impacts[k] + 0.2 * sway[k] + nx[k]).collect(),
    )?;
    let ny = noise(n, cfg.noise_std);
    put(
        ChannelName::BucketAccY,
        rate,
        (0..n).map(|k| 0.1 * impacts[k] + ny[k]).collect(),
    )?;
    let g = cfg.boom_gain;
    let bx = noise(n, cfg.noise_std);
    put(
        ChannelName::BoomAccX,
        rate,
        (0..n)
            .map(|k| g * (impacts[k] + entry[k] + 0.5 * sway[k]) + bx[k])
            .collect(),
    )?;
    let by = noise(n, cfg.noise_std);
    put(
        ChannelName::BoomAccY,
        rate,
        (0..n).map(|k| 0.2 * g * impacts[k] + by[k]).collect(),
    )?;
    let bz = noise(n, cfg.noise_std);
    put(
        ChannelName::BoomAccZ,
        rate,
        (0..n).map(|k| 9.81 + 0.3 * g * impacts[k] + bz[k]).collect(),
    )?;

    // hydraulics: base pressure follows the loaded mass and carries the
    // impact transients
    let h_rate = cfg.hydraulic_rate_hz;
    let nh = (cfg.duration_s * h_rate).round() as usize;
    let total = pop.total_mass_kg();
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    for &m in &loaded {
        acc += m;
        cum.push(acc / total);
    }
    let at_imu = |t: f64| ((t * rate) as usize).min(n - 1);
    let hn = noise(nh, 0.3);
    put(
        ChannelName::PBase,
        h_rate,
        (0..nh)
            .map(|k| {
                let t = k as f64 / h_rate;
                let i = at_imu(t);
                let kick = if t >= onset {
                    15.0 * (-(t - onset) / 0.4).exp()
                } else {
                    0.0
                };
                40.0 + 90.0 * cum[i] + kick + 0.05 * impacts[i] + hn[k]
            })
            .collect(),
    )?;
    let rn = noise(nh, 0.3);
    put(
        ChannelName::PRod,
        h_rate,
        (0..nh)
            .map(|k| {
                let t = k as f64 / h_rate;
                let s = if t >= onset {
                    3.0 * (2.0 * PI * osc.freq_hz * (t - onset)).sin()
                } else {
                    0.0
                };
                25.0 + s + rn[k]
            })
            .collect(),
    )?;
    put(
        ChannelName::DBucket,
        h_rate,
        (0..nh)
            .map(|k| {
                let t = k as f64 / h_rate;
                bucket_extension_mm(t, onset, cfg.dig_duration_s, osc)
            })
            .collect(),
    )?;
    put(
        ChannelName::DLift,
        h_rate,
        (0..nh)
            .map(|k| {
                let t = k as f64 / h_rate;
                let dig = ((t - onset) / cfg.dig_duration_s).clamp(0.0, 1.0);
                60.0 + 80.0 * dig + 120.0 * (t - dig_end).max(0.0)
            })
            .collect(),
    )?;
    let s_rate = cfg.speed_rate_hz;
    let ns = (cfg.duration_s * s_rate).round() as usize;
    put(
        ChannelName::Speed,
        s_rate,
        (0..ns)
            .map(|k| {
                let t = k as f64 / s_rate;
                if t < onset {
                    1.6
                } else {
                    0.1 + 1.5 * (-(t - onset) / 0.8).exp()
                }
            })
            .collect(),
    )?;

    Ok(TrialRecord {
        trial_id: meta.trial_id.clone(),
        pile_label: meta.pile_label.clone(),
        operator: meta.operator.clone(),
        day: meta.day,
        payload_mass_kg: Some(total),
        channels,
    })
}

/// Bucket cylinder extension: 100 mm before contact, 420 mm exactly at the
/// end of the dig, overshooting to 480 mm afterwards. The operator
/// oscillation rides on top but fades out toward the end of the dig so the
/// crossing time stays at onset + dig.
pub fn bucket_extension_mm(t: f64, onset: f64, dig_s: f64, osc: OperatorOscillation) -> f64 {
    if t < onset {
        return 100.0;
    }
    let u = (t - onset) / dig_s;
    if u >= 1.0 {
        return (420.0 + 60.0 * (u - 1.0) * dig_s).min(480.0);
    }
    let fade = (1.0 - u) * u;
    100.0 + 320.0 * u + 4.0 * fade * osc.extension_amplitude_mm * (2.0 * PI * osc.freq_hz * (t - onset)).sin()
}

/// Mix a campaign seed with trial coordinates (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9)
        ^ c.wrapping_mul(0x94D0_49BB_1331_11EB);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A set of piles excavated several times each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignSpec {
    pub name: String,
    pub piles: Vec<RockPileSpec>,
    pub trials_per_pile: usize,
    pub payload_kg: f64,
    pub seed: u64,
    pub operators: Vec<String>,
    pub days: Vec<u32>,
    /// Uniform jitter range of the onset time, s.
    pub onset_range_s: (f64, f64),
    /// Uniform range of the dig duration, s.
    pub dig_range_s: (f64, f64),
    pub synthesis: TrialSynthesisConfig,
}

impl Default for CampaignSpec {
    fn default() -> Self {
        CampaignSpec {
            name: FIVE_PILES.into(),
            piles: presets(),
            trials_per_pile: 20,
            payload_kg: 4000.0,
            seed: 7,
            operators: vec!["A".into()],
            days: vec![1],
            onset_range_s: (2.5, 3.5),
            dig_range_s: (6.0, 9.0),
            synthesis: TrialSynthesisConfig::default(),
        }
    }
}

impl CampaignSpec {
    /// A named campaign. Besides the five-pile campaign, any single preset
    /// label selects that pile alone.
    pub fn named(name: &str) -> Result<Self> {
        if name == FIVE_PILES {
            return Ok(CampaignSpec::default());
        }
        match preset(name) {
            Some(p) => Ok(CampaignSpec {
                name: name.into(),
                piles: vec![p],
                ..CampaignSpec::default()
            }),
            None => Err(Error::Config(format!(
                "unknown campaign preset `{name}` (use {FIVE_PILES} or one of 0/32, 0/63, 0/90, 0/150, 0/1500)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.piles.is_empty() || self.trials_per_pile == 0 {
            return Err(Error::Config("campaign needs at least one pile and one trial".into()));
        }
        if self.operators.is_empty() || self.days.is_empty() {
            return Err(Error::Config("campaign needs at least one operator and one day".into()));
        }
        if !(self.payload_kg > 0.0) {
            return Err(Error::Config(format!(
                "payload must be positive, got {}",
                self.payload_kg
            )));
        }
        let (a, b) = self.onset_range_s;
        let (c, d) = self.dig_range_s;
        if !(0.0 <= a && a <= b && 0.0 < c && c <= d) {
            return Err(Error::Config(
                "onset and dig ranges must be ordered and non-negative".into(),
            ));
        }
        for p in &self.piles {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut last = self.synthesis.clone();
        last.onset_s = b;
        last.dig_duration_s = d;
        last.validate()
    }

    pub fn n_trials(&self) -> usize {
        self.piles.len() * self.trials_per_pile
    }

    /// Pile index and trial index within the pile for a flat trial number.
    pub fn coordinates(&self, index: usize) -> (usize, usize) {
        (index / self.trials_per_pile, index % self.trials_per_pile)
    }

    pub fn trial_id(&self, pile: usize, trial: usize) -> String {
        let label: String = self.piles[pile]
            .label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
            .collect();
        format!("p{pile}-{label}-t{trial:03}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialTruth {
    pub trial_id: String,
    pub pile_label: String,
    pub onset_s: f64,
    pub dig_duration_s: f64,
    pub payload_mass_kg: f64,
    pub stats: PopulationStats,
}

/// Generate trial `trial` of pile `pile`. Each trial is independent of the
/// others and depends only on the campaign seed and its coordinates.
pub fn campaign_trial(spec: &CampaignSpec, pile: usize, trial: usize) -> Result<(TrialRecord, TrialTruth)> {
    let p = spec
        .piles
        .get(pile)
        .ok_or_else(|| Error::Config(format!("campaign has no pile {pile}")))?;
    let base = derive_seed(spec.seed, pile as u64, trial as u64, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    let (a, b) = spec.onset_range_s;
    let (c, d) = spec.dig_range_s;
    let onset = a + (b - a) * rng.gen::<f64>();
    let dig = c + (d - c) * rng.gen::<f64>();
    let pop = sample_population(p, spec.payload_kg, derive_seed(spec.seed, pile as u64, trial as u64, 1))?;
    let mut cfg = spec.synthesis.clone();
    cfg.onset_s = onset;
    cfg.dig_duration_s = dig;
    cfg.seed = derive_seed(spec.seed, pile as u64, trial as u64, 2);
    let meta = TrialMeta {
        trial_id: spec.trial_id(pile, trial),
        pile_label: p.label.clone(),
        operator: spec.operators[trial % spec.operators.len()].clone(),
        day: spec.days[trial % spec.days.len()],
    };
    let record = synthesize_trial(&pop, &cfg, &meta)?;
    let stats = population_stats(&pop)?;
    let truth = TrialTruth {
        trial_id: meta.trial_id,
        pile_label: p.label.clone(),
        onset_s: onset,
        dig_duration_s: dig,
        payload_mass_kg: stats.mass_kg,
        stats,
    };
    Ok((record, truth))
}

/// Per-pile ground truth of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PileTruth {
    pub label: String,
    pub model: RosinRammlerModel,
    /// Mean size of the untruncated size law.
    pub model_xbar_mm: f64,
    pub d_min_mm: f64,
    pub d_max_mm: f64,
    /// Averages over the campaign's trials.
    pub d_bar_mm: f64,
    pub x_bar_mm: f64,
}

pub fn pile_truth(spec: &RockPileSpec, trials: &[&TrialTruth]) -> PileTruth {
    let k = trials.len().max(1) as f64;
    PileTruth {
        label: spec.label.clone(),
        model: spec.model,
        model_xbar_mm: spec.model.mean_mm(),
        d_min_mm: spec.d_min_mm,
        d_max_mm: spec.d_max_mm,
        d_bar_mm: trials.iter().map(|t| t.stats.d_bar_mm).sum::<f64>() / k,
        x_bar_mm: trials.iter().map(|t| t.stats.x_bar_mm).sum::<f64>() / k,
    }
}
