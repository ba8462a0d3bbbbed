//! Deterministic synthetic campus: six hourly weather streams and one
//! main-meter load stream driven by them.
//!
//! Load model:
//!
//! ```text
//! load(t) = base + A_d * sin(2π * hour(t) / 24 + φ)
//!         + A_w * weekly(t)
//!         + k * max(0, dry_bulb(t) - T_ref)
//!         + N(0, σ²)
//! ```
//!
//! `weekly(t) = cos(2π * (days_since_epoch(t) - 6.5) / 7)`, which peaks on
//! Wednesday noon UTC and bottoms out at the Saturday/Sunday midnight.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{hour_of_day, DAY, HOUR};
use crate::timeseries::{IntervalSeries, PointId, WeatherField};

/// Generation constants. Every field has a default; the JSON config may
/// override any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    /// First hour, epoch seconds (default 2023-01-01T00:00Z).
    pub start_ts: i64,
    pub load_point: String,
    pub base_kw: f64,
    pub diurnal_amp_kw: f64,
    /// Radians; the default puts the diurnal peak at 15:00.
    pub diurnal_phase: f64,
    pub weekly_amp_kw: f64,
    pub temp_coeff_kw_per_c: f64,
    pub temp_ref_c: f64,
    pub noise_sigma_kw: f64,
    /// Annual mean dry-bulb temperature and seasonal half-swing, °C.
    pub temp_mean_c: f64,
    pub temp_seasonal_amp_c: f64,
    pub temp_diurnal_amp_c: f64,
    pub ghi_peak_wm2: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            start_ts: 1_672_531_200,
            load_point: "campus-main-kw".into(),
            base_kw: 800.0,
            diurnal_amp_kw: 300.0,
            diurnal_phase: -0.75 * PI,
            weekly_amp_kw: 150.0,
            temp_coeff_kw_per_c: 25.0,
            temp_ref_c: 18.0,
            noise_sigma_kw: 20.0,
            temp_mean_c: 10.0,
            temp_seasonal_amp_c: 12.0,
            temp_diurnal_amp_c: 6.0,
            ghi_peak_wm2: 700.0,
        }
    }
}

impl SyntheticConfig {
    /// Weekly modulation in [-1, 1].
    pub fn weekly_modulation(ts: i64) -> f64 {
        let days = ts as f64 / DAY as f64;
        (2.0 * PI * (days - 6.5) / 7.0).cos()
    }

    /// Noise-free load for hour `ts` given its dry-bulb temperature.
    pub fn deterministic_load(&self, ts: i64, dry_bulb: f64) -> f64 {
        let hour = hour_of_day(ts) as f64;
        self.base_kw
            + self.diurnal_amp_kw * (2.0 * PI * hour / 24.0 + self.diurnal_phase).sin()
            + self.weekly_amp_kw * Self::weekly_modulation(ts)
            + self.temp_coeff_kw_per_c * (dry_bulb - self.temp_ref_c).max(0.0)
    }

    pub fn weather_point(&self, field: WeatherField) -> PointId {
        PointId::new(format!("weather-{}", field.name().replace('_', "-")))
            .expect("non-empty generated id")
    }

    pub fn load_point_id(&self) -> Result<PointId> {
        PointId::new(self.load_point.clone())
    }
}

/// Output of [`generate_synthetic_campus`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCampus {
    /// In [`WeatherField::ALL`] order.
    pub weather: Vec<IntervalSeries>,
    pub load: IntervalSeries,
}

struct Ar1 {
    phi: f64,
    sigma: f64,
    state: f64,
}

impl Ar1 {
    fn step(&mut self, z: f64) -> f64 {
        self.state = self.phi * self.state + self.sigma * z;
        self.state
    }
}

/// Generates `days * 24` hourly samples per stream. Bitwise deterministic
/// for a fixed `(seed, days, cfg)`.
pub fn generate_synthetic_campus(
    seed: u64,
    days: i64,
    cfg: &SyntheticConfig,
) -> Result<SyntheticCampus> {
    if days < 1 {
        return Err(Error::invalid(format!("days must be >= 1, got {days}")));
    }
    if cfg.start_ts % HOUR != 0 {
        return Err(Error::invalid("synthetic start must be on an hour boundary"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let mut temp_noise = Ar1 { phi: 0.97, sigma: 0.6, state: 0.0 };
    let mut cloud_noise = Ar1 { phi: 0.95, sigma: 6.0, state: 0.0 };
    let mut rh_noise = Ar1 { phi: 0.9, sigma: 2.0, state: 0.0 };
    let mut pres_noise = Ar1 { phi: 0.99, sigma: 0.8, state: 0.0 };
    let mut wind_noise = Ar1 { phi: 0.9, sigma: 0.7, state: 0.0 };

    let n = (days * 24) as usize;
    let mut cols: Vec<Vec<Option<f64>>> = (0..6).map(|_| Vec::with_capacity(n)).collect();
    let mut load = Vec::with_capacity(n);

    for i in 0..n {
        let ts = cfg.start_ts + i as i64 * HOUR;
        let hour = hour_of_day(ts) as f64;
        let doy = (ts.div_euclid(DAY)).rem_euclid(365) as f64;
        // Fixed draw order keeps streams reproducible.
        let (zt, zc, zr, zp, zw, zl) = (normal(), normal(), normal(), normal(), normal(), normal());

        let season = -(2.0 * PI * (doy - 15.0) / 365.0).cos();
        let temp_seasonal = cfg.temp_mean_c + cfg.temp_seasonal_amp_c * season;
        let temp = temp_seasonal
            + cfg.temp_diurnal_amp_c * (2.0 * PI * (hour - 9.0) / 24.0).sin()
            + temp_noise.step(zt);

        let cloud = (50.0 + cloud_noise.step(zc)).clamp(0.0, 100.0);

        let half_day = 6.0 + 2.0 * season;
        let elevation = (PI * (hour + 0.5 - 12.0) / (2.0 * half_day)).cos();
        let sun = if (hour + 0.5 - 12.0).abs() < half_day { elevation.max(0.0) } else { 0.0 };
        let peak = cfg.ghi_peak_wm2 * (1.0 + 0.4 * season);
        let ghi = (peak * sun * (1.0 - 0.75 * (cloud / 100.0).powi(3))).max(0.0);

        let rh = (60.0 - 2.5 * (temp - temp_seasonal) + 0.2 * (cloud - 50.0) + rh_noise.step(zr))
            .clamp(0.0, 100.0);
        let pressure = 1013.0 + pres_noise.step(zp);
        let wind = (3.0 + 1.5 * (2.0 * PI * (hour - 14.0) / 24.0).sin() + wind_noise.step(zw))
            .max(0.0);

        for (col, v) in cols.iter_mut().zip([rh, pressure, temp, ghi, cloud, wind]) {
            col.push(Some(v));
        }
        load.push(Some(cfg.deterministic_load(ts, temp) + cfg.noise_sigma_kw * zl));
    }

    let weather = WeatherField::ALL
        .iter()
        .zip(cols)
        .map(|(f, vals)| {
            IntervalSeries::from_values(cfg.weather_point(*f), f.unit(), HOUR, cfg.start_ts, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    let load = IntervalSeries::from_values(cfg.load_point_id()?, "kW", HOUR, cfg.start_ts, load)?;
    Ok(SyntheticCampus { weather, load })
}

/// One entry of a dataset manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub point: PointId,
    pub unit: String,
    pub file: String,
    /// `load` or the weather field name.
    pub role: String,
}

/// `manifest.json` written next to the per-series CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: Option<u64>,
    pub days: Option<i64>,
    pub series: Vec<ManifestEntry>,
}

/// A load series with its six weather inputs, as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub load: IntervalSeries,
    pub weather: Vec<IntervalSeries>,
}

impl From<SyntheticCampus> for Dataset {
    fn from(c: SyntheticCampus) -> Self {
        Dataset { load: c.load, weather: c.weather }
    }
}

impl Dataset {
    /// Writes one CSV per series plus `manifest.json` into `dir`.
    pub fn write(&self, dir: &Path, seed: Option<u64>, days: Option<i64>) -> Result<Manifest> {
        fs::create_dir_all(dir)?;
        let mut series = Vec::new();
        let roles = std::iter::once(("load", &self.load))
            .chain(WeatherField::ALL.iter().map(|f| f.name()).zip(&self.weather));
        for (role, s) in roles {
            let file = format!("{}.csv", s.point().sanitized());
            s.write_csv(fs::File::create(dir.join(&file))?)?;
            series.push(ManifestEntry {
                point: s.point().clone(),
                unit: s.unit().to_string(),
                file,
                role: role.to_string(),
            });
        }
        let manifest = Manifest { seed, days, series };
        fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = fs::read(dir.join("manifest.json"))
            .map_err(|e| Error::invalid(format!("{}/manifest.json: {e}", dir.display())))?;
        let manifest: Manifest = serde_json::from_slice(&text)?;
        let read = |role: &str| -> Result<IntervalSeries> {
            let e = manifest
                .series
                .iter()
                .find(|e| e.role == role)
                .ok_or_else(|| Error::invalid(format!("manifest has no `{role}` series")))?;
            IntervalSeries::load_csv(&dir.join(&e.file), e.point.clone(), &e.unit)
        };
        let load = read("load")?;
        let weather = WeatherField::ALL
            .iter()
            .map(|f| read(f.name()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset { load, weather })
    }

    pub fn all_series(&self) -> impl Iterator<Item = &IntervalSeries> {
        std::iter::once(&self.load).chain(&self.weather)
    }
}
