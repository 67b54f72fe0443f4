//! JSON configuration documents. Powers may be given in watts (`_w`) or
//! dBm (`_dbm`), gains linear or in dB (`_db`), angles in degrees; everything
//! is converted to SI once, here.

use std::path::Path;

use anyhow::{bail, Context};
use fa_isac::model::presets::WAVELENGTH;
use fa_isac::{BsumOptions, PsoOptions, Scenario};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub antennas: Option<usize>,
    pub wavelength_m: Option<f64>,
    pub aperture_m: Option<f64>,
    /// Aperture as a multiple of the wavelength; default 10.
    pub aperture_wavelengths: Option<f64>,
    pub min_spacing_m: Option<f64>,
    pub user_angles_deg: Option<Vec<f64>>,
    pub probe_angle_deg: Option<f64>,
    pub noise_power_w: Option<PerUser>,
    pub noise_power_dbm: Option<PerUser>,
    pub max_power_w: Option<f64>,
    pub max_power_dbm: Option<f64>,
    pub probe_threshold_w: Option<f64>,
    pub probe_threshold_dbm: Option<f64>,
    pub ref_gain: Option<f64>,
    pub ref_gain_db: Option<f64>,
    pub path_loss_exp: Option<f64>,
    pub user_distances_m: Option<PerUser>,
}

/// A scalar shared by every user or one value per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerUser {
    fn expand(&self, field: &str, users: usize) -> anyhow::Result<Vec<f64>> {
        match self {
            PerUser::Shared(x) => Ok(vec![*x; users]),
            PerUser::Each(v) if v.len() == users => Ok(v.clone()),
            PerUser::Each(v) => bail!("`{field}`: expected {users} entries (one per user), got {}", v.len()),
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> PerUser {
        match self {
            PerUser::Shared(x) => PerUser::Shared(f(*x)),
            PerUser::Each(v) => PerUser::Each(v.iter().copied().map(f).collect()),
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn pick<T: Clone>(linear: &Option<T>, log: &Option<T>, names: (&str, &str), convert: impl Fn(&T) -> T) -> anyhow::Result<Option<T>> {
    match (linear, log) {
        (Some(_), Some(_)) => bail!("`{}` and `{}` are both set; give one", names.0, names.1),
        (Some(x), None) => Ok(Some(x.clone())),
        (None, Some(x)) => Ok(Some(convert(x))),
        (None, None) => Ok(None),
    }
}

impl ScenarioConfig {
    /// Builds and validates the scenario. Unset fields take the standard
    /// simulation values (1 cm wavelength, 10 wavelengths aperture, half-wavelength
    /// spacing, probe at 60 deg, -80 dBm noise, 30 dBm budget, -40 dB gain,
    /// exponent 2.8, users at 100 m, no probing requirement).
    pub fn to_scenario(&self) -> anyhow::Result<Scenario> {
        let antennas = self.antennas.context("`antennas` is required")?;
        let angles = self.user_angles_deg.clone().context("`user_angles_deg` is required")?;
        let k = angles.len();
        let wavelength = self.wavelength_m.unwrap_or(WAVELENGTH);
        let aperture = match (self.aperture_m, self.aperture_wavelengths) {
            (Some(_), Some(_)) => bail!("`aperture_m` and `aperture_wavelengths` are both set; give one"),
            (Some(d), None) => d,
            (None, Some(n)) => n * wavelength,
            (None, None) => 10.0 * wavelength,
        };
        let noise = pick(&self.noise_power_w, &self.noise_power_dbm, ("noise_power_w", "noise_power_dbm"), |p| {
            p.map(dbm_to_watts)
        })?
        .unwrap_or(PerUser::Shared(dbm_to_watts(-80.0)));
        let max_power = pick(&self.max_power_w, &self.max_power_dbm, ("max_power_w", "max_power_dbm"), |p| {
            dbm_to_watts(*p)
        })?
        .unwrap_or(1.0);
        let probe_threshold = pick(
            &self.probe_threshold_w,
            &self.probe_threshold_dbm,
            ("probe_threshold_w", "probe_threshold_dbm"),
            |p| dbm_to_watts(*p),
        )?
        .unwrap_or(0.0);
        let ref_gain = pick(&self.ref_gain, &self.ref_gain_db, ("ref_gain", "ref_gain_db"), |g| db_to_linear(*g))?
            .unwrap_or(1e-4);
        let s = Scenario {
            antennas,
            wavelength,
            aperture,
            min_spacing: self.min_spacing_m.unwrap_or(wavelength / 2.0),
            user_angles: angles.iter().map(|a| a.to_radians()).collect(),
            probe_angle: self.probe_angle_deg.unwrap_or(60.0).to_radians(),
            noise_power: noise.expand("noise_power_w", k)?,
            max_power,
            probe_threshold,
            ref_gain,
            path_loss_exp: self.path_loss_exp.unwrap_or(2.8),
            user_distances: self
                .user_distances_m
                .clone()
                .unwrap_or(PerUser::Shared(100.0))
                .expand("user_distances_m", k)?,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Joint beamformer and position optimization.
    Bsum,
    /// Fixed half-wavelength array.
    Fpa,
    /// Particle swarm over positions.
    Pso,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bsum => "bsum",
            Method::Fpa => "fpa",
            Method::Pso => "pso",
        }
    }
}

/// Input of `run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub solver: BsumOptions,
    #[serde(default)]
    pub pso: PsoOptions,
}

fn default_method() -> Method {
    Method::Bsum
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Like `serde_json::from_str`, with the offending field path in the error.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> anyhow::Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("`{path}`: {}", e.into_inner())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_user() -> ScenarioConfig {
        ScenarioConfig {
            antennas: Some(8),
            user_angles_deg: Some(vec![90.0, 120.0]),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_are_the_standard_setup() {
        let s = two_user().to_scenario().unwrap();
        assert_eq!(s, fa_isac::presets::two_user(8, 1.0, 0.0));
    }

    #[test]
    fn log_units_convert() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-26);
        assert!((db_to_linear(-40.0) - 1e-4).abs() < 1e-19);
        let c = ScenarioConfig {
            max_power_dbm: Some(20.0),
            noise_power_dbm: Some(PerUser::Each(vec![-80.0, -70.0])),
            ..two_user()
        };
        let s = c.to_scenario().unwrap();
        assert!((s.max_power - 0.1).abs() < 1e-15);
        assert!((s.noise_power[1] - 1e-10).abs() < 1e-24);
    }

    #[test]
    fn conflicting_units_name_both_fields() {
        let c = ScenarioConfig {
            max_power_w: Some(1.0),
            max_power_dbm: Some(30.0),
            ..two_user()
        };
        let msg = c.to_scenario().unwrap_err().to_string();
        assert!(msg.contains("max_power_w") && msg.contains("max_power_dbm"), "{msg}");
    }

    #[test]
    fn per_user_length_is_checked() {
        let c = ScenarioConfig {
            user_distances_m: Some(PerUser::Each(vec![1.0, 2.0, 3.0])),
            ..two_user()
        };
        let msg = c.to_scenario().unwrap_err().to_string();
        assert!(msg.contains("user_distances_m"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"antennas": 4, "antenas": 5}"#).unwrap_err();
        assert!(err.to_string().contains("antenas"));
    }
}
