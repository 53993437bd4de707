//! Scenario and sweep configuration files (TOML). Every physical quantity
//! carries its unit in the key name; omitted keys take the reference values.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::geometry::{db_to_linear, dbm_to_watts, Scenario, UraLayout, Vec3};
use crate::harness::sweep::{Algorithm, ElementSplit, SweepAxis, SweepSpec};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub radio: RadioConfig,
    #[serde(default)]
    pub arrays: SpacingConfig,
    #[serde(default)]
    pub bs: UlaConfig,
    #[serde(default)]
    pub user: UlaConfig,
    #[serde(default)]
    pub irs1: UraConfig,
    #[serde(default)]
    pub irs2: UraConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_frequency_ghz: Option<f64>,
    pub wavelength_m: Option<f64>,
    pub path_gain_db: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    pub noise_power_dbm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpacingConfig {
    pub antenna_spacing_in_wavelengths: Option<f64>,
    pub element_spacing_in_wavelengths: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UlaConfig {
    pub position_m: Option<[f64; 3]>,
    pub axis: Option<[f64; 3]>,
    pub antennas: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UraConfig {
    pub position_m: Option<[f64; 3]>,
    pub axis_a: Option<[f64; 3]>,
    pub axis_b: Option<[f64; 3]>,
    /// Total count, laid out as a near-square rectangle.
    pub elements: Option<usize>,
    pub elements_a: Option<usize>,
    pub elements_b: Option<usize>,
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

impl UraConfig {
    fn layout(&self, name: &str, default: UraLayout) -> Result<UraLayout> {
        match (self.elements, self.elements_a, self.elements_b) {
            (None, None, None) => Ok(default),
            (Some(m), None, None) => Ok(UraLayout::near_square(m)),
            (None, Some(a), Some(b)) => Ok(UraLayout::new(a, b)),
            (Some(m), Some(a), Some(b)) if a * b == m => Ok(UraLayout::new(a, b)),
            _ => Err(Error::invalid(
                format!("{name}.elements"),
                "give either `elements` or both `elements_a` and `elements_b` (with a consistent product)",
            )),
        }
    }
}

impl ScenarioConfig {
    /// Overlay the configured values on the reference scenario and validate.
    pub fn into_scenario(self) -> Result<Scenario> {
        let mut s = Scenario::reference();
        let r = &self.radio;
        s.wavelength = match (r.wavelength_m, r.carrier_frequency_ghz) {
            (Some(_), Some(_)) => {
                return Err(Error::invalid(
                    "radio.wavelength_m",
                    "give either wavelength_m or carrier_frequency_ghz, not both",
                ))
            }
            (Some(w), None) => w,
            (None, Some(f)) => SPEED_OF_LIGHT / (f * 1e9),
            (None, None) => s.wavelength,
        };
        if let Some(g) = r.path_gain_db {
            s.path_gain = db_to_linear(g);
        }
        if let Some(p) = r.tx_power_dbm {
            s.tx_power = dbm_to_watts(p);
        }
        if let Some(n) = r.noise_power_dbm {
            s.noise_power = dbm_to_watts(n);
        }
        s.antenna_spacing = self.arrays.antenna_spacing_in_wavelengths.unwrap_or(0.5) * s.wavelength;
        s.element_spacing = self.arrays.element_spacing_in_wavelengths.unwrap_or(0.1) * s.wavelength;

        for (ula, cfg) in [(&mut s.bs, &self.bs), (&mut s.user, &self.user)] {
            if let Some(p) = cfg.position_m {
                ula.position = vec3(p);
            }
            if let Some(v) = cfg.axis {
                ula.axis = vec3(v);
            }
            if let Some(n) = cfg.antennas {
                ula.count = n;
            }
        }
        for (name, ura, cfg) in [("irs1", &mut s.irs1, &self.irs1), ("irs2", &mut s.irs2, &self.irs2)] {
            if let Some(p) = cfg.position_m {
                ura.position = vec3(p);
            }
            if let Some(v) = cfg.axis_a {
                ura.axis_a = vec3(v);
            }
            if let Some(v) = cfg.axis_b {
                ura.axis_b = vec3(v);
            }
            ura.layout = cfg.layout(name, ura.layout)?;
        }
        s.validate()?;
        Ok(s)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
}

pub fn parse_scenario(text: &str, path: &Path) -> Result<Scenario> {
    parse::<ScenarioConfig>(text, path)?.into_scenario()
}

/// Load and validate a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    parse_scenario(&read(path)?, path)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Scenario file, relative to the sweep file.
    pub scenario_file: Option<PathBuf>,
    /// Inline scenario, used when no file is given.
    pub scenario: Option<ScenarioConfig>,
    /// `elements`, `tx_power_dbm`, `psi_deg` or `none`.
    pub axis: String,
    #[serde(default)]
    pub values: Vec<f64>,
    pub algorithms: Vec<String>,
    pub irs1_fraction: Option<f64>,
    pub eps: Option<f64>,
    pub parallel: Option<bool>,
}

pub fn parse_sweep(text: &str, path: &Path) -> Result<SweepSpec> {
    let cfg: SweepConfig = parse(text, path)?;
    let base = match (&cfg.scenario_file, cfg.scenario) {
        (Some(_), Some(_)) => {
            return Err(Error::InvalidSweep("give either scenario_file or an inline [scenario], not both".into()))
        }
        (Some(file), None) => {
            let full = path.parent().map(|d| d.join(file)).unwrap_or_else(|| file.clone());
            load_scenario(&full)?
        }
        (None, Some(inline)) => inline.into_scenario()?,
        (None, None) => Scenario::reference(),
    };
    let axis = match cfg.axis.as_str() {
        "elements" => SweepAxis::Elements,
        "tx_power_dbm" => SweepAxis::PowerDbm,
        "psi_deg" => SweepAxis::Psi,
        "none" => SweepAxis::None,
        other => {
            return Err(Error::InvalidSweep(format!(
                "unknown axis `{other}` (expected elements, tx_power_dbm, psi_deg or none)"
            )))
        }
    };
    let values = match axis {
        SweepAxis::Psi => cfg.values.iter().map(|d| d.to_radians()).collect(),
        _ => cfg.values,
    };
    let algorithms = cfg.algorithms.iter().map(|a| a.parse()).collect::<Result<Vec<Algorithm>>>()?;
    let mut spec = SweepSpec::new(base, axis, values, algorithms);
    if let Some(f) = cfg.irs1_fraction {
        spec.split = ElementSplit { irs1_fraction: f };
    }
    if let Some(eps) = cfg.eps {
        spec.eps = eps;
    }
    if let Some(p) = cfg.parallel {
        spec.parallel = p;
    }
    spec.validate()?;
    Ok(spec)
}

pub fn load_sweep(path: &Path) -> Result<SweepSpec> {
    parse_sweep(&read(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> &'static Path {
        Path::new("test.toml")
    }

    #[test]
    fn empty_config_is_reference() {
        assert_eq!(parse_scenario("", p()).unwrap(), Scenario::reference());
    }

    #[test]
    fn power_override_only() {
        let s = parse_scenario("[radio]\ntx_power_dbm = 20\n", p()).unwrap();
        assert!((s.tx_power - 0.1).abs() < 1e-15);
        let mut want = Scenario::reference();
        want.tx_power = s.tx_power;
        assert_eq!(s, want);
    }

    #[test]
    fn non_unit_axis_names_field() {
        let err = parse_scenario("[bs]\naxis = [1.0, 1.0, 0.0]\n", p()).unwrap_err();
        assert!(err.to_string().contains("v_t"), "{err}");
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(parse_scenario("[radio]\npower = 3\n", p()), Err(Error::Parse { .. })));
    }

    #[test]
    fn carrier_frequency_sets_wavelength() {
        let s = parse_scenario("[radio]\ncarrier_frequency_ghz = 3.5\n", p()).unwrap();
        assert!((s.wavelength - 0.08565).abs() < 1e-4);
        assert!((s.antenna_spacing - s.wavelength / 2.0).abs() < 1e-15);
        assert!(parse_scenario("[radio]\ncarrier_frequency_ghz = 3.5\nwavelength_m = 0.1\n", p()).is_err());
    }

    #[test]
    fn element_layouts() {
        let s = parse_scenario("[irs1]\nelements = 50\n[irs2]\nelements_a = 4\nelements_b = 6\n", p()).unwrap();
        assert_eq!(s.irs1.layout, UraLayout::new(5, 10));
        assert_eq!(s.irs2.layout, UraLayout::new(4, 6));
        assert!(parse_scenario("[irs1]\nelements_a = 4\n", p()).is_err());
    }

    #[test]
    fn sweep_from_inline_scenario() {
        let text = "axis = \"psi_deg\"\nvalues = [0, 45, 90]\nalgorithms = [\"algorithm1\"]\n[scenario.bs]\nantennas = 2\n";
        let spec = parse_sweep(text, p()).unwrap();
        assert_eq!(spec.base.bs.count, 2);
        assert!((spec.values[2] - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(parse_sweep("axis = \"bogus\"\nalgorithms = []\n", p()).is_err());
    }
}
