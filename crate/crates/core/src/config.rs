//! Detector configuration and the flat `key = value` config file.
//!
//! Recognized keys: `method`, `scales`, `alpha`, `prefilter`, `low`, `high`,
//! `sigma`, `beta`, `tol`, `thresholds`, `threads`. Blank lines and lines
//! starting with `#` are ignored.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::canny::{canny, DEFAULT_SIGMA};
use crate::congruency::{spectrum_congruency_map, EdgeStrengthMap, Prefilter};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::patch::{ScalePreset, ScaleSet};
use crate::thinning::EdgeMap;

pub const KNOWN_KEYS: [&str; 11] = [
    "method",
    "scales",
    "alpha",
    "prefilter",
    "low",
    "high",
    "sigma",
    "beta",
    "tol",
    "thresholds",
    "threads",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Sc,
    Canny,
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sc" => Ok(Method::Sc),
            "canny" => Ok(Method::Canny),
            other => Err(Error::param(
                "method",
                format!("unknown method `{other}` (sc or canny)"),
            )),
        }
    }
}

/// Parses `3,5,7` or a preset name (`fine`, `wide-gap`, `medium`, `coarse`).
pub fn parse_scales(s: &str) -> Result<Vec<usize>> {
    if let Some(p) = ScalePreset::from_name(s.trim()) {
        return Ok(p.sides().to_vec());
    }
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::param("scales", format!("`{t}` is not a positive integer")))
        })
        .collect()
}

/// Parses `WINDOW:SIGMA`, e.g. `7:3.5`.
pub fn parse_prefilter(s: &str) -> Result<Prefilter> {
    let (w, sg) = s
        .split_once(':')
        .ok_or_else(|| Error::param("prefilter", format!("`{s}` is not WINDOW:SIGMA")))?;
    let window: usize = w
        .trim()
        .parse()
        .map_err(|_| Error::param("prefilter", format!("bad window `{w}`")))?;
    let sigma: f64 = sg
        .trim()
        .parse()
        .map_err(|_| Error::param("prefilter", format!("bad sigma `{sg}`")))?;
    if window.is_multiple_of(2) {
        return Err(Error::param(
            "prefilter",
            format!("window {window} is not odd"),
        ));
    }
    if !sigma.is_finite() || sigma <= 0.0 {
        return Err(Error::param(
            "prefilter",
            format!("sigma {sigma} is not positive"),
        ));
    }
    Ok(Prefilter { window, sigma })
}

/// Parsed config file contents.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Format(format!("config line {}: expected key = value", n + 1))
            })?;
            let k = k.trim();
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Format(format!(
                    "config line {}: unknown key `{k}`",
                    n + 1
                )));
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub method: Method,
    pub scales: ScaleSet,
    pub prefilter: Option<Prefilter>,
    pub low: f64,
    pub high: f64,
    /// Gaussian scale for the Canny baseline.
    pub sigma: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            method: Method::Sc,
            scales: ScaleSet::default(),
            prefilter: None,
            low: 0.1,
            high: 0.3,
            sigma: DEFAULT_SIGMA,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.low)
            || !(0.0..=1.0).contains(&self.high)
            || self.low > self.high
        {
            return Err(Error::param(
                "low",
                format!(
                    "need 0 <= low <= high <= 1, got {} and {}",
                    self.low, self.high
                ),
            ));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::param("sigma", "must be positive"));
        }
        Ok(())
    }

    /// Strength map for `Method::Sc`.
    pub fn strength_map(&self, img: &Image) -> Result<EdgeStrengthMap> {
        spectrum_congruency_map(img, &self.scales, self.prefilter)
    }

    /// Canny edges for `Method::Canny`.
    pub fn canny_edges(&self, img: &Image) -> Result<EdgeMap> {
        canny(img, self.sigma, self.low, self.high)
    }
}
