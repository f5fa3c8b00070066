//! Experiment configuration and its flat `key = value` file format.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::coupling::ProjectionMode;
use crate::error::{Error, Result};
use crate::test_space::{BubbleSource, Eigenproblem};
use crate::trial_space::PouMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

/// One experiment, or a Cartesian sweep when list-valued fields hold several entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub example: u8,
    /// Defaults per example when unset.
    pub alpha: Option<f64>,
    pub coarse: usize,
    pub fine: usize,
    pub trial: Vec<usize>,
    pub test: Vec<usize>,
    pub eig: Vec<Eigenproblem>,
    pub online: usize,
    pub pou: PouMode,
    pub projection: ProjectionMode,
    pub bubble: BubbleSource,
    /// Example 2 perturbation amplitude.
    pub delta: f64,
    /// Example 5 permeability raster; a synthetic channel raster is used when unset.
    pub raster: Option<PathBuf>,
    /// Example 5 velocity sign, `b = sign * kappa grad p`.
    pub velocity_sign: f64,
    pub infsup: bool,
    /// Online residual recomputed after every color class (else once per sweep).
    pub residual_per_class: bool,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            example: 1,
            alpha: None,
            coarse: 8,
            fine: 64,
            trial: vec![1],
            test: vec![1],
            eig: vec![Eigenproblem::One],
            online: 0,
            pou: PouMode::Multiscale,
            projection: ProjectionMode::Euclidean,
            bubble: BubbleSource::Euclidean,
            delta: std::f64::consts::SQRT_2 / 4.0,
            raster: None,
            velocity_sign: 1.0,
            infsup: false,
            residual_per_class: true,
            out: None,
            format: ReportFormat::Csv,
        }
    }
}

pub fn default_alpha(example: u8) -> f64 {
    match example {
        1 | 2 => 2.0,
        3 => 1.0 / 1000.0,
        5 => 1.0 / 250.0,
        _ => 1.0,
    }
}

impl ExperimentConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or_else(|| default_alpha(self.example))
    }

    pub fn ratio(&self) -> usize {
        self.fine / self.coarse.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.example) {
            return Err(Error::Config(format!("unknown example {}", self.example)));
        }
        if self.coarse < 2 {
            return Err(Error::InvalidMesh(format!("coarse subdivisions {} < 2", self.coarse)));
        }
        if self.fine % self.coarse != 0 {
            return Err(Error::IncompatibleGrid {
                fine: self.fine,
                coarse: self.coarse,
            });
        }
        let r = self.ratio();
        if r < 2 {
            return Err(Error::InvalidMesh(format!("coarse-to-fine ratio {r} < 2")));
        }
        if self.trial.is_empty() || self.test.is_empty() || self.eig.is_empty() {
            return Err(Error::Config("trial, test and eig need at least one value".into()));
        }
        if self.trial.contains(&0) {
            return Err(Error::Config("trial basis count must be positive".into()));
        }
        if let Some(&l) = self.test.iter().find(|&&l| l > r - 1) {
            return Err(Error::Config(format!(
                "test count {l} exceeds the {} interior nodes per coarse edge",
                r - 1
            )));
        }
        if let Some(a) = self.alpha {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::Config(format!("alpha must be positive, got {a}")));
            }
        }
        if self.velocity_sign != 1.0 && self.velocity_sign != -1.0 {
            return Err(Error::Config("velocity_sign must be 1 or -1".into()));
        }
        Ok(())
    }

    /// Apply one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid value '{value}' for {what}"));
        match key {
            "example" => self.example = value.parse().map_err(|_| bad(key))?,
            "alpha" => self.alpha = Some(parse_number(value).ok_or_else(|| bad(key))?),
            "coarse" => self.coarse = value.parse().map_err(|_| bad(key))?,
            "fine" => self.fine = value.parse().map_err(|_| bad(key))?,
            "trial" => self.trial = parse_list(value).ok_or_else(|| bad(key))?,
            "test" => self.test = parse_list(value).ok_or_else(|| bad(key))?,
            "eig" => {
                self.eig = parse_list::<u8>(value)
                    .ok_or_else(|| bad(key))?
                    .into_iter()
                    .map(Eigenproblem::try_from)
                    .collect::<Result<_>>()?
            }
            "online" => self.online = value.parse().map_err(|_| bad(key))?,
            "pou" => self.pou = value.parse()?,
            "projection" => self.projection = value.parse()?,
            "bubble" => self.bubble = value.parse()?,
            "delta" => self.delta = parse_number(value).ok_or_else(|| bad(key))?,
            "raster" => self.raster = Some(PathBuf::from(value)),
            "velocity_sign" => self.velocity_sign = parse_number(value).ok_or_else(|| bad(key))?,
            "infsup" => self.infsup = parse_bool(value).ok_or_else(|| bad(key))?,
            "residual_per_class" => self.residual_per_class = parse_bool(value).ok_or_else(|| bad(key))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Parse a config file body. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: k + 1,
                reason: format!("expected key = value, got '{line}'"),
            })?;
            cfg.set(key.trim(), value.trim()).map_err(|e| Error::Parse {
                line: k + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Inverse of [`ExperimentConfig::parse`].
    pub fn to_text(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut s = format!("example = {}\n", self.example);
        if let Some(a) = self.alpha {
            s += &format!("alpha = {a}\n");
        }
        s += &format!("coarse = {}\nfine = {}\n", self.coarse, self.fine);
        s += &format!("trial = {}\ntest = {}\n", join(&self.trial), join(&self.test));
        let eig: Vec<usize> = self.eig.iter().map(|e| e.id() as usize).collect();
        s += &format!("eig = {}\nonline = {}\n", join(&eig), self.online);
        s += &format!("pou = {}\n", match self.pou {
            PouMode::Multiscale => "multiscale",
            PouMode::Bilinear => "bilinear",
        });
        s += &format!("projection = {}\n", match self.projection {
            ProjectionMode::Euclidean => "euclidean",
            ProjectionMode::Mass => "mass",
        });
        s += &format!("bubble = {}\n", match self.bubble {
            BubbleSource::Euclidean => "euclidean",
            BubbleSource::Mass => "mass",
        });
        s += &format!("delta = {}\nvelocity_sign = {}\n", self.delta, self.velocity_sign);
        if let Some(r) = &self.raster {
            s += &format!("raster = {}\n", r.display());
        }
        s += &format!("infsup = {}\nresidual_per_class = {}\n", self.infsup, self.residual_per_class);
        if let Some(o) = &self.out {
            s += &format!("out = {}\n", o.display());
        }
        s += &format!("format = {}\n", match self.format {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        });
        s
    }
}

/// Accepts plain decimals and simple fractions such as `1/250`.
pub fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        (b != 0.0).then_some(a / b)
    } else {
        s.parse().ok()
    }
}

fn parse_list<T: FromStr>(s: &str) -> Option<Vec<T>> {
    s.split(',').map(|p| p.trim().parse().ok()).collect()
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" => Some(false),
        _ => None,
    }
}
