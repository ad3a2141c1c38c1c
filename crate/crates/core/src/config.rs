//! JSON run configuration shared by the command-line commands.

use crate::detect::DetectorConfig;
use crate::domain::{Domain, Point};
use crate::flow::{FlowError, FlowSpec, PolynomialField, Smoothness};
use crate::gallery::{gallery_get, GalleryEntry, GalleryError, GalleryParams};
use crate::geometry::QUAD_N;
use crate::grid::Grid;
use crate::linearization::{LinearizationConfig, SampleRegion};
use crate::pfunc::{Alpha, ConditionConfig, FieldConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error("invalid config: {0}")]
    Json(serde_json::Error),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub bounds: Vec<(f64, f64)>,
    #[serde(default)]
    pub periodic: Option<Vec<bool>>,
    #[serde(default)]
    pub boundary_coord: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FlowConfig {
    Gallery {
        name: String,
        #[serde(default)]
        params: GalleryParams,
    },
    PolynomialField {
        dim: usize,
        components: Vec<String>,
        #[serde(default = "default_class")]
        class: Smoothness,
        /// Defaults to the cube `[-1, 1]^dim`.
        #[serde(default)]
        domain: Option<DomainConfig>,
    },
}

fn default_class() -> Smoothness {
    Smoothness::Cinf
}

/// Region of the domain box sampled by grids and random points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    /// The gallery entry's sampling mask, or the whole box for other flows.
    #[default]
    Default,
    All,
    /// `inner ≤ |(x_1, x_2)| ≤ outer`.
    Annulus { inner: f64, outer: f64 },
    /// `‖x − centre‖ ≤ radius` over all coordinates.
    Ball { radius: f64, centre: Option<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Cells per real axis and nodes per circle axis.
    pub cells: usize,
    pub region: RegionConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { cells: 32, region: RegionConfig::Default }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub alpha: Alpha,
    pub conditions: ConditionConfig,
    pub region: SampleRegion,
    pub radii: Vec<f64>,
    pub threshold: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            alpha: Alpha::new(1, 2),
            conditions: ConditionConfig::default(),
            region: SampleRegion::Cone { epsilon: 0.5 },
            radii: vec![0.5, 0.25, 0.125, 0.0625],
            threshold: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub flow: FlowConfig,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Replaces the gallery entry's detector settings.
    #[serde(default)]
    pub detector: Option<DetectorConfig>,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub linearization: LinearizationConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Explicit points; random points in the region are drawn when absent.
    #[serde(default)]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_primes")]
    pub primes_up_to: u32,
    #[serde(default = "default_quad_n")]
    pub quad_n: usize,
    #[serde(default)]
    pub probe: ProbeConfig,
}

fn default_samples() -> usize {
    200
}
fn default_primes() -> u32 {
    7
}
fn default_quad_n() -> usize {
    QUAD_N
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|err| ConfigError::Io { path: path.display().to_string(), err })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(ConfigError::Json)?;
        if cfg.grid.cells < 2 {
            return Err(ConfigError::Invalid("grid.cells must be at least 2".into()));
        }
        if let Some(d) = &cfg.detector {
            d.validate().map_err(ConfigError::Invalid)?;
        }
        Ok(cfg)
    }
}

/// A flow resolved from its configuration, with the settings derived from it.
#[derive(Clone)]
pub struct Resolved {
    pub name: String,
    pub flow: FlowSpec,
    pub gallery: Option<GalleryEntry>,
    pub detector: DetectorConfig,
    pub field: FieldConfig,
    pub mask: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>,
}

impl Resolved {
    pub fn domain(&self) -> &Domain {
        self.flow.domain()
    }

    pub fn grid(&self, cells: usize) -> Grid {
        let mask = self.mask.clone();
        Grid::over_domain(self.domain(), cells, move |x| mask(x))
    }

    /// `n` seeded random points of the sampling region, or the explicit points.
    pub fn points(&self, cfg: &RunConfig, seed: u64) -> Vec<Point> {
        if let Some(pts) = &cfg.points {
            return pts.iter().map(|p| Point(p.clone())).collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bounds = self.domain().bounds().to_vec();
        let mut out = Vec::with_capacity(cfg.samples);
        let mut tries = 0usize;
        while out.len() < cfg.samples && tries < 1000 * cfg.samples.max(1) {
            tries += 1;
            let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..hi)).collect();
            if (self.mask)(&x) {
                out.push(Point(x));
            }
        }
        out
    }
}

fn region_mask(region: &RegionConfig, fallback: Arc<dyn Fn(&[f64]) -> bool + Send + Sync>) -> Arc<dyn Fn(&[f64]) -> bool + Send + Sync> {
    match region.clone() {
        RegionConfig::Default => fallback,
        RegionConfig::All => Arc::new(|_| true),
        RegionConfig::Annulus { inner, outer } => Arc::new(move |x| {
            let r = x[0].hypot(x.get(1).copied().unwrap_or(0.0));
            (inner..=outer).contains(&r)
        }),
        RegionConfig::Ball { radius, centre } => Arc::new(move |x| {
            let d2: f64 = x
                .iter()
                .enumerate()
                .map(|(i, c)| (c - centre.as_ref().and_then(|v| v.get(i)).copied().unwrap_or(0.0)).powi(2))
                .sum();
            d2 <= radius * radius
        }),
    }
}

/// Build the flow and the effective settings. `tol_scale` multiplies the detector
/// tolerances and the verification tolerance.
pub fn resolve(cfg: &RunConfig, tol_scale: f64) -> Result<Resolved, ConfigError> {
    let (name, flow, gallery, detector, fallback) = match &cfg.flow {
        FlowConfig::Gallery { name, params } => {
            let e = gallery_get(name, params)?;
            let mask = e.sample_mask.clone();
            (e.name.clone(), e.flow.clone(), Some(e.clone()), e.detector.clone(), mask)
        }
        FlowConfig::PolynomialField { dim, components, class, domain } => {
            let domain = match domain {
                Some(d) => Domain::new(
                    d.bounds.clone(),
                    d.periodic.clone().unwrap_or_else(|| vec![false; d.bounds.len()]),
                    d.boundary_coord,
                )
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
                None => Domain::cube(*dim, 1.0),
            };
            if domain.dim() != *dim {
                return Err(ConfigError::Invalid(format!("domain has dimension {}, flow {dim}", domain.dim())));
            }
            let field = PolynomialField::parse(*dim, components)?;
            let desc = crate::flow::VectorField::describe(&field);
            let flow = FlowSpec::vector_field(desc.clone(), domain, *class, Arc::new(field))?;
            let all: Arc<dyn Fn(&[f64]) -> bool + Send + Sync> = Arc::new(|_| true);
            (desc, flow, None, DetectorConfig::default(), all)
        }
    };
    let detector = cfg.detector.clone().unwrap_or(detector).scaled(tol_scale);
    let mut field = cfg.field.clone().unwrap_or_default();
    field.detector = detector.clone();
    field.verify_tol *= tol_scale;
    let mask = region_mask(&cfg.grid.region, fallback);
    Ok(Resolved { name, flow, gallery, detector, field, mask })
}
