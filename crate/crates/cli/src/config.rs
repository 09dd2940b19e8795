//! Run configuration: one TOML file per run, every key defaulted, unknown
//! keys rejected, individual keys overridable from the command line.

use anyhow::{anyhow, bail, Context, Result};
use nelson2d_core::bounds::BoundConstants;
use nelson2d_core::estimator::{KacConfig, PotentialSpec, WeightSpec};
use nelson2d_core::kspace::GridSpec;
use nelson2d_core::{ModelParams, Vec2};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker count; 0 means one worker per available core.
    pub workers: usize,
    pub output_dir: String,
    pub model: ModelSection,
    pub grid: GridSection,
    pub sampler: SamplerSection,
    pub estimator: EstimatorSection,
    pub weight: WeightSection,
    pub potential: PotentialSection,
    pub bounds: BoundsSection,
    pub expmoment: ExpMomentSection,
    pub asymptotics: AsymptoticsSection,
    pub verify: VerifySection,
    pub kato: KatoSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            workers: 0,
            output_dir: "run-out".into(),
            model: ModelSection::default(),
            grid: GridSection::default(),
            sampler: SamplerSection::default(),
            estimator: EstimatorSection::default(),
            weight: WeightSection::default(),
            potential: PotentialSection::default(),
            bounds: BoundsSection::default(),
            expmoment: ExpMomentSection::default(),
            asymptotics: AsymptoticsSection::default(),
            verify: VerifySection::default(),
            kato: KatoSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub n_particles: usize,
    pub m_p: f64,
    pub m_b: f64,
    pub g: f64,
    pub sigma: f64,
    /// Ultraviolet cutoff; `inf` means none.
    pub lambda: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n_particles: 1,
            m_p: 1.0,
            m_b: 1.0,
            g: 1.0,
            sigma: 0.0,
            lambda: f64::INFINITY,
        }
    }
}

impl ModelSection {
    pub fn params(&self) -> Result<ModelParams> {
        let p = ModelParams {
            n_particles: self.n_particles,
            m_p: self.m_p,
            m_b: self.m_b,
            g: self.g,
            sigma: self.sigma,
            lambda: self.lambda,
        };
        p.validate().map_err(|e| anyhow!("[model] {e}"))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub radial_panels: usize,
    pub gauss_order: usize,
    pub n_theta: usize,
    pub r_max: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        let spec = GridSpec::default();
        Self {
            radial_panels: spec.radial_panels,
            gauss_order: spec.gauss_order,
            n_theta: spec.n_theta,
            r_max: spec.r_max,
        }
    }
}

impl GridSection {
    pub fn spec(&self) -> GridSpec {
        GridSpec {
            radial_panels: self.radial_panels,
            gauss_order: self.gauss_order,
            n_theta: self.n_theta,
            r_max: self.r_max,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub eps: f64,
    pub gaussian_correction: bool,
    pub table_resolution: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            eps: 0.1,
            gaussian_correction: false,
            table_resolution: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorSection {
    pub t_ladder: Vec<f64>,
    pub n_paths: usize,
    pub antithetic: bool,
    pub radial_panels: usize,
    pub gauss_order: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let kac = KacConfig::default();
        Self {
            t_ladder: vec![1.0, 2.0, 4.0, 8.0],
            n_paths: kac.n_paths,
            antithetic: kac.antithetic,
            radial_panels: kac.radial_panels,
            gauss_order: kac.gauss_order,
        }
    }
}

impl EstimatorSection {
    pub fn kac_config(&self, sampler: &SamplerSection) -> KacConfig {
        KacConfig {
            eps: sampler.eps,
            gaussian_correction: sampler.gaussian_correction,
            antithetic: self.antithetic,
            n_paths: self.n_paths,
            radial_panels: self.radial_panels,
            gauss_order: self.gauss_order,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightSection {
    /// "gaussian" or "box".
    pub kind: String,
    pub scale: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self {
            kind: "gaussian".into(),
            scale: 1.0,
        }
    }
}

impl WeightSection {
    pub fn spec(&self) -> Result<WeightSpec> {
        let spec = match self.kind.as_str() {
            "gaussian" => WeightSpec::Gaussian { scale: self.scale },
            "box" => WeightSpec::Box {
                half_width: self.scale,
            },
            other => bail!("[weight] unknown kind {other:?} (expected \"gaussian\" or \"box\")"),
        };
        spec.validate().map_err(|e| anyhow!("[weight] {e}"))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialSection {
    /// "zero", "single-power" (Σ_j s/(|x_j|^q + o)) or
    /// "pair-power" (Σ_{j<ℓ} s/(|x_j − x_ℓ|^q + o)).
    pub kind: String,
    pub strength: f64,
    pub power: f64,
    pub offset: f64,
    pub guard: f64,
}

impl Default for PotentialSection {
    fn default() -> Self {
        Self {
            kind: "zero".into(),
            strength: 0.0,
            power: 1.0,
            offset: 1.0,
            guard: 1e12,
        }
    }
}

impl PotentialSection {
    fn component(&self) -> impl Fn(Vec2) -> f64 + Send + Sync + 'static {
        let (s, q, o) = (self.strength, self.power, self.offset);
        move |y: Vec2| s / (y.norm().powf(q) + o)
    }

    pub fn spec(&self) -> Result<PotentialSpec> {
        let spec = match self.kind.as_str() {
            "zero" => PotentialSpec::zero(),
            "single-power" => {
                PotentialSpec::pair_sum(Some(self.component()), None::<fn(Vec2) -> f64>)
            }
            "pair-power" => {
                PotentialSpec::pair_sum(None::<fn(Vec2) -> f64>, Some(self.component()))
            }
            other => bail!(
                "[potential] unknown kind {other:?} (expected \"zero\", \"single-power\" or \"pair-power\")"
            ),
        };
        spec.with_guard(self.guard).map_err(|e| anyhow!("[potential] {e}"))
    }

    /// The single-site component as a plain function (for the Kato probe).
    pub fn site_fn(&self) -> Result<Box<dyn Fn(Vec2) -> f64>> {
        match self.kind.as_str() {
            "zero" => Ok(Box::new(|_| 0.0)),
            "single-power" | "pair-power" => Ok(Box::new(self.component())),
            other => bail!("[potential] unknown kind {other:?}"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub b: f64,
    pub b_prime: f64,
    pub c: f64,
    pub c_prime: f64,
    pub c_universal: f64,
    pub c_upper: f64,
    pub alpha: f64,
    pub theta: f64,
    pub s: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        let c = BoundConstants::default();
        Self {
            b: c.b,
            b_prime: c.b_prime,
            c: c.c,
            c_prime: c.c_prime,
            c_universal: c.c_universal,
            c_upper: c.c_upper,
            alpha: c.alpha,
            theta: c.theta,
            s: c.s,
        }
    }
}

impl BoundsSection {
    pub fn constants(&self) -> Result<BoundConstants> {
        let c = BoundConstants {
            b: self.b,
            b_prime: self.b_prime,
            c: self.c,
            c_prime: self.c_prime,
            c_universal: self.c_universal,
            c_upper: self.c_upper,
            alpha: self.alpha,
            theta: self.theta,
            s: self.s,
        };
        c.validate().map_err(|e| anyhow!("[bounds] {e}"))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpMomentSection {
    pub p: f64,
    pub t: f64,
    pub n_paths: usize,
    /// "small-coupling" or "large-coupling".
    pub kind: String,
}

impl Default for ExpMomentSection {
    fn default() -> Self {
        Self {
            p: 1.0,
            t: 1.0,
            n_paths: 500,
            kind: "small-coupling".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsymptoticsSection {
    /// "N", "g2", "mb-massive" or "mb-massless".
    pub regime: String,
    pub grid: Vec<f64>,
    pub theta: f64,
}

impl Default for AsymptoticsSection {
    fn default() -> Self {
        Self {
            regime: "N".into(),
            grid: vec![1e2, 1e3, 1e4, 1e5, 1e6],
            theta: 0.99,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub n_paths: usize,
    pub eps_ladder: Vec<f64>,
    pub horizon: f64,
    pub steps: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            n_paths: 100,
            eps_ladder: vec![0.3, 0.1, 0.03],
            horizon: 2.0,
            steps: 16,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KatoSection {
    pub t_ladder: Vec<f64>,
    pub x_max: f64,
    pub x_points: usize,
}

impl Default for KatoSection {
    fn default() -> Self {
        Self {
            t_ladder: vec![0.0625, 0.25, 1.0],
            x_max: 1.0,
            x_points: 3,
        }
    }
}

/// Load the config file (or the defaults when absent), apply `--set` dot-path
/// overrides, and deserialize with unknown-key rejection.
pub fn load(path: Option<&Path>, sets: &[String]) -> Result<RunConfig> {
    let mut value: toml::Value = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config file {}", p.display()))?;
            text.parse()
                .with_context(|| format!("config file {} is not valid TOML", p.display()))?
        }
        None => toml::Value::Table(toml::map::Map::new()),
    };
    for set in sets {
        apply_set(&mut value, set)?;
    }
    // Round-trip through the defaults: serialize the defaults, merge the file
    // on top, then deserialize strictly so unknown keys are diagnosed.
    let defaults = toml::Value::try_from(RunConfig::default())?;
    let merged = merge(defaults, value);
    merged
        .try_into()
        .map_err(|e| anyhow!("invalid configuration: {e}"))
}

/// Deep merge: `over` wins over `base` key by key; non-table values replace.
fn merge(base: toml::Value, over: toml::Value) -> toml::Value {
    match (base, over) {
        (toml::Value::Table(mut b), toml::Value::Table(o)) => {
            for (k, v) in o {
                let merged = match b.remove(&k) {
                    Some(old) => merge(old, v),
                    None => v,
                };
                b.insert(k, merged);
            }
            toml::Value::Table(b)
        }
        (_, over) => over,
    }
}

/// Apply one `--set dotted.key=value` override onto the raw TOML tree. The
/// value is parsed as TOML (so numbers, booleans and arrays work) and falls
/// back to a bare string.
fn apply_set(root: &mut toml::Value, set: &str) -> Result<()> {
    let (key, raw) = set
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects key=value, got {set:?}"))?;
    let parsed: toml::Value = format!("v = {raw}")
        .parse::<toml::Value>()
        .ok()
        .and_then(|mut t| t.as_table_mut().and_then(|t| t.remove("v")))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("--set key {key:?} has an empty path segment");
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| anyhow!("--set key {key:?}: {part:?} is not a table"))?;
        if i + 1 == parts.len() {
            table.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    unreachable!("empty --set key rejected above")
}
