//! Experiment configuration: parsing, validation and resolution against the
//! library types.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use homflow::catalog::{self, CatalogParams};
use homflow::linalg::{block_diag, from_rows, Mat};
use homflow::{FlowControls, LieAlgebra, SemidirectData};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    /// Absent: no integration.
    pub flow: Option<FlowControls>,
    #[serde(default)]
    pub checks: ChecksConfig,
    #[serde(default)]
    pub outputs: OutputsConfig,
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    /// Catalog entry name; exclusive with `inline`.
    pub catalog: Option<String>,
    pub inline: Option<InlineSpace>,
    pub lambda: Option<f64>,
    pub lambda2: Option<f64>,
    /// Coordinate vectors in u spanning h; overrides the catalog default.
    pub h_basis: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bracket {
    pub i: usize,
    pub j: usize,
    /// Coefficients of `[e_i, e_j]` in the basis of u.
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineSpace {
    pub u_dim: usize,
    pub u_labels: Option<Vec<String>>,
    #[serde(default)]
    pub u_brackets: Vec<Bracket>,
    pub dim_v: usize,
    /// One row-major `dim_v × dim_v` matrix per basis element of u.
    pub theta: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    #[default]
    Background,
    Diag,
    Dense,
    Suggested,
    Blocks,
    Random,
}

/// One block of a block-diagonal metric, in split order `m_u, V^1, V^2, …`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub kind: MetricKind,
    pub values: Option<Vec<f64>>,
    pub rows: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    #[serde(default)]
    pub kind: MetricKind,
    pub values: Option<Vec<f64>>,
    pub rows: Option<Vec<Vec<f64>>>,
    /// Name of a suggested catalog metric.
    pub name: Option<String>,
    pub blocks: Option<Vec<BlockSpec>>,
    pub seed: Option<u64>,
    pub kappa: Option<f64>,
    /// Random metrics: restrict to θ-adapted ones (default true).
    pub adapted: Option<bool>,
}

pub const CHECK_NAMES: [&str; 11] = [
    "theta-adapted-invariance",
    "equivariance",
    "monotonicity",
    "scalar-evolution",
    "extinction",
    "blowdown",
    "curvature-blocks",
    "scalar-consistency",
    "stability",
    "deform",
    "nilsoliton",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default)]
    pub run: Vec<String>,
    #[serde(default = "default_blowdown_s")]
    pub blowdown_s: Vec<f64>,
    #[serde(default = "default_t_ref")]
    pub blowdown_t_ref: f64,
    #[serde(default = "default_scalar_tol")]
    pub scalar_evolution_tol: f64,
}

fn default_blowdown_s() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0, 16.0]
}
fn default_t_ref() -> f64 {
    1.0
}
fn default_scalar_tol() -> f64 {
    1e-3
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig {
            run: vec![],
            blowdown_s: default_blowdown_s(),
            blowdown_t_ref: default_t_ref(),
            scalar_evolution_tol: default_scalar_tol(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputsConfig {
    /// Used when `--out` is not given.
    pub dir: Option<String>,
    #[serde(default = "yes")]
    pub trajectory_csv: bool,
    #[serde(default = "yes")]
    pub plots: bool,
    #[serde(default = "yes")]
    pub gnuplot: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputsConfig {
    fn default() -> Self {
        OutputsConfig { dir: None, trajectory_csv: true, plots: true, gnuplot: true }
    }
}

/// Independent experiments: the cartesian product of the listed values, each
/// written to its own subdirectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub lambda: Vec<f64>,
}

/// A resolved space: representation data plus isotropy and a display name.
#[derive(Debug, Clone)]
pub struct ResolvedSpace {
    pub name: String,
    pub data: SemidirectData,
    pub h_basis: Vec<Vec<f64>>,
    pub suggested: Vec<catalog::SuggestedMetric>,
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    Ok(toml::from_str(text)?)
}

impl ExperimentConfig {
    /// The list of single experiments described by this config: itself, or
    /// one per sweep point with a directory label.
    pub fn expand(&self) -> Vec<(Option<String>, ExperimentConfig)> {
        let Some(sweep) = &self.sweep else {
            return vec![(None, self.clone())];
        };
        let seeds: Vec<Option<u64>> =
            if sweep.seeds.is_empty() { vec![None] } else { sweep.seeds.iter().map(|&s| Some(s)).collect() };
        let lambdas: Vec<Option<f64>> =
            if sweep.lambda.is_empty() { vec![None] } else { sweep.lambda.iter().map(|&l| Some(l)).collect() };
        let mut out = Vec::new();
        for l in &lambdas {
            for s in &seeds {
                let mut c = self.clone();
                c.sweep = None;
                let mut label = Vec::new();
                if let Some(l) = l {
                    c.space.lambda = Some(*l);
                    label.push(format!("lambda-{l}"));
                }
                if let Some(s) = s {
                    c.metric.seed = Some(*s);
                    label.push(format!("seed-{s}"));
                }
                out.push((Some(label.join("_")), c));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<ResolvedSpace> {
        for name in &self.checks.run {
            if !CHECK_NAMES.contains(&name.as_str()) {
                bail!("unknown check '{name}' (known: {})", CHECK_NAMES.join(", "));
            }
        }
        if let Some(f) = &self.flow {
            f.validate()?;
        }
        if let Some(s) = &self.sweep {
            if s.seeds.is_empty() && s.lambda.is_empty() {
                bail!("sweep lists no seeds and no lambda values");
            }
        }
        let space = self.space.resolve()?;
        self.metric.validate_shape(&space)?;
        Ok(space)
    }
}

impl SpaceConfig {
    pub fn resolve(&self) -> Result<ResolvedSpace> {
        match (&self.catalog, &self.inline) {
            (Some(_), Some(_)) => bail!("space: give either 'catalog' or 'inline', not both"),
            (None, None) => bail!("space: one of 'catalog' or 'inline' is required"),
            (Some(name), None) => {
                let d = CatalogParams::default();
                let params =
                    CatalogParams { lambda: self.lambda.unwrap_or(d.lambda), lambda2: self.lambda2.unwrap_or(d.lambda2) };
                let e = catalog::entry(name, params)?;
                Ok(ResolvedSpace {
                    name: e.name.to_string(),
                    data: e.data,
                    h_basis: self.h_basis.clone().unwrap_or(e.h_basis),
                    suggested: e.metrics,
                })
            }
            (None, Some(inl)) => {
                let brackets: Vec<(usize, usize, Vec<f64>)> =
                    inl.u_brackets.iter().map(|b| (b.i, b.j, b.coeffs.clone())).collect();
                let u = LieAlgebra::from_brackets(inl.u_dim, inl.u_labels.clone(), &brackets)?;
                if inl.theta.len() != inl.u_dim {
                    bail!("space.inline: theta has {} matrices, u has dimension {}", inl.theta.len(), inl.u_dim);
                }
                let theta = inl
                    .theta
                    .iter()
                    .enumerate()
                    .map(|(k, rows)| {
                        let m = from_rows(rows)?;
                        if m.nrows() != inl.dim_v || m.ncols() != inl.dim_v {
                            bail!("space.inline: theta[{k}] must be {0}x{0}", inl.dim_v);
                        }
                        Ok(m)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let data = SemidirectData::new(u, inl.dim_v, theta)?;
                Ok(ResolvedSpace {
                    name: "inline".into(),
                    data,
                    h_basis: self.h_basis.clone().unwrap_or_default(),
                    suggested: vec![],
                })
            }
        }
    }
}

fn dense(rows: &Option<Vec<Vec<f64>>>, what: &str) -> Result<Mat> {
    let rows = rows.as_ref().ok_or_else(|| anyhow!("{what}: 'rows' is required"))?;
    let m = from_rows(rows)?;
    if m.nrows() != m.ncols() {
        bail!("{what}: matrix must be square, got {}x{}", m.nrows(), m.ncols());
    }
    Ok(m)
}

fn diagonal(values: &Option<Vec<f64>>, what: &str) -> Result<Mat> {
    let v = values.as_ref().ok_or_else(|| anyhow!("{what}: 'values' is required"))?;
    Ok(Mat::from_diagonal(&homflow::Vector::from_row_slice(v)))
}

impl MetricConfig {
    /// Dimension checks that need only the space, not the split.
    fn validate_shape(&self, space: &ResolvedSpace) -> Result<()> {
        let dim_m = space.data.dim_u() + space.data.dim_v() - space.h_basis.len();
        let check = |m: &Mat, what: &str| {
            if m.nrows() != dim_m {
                bail!("{what}: metric has dimension {}, but m has dimension {dim_m}", m.nrows());
            }
            Ok(())
        };
        match self.kind {
            MetricKind::Background | MetricKind::Random | MetricKind::Blocks => Ok(()),
            MetricKind::Diag => check(&diagonal(&self.values, "metric")?, "metric"),
            MetricKind::Dense => check(&dense(&self.rows, "metric")?, "metric"),
            MetricKind::Suggested => {
                let name = self.name.as_deref().ok_or_else(|| anyhow!("metric: 'name' is required"))?;
                let s = space
                    .suggested
                    .iter()
                    .find(|s| s.name == name)
                    .ok_or_else(|| anyhow!("metric: '{name}' is not a suggested metric of {}", space.name))?;
                check(&from_rows(&s.p)?, "metric")
            }
        }
    }

    /// Builds P on m. `blocks` lists the split block sizes (m_u first, then
    /// each weight block); required for the blocks kind.
    pub fn build(&self, space: &ResolvedSpace, dim_m: usize, blocks: &[usize]) -> Result<Mat> {
        let m = match self.kind {
            MetricKind::Background => Mat::identity(dim_m, dim_m),
            MetricKind::Diag => diagonal(&self.values, "metric")?,
            MetricKind::Dense => dense(&self.rows, "metric")?,
            MetricKind::Suggested => {
                let name = self.name.as_deref().unwrap_or_default();
                let s = space.suggested.iter().find(|s| s.name == name).ok_or_else(|| anyhow!("unknown metric {name}"))?;
                from_rows(&s.p)?
            }
            MetricKind::Blocks => {
                let specs = self.blocks.as_ref().ok_or_else(|| anyhow!("metric: 'blocks' is required"))?;
                if specs.len() != blocks.len() {
                    bail!("metric: {} blocks given, the split has {} (m_u then one per weight)", specs.len(), blocks.len());
                }
                let mut mats = Vec::new();
                for (k, (spec, &d)) in specs.iter().zip(blocks).enumerate() {
                    let what = format!("metric block {k}");
                    let b = match spec.kind {
                        MetricKind::Background => Mat::identity(d, d),
                        MetricKind::Diag => diagonal(&spec.values, &what)?,
                        MetricKind::Dense => dense(&spec.rows, &what)?,
                        _ => bail!("{what}: only background, diag and dense blocks are allowed"),
                    };
                    if b.nrows() != d {
                        bail!("{what}: dimension {} does not match block dimension {d}", b.nrows());
                    }
                    mats.push(b);
                }
                block_diag(&mats)
            }
            MetricKind::Random => bail!("random metrics are drawn by the runner"),
        };
        if m.nrows() != dim_m {
            bail!("metric has dimension {}, but m has dimension {dim_m}", m.nrows());
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = parse("[space]\ncatalog = \"E2_su2_biinv\"\n").unwrap();
        assert_eq!(c.metric.kind, MetricKind::Background);
        assert!(c.flow.is_none());
        assert_eq!(c.checks.blowdown_s, vec![1.0, 2.0, 4.0, 8.0, 16.0]);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(parse("[space]\ncatalog = \"E2_su2_biinv\"\ncolour = 1\n").is_err());
        assert!(parse("[space]\ncatalog = \"E2_su2_biinv\"\n[flow]\ntmax = 1\n").is_err());
    }

    #[test]
    fn unknown_check_is_rejected() {
        let c = parse("[space]\ncatalog = \"E2_su2_biinv\"\n[checks]\nrun = [\"sorcery\"]\n").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("unknown check"));
    }

    #[test]
    fn diag_metric_dimension_is_checked() {
        let c = parse("[space]\ncatalog = \"E2_su2_biinv\"\n[metric]\nkind = \"diag\"\nvalues = [1.0, 2.0]\n").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn inline_space_builds_heisenberg() {
        let text = r#"
[space.inline]
u_dim = 1
dim_v = 2
theta = [[[0.0, 0.0], [1.0, 0.0]]]
"#;
        let s = parse(text).unwrap().space.resolve().unwrap();
        assert!(s.data.semidirect().unwrap().is_nilpotent());
    }

    #[test]
    fn sweep_expands_to_labelled_points() {
        let text = "[space]\ncatalog = \"E1_su2xR_R3\"\n[sweep]\nseeds = [1, 2]\nlambda = [0.5, 1.0]\n";
        let pts = parse(text).unwrap().expand();
        assert_eq!(pts.len(), 4);
        assert_eq!(pts[0].0.as_deref(), Some("lambda-0.5_seed-1"));
        assert_eq!(pts[3].1.metric.seed, Some(2));
    }
}
