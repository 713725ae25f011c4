//! JSON run configuration and its translation into library objects.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use delayhopf::exprlang::{parse, Expr};
use delayhopf::operators::{assemble, Coefficient, CoefficientFields, DiscreteOperator};
use delayhopf::{build_interval_grid, build_masked_grid_2d, GrowthModel, TimeScheme};
use serde::Deserialize;

use crate::error::CliError;

/// A number, or an expression without `x` and `y` such as `"2*pi"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Constant {
    Num(f64),
    Expr(String),
}

impl Constant {
    pub fn value(&self, field: &str) -> Result<f64, CliError> {
        let v = match self {
            Constant::Num(v) => *v,
            Constant::Expr(s) => {
                let e = expression(field, s)?;
                if !e.is_constant() {
                    return Err(CliError::Config(format!("{field}: `{s}` must not depend on x or y")));
                }
                e.eval(0.0, 0.0)
            }
        };
        if !v.is_finite() {
            return Err(CliError::Config(format!("{field}: value {v} is not finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval {
        a: Constant,
        b: Constant,
    },
    Rect {
        x0: Constant,
        x1: Constant,
        y0: Constant,
        y1: Constant,
    },
    Disk {
        cx: Constant,
        cy: Constant,
        r: Constant,
    },
    /// Nodes of the box where `inside` evaluates negative.
    Implicit {
        bbox: [Constant; 4],
        inside: String,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: Option<usize>,
    pub nx: Option<usize>,
    pub ny: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    pub d: Option<String>,
    pub b: Option<Vec<String>>,
    /// Only meaningful for `logistic_heterogeneous`; every other growth law
    /// fixes `m = f(x, 0)`.
    pub m: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    #[default]
    Hutchinson,
    FoodLimited {
        c: f64,
    },
    WeakAllee,
    LogisticHeterogeneous {
        m: Option<String>,
        a: String,
    },
    CustomPolynomial {
        coeffs: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub lambda: Option<f64>,
    pub lambda_list: Option<Vec<f64>>,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_n_max() -> usize {
    3
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { lambda: None, lambda_list: None, n_max: default_n_max() }
    }
}

impl AnalysisConfig {
    /// `lambda_list`, else the single `lambda`.
    pub fn lambdas(&self) -> Result<Vec<f64>, CliError> {
        let list = match (&self.lambda_list, self.lambda) {
            (Some(l), _) if !l.is_empty() => l.clone(),
            (_, Some(l)) => vec![l],
            _ => return Err(CliError::Config("analysis: give `lambda` or a non-empty `lambda_list`".into())),
        };
        if list.iter().any(|l| !l.is_finite()) {
            return Err(CliError::Config("analysis: lambda values must be finite".into()));
        }
        Ok(list)
    }
}

/// What the initial history and the observed deviation are measured from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    #[default]
    Zero,
    /// The steady state `u_λ` on the branch from `λ*`.
    Steady,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    /// Defaults to `analysis.lambda`.
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub tau_list: Option<Vec<f64>>,
    /// Defaults to `τ/200`.
    pub dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    /// History on `[−τ, 0]`, added to `history_base`.
    #[serde(default = "default_eta")]
    pub eta: String,
    #[serde(default)]
    pub history_base: Baseline,
    /// Subtracted from each probe before diagnosis.
    #[serde(default)]
    pub reference: Baseline,
    /// Defaults to the centre of the domain's bounding box.
    #[serde(default)]
    pub probes: Vec<Vec<Constant>>,
    /// Probe whose series decides the verdict in a scan.
    #[serde(default)]
    pub observe: usize,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub scheme: TimeScheme,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default = "default_transient")]
    pub transient_fraction: f64,
}

fn default_t_end() -> f64 {
    400.0
}
fn default_eta() -> String {
    "0.001".into()
}
fn default_stride() -> usize {
    1
}
fn default_transient() -> f64 {
    0.5
}

impl Default for SimulationConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all simulation fields have defaults")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "run".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { directory: None, prefix: default_prefix() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub fn expression(field: &str, src: &str) -> Result<Expr, CliError> {
    parse(src).map_err(|source| CliError::Parse { field: field.to_string(), source })
}

fn coefficient(field: &str, src: &str) -> Result<Coefficient<f64>, CliError> {
    Ok(Arc::new(expression(field, src)?))
}

/// Grid, operator and growth law built from a validated configuration.
pub struct Problem {
    pub grid: delayhopf::Grid,
    pub op: DiscreteOperator<f64>,
    pub model: GrowthModel<f64>,
    /// `m = f(x, 0)` sampled on the grid.
    pub m: Vec<f64>,
    pub centre: [f64; 2],
}

impl Problem {
    pub fn build(cfg: &RunConfig) -> Result<Self, CliError> {
        let (grid, centre) = build_grid(&cfg.domain, &cfg.grid)?;
        let dim = grid.dim();
        let model = build_model(&cfg.model, &cfg.coefficients)?;
        let d = coefficient("coefficients.d", cfg.coefficients.d.as_deref().unwrap_or("1"))?;
        let b = match &cfg.coefficients.b {
            None => (0..dim).map(|_| coefficient("coefficients.b", "0")).collect::<Result<Vec<_>, _>>()?,
            Some(list) if list.len() == dim => list
                .iter()
                .enumerate()
                .map(|(i, s)| coefficient(&format!("coefficients.b[{i}]"), s))
                .collect::<Result<Vec<_>, _>>()?,
            Some(list) => {
                return Err(CliError::Config(format!(
                    "coefficients.b has {} components but the domain is {dim}-dimensional",
                    list.len()
                )))
            }
        };
        let m_fn = model.zero_density_rate();
        let fields = CoefficientFields::new(d, b, m_fn.clone());
        let op = assemble(&grid, &fields).map_err(CliError::from_setup)?;
        let m = grid.sample(m_fn.as_ref());
        if m.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config("m = f(x, 0) is not finite on the grid".into()));
        }
        Ok(Problem { grid, op, model, m, centre })
    }

    pub fn probes(&self, sim: &SimulationConfig) -> Result<Vec<[f64; 2]>, CliError> {
        if sim.probes.is_empty() {
            return Ok(vec![self.centre]);
        }
        sim.probes
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let field = format!("simulation.probes[{i}]");
                match p.as_slice() {
                    [x] if self.grid.dim() == 1 => Ok([x.value(&field)?, 0.0]),
                    [x, y] => Ok([x.value(&field)?, y.value(&field)?]),
                    _ => Err(CliError::Config(format!("{field} needs one coordinate per dimension"))),
                }
            })
            .collect()
    }
}

fn build_grid(domain: &DomainConfig, grid: &GridConfig) -> Result<(delayhopf::Grid, [f64; 2]), CliError> {
    let planar = |default: usize| -> Result<(usize, usize), CliError> {
        let nx = grid.nx.or(grid.n).unwrap_or(default);
        let ny = grid.ny.or(grid.n).unwrap_or(nx);
        Ok((nx, ny))
    };
    let built = match domain {
        DomainConfig::Interval { a, b } => {
            if grid.nx.is_some() || grid.ny.is_some() {
                return Err(CliError::Config("grid: an interval takes `n`, not `nx`/`ny`".into()));
            }
            let (a, b) = (a.value("domain.a")?, b.value("domain.b")?);
            let g = build_interval_grid(a, b, grid.n.unwrap_or(199)).map_err(CliError::from_setup)?;
            (g, [0.5 * (a + b), 0.0])
        }
        DomainConfig::Rect { x0, x1, y0, y1 } => {
            let bbox = [x0.value("domain.x0")?, x1.value("domain.x1")?, y0.value("domain.y0")?, y1.value("domain.y1")?];
            let (nx, ny) = planar(64)?;
            let g = build_masked_grid_2d(bbox, nx, ny, |_, _| true).map_err(CliError::from_setup)?;
            (g, [0.5 * (bbox[0] + bbox[1]), 0.5 * (bbox[2] + bbox[3])])
        }
        DomainConfig::Disk { cx, cy, r } => {
            let (cx, cy, r) = (cx.value("domain.cx")?, cy.value("domain.cy")?, r.value("domain.r")?);
            if !(r > 0.0) {
                return Err(CliError::Config(format!("domain.r = {r} must be positive")));
            }
            let (nx, ny) = planar(64)?;
            let g = build_masked_grid_2d([cx - r, cx + r, cy - r, cy + r], nx, ny, |x, y| {
                (x - cx).powi(2) + (y - cy).powi(2) < r * r
            })
            .map_err(CliError::from_setup)?;
            (g, [cx, cy])
        }
        DomainConfig::Implicit { bbox, inside } => {
            let names = ["domain.bbox[0]", "domain.bbox[1]", "domain.bbox[2]", "domain.bbox[3]"];
            let mut b = [0.0; 4];
            for i in 0..4 {
                b[i] = bbox[i].value(names[i])?;
            }
            let level = expression("domain.inside", inside)?;
            let (nx, ny) = planar(64)?;
            let g = build_masked_grid_2d(b, nx, ny, |x, y| level.eval(x, y) < 0.0).map_err(CliError::from_setup)?;
            (g, [0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3])])
        }
    };
    Ok(built)
}

fn build_model(model: &ModelConfig, coeffs: &CoefficientConfig) -> Result<GrowthModel<f64>, CliError> {
    if coeffs.m.is_some() && !matches!(model, ModelConfig::LogisticHeterogeneous { .. }) {
        return Err(CliError::Config(
            "coefficients.m is fixed by the growth law as f(x, 0); use model logistic_heterogeneous for a custom m"
                .into(),
        ));
    }
    Ok(match model {
        ModelConfig::Hutchinson => GrowthModel::Hutchinson,
        ModelConfig::FoodLimited { c } => {
            if !(c.is_finite() && *c > -1.0) {
                return Err(CliError::Config(format!("model.params.c = {c} must exceed -1")));
            }
            GrowthModel::FoodLimited { c: *c }
        }
        ModelConfig::WeakAllee => GrowthModel::WeakAllee,
        ModelConfig::LogisticHeterogeneous { m, a } => {
            let m = m.as_deref().or(coeffs.m.as_deref()).unwrap_or("1");
            GrowthModel::LogisticHeterogeneous {
                m: coefficient("model.params.m", m)?,
                a: coefficient("model.params.a", a)?,
            }
        }
        ModelConfig::CustomPolynomial { coeffs } => {
            if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                return Err(CliError::Config("model.params.coeffs must be a non-empty list of finite numbers".into()));
            }
            GrowthModel::CustomPolynomial { coeffs: coeffs.clone() }
        }
    })
}
