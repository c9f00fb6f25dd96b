//! Experiment configuration schema: JSON in, validated objects out.

use reithom::cellsolver::LatticeSpec;
use reithom::error::{Error, Result};
use reithom::integrand::{catalog, from_custom_spec, CatalogParams, CustomSpec, Integrand, Order};
use serde::{Deserialize, Serialize};

/// Either a catalog entry with parameters or a custom expression integrand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrandSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nf: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomIntegrand>,
}

/// Coefficient expressions over y1..yN, z1..zN composed with a named profile
/// in xi.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomIntegrand {
    pub coeff_y: String,
    pub coeff_z: String,
    /// `quadratic` | `power:p` | `nfunction:<name>`
    pub profile: String,
    #[serde(default = "default_space")]
    pub space: usize,
    #[serde(default = "default_order")]
    pub order: u8,
    pub c1: f64,
    pub c2: f64,
    #[serde(default)]
    pub delta: f64,
}

fn default_space() -> usize {
    1
}

fn default_order() -> u8 {
    1
}

impl IntegrandSpec {
    pub fn named(name: &str) -> Self {
        IntegrandSpec {
            name: Some(name.to_string()),
            p: None,
            q: None,
            nf: None,
            delta: None,
            order: None,
            custom: None,
        }
    }

    pub fn build(&self) -> Result<Integrand> {
        match (&self.name, &self.custom) {
            (Some(name), None) => {
                let params = CatalogParams {
                    p: self.p,
                    q: self.q,
                    nf: self.nf.clone(),
                    delta: self.delta,
                    order: self.order,
                };
                catalog(name, &params)
            }
            (None, Some(custom)) => {
                let spec = CustomSpec {
                    coeff_y: custom.coeff_y.clone(),
                    coeff_z: custom.coeff_z.clone(),
                    profile: custom.profile.clone(),
                    space: custom.space,
                    order: Order::from_s(custom.order as usize)?,
                    c1: custom.c1,
                    c2: custom.c2,
                    delta: custom.delta,
                };
                from_custom_spec(&spec)
            }
            _ => Err(Error::Config(
                "integrand spec needs exactly one of `name` or `custom`".into(),
            )),
        }
    }
}

/// A one-axis xi lattice description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl LatticeConfig {
    // the negated comparison rejects NaN bounds as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn to_spec(&self) -> Result<LatticeSpec> {
        if self.count == 0 || !(self.min <= self.max) {
            return Err(Error::Config(format!(
                "bad lattice [{}, {}] x {}",
                self.min, self.max, self.count
            )));
        }
        Ok(LatticeSpec::uniform_1d(self.min, self.max, self.count))
    }
}

/// Parse an epsilon list: either `2^-2..2^-6` (dyadic range) or a comma list
/// of values.
pub fn parse_eps_list(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let parse_pow = |s: &str| -> Result<i32> {
            s.trim()
                .strip_prefix("2^")
                .and_then(|e| e.parse::<i32>().ok())
                .ok_or_else(|| Error::Config(format!("bad dyadic epsilon {s:?}")))
        };
        let a = parse_pow(lo)?;
        let b = parse_pow(hi)?;
        if a < b {
            return Err(Error::Config(format!(
                "epsilon range {spec:?} must decrease (e.g. 2^-2..2^-6)"
            )));
        }
        return Ok((b..=a).rev().map(|k| 2f64.powi(k)).collect());
    }
    let vals: Result<Vec<f64>> = spec
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad epsilon value {s:?}")))
        })
        .collect();
    let vals = vals?;
    if vals.is_empty() || vals.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config(
            "epsilon list must be strictly decreasing".into(),
        ));
    }
    Ok(vals)
}

/// One experiment: the kind tag selects the pipeline, the rest parametrizes
/// it. All paths are deterministic given the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentConfig {
    NfunctionCheck {
        nfunction: String,
        #[serde(default = "default_tmin")]
        t_min: f64,
        #[serde(default = "default_tmax")]
        t_max: f64,
        #[serde(default = "default_samples")]
        samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
    CellInner {
        integrand: IntegrandSpec,
        xi: Vec<f64>,
        #[serde(default)]
        y: Vec<f64>,
        res: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
        /// When set, run sampled hypothesis validation with this budget first.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        validate_budget: Option<usize>,
    },
    CellOuter {
        integrand: IntegrandSpec,
        /// Path prefix of a stored inner table.
        table: String,
        xi: Vec<f64>,
        res: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
    HomTable {
        integrand: IntegrandSpec,
        lattice: LatticeConfig,
        y_samples: usize,
        res: usize,
        out: String,
    },
    Twoscale {
        seq: String,
        test: String,
        eps: String,
        #[serde(default = "default_rpp")]
        res_per_period: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
    Corrector {
        integrand: IntegrandSpec,
        xi0: f64,
        eps: String,
        #[serde(default = "default_rpp")]
        res_per_period: usize,
        #[serde(default = "default_cell_res")]
        cell_res: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
    GammaStudy {
        integrand: IntegrandSpec,
        xi0: f64,
        eps: String,
        #[serde(default = "default_rpp")]
        res_per_period: usize,
        #[serde(default = "default_cell_res")]
        cell_res: usize,
        /// Attach the exact 1-D quadratic-formula oracle column.
        #[serde(default)]
        exact_oracle: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        out: Option<String>,
    },
}

fn default_tmin() -> f64 {
    1e-2
}

fn default_tmax() -> f64 {
    1e4
}

fn default_samples() -> usize {
    64
}

fn default_rpp() -> usize {
    8
}

fn default_cell_res() -> usize {
    256
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("config schema: {e}")))
}
