//! TOML run configuration.

use std::path::PathBuf;

use mrtlb::bench::{gauss_hill_case, sine_source_case};
use mrtlb::params::{default_omega_tilde, Discretization, Method, PdeParams};
use mrtlb::solver::InitScheme;
use mrtlb::stability::{FixedRates, GridAxis};
use mrtlb::{Case, LatticeFamily};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::expr;

/// A number given as a TOML float, integer or arithmetic string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Float(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Float(v) => Ok(Num(v)),
            Raw::Int(v) => Ok(Num(v as f64)),
            Raw::Text(s) => expr::eval(&s).map(Num).map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v.clone()],
            Self::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub d: Option<usize>,
    pub lattice: Option<String>,
    pub method: Option<String>,
    pub kappa: Option<Vec<Num>>,
    pub eps_tilde: Option<Vec<Num>>,
    pub eta: Option<Num>,
    pub source_const: Option<Num>,
    pub omega_tilde: Option<Num>,
    pub s2_axis: Option<Num>,
    pub dx: Option<Num>,
    pub dt: Option<Num>,
    pub scaling_ratio: Option<Num>,
    pub t_final: Option<Num>,
    pub init: Option<OneOrMany<String>>,
    pub case: Option<CaseConfig>,
    #[serde(default)]
    pub stability: StabilityConfig,
    pub region: Option<RegionConfig>,
    pub converge: Option<ConvergeConfig>,
    pub overrides: Option<Overrides>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseConfig {
    pub name: String,
    pub gamma0: Option<Num>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    pub resolution: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub min: Num,
    pub max: Num,
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedRatesConfig {
    pub s_axis: Num,
    pub s2_axis: Num,
    pub s_cross: Num,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub kind: String,
    pub omega_tilde: Option<OneOrMany<Num>>,
    pub x: AxisConfig,
    pub y: AxisConfig,
    pub resolution: Option<usize>,
    pub fixed_rates: Option<FixedRatesConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub dx: Vec<Num>,
}

/// Weights and rates that replace the synthesized ones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_axis: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_tilde: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_axis: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2_diag: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s2_cross: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s3: Option<Vec<Num>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s4: Option<Vec<Num>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

pub type ConfigResult<T> = Result<T, String>;

fn nums(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

impl RunConfig {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn family(&self) -> ConfigResult<LatticeFamily> {
        self.lattice.as_deref().unwrap_or("full").parse().map_err(|e: mrtlb::Error| e.to_string())
    }

    pub fn method(&self) -> ConfigResult<Method> {
        self.method.as_deref().unwrap_or("general").parse().map_err(|e: mrtlb::Error| e.to_string())
    }

    /// Dimension from `d`, `kappa` or `eps_tilde`, which must agree.
    pub fn dimension(&self) -> ConfigResult<usize> {
        let from_lists = self.kappa.as_ref().or(self.eps_tilde.as_ref()).map(Vec::len);
        match (self.d, from_lists) {
            (Some(d), Some(n)) if d != n => Err(format!("d = {d} but {n} diffusion values given")),
            (Some(d), _) | (None, Some(d)) => Ok(d),
            (None, None) => Err("missing `d` (or `kappa` / `eps_tilde`)".into()),
        }
    }

    /// `ξ = Δt/Δx²` from `scaling_ratio`, or from `dt` and `dx`.
    pub fn scaling_ratio(&self) -> ConfigResult<f64> {
        match (self.dt, self.scaling_ratio) {
            (Some(_), Some(_)) => Err("give exactly one of `dt` and `scaling_ratio`, not both".into()),
            (None, None) => Err("missing `dt` or `scaling_ratio`".into()),
            (None, Some(xi)) => Ok(xi.0),
            (Some(dt), None) => {
                let dx = self.dx.ok_or("`dt` needs `dx`; give `scaling_ratio` instead to vary dx")?;
                Ok(dt.0 / (dx.0 * dx.0))
            }
        }
    }

    pub fn discretization(&self) -> ConfigResult<Discretization<f64>> {
        let xi = self.scaling_ratio()?;
        let dx = self.dx.ok_or("missing `dx`")?;
        Discretization::from_ratio(dx.0, xi).map_err(|e| e.to_string())
    }

    /// Diffusion coefficients from `kappa`, or `eps_tilde / ξ`.
    pub fn kappa(&self) -> ConfigResult<Vec<f64>> {
        match (&self.kappa, &self.eps_tilde) {
            (Some(_), Some(_)) => Err("give exactly one of `kappa` and `eps_tilde`, not both".into()),
            (None, None) => Err("missing `kappa` or `eps_tilde`".into()),
            (Some(k), None) => Ok(nums(k)),
            (None, Some(e)) => {
                let xi = self.scaling_ratio()?;
                Ok(e.iter().map(|v| v.0 / xi).collect())
            }
        }
    }

    pub fn omega_tilde(&self) -> f64 {
        self.omega_tilde.map_or_else(|| default_omega_tilde(self.dimension().unwrap_or(2)), |n| n.0)
    }

    pub fn s2_axis(&self) -> f64 {
        self.s2_axis.map_or(1.0, |n| n.0)
    }

    pub fn t_final(&self) -> ConfigResult<f64> {
        self.t_final.map(|n| n.0).ok_or_else(|| "missing `t_final`".into())
    }

    /// The benchmark case, when one is configured.
    pub fn case(&self) -> ConfigResult<Option<Case>> {
        let Some(c) = &self.case else { return Ok(None) };
        let kappa = self.kappa()?;
        let d = self.dimension()?;
        let case = match c.name.as_str() {
            "gauss_hill" => gauss_hill_case(d, kappa, c.gamma0.map_or(0.05, |g| g.0)),
            "sine_source" => {
                if c.gamma0.is_some() {
                    return Err("`gamma0` only applies to gauss_hill".into());
                }
                if d != 2 {
                    return Err(format!("sine_source is two-dimensional, got d = {d}"));
                }
                sine_source_case(kappa[0], kappa[1])
            }
            other => return Err(format!("unknown case `{other}` (expected gauss_hill or sine_source)")),
        }
        .map_err(|e| e.to_string())?;
        for (name, given, fixed) in
            [("eta", self.eta, case.pde.eta), ("source_const", self.source_const, case.pde.source_const)]
        {
            if let Some(v) = given {
                if v.0 != fixed {
                    return Err(format!("{} fixes {name} = {fixed}, config says {}", case.name, v.0));
                }
            }
        }
        Ok(Some(case))
    }

    /// The PDE: the case's when one is configured, otherwise from the top-level keys.
    pub fn pde(&self) -> ConfigResult<PdeParams<f64>> {
        self.dimension()?;
        if let Some(case) = self.case()? {
            return Ok(case.pde);
        }
        let eta = self.eta.map_or(0.0, |n| n.0);
        let source = self.source_const.map_or(0.0, |n| n.0);
        PdeParams::new(self.kappa()?, eta, source).map_err(|e| e.to_string())
    }

    pub fn init_schemes(&self) -> ConfigResult<Vec<InitScheme>> {
        let names = self.init.as_ref().map_or_else(|| vec!["fourth_order".to_string()], OneOrMany::to_vec);
        if names.is_empty() {
            return Err("`init` list is empty".into());
        }
        names.iter().map(|s| s.parse().map_err(|e: mrtlb::Error| e.to_string())).collect()
    }
}

impl AxisConfig {
    pub fn grid(&self) -> ConfigResult<GridAxis<f64>> {
        GridAxis::new(self.min.0, self.max.0, self.n).map_err(|e| e.to_string())
    }
}

impl RegionConfig {
    pub fn fixed_rates(&self) -> FixedRates<f64> {
        self.fixed_rates.as_ref().map_or(FixedRates::DEFAULT, |f| FixedRates {
            s_axis: f.s_axis.0,
            s2_axis: f.s2_axis.0,
            s_cross: f.s_cross.0,
        })
    }
}

impl Overrides {
    /// The weights and rates of `model` in override form.
    pub fn from_model(model: &mrtlb::Model) -> Self {
        let wrap = |v: &[f64]| Some(v.iter().copied().map(Num).collect::<Vec<_>>());
        let full = model.family() == LatticeFamily::Full;
        let r = &model.rates;
        Self {
            omega_axis: wrap(&model.weights.omega_axis),
            omega_tilde: full.then_some(Num(model.weights.omega_diag)),
            s_axis: wrap(&r.s_axis),
            s2_diag: wrap(&r.s2_diag_sq),
            s2_cross: if full { wrap(&r.s2_cross) } else { None },
            s3: if full { wrap(&r.s3) } else { None },
            s4: if full { wrap(&r.s4) } else { None },
        }
    }

    pub fn apply(&self, model: &mut mrtlb::Model) -> ConfigResult<()> {
        let d = model.d();
        let np = d * (d - 1) / 2;
        let full = model.family() == LatticeFamily::Full;
        let take = |name: &str, given: &Option<Vec<Num>>, len: usize, target: &mut Vec<f64>| match given {
            None => Ok(()),
            Some(_) if !full && len == 0 => Err(format!("`{name}` does not exist on the axis lattice")),
            Some(v) if v.len() != len => Err(format!("`{name}` needs {len} values, got {}", v.len())),
            Some(v) => {
                *target = nums(v);
                Ok(())
            }
        };
        let mut axis = model.weights.omega_axis.clone();
        take("omega_axis", &self.omega_axis, d, &mut axis)?;
        let diag = match self.omega_tilde {
            Some(_) if !full => return Err("`omega_tilde` does not exist on the axis lattice".into()),
            Some(w) => w.0,
            None => model.weights.omega_diag,
        };
        model.weights = mrtlb::Weights::new(model.family(), axis, diag);
        let r = &mut model.rates;
        take("s_axis", &self.s_axis, d, &mut r.s_axis)?;
        take("s2_diag", &self.s2_diag, d, &mut r.s2_diag_sq)?;
        let (np, n3) = if full { (np, 2 * np) } else { (0, 0) };
        take("s2_cross", &self.s2_cross, np, &mut r.s2_cross)?;
        take("s3", &self.s3, n3, &mut r.s3)?;
        take("s4", &self.s4, np, &mut r.s4)?;
        Ok(())
    }
}
