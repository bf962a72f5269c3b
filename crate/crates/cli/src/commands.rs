//! Subcommand implementations and the exit-code contract.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use mrtlb::bench::{convergence_study, l2_error};
use mrtlb::params::{synthesize, ModelParams};
use mrtlb::solver::{run, write_field_csv};
use mrtlb::stability::{analyze, default_resolution, solvability_region, stability_region, Raster};
use mrtlb::{Error, Infeasibility, Model};
use serde::Serialize;

use crate::config::{Overrides, RunConfig};

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_UNSTABLE: u8 = 4;
pub const EXIT_DIVERGED: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_CONFIG,
            Error::Infeasible(_) | Error::InfeasibleCorrection { .. } | Error::DegenerateSource => EXIT_INFEASIBLE,
            Error::DivergenceDetected { .. } => EXIT_DIVERGED,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

pub type CmdResult = Result<(), Failure>;

/// Where CSV files go, created on first write.
pub struct OutDir(pub PathBuf);

impl OutDir {
    fn write(&self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<PathBuf, Failure> {
        let io_fail = |e: io::Error, p: &Path| Failure::new(EXIT_FAILURE, format!("cannot write {}: {e}", p.display()));
        fs::create_dir_all(&self.0).map_err(|e| io_fail(e, &self.0))?;
        let path = self.0.join(name);
        let file = File::create(&path).map_err(|e| io_fail(e, &path))?;
        let mut w = BufWriter::new(file);
        body(&mut w).and_then(|_| w.flush()).map_err(|e| io_fail(e, &path))?;
        println!("wrote {}", path.display());
        Ok(path)
    }
}

fn synthesize_from(cfg: &RunConfig) -> Result<mrtlb::Result<Model>, Failure> {
    let pde = cfg.pde().map_err(Failure::config)?;
    let disc = cfg.discretization().map_err(Failure::config)?;
    let (family, method) = (cfg.family().map_err(Failure::config)?, cfg.method().map_err(Failure::config)?);
    Ok(synthesize(family, method, &pde, &disc, cfg.omega_tilde(), cfg.s2_axis()))
}

fn apply_overrides(cfg: &RunConfig, model: &mut Model) -> CmdResult {
    match &cfg.overrides {
        Some(o) => o.apply(model).map_err(Failure::config),
        None => Ok(()),
    }
}

fn build_model(cfg: &RunConfig) -> Result<Model, Failure> {
    let mut model = synthesize_from(cfg)??;
    apply_overrides(cfg, &mut model)?;
    Ok(model)
}

#[derive(Serialize)]
struct ParamsDoc {
    overrides: Overrides,
}

pub fn cmd_params(cfg: &RunConfig, out: &OutDir) -> CmdResult {
    let model = build_model(cfg)?;
    if cfg.overrides.is_some() && !(model.weights.all_in_unit_interval(&model.lattice) && model.rates.is_admissible()) {
        return Err(Failure::new(EXIT_INFEASIBLE, "infeasible: overridden parameters outside (0,1) / (0,2)"));
    }
    log::info!("largest condition residual {:e}", model.residuals().max_abs());
    out.write("params.csv", |w| model.write_csv(w))?;
    let doc = toml::to_string(&ParamsDoc { overrides: Overrides::from_model(&model) })
        .map_err(|e| Failure::new(EXIT_FAILURE, e.to_string()))?;
    out.write("params.toml", |w| w.write_all(doc.as_bytes()))?;
    Ok(())
}

pub fn cmd_stability(cfg: &RunConfig, out: &OutDir) -> CmdResult {
    let mut model = match synthesize_from(cfg)? {
        Ok(m) => m,
        Err(e @ Error::Infeasible(Infeasibility::Weight { .. } | Infeasibility::Rate { .. })) => {
            return Err(Failure::new(EXIT_UNSTABLE, format!("unstable: rejected before the scan ({e})")));
        }
        Err(e) => return Err(e.into()),
    };
    apply_overrides(cfg, &mut model)?;
    let resolution = cfg.stability.resolution.unwrap_or_else(|| default_resolution(model.d()));
    let report = analyze(&model, resolution)?;
    out.write("stability.csv", |w| report.write_csv(w))?;
    if report.stable() {
        return Ok(());
    }
    let s = &report.structure;
    let mut why = Vec::new();
    if !model.rates.is_admissible() {
        why.push("rates outside (0,2)".to_string());
    } else if !s.rate_ranges_ok {
        why.push("third- or fourth-order rates not tied to the axis rates".to_string());
    }
    if !s.structure_ok {
        why.push(format!("JW asymmetry {:e}, largest JW eigenvalue {:e}", s.jw_asymmetry, s.jw_eigen_max));
    }
    if !report.scan.vn_ok {
        why.push(format!(
            "largest amplification modulus {:.16e}, simple unit roots {}",
            report.scan.vn_max_modulus, report.scan.vn_simple_roots
        ));
    }
    Err(Failure::new(EXIT_UNSTABLE, format!("unstable: {}", why.join("; "))))
}

pub fn cmd_region(cfg: &RunConfig, out: &OutDir) -> CmdResult {
    let region = cfg.region.as_ref().ok_or_else(|| Failure::config("region needs a [region] table"))?;
    let d = cfg.dimension().unwrap_or(2);
    let weights: Vec<f64> = match &region.omega_tilde {
        Some(list) => list.to_vec().into_iter().map(|n| n.0).collect(),
        None => vec![cfg.omega_tilde()],
    };
    if weights.is_empty() {
        return Err(Failure::config("region omega_tilde list is empty"));
    }
    let (x, y) = (region.x.grid().map_err(Failure::config)?, region.y.grid().map_err(Failure::config)?);
    let rasters: Vec<Raster<f64>> = match region.kind.as_str() {
        "stability" => {
            let resolution = region.resolution.unwrap_or_else(|| default_resolution(d));
            let rates = region.fixed_rates();
            weights.iter().map(|&w| stability_region(d, w, rates, x, y, resolution)).collect::<mrtlb::Result<_>>()?
        }
        "solvability" => {
            if region.resolution.is_some() || region.fixed_rates.is_some() {
                return Err(Failure::config("`resolution` and `fixed_rates` only apply to stability regions"));
            }
            let dt = match (cfg.dt, cfg.scaling_ratio) {
                (Some(dt), None) => dt.0,
                _ => cfg.discretization().map_err(Failure::config)?.dt,
            };
            let eta = cfg.eta.map_or(0.0, |n| n.0);
            weights
                .iter()
                .map(|&w| solvability_region(d, w, cfg.s2_axis(), eta, dt, x, y))
                .collect::<mrtlb::Result<_>>()?
        }
        other => {
            return Err(Failure::config(format!("unknown region kind `{other}` (expected stability or solvability)")))
        }
    };
    for (w, r) in weights.iter().zip(&rasters) {
        println!("omega_tilde {w:.16e}: {} of {} points", r.count(), r.points.len());
    }
    out.write("region.csv", |f| {
        writeln!(f, "omega_tilde,x,y,verdict")?;
        for (w, r) in weights.iter().zip(&rasters) {
            for (px, py, v) in &r.points {
                writeln!(f, "{w:.16e},{px:.16e},{py:.16e},{}", u8::from(*v))?;
            }
        }
        Ok(())
    })?;
    Ok(())
}

pub fn cmd_run(cfg: &RunConfig, out: &OutDir) -> CmdResult {
    let case = cfg.case().map_err(Failure::config)?.ok_or_else(|| Failure::config("run needs a [case] table"))?;
    let schemes = cfg.init_schemes().map_err(Failure::config)?;
    let &[scheme] = &schemes[..] else {
        return Err(Failure::config("run takes a single `init` scheme"));
    };
    let t_final = cfg.t_final().map_err(Failure::config)?;
    let model = build_model(cfg)?;
    let init = case.initial_condition(model.disc.dx)?;
    let result = run(&model, &init, scheme, t_final)?;
    let l2 = l2_error(&result.phi, &case.sample(model.disc.dx, result.time)?)?;
    out.write("field.csv", |w| write_field_csv(&result.shape, &result.phi, w))?;
    out.write("run.csv", |w| {
        writeln!(w, "name,value")?;
        writeln!(w, "steps,{}", result.step_count)?;
        writeln!(w, "time,{:.16e}", result.time)?;
        writeln!(w, "l2_error,{l2:.16e}")
    })?;
    println!("{} steps to t = {}, l2 error {l2:.4e}", result.step_count, result.time);
    Ok(())
}

pub fn cmd_converge(cfg: &RunConfig, out: &OutDir) -> CmdResult {
    let case = cfg.case().map_err(Failure::config)?.ok_or_else(|| Failure::config("converge needs a [case] table"))?;
    let conv = cfg.converge.as_ref().ok_or_else(|| Failure::config("converge needs a [converge] table"))?;
    let dx: Vec<f64> = conv.dx.iter().map(|n| n.0).collect();
    let xi = cfg.scaling_ratio().map_err(Failure::config)?;
    let t_final = cfg.t_final().map_err(Failure::config)?;
    let schemes = cfg.init_schemes().map_err(Failure::config)?;
    let (family, method) = (cfg.family().map_err(Failure::config)?, cfg.method().map_err(Failure::config)?);
    let factory = |pde: &mrtlb::Pde, disc: &mrtlb::Grid| -> mrtlb::Result<ModelParams<f64>> {
        let mut m = synthesize(family, method, pde, disc, cfg.omega_tilde(), cfg.s2_axis())?;
        if let Some(o) = &cfg.overrides {
            o.apply(&mut m).map_err(Error::Config)?;
        }
        Ok(m)
    };
    let tables = schemes
        .iter()
        .map(|&s| convergence_study(&case, factory, &dx, xi, t_final, s))
        .collect::<mrtlb::Result<Vec<_>>>()?;
    out.write("convergence.csv", |w| {
        if let [table] = &tables[..] {
            return table.write_csv(w);
        }
        writeln!(w, "init,dx,dt,l2_error,rate")?;
        for (s, t) in schemes.iter().zip(&tables) {
            t.write_rows(&mut *w, Some(&s.to_string()))?;
        }
        Ok(())
    })?;
    let mut diverged = Vec::new();
    for (s, t) in schemes.iter().zip(&tables) {
        let rates: Vec<String> = t.rates().iter().map(|r| r.map_or("n/a".into(), |v| format!("{v:.4}"))).collect();
        println!("{s}: rates [{}]", rates.join(", "));
        diverged.extend(t.rows.iter().filter(|r| r.l2_error.is_none()).map(|r| format!("{s} at dx = {}", r.dx)));
    }
    if diverged.is_empty() {
        Ok(())
    } else {
        Err(Failure::new(EXIT_DIVERGED, format!("divergence detected: {}", diverged.join(", "))))
    }
}
