//! Analytic benchmark cases, error norms and convergence studies.
//!
//! Grids are lattice nodes `x_j = −1 + jΔx`, `j = 0..2/Δx`, on the periodic
//! box `[−1, 1)^d`.

use std::f64::consts::PI;
use std::io::{self, Write};
use std::sync::Arc;

use crate::params::{Discretization, ModelParams, PdeParams};
use crate::solver::{cell_coords, run, InitScheme, InitialCondition};
use crate::{Error, Result, Scalar};

type ScalarFn<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;
type VectorFn<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// A problem with a known solution on `[−1, 1]^d`.
#[derive(Clone)]
pub struct BenchmarkCase<T> {
    pub name: String,
    pub d: usize,
    pub pde: PdeParams<T>,
    analytic: ScalarFn<T>,
    grad_phi0: VectorFn<T>,
}

impl<T: Scalar> std::fmt::Debug for BenchmarkCase<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkCase").field("name", &self.name).field("d", &self.d).field("pde", &self.pde).finish()
    }
}

impl<T: Scalar> BenchmarkCase<T> {
    /// A custom case from an exact solution and the gradient of its initial field.
    pub fn new(
        name: impl Into<String>,
        pde: PdeParams<T>,
        analytic: impl Fn(&[T], T) -> T + Send + Sync + 'static,
        grad_phi0: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), d: pde.d(), pde, analytic: Arc::new(analytic), grad_phi0: Arc::new(grad_phi0) }
    }

    pub fn analytic(&self, x: &[T], t: T) -> T {
        (self.analytic)(x, t)
    }

    pub fn phi0(&self, x: &[T]) -> T {
        (self.analytic)(x, T::zero())
    }

    pub fn grad_phi0(&self, x: &[T]) -> Vec<T> {
        (self.grad_phi0)(x)
    }

    /// `∂tφ − Σ κ_i ∂²_iφ − ηφ − S` of the analytic solution by
    /// fourth-order central differences with step `h`.
    pub fn pde_residual(&self, x: &[T], t: T, h: T) -> T {
        let eight = T::lit(8.0);
        let sixteen = T::lit(16.0);
        let thirty = T::lit(30.0);
        let twelve = T::lit(12.0);
        let two = T::lit(2.0);
        let f = |y: &[T], s: T| self.analytic(y, s);
        let dt = (f(x, t - two * h) - eight * f(x, t - h) + eight * f(x, t + h) - f(x, t + two * h)) / (twelve * h);
        let centre = f(x, t);
        let mut lap = T::zero();
        let mut y = x.to_vec();
        for i in 0..self.d {
            let mut at = |off: T| {
                y[i] = x[i] + off * h;
                let v = f(&y, t);
                y[i] = x[i];
                v
            };
            let d2 = (-at(-two) + sixteen * at(-T::one()) - thirty * centre + sixteen * at(T::one()) - at(two))
                / (twelve * h * h);
            lap += self.pde.kappa[i] * d2;
        }
        dt - lap - self.pde.eta * centre - self.pde.source_const
    }

    /// Node coordinates `x_j = −1 + jΔx` for a grid of spacing `dx`.
    pub fn grid_shape(&self, dx: T) -> Result<Vec<usize>> {
        Ok(vec![nodes_per_axis(dx)?; self.d])
    }

    fn node(dx: T, coords: &[usize]) -> Vec<T> {
        coords.iter().map(|&j| -T::one() + T::from_usize_lossy(j) * dx).collect()
    }

    /// Initial field and analytic gradient sampled on the grid.
    pub fn initial_condition(&self, dx: T) -> Result<InitialCondition<T>> {
        let shape = self.grid_shape(dx)?;
        let mut phi0 = Vec::new();
        let mut grad = Vec::new();
        for c in cell_coords(&shape) {
            let x = Self::node(dx, &c);
            phi0.push(self.phi0(&x));
            grad.extend(self.grad_phi0(&x));
        }
        Ok(InitialCondition { shape, phi0, grad: Some(grad) })
    }

    /// Analytic solution sampled on the grid.
    pub fn sample(&self, dx: T, t: T) -> Result<Vec<T>> {
        let shape = self.grid_shape(dx)?;
        Ok(cell_coords(&shape).map(|c| self.analytic(&Self::node(dx, &c), t)).collect())
    }
}

/// `2/dx` nodes, requiring `dx` to divide the box.
pub fn nodes_per_axis<T: Scalar>(dx: T) -> Result<usize> {
    let n = (T::lit(2.0) / dx).round();
    if !(dx > T::zero()) || (n * dx - T::lit(2.0)).abs() > T::lit(1e-9) || n < T::one() {
        return Err(Error::Config(format!("dx = {dx} does not divide the domain [-1, 1]")));
    }
    n.to_usize().ok_or_else(|| Error::Config(format!("dx = {dx} gives too many nodes")))
}

/// Gaussian hill with total mass `φ₀ = 2πΓ₀` spreading under diagonal
/// diffusion: covariance `Γ(t) = Γ₀² I + 2 diag(κ) t`. The solution is
/// periodized over the neighbouring boxes (shifts of 0 and ±2 per axis).
pub fn gauss_hill_case<T: Scalar>(d: usize, kappa: Vec<T>, gamma0: T) -> Result<BenchmarkCase<T>> {
    if kappa.len() != d {
        return Err(Error::Config(format!("{} diffusion coefficients for d = {d}", kappa.len())));
    }
    if !(gamma0 > T::zero()) {
        return Err(Error::Config(format!("gamma0 must be positive, got {gamma0}")));
    }
    let pde = PdeParams::new(kappa.clone(), T::zero(), T::zero())?;
    let two = T::lit(2.0);
    let two_pi = T::lit(2.0 * PI);
    let phi_total = two_pi * gamma0;
    let g0 = gamma0 * gamma0;
    let k = kappa.clone();
    let shifts: Arc<Vec<Vec<T>>> = Arc::new(
        (0..3usize.pow(d as u32))
            .map(|code| (0..d).map(|i| T::lit([0.0, -2.0, 2.0][code / 3usize.pow(i as u32) % 3])).collect())
            .collect(),
    );
    // (value, gradient) of the periodized hill; the gradient only at t = 0
    let eval = move |x: &[T], t: T, want_grad: bool| {
        let mut det = T::one();
        let var: Vec<T> = k
            .iter()
            .map(|&ki| {
                let v = g0 + two * ki * t;
                det *= v;
                v
            })
            .collect();
        let scale = phi_total / (two_pi * det.sqrt());
        let mut value = T::zero();
        let mut grad = vec![T::zero(); if want_grad { x.len() } else { 0 }];
        for shift in shifts.iter() {
            let mut quad = T::zero();
            for ((xi, si), vi) in x.iter().zip(shift).zip(&var) {
                let y = *xi + *si;
                quad += y * y / *vi;
            }
            let p = scale * (-quad / two).exp();
            value += p;
            for ((g, (xi, si)), vi) in grad.iter_mut().zip(x.iter().zip(shift)).zip(&var) {
                *g -= p * (*xi + *si) / *vi;
            }
        }
        (value, grad)
    };
    let e2 = eval.clone();
    let analytic = move |x: &[T], t: T| eval(x, t, false).0;
    let grad = move |x: &[T]| e2(x, T::zero(), true).1;
    Ok(BenchmarkCase { name: "gauss_hill".into(), d, pde, analytic: Arc::new(analytic), grad_phi0: Arc::new(grad) })
}

/// `φ = sin(πx) sin(πy) exp(−π²(κ_x + κ_y + 1) t) + π²` with `η = −π²`,
/// `S = π⁴`.
pub fn sine_source_case<T: Scalar>(kappa_x: T, kappa_y: T) -> Result<BenchmarkCase<T>> {
    let pi = T::PI();
    let pi2 = pi * pi;
    let pde = PdeParams::new(vec![kappa_x, kappa_y], -pi2, pi2 * pi2)?;
    let decay = pi2 * (kappa_x + kappa_y + T::one());
    let analytic = move |x: &[T], t: T| (pi * x[0]).sin() * (pi * x[1]).sin() * (-decay * t).exp() + pi2;
    let grad = move |x: &[T]| {
        let (sx, cx) = (pi * x[0]).sin_cos();
        let (sy, cy) = (pi * x[1]).sin_cos();
        vec![pi * cx * sy, pi * sx * cy]
    };
    Ok(BenchmarkCase { name: "sine_source".into(), d: 2, pde, analytic: Arc::new(analytic), grad_phi0: Arc::new(grad) })
}

/// Relative l² error `sqrt(Σ(φ − φ*)² / Σ φ*²)`.
pub fn l2_error<T: Scalar>(numeric: &[T], analytic: &[T]) -> Result<T> {
    if numeric.len() != analytic.len() {
        return Err(Error::Config(format!("field sizes differ: {} vs {}", numeric.len(), analytic.len())));
    }
    let mut num = T::zero();
    let mut den = T::zero();
    for (&a, &b) in numeric.iter().zip(analytic) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == T::zero() {
        return Err(Error::DegenerateNorm);
    }
    Ok((num / den).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow<T> {
    pub dx: T,
    pub dt: T,
    /// `None` when the run diverged.
    pub l2_error: Option<T>,
    /// Observed order against the previous row.
    pub rate: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable<T> {
    pub rows: Vec<ConvergenceRow<T>>,
}

impl<T: Scalar> ConvergenceTable<T> {
    pub fn rates(&self) -> Vec<Option<T>> {
        self.rows.iter().skip(1).map(|r| r.rate).collect()
    }

    /// Writes the rows, optionally prefixed with a label column.
    pub fn write_rows<W: Write>(&self, mut w: W, label: Option<&str>) -> io::Result<()> {
        for (i, r) in self.rows.iter().enumerate() {
            let l2 = r.l2_error.map_or("n/a".to_string(), |v| format!("{v:.16e}"));
            let rate = match r.rate {
                Some(v) => format!("{v:.16e}"),
                None if i == 0 => String::new(),
                None => "n/a".into(),
            };
            if let Some(label) = label {
                write!(w, "{label},")?;
            }
            writeln!(w, "{:.16e},{:.16e},{l2},{rate}", r.dx, r.dt)?;
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "dx,dt,l2_error,rate")?;
        self.write_rows(w, None)
    }
}

/// Runs the case on each `dx` with `dt = ξ dx²` and tabulates l² errors
/// and observed orders. The model is rebuilt per grid since the corrected
/// rates depend on `dt` when η ≠ 0.
pub fn convergence_study<T: Scalar>(
    case: &BenchmarkCase<T>,
    model_factory: impl Fn(&PdeParams<T>, &Discretization<T>) -> Result<ModelParams<T>>,
    dx_list: &[T],
    scaling_ratio: T,
    t_final: T,
    init: InitScheme,
) -> Result<ConvergenceTable<T>> {
    if dx_list.is_empty() {
        return Err(Error::Config("empty dx list".into()));
    }
    if dx_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("dx list must be strictly decreasing".into()));
    }
    let mut rows: Vec<ConvergenceRow<T>> = Vec::with_capacity(dx_list.len());
    for &dx in dx_list {
        let disc = Discretization::from_ratio(dx, scaling_ratio)?;
        let ratio = t_final / disc.dt;
        if (ratio - ratio.round()).abs() > T::lit(1e-9) * ratio.max(T::one()) {
            return Err(Error::Config(format!("t_final = {t_final} is not a multiple of dt = {}", disc.dt)));
        }
        let model = model_factory(&case.pde, &disc)?;
        let init_cond = case.initial_condition(dx)?;
        let l2 = match run(&model, &init_cond, init, t_final) {
            Ok(out) => Some(l2_error(&out.phi, &case.sample(dx, out.time)?)?),
            Err(Error::DivergenceDetected { step, cell }) => {
                log::warn!("run with dx = {dx} diverged at step {step} (cell {cell})");
                None
            }
            Err(e) => return Err(e),
        };
        let rate = match (rows.last(), l2) {
            (Some(prev), Some(e)) => prev.l2_error.map(|pe| (pe / e).ln() / (prev.dx / dx).ln()),
            _ => None,
        };
        rows.push(ConvergenceRow { dx, dt: disc.dt, l2_error: l2, rate });
    }
    Ok(ConvergenceTable { rows })
}
