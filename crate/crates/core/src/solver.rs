//! Periodic MRT-LB stencil sweep.
//!
//! Populations are stored cell-major (`f[cell * q + k]`), cells in row-major
//! order over the axes (last axis fastest). A step collides every cell in
//! place and then pull-streams into the second buffer:
//! `f_k(x, t + Δt) = f*_k(x − e_k Δx, t)`.

use std::io::{self, Write};

use rayon::prelude::*;

use crate::linalg::DenseMatrix;
use crate::params::ModelParams;
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone)]
pub struct FieldState<T> {
    pub shape: Vec<usize>,
    pub q: usize,
    /// Populations; see [`FieldState::forget_initial_field`] before editing
    /// a freshly initialised state.
    pub f: Vec<T>,
    f_next: Vec<T>,
    /// Initial field used by the first collision in place of the value
    /// recovered from the populations.
    initial_phi: Option<Vec<T>>,
    pub time_index: usize,
}

impl<T: Scalar> FieldState<T> {
    pub fn zeros(shape: Vec<usize>, q: usize) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Config(format!("invalid grid shape {shape:?}")));
        }
        let cells: usize = shape.iter().product();
        Ok(Self {
            shape,
            q,
            f: vec![T::zero(); cells * q],
            f_next: vec![T::zero(); cells * q],
            initial_phi: None,
            time_index: 0,
        })
    }

    pub fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn cell(&self, c: usize) -> &[T] {
        &self.f[c * self.q..(c + 1) * self.q]
    }

    /// Macroscopic field per cell.
    pub fn phi(&self, model: &ModelParams<T>) -> Result<Vec<T>> {
        if let Some(p) = &self.initial_phi {
            return Ok(p.clone());
        }
        self.f.chunks(self.q).map(|c| macro_field(c, model.pde.eta, model.pde.source_const, model.disc.dt)).collect()
    }

    /// Drops the initial field kept by the `init_*` constructors, so the next
    /// collision recovers φ from the populations. Needed after editing `f`
    /// by hand.
    pub fn forget_initial_field(&mut self) {
        self.initial_phi = None;
    }

    /// Total of all populations.
    pub fn total(&self) -> T {
        self.f.iter().copied().sum()
    }
}

/// Equilibrium and source profiles in moment space (`M w`).
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVectors<T> {
    pub m_eq_profile: Vec<T>,
    pub m_r_profile: Vec<T>,
}

impl<T: Scalar> MomentVectors<T> {
    pub fn new(model: &ModelParams<T>) -> Self {
        let p = model.lattice.m().matvec(&model.expanded_weights());
        Self { m_eq_profile: p.clone(), m_r_profile: p }
    }
}

/// `φ = (2 Σ f + Δt S) / (2 − Δt η)`.
pub fn macro_field<T: Scalar>(cell_f: &[T], eta: T, source_const: T, dt: T) -> Result<T> {
    let two = T::lit(2.0);
    let den = two - dt * eta;
    if den == T::zero() {
        return Err(Error::DegenerateSource);
    }
    let sum: T = cell_f.iter().copied().sum();
    Ok((two * sum + dt * source_const) / den)
}

/// Where the collision is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollisionMode {
    /// Relax moments with the diagonal `S` (default).
    #[default]
    Moment,
    /// Multiply by the dense `Λ = M⁻¹ S M` in population space.
    Population,
}

/// Precomputed per-model data for stepping.
#[derive(Debug, Clone)]
pub struct Stepper<T> {
    q: usize,
    d: usize,
    mode: CollisionMode,
    m: DenseMatrix<T>,
    m_inv: DenseMatrix<T>,
    lambda: DenseMatrix<T>,
    /// `1 − s_r`.
    keep: Vec<T>,
    /// `s_r m_eq_r`.
    relax_to: Vec<T>,
    /// `Δt (1 − s_r/2) m_R_r`.
    source: Vec<T>,
    /// Population-space source vector `Δt (I − Λ/2) w`.
    source_pop: Vec<T>,
    weights: Vec<T>,
    velocities: Vec<Vec<i32>>,
    eta: T,
    source_const: T,
    dt: T,
}

impl<T: Scalar> Stepper<T> {
    pub fn new(model: &ModelParams<T>, mode: CollisionMode) -> Result<Self> {
        if model.pde.eta * model.disc.dt == T::lit(2.0) {
            return Err(Error::DegenerateSource);
        }
        let s = model.s_diag();
        let mv = MomentVectors::new(model);
        let half = T::lit(0.5);
        let dt = model.disc.dt;
        let lambda = model.collision_matrix();
        let weights = model.expanded_weights();
        let lw = lambda.matvec(&weights);
        Ok(Self {
            q: model.q(),
            d: model.d(),
            mode,
            m: model.lattice.m().clone(),
            m_inv: model.lattice.m_inv().clone(),
            keep: s.iter().map(|&sr| T::one() - sr).collect(),
            relax_to: s.iter().zip(&mv.m_eq_profile).map(|(&sr, &e)| sr * e).collect(),
            source: s.iter().zip(&mv.m_r_profile).map(|(&sr, &r)| dt * (T::one() - half * sr) * r).collect(),
            source_pop: weights.iter().zip(&lw).map(|(&w, &l)| dt * (w - half * l)).collect(),
            lambda,
            weights,
            velocities: model.lattice.velocities().to_vec(),
            eta: model.pde.eta,
            source_const: model.pde.source_const,
            dt,
        })
    }

    fn collide_cell(&self, f: &mut [T], given: Option<T>, m: &mut [T], out: &mut [T]) -> Result<()> {
        let phi = match given {
            Some(p) => p,
            None => macro_field(f, self.eta, self.source_const, self.dt)?,
        };
        let r = self.eta * phi + self.source_const;
        match self.mode {
            CollisionMode::Moment => {
                self.m.matvec_into(f, m);
                for i in 0..self.q {
                    m[i] = self.keep[i] * m[i] + self.relax_to[i] * phi + self.source[i] * r;
                }
                self.m_inv.matvec_into(m, out);
            }
            CollisionMode::Population => {
                for i in 0..self.q {
                    m[i] = f[i] - self.weights[i] * phi;
                }
                self.lambda.matvec_into(m, out);
                for i in 0..self.q {
                    out[i] = f[i] - out[i] + self.source_pop[i] * r;
                }
            }
        }
        f.copy_from_slice(out);
        Ok(())
    }

    /// Collision only, in place. A freshly initialised state relaxes
    /// towards its initial field.
    pub fn collide(&self, state: &mut FieldState<T>) -> Result<()> {
        let q = self.q;
        let init = || (vec![T::zero(); q], vec![T::zero(); q]);
        match state.initial_phi.take() {
            Some(phi) => state
                .f
                .par_chunks_mut(q)
                .zip(phi.par_iter())
                .try_for_each_init(init, |(m, out), (cell, &p)| self.collide_cell(cell, Some(p), m, out)),
            None => state
                .f
                .par_chunks_mut(q)
                .try_for_each_init(init, |(m, out), cell| self.collide_cell(cell, None, m, out)),
        }
    }

    /// One collide-and-stream step.
    pub fn step(&self, state: &mut FieldState<T>) -> Result<()> {
        if state.q != self.q || state.shape.len() != self.d {
            return Err(Error::Config("field state does not match the model".into()));
        }
        self.collide(state)?;
        let q = self.q;
        let shape = &state.shape;
        let strides = strides(shape);
        let src = &state.f;
        let velocities = &self.velocities;
        let step = state.time_index + 1;
        state.f_next.par_chunks_mut(q).enumerate().try_for_each(|(cell, out)| {
            let coords = coords_of(cell, shape);
            for (k, v) in velocities.iter().enumerate() {
                let mut idx = 0;
                for l in 0..coords.len() {
                    let n = shape[l] as i64;
                    let c = (coords[l] as i64 - i64::from(v[l])).rem_euclid(n) as usize;
                    idx += c * strides[l];
                }
                let val = src[idx * q + k];
                if !val.is_finite() {
                    return Err(Error::DivergenceDetected { step, cell });
                }
                out[k] = val;
            }
            Ok(())
        })?;
        std::mem::swap(&mut state.f, &mut state.f_next);
        state.time_index = step;
        Ok(())
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for l in (0..shape.len().saturating_sub(1)).rev() {
        s[l] = s[l + 1] * shape[l + 1];
    }
    s
}

fn coords_of(mut cell: usize, shape: &[usize]) -> Vec<usize> {
    let mut c = vec![0; shape.len()];
    for l in (0..shape.len()).rev() {
        c[l] = cell % shape[l];
        cell /= shape[l];
    }
    c
}

/// Multi-index of every cell in storage order.
pub fn cell_coords(shape: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0..shape.iter().product()).map(move |c| coords_of(c, shape))
}

/// One step with moment-space collision.
pub fn step<T: Scalar>(state: &mut FieldState<T>, model: &ModelParams<T>) -> Result<()> {
    Stepper::new(model, CollisionMode::Moment)?.step(state)
}

fn check_len<T>(shape: &[usize], field: &[T], what: &str) -> Result<()> {
    let cells: usize = shape.iter().product();
    if field.len() != cells {
        return Err(Error::Config(format!("{what} has {} values, grid has {cells} cells", field.len())));
    }
    Ok(())
}

/// `f_k = ω_k φ⁰` in every cell; the first collision uses `φ⁰` and
/// `R(φ⁰)` directly.
pub fn init_equilibrium<T: Scalar>(model: &ModelParams<T>, shape: &[usize], phi0: &[T]) -> Result<FieldState<T>> {
    check_len(shape, phi0, "initial field")?;
    let mut state = FieldState::zeros(shape.to_vec(), model.q())?;
    let w = model.expanded_weights();
    for (cell, &p) in state.f.chunks_mut(model.q()).zip(phi0) {
        for (fk, &wk) in cell.iter_mut().zip(&w) {
            *fk = wk * p;
        }
    }
    state.initial_phi = Some(phi0.to_vec());
    Ok(state)
}

/// `f = f^eq − Δx Λ⁻¹ (ω_k e_k·∇φ⁰)`; `grad` holds `d` components per cell.
/// Without `grad`, fourth-order periodic central differences of `phi0` are used.
pub fn init_fourth_order<T: Scalar>(
    model: &ModelParams<T>,
    shape: &[usize],
    phi0: &[T],
    grad: Option<&[T]>,
) -> Result<FieldState<T>> {
    let d = model.d();
    let owned;
    let grad = match grad {
        Some(g) => g,
        None => {
            owned = central_gradient(phi0, shape, model.disc.dx)?;
            &owned
        }
    };
    if grad.len() != phi0.len() * d {
        return Err(Error::Config(format!("gradient needs {} values, got {}", phi0.len() * d, grad.len())));
    }
    let mut state = init_equilibrium(model, shape, phi0)?;
    let q = model.q();
    let w = model.expanded_weights();
    let s_inv: Vec<T> = model.s_diag().iter().map(|&s| T::one() / s).collect();
    let mut scaled = model.lattice.m().clone();
    for r in 0..q {
        for c in 0..q {
            scaled[(r, c)] *= s_inv[r];
        }
    }
    let lambda_inv = model.lattice.m_inv().matmul(&scaled);
    let velocities = model.lattice.velocities();
    let dx = model.disc.dx;
    let mut v = vec![T::zero(); q];
    let mut corr = vec![T::zero(); q];
    for (c, cell) in state.f.chunks_mut(q).enumerate() {
        let g = &grad[c * d..(c + 1) * d];
        for k in 0..q {
            let dot: T = velocities[k].iter().zip(g).map(|(&e, &gl)| T::lit(f64::from(e)) * gl).sum();
            v[k] = w[k] * dot;
        }
        lambda_inv.matvec_into(&v, &mut corr);
        for k in 0..q {
            cell[k] -= dx * corr[k];
        }
    }
    Ok(state)
}

/// Fourth-order periodic central-difference gradient, `d` values per cell.
pub fn central_gradient<T: Scalar>(phi: &[T], shape: &[usize], dx: T) -> Result<Vec<T>> {
    check_len(shape, phi, "field")?;
    let d = shape.len();
    let st = strides(shape);
    let mut g = vec![T::zero(); phi.len() * d];
    let twelve_dx = T::lit(12.0) * dx;
    let eight = T::lit(8.0);
    for (c, coords) in cell_coords(shape).enumerate() {
        for l in 0..d {
            let n = shape[l] as i64;
            let at = |off: i64| {
                let cl = (coords[l] as i64 + off).rem_euclid(n) as usize;
                phi[c - coords[l] * st[l] + cl * st[l]]
            };
            g[c * d + l] = (at(-2) - eight * at(-1) + eight * at(1) - at(2)) / twelve_dx;
        }
    }
    Ok(g)
}

/// Initial data for a run.
#[derive(Debug, Clone)]
pub struct InitialCondition<T> {
    pub shape: Vec<usize>,
    pub phi0: Vec<T>,
    /// `d` gradient components per cell, if known analytically.
    pub grad: Option<Vec<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitScheme {
    Equilibrium,
    #[default]
    FourthOrder,
}

impl std::str::FromStr for InitScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "equilibrium" => Ok(Self::Equilibrium),
            "fourth_order" => Ok(Self::FourthOrder),
            other => {
                Err(Error::Config(format!("unknown init scheme `{other}` (expected equilibrium or fourth_order)")))
            }
        }
    }
}

impl std::fmt::Display for InitScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Equilibrium => "equilibrium",
            Self::FourthOrder => "fourth_order",
        })
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub shape: Vec<usize>,
    pub phi: Vec<T>,
    pub step_count: usize,
    pub time: T,
}

/// Number of whole steps that fit in `t_final`, tolerant to round-off.
pub fn step_count<T: Scalar>(t_final: T, dt: T) -> Result<usize> {
    if !(t_final >= T::zero()) {
        return Err(Error::Config(format!("final time must be non-negative, got {t_final}")));
    }
    let ratio = t_final / dt;
    let nearest = ratio.round();
    let n = if (ratio - nearest).abs() <= T::lit(1e-9) * nearest.max(T::one()) { nearest } else { ratio.floor() };
    n.to_usize().ok_or_else(|| Error::Config(format!("step count {ratio} out of range")))
}

/// Initializes, steps to `t_final` (floored to a whole number of steps) and
/// extracts φ.
pub fn run<T: Scalar>(
    model: &ModelParams<T>,
    init: &InitialCondition<T>,
    scheme: InitScheme,
    t_final: T,
) -> Result<RunOutput<T>> {
    let steps = step_count(t_final, model.disc.dt)?;
    let actual = T::from_usize_lossy(steps) * model.disc.dt;
    if (actual - t_final).abs() > T::lit(1e-9) * t_final.max(T::one()) {
        log::warn!("final time {t_final} is not a multiple of dt; stopping at {actual}");
    }
    let mut state = match scheme {
        InitScheme::Equilibrium => init_equilibrium(model, &init.shape, &init.phi0)?,
        InitScheme::FourthOrder => init_fourth_order(model, &init.shape, &init.phi0, init.grad.as_deref())?,
    };
    let stepper = Stepper::new(model, CollisionMode::Moment)?;
    for _ in 0..steps {
        stepper.step(&mut state)?;
    }
    Ok(RunOutput { shape: init.shape.clone(), phi: state.phi(model)?, step_count: steps, time: actual })
}

/// `i1,...,id,phi` rows in storage order.
pub fn write_field_csv<T: Scalar, W: Write>(shape: &[usize], phi: &[T], mut w: W) -> io::Result<()> {
    let header: Vec<String> = (1..=shape.len()).map(|i| format!("i{i}")).collect();
    writeln!(w, "{},phi", header.join(","))?;
    for (coords, p) in cell_coords(shape).zip(phi) {
        let idx: Vec<String> = coords.iter().map(usize::to_string).collect();
        writeln!(w, "{},{p:.16e}", idx.join(","))?;
    }
    Ok(())
}
