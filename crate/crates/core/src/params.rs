//! Synthesis of weights and relaxation rates.
//!
//! The fourth-order conditions reduce to three kinds of scalar equations:
//!
//! * a linear relation between ε̃_i, ω_i and s̃_i that eliminates ω_i,
//! * a quadratic (in 1/s̃_i) equation for each axis rate, independent of the
//!   weights,
//! * an equation affine in 1/s_{2|x_i x_j} for each pair of axes.
//!
//! Each axis may have two admissible roots, so [`solve_model`] enumerates the
//! combinations and keeps the jointly admissible one whose cross rates sit
//! closest to 1 (see [`select_combination`]).

use std::io::{self, Write};

use crate::lattice::{
    build_lattice, collision_matrix, expand_relaxation, pair_index, pairs, third_index, LatticeFamily, LatticeSpec,
    RelaxationSet, WeightSet,
};
use crate::linalg::DenseMatrix;
use crate::roots::{bracketed_roots, SCAN_INTERVALS};
use crate::{Error, Infeasibility, Result, Scalar};

/// Target equation `∂t φ = Σ κ_i ∂²_i φ + η φ + S`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeParams<T> {
    pub kappa: Vec<T>,
    pub eta: T,
    pub source_const: T,
}

impl<T: Scalar> PdeParams<T> {
    pub fn new(kappa: Vec<T>, eta: T, source_const: T) -> Result<Self> {
        if kappa.is_empty() {
            return Err(Error::Config("at least one diffusion coefficient is required".into()));
        }
        if let Some(k) = kappa.iter().find(|k| !(**k > T::zero()) || !k.is_finite()) {
            return Err(Error::Config(format!("diffusion coefficients must be positive, got {k}")));
        }
        Ok(Self { kappa, eta, source_const })
    }

    pub fn d(&self) -> usize {
        self.kappa.len()
    }

    /// True when all κ agree to a relative spread of 1e-12.
    pub fn is_isotropic(&self) -> bool {
        let max = self.kappa.iter().copied().fold(T::neg_infinity(), T::max);
        let min = self.kappa.iter().copied().fold(T::infinity(), T::min);
        max - min <= T::lit(1e-12) * max.abs()
    }
}

/// Lattice spacing and time step under diffusive scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discretization<T> {
    pub dx: T,
    pub dt: T,
}

impl<T: Scalar> Discretization<T> {
    pub fn new(dx: T, dt: T) -> Result<Self> {
        if !(dx > T::zero() && dt > T::zero()) || !dx.is_finite() || !dt.is_finite() {
            return Err(Error::Config(format!("dx and dt must be positive, got dx={dx}, dt={dt}")));
        }
        Ok(Self { dx, dt })
    }

    /// `dt = ξ dx²`.
    pub fn from_ratio(dx: T, scaling_ratio: T) -> Result<Self> {
        Self::new(dx, scaling_ratio * dx * dx)
    }

    /// ξ = dt / dx².
    pub fn scaling_ratio(&self) -> T {
        self.dt / (self.dx * self.dx)
    }
}

/// Nondimensional diffusion numbers per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionNumbers<T> {
    /// `(1/s_i − 1/2)(2ω_i + 4(d−1)ω̃)` from the actual rates.
    pub eps: Vec<T>,
    /// `κ_i ξ`.
    pub eps_tilde: Vec<T>,
}

/// Weights and rates before they are tied to a PDE and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamFragment<T> {
    pub family: LatticeFamily,
    pub weights: WeightSet<T>,
    pub rates: RelaxationSet<T>,
    pub rates_tilde: Vec<T>,
}

/// A complete, admissible parameter set.
#[derive(Debug, Clone)]
pub struct ModelParams<T> {
    pub lattice: LatticeSpec<T>,
    pub weights: WeightSet<T>,
    pub rates: RelaxationSet<T>,
    /// Axis rates before the η correction.
    pub rates_tilde: Vec<T>,
    pub pde: PdeParams<T>,
    pub disc: Discretization<T>,
}

/// How to obtain the parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Root finding on the full condition system (Full family), or the closed
    /// form for the Axis family.
    General,
    /// Closed form with `s_{x_i} = 1` (Full family, isotropic only).
    IsotropicClosedForm,
    /// Closed form for the Axis family (isotropic only).
    AxisClosedForm,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "general" => Ok(Self::General),
            "isotropic_closed_form" | "isotropic" => Ok(Self::IsotropicClosedForm),
            "axis_closed_form" | "axis" => Ok(Self::AxisClosedForm),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected general, isotropic_closed_form or axis_closed_form)"
            ))),
        }
    }
}

/// Default ω̃ per dimension.
pub fn default_omega_tilde(d: usize) -> f64 {
    match d {
        0..=2 => 1.0 / 36.0,
        3 => 1.0 / 180.0,
        _ => 1.0 / 360.0,
    }
}

/// Axis rate corrected for the source term: solves
/// `1/s̃ = 1/s + ηΔt/s (1 − 1/s)` for `s`, exact passthrough when `ηΔt ≈ 0`.
pub fn tilde_to_s<T: Scalar>(s_tilde: T, eta: T, dt: T) -> Result<T> {
    let a = eta * dt;
    if a.abs() < T::lit(1e-14) {
        return Ok(s_tilde);
    }
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    let radicand = (s_tilde - four * a + a * a * s_tilde + two * a * s_tilde) / s_tilde;
    if !(radicand >= T::zero()) {
        return Err(Error::InfeasibleCorrection { s_tilde: s_tilde.as_f64(), eta_dt: a.as_f64() });
    }
    Ok(two * a / (a - radicand.sqrt() + T::one()))
}

/// Third-order error group for rates `(s_a, s_{2|b}, s_{3|g})`.
pub fn err1<T: Scalar>(sa: T, s2b: T, s3g: T) -> T {
    let half = T::lit(0.5);
    let one = T::one();
    T::lit(-7.0 / 24.0) + one / (T::lit(6.0) * sa) + (one / (s3g * s2b) - half / s3g - half / s2b) * (one / sa - one)
        - half * (one - one / s2b) * (one / s3g - half)
        + one / (T::lit(6.0) * s3g)
}

/// Second-order error group for rates `(s_a, s_2)`.
pub fn err2<T: Scalar>(sa: T, s2: T) -> T {
    let one = T::one();
    let half = T::lit(0.5);
    (one / sa - one) * (one - one / s2 - one / sa) + half - half / s2
}

/// Second weight moment along an axis: `2ω_i + 4(d−1)ω̃`.
pub fn axis_moment<T: Scalar>(omega_i: T, omega_tilde: T, d: usize) -> T {
    T::lit(2.0) * omega_i + T::lit(4.0) * T::from_usize_lossy(d - 1) * omega_tilde
}

/// Residual linking ε̃_i, s̃_i and ω_i.
pub fn residual_eqi<T: Scalar>(eps_tilde: T, s_tilde: T, omega_i: T, omega_tilde: T, d: usize) -> T {
    eps_tilde - (T::one() / s_tilde - T::lit(0.5)) * axis_moment(omega_i, omega_tilde, d)
}

/// Numerator of the per-axis fourth-order residual; the full residual is
/// this divided by `1/s̃ − 1/2`.
fn eqii_numerator<T: Scalar>(eps: T, s: T, s2: T) -> T {
    T::lit(0.5) * eps * (T::one() / s - T::lit(0.5)) - err1(s, s2, s) - err2(s, s2) * eps
}

/// Per-axis fourth-order residual (independent of the weights).
pub fn residual_eqii<T: Scalar>(eps_tilde: T, s_tilde: T, s2_axis: T) -> T {
    eqii_numerator(eps_tilde, s_tilde, s2_axis) / (T::one() / s_tilde - T::lit(0.5))
}

/// Solved axis unknowns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSolution<T> {
    pub omega: T,
    pub s_tilde: T,
}

/// Cross residual for the pair (i, j) given a cross rate.
#[allow(clippy::too_many_arguments)]
pub fn residual_eqij<T: Scalar>(
    axis_i: AxisSolution<T>,
    axis_j: AxisSolution<T>,
    eps_i: T,
    eps_j: T,
    omega_tilde: T,
    s2_axis: T,
    d: usize,
    s_cross: T,
) -> T {
    let (si, sj) = (axis_i.s_tilde, axis_j.s_tilde);
    // third-order rates tied to the linear axis: s_{3|x_i² x_j} = s_j
    let (si2j, sij2) = (sj, si);
    let sum = err1(si, s2_axis, si2j)
        + err1(sj, s2_axis, sij2)
        + err1(si, s_cross, si2j)
        + err1(sj, s_cross, sij2)
        + err1(si, s_cross, sij2)
        + err1(sj, s_cross, si2j);
    eps_i * eps_j
        - (T::lit(4.0) * omega_tilde * sum
            + err2(si, s2_axis) * eps_j * axis_moment(axis_i.omega, omega_tilde, d)
            + err2(sj, s2_axis) * eps_i * axis_moment(axis_j.omega, omega_tilde, d))
}

/// ω_i from ε̃_i and s̃_i.
pub fn omega_from_rate<T: Scalar>(eps_tilde: T, s_tilde: T, omega_tilde: T, d: usize) -> T {
    (eps_tilde / (T::one() / s_tilde - T::lit(0.5)) - T::lit(4.0) * T::from_usize_lossy(d - 1) * omega_tilde)
        / T::lit(2.0)
}

fn in_open<T: Scalar>(x: T, lo: f64, hi: f64) -> bool {
    x > T::lit(lo) && x < T::lit(hi)
}

/// All admissible `(ω_i, s̃_i)` for one axis, ascending in s̃.
///
/// Admissible means ω_i ∈ (0,1) and s̃_i ∈ (0,2). An empty result is
/// reported as [`Infeasibility::Axis`] with axis index 0; [`solve_model`]
/// rewrites the index.
pub fn solve_axis<T: Scalar>(eps_tilde: T, omega_tilde: T, s2_axis: T, d: usize) -> Result<Vec<AxisSolution<T>>> {
    if !(eps_tilde > T::zero()) {
        return Err(Error::Config(format!("eps_tilde must be positive, got {eps_tilde}")));
    }
    // s² · numerator is a quadratic polynomial in s, free of poles on (0,2)
    let f = |s: T| s * s * eqii_numerator(eps_tilde, s, s2_axis);
    let sols: Vec<_> = bracketed_roots(f, T::zero(), T::lit(2.0), SCAN_INTERVALS)
        .into_iter()
        .map(|s| AxisSolution { omega: omega_from_rate(eps_tilde, s, omega_tilde, d), s_tilde: s })
        .filter(|a| in_open(a.omega, 0.0, 1.0) && in_open(a.s_tilde, 0.0, 2.0))
        .collect();
    if sols.is_empty() {
        return Err(Infeasibility::Axis { axis: 0 }.into());
    }
    Ok(sols)
}

/// Cross rate `s_{2|x_i x_j}` in (0, 2). The residual is affine in its
/// reciprocal, so the root is unique when it exists.
#[allow(clippy::too_many_arguments)]
pub fn solve_cross<T: Scalar>(
    axis_i: AxisSolution<T>,
    axis_j: AxisSolution<T>,
    eps_i: T,
    eps_j: T,
    omega_tilde: T,
    s2_axis: T,
    d: usize,
) -> Result<T> {
    let r = |s: T| residual_eqij(axis_i, axis_j, eps_i, eps_j, omega_tilde, s2_axis, d, s);
    // sample at 1/s = 1 and 1/s = 2
    let r1 = r(T::one());
    let r2 = r(T::lit(0.5));
    let slope = r2 - r1;
    let infeasible = Infeasibility::Pair { i: 0, j: 1 };
    if slope.abs() <= T::epsilon() * (r1.abs() + r2.abs()) || slope == T::zero() {
        return Err(infeasible.into());
    }
    let inv = T::one() - r1 / slope;
    let s = T::one() / inv;
    if !in_open(s, 0.0, 2.0) || !s.is_finite() {
        return Err(infeasible.into());
    }
    Ok(s)
}

/// Per-axis and cross rates chosen for a set of axes.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection<T> {
    pub axes: Vec<AxisSolution<T>>,
    /// η-corrected axis rates.
    pub s_axis: Vec<T>,
    /// Cross rates for the lexicographic pairs of the given axes.
    pub s_cross: Vec<T>,
}

/// Chooses one root per axis.
///
/// Candidates are the admissible per-axis roots whose η-corrected rate is also
/// in (0, 2). Every combination (ascending s̃ per axis, lexicographic over
/// axes) is tried; a combination is admissible when all cross rates exist in
/// (0, 2) and, if `check_rest_weight`, ω_0 ∈ (0, 1). Among admissible ones the
/// smallest `Σ (s_ij − 1)²` wins, ties going to the earliest.
///
/// `eps_tilde` may cover a subset of the axes; `d` is the lattice dimension.
#[allow(clippy::too_many_arguments)]
pub fn select_combination<T: Scalar>(
    eps_tilde: &[T],
    omega_tilde: T,
    s2_axis: T,
    d: usize,
    eta: T,
    dt: T,
    check_rest_weight: bool,
) -> Result<Selection<T>> {
    let n = eps_tilde.len();
    let mut candidates: Vec<Vec<(AxisSolution<T>, T)>> = Vec::with_capacity(n);
    for (axis, &eps) in eps_tilde.iter().enumerate() {
        let relabel = |e: Error| match e {
            Error::Infeasible(Infeasibility::Axis { .. }) => Infeasibility::Axis { axis }.into(),
            other => other,
        };
        let sols = solve_axis(eps, omega_tilde, s2_axis, d).map_err(relabel)?;
        let corrected: Vec<_> = sols
            .into_iter()
            .filter_map(|a| tilde_to_s(a.s_tilde, eta, dt).ok().filter(|s| in_open(*s, 0.0, 2.0)).map(|s| (a, s)))
            .collect();
        if corrected.is_empty() {
            return Err(Infeasibility::Axis { axis }.into());
        }
        candidates.push(corrected);
    }

    let total: usize = candidates.iter().map(Vec::len).product();
    let mut best: Option<(T, Selection<T>)> = None;
    let mut first_failure: Option<Infeasibility> = None;
    for mut code in 0..total {
        let mut pick = Vec::with_capacity(n);
        for c in candidates.iter().rev() {
            pick.push(c[code % c.len()]);
            code /= c.len();
        }
        pick.reverse();
        let axes: Vec<_> = pick.iter().map(|p| p.0).collect();
        let s_axis: Vec<_> = pick.iter().map(|p| p.1).collect();

        let failure = (|| {
            if check_rest_weight {
                let mut omega = axes.iter().map(|a| a.omega).collect::<Vec<_>>();
                omega.resize(d, T::zero());
                let w = WeightSet::new(LatticeFamily::Full, omega, omega_tilde);
                if !in_open(w.omega0, 0.0, 1.0) {
                    return Err(Infeasibility::Weight { index: 0, value: w.omega0.as_f64() });
                }
            }
            let mut cross = Vec::with_capacity(n * n.saturating_sub(1) / 2);
            for (i, j) in pairs(n) {
                let s = solve_cross(axes[i], axes[j], eps_tilde[i], eps_tilde[j], omega_tilde, s2_axis, d)
                    .map_err(|_| Infeasibility::Pair { i, j })?;
                cross.push(s);
            }
            Ok(cross)
        })();
        match failure {
            Ok(s_cross) => {
                let score: T = s_cross.iter().map(|&s| (s - T::one()) * (s - T::one())).sum();
                if best.as_ref().is_none_or(|(b, _)| score < *b) {
                    best = Some((score, Selection { axes, s_axis, s_cross }));
                }
            }
            Err(e) => {
                first_failure.get_or_insert(e);
            }
        }
    }
    match best {
        Some((_, sel)) => Ok(sel),
        None if total == 1 => Err(first_failure.unwrap_or(Infeasibility::NoAdmissibleCombination).into()),
        None => Err(Infeasibility::NoAdmissibleCombination.into()),
    }
}

/// Pair-level feasibility used for solvability rasters: the two axes, their
/// cross rate and the rest weight (other axes weighted zero) must be
/// admissible.
#[allow(clippy::too_many_arguments)]
pub fn solve_pair<T: Scalar>(
    eps_i: T,
    eps_j: T,
    omega_tilde: T,
    s2_axis: T,
    d: usize,
    eta: T,
    dt: T,
) -> Result<Selection<T>> {
    select_combination(&[eps_i, eps_j], omega_tilde, s2_axis, d.max(2), eta, dt, true)
}

/// Full-family parameters from the root-finding route.
pub fn solve_model<T: Scalar>(
    pde: &PdeParams<T>,
    disc: &Discretization<T>,
    omega_tilde: T,
    s2_axis: T,
) -> Result<ModelParams<T>> {
    check_presets(omega_tilde, s2_axis)?;
    let d = pde.d();
    let xi = disc.scaling_ratio();
    let eps_tilde: Vec<T> = pde.kappa.iter().map(|&k| k * xi).collect();
    let sel = select_combination(&eps_tilde, omega_tilde, s2_axis, d, pde.eta, disc.dt, true)?;
    let weights = WeightSet::new(LatticeFamily::Full, sel.axes.iter().map(|a| a.omega).collect(), omega_tilde);
    let rates = RelaxationSet::tied(LatticeFamily::Full, T::one(), sel.s_axis.clone(), s2_axis, sel.s_cross);
    let fragment = ParamFragment {
        family: LatticeFamily::Full,
        weights,
        rates,
        rates_tilde: sel.axes.iter().map(|a| a.s_tilde).collect(),
    };
    ModelParams::assemble(fragment, pde.clone(), *disc)
}

fn check_presets<T: Scalar>(omega_tilde: T, s2_axis: T) -> Result<()> {
    if !in_open(omega_tilde, 0.0, 1.0) {
        return Err(Error::Config(format!("omega_tilde must lie in (0,1), got {omega_tilde}")));
    }
    if !in_open(s2_axis, 0.0, 2.0) {
        return Err(Error::Config(format!("s2_axis must lie in (0,2), got {s2_axis}")));
    }
    Ok(())
}

fn check_ranges<T: Scalar>(family: LatticeFamily, weights: &WeightSet<T>, rates: &RelaxationSet<T>) -> Result<()> {
    if !in_open(weights.omega0, 0.0, 1.0) {
        return Err(Infeasibility::Weight { index: 0, value: weights.omega0.as_f64() }.into());
    }
    for (i, &w) in weights.omega_axis.iter().enumerate() {
        if !in_open(w, 0.0, 1.0) {
            return Err(Infeasibility::Weight { index: i + 1, value: w.as_f64() }.into());
        }
    }
    if family == LatticeFamily::Full && !in_open(weights.omega_diag, 0.0, 1.0) {
        return Err(Infeasibility::Weight {
            index: 2 * weights.omega_axis.len() + 1,
            value: weights.omega_diag.as_f64(),
        }
        .into());
    }
    for (name, value) in rate_entries(weights.omega_axis.len(), rates).into_iter().skip(1) {
        if !in_open(value, 0.0, 2.0) {
            return Err(Infeasibility::Rate { name, value: value.as_f64() }.into());
        }
    }
    Ok(())
}

fn axis_name(i: usize) -> String {
    format!("x{}", i + 1)
}

fn rate_entries<T: Scalar>(d: usize, r: &RelaxationSet<T>) -> Vec<(String, T)> {
    let mut out = vec![("s_0".to_string(), r.s0)];
    for (i, &s) in r.s_axis.iter().enumerate() {
        out.push((format!("s_{}", axis_name(i)), s));
    }
    for (i, &s) in r.s2_diag_sq.iter().enumerate() {
        let a = axis_name(i);
        out.push((format!("s2_{a}{a}"), s));
    }
    if !r.s2_cross.is_empty() {
        for (i, j) in pairs(d) {
            out.push((format!("s2_{}{}", axis_name(i), axis_name(j)), r.s2_cross[pair_index(d, i, j)]));
        }
    }
    if !r.s3.is_empty() {
        for sq in 0..d {
            for lin in (0..d).filter(|&l| l != sq) {
                let a = axis_name(sq);
                out.push((format!("s3_{a}{a}{}", axis_name(lin)), r.s3[third_index(d, sq, lin)]));
            }
        }
    }
    if !r.s4.is_empty() {
        for (i, j) in pairs(d) {
            let (a, b) = (axis_name(i), axis_name(j));
            out.push((format!("s4_{a}{a}{b}{b}"), r.s4[pair_index(d, i, j)]));
        }
    }
    out
}

/// Closed form with unit axis rates (isotropic problems only).
pub fn isotropic_closed_form<T: Scalar>(eps: T, omega_tilde: T, d: usize) -> Result<ParamFragment<T>> {
    if d == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let one = T::one();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    let tol = T::lit(1e-12);
    let dd = T::from_usize_lossy(d);
    let omega_i = eps + two * omega_tilde - two * dd * omega_tilde;

    let den2 = six * eps - T::lit(5.0);
    if den2.abs() < tol {
        return Err(Infeasibility::Pole { what: "axis second-moment rate" }.into());
    }
    let s2 = six * (two * eps - one) / den2;

    let mut s_cross = Vec::new();
    if d > 1 {
        let den = T::lit(22.0) * eps * omega_tilde - eps * eps - T::lit(5.0) * omega_tilde + two * eps * eps * eps
            - T::lit(24.0) * eps * eps * omega_tilde;
        if den.abs() < tol {
            return Err(Infeasibility::Pole { what: "cross rate" }.into());
        }
        let sij = -six * omega_tilde * (two * eps - one) * (two * eps - one) / den;
        s_cross = vec![sij; d * (d - 1) / 2];
    }
    let weights = WeightSet::new(LatticeFamily::Full, vec![omega_i; d], omega_tilde);
    let rates = RelaxationSet::tied(LatticeFamily::Full, one, vec![one; d], s2, s_cross);
    check_ranges(LatticeFamily::Full, &weights, &rates)?;
    Ok(ParamFragment { family: LatticeFamily::Full, weights, rates, rates_tilde: vec![one; d] })
}

/// Closed form for the Axis family (isotropic problems only).
pub fn axis_lattice_closed_form<T: Scalar>(eps: T, eta: T, dt: T, d: usize) -> Result<ParamFragment<T>> {
    if d == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    let sqrt3 = T::lit(3.0).sqrt();
    let omega_i = sqrt3 * eps;
    let weights = WeightSet::new(LatticeFamily::Axis, vec![omega_i; d], T::zero());
    if !in_open(weights.omega0, 0.0, 1.0) {
        return Err(Infeasibility::Weight { index: 0, value: weights.omega0.as_f64() }.into());
    }
    let s_tilde = T::lit(6.0) / (T::lit(3.0) + sqrt3);
    let s = tilde_to_s(s_tilde, eta, dt)?;
    let s2 = T::lit(4.0) * sqrt3 - T::lit(6.0);
    let rates = RelaxationSet::tied(LatticeFamily::Axis, T::one(), vec![s; d], s2, Vec::new());
    check_ranges(LatticeFamily::Axis, &weights, &rates)?;
    Ok(ParamFragment { family: LatticeFamily::Axis, weights, rates, rates_tilde: vec![s_tilde; d] })
}

/// Closed-form and Axis-family routes exist only for isotropic problems.
pub fn anisotropic_axis_infeasibility<T: Scalar>(pde: &PdeParams<T>) -> Result<()> {
    if pde.d() > 1 && !pde.is_isotropic() {
        return Err(Infeasibility::Anisotropic.into());
    }
    Ok(())
}

/// Single entry point over families and methods.
pub fn synthesize<T: Scalar>(
    family: LatticeFamily,
    method: Method,
    pde: &PdeParams<T>,
    disc: &Discretization<T>,
    omega_tilde: T,
    s2_axis: T,
) -> Result<ModelParams<T>> {
    let d = pde.d();
    let eps = pde.kappa[0] * disc.scaling_ratio();
    let fragment = match (family, method) {
        (LatticeFamily::Full, Method::General) => return solve_model(pde, disc, omega_tilde, s2_axis),
        (LatticeFamily::Full, Method::IsotropicClosedForm) => {
            anisotropic_axis_infeasibility(pde)?;
            isotropic_closed_form(eps, omega_tilde, d)?
        }
        (LatticeFamily::Axis, Method::General | Method::AxisClosedForm) => {
            anisotropic_axis_infeasibility(pde)?;
            axis_lattice_closed_form(eps, pde.eta, disc.dt, d)?
        }
        (family, method) => {
            return Err(Error::Config(format!("method {method:?} is not available for the {family} lattice")))
        }
    };
    ModelParams::assemble(fragment, pde.clone(), *disc)
}

/// Named residuals of a parameter set.
#[derive(Debug, Clone)]
pub struct ResidualReport<T> {
    pub entries: Vec<(String, T)>,
}

impl<T: Scalar> ResidualReport<T> {
    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, (_, v)| m.max(v.abs()))
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Builds the lattice and validates ranges.
    pub fn assemble(fragment: ParamFragment<T>, pde: PdeParams<T>, disc: Discretization<T>) -> Result<Self> {
        let d = pde.d();
        if fragment.weights.omega_axis.len() != d || fragment.rates_tilde.len() != d {
            return Err(Error::Config(format!("parameter fragment does not match dimension {d}")));
        }
        if pde.eta * disc.dt == T::lit(2.0) {
            return Err(Error::DegenerateSource);
        }
        let lattice = build_lattice(d, fragment.family)?;
        expand_relaxation(&lattice, &fragment.rates)?;
        check_ranges(fragment.family, &fragment.weights, &fragment.rates)?;
        Ok(Self {
            lattice,
            weights: fragment.weights,
            rates: fragment.rates,
            rates_tilde: fragment.rates_tilde,
            pde,
            disc,
        })
    }

    /// Assembles without range checks; used for deliberately perturbed or
    /// hand-built sets (stability experiments).
    pub fn assemble_unchecked(fragment: ParamFragment<T>, pde: PdeParams<T>, disc: Discretization<T>) -> Result<Self> {
        let lattice = build_lattice(pde.d(), fragment.family)?;
        expand_relaxation(&lattice, &fragment.rates)?;
        Ok(Self {
            lattice,
            weights: fragment.weights,
            rates: fragment.rates,
            rates_tilde: fragment.rates_tilde,
            pde,
            disc,
        })
    }

    pub fn d(&self) -> usize {
        self.lattice.d()
    }

    pub fn q(&self) -> usize {
        self.lattice.q()
    }

    pub fn family(&self) -> LatticeFamily {
        self.lattice.family()
    }

    pub fn expanded_weights(&self) -> Vec<T> {
        self.weights.expand(&self.lattice)
    }

    /// Diagonal of `S`.
    pub fn s_diag(&self) -> Vec<T> {
        expand_relaxation(&self.lattice, &self.rates).expect("validated at assembly")
    }

    /// `Λ = M⁻¹ S M`.
    pub fn collision_matrix(&self) -> DenseMatrix<T> {
        collision_matrix(&self.lattice, &self.rates).expect("validated at assembly")
    }

    pub fn diffusion_numbers(&self) -> DiffusionNumbers<T> {
        let d = self.d();
        let xi = self.disc.scaling_ratio();
        let wd = self.weights.omega_diag;
        let eps = (0..d)
            .map(|i| (T::one() / self.rates.s_axis[i] - T::lit(0.5)) * axis_moment(self.weights.omega_axis[i], wd, d))
            .collect();
        DiffusionNumbers { eps, eps_tilde: self.pde.kappa.iter().map(|&k| k * xi).collect() }
    }

    /// Recomputes every condition from the stored values.
    ///
    /// Includes the per-axis relations, the per-axis fourth-order residual,
    /// the cross residual per pair (Full family) and the zeroth-order
    /// truncation error with the corrected rates.
    pub fn residuals(&self) -> ResidualReport<T> {
        let d = self.d();
        let dn = self.diffusion_numbers();
        let wd = self.weights.omega_diag;
        let s2 = self.rates.s2_diag_sq[0];
        let half = T::lit(0.5);
        let mut entries = Vec::new();
        let axes: Vec<_> =
            (0..d).map(|i| AxisSolution { omega: self.weights.omega_axis[i], s_tilde: self.rates_tilde[i] }).collect();
        for i in 0..d {
            let a = axis_name(i);
            let (w, st, s) = (axes[i].omega, axes[i].s_tilde, self.rates.s_axis[i]);
            entries.push((format!("eqi_{a}"), residual_eqi(dn.eps_tilde[i], st, w, wd, d)));
            entries.push((format!("eqii_{a}"), residual_eqii(dn.eps_tilde[i], st, s2)));
            let m2 = axis_moment(w, wd, d);
            let zeroth = (T::one() / s - half) * m2
                + (self.disc.dt / s) * (T::one() - T::one() / s) * self.pde.eta * m2
                - dn.eps_tilde[i];
            entries.push((format!("zeroth_{a}"), zeroth));
        }
        if self.family() == LatticeFamily::Full {
            for (i, j) in pairs(d) {
                let sij = self.rates.s2_cross[pair_index(d, i, j)];
                let r = residual_eqij(axes[i], axes[j], dn.eps_tilde[i], dn.eps_tilde[j], wd, s2, d, sij);
                entries.push((format!("eqij_{}{}", axis_name(i), axis_name(j)), r));
            }
        }
        ResidualReport { entries }
    }

    /// `name,value` rows describing the parameter set.
    pub fn csv_rows(&self) -> Vec<(String, String)> {
        let d = self.d();
        let num = |v: T| format!("{v:.16e}");
        let mut rows = vec![
            ("d".to_string(), d.to_string()),
            ("family".to_string(), self.family().to_string()),
            ("dx".to_string(), num(self.disc.dx)),
            ("dt".to_string(), num(self.disc.dt)),
            ("scaling_ratio".to_string(), num(self.disc.scaling_ratio())),
            ("eta".to_string(), num(self.pde.eta)),
            ("source_const".to_string(), num(self.pde.source_const)),
        ];
        let dn = self.diffusion_numbers();
        for i in 0..d {
            rows.push((format!("kappa_{}", axis_name(i)), num(self.pde.kappa[i])));
        }
        for i in 0..d {
            rows.push((format!("eps_tilde_{}", axis_name(i)), num(dn.eps_tilde[i])));
        }
        rows.push(("omega_0".into(), num(self.weights.omega0)));
        for (i, &w) in self.weights.omega_axis.iter().enumerate() {
            rows.push((format!("omega_{}", i + 1), num(w)));
        }
        if self.family() == LatticeFamily::Full {
            rows.push(("omega_tilde".into(), num(self.weights.omega_diag)));
        }
        for (i, &s) in self.rates_tilde.iter().enumerate() {
            rows.push((format!("s_tilde_{}", axis_name(i)), num(s)));
        }
        rows.extend(rate_entries(d, &self.rates).into_iter().map(|(n, v)| (n, num(v))));
        rows
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "name,value")?;
        for (name, value) in self.csv_rows() {
            writeln!(w, "{name},{value}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WD2: f64 = 1.0 / 36.0;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn model(eps: &[f64], eta: f64, dt: f64, wd: f64) -> ModelParams<f64> {
        let dx = 0.01;
        let disc = Discretization::new(dx, dt).unwrap();
        let xi = disc.scaling_ratio();
        let pde = PdeParams::new(eps.iter().map(|e| e / xi).collect(), eta, 0.0).unwrap();
        solve_model(&pde, &disc, wd, 1.0).unwrap()
    }

    #[test]
    fn tilde_to_s_passthrough_without_source() {
        assert_eq!(tilde_to_s(1.37, 0.0, 0.1).unwrap(), 1.37);
    }

    #[test]
    fn tilde_to_s_inverts_the_correction() {
        // 1/s̃ = 1/s + a/s (1 − 1/s)
        for &(st, a) in &[(1.5, -0.02), (0.7, -0.1), (1.2, 0.05)] {
            let s: f64 = tilde_to_s(st, a, 1.0).unwrap();
            let back = 1.0 / s + a / s * (1.0 - 1.0 / s);
            assert!(close(1.0 / back, st, 1e-13), "{st} {a}");
        }
    }

    #[test]
    fn tilde_to_s_values_with_source() {
        let pi2 = std::f64::consts::PI.powi(2);
        let st = 6.0 / (3.0 + 3f64.sqrt());
        assert!(close(tilde_to_s(st, -pi2, 1.0 / 400.0).unwrap(), 1.261464647585203, 1e-12));
        assert!(close(tilde_to_s(st, -pi2, 0.01).unwrap(), 1.243448367507882, 1e-12));
    }

    #[test]
    fn tilde_to_s_negative_radicand() {
        assert!(matches!(tilde_to_s(0.5, 1.0, 1.0), Err(Error::InfeasibleCorrection { .. })));
    }

    #[test]
    fn axis_roots_known_values() {
        let sols = solve_axis(0.1, WD2, 1.0, 2).unwrap();
        assert_eq!(sols.len(), 2);
        assert!(close(sols[0].s_tilde, 8.0 / 7.0, 1e-13));
        assert!(close(sols[1].s_tilde, 1.5, 1e-13));
        assert!(close(sols[1].omega, 11.0 / 45.0, 1e-13));
        let sols = solve_axis(0.4, WD2, 1.0, 2).unwrap();
        assert!(close(sols[0].s_tilde, 0.258403002308493, 1e-12));
        assert!(close(sols[0].omega, 0.003792962534682, 1e-12));
    }

    #[test]
    fn axis_roots_satisfy_both_residuals() {
        for &eps in &[0.05, 0.1, 0.2, 0.3, 0.4] {
            for s in solve_axis(eps, WD2, 1.0, 2).unwrap() {
                assert!(residual_eqi(eps, s.s_tilde, s.omega, WD2, 2).abs() < 1e-12);
                assert!(residual_eqii(eps, s.s_tilde, 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn axis_outside_region_is_infeasible() {
        assert!(matches!(solve_axis(3.0, WD2, 1.0, 2), Err(Error::Infeasible(Infeasibility::Axis { .. }))));
    }

    #[test]
    fn cross_rate_is_symmetric() {
        let a = solve_axis(0.2, WD2, 1.0, 2).unwrap()[0];
        let b = solve_axis(0.2, WD2, 1.0, 2).unwrap()[0];
        let s1 = solve_cross(a, b, 0.2, 0.2, WD2, 1.0, 2).unwrap();
        let s2 = solve_cross(b, a, 0.2, 0.2, WD2, 1.0, 2).unwrap();
        assert_eq!(s1, s2);
        assert!(residual_eqij(a, b, 0.2, 0.2, WD2, 1.0, 2, s1).abs() < 1e-13);
    }

    #[test]
    fn two_dimensional_anisotropic_model() {
        let m = model(&[0.4, 0.1], 0.0, 0.025, WD2);
        assert!(close(m.weights.omega0, 0.392414074930637, 1e-12));
        assert!(close(m.weights.omega_axis[0], 0.003792962534682, 1e-12));
        assert!(close(m.weights.omega_axis[1], 11.0 / 45.0, 1e-12));
        assert!(close(m.rates.s_axis[0], 0.258403002308493, 1e-12));
        assert!(close(m.rates.s_axis[1], 1.5, 1e-12));
        assert!(close(m.rates.s2_cross[0], 1.466835061000191, 1e-12));
        assert!(m.residuals().max_abs() < 1e-12);
        assert_eq!(m.rates.s3, vec![m.rates.s_axis[1], m.rates.s_axis[0]]);
    }

    #[test]
    fn model_with_source_term() {
        let m = model(&[0.25, 0.1], -std::f64::consts::PI.powi(2), 1.0 / 400.0, WD2);
        assert!(close(m.weights.omega0, 0.228240384066444, 1e-12));
        assert!(close(m.rates.s_axis[0], 0.729269281934827, 1e-12));
        assert!(close(m.rates.s_axis[1], 1.487_864_247_860_46, 1e-12));
        assert!(close(m.rates.s2_cross[0], 1.114757496216724, 1e-12));
        assert!(m.residuals().max_abs() < 1e-12);
    }

    #[test]
    fn scaling_invariance() {
        let a = model(&[0.3, 0.1], 0.0, 0.025, WD2);
        let disc = Discretization::new(0.02, 0.1).unwrap();
        let pde = PdeParams::new(a.pde.kappa.clone(), 0.0, 0.0).unwrap();
        let b = solve_model(&pde, &disc, WD2, 1.0).unwrap();
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.rates, b.rates);
    }

    #[test]
    fn isotropic_closed_form_values() {
        let f = isotropic_closed_form(0.1, WD2, 2).unwrap();
        assert!(close(f.weights.omega0, 32.0 / 45.0, 1e-14));
        assert!(close(f.weights.omega_axis[0], 2.0 / 45.0, 1e-14));
        assert!(close(f.rates.s2_diag_sq[0], 12.0 / 11.0, 1e-14));
        assert!(close(f.rates.s2_cross[0], 15.0 / 13.0, 1e-14));
        assert!(matches!(isotropic_closed_form(5.0 / 6.0, WD2, 2), Err(Error::Infeasible(Infeasibility::Pole { .. }))));
    }

    #[test]
    fn isotropic_closed_form_solves_general_system() {
        for &eps in &[0.1, 0.15, 0.2] {
            let f = isotropic_closed_form(eps, WD2, 2).unwrap();
            let disc = Discretization::new(0.1, 0.1).unwrap();
            let pde = PdeParams::new(vec![eps / disc.scaling_ratio(); 2], 0.0, 0.0).unwrap();
            let m = ModelParams::assemble(f, pde, disc).unwrap();
            assert!(m.residuals().max_abs() < 1e-13, "{eps}: {:?}", m.residuals());
        }
    }

    #[test]
    fn axis_closed_form() {
        let f = axis_lattice_closed_form(0.1, 0.0, 0.01, 2).unwrap();
        assert!(close(f.weights.omega0, 1.0 - 0.4 * 3f64.sqrt(), 1e-15));
        assert!(close(f.rates.s2_diag_sq[0], 4.0 * 3f64.sqrt() - 6.0, 1e-15));
        let err = axis_lattice_closed_form(0.2, 0.0, 0.01, 2).unwrap_err();
        match err {
            Error::Infeasible(Infeasibility::Weight { index: 0, value }) => {
                assert!(close(value, 1.0 - 0.8 * 3f64.sqrt(), 1e-15));
            }
            other => panic!("unexpected {other:?}"),
        }
        let near_zero = axis_lattice_closed_form(1e-9, 0.0, 0.01, 2).unwrap();
        assert!(near_zero.weights.omega0 > 1.0 - 1e-8);
    }

    #[test]
    fn anisotropy_checks() {
        let aniso = PdeParams::new(vec![0.25, 0.1], 0.0, 0.0).unwrap();
        assert!(matches!(anisotropic_axis_infeasibility(&aniso), Err(Error::Infeasible(Infeasibility::Anisotropic))));
        let iso = PdeParams::new(vec![0.1, 0.1], 0.0, 0.0).unwrap();
        assert!(anisotropic_axis_infeasibility(&iso).is_ok());
        let one = PdeParams::new(vec![0.3], 0.0, 0.0).unwrap();
        assert!(anisotropic_axis_infeasibility(&one).is_ok());
    }

    #[test]
    fn synthesize_routes() {
        let disc = Discretization::new(0.1, 0.1).unwrap();
        let aniso = PdeParams::new(vec![0.025, 0.01], 0.0, 0.0).unwrap();
        let err = synthesize(LatticeFamily::Axis, Method::General, &aniso, &disc, WD2, 1.0).unwrap_err();
        assert_eq!(err.to_string(), "infeasible: anisotropic");
        assert!(synthesize(LatticeFamily::Full, Method::IsotropicClosedForm, &aniso, &disc, WD2, 1.0).is_err());
        assert!(synthesize(LatticeFamily::Full, Method::General, &aniso, &disc, WD2, 1.0).is_ok());
        let iso = PdeParams::new(vec![0.01, 0.01], 0.0, 0.0).unwrap();
        let m = synthesize(LatticeFamily::Axis, Method::General, &iso, &disc, WD2, 1.0).unwrap();
        assert_eq!(m.q(), 5);
        assert!(m.residuals().max_abs() < 1e-13);
    }

    #[test]
    fn one_dimensional_model() {
        let m = model(&[0.1], 0.0, 0.025, WD2);
        assert_eq!(m.q(), 3);
        assert!(m.residuals().max_abs() < 1e-13);
    }

    #[test]
    fn csv_contains_expected_names() {
        let m = model(&[0.4, 0.1], 0.0, 0.025, WD2);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("name,value\n"));
        for name in ["omega_0", "omega_2", "s_x1", "s2_x1x2", "s3_x1x1x2", "s4_x1x1x2x2", "s_tilde_x2"] {
            assert!(text.lines().any(|l| l.starts_with(&format!("{name},"))), "{name}");
        }
        let omega2: f64 = text.lines().find_map(|l| l.strip_prefix("omega_2,")).unwrap().parse().unwrap();
        assert_eq!(omega2, m.weights.omega_axis[1]);
    }

    #[test]
    fn single_precision_axis_solve() {
        let sols = solve_axis(0.1f32, 1.0 / 36.0, 1.0, 2).unwrap();
        assert!((sols[1].s_tilde - 1.5).abs() < 1e-5);
    }
}
