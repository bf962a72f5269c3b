//! Stability structure check and von Neumann analysis.
//!
//! One step linearises to `f ↦ T̂ (I + J) f` with
//! `J = Λ(E − I) + η_f E`, where `E x = (Σ x) w` and `η_f = 2Δtη/(2 − Δtη)`.
//! The structure condition asks `J W` (with `W = diag(w)`) to be symmetric
//! negative semi-definite, which makes the one-step map a contraction in the
//! `W⁻¹`-weighted norm.

use std::io::{self, Write};

use num_complex::Complex;
use rayon::prelude::*;

use crate::lattice::{
    collision_matrix, pair_index, pairs, third_index, LatticeFamily, LatticeSpec, RelaxationSet, WeightSet,
};
use crate::linalg::{complex_eigenvalues, sym_eigenvalues, DenseMatrix};
use crate::params::{solve_pair, ModelParams};
use crate::{Error, Result, Scalar};

/// Default symmetry tolerance for `JW`.
pub const TOL_SYM: f64 = 1e-12;
/// Default tolerance on the largest eigenvalue of the symmetrised `JW`.
pub const TOL_NEG: f64 = 1e-12;
/// Slack on the spectral radius bound.
pub const TOL_MODULUS: f64 = 1e-10;
const UNIT_CIRCLE_BAND: f64 = 1e-9;
const CLUSTER_DISTANCE: f64 = 1e-7;

/// Default scan resolution per axis.
pub fn default_resolution(d: usize) -> usize {
    match d {
        0..=2 => 64,
        3 => 32,
        _ => 16,
    }
}

#[derive(Debug, Clone)]
pub struct JacobianBundle<T> {
    pub j: DenseMatrix<T>,
    /// Expanded weights (diagonal of `W`).
    pub w: Vec<T>,
    pub e: DenseMatrix<T>,
    pub eta_factor: T,
}

/// `2Δtη / (2 − Δtη)`.
pub fn eta_factor<T: Scalar>(eta: T, dt: T) -> Result<T> {
    let a = eta * dt;
    let two = T::lit(2.0);
    if a == two {
        return Err(Error::DegenerateSource);
    }
    Ok(two * a / (two - a))
}

/// Builds `J` from its ingredients; the constant source does not enter.
pub fn jacobian_from_parts<T: Scalar>(
    lattice: &LatticeSpec<T>,
    weights: &WeightSet<T>,
    rates: &RelaxationSet<T>,
    eta: T,
    dt: T,
) -> Result<JacobianBundle<T>> {
    let eta_f = eta_factor(eta, dt)?;
    let q = lattice.q();
    let w = weights.expand(lattice);
    let mut e = DenseMatrix::zeros(q, q);
    for k in 0..q {
        for l in 0..q {
            e[(k, l)] = w[k];
        }
    }
    let lambda = collision_matrix(lattice, rates)?;
    let j = lambda.matmul(&e.sub(&DenseMatrix::identity(q))).add(&e.scale(eta_f));
    Ok(JacobianBundle { j, w, e, eta_factor: eta_f })
}

pub fn build_jacobian<T: Scalar>(model: &ModelParams<T>) -> Result<JacobianBundle<T>> {
    jacobian_from_parts(&model.lattice, &model.weights, &model.rates, model.pde.eta, model.disc.dt)
}

/// Outcome of the structure check.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport<T> {
    pub jw_asymmetry: T,
    /// Largest eigenvalue of `W^{-1/2}(JW)W^{-1/2}`; `+∞` if some weight is
    /// not positive.
    pub jw_eigen_max: T,
    pub rate_ranges_ok: bool,
    pub structure_ok: bool,
}

/// Rates in (0, 2) plus the ties that make `JW` symmetric.
pub fn rate_ranges_ok<T: Scalar>(d: usize, family: LatticeFamily, rates: &RelaxationSet<T>) -> bool {
    if !rates.is_admissible() {
        return false;
    }
    if family == LatticeFamily::Axis {
        return true;
    }
    let same = |a: T, b: T| (a - b).abs() <= T::lit(TOL_SYM) * T::one().max(a.abs());
    for sq in 0..d {
        for lin in (0..d).filter(|&l| l != sq) {
            if !same(rates.s3[third_index(d, sq, lin)], rates.s_axis[lin]) {
                return false;
            }
        }
    }
    pairs(d).all(|(i, j)| {
        let s4 = rates.s4[pair_index(d, i, j)];
        same(s4, rates.s2_diag_sq[i]) && same(s4, rates.s2_diag_sq[j])
    })
}

pub fn check_structure_with<T: Scalar>(
    lattice: &LatticeSpec<T>,
    rates: &RelaxationSet<T>,
    bundle: &JacobianBundle<T>,
    tol_sym: T,
    tol_neg: T,
) -> Result<StructureReport<T>> {
    let q = lattice.q();
    let jw = bundle.j.matmul(&DenseMatrix::from_diagonal(&bundle.w));
    let mut asym = T::zero();
    for a in 0..q {
        for b in a + 1..q {
            asym = asym.max((jw[(a, b)] - jw[(b, a)]).abs());
        }
    }
    let eigen_max = if bundle.w.iter().all(|&w| w > T::zero()) {
        let inv_sqrt: Vec<T> = bundle.w.iter().map(|w| T::one() / w.sqrt()).collect();
        let mut sym = jw.clone();
        for a in 0..q {
            for b in 0..q {
                sym[(a, b)] = inv_sqrt[a] * jw[(a, b)] * inv_sqrt[b];
            }
        }
        sym_eigenvalues(&sym)?.last().copied().unwrap_or(T::zero())
    } else {
        T::infinity()
    };
    let ranges = rate_ranges_ok(lattice.d(), lattice.family(), rates);
    // the conserved mode carries eigenvalue η_f, which may be positive
    let neg_bound = tol_neg + bundle.eta_factor.max(T::zero());
    Ok(StructureReport {
        jw_asymmetry: asym,
        jw_eigen_max: eigen_max,
        rate_ranges_ok: ranges,
        structure_ok: asym < tol_sym && eigen_max <= neg_bound && ranges,
    })
}

pub fn check_structure<T: Scalar>(model: &ModelParams<T>, tol_sym: T, tol_neg: T) -> Result<StructureReport<T>> {
    let bundle = build_jacobian(model)?;
    check_structure_with(&model.lattice, &model.rates, &bundle, tol_sym, tol_neg)
}

/// `G = diag(exp(−i e_k·k)) (I + J)`.
pub fn amplification_from<T: Scalar>(
    lattice: &LatticeSpec<T>,
    bundle: &JacobianBundle<T>,
    wavevector: &[T],
) -> DenseMatrix<Complex<T>> {
    let q = lattice.q();
    let mut g = DenseMatrix::zeros(q, q);
    for (k, v) in lattice.velocities().iter().enumerate() {
        let phase: T = v.iter().zip(wavevector).map(|(&c, &kk)| T::lit(f64::from(c)) * kk).sum();
        let shift = Complex::from_polar(T::one(), -phase);
        for l in 0..q {
            let id = if k == l { T::one() } else { T::zero() };
            g[(k, l)] = shift * (id + bundle.j[(k, l)]);
        }
    }
    g
}

pub fn amplification<T: Scalar>(model: &ModelParams<T>, wavevector: &[T]) -> Result<DenseMatrix<Complex<T>>> {
    if wavevector.len() != model.d() {
        return Err(Error::Config(format!("wavevector has {} components, expected {}", wavevector.len(), model.d())));
    }
    Ok(amplification_from(&model.lattice, &build_jacobian(model)?, wavevector))
}

/// Outcome of a von Neumann scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanReport<T> {
    pub vn_max_modulus: T,
    pub vn_simple_roots: bool,
    pub scan_resolution: usize,
    /// Spectral radius bound `1 + max(0, η_f)` (plus slack) respected and all
    /// unit-circle roots simple.
    pub vn_ok: bool,
}

/// Eigenvalues of modulus ≥ 1 − band must be pairwise separated.
fn unit_roots_simple<T: Scalar>(mut ev: Vec<Complex<T>>, exempt: Option<Complex<T>>) -> bool {
    if let Some(target) = exempt {
        if let Some((idx, _)) = ev.iter().enumerate().min_by(|a, b| {
            (a.1 - target).norm().partial_cmp(&(b.1 - target).norm()).unwrap_or(std::cmp::Ordering::Equal)
        }) {
            ev.swap_remove(idx);
        }
    }
    let band = T::one() - T::lit(UNIT_CIRCLE_BAND);
    let on_circle: Vec<_> = ev.into_iter().filter(|z| z.norm() >= band).collect();
    for a in 0..on_circle.len() {
        for b in a + 1..on_circle.len() {
            if (on_circle[a] - on_circle[b]).norm() < T::lit(CLUSTER_DISTANCE) {
                return false;
            }
        }
    }
    true
}

/// Scans wavevectors `2π m / resolution` (m = 0..resolution per axis).
pub fn scan_bundle<T: Scalar>(
    lattice: &LatticeSpec<T>,
    bundle: &JacobianBundle<T>,
    resolution: usize,
) -> Result<ScanReport<T>> {
    if resolution == 0 {
        return Err(Error::Config("scan resolution must be positive".into()));
    }
    let d = lattice.d();
    let total = resolution.pow(d as u32);
    let two_pi = T::PI() + T::PI();
    let conserved = Complex::new(T::one() + bundle.eta_factor, T::zero());
    let (max_mod, simple) = (0..total)
        .into_par_iter()
        .map(|mut idx| -> Result<(T, bool)> {
            let mut kv = Vec::with_capacity(d);
            let mut zero = true;
            for _ in 0..d {
                let m = idx % resolution;
                idx /= resolution;
                zero &= m == 0;
                kv.push(two_pi * T::from_usize_lossy(m) / T::from_usize_lossy(resolution));
            }
            let g = amplification_from(lattice, bundle, &kv);
            let ev = complex_eigenvalues(&g)?;
            let max = ev.iter().fold(T::zero(), |m, z| m.max(z.norm()));
            Ok((max, unit_roots_simple(ev, zero.then_some(conserved))))
        })
        .try_reduce(|| (T::zero(), true), |a, b| Ok((a.0.max(b.0), a.1 && b.1)))?;
    let bound = T::one() + bundle.eta_factor.max(T::zero()) + T::lit(TOL_MODULUS);
    Ok(ScanReport {
        vn_max_modulus: max_mod,
        vn_simple_roots: simple,
        scan_resolution: resolution,
        vn_ok: max_mod <= bound && simple,
    })
}

pub fn von_neumann_scan<T: Scalar>(model: &ModelParams<T>, resolution: usize) -> Result<ScanReport<T>> {
    scan_bundle(&model.lattice, &build_jacobian(model)?, resolution)
}

/// Structure check and scan together.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport<T> {
    pub structure: StructureReport<T>,
    pub scan: ScanReport<T>,
}

impl<T: Scalar> StabilityReport<T> {
    pub fn stable(&self) -> bool {
        self.structure.structure_ok && self.scan.vn_ok
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let num = |v: T| format!("{v:.16e}");
        let flag = |b: bool| if b { "1" } else { "0" };
        writeln!(w, "name,value")?;
        writeln!(w, "jw_asymmetry,{}", num(self.structure.jw_asymmetry))?;
        writeln!(w, "jw_eigen_max,{}", num(self.structure.jw_eigen_max))?;
        writeln!(w, "rate_ranges_ok,{}", flag(self.structure.rate_ranges_ok))?;
        writeln!(w, "structure_ok,{}", flag(self.structure.structure_ok))?;
        writeln!(w, "vn_max_modulus,{}", num(self.scan.vn_max_modulus))?;
        writeln!(w, "vn_simple_roots,{}", flag(self.scan.vn_simple_roots))?;
        writeln!(w, "scan_resolution,{}", self.scan.scan_resolution)?;
        writeln!(w, "stable,{}", flag(self.stable()))
    }
}

pub fn analyze<T: Scalar>(model: &ModelParams<T>, resolution: usize) -> Result<StabilityReport<T>> {
    let bundle = build_jacobian(model)?;
    let structure = check_structure_with(&model.lattice, &model.rates, &bundle, T::lit(TOL_SYM), T::lit(TOL_NEG))?;
    let scan = scan_bundle(&model.lattice, &bundle, resolution)?;
    Ok(StabilityReport { structure, scan })
}

/// Axis of a raster: `n` cell-centred samples on `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridAxis<T> {
    pub min: T,
    pub max: T,
    pub n: usize,
}

impl<T: Scalar> GridAxis<T> {
    pub fn new(min: T, max: T, n: usize) -> Result<Self> {
        if n == 0 || !(max >= min) {
            return Err(Error::Config(format!("invalid grid axis [{min}, {max}] with {n} points")));
        }
        Ok(Self { min, max, n })
    }

    pub fn point(&self, i: usize) -> T {
        self.min + (self.max - self.min) * (T::from_usize_lossy(i) + T::lit(0.5)) / T::from_usize_lossy(self.n)
    }
}

/// Verdicts on a 2-D parameter grid, `x` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub nx: usize,
    pub ny: usize,
    pub points: Vec<(T, T, bool)>,
}

impl<T: Scalar> Raster<T> {
    fn build(x: GridAxis<T>, y: GridAxis<T>, verdict: impl Fn(T, T) -> Result<bool> + Sync) -> Result<Self> {
        let points = (0..x.n * y.n)
            .into_par_iter()
            .map(|idx| {
                let (px, py) = (x.point(idx % x.n), y.point(idx / x.n));
                Ok((px, py, verdict(px, py)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nx: x.n, ny: y.n, points })
    }

    pub fn count(&self) -> usize {
        self.points.iter().filter(|p| p.2).count()
    }

    /// True when every point marked here is also marked in `other`.
    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.points.len() == other.points.len() && self.points.iter().zip(&other.points).all(|(a, b)| !a.2 || b.2)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,verdict")?;
        for (x, y, v) in &self.points {
            writeln!(w, "{x:.16e},{y:.16e},{}", u8::from(*v))?;
        }
        Ok(())
    }
}

/// Rates held fixed while the weights vary in a stability-region scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedRates<T> {
    pub s_axis: T,
    pub s2_axis: T,
    pub s_cross: T,
}

impl FixedRates<f64> {
    pub const DEFAULT: Self = Self { s_axis: 1.5, s2_axis: 1.2, s_cross: 0.8 };
}

/// Von Neumann verdicts over `(ω_1, ω_2)` for the Full family with η = 0.
/// Axes beyond the second share ω_2. Rates obey the structure ties.
pub fn stability_region<T: Scalar>(
    d: usize,
    omega_tilde: T,
    rates: FixedRates<T>,
    x: GridAxis<T>,
    y: GridAxis<T>,
    resolution: usize,
) -> Result<Raster<T>> {
    if d < 2 {
        return Err(Error::Config("stability regions need at least two dimensions".into()));
    }
    let lattice = crate::lattice::build_lattice::<T>(d, LatticeFamily::Full)?;
    let set = RelaxationSet::tied(
        LatticeFamily::Full,
        T::one(),
        vec![rates.s_axis; d],
        rates.s2_axis,
        vec![rates.s_cross; d * (d - 1) / 2],
    );
    Raster::build(x, y, |wx, wy| {
        let mut omega = vec![wy; d];
        omega[0] = wx;
        let weights = WeightSet::new(LatticeFamily::Full, omega, omega_tilde);
        let bundle = jacobian_from_parts(&lattice, &weights, &set, T::zero(), T::one())?;
        Ok(scan_bundle(&lattice, &bundle, resolution)?.vn_ok)
    })
}

/// Feasibility of the pair conditions over `(ε̃_1, ε̃_2)`.
pub fn solvability_region<T: Scalar>(
    d: usize,
    omega_tilde: T,
    s2_axis: T,
    eta: T,
    dt: T,
    x: GridAxis<T>,
    y: GridAxis<T>,
) -> Result<Raster<T>> {
    if !(x.min > T::zero() && y.min > T::zero()) {
        return Err(Error::Config("solvability grid bounds must be positive".into()));
    }
    Raster::build(x, y, |ex, ey| match solve_pair(ex, ey, omega_tilde, s2_axis, d, eta, dt) {
        Ok(_) => Ok(true),
        Err(Error::Infeasible(_) | Error::InfeasibleCorrection { .. }) => Ok(false),
        Err(e) => Err(e),
    })
}
