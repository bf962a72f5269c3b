//! Velocity sets, moment bases and relaxation/weight vectors.
//!
//! Two families are supported: `Full` (rest, axis and planar-diagonal
//! velocities, q = 2d²+1) and `Axis` (rest and axis velocities, q = 2d+1).
//! Everything downstream relies on the canonical orderings produced here.

use std::fmt;
use std::io::{self, Write};

use crate::linalg::{lu_invert, DenseMatrix};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeFamily {
    Full,
    Axis,
}

impl LatticeFamily {
    pub fn population_count(self, d: usize) -> usize {
        match self {
            Self::Full => 2 * d * d + 1,
            Self::Axis => 2 * d + 1,
        }
    }
}

impl fmt::Display for LatticeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Full => "full",
            Self::Axis => "axis",
        })
    }
}

impl std::str::FromStr for LatticeFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Self::Full),
            "axis" => Ok(Self::Axis),
            other => Err(Error::Config(format!("unknown lattice family `{other}` (expected full or axis)"))),
        }
    }
}

/// What a row of `M` represents; axes are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MomentRole {
    /// Polynomial 1.
    Conserved,
    /// X_i.
    Axis(usize),
    /// X_i².
    DiagSq(usize),
    /// X_i X_j, i < j.
    Cross(usize, usize),
    /// X_sq² X_lin.
    Third { sq: usize, lin: usize },
    /// X_i² X_j², i < j.
    Fourth(usize, usize),
}

/// Index of the pair (i, j), i < j, in lexicographic order.
pub fn pair_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < d);
    i * d - i * (i + 1) / 2 + (j - i - 1)
}

/// All pairs (i, j), i < j, in lexicographic order.
pub fn pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (i + 1..d).map(move |j| (i, j)))
}

/// Index of the third-order rate `s_{3|x_sq² x_lin}`.
pub fn third_index(d: usize, sq: usize, lin: usize) -> usize {
    debug_assert!(sq != lin);
    sq * (d - 1) + if lin < sq { lin } else { lin - 1 }
}

#[derive(Debug, Clone)]
pub struct LatticeSpec<T> {
    d: usize,
    family: LatticeFamily,
    velocities: Vec<Vec<i32>>,
    exponents: Vec<Vec<u32>>,
    roles: Vec<MomentRole>,
    m: DenseMatrix<T>,
    m_inv: DenseMatrix<T>,
}

impl<T: Scalar> LatticeSpec<T> {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn family(&self) -> LatticeFamily {
        self.family
    }

    pub fn q(&self) -> usize {
        self.velocities.len()
    }

    pub fn velocities(&self) -> &[Vec<i32>] {
        &self.velocities
    }

    pub fn poly_exponents(&self) -> &[Vec<u32>] {
        &self.exponents
    }

    pub fn roles(&self) -> &[MomentRole] {
        &self.roles
    }

    pub fn m(&self) -> &DenseMatrix<T> {
        &self.m
    }

    pub fn m_inv(&self) -> &DenseMatrix<T> {
        &self.m_inv
    }

    /// Row of `M` holding the polynomial with the given exponents, if any.
    pub fn row_of(&self, exponents: &[u32]) -> Option<usize> {
        self.exponents.iter().position(|e| e.as_slice() == exponents)
    }

    /// Writes `M` as CSV, one matrix row per line.
    pub fn write_m_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in 0..self.q() {
            let line: Vec<String> = self.m.row(r).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn unit(d: usize, axis: usize, sign: i32) -> Vec<i32> {
    let mut v = vec![0; d];
    v[axis] = sign;
    v
}

fn monomial(d: usize, powers: &[(usize, u32)]) -> Vec<u32> {
    let mut e = vec![0; d];
    for &(axis, p) in powers {
        e[axis] = p;
    }
    e
}

/// Builds the velocity set, polynomial basis and transformation matrix.
pub fn build_lattice<T: Scalar>(d: usize, family: LatticeFamily) -> Result<LatticeSpec<T>> {
    if d == 0 {
        return Err(Error::Config("lattice dimension must be at least 1".into()));
    }
    let mut velocities = vec![vec![0; d]];
    velocities.extend((0..d).map(|i| unit(d, i, 1)));
    velocities.extend((0..d).map(|i| unit(d, i, -1)));

    let mut exponents = vec![vec![0; d]];
    let mut roles = vec![MomentRole::Conserved];
    for i in 0..d {
        exponents.push(monomial(d, &[(i, 1)]));
        roles.push(MomentRole::Axis(i));
    }
    for i in 0..d {
        exponents.push(monomial(d, &[(i, 2)]));
        roles.push(MomentRole::DiagSq(i));
    }

    if family == LatticeFamily::Full {
        for (i, j) in pairs(d) {
            for (si, sj) in [(1, 1), (-1, 1), (-1, -1), (1, -1)] {
                let mut v = vec![0; d];
                v[i] = si;
                v[j] = sj;
                velocities.push(v);
            }
        }
        for (i, j) in pairs(d) {
            exponents.push(monomial(d, &[(i, 1), (j, 1)]));
            roles.push(MomentRole::Cross(i, j));
        }
        for sq in 0..d {
            for lin in (0..d).filter(|&l| l != sq) {
                exponents.push(monomial(d, &[(sq, 2), (lin, 1)]));
                roles.push(MomentRole::Third { sq, lin });
            }
        }
        for (i, j) in pairs(d) {
            exponents.push(monomial(d, &[(i, 2), (j, 2)]));
            roles.push(MomentRole::Fourth(i, j));
        }
    }

    let q = velocities.len();
    debug_assert_eq!(q, family.population_count(d));
    debug_assert_eq!(exponents.len(), q);
    let mut m = DenseMatrix::zeros(q, q);
    for (r, e) in exponents.iter().enumerate() {
        for (k, v) in velocities.iter().enumerate() {
            let val: i32 = v.iter().zip(e).map(|(c, p)| c.pow(*p)).product();
            m[(r, k)] = T::lit(f64::from(val));
        }
    }
    let m_inv = lu_invert(&m)?;
    Ok(LatticeSpec { d, family, velocities, exponents, roles, m, m_inv })
}

/// Weight coefficients: rest, one per axis (shared by ±), one shared diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet<T> {
    pub omega0: T,
    pub omega_axis: Vec<T>,
    /// ω̃; zero for the Axis family.
    pub omega_diag: T,
}

impl<T: Scalar> WeightSet<T> {
    /// Builds the set with ω_0 fixed by normalisation.
    pub fn new(family: LatticeFamily, omega_axis: Vec<T>, omega_diag: T) -> Self {
        let d = omega_axis.len();
        let two = T::lit(2.0);
        let axis_sum: T = omega_axis.iter().copied().sum();
        let (omega0, omega_diag) = match family {
            LatticeFamily::Full => {
                (T::one() - two * axis_sum - two * T::from_usize_lossy(d * (d - 1)) * omega_diag, omega_diag)
            }
            LatticeFamily::Axis => (T::one() - two * axis_sum, T::zero()),
        };
        Self { omega0, omega_axis, omega_diag }
    }

    /// Weight per population in canonical velocity order.
    pub fn expand(&self, spec: &LatticeSpec<T>) -> Vec<T> {
        let d = spec.d();
        let mut w = Vec::with_capacity(spec.q());
        w.push(self.omega0);
        w.extend_from_slice(&self.omega_axis);
        w.extend_from_slice(&self.omega_axis);
        w.resize(spec.q(), self.omega_diag);
        debug_assert_eq!(self.omega_axis.len(), d);
        w
    }

    /// True when every expanded weight lies strictly inside (0, 1).
    pub fn all_in_unit_interval(&self, spec: &LatticeSpec<T>) -> bool {
        self.expand(spec).iter().all(|&w| w > T::zero() && w < T::one())
    }
}

/// Relaxation rates grouped by moment role.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSet<T> {
    pub s0: T,
    pub s_axis: Vec<T>,
    pub s2_diag_sq: Vec<T>,
    /// Lexicographic pairs (i < j); empty for the Axis family.
    pub s2_cross: Vec<T>,
    /// Indexed by [`third_index`]; empty for the Axis family.
    pub s3: Vec<T>,
    /// Lexicographic pairs; empty for the Axis family.
    pub s4: Vec<T>,
}

impl<T: Scalar> RelaxationSet<T> {
    pub fn uniform(d: usize, family: LatticeFamily, s: T) -> Self {
        let np = d * (d - 1) / 2;
        let full = family == LatticeFamily::Full;
        Self {
            s0: s,
            s_axis: vec![s; d],
            s2_diag_sq: vec![s; d],
            s2_cross: if full { vec![s; np] } else { Vec::new() },
            s3: if full { vec![s; 2 * np] } else { Vec::new() },
            s4: if full { vec![s; np] } else { Vec::new() },
        }
    }

    /// Rates obeying the stability-structure ties: a single second-moment
    /// rate on the axes, `s_{3|x_i²x_j} = s_{x_j}` and `s_{4|x_i²x_j²} = s2`.
    pub fn tied(family: LatticeFamily, s0: T, s_axis: Vec<T>, s2_axis: T, s2_cross: Vec<T>) -> Self {
        let d = s_axis.len();
        let mut set =
            Self { s0, s2_diag_sq: vec![s2_axis; d], s2_cross: Vec::new(), s3: Vec::new(), s4: Vec::new(), s_axis };
        if family == LatticeFamily::Full {
            set.s2_cross = s2_cross;
            set.s3 = vec![T::zero(); d * d.saturating_sub(1)];
            for sq in 0..d {
                for lin in (0..d).filter(|&l| l != sq) {
                    set.s3[third_index(d, sq, lin)] = set.s_axis[lin];
                }
            }
            set.s4 = vec![s2_axis; d * (d - 1) / 2];
        }
        set
    }

    /// Rate attached to a moment role.
    pub fn rate(&self, d: usize, role: MomentRole) -> T {
        match role {
            MomentRole::Conserved => self.s0,
            MomentRole::Axis(i) => self.s_axis[i],
            MomentRole::DiagSq(i) => self.s2_diag_sq[i],
            MomentRole::Cross(i, j) => self.s2_cross[pair_index(d, i, j)],
            MomentRole::Third { sq, lin } => self.s3[third_index(d, sq, lin)],
            MomentRole::Fourth(i, j) => self.s4[pair_index(d, i, j)],
        }
    }

    /// All rates except `s0`.
    pub fn non_conserved(&self) -> impl Iterator<Item = T> + '_ {
        self.s_axis.iter().chain(&self.s2_diag_sq).chain(&self.s2_cross).chain(&self.s3).chain(&self.s4).copied()
    }

    /// Non-conserved rates in (0, 2) and `s0 ≠ 0`.
    pub fn is_admissible(&self) -> bool {
        let two = T::lit(2.0);
        self.s0 != T::zero() && self.non_conserved().all(|s| s > T::zero() && s < two)
    }
}

/// Diagonal of `S` aligned with the rows of `M`.
pub fn expand_relaxation<T: Scalar>(spec: &LatticeSpec<T>, rates: &RelaxationSet<T>) -> Result<Vec<T>> {
    let d = spec.d();
    let np = d * (d - 1) / 2;
    let (nc, n3, n4) = match spec.family() {
        LatticeFamily::Full => (np, 2 * np, np),
        LatticeFamily::Axis => (0, 0, 0),
    };
    if rates.s_axis.len() != d
        || rates.s2_diag_sq.len() != d
        || rates.s2_cross.len() != nc
        || rates.s3.len() != n3
        || rates.s4.len() != n4
    {
        return Err(Error::Config(format!(
            "relaxation set does not match a {} lattice in {d} dimensions",
            spec.family()
        )));
    }
    Ok(spec.roles().iter().map(|&role| rates.rate(d, role)).collect())
}

/// Collision matrix `Λ = M⁻¹ S M`.
pub fn collision_matrix<T: Scalar>(spec: &LatticeSpec<T>, rates: &RelaxationSet<T>) -> Result<DenseMatrix<T>> {
    let s = expand_relaxation(spec, rates)?;
    let mut sm = spec.m().clone();
    for (r, &sr) in s.iter().enumerate() {
        for c in 0..spec.q() {
            sm[(r, c)] *= sr;
        }
    }
    Ok(spec.m_inv().matmul(&sm))
}

/// `Σ_k (∏_l e_{k,l}^{n_l}) ω_k` over all populations.
pub fn weight_moment<T: Scalar>(spec: &LatticeSpec<T>, weights: &WeightSet<T>, exponents: &[u32]) -> Result<T> {
    if exponents.len() != spec.d() {
        return Err(Error::Config(format!("moment exponents have length {}, expected {}", exponents.len(), spec.d())));
    }
    let w = weights.expand(spec);
    Ok(spec
        .velocities()
        .iter()
        .zip(&w)
        .map(|(v, &wk)| {
            let p: i32 = v.iter().zip(exponents).map(|(c, n)| c.pow(*n)).product();
            T::lit(f64::from(p)) * wk
        })
        .sum())
}

/// Relaxation rate felt by an arbitrary monomial moment.
///
/// On velocities with components in {−1, 0, 1} any monomial coincides with a
/// basis polynomial after reducing odd powers to 1 and even positive powers
/// to 2; it relaxes at that polynomial's rate. Monomials that vanish on every
/// velocity (e.g. three distinct axes) relax at an arbitrary rate, reported as 1.
pub fn aliased_rate<T: Scalar>(spec: &LatticeSpec<T>, rates: &RelaxationSet<T>, exponents: &[u32]) -> T {
    let reduced: Vec<u32> = exponents
        .iter()
        .map(|&n| match n {
            0 => 0,
            n if n % 2 == 1 => 1,
            _ => 2,
        })
        .collect();
    match spec.row_of(&reduced) {
        Some(r) => rates.rate(spec.d(), spec.roles()[r]),
        None => T::one(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn full(d: usize) -> LatticeSpec<f64> {
        build_lattice(d, LatticeFamily::Full).unwrap()
    }

    #[test]
    fn d2_full_velocity_listing() {
        let spec = full(2);
        let expected = [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]];
        assert_eq!(spec.q(), 9);
        for (v, e) in spec.velocities().iter().zip(expected) {
            assert_eq!(v.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn d2_axis_velocity_listing() {
        let spec = build_lattice::<f64>(2, LatticeFamily::Axis).unwrap();
        let expected = [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1]];
        assert_eq!(spec.q(), 5);
        for (v, e) in spec.velocities().iter().zip(expected) {
            assert_eq!(v.as_slice(), e.as_slice());
        }
    }

    #[test]
    fn d3_full_ordering() {
        let spec = full(3);
        assert_eq!(spec.q(), 19);
        let v = spec.velocities();
        assert_eq!(v[7], vec![1, 1, 0]);
        assert_eq!(v[11], vec![1, 0, 1]);
        assert_eq!(v[13], vec![-1, 0, -1]);
        assert_eq!(v[15], vec![0, 1, 1]);
        assert_eq!(v[18], vec![0, 1, -1]);
        // third-order moments: x1²x2, x1²x3, x2²x1, x2²x3, x3²x1, x3²x2
        let thirds: Vec<_> = spec.poly_exponents()[10..16].to_vec();
        assert_eq!(
            thirds,
            vec![vec![2, 1, 0], vec![2, 0, 1], vec![1, 2, 0], vec![0, 2, 1], vec![1, 0, 2], vec![0, 1, 2]]
        );
        assert_eq!(spec.poly_exponents()[16..], [vec![2, 2, 0], vec![2, 0, 2], vec![0, 2, 2]]);
    }

    #[test]
    fn d4_full_is_invertible() {
        let spec = full(4);
        assert_eq!(spec.q(), 33);
        let prod = spec.m().matmul(spec.m_inv());
        assert!(prod.max_abs_diff(&DenseMatrix::identity(33)) < 1e-12);
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(build_lattice::<f64>(0, LatticeFamily::Full).is_err());
    }

    #[test]
    fn d2_weight_moments() {
        let spec = full(2);
        let w = WeightSet::new(LatticeFamily::Full, vec![1.0 / 9.0; 2], 1.0 / 36.0);
        assert!((weight_moment(&spec, &w, &[2, 0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((weight_moment(&spec, &w, &[2, 2]).unwrap() - 4.0 / 36.0).abs() < 1e-15);
        assert_eq!(weight_moment(&spec, &w, &[1, 2]).unwrap(), 0.0);
        assert!(weight_moment(&spec, &w, &[1]).is_err());
    }

    #[test]
    fn d1_expand_relaxation() {
        let spec = full(1);
        let mut r = RelaxationSet::uniform(1, LatticeFamily::Full, 1.0);
        r.s_axis[0] = 1.5;
        assert_eq!(expand_relaxation(&spec, &r).unwrap(), vec![1.0, 1.5, 1.0]);
    }

    #[test]
    fn d2_expand_relaxation_order() {
        let spec = full(2);
        let r = RelaxationSet {
            s0: 1.0,
            s_axis: vec![2.0, 3.0],
            s2_diag_sq: vec![4.0, 5.0],
            s2_cross: vec![6.0],
            s3: vec![7.0, 8.0],
            s4: vec![9.0],
        };
        assert_eq!(expand_relaxation(&spec, &r).unwrap(), (1..=9).map(f64::from).collect::<Vec<_>>());
        let axis = build_lattice::<f64>(2, LatticeFamily::Axis).unwrap();
        assert!(expand_relaxation(&axis, &r).is_err());
    }

    #[test]
    fn tied_rates_follow_structure() {
        let r = RelaxationSet::tied(LatticeFamily::Full, 1.0, vec![0.5, 1.5, 1.2], 0.9, vec![1.1, 1.2, 1.3]);
        assert_eq!(r.s3[third_index(3, 0, 1)], 1.5);
        assert_eq!(r.s3[third_index(3, 2, 0)], 0.5);
        assert_eq!(r.s4, vec![0.9; 3]);
        assert_eq!(r.s2_diag_sq, vec![0.9; 3]);
    }

    #[test]
    fn uniform_rates_give_scaled_identity() {
        for d in 1..=3 {
            let spec = full(d);
            let lam = collision_matrix(&spec, &RelaxationSet::uniform(d, LatticeFamily::Full, 1.3)).unwrap();
            assert!(lam.max_abs_diff(&DenseMatrix::identity(spec.q()).scale(1.3)) < 1e-12);
        }
    }

    #[test]
    fn d1_collision_matrix_by_hand() {
        // velocities 0, +1, -1; rows 1, X, X²
        let spec = full(1);
        let mut r = RelaxationSet::uniform(1, LatticeFamily::Full, 1.0);
        r.s_axis[0] = 1.5;
        let lam = collision_matrix(&spec, &r).unwrap();
        // Λ = I + 0.5 * M⁻¹ e₁ e₁ᵀ M; M⁻¹ column 1 = (0, 1/2, -1/2), M row 1 = (0, 1, -1)
        let expected =
            DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.25, -0.25], vec![0.0, -0.25, 1.25]]).unwrap();
        assert!(lam.max_abs_diff(&expected) < 1e-14);
        // the constant vector is an eigenvector with eigenvalue s0
        let ones = lam.matvec(&[1.0, 1.0, 1.0]);
        assert!(ones.iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    fn distinct_rates(d: usize, family: LatticeFamily) -> RelaxationSet<f64> {
        let mut next = 0.3;
        let mut gen = || {
            next += 0.037;
            next
        };
        let np = d * (d - 1) / 2;
        let full = family == LatticeFamily::Full;
        RelaxationSet {
            s0: 1.0,
            s_axis: (0..d).map(|_| gen()).collect(),
            s2_diag_sq: (0..d).map(|_| gen()).collect(),
            s2_cross: if full { (0..np).map(|_| gen()).collect() } else { vec![] },
            s3: if full { (0..2 * np).map(|_| gen()).collect() } else { vec![] },
            s4: if full { (0..np).map(|_| gen()).collect() } else { vec![] },
        }
    }

    fn all_monomials(d: usize, max_degree: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..d {
            out = out
                .into_iter()
                .flat_map(|e: Vec<u32>| {
                    (0..=max_degree).map(move |p| {
                        let mut e = e.clone();
                        e.push(p);
                        e
                    })
                })
                .collect();
        }
        out.retain(|e| e.iter().sum::<u32>() <= max_degree);
        out
    }

    #[test]
    fn aliasing_identities_up_to_fourth_order() {
        for family in [LatticeFamily::Full, LatticeFamily::Axis] {
            for d in 1..=3 {
                let spec = build_lattice::<f64>(d, family).unwrap();
                let rates = distinct_rates(d, family);
                let lam = collision_matrix(&spec, &rates).unwrap();
                for n in all_monomials(d, 4) {
                    let p: Vec<f64> = spec
                        .velocities()
                        .iter()
                        .map(|v| v.iter().zip(&n).map(|(c, e)| f64::from(c.pow(*e))).product())
                        .collect();
                    let s = aliased_rate(&spec, &rates, &n);
                    for i in 0..spec.q() {
                        let lhs: f64 = (0..spec.q()).map(|k| p[k] * lam[(k, i)]).sum();
                        assert!((lhs - s * p[i]).abs() < 1e-12, "{family} d={d} n={n:?} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn specific_aliasing_cases() {
        let spec = full(3);
        let rates = distinct_rates(3, LatticeFamily::Full);
        // x³ aliases to x, x³y to xy, xyz vanishes
        assert_eq!(aliased_rate(&spec, &rates, &[3, 0, 0]), rates.s_axis[0]);
        assert_eq!(aliased_rate(&spec, &rates, &[3, 1, 0]), rates.s2_cross[0]);
        assert_eq!(aliased_rate(&spec, &rates, &[1, 1, 1]), 1.0);
        assert_eq!(aliased_rate(&spec, &rates, &[4, 0, 0]), rates.s2_diag_sq[0]);
    }

    #[test]
    fn m_csv_dump() {
        let spec = full(1);
        let mut buf = Vec::new();
        spec.write_m_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,1,1\n0,1,-1\n0,1,1\n");
    }

    #[test]
    fn works_in_single_precision() {
        let spec = build_lattice::<f32>(2, LatticeFamily::Full).unwrap();
        let prod = spec.m().matmul(spec.m_inv());
        assert!(prod.max_abs_diff(&DenseMatrix::identity(9)) < 1e-5);
    }

    proptest! {
        #[test]
        fn expanded_weights_sum_to_one(
            d in 1usize..=4,
            axis in proptest::collection::vec(0.0f64..0.2, 4),
            diag in 0.0f64..0.05,
            full_family in any::<bool>(),
        ) {
            let family = if full_family { LatticeFamily::Full } else { LatticeFamily::Axis };
            let spec = build_lattice::<f64>(d, family).unwrap();
            let w = WeightSet::new(family, axis[..d].to_vec(), diag);
            let sum: f64 = w.expand(&spec).iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-14);
        }

        #[test]
        fn odd_weight_moments_vanish(d in 1usize..=3, n in proptest::collection::vec(0u32..4, 3)) {
            let spec = full(d);
            let w = WeightSet::new(LatticeFamily::Full, vec![0.1; d], 0.01);
            let n = &n[..d];
            if n.iter().any(|e| e % 2 == 1) {
                prop_assert_eq!(weight_moment(&spec, &w, n).unwrap(), 0.0);
            }
        }
    }
}
