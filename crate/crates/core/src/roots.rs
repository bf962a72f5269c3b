//! Bracketed scalar root finding on an interval.

use crate::Scalar;

/// Number of uniform subintervals scanned for sign changes.
pub const SCAN_INTERVALS: usize = 512;

/// All roots of `f` on the open interval `(lo, hi)` detectable as sign
/// changes on a uniform scan, refined by bisection to machine precision.
///
/// `f` should be continuous on the interval (callers clear poles by
/// multiplying through by the denominator). Roots are returned ascending.
pub fn bracketed_roots<T: Scalar>(f: impl Fn(T) -> T, lo: T, hi: T, intervals: usize) -> Vec<T> {
    let inset = (hi - lo) * T::lit(1e-9);
    let mut grid: Vec<T> = Vec::with_capacity(intervals + 1);
    grid.push(lo + inset);
    for i in 1..intervals {
        grid.push(lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(intervals));
    }
    grid.push(hi - inset);

    let vals: Vec<T> = grid.iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    for i in 0..grid.len() {
        if vals[i] == T::zero() && vals[i].is_finite() {
            roots.push(grid[i]);
            continue;
        }
        if i + 1 < grid.len() {
            let (a, b) = (vals[i], vals[i + 1]);
            if a.is_finite() && b.is_finite() && b != T::zero() && (a < T::zero()) != (b < T::zero()) {
                roots.push(bisect(&f, grid[i], grid[i + 1], a));
            }
        }
    }
    roots
}

/// Bisection on a bracket whose left value is `fa`; stops when the midpoint
/// no longer moves.
pub fn bisect<T: Scalar>(f: &impl Fn(T) -> T, mut a: T, mut b: T, mut fa: T) -> T {
    let half = T::lit(0.5);
    for _ in 0..200 {
        let mid = a + (b - a) * half;
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm < T::zero()) == (fa < T::zero()) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    a + (b - a) * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        let r = bracketed_roots(|x: f64| (x - 0.3) * (x - 1.7), 0.0, 2.0, SCAN_INTERVALS);
        assert_eq!(r.len(), 2);
        assert!((r[0] - 0.3).abs() < 1e-15);
        assert!((r[1] - 1.7).abs() < 1e-15);
    }

    #[test]
    fn root_on_grid_point_counted_once() {
        let r = bracketed_roots(|x: f64| x - 1.0, 0.0, 2.0, 8);
        assert_eq!(r, vec![1.0]);
    }

    #[test]
    fn no_roots() {
        assert!(bracketed_roots(|x: f64| x * x + 1.0, 0.0, 2.0, 64).is_empty());
    }

    #[test]
    fn irrational_root_single_precision() {
        let r = bracketed_roots(|x: f32| x * x - 2.0, 0.0, 2.0, 16);
        assert_eq!(r.len(), 1);
        assert!((r[0] - 2f32.sqrt()).abs() < 1e-6);
    }
}
