//! Bracketing scalar solvers shared by the equilibrium and allocation code.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximizes a unimodal `f` on `[lo, hi]` by golden-section search.
///
/// Returns `(argmax, value)`. Stops once the bracket is narrower than `tol`.
pub fn golden_section_max<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    if b - a <= tol {
        let x = 0.5 * (a + b);
        return (x, f(x));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        // ties move the bracket left
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Finds a sign change of `g` on `[lo, hi]` by bisection.
///
/// `g(lo)` and `g(hi)` must have opposite signs (or one of them be zero);
/// otherwise `None` is returned.
pub fn bisect_root<G>(mut g: G, lo: f64, hi: f64, tol: f64, max_iter: usize) -> Option<f64>
where
    G: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let ga = g(a);
    if ga == 0.0 {
        return Some(a);
    }
    let gb = g(b);
    if gb == 0.0 {
        return Some(b);
    }
    if ga.signum() == gb.signum() || ga.is_nan() || gb.is_nan() {
        return None;
    }
    let positive_left = ga > 0.0;
    for _ in 0..max_iter {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return Some(m);
        }
        if (gm > 0.0) == positive_left {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Root of a nonincreasing `g` on `[lo, hi]`, clamped to the interval when `g` keeps its sign.
pub fn decreasing_root<G>(mut g: G, lo: f64, hi: f64, tol: f64) -> f64
where
    G: FnMut(f64) -> f64,
{
    if g(lo) <= 0.0 {
        return lo;
    }
    if g(hi) >= 0.0 {
        return hi;
    }
    bisect_root(g, lo, hi, tol, 200).unwrap_or(lo)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
        assert!((v - 1.0).abs() < 1e-15);
    }

    #[test]
    fn golden_section_flat_prefers_left() {
        let (x, _) = golden_section_max(|_| 2.0, 0.0, 1.0, 1e-9);
        assert!(x < 1e-8);
    }

    #[test]
    fn golden_section_monotone_hits_edge() {
        let (x, _) = golden_section_max(|x| x, 0.0, 2.0, 1e-10);
        assert!((x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bisection_root() {
        let r = bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect_root(|x| x * x + 1.0, 0.0, 2.0, 1e-12, 100).is_none());
    }

    #[test]
    fn decreasing_root_clamps() {
        assert_eq!(decreasing_root(|x| -1.0 - x, 0.0, 1.0, 1e-12), 0.0);
        assert_eq!(decreasing_root(|x| 1.0 - x, 0.0, 0.5, 1e-12), 0.5);
        assert!((decreasing_root(|x| 0.25 - x, 0.0, 1.0, 1e-14) - 0.25).abs() < 1e-13);
    }
}
