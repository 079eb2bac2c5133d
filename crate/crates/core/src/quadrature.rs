//! Adaptive Gauss–Legendre integration of vector-valued integrands.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;

pub const PANEL_ORDER: usize = 16;
pub const DEFAULT_TOL: f64 = 1e-12;
const MAX_DEPTH: u32 = 40;

fn rule() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).expect("non-zero order"))
            .as_node_weight_pairs()
            .to_vec()
    })
}

fn panel<E>(
    a: f64,
    b: f64,
    dim: usize,
    f: &mut impl FnMut(f64, &mut [f64]) -> Result<(), E>,
) -> Result<Vec<f64>, E> {
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for &(x, w) in rule() {
        f(mid + half * x, &mut buf)?;
        for (s, v) in acc.iter_mut().zip(&buf) {
            *s += w * half * v;
        }
    }
    Ok(acc)
}

/// `∫_a^b f(α) dα` for `f` writing `dim` components into its buffer. Panels are
/// halved until two levels agree to `tol` (absolute, or relative once the
/// integral exceeds 1).
pub fn integrate_vec<E>(
    a: f64,
    b: f64,
    dim: usize,
    tol: f64,
    mut f: impl FnMut(f64, &mut [f64]) -> Result<(), E>,
) -> Result<Vec<f64>, E> {
    if a == b {
        return Ok(vec![0.0; dim]);
    }
    let whole = panel(a, b, dim, &mut f)?;
    refine(a, b, whole, dim, tol, 0, &mut f)
}

fn refine<E>(
    a: f64,
    b: f64,
    whole: Vec<f64>,
    dim: usize,
    tol: f64,
    depth: u32,
    f: &mut impl FnMut(f64, &mut [f64]) -> Result<(), E>,
) -> Result<Vec<f64>, E> {
    let m = 0.5 * (a + b);
    let left = panel(a, m, dim, f)?;
    let right = panel(m, b, dim, f)?;
    let split: Vec<f64> = left.iter().zip(&right).map(|(l, r)| l + r).collect();
    let diff = whole
        .iter()
        .zip(&split)
        .map(|(w, s)| (w - s).abs())
        .fold(0.0, f64::max);
    let scale = split.iter().map(|v| v.abs()).fold(1.0, f64::max);
    if diff < tol * scale || depth >= MAX_DEPTH {
        return Ok(split);
    }
    let l = refine(a, m, left, dim, tol / 2.0, depth + 1, f)?;
    let r = refine(m, b, right, dim, tol / 2.0, depth + 1, f)?;
    Ok(l.iter().zip(&r).map(|(x, y)| x + y).collect())
}

pub fn integrate<E>(
    a: f64,
    b: f64,
    tol: f64,
    mut f: impl FnMut(f64) -> Result<f64, E>,
) -> Result<f64, E> {
    integrate_vec(a, b, 1, tol, |t, out| {
        out[0] = f(t)?;
        Ok(())
    })
    .map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v: f64 = integrate(0.0, 2.0, 1e-14, |x| Ok::<_, ()>(x.powi(7))).unwrap();
        assert!((v - 32.0).abs() < 1e-12);
    }

    #[test]
    fn reversed_limits_change_sign() {
        let a = integrate(0.0, 1.0, 1e-13, |x| Ok::<_, ()>(x.exp())).unwrap();
        let b = integrate(1.0, 0.0, 1e-13, |x| Ok::<_, ()>(x.exp())).unwrap();
        assert!((a + b).abs() < 1e-14);
        assert!((a - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_refines() {
        let v = integrate(-1.0, 1.0, 1e-12, |x| Ok::<_, ()>(1.0 / (1e-4 + x * x))).unwrap();
        let exact = 2.0 * (1.0 / 1e-4f64.sqrt()) * (1.0 / 1e-4f64.sqrt()).atan();
        assert!(((v - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn errors_propagate() {
        assert_eq!(
            integrate(0.0, 1.0, 1e-12, |x| if x > 0.5 {
                Err("out")
            } else {
                Ok(x)
            }),
            Err("out")
        );
    }
}
