//! Solutions of the Lyapunov function PDE
//! `Σ_i k_i x^{v_i} (1 − exp{(v'_i − v_i)ᵀ ∇f(x)}) = 0`
//! for four network classes, with value, gradient and Hessian evaluation.
//!
//! Every family evaluates `exp{δᵀ∇f}` through its own closed form, so the PDE
//! residual never goes through a quadrature.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::cbp;
use crate::compose::{AutocaShape, CompoundSpec, PartKind};
use crate::linalg;
use crate::model::{MassAction, ReactionNetwork, State};
use crate::quadrature;
use crate::structure;

/// Relative tolerance used when checking that a supplied point is an equilibrium.
pub const EQUILIBRIUM_TOL: f64 = 1e-8;
const ROOT_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error("state has {got} components, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("x* must be positive (component {index} is {value})")]
    NonPositiveStar { index: usize, value: f64 },
    #[error("weights must be positive (component {index} is {value})")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("evaluation point leaves the positive orthant (component {index} is {value})")]
    Domain { index: usize, value: f64 },
    #[error("stoichiometric subspace has dimension {0}, expected 1")]
    NotOneDimensional(usize),
    #[error("omega does not span the reaction vectors: {0}")]
    BadOmega(String),
    #[error("x* is not an equilibrium (max |dx/dt| = {0:e})")]
    NotEquilibrium(f64),
    #[error("no positive root of h(x, u): {0}")]
    NoRoot(String),
    #[error("equilibrium does not fit the compound: {0}")]
    Mismatch(String),
    #[error("no scaling weights for the CBP part: {0}")]
    UnknownScaling(String),
}

type Result<T> = std::result::Result<T, LyapunovError>;

fn check_state(x: &[f64], n: usize) -> Result<()> {
    if x.len() != n {
        return Err(LyapunovError::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    match x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(LyapunovError::Domain {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

fn check_star(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(index) => Err(LyapunovError::NonPositiveStar {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

fn equilibrium_defect(net: &ReactionNetwork, x: &[f64]) -> (f64, bool) {
    let ma = net.compile();
    let rates = ma.rates(x);
    let mut field = vec![0.0; ma.n];
    ma.field_into(x, &mut field);
    let defect = linalg::max_abs(&field);
    (
        defect,
        defect <= EQUILIBRIUM_TOL * (1.0 + linalg::max_abs(&rates)),
    )
}

/// `x^e` with an integer fast path.
fn power(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() < i32::MAX as f64 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// `G(x) = Σ d_j (x*_j − x_j − x_j ln(x*_j / x_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoHelmholtz {
    pub x_star: State,
    pub weights: Vec<f64>,
}

impl PseudoHelmholtz {
    fn value(&self, x: &[f64]) -> f64 {
        self.x_star
            .iter()
            .zip(&self.weights)
            .zip(x)
            .map(|((&s, &d), &x)| d * (s - x - x * (s / x).ln()))
            .sum()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.x_star
            .iter()
            .zip(&self.weights)
            .zip(x)
            .map(|((&s, &d), &x)| d * (x / s).ln())
            .collect()
    }

    fn hessian_diag(&self, x: &[f64]) -> Vec<f64> {
        self.weights.iter().zip(x).map(|(&d, &x)| d / x).collect()
    }

    /// `∏ (x_j / x*_j)^{d_j δ_j}`.
    fn exp_dot_grad(&self, delta: &[i64], x: &[f64]) -> f64 {
        let mut out = 1.0;
        for (j, &dj) in delta.iter().enumerate() {
            if dj != 0 {
                out *= power(x[j] / self.x_star[j], self.weights[j] * dj as f64);
            }
        }
        out
    }
}

/// `f(x) = ∫_0^{γ(x)} ln ũ(y†(x) + αω) dα − f(x*)` for a network whose
/// stoichiometric subspace is spanned by `ω`, where `ũ(x)` is the positive root
/// of `h(x, u)` and `x = y† + γω` is the orthogonal split along `ω`.
#[derive(Debug, Clone)]
pub struct OneDimIntegral {
    pub omega: Vec<i64>,
    /// `v'_i − v_i = β_i ω`.
    pub betas: Vec<i64>,
    pub net: ReactionNetwork,
    pub x_star: State,
    pub quadrature_tol: f64,
    omega_f: Vec<f64>,
    omega_sq: f64,
    mass_action: MassAction,
    offset: f64,
}

/// `(c, c', c'')` for the Laurent factor of one reaction in `h`:
/// `1 + u + … + u^{β−1}` when `β > 0`, `−(u^β + … + u^{−1})` when `β < 0`.
/// In both cases `(1 − u) c(u) = 1 − u^β`.
fn laurent(beta: i64, u: f64) -> [f64; 3] {
    let (lo, hi, sign) = if beta > 0 {
        (0, beta, 1.0)
    } else {
        (beta, 0, -1.0)
    };
    let mut c = [0.0; 3];
    for j in lo..hi {
        let (jf, j) = (j as f64, j as i32);
        c[0] += u.powi(j);
        c[1] += jf * u.powi(j - 1);
        c[2] += jf * (jf - 1.0) * u.powi(j - 2);
    }
    c.map(|v| sign * v)
}

struct UDerivatives {
    u: f64,
    grad: Vec<f64>,
    /// Row-major, present when requested.
    hess: Option<Vec<f64>>,
}

impl OneDimIntegral {
    pub fn num_species(&self) -> usize {
        self.mass_action.n
    }

    /// `γ(x) = ωᵀx / ωᵀω`.
    pub fn gamma(&self, x: &[f64]) -> f64 {
        linalg::dot(&self.omega_f, x) / self.omega_sq
    }

    /// `y†(x) = x − γ(x) ω`.
    pub fn anchor(&self, x: &[f64]) -> State {
        let g = self.gamma(x);
        x.iter()
            .zip(&self.omega_f)
            .map(|(x, w)| x - g * w)
            .collect()
    }

    pub fn h(&self, x: &[f64], u: f64) -> f64 {
        let rates = self.mass_action.rates(x);
        rates
            .iter()
            .zip(&self.betas)
            .map(|(r, &b)| r * laurent(b, u)[0])
            .sum()
    }

    pub fn h_u(&self, x: &[f64], u: f64) -> f64 {
        let rates = self.mass_action.rates(x);
        rates
            .iter()
            .zip(&self.betas)
            .map(|(r, &b)| r * laurent(b, u)[1])
            .sum()
    }

    /// `∂h/∂x (x, u)`.
    pub fn h_x(&self, x: &[f64], u: f64) -> Vec<f64> {
        let rates = self.mass_action.rates(x);
        let mut out = vec![0.0; x.len()];
        for (i, (&r, &b)) in rates.iter().zip(&self.betas).enumerate() {
            let c = laurent(b, u)[0];
            for &(j, v) in &self.mass_action.reactant[i] {
                out[j] += c * r * v as f64 / x[j];
            }
        }
        out
    }

    /// `ωᵀ ∂h/∂x (x*, 1)`; negative values give local asymptotic stability.
    pub fn side_condition(&self) -> f64 {
        linalg::dot(&self.omega_f, &self.h_x(&self.x_star, 1.0))
    }

    /// The positive root of `h(x, ·)`, which is unique because `∂h/∂u > 0`.
    pub fn u_tilde(&self, x: &[f64]) -> Result<f64> {
        check_state(x, self.num_species())?;
        self.solve_u(x)
    }

    fn solve_u(&self, x: &[f64]) -> Result<f64> {
        let rates = self.mass_action.rates(x);
        let eval = |u: f64| {
            let (mut h, mut hu, mut scale) = (0.0, 0.0, 0.0);
            for (r, &b) in rates.iter().zip(&self.betas) {
                let c = laurent(b, u);
                h += r * c[0];
                hu += r * c[1];
                scale += (r * c[0]).abs();
            }
            (h, hu, scale)
        };
        let (h1, _, _) = eval(1.0);
        if h1 == 0.0 {
            return Ok(1.0);
        }
        let (mut lo, mut hi) = (1.0, 1.0);
        if h1 > 0.0 {
            while eval(lo).0 > 0.0 {
                lo *= 0.5;
                if lo < 1e-300 {
                    return Err(LyapunovError::NoRoot(format!(
                        "h stays positive as u -> 0 at {x:?}"
                    )));
                }
            }
        } else {
            while eval(hi).0 < 0.0 {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(LyapunovError::NoRoot(format!(
                        "h stays negative as u -> inf at {x:?}"
                    )));
                }
            }
        }
        let mut u = if h1 > 0.0 {
            hi.min(2.0 * lo)
        } else {
            lo.max(0.5 * hi)
        };
        for _ in 0..200 {
            let (h, hu, scale) = eval(u);
            if h.abs() <= ROOT_TOL * scale {
                return Ok(u);
            }
            if h < 0.0 {
                lo = u;
            } else {
                hi = u;
            }
            let newton = u - h / hu;
            let next = if newton > lo && newton < hi {
                newton
            } else {
                (lo * hi).sqrt()
            };
            if next == u || hi - lo <= 2.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            u = next;
        }
        Ok(u)
    }

    /// `ũ`, `∇ũ = −h_x / h_u` and optionally `∇²ũ` by implicit differentiation.
    fn u_derivatives(&self, x: &[f64], hessian: bool) -> Result<UDerivatives> {
        let n = x.len();
        let u = self.solve_u(x)?;
        let rates = self.mass_action.rates(x);
        let (mut hx, mut hxu, mut hu, mut huu) = (vec![0.0; n], vec![0.0; n], 0.0, 0.0);
        let mut hxx = if hessian {
            vec![0.0; n * n]
        } else {
            Vec::new()
        };
        for (i, (&r, &b)) in rates.iter().zip(&self.betas).enumerate() {
            let c = laurent(b, u);
            hu += r * c[1];
            huu += r * c[2];
            let reactant = &self.mass_action.reactant[i];
            for &(j, vj) in reactant {
                let vj = vj as f64;
                hx[j] += c[0] * r * vj / x[j];
                hxu[j] += c[1] * r * vj / x[j];
                if hessian {
                    hxx[j * n + j] -= c[0] * r * vj / (x[j] * x[j]);
                    for &(l, vl) in reactant {
                        hxx[j * n + l] += c[0] * r * vj * vl as f64 / (x[j] * x[l]);
                    }
                }
            }
        }
        let grad: Vec<f64> = hx.iter().map(|h| -h / hu).collect();
        let hess = hessian.then(|| {
            let mut out = vec![0.0; n * n];
            for j in 0..n {
                for l in 0..n {
                    let num = hxx[j * n + l]
                        + hxu[j] * grad[l]
                        + hxu[l] * grad[j]
                        + huu * grad[j] * grad[l];
                    out[j * n + l] = -num / hu;
                }
            }
            out
        });
        Ok(UDerivatives { u, grad, hess })
    }

    fn split(&self, x: &[f64]) -> Result<(f64, State)> {
        let gamma = self.gamma(x);
        let y = self.anchor(x);
        if let Some(index) = y.iter().position(|&v| v <= 0.0) {
            return Err(LyapunovError::Domain {
                index,
                value: y[index],
            });
        }
        Ok((gamma, y))
    }

    fn point(&self, y: &[f64], alpha: f64) -> State {
        y.iter()
            .zip(&self.omega_f)
            .map(|(y, w)| y + alpha * w)
            .collect()
    }

    fn raw_value(&self, x: &[f64]) -> Result<f64> {
        let (gamma, y) = self.split(x)?;
        quadrature::integrate(0.0, gamma, self.quadrature_tol, |a| {
            Ok(self.solve_u(&self.point(&y, a))?.ln())
        })
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_state(x, self.num_species())?;
        Ok(self.raw_value(x)? - self.offset)
    }

    /// `ω ln ũ(x) / |ω|² + P ∫_0^γ ∇ln ũ(y† + αω) dα` with `P = I − ωωᵀ/|ω|²`.
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.num_species();
        check_state(x, n)?;
        let (gamma, y) = self.split(x)?;
        let l = self.solve_u(x)?.ln();
        let int = quadrature::integrate_vec(0.0, gamma, n, self.quadrature_tol, |a, out| {
            let d = self.u_derivatives(&self.point(&y, a), false)?;
            out.iter_mut().zip(&d.grad).for_each(|(o, g)| *o = g / d.u);
            Ok(())
        })?;
        let proj = self.project(&int);
        Ok(proj
            .iter()
            .zip(&self.omega_f)
            .map(|(p, w)| p + w * l / self.omega_sq)
            .collect())
    }

    fn project(&self, v: &[f64]) -> Vec<f64> {
        let c = linalg::dot(&self.omega_f, v) / self.omega_sq;
        v.iter()
            .zip(&self.omega_f)
            .map(|(v, w)| v - c * w)
            .collect()
    }

    fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let n = self.num_species();
        check_state(x, n)?;
        let (gamma, y) = self.split(x)?;
        let d = self.u_derivatives(x, false)?;
        let g: Vec<f64> = d.grad.iter().map(|v| v / d.u).collect();
        // ∇g = ∇²ũ/ũ − g gᵀ
        let int = quadrature::integrate_vec(0.0, gamma, n * n, self.quadrature_tol, |a, out| {
            let d = self.u_derivatives(&self.point(&y, a), true)?;
            let hess = d.hess.expect("requested");
            for j in 0..n {
                for l in 0..n {
                    out[j * n + l] = hess[j * n + l] / d.u - d.grad[j] * d.grad[l] / (d.u * d.u);
                }
            }
            Ok(())
        })?;
        let w = DMatrix::from_column_slice(n, 1, &self.omega_f);
        let gv = DMatrix::from_column_slice(n, 1, &g);
        let p = DMatrix::identity(n, n) - &w * w.transpose() / self.omega_sq;
        let j = DMatrix::from_row_slice(n, n, &int);
        let wg = linalg::dot(&self.omega_f, &g);
        let outer = (&w * gv.transpose() + &gv * w.transpose()
            - &w * w.transpose() * (wg / self.omega_sq))
            / self.omega_sq;
        Ok(outer + &p * j * &p)
    }

    /// `ũ^β` when `δ = βω`, the general exponential otherwise.
    fn exp_dot_grad(&self, delta: &[i64], x: &[f64]) -> Result<f64> {
        if delta.iter().all(|&d| d == 0) {
            return Ok(1.0);
        }
        match beta_of(delta, &self.omega) {
            Some(beta) => Ok(self.solve_u(x)?.powi(beta as i32)),
            None => {
                let g = self.gradient(x)?;
                Ok(delta
                    .iter()
                    .zip(&g)
                    .map(|(&d, g)| d as f64 * g)
                    .sum::<f64>()
                    .exp())
            }
        }
    }
}

/// `β` with `δ = βω`, if it exists.
fn beta_of(delta: &[i64], omega: &[i64]) -> Option<i64> {
    let pivot = omega.iter().position(|&w| w != 0)?;
    if delta[pivot] % omega[pivot] != 0 {
        return None;
    }
    let beta = delta[pivot] / omega[pivot];
    delta
        .iter()
        .zip(omega)
        .all(|(&d, &w)| d == beta * w)
        .then_some(beta)
}

/// Primitive integer vector spanning the reaction vectors, first nonzero entry positive.
fn primitive_omega(vectors: &[Vec<i64>]) -> Option<Vec<i64>> {
    use num_integer::Integer;
    let v = vectors.iter().find(|v| v.iter().any(|&x| x != 0))?;
    let g = v.iter().fold(0i64, |acc, &x| acc.gcd(&x));
    let sign = if v.iter().find(|&&x| x != 0).copied().unwrap_or(1) < 0 {
        -1
    } else {
        1
    };
    Some(v.iter().map(|&x| sign * x / g).collect())
}

/// Block of a species-disjoint compound: `layout[local] = global`.
#[derive(Debug, Clone)]
pub struct Block {
    pub function: LyapunovFunction,
    pub layout: Vec<usize>,
}

impl Block {
    fn restrict<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.layout.iter().map(|&g| v[g]).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CompoundSub1 {
    pub num_species: usize,
    /// The CBP block first, then one block per one-dimensional part.
    pub blocks: Vec<Block>,
}

/// One autocatalytic part of an [`AutocaCompound`], in global indices.
#[derive(Debug, Clone)]
pub struct AutocaTerm {
    pub shape: AutocaShape,
    pub shared: usize,
    pub private: usize,
    pub x_p_star: f64,
    pub x_q_star: f64,
}

impl AutocaTerm {
    /// `ln(k_2 s / (x*_p Σ_m k_{m,1} s^{m−1}))`.
    fn log_ratio(&self, s: f64) -> f64 {
        (self.shape.rate_k2.value() * s / (self.x_p_star * self.shape.forward_poly(s))).ln()
    }

    /// `Σ_m (2−m) k_{m,1} s^{m−1} / Σ_m k_{m,1} s^m`.
    fn curvature(&self, s: f64) -> f64 {
        self.shape.stability_sum(s) / (s * self.shape.forward_poly(s))
    }
}

/// Weighted pseudo-Helmholtz on the CBP species plus, for each autocatalytic
/// part, `∫_{x*_q}^{x_q} ln(k_2 α / (x*_p Σ_m k_{m,1} α^{m−1})) dα` on its
/// private species.
#[derive(Debug, Clone)]
pub struct AutocaCompound {
    pub num_species: usize,
    pub cbp: PseudoHelmholtz,
    pub cbp_layout: Vec<usize>,
    pub parts: Vec<AutocaTerm>,
    pub quadrature_tol: f64,
}

#[derive(Debug, Clone)]
pub enum LyapunovFunction {
    PseudoHelmholtz(PseudoHelmholtz),
    OneDimIntegral(Box<OneDimIntegral>),
    CompoundSub1(CompoundSub1),
    AutocaCompound(AutocaCompound),
}

impl LyapunovFunction {
    pub fn family(&self) -> &'static str {
        match self {
            Self::PseudoHelmholtz(_) => "pseudo_helmholtz",
            Self::OneDimIntegral(_) => "onedim_integral",
            Self::CompoundSub1(_) => "compound_sub1",
            Self::AutocaCompound(_) => "autoca_compound",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::PseudoHelmholtz(f) => f.x_star.len(),
            Self::OneDimIntegral(f) => f.num_species(),
            Self::CompoundSub1(f) => f.num_species,
            Self::AutocaCompound(f) => f.num_species,
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::PseudoHelmholtz(f) => {
                check_state(x, self.dim())?;
                Ok(f.value(x))
            }
            Self::OneDimIntegral(f) => f.value(x),
            Self::CompoundSub1(f) => {
                check_state(x, f.num_species)?;
                f.blocks
                    .iter()
                    .map(|b| b.function.value(&b.restrict(x)))
                    .sum()
            }
            Self::AutocaCompound(f) => {
                check_state(x, f.num_species)?;
                let mut v = f.cbp.value(&restrict(&f.cbp_layout, x));
                for t in &f.parts {
                    v += quadrature::integrate(t.x_q_star, x[t.private], f.quadrature_tol, |a| {
                        Ok::<_, LyapunovError>(t.log_ratio(a))
                    })?;
                }
                Ok(v)
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::PseudoHelmholtz(f) => {
                check_state(x, self.dim())?;
                Ok(f.gradient(x))
            }
            Self::OneDimIntegral(f) => f.gradient(x),
            Self::CompoundSub1(f) => {
                check_state(x, f.num_species)?;
                let mut out = vec![0.0; f.num_species];
                for b in &f.blocks {
                    let g = b.function.gradient(&b.restrict(x))?;
                    b.layout.iter().zip(g).for_each(|(&j, g)| out[j] = g);
                }
                Ok(out)
            }
            Self::AutocaCompound(f) => {
                check_state(x, f.num_species)?;
                let mut out = vec![0.0; f.num_species];
                let g = f.cbp.gradient(&restrict(&f.cbp_layout, x));
                f.cbp_layout.iter().zip(g).for_each(|(&j, g)| out[j] = g);
                for t in &f.parts {
                    out[t.private] = t.log_ratio(x[t.private]);
                }
                Ok(out)
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            Self::PseudoHelmholtz(f) => {
                check_state(x, self.dim())?;
                Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(
                    f.hessian_diag(x),
                )))
            }
            Self::OneDimIntegral(f) => f.hessian(x),
            Self::CompoundSub1(f) => {
                check_state(x, f.num_species)?;
                let mut out = DMatrix::zeros(f.num_species, f.num_species);
                for b in &f.blocks {
                    let h = b.function.hessian(&b.restrict(x))?;
                    for (a, &ga) in b.layout.iter().enumerate() {
                        for (c, &gc) in b.layout.iter().enumerate() {
                            out[(ga, gc)] = h[(a, c)];
                        }
                    }
                }
                Ok(out)
            }
            Self::AutocaCompound(f) => {
                check_state(x, f.num_species)?;
                let mut out = DMatrix::zeros(f.num_species, f.num_species);
                let h = f.cbp.hessian_diag(&restrict(&f.cbp_layout, x));
                f.cbp_layout
                    .iter()
                    .zip(h)
                    .for_each(|(&j, h)| out[(j, j)] = h);
                for t in &f.parts {
                    out[(t.private, t.private)] = t.curvature(x[t.private]);
                }
                Ok(out)
            }
        }
    }

    /// `exp{δᵀ∇f(x)}` through the family's closed form.
    pub fn exp_dot_grad(&self, delta: &[i64], x: &[f64]) -> Result<f64> {
        check_state(x, self.dim())?;
        if delta.len() != x.len() {
            return Err(LyapunovError::Dimension {
                expected: x.len(),
                got: delta.len(),
            });
        }
        match self {
            Self::PseudoHelmholtz(f) => Ok(f.exp_dot_grad(delta, x)),
            Self::OneDimIntegral(f) => f.exp_dot_grad(delta, x),
            Self::CompoundSub1(f) => {
                let mut out = 1.0;
                for b in &f.blocks {
                    let d = b.restrict(delta);
                    if d.iter().any(|&v| v != 0) {
                        out *= b.function.exp_dot_grad(&d, &b.restrict(x))?;
                    }
                }
                Ok(out)
            }
            Self::AutocaCompound(f) => {
                let mut out = f
                    .cbp
                    .exp_dot_grad(&restrict(&f.cbp_layout, delta), &restrict(&f.cbp_layout, x));
                for t in &f.parts {
                    let d = delta[t.private];
                    if d != 0 {
                        let s = x[t.private];
                        let ratio =
                            t.shape.rate_k2.value() * s / (t.x_p_star * t.shape.forward_poly(s));
                        out *= ratio.powi(d as i32);
                    }
                }
                Ok(out)
            }
        }
    }
}

fn restrict<T: Copy>(layout: &[usize], v: &[T]) -> Vec<T> {
    layout.iter().map(|&g| v[g]).collect()
}

pub fn build_pseudo_helmholtz(x_star: &[f64], weights: Option<&[f64]>) -> Result<LyapunovFunction> {
    check_star(x_star)?;
    let weights = match weights {
        Some(w) => {
            if w.len() != x_star.len() {
                return Err(LyapunovError::Dimension {
                    expected: x_star.len(),
                    got: w.len(),
                });
            }
            if let Some(index) = w.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
                return Err(LyapunovError::NonPositiveWeight {
                    index,
                    value: w[index],
                });
            }
            w.to_vec()
        }
        None => vec![1.0; x_star.len()],
    };
    Ok(LyapunovFunction::PseudoHelmholtz(PseudoHelmholtz {
        x_star: x_star.to_vec(),
        weights,
    }))
}

/// One-dimensional construction with `ω` normalised to the primitive integer
/// vector whose first nonzero entry is positive.
pub fn build_onedim(net: &ReactionNetwork, x_star: &[f64]) -> Result<LyapunovFunction> {
    let vectors = net.reaction_vectors();
    let dim = linalg::rank(&vectors);
    if dim != 1 {
        return Err(LyapunovError::NotOneDimensional(dim));
    }
    let omega = primitive_omega(&vectors).expect("rank one");
    build_onedim_with_omega(net, x_star, &omega)
}

/// Like [`build_onedim`] with a caller-chosen orientation or scale of `ω`.
/// `f` does not depend on the sign of `ω`; `ũ` is inverted by a sign flip.
pub fn build_onedim_with_omega(
    net: &ReactionNetwork,
    x_star: &[f64],
    omega: &[i64],
) -> Result<LyapunovFunction> {
    let n = net.num_species();
    if omega.len() != n {
        return Err(LyapunovError::Dimension {
            expected: n,
            got: omega.len(),
        });
    }
    if x_star.len() != n {
        return Err(LyapunovError::Dimension {
            expected: n,
            got: x_star.len(),
        });
    }
    check_star(x_star)?;
    let vectors = net.reaction_vectors();
    let dim = linalg::rank(&vectors);
    if dim != 1 {
        return Err(LyapunovError::NotOneDimensional(dim));
    }
    if omega.iter().all(|&w| w == 0) {
        return Err(LyapunovError::BadOmega("omega is zero".into()));
    }
    let betas = vectors
        .iter()
        .enumerate()
        .map(|(i, d)| {
            beta_of(d, omega).ok_or_else(|| {
                LyapunovError::BadOmega(format!(
                    "reaction {i} has vector {d:?}, not an integer multiple of {omega:?}"
                ))
            })
        })
        .collect::<Result<Vec<i64>>>()?;
    if !betas.iter().any(|&b| b > 0) || !betas.iter().any(|&b| b < 0) {
        return Err(LyapunovError::NoRoot(
            "every reaction moves the same way along omega, so no positive equilibrium exists"
                .into(),
        ));
    }
    let (defect, ok) = equilibrium_defect(net, x_star);
    if !ok {
        return Err(LyapunovError::NotEquilibrium(defect));
    }
    let omega_f: Vec<f64> = omega.iter().map(|&w| w as f64).collect();
    let omega_sq = linalg::dot(&omega_f, &omega_f);
    let mut f = OneDimIntegral {
        omega: omega.to_vec(),
        betas,
        net: net.clone(),
        x_star: x_star.to_vec(),
        quadrature_tol: quadrature::DEFAULT_TOL,
        omega_f,
        omega_sq,
        mass_action: net.compile(),
        offset: 0.0,
    };
    f.offset = f.raw_value(x_star)?;
    Ok(LyapunovFunction::OneDimIntegral(Box::new(f)))
}

fn cbp_weights(spec: &CompoundSpec, x_cbp: &[f64]) -> Result<Vec<f64>> {
    if let Some(w) = &spec.cbp_weights {
        return Ok(w.iter().map(linalg::ratio_to_f64).collect());
    }
    cbp::recover_scaling(&spec.cbp_part, x_cbp, cbp::DEFAULT_MAX_DENOMINATOR)
        .map(|(w, _)| w.iter().map(linalg::ratio_to_f64).collect())
        .ok_or_else(|| {
            LyapunovError::UnknownScaling(
                "no positive rational weights make the CBP part conjugate to a complex balanced network at this point"
                    .into(),
            )
        })
}

/// Lyapunov function of a compound network at one of its positive equilibria.
/// Part equilibria are the projections of `equilibrium`. Without explicit CBP
/// weights in `spec`, the weights are recovered from the CBP part.
pub fn build_compound(spec: &CompoundSpec, equilibrium: &[f64]) -> Result<LyapunovFunction> {
    if equilibrium.len() != spec.num_species {
        return Err(LyapunovError::Dimension {
            expected: spec.num_species,
            got: equilibrium.len(),
        });
    }
    check_star(equilibrium)?;
    let x_cbp = spec.project_cbp(equilibrium);
    let (defect, ok) = equilibrium_defect(&spec.cbp_part, &x_cbp);
    if !ok {
        return Err(LyapunovError::Mismatch(format!(
            "CBP part is not at equilibrium (max |dx/dt| = {defect:e})"
        )));
    }
    let weights = cbp_weights(spec, &x_cbp)?;
    let cbp = PseudoHelmholtz {
        x_star: x_cbp,
        weights,
    };
    match spec.kind {
        PartKind::Sub1 => {
            let mut blocks = vec![Block {
                function: LyapunovFunction::PseudoHelmholtz(cbp),
                layout: spec.cbp_layout.clone(),
            }];
            for (p, part) in spec.parts.iter().enumerate() {
                let x_p = spec.project_part(p, equilibrium);
                let function = build_onedim(&part.network, &x_p).map_err(|e| match e {
                    LyapunovError::NotEquilibrium(d) => LyapunovError::Mismatch(format!(
                        "part {p} is not at equilibrium (max |dx/dt| = {d:e})"
                    )),
                    e => e,
                })?;
                blocks.push(Block {
                    function,
                    layout: part.layout.clone(),
                });
            }
            Ok(LyapunovFunction::CompoundSub1(CompoundSub1 {
                num_species: spec.num_species,
                blocks,
            }))
        }
        PartKind::Autoca => {
            let mut parts = Vec::new();
            for (p, part) in spec.parts.iter().enumerate() {
                let shape = part
                    .shape
                    .clone()
                    .expect("autocatalytic parts carry their shape");
                let (shared, private) = (part.layout[shape.shared], part.layout[shape.private]);
                let local = spec
                    .cbp_layout
                    .iter()
                    .position(|&g| g == shared)
                    .expect("shared species is in the CBP part");
                if (cbp.weights[local] - 1.0).abs() > 1e-15 {
                    return Err(LyapunovError::UnknownScaling(format!(
                        "shared species `{}` must have weight 1, got {}",
                        spec.cbp_part.species_names()[local],
                        cbp.weights[local]
                    )));
                }
                let term = AutocaTerm {
                    shape,
                    shared,
                    private,
                    x_p_star: equilibrium[shared],
                    x_q_star: equilibrium[private],
                };
                let (back, forth) = (
                    term.shape.rate_k2.value() * term.x_q_star,
                    term.x_p_star * term.shape.forward_poly(term.x_q_star),
                );
                if (back - forth).abs() > EQUILIBRIUM_TOL * (1.0 + back.abs()) {
                    return Err(LyapunovError::Mismatch(format!(
                        "part {p} is not at equilibrium (k2 x_q = {back}, x_p A(x_q) = {forth})"
                    )));
                }
                parts.push(term);
            }
            Ok(LyapunovFunction::AutocaCompound(AutocaCompound {
                num_species: spec.num_species,
                cbp,
                cbp_layout: spec.cbp_layout.clone(),
                parts,
                quadrature_tol: quadrature::DEFAULT_TOL,
            }))
        }
    }
}

/// `Σ_i R_i(x) (1 − exp{δ_iᵀ∇f(x)})`.
pub fn pde_residual(net: &ReactionNetwork, f: &LyapunovFunction, x: &[f64]) -> Result<f64> {
    check_state(x, net.num_species())?;
    let ma = net.compile();
    let mut total = 0.0;
    for (i, r) in net.reactions().iter().enumerate() {
        total += ma.rate(i, x) * (1.0 - f.exp_dot_grad(&r.delta(net.num_species()), x)?);
    }
    Ok(total)
}

/// `∇f(x)ᵀ ẋ`.
pub fn dissipation(net: &ReactionNetwork, f: &LyapunovFunction, x: &[f64]) -> Result<f64> {
    let g = f.gradient(x)?;
    let field = net.vector_field(x).map_err(|_| LyapunovError::Dimension {
        expected: net.num_species(),
        got: x.len(),
    })?;
    Ok(linalg::dot(&g, &field))
}

#[derive(Debug, Clone, Serialize)]
pub struct SideCondition {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub family: String,
    pub side_conditions: Vec<SideCondition>,
    /// `min μᵀ∇²f(x*)μ` over unit `μ ∈ S`; absent when `S = {0}`.
    pub projected_hessian_min_eigenvalue: Option<f64>,
    pub certified: bool,
    pub error: Option<String>,
}

fn onedim_condition(name: String, f: &OneDimIntegral) -> SideCondition {
    let value = f.side_condition();
    SideCondition {
        name,
        value,
        passed: value < 0.0,
    }
}

/// Side-conditions of the family plus positivity of the Hessian on the
/// stoichiometric subspace at `x_star`.
pub fn stability_conditions(
    net: &ReactionNetwork,
    f: &LyapunovFunction,
    x_star: &[f64],
) -> StabilityReport {
    let mut side_conditions = Vec::new();
    match f {
        LyapunovFunction::PseudoHelmholtz(_) => {}
        LyapunovFunction::OneDimIntegral(g) => {
            side_conditions.push(onedim_condition("omega^T dh/dx(x*, 1) < 0".into(), g));
        }
        LyapunovFunction::CompoundSub1(c) => {
            for (p, b) in c.blocks.iter().skip(1).enumerate() {
                if let LyapunovFunction::OneDimIntegral(g) = &b.function {
                    side_conditions.push(onedim_condition(
                        format!("part {p}: omega^T dh/dx(x*, 1) < 0"),
                        g,
                    ));
                }
            }
        }
        LyapunovFunction::AutocaCompound(c) => {
            for (p, t) in c.parts.iter().enumerate() {
                let value = t.shape.stability_sum(t.x_q_star);
                side_conditions.push(SideCondition {
                    name: format!("part {p}: sum_m (2 - m) k_m1 x_q*^(m-1) > 0"),
                    value,
                    passed: value > 0.0,
                });
            }
        }
    }
    let basis = structure::analyze(net).subspace_basis;
    let (eig, error) = match f.hessian(x_star) {
        Ok(_) if basis.is_empty() => (None, None),
        Ok(h) => {
            let n = x_star.len();
            let q = DMatrix::from_fn(n, basis.len(), |i, j| basis[j][i]);
            let m = q.transpose() * h * &q;
            let sym = (&m + m.transpose()) * 0.5;
            let min = SymmetricEigen::new(sym)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            (Some(min), None)
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let certified =
        error.is_none() && side_conditions.iter().all(|c| c.passed) && eig.is_none_or(|e| e > 0.0);
    StabilityReport {
        family: f.family().to_string(),
        side_conditions,
        projected_hessian_min_eigenvalue: eig,
        certified,
        error,
    }
}
