//! Exact univariate polynomials over the rationals with Sturm-sequence root
//! counting and isolation.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Coefficients from the constant term upwards; no trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly(Vec<BigRational>);

impl Poly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        Poly(coeffs)
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        Self::new(
            coeffs
                .iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.0
    }

    pub fn eval(&self, x: &BigRational) -> BigRational {
        self.0
            .iter()
            .rev()
            .fold(BigRational::zero(), |acc, c| acc * x + c)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    fn lead(&self) -> &BigRational {
        self.0.last().expect("non-zero polynomial")
    }

    /// Euclidean division `self = q·d + r`.
    pub fn div_rem(&self, d: &Poly) -> (Poly, Poly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let dd = d.0.len() - 1;
        let mut r = self.0.clone();
        if r.len() < d.0.len() {
            return (Poly::new(vec![]), Poly::new(r));
        }
        let mut q = vec![BigRational::zero(); r.len() - dd];
        let inv = d.lead().recip();
        for k in (0..q.len()).rev() {
            let c = &r[k + dd] * &inv;
            if !c.is_zero() {
                for (j, dc) in d.0.iter().enumerate() {
                    r[k + j] -= &c * dc;
                }
            }
            q[k] = c;
        }
        r.truncate(dd);
        (Poly::new(q), Poly::new(r))
    }

    pub fn gcd(&self, other: &Poly) -> Poly {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = r;
        }
        if a.is_zero() {
            return a;
        }
        let inv = a.lead().recip();
        Poly::new(a.0.iter().map(|c| c * &inv).collect())
    }

    /// Divides out every factor of `s`.
    pub fn without_zero_roots(&self) -> Poly {
        let k = self.0.iter().take_while(|c| c.is_zero()).count();
        Poly::new(self.0[k..].to_vec())
    }

    /// Same roots, all simple.
    pub fn square_free(&self) -> Poly {
        let g = self.gcd(&self.derivative());
        if g.degree().unwrap_or(0) == 0 {
            return self.clone();
        }
        self.div_rem(&g).0
    }

    pub fn sturm_chain(&self) -> Vec<Poly> {
        let mut chain = vec![self.clone(), self.derivative()];
        loop {
            let n = chain.len();
            if chain[n - 1].is_zero() {
                chain.pop();
                break;
            }
            let (_, r) = chain[n - 2].div_rem(&chain[n - 1]);
            if r.is_zero() {
                break;
            }
            chain.push(Poly::new(r.0.into_iter().map(|c| -c).collect()));
        }
        chain
    }

    /// Upper bound on the absolute value of every root (Cauchy).
    pub fn root_bound(&self) -> BigRational {
        let lead = self.lead().abs();
        let m = self.0[..self.0.len() - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .fold(BigRational::zero(), |a, b| if b > a { b } else { a });
        m + BigRational::one()
    }

    /// Distinct real roots in `(0, ∞)`, ascending, refined to `f64` precision.
    pub fn positive_roots(&self) -> Vec<f64> {
        if self.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let q = self.without_zero_roots().square_free();
        if q.degree().unwrap_or(0) == 0 {
            return Vec::new();
        }
        let chain = q.sturm_chain();
        let lo = BigRational::zero();
        let hi = q.root_bound();
        let mut out = Vec::new();
        let count = count_in(&chain, &lo, &hi);
        isolate(&q, &chain, lo, hi, count, &mut out);
        out
    }

    pub fn count_positive_roots(&self) -> usize {
        if self.degree().unwrap_or(0) == 0 {
            return 0;
        }
        let q = self.without_zero_roots().square_free();
        if q.degree().unwrap_or(0) == 0 {
            return 0;
        }
        let chain = q.sturm_chain();
        count_in(&chain, &BigRational::zero(), &q.root_bound())
    }
}

fn sign_changes(chain: &[Poly], x: &BigRational) -> usize {
    let signs: Vec<bool> = chain
        .iter()
        .map(|p| p.eval(x))
        .filter(|v| !v.is_zero())
        .map(|v| v.is_positive())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Distinct roots in `(a, b]`; `a` must not be a root.
fn count_in(chain: &[Poly], a: &BigRational, b: &BigRational) -> usize {
    sign_changes(chain, a).saturating_sub(sign_changes(chain, b))
}

fn isolate(
    q: &Poly,
    chain: &[Poly],
    lo: BigRational,
    hi: BigRational,
    count: usize,
    out: &mut Vec<f64>,
) {
    match count {
        0 => {}
        1 => out.push(refine(q, lo, hi)),
        _ => {
            let mid = split_point(q, &lo, &hi);
            let left = count_in(chain, &lo, &mid);
            isolate(q, chain, lo, mid.clone(), left, out);
            isolate(q, chain, mid, hi, count - left, out);
        }
    }
}

/// A point strictly inside `(lo, hi)` that is not a root of `q`.
fn split_point(q: &Poly, lo: &BigRational, hi: &BigRational) -> BigRational {
    let width = hi - lo;
    for (p, d) in [(1, 2), (1, 3), (2, 3), (3, 7), (4, 7), (5, 11), (6, 11)] {
        let t = BigRational::new(BigInt::from(p), BigInt::from(d));
        let m = lo + &width * t;
        if !q.eval(&m).is_zero() {
            return m;
        }
    }
    unreachable!(
        "a square-free polynomial cannot vanish at seven distinct points of a one-root interval"
    )
}

/// Single simple root in `(lo, hi]`, `lo` not a root.
fn refine(q: &Poly, mut lo: BigRational, mut hi: BigRational) -> f64 {
    if q.eval(&hi).is_zero() {
        return hi.to_f64().unwrap_or(f64::NAN);
    }
    let lo_pos = q.eval(&lo).is_positive();
    let two = BigRational::from_integer(BigInt::from(2));
    for _ in 0..200 {
        let (lf, hf) = (lo.to_f64().unwrap_or(0.0), hi.to_f64().unwrap_or(0.0));
        if hf - lf <= f64::EPSILON * hf.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        let mid = (&lo + &hi) / &two;
        let v = q.eval(&mid);
        if v.is_zero() {
            return mid.to_f64().unwrap_or(f64::NAN);
        }
        if v.is_positive() == lo_pos {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // nearest float by exact residual
    let mid = (&lo + &hi) / &two;
    [mid, lo, hi]
        .iter()
        .filter_map(|r| r.to_f64())
        .filter_map(|f| BigRational::from_float(f).map(|r| (f, q.eval(&r).abs())))
        .min_by(|a, b| a.1.cmp(&b.1))
        .map_or(f64::NAN, |(f, _)| f)
}
