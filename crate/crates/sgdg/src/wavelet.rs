//! 1D orthonormal multiwavelet hierarchy on `[0,1]`.
//!
//! Level 0 holds the orthonormalized polynomials of degree at most `k` on
//! `[0,1]` (scaled Legendre polynomials). Level 1 holds the `k+1` mother
//! wavelets spanning the orthogonal complement of level 0 inside the
//! two-cell piecewise polynomial space. Level `l >= 2` holds the dyadic
//! dilates/translates
//!
//! ```text
//!     v_{i,l}^j(x) = 2^{(l-1)/2} · h_i(2^{l-1} x - j),
//! ```
//!
//! supported on `[j·2^{-(l-1)}, (j+1)·2^{-(l-1)}]`.
//!
//! Piecewise polynomials are stored as coefficient vectors in the
//! orthonormal scaled-Legendre basis of each smooth segment. Under that
//! representation the L2-normalized dyadic dilation keeps coefficients
//! unchanged, so every level reuses the mother coefficient vectors.

use crate::quadrature::GaussRule;
use crate::{Error, Result};

/// Residual threshold below which a Gram-Schmidt candidate is discarded.
const GS_RESIDUAL_TOL: f64 = 1e-10;

/// Trace magnitudes below this (relative to the level scale) are treated as
/// exact zeros when classifying jumps at breakpoints.
pub const TRACE_TOL: f64 = 1e-11;

/// One-sided limit selector at a breakpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Evaluate Legendre polynomials `P_0..=P_max` and derivatives at `t ∈ [-1,1]`.
///
/// Uses the three-term recurrence; `out` slices must have length `max+1`.
fn legendre_all(t: f64, values: &mut [f64], derivs: &mut [f64]) {
    let n = values.len();
    values[0] = 1.0;
    derivs[0] = 0.0;
    if n == 1 {
        return;
    }
    values[1] = t;
    derivs[1] = 1.0;
    for m in 1..n - 1 {
        let mf = m as f64;
        values[m + 1] = ((2.0 * mf + 1.0) * t * values[m] - mf * values[m - 1]) / (mf + 1.0);
        derivs[m + 1] = derivs[m - 1] + (2.0 * mf + 1.0) * values[m];
    }
}

/// A piecewise polynomial on `[support_start, support_end]`.
///
/// `breakpoints` are strictly increasing dyadic rationals; segment `s` covers
/// `[breakpoints[s], breakpoints[s+1]]` and stores coefficients in the
/// orthonormal scaled-Legendre basis of that interval. Values at an interior
/// breakpoint follow the right-limit convention; one-sided limits are
/// queryable via [`Side`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<Vec<f64>>,
}

impl PiecewisePolynomial {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.len() != segments.len() + 1 {
            return Err(Error::InvalidParameter(
                "piecewise polynomial needs exactly one more breakpoint than segments".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self {
            breakpoints,
            segments,
        })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// Index of the segment whose closure contains `x` approaching from `side`.
    /// Returns `None` outside the support closure.
    fn segment_index(&self, x: f64, side: Side) -> Option<usize> {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return None;
        }
        match side {
            Side::Right => {
                if x >= hi {
                    return None;
                }
                // first segment with breakpoints[s] <= x < breakpoints[s+1]
                let mut s = match self
                    .breakpoints
                    .binary_search_by(|b| b.partial_cmp(&x).unwrap())
                {
                    Ok(i) => i,
                    Err(i) => i - 1,
                };
                if s >= self.segments.len() {
                    s = self.segments.len() - 1;
                }
                Some(s)
            }
            Side::Left => {
                if x <= lo {
                    return None;
                }
                let s = match self
                    .breakpoints
                    .binary_search_by(|b| b.partial_cmp(&x).unwrap())
                {
                    Ok(i) => i - 1, // exactly on a breakpoint: take the segment below
                    Err(i) => i - 1,
                };
                Some(s.min(self.segments.len() - 1))
            }
        }
    }

    fn eval_segment(&self, s: usize, x: f64, derivative: bool) -> f64 {
        let a = self.breakpoints[s];
        let b = self.breakpoints[s + 1];
        let len = b - a;
        let t = (2.0 * (x - a) / len - 1.0).clamp(-1.0, 1.0);
        let coeffs = &self.segments[s];
        let n = coeffs.len();
        let mut vals = [0.0; 16];
        let mut ders = [0.0; 16];
        assert!(n <= 16, "segment degree too large");
        legendre_all(t, &mut vals[..n], &mut ders[..n]);
        let mut acc = 0.0;
        for m in 0..n {
            let norm = ((2.0 * m as f64 + 1.0) / len).sqrt();
            let basis = if derivative {
                ders[m] * 2.0 / len
            } else {
                vals[m]
            };
            acc += coeffs[m] * norm * basis;
        }
        acc
    }

    /// One-sided limit of the function; 0 outside the support closure.
    pub fn value_side(&self, x: f64, side: Side) -> f64 {
        match self.segment_index(x, side) {
            Some(s) => self.eval_segment(s, x, false),
            None => 0.0,
        }
    }

    /// One-sided limit of the segment-wise derivative; 0 outside the closure.
    pub fn derivative_side(&self, x: f64, side: Side) -> f64 {
        match self.segment_index(x, side) {
            Some(s) => self.eval_segment(s, x, true),
            None => 0.0,
        }
    }

    /// Stored value: right-limit for `x < support_end`, left-limit at the end.
    pub fn value(&self, x: f64) -> f64 {
        let (_, hi) = self.support();
        if x >= hi {
            self.value_side(x, Side::Left)
        } else {
            self.value_side(x, Side::Right)
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        let (_, hi) = self.support();
        if x >= hi {
            self.derivative_side(x, Side::Left)
        } else {
            self.derivative_side(x, Side::Right)
        }
    }
}

/// One member of the 1D hierarchy, identified by `(degree_index, level, translation)`.
///
/// `degree_index` is 0-based (`0..=k`); `translation` ranges over
/// `0..max(1, 2^(level-1))`.
#[derive(Debug, Clone)]
pub struct BasisFunction1D {
    pub degree_index: usize,
    pub level: usize,
    pub translation: usize,
    pub shape: PiecewisePolynomial,
}

impl BasisFunction1D {
    pub fn support(&self) -> (f64, f64) {
        self.shape.support()
    }
}

/// Support interval of the `(level, translation)` slot.
pub fn support_1d(level: usize, translation: usize) -> (f64, f64) {
    if level <= 1 {
        (0.0, 1.0)
    } else {
        let scale = (2.0f64).powi(-(level as i32 - 1));
        (translation as f64 * scale, (translation + 1) as f64 * scale)
    }
}

/// Number of translations at a level: `max(1, 2^(level-1))`.
pub fn translations_at_level(level: usize) -> usize {
    if level <= 1 {
        1
    } else {
        1usize << (level - 1)
    }
}

/// The full hierarchy for degree `k` up to level `max_level`.
///
/// Immutable after construction; functions are stored level-major with
/// translation-major, degree-minor ordering inside each level.
#[derive(Debug, Clone)]
pub struct Hierarchy1D {
    degree: usize,
    max_level: usize,
    functions: Vec<BasisFunction1D>,
    level_offsets: Vec<usize>,
}

impl Hierarchy1D {
    /// Build the hierarchy for polynomial degree `k >= 1` and levels `0..=max_level`.
    pub fn build(degree: usize, max_level: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidParameter(
                "polynomial degree must be at least 1".into(),
            ));
        }
        if degree > 10 {
            return Err(Error::InvalidParameter(
                "polynomial degree above 10 is not supported".into(),
            ));
        }
        let mothers = build_mother_wavelets(degree)?;
        Self::from_mothers(degree, max_level, mothers)
    }

    /// Build with caller-supplied mother coefficient vectors
    /// (each `2(k+1)` long: left segment then right segment).
    ///
    /// Used by tests to exercise basis-invariance under within-block rotations.
    pub fn from_mothers(
        degree: usize,
        max_level: usize,
        mothers: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = degree + 1;
        if mothers.len() != n || mothers.iter().any(|m| m.len() != 2 * n) {
            return Err(Error::InvalidParameter(
                "expected k+1 mother coefficient vectors of length 2(k+1)".into(),
            ));
        }
        let mut functions = Vec::new();
        let mut level_offsets = Vec::with_capacity(max_level + 2);
        for level in 0..=max_level {
            level_offsets.push(functions.len());
            for translation in 0..translations_at_level(level) {
                for i in 0..n {
                    let shape = if level == 0 {
                        let mut coeffs = vec![0.0; n];
                        coeffs[i] = 1.0;
                        PiecewisePolynomial::new(vec![0.0, 1.0], vec![coeffs])?
                    } else {
                        let (lo, hi) = support_1d(level, translation);
                        let mid = 0.5 * (lo + hi);
                        PiecewisePolynomial::new(
                            vec![lo, mid, hi],
                            vec![mothers[i][..n].to_vec(), mothers[i][n..].to_vec()],
                        )?
                    };
                    functions.push(BasisFunction1D {
                        degree_index: i,
                        level,
                        translation,
                        shape,
                    });
                }
            }
        }
        level_offsets.push(functions.len());
        Ok(Self {
            degree,
            max_level,
            functions,
            level_offsets,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Total number of functions, `(k+1) * 2^max_level`.
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction1D] {
        &self.functions
    }

    /// Flat index of `(level, translation, degree_index)`.
    pub fn index_of(&self, level: usize, translation: usize, degree_index: usize) -> usize {
        debug_assert!(level <= self.max_level);
        debug_assert!(translation < translations_at_level(level));
        debug_assert!(degree_index <= self.degree);
        self.level_offsets[level] + translation * (self.degree + 1) + degree_index
    }

    pub fn get(&self, level: usize, translation: usize, degree_index: usize) -> &BasisFunction1D {
        &self.functions[self.index_of(level, translation, degree_index)]
    }
}

/// Orthonormal mother wavelets of the degree-`k` hierarchy.
///
/// Works in the orthonormal coordinate system given by the `2(k+1)` scaled
/// Legendre modes of the two half-intervals (left modes first). The span of
/// the global degree-`<=k` polynomials is projected out of the fine modes by
/// modified Gram-Schmidt, taking candidates in fine-mode order; candidates
/// with residual norm below `GS_RESIDUAL_TOL` are skipped. Each accepted
/// wavelet is scaled so that its first coordinate of magnitude above the
/// threshold is positive.
fn build_mother_wavelets(degree: usize) -> Result<Vec<Vec<f64>>> {
    let n = degree + 1;
    let dim = 2 * n;

    // Global orthonormal polynomials in fine-mode coordinates. The entry for
    // fine mode (half, i) is the L2 inner product with the global polynomial.
    let rule = GaussRule::new(degree + 2)?;
    let mut global = vec![vec![0.0; dim]; n];
    for (m, row) in global.iter_mut().enumerate() {
        for half in 0..2 {
            let (a, b) = if half == 0 { (0.0, 0.5) } else { (0.5, 1.0) };
            for i in 0..n {
                let mut acc = 0.0;
                for q in 0..rule.len() {
                    let x = a + (b - a) * rule.nodes[q];
                    let w = (b - a) * rule.weights[q];
                    let phi_global = scaled_legendre(m, 0.0, 1.0, x);
                    let phi_fine = scaled_legendre(i, a, b, x);
                    acc += w * phi_global * phi_fine;
                }
                row[half * n + i] = acc;
            }
        }
    }

    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };

    let mut wavelets: Vec<Vec<f64>> = Vec::with_capacity(n);
    for candidate in 0..dim {
        if wavelets.len() == n {
            break;
        }
        let mut r = vec![0.0; dim];
        r[candidate] = 1.0;
        // Two Gram-Schmidt sweeps for orthogonality at machine precision.
        for _ in 0..2 {
            for g in &global {
                let p = dot(&r, g);
                for (ri, gi) in r.iter_mut().zip(g) {
                    *ri -= p * gi;
                }
            }
            for w in &wavelets {
                let p = dot(&r, w);
                for (ri, wi) in r.iter_mut().zip(w) {
                    *ri -= p * wi;
                }
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm < GS_RESIDUAL_TOL {
            continue;
        }
        for ri in r.iter_mut() {
            *ri /= norm;
        }
        // Sign convention: first coordinate of magnitude > tol is positive.
        if let Some(first) = r.iter().find(|v| v.abs() > GS_RESIDUAL_TOL) {
            if *first < 0.0 {
                for ri in r.iter_mut() {
                    *ri = -*ri;
                }
            }
        }
        wavelets.push(r);
    }
    if wavelets.len() != n {
        return Err(Error::InvalidParameter(format!(
            "mother wavelet construction found {} of {} functions",
            wavelets.len(),
            n
        )));
    }
    Ok(wavelets)
}

/// Orthonormal scaled Legendre polynomial of index `m` on `[a,b]` at `x`.
fn scaled_legendre(m: usize, a: f64, b: f64, x: f64) -> f64 {
    let len = b - a;
    let t = (2.0 * (x - a) / len - 1.0).clamp(-1.0, 1.0);
    let mut vals = [0.0; 16];
    let mut ders = [0.0; 16];
    legendre_all(t, &mut vals[..m + 1], &mut ders[..m + 1]);
    ((2.0 * m as f64 + 1.0) / len).sqrt() * vals[m]
}

/// One-sided evaluation with domain validation.
pub fn evaluate(b: &BasisFunction1D, x: f64, side: Side) -> Result<f64> {
    check_eval_domain(x, side)?;
    Ok(b.shape.value_side(x, side))
}

/// One-sided derivative evaluation with domain validation.
pub fn evaluate_derivative(b: &BasisFunction1D, x: f64, side: Side) -> Result<f64> {
    check_eval_domain(x, side)?;
    Ok(b.shape.derivative_side(x, side))
}

fn check_eval_domain(x: f64, side: Side) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("coordinate {x} outside [0,1]")));
    }
    if side == Side::Left && x <= 0.0 {
        return Err(Error::Domain("left limit undefined at x = 0".into()));
    }
    if side == Side::Right && x >= 1.0 {
        return Err(Error::Domain("right limit undefined at x = 1".into()));
    }
    Ok(())
}

/// `∫_0^1 w(x) a(x) b(x) dx` over the merged-breakpoint partition of the
/// support intersection; exact to roundoff for `weight = None`.
pub fn inner_product_1d(
    a: &BasisFunction1D,
    b: &BasisFunction1D,
    weight: Option<&dyn Fn(f64) -> f64>,
    quad_order: usize,
) -> Result<f64> {
    let degree = a.shape.segments[0].len().max(b.shape.segments[0].len()) - 1;
    if quad_order < degree + 1 {
        return Err(Error::InvalidParameter(format!(
            "quadrature order {quad_order} below degree requirement {}",
            degree + 1
        )));
    }
    let rule = GaussRule::new(quad_order)?;
    let segments = crate::quadrature::merged_segments_1d(a, b);
    let mut acc = 0.0;
    for (lo, hi) in segments {
        let len = hi - lo;
        for q in 0..rule.len() {
            let x = lo + len * rule.nodes[q];
            let w = len * rule.weights[q];
            let fa = a.shape.value(x);
            let fb = b.shape.value(x);
            let wx = weight.map_or(1.0, |f| f(x));
            acc += w * wx * fa * fb;
        }
    }
    Ok(acc)
}
