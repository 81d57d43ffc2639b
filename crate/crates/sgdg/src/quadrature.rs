//! Gauss-Legendre rules, merged segment partitions for basis function pairs,
//! and the per-pair candidate subset of the face set Γ of the finest grid.

use crate::space::DofDescriptor;
use crate::wavelet::{BasisFunction1D, Hierarchy1D, Side, TRACE_TOL};
use crate::{Error, Result};

/// Gauss-Legendre rule on the reference interval `[0,1]`.
///
/// Weights sum to one; an `n`-point rule integrates polynomials of degree
/// `<= 2n-1` exactly.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 64 {
            return Err(Error::InvalidParameter(format!(
                "Gauss rule size {n} outside 1..=64"
            )));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        // Newton iteration on the roots of P_n over [-1,1]; nodes come out
        // sorted ascending after the mapping to [0,1].
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(n, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // x is the (n-1-i)-th node in ascending order on [-1,1]
            nodes[n - 1 - i] = 0.5 * (x + 1.0);
            weights[n - 1 - i] = 0.5 * w;
            nodes[i] = 0.5 * (1.0 - x);
            weights[i] = 0.5 * w;
        }
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Integrate `f` over `[a,b]`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let len = b - a;
        let mut acc = 0.0;
        for q in 0..self.len() {
            acc += len * self.weights[q] * f(a + len * self.nodes[q]);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for m in 1..n {
        let mf = m as f64;
        let p2 = ((2.0 * mf + 1.0) * x * p1 - mf * p0) / (mf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Maximal intervals interior to the support intersection of `a` and `b` on
/// which both are single polynomials. Empty when the intersection has zero
/// measure.
pub fn merged_segments_1d(a: &BasisFunction1D, b: &BasisFunction1D) -> Vec<(f64, f64)> {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let lo = alo.max(blo);
    let hi = ahi.min(bhi);
    if hi <= lo {
        return Vec::new();
    }
    let mut cuts = vec![lo, hi];
    for bp in a.shape.breakpoints.iter().chain(&b.shape.breakpoints) {
        if *bp > lo && *bp < hi {
            cuts.push(*bp);
        }
    }
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Kind of a face of the finest grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    Interior,
    Boundary,
}

/// A face of the finest grid Ω_N normal to `normal_axis` at `coordinate`,
/// restricted to `extent` in the remaining axes (in axis order, skipping the
/// normal axis).
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub normal_axis: usize,
    pub coordinate: f64,
    pub extent: Vec<(f64, f64)>,
    pub kind: FaceKind,
}

/// 1D trace data of a basis function factor at a candidate face coordinate.
///
/// `jump` is the scalar j with `[v] = j · (tangential profile) · e_m`
/// (boundary convention `[q] = q n`), `avg_grad` the scalar of the averaged
/// normal derivative (`{q} = q` on the boundary).
#[derive(Debug, Clone, Copy)]
pub struct FaceTrace {
    pub jump: f64,
    pub avg_grad: f64,
}

/// One-sided traces of a 1D factor at coordinate `t`.
pub fn face_trace_1d(f: &BasisFunction1D, t: f64) -> FaceTrace {
    if t <= 0.0 {
        let v = f.shape.value_side(0.0, Side::Right);
        let g = f.shape.derivative_side(0.0, Side::Right);
        // outward normal -e_m: [q] = -q(0+), {∂q} = ∂q(0+)
        FaceTrace {
            jump: -v,
            avg_grad: g,
        }
    } else if t >= 1.0 {
        let v = f.shape.value_side(1.0, Side::Left);
        let g = f.shape.derivative_side(1.0, Side::Left);
        FaceTrace {
            jump: v,
            avg_grad: g,
        }
    } else {
        let vl = f.shape.value_side(t, Side::Left);
        let vr = f.shape.value_side(t, Side::Right);
        let gl = f.shape.derivative_side(t, Side::Left);
        let gr = f.shape.derivative_side(t, Side::Right);
        FaceTrace {
            jump: vl - vr,
            avg_grad: 0.5 * (gl + gr),
        }
    }
}

/// Candidate coordinates along one axis where the pair `(a, b)` can produce a
/// nonzero face integrand: breakpoints of either factor inside the closed
/// support intersection, plus domain boundaries reached by both supports.
/// Coordinates where all three face terms vanish identically (both jumps zero,
/// or one jump zero and the partner's average derivative zero) are filtered
/// out. Returned sorted ascending.
pub fn candidate_coordinates_1d(a: &BasisFunction1D, b: &BasisFunction1D) -> Vec<f64> {
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let lo = alo.max(blo);
    let hi = ahi.min(bhi);
    if hi < lo {
        return Vec::new();
    }
    let mut ts: Vec<f64> = Vec::new();
    for bp in a.shape.breakpoints.iter().chain(&b.shape.breakpoints) {
        if *bp >= lo && *bp <= hi && *bp > 0.0 && *bp < 1.0 {
            ts.push(*bp);
        }
    }
    if lo <= 0.0 {
        ts.push(0.0);
    }
    if hi >= 1.0 {
        ts.push(1.0);
    }
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ts.dedup();
    let scale_a = (1u64 << a.level.saturating_sub(1)) as f64;
    let scale_b = (1u64 << b.level.saturating_sub(1)) as f64;
    let tol_a = TRACE_TOL * scale_a.sqrt();
    let tol_b = TRACE_TOL * scale_b.sqrt();
    ts.retain(|&t| {
        let ta = face_trace_1d(a, t);
        let tb = face_trace_1d(b, t);
        let ja = ta.jump.abs() > tol_a;
        let jb = tb.jump.abs() > tol_b;
        (ja && jb)
            || (ja && tb.avg_grad.abs() > tol_b * scale_b)
            || (jb && ta.avg_grad.abs() > tol_a * scale_a)
    });
    ts
}

/// The subset of Γ on which the edge integrals of the tensor pair `(a, b)`
/// can be nonzero. Faces with zero-measure extent are dropped.
pub fn candidate_faces(
    hierarchy: &Hierarchy1D,
    a: &DofDescriptor,
    b: &DofDescriptor,
) -> Vec<Face> {
    let d = a.level.len();
    debug_assert_eq!(d, b.level.len());
    let factor = |dof: &DofDescriptor, m: usize| -> &BasisFunction1D {
        hierarchy.get(dof.level[m], dof.cell[m], dof.poly[m])
    };
    // Closed support intersections per axis; needed for face extents.
    let mut extents = Vec::with_capacity(d);
    for m in 0..d {
        let (alo, ahi) = factor(a, m).support();
        let (blo, bhi) = factor(b, m).support();
        let lo = alo.max(blo);
        let hi = ahi.min(bhi);
        if hi < lo {
            return Vec::new();
        }
        extents.push((lo, hi));
    }
    let mut faces = Vec::new();
    for m in 0..d {
        // A face normal to axis m needs positive-measure extent in the rest.
        if (0..d).any(|n| n != m && extents[n].1 <= extents[n].0) {
            continue;
        }
        let extent: Vec<(f64, f64)> = (0..d).filter(|n| *n != m).map(|n| extents[n]).collect();
        for t in candidate_coordinates_1d(factor(a, m), factor(b, m)) {
            let kind = if t <= 0.0 || t >= 1.0 {
                FaceKind::Boundary
            } else {
                FaceKind::Interior
            };
            faces.push(Face {
                normal_axis: m,
                coordinate: t,
                extent: extent.clone(),
                kind,
            });
        }
    }
    faces
}
