//! Shared test oracles: brute-force per-cell/per-face assembly, independent
//! mother-wavelet construction over monomials, and exhaustive face sweeps.
//! These deliberately avoid the library's pairwise tables and merged-segment
//! shortcuts so they can certify them.

#![allow(dead_code, clippy::needless_range_loop)]

use sgdg::problem::ProblemSpec;
use sgdg::quadrature::GaussRule;
use sgdg::space::DofMap;
use sgdg::wavelet::{Hierarchy1D, Side};

/// Dense brute-force assembly of the full bilinear form: volume terms summed
/// cell by cell over the finest grid, face terms summed over every face of
/// the grid skeleton, with all basis functions active everywhere.
pub fn brute_force_matrix(
    hierarchy: &Hierarchy1D,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    sigma: f64,
    quad_points: usize,
) -> Vec<Vec<f64>> {
    let d = dofmap.dimension();
    let n = dofmap.max_level();
    let ndof = dofmap.len();
    let cells = 1usize << n;
    let h = 1.0 / cells as f64;
    let rule = GaussRule::new(quad_points).unwrap();
    let p = rule.len();
    let mut a = vec![vec![0.0f64; ndof]; ndof];

    let value_grad = |dof: usize, x: &[f64]| -> (f64, Vec<f64>) {
        let desc = dofmap.descriptor_of(dof).unwrap();
        let mut vals = vec![0.0; d];
        let mut ders = vec![0.0; d];
        for m in 0..d {
            let f = hierarchy.get(desc.level[m], desc.cell[m], desc.poly[m]);
            vals[m] = f.shape.value(x[m]);
            ders[m] = f.shape.derivative(x[m]);
        }
        let v: f64 = vals.iter().product();
        let g: Vec<f64> = (0..d)
            .map(|m| {
                let mut acc = ders[m];
                for (i, vv) in vals.iter().enumerate() {
                    if i != m {
                        acc *= vv;
                    }
                }
                acc
            })
            .collect();
        (v, g)
    };

    // volume terms
    let total_cells = cells.pow(d as u32);
    for cell_flat in 0..total_cells {
        let mut cell = vec![0usize; d];
        let mut rem = cell_flat;
        for m in (0..d).rev() {
            cell[m] = rem % cells;
            rem /= cells;
        }
        let pd = p.pow(d as u32);
        for qflat in 0..pd {
            let mut q = vec![0usize; d];
            let mut rem = qflat;
            for m in (0..d).rev() {
                q[m] = rem % p;
                rem /= p;
            }
            let mut x = vec![0.0; d];
            let mut w = 1.0;
            for m in 0..d {
                x[m] = (cell[m] as f64 + rule.nodes[q[m]]) * h;
                w *= h * rule.weights[q[m]];
            }
            let c = problem.coefficient.eval(&x);
            let evals: Vec<(f64, Vec<f64>)> = (0..ndof).map(|i| value_grad(i, &x)).collect();
            for i in 0..ndof {
                for j in 0..ndof {
                    let mut grad_dot = 0.0;
                    for m in 0..d {
                        grad_dot += evals[i].1[m] * evals[j].1[m];
                    }
                    a[i][j] += w * (grad_dot + c * evals[i].0 * evals[j].0);
                }
            }
        }
    }

    // face terms over the full skeleton (interior and boundary)
    let trace = |dof: usize, x: &[f64], axis: usize, side: Side| -> (f64, f64) {
        let desc = dofmap.descriptor_of(dof).unwrap();
        let mut v = 1.0;
        let mut gn = 1.0;
        for m in 0..d {
            let f = hierarchy.get(desc.level[m], desc.cell[m], desc.poly[m]);
            if m == axis {
                v *= f.shape.value_side(x[m], side);
                gn *= f.shape.derivative_side(x[m], side);
            } else {
                v *= f.shape.value(x[m]);
                gn *= f.shape.value(x[m]);
            }
        }
        (v, gn)
    };
    for axis in 0..d {
        for ti in 0..=cells {
            let t = ti as f64 * h;
            let boundary = ti == 0 || ti == cells;
            let tangential_cells = cells.pow((d - 1) as u32);
            for tc_flat in 0..tangential_cells {
                let mut tc = vec![0usize; d - 1];
                let mut rem = tc_flat;
                for m in (0..d - 1).rev() {
                    tc[m] = rem % cells;
                    rem /= cells;
                }
                let pf = p.pow((d - 1) as u32);
                for qflat in 0..pf {
                    let mut q = vec![0usize; d - 1];
                    let mut rem = qflat;
                    for m in (0..d - 1).rev() {
                        q[m] = rem % p;
                        rem /= p;
                    }
                    let mut x = vec![0.0; d];
                    let mut w = 1.0;
                    x[axis] = t;
                    let mut tdim = 0;
                    for m in 0..d {
                        if m != axis {
                            x[m] = (tc[tdim] as f64 + rule.nodes[q[tdim]]) * h;
                            w *= h * rule.weights[q[tdim]];
                            tdim += 1;
                        }
                    }
                    // jump scalar and average normal derivative per dof
                    let traces: Vec<(f64, f64)> = (0..ndof)
                        .map(|i| {
                            if boundary {
                                let side = if ti == 0 { Side::Right } else { Side::Left };
                                let (v, g) = trace(i, &x, axis, side);
                                // [q] = q n with outward normal; {∇q} = ∇q
                                let jump = if ti == 0 { -v } else { v };
                                (jump, g)
                            } else {
                                let (vl, gl) = trace(i, &x, axis, Side::Left);
                                let (vr, gr) = trace(i, &x, axis, Side::Right);
                                (vl - vr, 0.5 * (gl + gr))
                            }
                        })
                        .collect();
                    for i in 0..ndof {
                        for j in 0..ndof {
                            let (ji, gi) = traces[i];
                            let (jj, gj) = traces[j];
                            a[i][j] += w * (-gi * jj - gj * ji + sigma / h * ji * jj);
                        }
                    }
                }
            }
        }
    }
    a
}

/// Brute-force load vector: `∫ f v_a` cell by cell over the finest grid.
pub fn brute_force_load(
    hierarchy: &Hierarchy1D,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    quad_points: usize,
) -> Vec<f64> {
    let d = dofmap.dimension();
    let n = dofmap.max_level();
    let ndof = dofmap.len();
    let cells = 1usize << n;
    let h = 1.0 / cells as f64;
    let rule = GaussRule::new(quad_points).unwrap();
    let p = rule.len();
    let mut load = vec![0.0f64; ndof];
    let total_cells = cells.pow(d as u32);
    for cell_flat in 0..total_cells {
        let mut cell = vec![0usize; d];
        let mut rem = cell_flat;
        for m in (0..d).rev() {
            cell[m] = rem % cells;
            rem /= cells;
        }
        let pd = p.pow(d as u32);
        for qflat in 0..pd {
            let mut q = vec![0usize; d];
            let mut rem = qflat;
            for m in (0..d).rev() {
                q[m] = rem % p;
                rem /= p;
            }
            let mut x = vec![0.0; d];
            let mut w = 1.0;
            for m in 0..d {
                x[m] = (cell[m] as f64 + rule.nodes[q[m]]) * h;
                w *= h * rule.weights[q[m]];
            }
            let fx = problem.source.eval(&x);
            for (i, li) in load.iter_mut().enumerate() {
                let desc = dofmap.descriptor_of(i).unwrap();
                let mut v = 1.0;
                for m in 0..d {
                    let f = hierarchy.get(desc.level[m], desc.cell[m], desc.poly[m]);
                    v *= f.shape.value(x[m]);
                }
                *li += w * fx * v;
            }
        }
    }
    load
}

/// Independent mother-wavelet construction working in monomial coordinates
/// with closed-form integrals (no Gauss rules, no Legendre recurrences).
///
/// A function is a pair of degree-`k` polynomials in monomial coefficients,
/// `(left on [0,1/2], right on [1/2,1])`. The modified Gram-Schmidt sweep
/// follows the same candidate order as the library (degree-graded left-half
/// modes first), which pins the same wavelets up to sign.
pub struct MonomialWavelets {
    pub k: usize,
    /// `[i][half][coeff]` monomial coefficients of mother `i`.
    pub mothers: Vec<[Vec<f64>; 2]>,
}

impl MonomialWavelets {
    pub fn build(k: usize) -> Self {
        let n = k + 1;
        type Half = [Vec<f64>; 2];
        // exact integral of x^m over [a,b]
        let seg_int = |coeff_a: &[f64], coeff_b: &[f64], a: f64, b: f64| -> f64 {
            let mut acc = 0.0;
            for (i, ca) in coeff_a.iter().enumerate() {
                for (j, cb) in coeff_b.iter().enumerate() {
                    let p = (i + j + 1) as f64;
                    acc += ca * cb * (b.powf(p) - a.powf(p)) / p;
                }
            }
            acc
        };
        let inner = |u: &Half, v: &Half| -> f64 {
            seg_int(&u[0], &v[0], 0.0, 0.5) + seg_int(&u[1], &v[1], 0.5, 1.0)
        };
        let scale = |u: &mut Half, s: f64| {
            for half in u.iter_mut() {
                for c in half.iter_mut() {
                    *c *= s;
                }
            }
        };
        let axpy = |u: &mut Half, s: f64, v: &Half| {
            for (uh, vh) in u.iter_mut().zip(v.iter()) {
                for (uc, vc) in uh.iter_mut().zip(vh) {
                    *uc += s * vc;
                }
            }
        };

        // orthonormalized global polynomials (Gram-Schmidt over monomials)
        let mut globals: Vec<Half> = Vec::new();
        for m in 0..n {
            let mut mono = vec![0.0; n];
            mono[m] = 1.0;
            let mut cand: Half = [mono.clone(), mono];
            for g in &globals {
                let p = inner(&cand, g);
                axpy(&mut cand, -p, g);
            }
            let norm = inner(&cand, &cand).sqrt();
            scale(&mut cand, 1.0 / norm);
            globals.push(cand);
        }

        // candidates: monomials supported on the left half, degree-graded,
        // then (if ever needed) on the right half
        let mut mothers: Vec<Half> = Vec::new();
        'candidates: for c in 0..2 * n {
            if mothers.len() == n {
                break 'candidates;
            }
            let (half, deg) = (c / n, c % n);
            let mut mono = vec![0.0; n];
            mono[deg] = 1.0;
            let mut cand: Half = if half == 0 {
                [mono, vec![0.0; n]]
            } else {
                [vec![0.0; n], mono]
            };
            for _ in 0..2 {
                for g in &globals {
                    let p = inner(&cand, g);
                    axpy(&mut cand, -p, g);
                }
                for w in &mothers {
                    let p = inner(&cand, w);
                    axpy(&mut cand, -p, w);
                }
            }
            let norm = inner(&cand, &cand).sqrt();
            if norm < 1e-10 {
                continue;
            }
            scale(&mut cand, 1.0 / norm);
            mothers.push(cand);
        }
        assert_eq!(mothers.len(), n, "oracle construction incomplete");
        Self { k, mothers }
    }

    pub fn value(&self, i: usize, x: f64) -> f64 {
        let half = if x < 0.5 { 0 } else { 1 };
        self.mothers[i][half]
            .iter()
            .enumerate()
            .map(|(p, c)| c * x.powi(p as i32))
            .sum()
    }

    /// One-sided value at the midpoint; elsewhere same as `value`.
    pub fn value_side(&self, i: usize, x: f64, right: bool) -> f64 {
        let half = if x < 0.5 || (x == 0.5 && !right) {
            0
        } else {
            1
        };
        self.mothers[i][half]
            .iter()
            .enumerate()
            .map(|(p, c)| c * x.powi(p as i32))
            .sum()
    }
}
