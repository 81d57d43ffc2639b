//! Assembly of the IPDG load vector and stiffness matrix over the sparse
//! multiwavelet space, for the original bilinear form and its
//! semi-orthogonality truncation.
//!
//! Entries are computed pairwise from per-axis 1D tables. For a tensor pair
//! `(a, b)` the gradient and face terms reduce to
//!
//! ```text
//!     Σ_m (D_m + F_m) · Π_{n≠m} S_n
//! ```
//!
//! where `S`, `D` are the 1D products `∫ a b`, `∫ a' b'` over the merged
//! segment partition and `F` sums the face brackets
//! `-{a'}[b] - {b'}[a] + (σ/h)[a][b]` over the pair's candidate coordinates.
//! The coefficient term factorizes the same way whenever the coefficient is a
//! sum of per-axis products; otherwise it falls back to full tensor
//! quadrature over the pair's segment boxes.

use crate::problem::{ProblemSpec, ScalarField};
use crate::quadrature::{candidate_coordinates_1d, face_trace_1d, merged_segments_1d, GaussRule};
use crate::space::{blocks_coupled, DofDescriptor, DofMap};
use crate::sparse::SparseMatrix;
use crate::wavelet::{translations_at_level, Hierarchy1D};
use crate::{Error, Result};
use rayon::prelude::*;

/// Which bilinear form to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Full interior penalty form.
    Original,
    /// Semi-orthogonality truncation: level-pair blocks with
    /// `|max(l,l')|_1 > N` are set to zero.
    Modified,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::Original => write!(f, "original"),
            Method::Modified => write!(f, "modified"),
        }
    }
}

/// Assembly parameters. The mesh size `h = 2^{-N}` is always derived from the
/// DOF map level, never stored.
#[derive(Debug, Clone)]
pub struct AssemblyConfig {
    pub method: Method,
    /// Penalty parameter σ > 0; the study default is `5·k·d`.
    pub sigma: f64,
    /// Gauss points per axis per merged segment (default `k + 3`).
    pub quad_points: usize,
    /// Stored-entry threshold, relative to the largest entry magnitude.
    pub droptol_factor: f64,
}

impl AssemblyConfig {
    pub fn new(method: Method, degree: usize, dimension: usize) -> Self {
        Self {
            method,
            sigma: default_sigma(degree, dimension),
            quad_points: degree + 3,
            droptol_factor: 1e-12,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.sigma <= 0.0 {
            return Err(Error::InvalidParameter("penalty sigma must be > 0".into()));
        }
        if self.quad_points == 0 {
            return Err(Error::InvalidParameter("quad_points must be >= 1".into()));
        }
        Ok(())
    }
}

/// Empirical penalty choice `σ = 5·k·d`.
pub fn default_sigma(degree: usize, dimension: usize) -> f64 {
    5.0 * degree as f64 * dimension as f64
}

/// Nonzero bookkeeping of an assembled or streamed matrix.
#[derive(Debug, Clone, Copy)]
pub struct NnzCounts {
    /// Closed-support-overlap pairs retained by the method (both triangles).
    pub structural: usize,
    /// Entries with magnitude above the drop tolerance (both triangles).
    pub stored: usize,
    pub max_abs: f64,
    pub droptol: f64,
}

/// Pairwise entry evaluator holding the per-axis 1D tables.
pub struct Assembler<'a> {
    hierarchy: &'a Hierarchy1D,
    dofmap: &'a DofMap,
    problem: &'a ProblemSpec,
    config: AssemblyConfig,
    n1d: usize,
    /// `∫ a b` per 1D pair.
    mass: Vec<f64>,
    /// `∫ a' b'` per 1D pair.
    grad: Vec<f64>,
    /// Face bracket sums per 1D pair (σ/h folded in).
    face: Vec<f64>,
    /// `∫ c_{t,m} a b` per separable coefficient term `t`, axis `m`, 1D pair.
    coef_tables: Vec<Vec<Vec<f64>>>,
    coef_coeffs: Vec<f64>,
    /// Set when the coefficient has no separable structure.
    general_coef: bool,
    poly_multis: Vec<Vec<usize>>,
}

impl<'a> Assembler<'a> {
    pub fn new(
        hierarchy: &'a Hierarchy1D,
        dofmap: &'a DofMap,
        problem: &'a ProblemSpec,
        config: AssemblyConfig,
    ) -> Result<Self> {
        config.validate()?;
        if hierarchy.degree() != dofmap.degree() || hierarchy.max_level() < dofmap.max_level() {
            return Err(Error::InvalidParameter(
                "hierarchy and DOF map disagree on degree or level".into(),
            ));
        }
        if problem.dimension != dofmap.dimension() {
            return Err(Error::InvalidParameter(
                "problem and DOF map disagree on dimension".into(),
            ));
        }
        if dofmap.dimension() > 8 || dofmap.degree() > 7 {
            return Err(Error::ResourceGuard(
                "assembly supports d <= 8 and k <= 7".into(),
            ));
        }
        validate_coefficient(problem)?;
        let n1d = hierarchy.len();
        let rule = GaussRule::new(config.quad_points)?;
        let h = (2.0f64).powi(-(dofmap.max_level() as i32));
        let sigma_over_h = config.sigma / h;

        let funcs = hierarchy.functions();
        let pair_tables = |f: &(dyn Fn(usize, usize) -> f64 + Sync)| -> Vec<f64> {
            (0..n1d * n1d)
                .into_par_iter()
                .map(|idx| f(idx / n1d, idx % n1d))
                .collect()
        };

        let mass = pair_tables(&|ia, ib| {
            integrate_product(&rule, &funcs[ia], &funcs[ib], None, false)
        });
        let grad = pair_tables(&|ia, ib| {
            integrate_product(&rule, &funcs[ia], &funcs[ib], None, true)
        });
        let face = pair_tables(&|ia, ib| {
            let a = &funcs[ia];
            let b = &funcs[ib];
            let mut acc = 0.0;
            for t in candidate_coordinates_1d(a, b) {
                let ta = face_trace_1d(a, t);
                let tb = face_trace_1d(b, t);
                acc += -ta.avg_grad * tb.jump - tb.avg_grad * ta.jump
                    + sigma_over_h * ta.jump * tb.jump;
            }
            acc
        });

        let (coef_tables, coef_coeffs, general_coef) =
            match problem.coefficient.separable_terms() {
                Some(terms) => {
                    let mut tables = Vec::with_capacity(terms.len());
                    let mut coeffs = Vec::with_capacity(terms.len());
                    for term in terms {
                        let mut per_axis = Vec::with_capacity(problem.dimension);
                        for m in 0..problem.dimension {
                            let factor = term.factors[m].clone();
                            per_axis.push(pair_tables(&|ia, ib| {
                                integrate_product(
                                    &rule,
                                    &funcs[ia],
                                    &funcs[ib],
                                    Some(&*factor),
                                    false,
                                )
                            }));
                        }
                        tables.push(per_axis);
                        coeffs.push(term.coeff);
                    }
                    (tables, coeffs, false)
                }
                None => (Vec::new(), Vec::new(), true),
            };

        let poly_multis = poly_multi_indices(dofmap.degree(), dofmap.dimension());

        Ok(Self {
            hierarchy,
            dofmap,
            problem,
            config,
            n1d,
            mass,
            grad,
            face,
            coef_tables,
            coef_coeffs,
            general_coef,
            poly_multis,
        })
    }

    pub fn config(&self) -> &AssemblyConfig {
        &self.config
    }

    /// Bilinear form value `B(v_a, v_b)` (or `B^so` under the modified method).
    pub fn entry(&self, a: &DofDescriptor, b: &DofDescriptor) -> Result<f64> {
        let d = self.dofmap.dimension();
        if a.level.len() != d || b.level.len() != d {
            return Err(Error::InvalidParameter("descriptor dimension mismatch".into()));
        }
        if self.dofmap.index_of(a).is_none() || self.dofmap.index_of(b).is_none() {
            return Err(Error::InvalidParameter(
                "descriptor outside the sparse space".into(),
            ));
        }
        if self.config.method == Method::Modified
            && !blocks_coupled(&a.level, &b.level, self.dofmap.max_level())
        {
            return Ok(0.0);
        }
        let mut s = [0.0f64; 8];
        let mut gf = [0.0f64; 8];
        for m in 0..d {
            let ia = self
                .hierarchy
                .index_of(a.level[m], a.cell[m], a.poly[m]);
            let ib = self
                .hierarchy
                .index_of(b.level[m], b.cell[m], b.poly[m]);
            s[m] = self.mass[ia * self.n1d + ib];
            gf[m] = self.grad[ia * self.n1d + ib] + self.face[ia * self.n1d + ib];
        }
        let mut value = sum_rank_one(d, &s, &gf);
        value += self.coefficient_term(a, b)?;
        Ok(value)
    }

    fn coefficient_term(&self, a: &DofDescriptor, b: &DofDescriptor) -> Result<f64> {
        let d = self.dofmap.dimension();
        if self.general_coef {
            return self.general_coefficient_term(a, b);
        }
        let mut acc = 0.0;
        for (t, tables) in self.coef_tables.iter().enumerate() {
            let mut prod = self.coef_coeffs[t];
            for (m, table) in tables.iter().enumerate().take(d) {
                let ia = self
                    .hierarchy
                    .index_of(a.level[m], a.cell[m], a.poly[m]);
                let ib = self
                    .hierarchy
                    .index_of(b.level[m], b.cell[m], b.poly[m]);
                prod *= table[ia * self.n1d + ib];
            }
            acc += prod;
        }
        Ok(acc)
    }

    /// Full tensor quadrature of `∫ c v_a v_b` over the pair's segment boxes.
    /// Coefficient values are evaluated once per node within this pair only.
    fn general_coefficient_term(&self, a: &DofDescriptor, b: &DofDescriptor) -> Result<f64> {
        let d = self.dofmap.dimension();
        let rule = GaussRule::new(self.config.quad_points)?;
        // per-axis segments with tabulated node positions, weights, a·b values
        let mut axes: Vec<Vec<(Vec<f64>, Vec<f64>)>> = Vec::with_capacity(d);
        for m in 0..d {
            let fa = self
                .hierarchy
                .get(a.level[m], a.cell[m], a.poly[m]);
            let fb = self
                .hierarchy
                .get(b.level[m], b.cell[m], b.poly[m]);
            let segs = merged_segments_1d(fa, fb);
            if segs.is_empty() {
                return Ok(0.0);
            }
            let mut tabulated = Vec::with_capacity(segs.len());
            for (lo, hi) in segs {
                let len = hi - lo;
                let xs: Vec<f64> = rule.nodes.iter().map(|q| lo + len * q).collect();
                let wab: Vec<f64> = rule
                    .weights
                    .iter()
                    .zip(&xs)
                    .map(|(w, &x)| len * w * fa.shape.value(x) * fb.shape.value(x))
                    .collect();
                tabulated.push((xs, wab));
            }
            axes.push(tabulated);
        }
        let mut x = vec![0.0; d];
        let mut acc = 0.0;
        self.tensor_recurse(&axes, 0, 1.0, &mut x, &mut acc);
        Ok(acc)
    }

    fn tensor_recurse(
        &self,
        axes: &[Vec<(Vec<f64>, Vec<f64>)>],
        axis: usize,
        weight: f64,
        x: &mut [f64],
        acc: &mut f64,
    ) {
        if axis == axes.len() {
            *acc += weight * self.problem.coefficient.eval(x);
            return;
        }
        for (xs, wab) in &axes[axis] {
            for (q, &xq) in xs.iter().enumerate() {
                x[axis] = xq;
                self.tensor_recurse(axes, axis + 1, weight * wab[q], x, acc);
            }
        }
    }

    /// Assemble the stiffness matrix.
    pub fn matrix(&self) -> Result<SparseMatrix> {
        let n = self.dofmap.len();
        let tasks = self.level_pair_tasks();
        let blocks: Vec<Vec<(u32, u32, f64)>> = tasks
            .par_iter()
            .map(|&(pa, pb)| self.level_pair_entries(pa, pb))
            .collect();
        let mut upper: Vec<(u32, u32, f64)> = blocks.into_iter().flatten().collect();
        let max_abs = upper
            .iter()
            .fold(0.0f64, |m, &(_, _, v)| m.max(v.abs()));
        let droptol = self.config.droptol_factor * max_abs;
        upper.retain(|&(_, _, v)| v.abs() > droptol);
        let mut entries = Vec::with_capacity(upper.len() * 2);
        for &(r, c, v) in &upper {
            entries.push((r, c, v));
            if r != c {
                entries.push((c, r, v));
            }
        }
        SparseMatrix::from_coo(n, entries, true)
    }

    /// Count nonzeros without storing the matrix.
    ///
    /// The drop tolerance references the diagonal maximum, which for these
    /// SPD matrices equals the global entry maximum (`|a_ij| <= √(a_ii a_jj)`);
    /// the observed maximum is cross-checked and the count repeated in the
    /// unlikely event it exceeds the diagonal reference.
    pub fn count_nnz(&self) -> Result<NnzCounts> {
        let n = self.dofmap.len();
        let diag_max = (0..n)
            .into_par_iter()
            .map(|i| {
                let dof = self.dofmap.descriptor_of(i).unwrap();
                self.entry(&dof, &dof).map(|v| v.abs())
            })
            .try_reduce(|| 0.0f64, |a, b| Ok(a.max(b)))?;
        let structural = structural_nnz(self.dofmap, self.config.method);
        let mut droptol = self.config.droptol_factor * diag_max;
        loop {
            let tasks = self.level_pair_tasks();
            let (stored, observed_max) = tasks
                .par_iter()
                .map(|&(pa, pb)| {
                    let mut stored = 0usize;
                    let mut max = 0.0f64;
                    self.for_level_pair_entries(pa, pb, &mut |r, c, v| {
                        if v.abs() > droptol {
                            stored += if r == c { 1 } else { 2 };
                        }
                        max = max.max(v.abs());
                    });
                    (stored, max)
                })
                .reduce(|| (0, 0.0f64), |a, b| (a.0 + b.0, a.1.max(b.1)));
            if observed_max > diag_max * (1.0 + 1e-12) && observed_max > 0.0 {
                droptol = self.config.droptol_factor * observed_max;
                continue;
            }
            return Ok(NnzCounts {
                structural,
                stored,
                max_abs: observed_max.max(diag_max),
                droptol,
            });
        }
    }

    /// Level-pair tasks `(slot_a, slot_b)` with `slot_a <= slot_b`, filtered by
    /// the method's coupling rule.
    fn level_pair_tasks(&self) -> Vec<(usize, usize)> {
        let levels = self.dofmap.levels();
        let n = self.dofmap.max_level();
        let mut tasks = Vec::new();
        for pa in 0..levels.len() {
            for pb in pa..levels.len() {
                if self.config.method == Method::Modified
                    && !blocks_coupled(&levels[pa], &levels[pb], n)
                {
                    continue;
                }
                tasks.push((pa, pb));
            }
        }
        tasks
    }

    fn level_pair_entries(&self, pa: usize, pb: usize) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        self.for_level_pair_entries(pa, pb, &mut |r, c, v| out.push((r, c, v)));
        out
    }

    /// Visit the upper-triangle entries of one level-pair block.
    fn for_level_pair_entries(&self, pa: usize, pb: usize, visit: &mut dyn FnMut(u32, u32, f64)) {
        let d = self.dofmap.dimension();
        let k1 = self.dofmap.degree() + 1;
        let levels = self.dofmap.levels();
        let (la, lb) = (&levels[pa], &levels[pb]);
        let per_axis: Vec<Vec<(usize, usize)>> = (0..d)
            .map(|m| overlapping_translations(la[m], lb[m]))
            .collect();
        if per_axis.iter().any(|p| p.is_empty()) {
            return;
        }
        let offset_a = self.dofmap.level_offset(pa);
        let offset_b = self.dofmap.level_offset(pb);
        let polys_per_cell = k1.pow(d as u32);
        let same_level = pa == pb;

        // iterate the cartesian product of per-axis translation pairs
        let mut choice = vec![0usize; d];
        loop {
            let mut touching = 0usize;
            for m in 0..d {
                let (ja, jb) = per_axis[m][choice[m]];
                if overlap_is_point(la[m], ja, lb[m], jb) {
                    touching += 1;
                }
            }
            if touching <= 1 {
                // flat cell indices in each level block
                let mut cell_a = 0usize;
                let mut cell_b = 0usize;
                for m in 0..d {
                    let (ja, jb) = per_axis[m][choice[m]];
                    cell_a = cell_a * translations_at_level(la[m]) + ja;
                    cell_b = cell_b * translations_at_level(lb[m]) + jb;
                }
                if !(same_level && cell_a > cell_b) {
                    self.cell_pair_block(
                        la,
                        lb,
                        &per_axis,
                        &choice,
                        offset_a + cell_a * polys_per_cell,
                        offset_b + cell_b * polys_per_cell,
                        same_level && cell_a == cell_b,
                        visit,
                    );
                }
            }
            // advance the mixed-radix choice vector
            let mut m = d;
            loop {
                if m == 0 {
                    return;
                }
                m -= 1;
                choice[m] += 1;
                if choice[m] < per_axis[m].len() {
                    break;
                }
                choice[m] = 0;
            }
        }
    }

    /// One `(k+1)^d × (k+1)^d` polynomial block of a cell pair.
    #[allow(clippy::too_many_arguments)]
    fn cell_pair_block(
        &self,
        la: &[usize],
        lb: &[usize],
        per_axis: &[Vec<(usize, usize)>],
        choice: &[usize],
        base_a: usize,
        base_b: usize,
        diagonal_cell: bool,
        visit: &mut dyn FnMut(u32, u32, f64),
    ) {
        let d = self.dofmap.dimension();
        let k1 = self.dofmap.degree() + 1;
        let n1d = self.n1d;
        // copy the per-axis (k+1)² table blocks into local storage
        let mut s_blk = [[0.0f64; 64]; 8];
        let mut gf_blk = [[0.0f64; 64]; 8];
        let mut c_blk: Vec<[[f64; 64]; 8]> = vec![[[0.0; 64]; 8]; self.coef_tables.len()];
        let mut idx_a0 = [0usize; 8];
        let mut idx_b0 = [0usize; 8];
        for m in 0..d {
            let (ja, jb) = per_axis[m][choice[m]];
            idx_a0[m] = self.hierarchy.index_of(la[m], ja, 0);
            idx_b0[m] = self.hierarchy.index_of(lb[m], jb, 0);
            for ia in 0..k1 {
                for ib in 0..k1 {
                    let t = (idx_a0[m] + ia) * n1d + idx_b0[m] + ib;
                    s_blk[m][ia * k1 + ib] = self.mass[t];
                    gf_blk[m][ia * k1 + ib] = self.grad[t] + self.face[t];
                    for (ct, tbl) in self.coef_tables.iter().enumerate() {
                        c_blk[ct][m][ia * k1 + ib] = tbl[m][t];
                    }
                }
            }
        }
        let polys = &self.poly_multis;
        for (pa_flat, ia) in polys.iter().enumerate() {
            let row = base_a + pa_flat;
            let col_start = if diagonal_cell { pa_flat } else { 0 };
            for (pb_flat, ib) in polys.iter().enumerate().skip(col_start) {
                let col = base_b + pb_flat;
                let mut s = [0.0f64; 8];
                let mut gf = [0.0f64; 8];
                for m in 0..d {
                    let slot = ia[m] * k1 + ib[m];
                    s[m] = s_blk[m][slot];
                    gf[m] = gf_blk[m][slot];
                }
                let mut value = sum_rank_one(d, &s, &gf);
                if self.general_coef {
                    let a = DofDescriptor {
                        level: la.to_vec(),
                        cell: (0..d).map(|m| per_axis[m][choice[m]].0).collect(),
                        poly: ia.clone(),
                    };
                    let b = DofDescriptor {
                        level: lb.to_vec(),
                        cell: (0..d).map(|m| per_axis[m][choice[m]].1).collect(),
                        poly: ib.clone(),
                    };
                    value += self
                        .general_coefficient_term(&a, &b)
                        .expect("coefficient quadrature");
                } else {
                    for (ct, blk) in c_blk.iter().enumerate() {
                        let mut prod = self.coef_coeffs[ct];
                        for m in 0..d {
                            prod *= blk[m][ia[m] * k1 + ib[m]];
                        }
                        value += prod;
                    }
                }
                visit(row as u32, col as u32, value);
            }
        }
    }

    /// Projected structural nonzero count (both triangles) without touching
    /// any quadrature: closed-support-overlap pairs retained by the method.
    pub fn structural_nnz(dofmap: &DofMap, method: Method) -> usize {
        structural_nnz(dofmap, method)
    }
}

/// Count of entries not forced to vanish by orthonormality and support
/// geometry alone, for a generic smooth variable coefficient (both
/// triangles). This is the basis-convention-independent sparsity statistic:
/// the 1D mass factors are Kronecker deltas in any orthonormal multiwavelet
/// basis, so
///
/// * a cell pair overlapping with positive measure in every axis couples in
///   all `(k+1)^{2d}` polynomial combinations through the coefficient term;
/// * a pair touching in exactly one axis couples only through that face, and
///   only when the tangential factors are identical;
/// * a pair touching in two or more axes never couples.
pub fn generic_nnz(dofmap: &DofMap, method: Method) -> usize {
    let d = dofmap.dimension();
    let k1 = dofmap.degree() + 1;
    let levels = dofmap.levels();
    let n = dofmap.max_level();
    let full_block = (k1 * k1).pow(d as u32);
    // touching pairs need identical tangential factors: (k+1)^2 face-axis
    // combinations times (k+1)^{d-1} shared tangential indices
    let touch_block = (k1 * k1) * k1.pow(d as u32 - 1);
    let mut total = 0usize;
    for la in levels {
        for lb in levels {
            if method == Method::Modified && !blocks_coupled(la, lb, n) {
                continue;
            }
            // per-axis: (positive-overlap pairs, touching pairs)
            let mut positive = vec![0usize; d];
            let mut touching = vec![0usize; d];
            for (m, (pos, tou)) in positive.iter_mut().zip(touching.iter_mut()).enumerate() {
                for (ja, jb) in overlapping_translations(la[m], lb[m]) {
                    if overlap_is_point(la[m], ja, lb[m], jb) {
                        *tou += 1;
                    } else {
                        *pos += 1;
                    }
                }
            }
            let all_positive: usize = positive.iter().product();
            total += all_positive * full_block;
            // touching in exactly one axis, identical elsewhere
            for (m, &touch) in touching.iter().enumerate() {
                if touch == 0 {
                    continue;
                }
                let tangential_identical = (0..d)
                    .filter(|n| *n != m)
                    .all(|n| la[n] == lb[n]);
                if tangential_identical {
                    // identical tangential cells: one shared translation per
                    // tangential axis (the diagonal of the overlap relation)
                    let shared: usize = (0..d)
                        .filter(|n| *n != m)
                        .map(|n| translations_at_level(la[n]))
                        .product();
                    total += touch * shared * touch_block;
                }
            }
        }
    }
    total
}

/// Closed-support-overlap pair count retained by `method` (both triangles).
pub fn structural_nnz(dofmap: &DofMap, method: Method) -> usize {
    let d = dofmap.dimension();
    let k1 = dofmap.degree() + 1;
    let levels = dofmap.levels();
    let n = dofmap.max_level();
    let per_block = (k1 * k1).pow(d as u32);
    let mut total = 0usize;
    for la in levels {
        for lb in levels {
            if method == Method::Modified && !blocks_coupled(la, lb, n) {
                continue;
            }
            let mut cells = 1usize;
            for m in 0..d {
                cells *= overlapping_translations(la[m], lb[m]).len();
            }
            total += cells * per_block;
        }
    }
    total
}

/// Closed-support overlapping translation pairs along one axis.
fn overlapping_translations(la: usize, lb: usize) -> Vec<(usize, usize)> {
    let ta = translations_at_level(la);
    let tb = translations_at_level(lb);
    let mut out = Vec::new();
    for ja in 0..ta {
        let (alo, ahi) = crate::wavelet::support_1d(la, ja);
        for jb in 0..tb {
            let (blo, bhi) = crate::wavelet::support_1d(lb, jb);
            if alo.max(blo) <= ahi.min(bhi) {
                out.push((ja, jb));
            }
        }
    }
    out
}

fn overlap_is_point(la: usize, ja: usize, lb: usize, jb: usize) -> bool {
    let (alo, ahi) = crate::wavelet::support_1d(la, ja);
    let (blo, bhi) = crate::wavelet::support_1d(lb, jb);
    alo.max(blo) >= ahi.min(bhi)
}

/// `Σ_m gf_m Π_{n≠m} s_n` via prefix/suffix products (no divisions, so zero
/// factors from touching or disjoint axes are handled exactly).
fn sum_rank_one(d: usize, s: &[f64; 8], gf: &[f64; 8]) -> f64 {
    let mut prefix = [1.0f64; 9];
    for m in 0..d {
        prefix[m + 1] = prefix[m] * s[m];
    }
    let mut suffix = 1.0f64;
    let mut acc = 0.0;
    for m in (0..d).rev() {
        acc += gf[m] * prefix[m] * suffix;
        suffix *= s[m];
    }
    acc
}

fn poly_multi_indices(degree: usize, d: usize) -> Vec<Vec<usize>> {
    let k1 = degree + 1;
    let count = k1.pow(d as u32);
    let mut out = Vec::with_capacity(count);
    for flat in 0..count {
        let mut multi = vec![0usize; d];
        let mut rem = flat;
        for m in (0..d).rev() {
            multi[m] = rem % k1;
            rem /= k1;
        }
        out.push(multi);
    }
    out
}

/// 1D product integral over merged segments; `derivative` selects `∫ a' b'`.
fn integrate_product(
    rule: &GaussRule,
    a: &crate::wavelet::BasisFunction1D,
    b: &crate::wavelet::BasisFunction1D,
    weight: Option<&dyn Fn(f64) -> f64>,
    derivative: bool,
) -> f64 {
    let mut acc = 0.0;
    for (lo, hi) in merged_segments_1d(a, b) {
        let len = hi - lo;
        for q in 0..rule.len() {
            let x = lo + len * rule.nodes[q];
            let w = len * rule.weights[q];
            let (fa, fb) = if derivative {
                (a.shape.derivative(x), b.shape.derivative(x))
            } else {
                (a.shape.value(x), b.shape.value(x))
            };
            let wx = weight.map_or(1.0, |f| f(x));
            acc += w * wx * fa * fb;
        }
    }
    acc
}

/// Check `c >= 0` on a deterministic sample (tensor seeds, corners, center,
/// and a low-discrepancy cloud).
fn validate_coefficient(problem: &ProblemSpec) -> Result<()> {
    let d = problem.dimension;
    let mut points: Vec<Vec<f64>> = Vec::new();
    points.push(vec![0.5; d]);
    if d <= 10 {
        for corner in 0..(1usize << d) {
            points.push((0..d).map(|m| ((corner >> m) & 1) as f64).collect());
        }
    }
    for i in 0..512usize {
        points.push(crate::metrics::halton_point(i + 1, d));
    }
    for p in &points {
        let v = problem.coefficient.eval(p);
        if v < -1e-12 {
            return Err(Error::Problem(format!(
                "coefficient is negative ({v:.3e}) at {p:?}"
            )));
        }
    }
    Ok(())
}

/// Coefficients `⟨g, v_a⟩` of a field against every basis function: the load
/// vector for `g = f` and the sparse L2 projection for general `g`.
///
/// 1D integrals split segments to length `<= 1/16` so that smooth
/// non-polynomial integrands are resolved well beyond the discretization
/// error; the same subdivision is used on the tensor fallback path.
pub fn field_coefficients(
    hierarchy: &Hierarchy1D,
    dofmap: &DofMap,
    field: &ScalarField,
    quad_points: usize,
) -> Result<Vec<f64>> {
    let rule = GaussRule::new(quad_points)?;
    let n1d = hierarchy.len();
    let funcs = hierarchy.functions();
    match field.separable_terms() {
        Some(terms) => {
            // per (term, axis): 1D integrals ∫ f_{t,m}(x) v(x) dx
            let mut tables: Vec<Vec<Vec<f64>>> = Vec::with_capacity(terms.len());
            for term in terms {
                let mut per_axis = Vec::with_capacity(dofmap.dimension());
                for m in 0..dofmap.dimension() {
                    let factor = &term.factors[m];
                    let col: Vec<f64> = (0..n1d)
                        .into_par_iter()
                        .map(|fi| {
                            let f = &funcs[fi];
                            let mut acc = 0.0;
                            for s in 0..f.shape.segments.len() {
                                let (lo, hi) =
                                    (f.shape.breakpoints[s], f.shape.breakpoints[s + 1]);
                                for (plo, phi) in subdivide(lo, hi, 1.0 / 16.0) {
                                    let len = phi - plo;
                                    for q in 0..rule.len() {
                                        let x = plo + len * rule.nodes[q];
                                        acc += len
                                            * rule.weights[q]
                                            * factor(x)
                                            * f.shape.value(x);
                                    }
                                }
                            }
                            acc
                        })
                        .collect();
                    per_axis.push(col);
                }
                tables.push(per_axis);
            }
            let d = dofmap.dimension();
            let out: Vec<f64> = (0..dofmap.len())
                .into_par_iter()
                .map(|idx| {
                    let dof = dofmap.descriptor_of(idx).unwrap();
                    let mut acc = 0.0;
                    for (t, term) in terms.iter().enumerate() {
                        let mut prod = term.coeff;
                        for (m, table) in tables[t].iter().enumerate().take(d) {
                            let fi =
                                hierarchy.index_of(dof.level[m], dof.cell[m], dof.poly[m]);
                            prod *= table[fi];
                        }
                        acc += prod;
                    }
                    acc
                })
                .collect();
            Ok(out)
        }
        None => {
            let d = dofmap.dimension();
            if d > 3 {
                return Err(Error::Capability(
                    "general (non-separable) fields need d <= 3 for tensor quadrature".into(),
                ));
            }
            let out: Vec<f64> = (0..dofmap.len())
                .into_par_iter()
                .map(|idx| {
                    let dof = dofmap.descriptor_of(idx).unwrap();
                    tensor_field_integral(hierarchy, field, &dof, &rule)
                })
                .collect();
            Ok(out)
        }
    }
}

fn subdivide(lo: f64, hi: f64, max_len: f64) -> Vec<(f64, f64)> {
    let pieces = ((hi - lo) / max_len).ceil().max(1.0) as usize;
    let step = (hi - lo) / pieces as f64;
    (0..pieces)
        .map(|p| (lo + p as f64 * step, lo + (p + 1) as f64 * step))
        .collect()
}

fn tensor_field_integral(
    hierarchy: &Hierarchy1D,
    field: &ScalarField,
    dof: &DofDescriptor,
    rule: &GaussRule,
) -> f64 {
    let d = dof.level.len();
    // per axis: (node, weight·basis) over subdivided own segments
    let mut axes: Vec<(Vec<f64>, Vec<f64>)> = Vec::with_capacity(d);
    for m in 0..d {
        let f = hierarchy.get(dof.level[m], dof.cell[m], dof.poly[m]);
        let mut xs = Vec::new();
        let mut wv = Vec::new();
        for s in 0..f.shape.segments.len() {
            let (lo, hi) = (f.shape.breakpoints[s], f.shape.breakpoints[s + 1]);
            for (plo, phi) in subdivide(lo, hi, 1.0 / 16.0) {
                let len = phi - plo;
                for q in 0..rule.len() {
                    let x = plo + len * rule.nodes[q];
                    xs.push(x);
                    wv.push(len * rule.weights[q] * f.shape.value(x));
                }
            }
        }
        axes.push((xs, wv));
    }
    let mut x = vec![0.0; d];
    fn recurse(
        axes: &[(Vec<f64>, Vec<f64>)],
        field: &ScalarField,
        axis: usize,
        weight: f64,
        x: &mut [f64],
    ) -> f64 {
        if axis == axes.len() {
            return weight * field.eval(x);
        }
        let mut acc = 0.0;
        for (q, &xq) in axes[axis].0.iter().enumerate() {
            x[axis] = xq;
            acc += recurse(axes, field, axis + 1, weight * axes[axis].1[q], x);
        }
        acc
    }
    recurse(&axes, field, 0, 1.0, &mut x)
}

/// Spec-level convenience wrappers over [`Assembler`].
pub fn pair_entry(
    hierarchy: &Hierarchy1D,
    dofmap: &DofMap,
    a: &DofDescriptor,
    b: &DofDescriptor,
    problem: &ProblemSpec,
    config: AssemblyConfig,
) -> Result<f64> {
    Assembler::new(hierarchy, dofmap, problem, config)?.entry(a, b)
}

pub fn assemble_matrix(
    hierarchy: &Hierarchy1D,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    config: AssemblyConfig,
) -> Result<SparseMatrix> {
    Assembler::new(hierarchy, dofmap, problem, config)?.matrix()
}

pub fn assemble_load(
    hierarchy: &Hierarchy1D,
    dofmap: &DofMap,
    problem: &ProblemSpec,
    quad_points: usize,
) -> Result<Vec<f64>> {
    field_coefficients(hierarchy, dofmap, &problem.source, quad_points)
}
