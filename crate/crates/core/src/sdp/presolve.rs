use nalgebra::{DMatrix, DVector};

use crate::linalg::ComplexMatrix;

/// Dense copy of the problem data used by the interior-point loop. The
/// objective is always minimized here.
#[derive(Clone, Debug)]
pub(crate) struct Data {
    pub dims: Vec<usize>,
    pub c: Vec<ComplexMatrix>,
    pub a: Vec<Vec<(usize, ComplexMatrix)>>,
    pub b: Vec<f64>,
}

pub(crate) fn inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

impl Data {
    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn apply(&self, x: &[ComplexMatrix]) -> Vec<f64> {
        self.a
            .iter()
            .map(|row| row.iter().map(|(k, a)| inner(a, &x[*k])).sum())
            .collect()
    }

    pub fn adjoint(&self, y: &[f64]) -> Vec<ComplexMatrix> {
        let mut out: Vec<ComplexMatrix> =
            self.dims.iter().map(|&d| ComplexMatrix::zeros(d, d)).collect();
        for (row, &yj) in self.a.iter().zip(y) {
            if yj != 0.0 {
                for (k, a) in row {
                    out[*k] += a * crate::linalg::C64::new(yj, 0.0);
                }
            }
        }
        out
    }

    fn gram(&self) -> DMatrix<f64> {
        let m = self.m();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for (ki, ai) in &self.a[i] {
                    for (kj, aj) in &self.a[j] {
                        if ki == kj {
                            s += inner(ai, aj);
                        }
                    }
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }
}

pub(crate) enum Presolved {
    /// Indices of the independent constraints, in original order.
    Reduced(Vec<usize>),
    /// Combination `y` with `Σ y_j A_j = 0` and `bᵀy > 0`.
    Inconsistent(Vec<f64>),
}

const DEPENDENCE_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-10;

/// Greedy elimination of linearly dependent constraints. A constraint is
/// dropped when its squared distance to the span of the kept ones is below
/// `DEPENDENCE_TOL` times its squared norm; the dropped row's right-hand side
/// must match the same combination of kept right-hand sides.
pub(crate) fn presolve(data: &Data) -> Presolved {
    let g = data.gram();
    let m = data.m();
    let mut kept: Vec<usize> = Vec::with_capacity(m);
    for j in 0..m {
        let gjj = g[(j, j)];
        let coeffs = if kept.is_empty() {
            DVector::zeros(0)
        } else {
            let gkk = DMatrix::from_fn(kept.len(), kept.len(), |r, c| g[(kept[r], kept[c])]);
            let gkj = DVector::from_fn(kept.len(), |r, _| g[(kept[r], j)]);
            match gkk.clone().cholesky() {
                Some(ch) => ch.solve(&gkj),
                None => gkk.lu().solve(&gkj).unwrap_or_else(|| DVector::zeros(kept.len())),
            }
        };
        let projected: f64 = coeffs
            .iter()
            .zip(&kept)
            .map(|(c, &k)| c * g[(k, j)])
            .sum();
        let residual = gjj - projected;
        if gjj > 0.0 && residual > DEPENDENCE_TOL * gjj {
            kept.push(j);
            continue;
        }
        let implied: f64 = coeffs.iter().zip(&kept).map(|(c, &k)| c * data.b[k]).sum();
        let mismatch = data.b[j] - implied;
        if mismatch.abs() > CONSISTENCY_TOL * (1.0 + data.b[j].abs()) {
            let mut y = vec![0.0; m];
            let s = mismatch.signum();
            y[j] = s;
            for (c, &k) in coeffs.iter().zip(&kept) {
                y[k] = -s * c;
            }
            return Presolved::Inconsistent(y);
        }
    }
    Presolved::Reduced(kept)
}

impl Data {
    pub fn restrict(&self, rows: &[usize]) -> Data {
        Data {
            dims: self.dims.clone(),
            c: self.c.clone(),
            a: rows.iter().map(|&j| self.a[j].clone()).collect(),
            b: rows.iter().map(|&j| self.b[j]).collect(),
        }
    }
}

impl Data {
    /// Pairs of scalar blocks `(p, q)` whose data are exact negatives of
    /// each other, i.e. a free variable split as `x_p − x_q`.
    pub fn split_pairs(&self) -> Vec<(usize, usize)> {
        let scalar: Vec<usize> = (0..self.dims.len()).filter(|&k| self.dims[k] == 1).collect();
        if scalar.len() < 2 {
            return Vec::new();
        }
        // column of A restricted to each scalar block
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.dims.len()];
        for (j, row) in self.a.iter().enumerate() {
            for (k, a) in row {
                if self.dims[*k] == 1 {
                    cols[*k].push((j, a[(0, 0)].re));
                }
            }
        }
        let negated = |p: usize, q: usize| {
            self.c[p][(0, 0)].re == -self.c[q][(0, 0)].re
                && cols[p].len() == cols[q].len()
                && cols[p]
                    .iter()
                    .zip(&cols[q])
                    .all(|((jp, vp), (jq, vq))| jp == jq && *vp == -*vq)
        };
        let mut used = vec![false; self.dims.len()];
        let mut pairs = Vec::new();
        for (i, &p) in scalar.iter().enumerate() {
            if used[p] {
                continue;
            }
            if let Some(&q) = scalar[i + 1..].iter().find(|&&q| !used[q] && negated(p, q)) {
                used[p] = true;
                used[q] = true;
                pairs.push((p, q));
            }
        }
        pairs
    }
}

/// Exact elimination of free variables `w` from `A(X) + F w = b`.
///
/// With `F = U₁ Σ V₁ᵀ` (rank part) and `U₂` spanning the left null space of
/// `F`, the remaining constraints are `U₂ᵀ(A(X) − b) = 0`, the free values
/// are recovered as `w = F⁺(b − A(X))`, and the cost `cᵀw` folds into the
/// block objective through `ŵ = (F⁺)ᵀ c`. Dual vectors map back as
/// `y = U₂ y' + ŵ`.
pub(crate) struct FreeElimination {
    pub u2: Option<DMatrix<f64>>,
    pub w_hat: Vec<f64>,
    pub pinv: DMatrix<f64>,
}

pub(crate) enum Eliminated {
    Reduced(Data, FreeElimination),
    /// `c ∉ range(Fᵀ)`: the returned `w` satisfies `F w = 0`, `cᵀw < 0`.
    DualInfeasible(Vec<f64>),
}

const RANK_TOL: f64 = 1e-12;

impl FreeElimination {
    pub fn recover_y(&self, y_reduced: &[f64], with_shift: bool) -> Vec<f64> {
        let base: Vec<f64> = match &self.u2 {
            Some(u2) => (u2 * DVector::from_column_slice(y_reduced)).iter().copied().collect(),
            None => y_reduced.to_vec(),
        };
        if with_shift {
            base.iter().zip(&self.w_hat).map(|(a, b)| a + b).collect()
        } else {
            base
        }
    }

    pub fn recover_w(&self, slack: &[f64]) -> Vec<f64> {
        (&self.pinv * DVector::from_column_slice(slack)).iter().copied().collect()
    }
}

pub(crate) fn eliminate_free(data: &Data, f: &DMatrix<f64>, cf: &[f64]) -> Eliminated {
    let m = data.m();
    let nf = f.ncols();
    if nf == 0 {
        return Eliminated::Reduced(
            data.clone(),
            FreeElimination {
                u2: None,
                w_hat: vec![0.0; m],
                pinv: DMatrix::zeros(0, m),
            },
        );
    }
    let svd = f.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &s| a.max(s));
    let rank_idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > RANK_TOL * smax.max(f64::MIN_POSITIVE))
        .collect();
    let r = rank_idx.len();
    let u1 = DMatrix::from_fn(m, r, |i, c| u[(i, rank_idx[c])]);
    let v1 = DMatrix::from_fn(nf, r, |i, c| vt[(rank_idx[c], i)]);
    let sinv = DVector::from_fn(r, |c, _| 1.0 / svd.singular_values[rank_idx[c]]);

    let c = DVector::from_column_slice(cf);
    let c_perp = &c - &v1 * (v1.transpose() * &c);
    if c_perp.norm() > 1e-9 * (1.0 + c.norm()) {
        return Eliminated::DualInfeasible(c_perp.iter().map(|v| -v).collect());
    }
    // F⁺ = V₁ Σ⁻¹ U₁ᵀ
    let mut v1s = v1.clone();
    for (col, s) in sinv.iter().enumerate() {
        v1s.column_mut(col).scale_mut(*s);
    }
    let pinv = &v1s * u1.transpose();
    let w_hat: Vec<f64> = (pinv.transpose() * &c).iter().copied().collect();

    // orthonormal basis of range(U₁)^⊥
    let proj = DMatrix::<f64>::identity(m, m) - &u1 * u1.transpose();
    let eig = proj.symmetric_eigen();
    let keep: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let u2 = DMatrix::from_fn(m, keep.len(), |i, c| eig.eigenvectors[(i, keep[c])]);

    let mut a = Vec::with_capacity(keep.len());
    let mut b = Vec::with_capacity(keep.len());
    for col in 0..keep.len() {
        let mut blocks: Vec<Option<ComplexMatrix>> = vec![None; data.dims.len()];
        let mut rhs = 0.0;
        for j in 0..m {
            let coef = u2[(j, col)];
            if coef == 0.0 {
                continue;
            }
            rhs += coef * data.b[j];
            for (k, ak) in &data.a[j] {
                let scaled = ak * crate::linalg::C64::new(coef, 0.0);
                match &mut blocks[*k] {
                    Some(acc) => *acc += scaled,
                    slot @ None => *slot = Some(scaled),
                }
            }
        }
        a.push(
            blocks
                .into_iter()
                .enumerate()
                .filter_map(|(k, m)| m.map(|m| (k, m)))
                .collect(),
        );
        b.push(rhs);
    }
    // C' = C − Aᵀŵ
    let shift = data.adjoint(&w_hat);
    let c_new = data.c.iter().zip(shift).map(|(c, s)| c - s).collect();
    Eliminated::Reduced(
        Data {
            dims: data.dims.clone(),
            c: c_new,
            a,
            b,
        },
        FreeElimination {
            u2: Some(u2),
            w_hat,
            pinv,
        },
    )
}
