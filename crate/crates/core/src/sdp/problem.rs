use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_basis, ComplexMatrix, HermitianOperator, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// One block's coefficient in a linear constraint. Blocks absent from a
/// constraint's term list have a zero coefficient.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConstraintTerm {
    pub block: usize,
    pub matrix: HermitianOperator,
}

/// `Σ_k tr(A_k X_k) + Σ_i f_i w_i = rhs`, where `w` are the free variables.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constraint {
    pub terms: Vec<ConstraintTerm>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free_terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Block-diagonal Hermitian SDP in standard form, optionally with free
/// scalar variables `w`:
///
/// ```text
///   opt  Σ_k tr(C_k X_k) + cᵀw
///   s.t. Σ_k tr(A_jk X_k) + (F w)_j = b_j,   X_k ⪰ 0
/// ```
///
/// For `Minimize` the dual is `max bᵀy s.t. C_k − Σ_j y_j A_jk ⪰ 0, Fᵀy = c`;
/// for `Maximize` it is `min bᵀy s.t. Σ_j y_j A_jk − C_k ⪰ 0, Fᵀy = c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SdpProblem {
    pub block_dims: Vec<usize>,
    pub objective: Vec<HermitianOperator>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free_objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub sense: Sense,
}

impl SdpProblem {
    pub fn new(block_dims: Vec<usize>, sense: Sense) -> Self {
        let objective = block_dims
            .iter()
            .map(|&d| HermitianOperator::zeros(d))
            .collect();
        Self {
            block_dims,
            objective,
            free_objective: Vec::new(),
            constraints: Vec::new(),
            sense,
        }
    }

    /// Appends `n` free variables with zero cost and returns the index of
    /// the first.
    pub fn add_free_vars(&mut self, n: usize) -> usize {
        let first = self.free_objective.len();
        self.free_objective.resize(first + n, 0.0);
        first
    }

    pub fn n_free(&self) -> usize {
        self.free_objective.len()
    }

    /// Appends a block and returns its index.
    pub fn add_block(&mut self, dim: usize) -> usize {
        self.block_dims.push(dim);
        self.objective.push(HermitianOperator::zeros(dim));
        self.block_dims.len() - 1
    }

    pub fn n_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn add_objective(&mut self, block: usize, c: &HermitianOperator) {
        self.objective[block] += c;
    }

    /// Appends `Σ tr(A X) = rhs`; terms on the same block are summed.
    pub fn add_constraint(&mut self, terms: Vec<(usize, HermitianOperator)>, rhs: f64) -> usize {
        self.add_mixed_constraint(terms, Vec::new(), rhs)
    }

    /// Appends `Σ tr(A X) + Σ f_i w_i = rhs`.
    pub fn add_mixed_constraint(
        &mut self,
        terms: Vec<(usize, HermitianOperator)>,
        free_terms: Vec<(usize, f64)>,
        rhs: f64,
    ) -> usize {
        let mut free: Vec<(usize, f64)> = Vec::with_capacity(free_terms.len());
        for (i, v) in free_terms {
            match free.iter_mut().find(|t| t.0 == i) {
                Some(t) => t.1 += v,
                None => free.push((i, v)),
            }
        }
        free.sort_by_key(|t| t.0);
        let mut merged: Vec<ConstraintTerm> = Vec::with_capacity(terms.len());
        for (block, matrix) in terms {
            match merged.iter_mut().find(|t| t.block == block) {
                Some(t) => t.matrix += &matrix,
                None => merged.push(ConstraintTerm { block, matrix }),
            }
        }
        merged.sort_by_key(|t| t.block);
        self.constraints.push(Constraint {
            terms: merged,
            free_terms: free,
            rhs,
        });
        self.constraints.len() - 1
    }

    /// Adds one real constraint per orthonormal Hermitian basis element `G`
    /// of the target space, expressing the matrix identity
    /// `Σ_t map_t(X_{block_t}) = target` where each map is given by its
    /// adjoint `G ↦ adjoint_t(G)`. Returns the indices of the new constraints
    /// in basis order.
    pub fn add_matrix_equality<F>(
        &mut self,
        target: &HermitianOperator,
        blocks: &[usize],
        mut adjoint: F,
    ) -> Vec<usize>
    where
        F: FnMut(usize, &HermitianOperator) -> Option<HermitianOperator>,
    {
        let basis = hermitian_basis(target.dim());
        basis
            .iter()
            .map(|g| {
                let terms = blocks
                    .iter()
                    .enumerate()
                    .filter_map(|(slot, &b)| adjoint(slot, g).map(|a| (b, a)))
                    .collect();
                self.add_constraint(terms, g.inner(target))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_dims.is_empty() {
            return Err(Error::Shape("SDP has no blocks".into()));
        }
        if self.block_dims.iter().any(|&d| d == 0) {
            return Err(Error::Shape("SDP block of dimension zero".into()));
        }
        if self.objective.len() != self.block_dims.len() {
            return Err(Error::Shape("objective does not match block list".into()));
        }
        for (k, c) in self.objective.iter().enumerate() {
            if c.dim() != self.block_dims[k] {
                return Err(Error::Shape(format!("objective block {k} has wrong dim")));
            }
        }
        if self.free_objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite free-variable cost".into()));
        }
        if self.constraints.is_empty() {
            return Err(Error::Shape("SDP has no constraints".into()));
        }
        for (j, con) in self.constraints.iter().enumerate() {
            if !con.rhs.is_finite() {
                return Err(Error::Shape(format!("constraint {j} has non-finite rhs")));
            }
            for &(i, v) in &con.free_terms {
                if i >= self.n_free() || !v.is_finite() {
                    return Err(Error::Shape(format!(
                        "constraint {j} has a bad free-variable term {i}"
                    )));
                }
            }
            for t in &con.terms {
                if t.block >= self.block_dims.len() || t.matrix.dim() != self.block_dims[t.block] {
                    return Err(Error::Shape(format!(
                        "constraint {j} term on block {} is mis-shaped",
                        t.block
                    )));
                }
            }
        }
        Ok(())
    }

    /// `A(X) + F w` for the given primal blocks and free values.
    pub fn evaluate_constraints(&self, x: &[HermitianOperator], w: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| {
                c.terms.iter().map(|t| t.matrix.inner(&x[t.block])).sum::<f64>()
                    + c.free_terms.iter().map(|&(i, v)| v * w[i]).sum::<f64>()
            })
            .collect()
    }

    /// `Fᵀy`.
    pub fn free_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free()];
        for (c, &yj) in self.constraints.iter().zip(y) {
            for &(i, v) in &c.free_terms {
                out[i] += v * yj;
            }
        }
        out
    }

    /// `Σ_j y_j A_jk` for every block.
    pub fn adjoint(&self, y: &[f64]) -> Vec<HermitianOperator> {
        let mut out: Vec<HermitianOperator> = self
            .block_dims
            .iter()
            .map(|&d| HermitianOperator::zeros(d))
            .collect();
        for (c, &yj) in self.constraints.iter().zip(y) {
            if yj == 0.0 {
                continue;
            }
            for t in &c.terms {
                out[t.block] += &t.matrix.scale(yj);
            }
        }
        out
    }

    pub fn objective_value(&self, x: &[HermitianOperator], w: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, xk)| c.inner(xk)).sum::<f64>()
            + self.free_objective.iter().zip(w).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn dual_value(&self, y: &[f64]) -> f64 {
        self.constraints.iter().zip(y).map(|(c, v)| c.rhs * v).sum()
    }

    /// Real-symmetric form of the same program: each block `X = R + iI`
    /// becomes `[[R, −I], [I, R]]`, and every data matrix is embedded the
    /// same way and halved so that traces are preserved. Optimal values
    /// coincide with the complex problem.
    pub fn real_embedding(&self) -> SdpProblem {
        let embed = |m: &HermitianOperator| -> HermitianOperator {
            let n = m.dim();
            let src = m.matrix();
            let mut out = ComplexMatrix::zeros(2 * n, 2 * n);
            for i in 0..n {
                for j in 0..n {
                    let z = src[(i, j)];
                    out[(i, j)] = C64::new(0.5 * z.re, 0.0);
                    out[(n + i, n + j)] = C64::new(0.5 * z.re, 0.0);
                    out[(i, n + j)] = C64::new(-0.5 * z.im, 0.0);
                    out[(n + i, j)] = C64::new(0.5 * z.im, 0.0);
                }
            }
            HermitianOperator::hermitian_part(out)
        };
        SdpProblem {
            block_dims: self.block_dims.iter().map(|d| 2 * d).collect(),
            objective: self.objective.iter().map(embed).collect(),
            free_objective: self.free_objective.clone(),
            constraints: self
                .constraints
                .iter()
                .map(|c| Constraint {
                    terms: c
                        .terms
                        .iter()
                        .map(|t| ConstraintTerm {
                            block: t.block,
                            matrix: embed(&t.matrix),
                        })
                        .collect(),
                    free_terms: c.free_terms.clone(),
                    rhs: c.rhs,
                })
                .collect(),
            sense: self.sense,
        }
    }

    /// The dual program written out in standard form: the multipliers `y`
    /// become free variables, followed by one slack block per original
    /// block. Its optimal value equals that of `self`, and its free values
    /// at the optimum are a dual vector of `self`.
    pub fn dual_problem(&self) -> SdpProblem {
        let m = self.constraints.len();
        let (dual_sense, sign) = match self.sense {
            Sense::Minimize => (Sense::Maximize, 1.0),
            Sense::Maximize => (Sense::Minimize, -1.0),
        };
        // minimize:  S_k = C_k − Σ y_j A_jk
        // maximize:  S_k = Σ y_j A_jk − C_k
        let mut dual = SdpProblem::new(self.block_dims.clone(), dual_sense);
        dual.add_free_vars(m);
        for (j, c) in self.constraints.iter().enumerate() {
            dual.free_objective[j] = c.rhs;
        }
        for (k, &d) in self.block_dims.iter().enumerate() {
            for g in hermitian_basis(d) {
                let free = self
                    .constraints
                    .iter()
                    .enumerate()
                    .filter_map(|(j, c)| {
                        let t = c.terms.iter().find(|t| t.block == k)?;
                        let v = sign * g.inner(&t.matrix);
                        (v != 0.0).then_some((j, v))
                    })
                    .collect();
                dual.add_mixed_constraint(
                    vec![(k, g.clone())],
                    free,
                    sign * g.inner(&self.objective[k]),
                );
            }
        }
        // Fᵀy = c
        for (i, &ci) in self.free_objective.iter().enumerate() {
            let free = self
                .constraints
                .iter()
                .enumerate()
                .filter_map(|(j, c)| {
                    c.free_terms
                        .iter()
                        .find(|t| t.0 == i)
                        .map(|&(_, v)| (j, v))
                })
                .collect();
            dual.add_mixed_constraint(Vec::new(), free, ci);
        }
        dual
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: SdpProblem = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}
