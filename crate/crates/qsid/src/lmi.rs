//! Assembly of the guaranteed-cost synthesis LMI and its reduction to a
//! semidefinite feasibility/optimization problem for the conic backend.
//!
//! Decision variables are a symmetric `X` (n x n), a rectangular `M` (m x n),
//! a scalar `beta`, and optionally the epigraph scalar `gamma` bounding
//! `x0^T X^{-1} x0`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};
use crate::mat::{Mat, Vector};

/// The structured synthesis inequality with block dimensions
/// `[n+m, n+m, n, n, n]`.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub n: usize,
    pub m: usize,
    pub a_hat: Mat,
    pub b_hat: Mat,
    pub c_z: Mat,
    pub d_zu: Mat,
    pub c_c: Mat,
    pub d_cu: Mat,
    /// Floor on `X` (`X >= delta_x I`); the written inequalities are strict.
    pub delta_x: f64,
    /// Floor on `beta`.
    pub delta_beta: f64,
}

/// What the conic solve should optimize.
pub enum Objective<'a> {
    Feasibility,
    /// Minimize `gamma` subject to `[[gamma, x0^T], [x0, X]] >= 0`.
    MinimizeCostAt(&'a Vector),
    /// Maximize `t >= 0` with `Block + t I <= 0`: a strictly interior
    /// certificate whenever one exists.
    MaximizeMargin,
}

/// Raw solver outcome prior to certificate validation.
#[derive(Debug, Clone)]
pub struct LmiSolution {
    pub x: Mat,
    pub m: Mat,
    pub beta: f64,
    pub gamma: Option<f64>,
    /// Achieved strict-feasibility margin under `MaximizeMargin`.
    pub margin: Option<f64>,
    pub status: RawStatus,
    pub status_detail: String,
    pub iterations: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawStatus {
    Solved,
    AlmostSolved,
    Infeasible,
    Failed,
}

impl LmiProblem {
    pub fn block_dims(&self) -> [usize; 5] {
        let (n, m) = (self.n, self.m);
        [n + m, n + m, n, n, n]
    }

    pub fn total_dim(&self) -> usize {
        self.block_dims().iter().sum()
    }

    /// Evaluate the 5x5 block matrix at a candidate `(X, M, beta)`;
    /// symmetry is structural.
    pub fn assemble_block(&self, x: &Mat, m_var: &Mat, beta: f64) -> Mat {
        let (n, m) = (self.n, self.m);
        let dims = self.block_dims();
        let offsets = offsets(&dims);
        let total = self.total_dim();
        let mut blk = Mat::zeros(total, total);

        let neg_beta_eye = |size: usize| -beta * Mat::identity(size, size);
        set_block(&mut blk, offsets[0], offsets[0], &neg_beta_eye(n + m));
        set_block(&mut blk, offsets[1], offsets[1], &(-Mat::identity(n + m, n + m)));
        set_block(&mut blk, offsets[2], offsets[2], &(-x));
        set_block(&mut blk, offsets[3], offsets[3], &(-x));
        set_block(&mut blk, offsets[4], offsets[4], &neg_beta_eye(n));

        let b14 = &self.c_z * x - &self.d_zu * m_var;
        let b24 = &self.c_c * x - &self.d_cu * m_var;
        let b34 = &self.a_hat * x - &self.b_hat * m_var;
        let b35 = beta * Mat::identity(n, n);
        set_sym_block(&mut blk, offsets[0], offsets[3], &b14);
        set_sym_block(&mut blk, offsets[1], offsets[3], &b24);
        set_sym_block(&mut blk, offsets[2], offsets[3], &b34);
        set_sym_block(&mut blk, offsets[2], offsets[4], &b35);
        blk
    }

    fn n_sym_vars(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    fn n_vars(&self, extra_scalar: bool) -> usize {
        self.n_sym_vars() + self.m * self.n + 1 + usize::from(extra_scalar)
    }

    /// Basis matrix for the i-th svec coordinate of `X`.
    fn x_basis(&self, idx: usize) -> Mat {
        let mut out = Mat::zeros(self.n, self.n);
        let (r, c) = svec_coords(self.n, idx);
        if r == c {
            out[(r, c)] = 1.0;
        } else {
            let v = std::f64::consts::FRAC_1_SQRT_2;
            out[(r, c)] = v;
            out[(c, r)] = v;
        }
        out
    }

    fn m_basis(&self, idx: usize) -> Mat {
        let mut out = Mat::zeros(self.m, self.n);
        // column-major layout
        let col = idx / self.m;
        let row = idx % self.m;
        out[(row, col)] = 1.0;
        out
    }

    /// Solve the semidefinite program behind the structured inequality.
    pub fn solve(&self, objective: Objective<'_>) -> Result<LmiSolution> {
        let n = self.n;
        let epigraph = matches!(objective, Objective::MinimizeCostAt(_));
        let maximize_margin = matches!(objective, Objective::MaximizeMargin);
        if let Objective::MinimizeCostAt(x0) = &objective {
            if x0.len() != n {
                return Err(Error::Shape(format!(
                    "x0 has dimension {}, expected {n}",
                    x0.len()
                )));
            }
        }
        let nvars = self.n_vars(epigraph || maximize_margin);
        let nsym = self.n_sym_vars();
        let nm = self.m * n;
        let beta_idx = nsym + nm;
        // Slot shared by gamma (epigraph) or t (margin); never both.
        let gamma_idx = beta_idx + 1;
        let t_idx = beta_idx + 1;

        let big = self.total_dim();
        let zero_x = Mat::zeros(n, n);
        let zero_m = Mat::zeros(self.m, n);
        let constant = self.assemble_block(&zero_x, &zero_m, 0.0);

        let mut a = TripletMatrix::new();
        let mut b = Vec::new();
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        let mut row0 = 0usize;

        // Cone 1: -Block(v) PSD.
        {
            let mut push_basis = |col: usize, f: &Mat| {
                push_svec_column(&mut a, row0, col, f, 1.0);
            };
            for i in 0..nsym {
                let f = self.assemble_block(&self.x_basis(i), &zero_m, 0.0) - &constant;
                push_basis(i, &f);
            }
            for j in 0..nm {
                let f = self.assemble_block(&zero_x, &self.m_basis(j), 0.0) - &constant;
                push_basis(nsym + j, &f);
            }
            let f_beta = self.assemble_block(&zero_x, &zero_m, 1.0) - &constant;
            push_basis(beta_idx, &f_beta);
            if maximize_margin {
                push_basis(t_idx, &Mat::identity(big, big));
            }
            b.extend(svec(&(-&constant)));
            cones.push(SupportedConeT::PSDTriangleConeT(big));
            row0 += svec_len(big);
        }

        // Cone 2: X - delta_x I PSD.
        {
            for i in 0..nsym {
                push_svec_column(&mut a, row0, i, &self.x_basis(i), -1.0);
            }
            b.extend(svec(&(-self.delta_x * Mat::identity(n, n))));
            cones.push(SupportedConeT::PSDTriangleConeT(n));
            row0 += svec_len(n);
        }

        // Cone 3: beta - delta_beta >= 0.
        {
            a.push(row0, beta_idx, -1.0);
            b.push(-self.delta_beta);
            cones.push(SupportedConeT::NonnegativeConeT(1));
            row0 += 1;
        }

        // Cone 4: epigraph block [[gamma, x0^T], [x0, X]] PSD.
        if let Objective::MinimizeCostAt(x0) = &objective {
            let dim = n + 1;
            let mut c4 = Mat::zeros(dim, dim);
            for i in 0..n {
                c4[(0, i + 1)] = x0[i];
                c4[(i + 1, 0)] = x0[i];
            }
            for i in 0..nsym {
                let mut embedded = Mat::zeros(dim, dim);
                embedded.view_mut((1, 1), (n, n)).copy_from(&self.x_basis(i));
                push_svec_column(&mut a, row0, i, &embedded, -1.0);
            }
            let mut g_coef = Mat::zeros(dim, dim);
            g_coef[(0, 0)] = 1.0;
            push_svec_column(&mut a, row0, gamma_idx, &g_coef, -1.0);
            b.extend(svec(&c4));
            cones.push(SupportedConeT::PSDTriangleConeT(dim));
            row0 += svec_len(dim);
        }

        if maximize_margin {
            // 0 <= t <= 10 keeps the margin objective bounded.
            a.push(row0, t_idx, -1.0);
            b.push(0.0);
            a.push(row0 + 1, t_idx, 1.0);
            b.push(10.0);
            cones.push(SupportedConeT::NonnegativeConeT(2));
            row0 += 2;
        }

        let mut q = vec![0.0; nvars];
        if epigraph {
            q[gamma_idx] = 1.0;
        }
        if maximize_margin {
            q[t_idx] = -1.0;
        }
        let p = CscMatrix::<f64>::zeros((nvars, nvars));
        let a_csc = a.into_csc(row0, nvars);

        // Near-infeasible instances stall without converging; the iteration
        // and time caps keep sweep cells bounded, and certificate validation
        // rejects whatever a stalled solve returns.
        let settings = DefaultSettings {
            verbose: false,
            max_iter: 500,
            time_limit: 10.0,
            tol_feas: 1e-9,
            tol_gap_abs: 1e-9,
            tol_gap_rel: 1e-9,
            ..Default::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a_csc, &b, &cones, settings)
            .map_err(|e| Error::SolverFailure(e.to_string()))?;
        solver.solve();

        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => RawStatus::Solved,
            SolverStatus::AlmostSolved => RawStatus::AlmostSolved,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                RawStatus::Infeasible
            }
            _ => RawStatus::Failed,
        };
        let v = &sol.x;
        let finite = v.iter().all(|e| e.is_finite());
        let (x, m_out, beta, gamma, margin) = if finite && v.len() == nvars {
            let mut x = Mat::zeros(n, n);
            for i in 0..nsym {
                x += v[i] * self.x_basis(i);
            }
            let mut m_out = Mat::zeros(self.m, n);
            for j in 0..nm {
                m_out += v[nsym + j] * self.m_basis(j);
            }
            (
                x,
                m_out,
                v[beta_idx],
                epigraph.then(|| v[gamma_idx]),
                maximize_margin.then(|| v[t_idx]),
            )
        } else {
            (Mat::zeros(n, n), Mat::zeros(self.m, n), f64::NAN, None, None)
        };
        Ok(LmiSolution {
            x,
            m: m_out,
            beta,
            gamma,
            margin,
            status,
            status_detail: format!("{:?}", sol.status),
            iterations: solver.info.iterations,
        })
    }
}

fn offsets(dims: &[usize; 5]) -> [usize; 5] {
    let mut out = [0; 5];
    for i in 1..5 {
        out[i] = out[i - 1] + dims[i - 1];
    }
    out
}

fn set_block(dst: &mut Mat, r: usize, c: usize, src: &Mat) {
    dst.view_mut((r, c), (src.nrows(), src.ncols())).copy_from(src);
}

fn set_sym_block(dst: &mut Mat, r: usize, c: usize, src: &Mat) {
    set_block(dst, r, c, src);
    let t = src.transpose();
    dst.view_mut((c, r), (t.nrows(), t.ncols())).copy_from(&t);
}

pub(crate) fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Scaled upper-triangle vectorization in the backend's ordering
/// (column-major, off-diagonals times sqrt(2)).
pub(crate) fn svec(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(svec_len(n));
    let sqrt2 = std::f64::consts::SQRT_2;
    for c in 0..n {
        for r in 0..=c {
            if r == c {
                out.push(m[(r, c)]);
            } else {
                out.push(0.5 * (m[(r, c)] + m[(c, r)]) * sqrt2);
            }
        }
    }
    out
}

fn svec_coords(n: usize, idx: usize) -> (usize, usize) {
    let mut k = idx;
    for c in 0..n {
        if k <= c {
            return (k, c);
        }
        k -= c + 1;
    }
    unreachable!("svec index {idx} out of range for dimension {n}");
}

fn push_svec_column(a: &mut TripletMatrix, row0: usize, col: usize, m: &Mat, sign: f64) {
    for (k, v) in svec(m).into_iter().enumerate() {
        if v != 0.0 {
            a.push(row0 + k, col, sign * v);
        }
    }
}

struct TripletMatrix {
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    fn new() -> Self {
        Self { entries: Vec::new() }
    }

    fn push(&mut self, row: usize, col: usize, val: f64) {
        self.entries.push((row, col, val));
    }

    fn into_csc(mut self, nrows: usize, ncols: usize) -> CscMatrix<f64> {
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval = Vec::with_capacity(self.entries.len());
        let mut nzval = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            colptr[c + 1] += 1;
            rowval.push(r);
            nzval.push(v);
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix::new(nrows, ncols, colptr, rowval, nzval)
    }
}
