//! Thin adapter over the clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::error::{Error, Result};

/// Largest inequality violation accepted when the solver cannot settle a
/// nearly infeasible problem directly.
pub(crate) const RESCUE_SLACK: f64 = 1e-7;

/// `min 1/2 z'Pz + c'z` subject to equality rows, `<=` rows and second-order
/// cones `(t, u...)` with `t >= ||u||` given as affine rows.
#[derive(Debug, Clone, Default)]
pub(crate) struct ConvexQp {
    pub n: usize,
    /// Upper-triangular entries of `P` (row, col, value), duplicates summed.
    pub hessian: Vec<(usize, usize, f64)>,
    pub linear: Vec<f64>,
    pub eq: Vec<SparseRow>,
    pub le: Vec<SparseRow>,
    /// Each cone lists affine expressions `b - a'z` for `(t, u_1, ..., u_k)`.
    pub cones: Vec<Vec<SparseRow>>,
}

/// `a'z (op) rhs`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub coefs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl SparseRow {
    pub fn new(coefs: Vec<(usize, f64)>, rhs: f64) -> Self {
        Self { coefs, rhs }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.coefs.iter().map(|&(j, a)| a * z[j]).sum()
    }
}

#[derive(Debug, Clone)]
pub(crate) enum QpOutcome {
    Optimal { z: Vec<f64> },
    Infeasible,
}

impl ConvexQp {
    pub fn new(n: usize) -> Self {
        Self { n, linear: vec![0.0; n], ..Self::default() }
    }

    /// Solves the problem; when the solver stalls on a nearly infeasible
    /// instance, decides feasibility from an elastic phase-one problem and
    /// solves with inequalities loosened by [`RESCUE_SLACK`].
    pub fn solve(&self) -> Result<QpOutcome> {
        match self.attempt() {
            Err(Error::Solver(msg)) => {
                log::debug!("QP rescue after: {msg}");
                self.rescue()
            }
            other => other,
        }
    }

    fn rescue(&self) -> Result<QpOutcome> {
        let mut phase_one = ConvexQp::new(self.n + 1);
        let s = self.n;
        phase_one.linear[s] = 1.0;
        phase_one.eq = self.eq.clone();
        phase_one.le = self
            .le
            .iter()
            .map(|r| {
                let mut coefs = r.coefs.clone();
                coefs.push((s, -1.0));
                SparseRow::new(coefs, r.rhs)
            })
            .collect();
        phase_one.le.push(SparseRow::new(vec![(s, -1.0)], 0.0));
        phase_one.cones = self.cones.clone();
        let violation = match phase_one.attempt()? {
            QpOutcome::Infeasible => return Ok(QpOutcome::Infeasible),
            QpOutcome::Optimal { z } => z[s],
        };
        if violation > RESCUE_SLACK {
            return Ok(QpOutcome::Infeasible);
        }
        let mut loose = self.clone();
        for r in &mut loose.le {
            r.rhs += RESCUE_SLACK;
        }
        loose.attempt()
    }

    fn attempt(&self) -> Result<QpOutcome> {
        let n = self.n;
        let (pi, (pj, pv)): (Vec<usize>, (Vec<usize>, Vec<f64>)) =
            self.hessian.iter().map(|&(i, j, v)| (i.min(j), (i.max(j), v))).unzip();
        let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);

        let mut ai = Vec::new();
        let mut aj = Vec::new();
        let mut av = Vec::new();
        let mut b = Vec::new();
        let mut push = |row: &SparseRow, b: &mut Vec<f64>| {
            let r = b.len();
            for &(j, a) in &row.coefs {
                ai.push(r);
                aj.push(j);
                av.push(a);
            }
            b.push(row.rhs);
        };
        for row in &self.eq {
            push(row, &mut b);
        }
        for row in &self.le {
            push(row, &mut b);
        }
        for cone in &self.cones {
            for row in cone {
                push(row, &mut b);
            }
        }
        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, n, ai, aj, av);
        let mut cones = Vec::new();
        if !self.eq.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.eq.len()));
        }
        if !self.le.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.le.len()));
        }
        for cone in &self.cones {
            cones.push(SupportedConeT::SecondOrderConeT(cone.len()));
        }

        // the first pass skips iterative refinement, which costs more than
        // half the solve time; retries refine, then drop scaling or regularize
        // harder
        let mut last = SolverStatus::Unsolved;
        for (refine, equilibrate, regularization) in
            [(false, true, 1e-8), (true, true, 1e-8), (true, false, 1e-8), (true, true, 1e-6)]
        {
            let settings = DefaultSettings {
                verbose: false,
                tol_gap_abs: 1e-8,
                tol_gap_rel: 1e-8,
                tol_feas: 1e-8,
                max_iter: 400,
                equilibrate_enable: equilibrate,
                iterative_refinement_enable: refine,
                static_regularization_constant: regularization,
                ..DefaultSettings::default()
            };
            let mut solver = DefaultSolver::new(&p, &self.linear, &a, &b, &cones, settings)
                .map_err(|e| Error::Solver(e.to_string()))?;
            solver.solve();
            let sol = &solver.solution;
            match sol.status {
                SolverStatus::Solved | SolverStatus::AlmostSolved => {
                    return Ok(QpOutcome::Optimal { z: sol.x.clone() })
                }
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                    return Ok(QpOutcome::Infeasible)
                }
                other => last = other,
            }
        }
        Err(Error::Solver(format!("QP solver stopped with {last:?}")))
    }
}
