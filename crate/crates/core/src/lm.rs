//! Levenberg-Marquardt for small dense nonlinear least squares.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Jacobian stored by column: `(row, value)` nonzeros, rows ascending.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ColumnJacobian {
    pub rows: usize,
    pub columns: Vec<Vec<(usize, f64)>>,
}

impl ColumnJacobian {
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.rows, self.columns.len());
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                j[(r, c)] = v;
            }
        }
        j
    }

    /// `Jᵀ r`.
    pub fn transpose_mul(&self, r: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            self.columns.len(),
            self.columns.iter().map(|col| col.iter().map(|&(i, v)| v * r[i]).sum()),
        )
    }

    /// `JᵀJ`, accumulated row by row.
    pub fn normal_matrix(&self) -> DMatrix<f64> {
        let n = self.columns.len();
        let mut by_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.rows];
        for (c, col) in self.columns.iter().enumerate() {
            for &(r, v) in col {
                by_row[r].push((c, v));
            }
        }
        let mut jtj = DMatrix::zeros(n, n);
        for row in &by_row {
            for &(a, va) in row {
                for &(b, vb) in row {
                    if b >= a {
                        jtj[(a, b)] += va * vb;
                    }
                }
            }
        }
        jtj.fill_lower_triangle_with_upper_triangle();
        jtj
    }
}

pub trait LeastSquares {
    fn parameter_count(&self) -> usize;
    fn residual_count(&self) -> usize;
    fn residuals(&self, x: &[f64], out: &mut [f64]);

    /// Forward-difference step for parameter `j`.
    fn step(&self, _j: usize) -> f64 {
        1e-6
    }

    /// Forward-difference Jacobian at `x`, whose residuals are `r`.
    fn jacobian(&self, x: &[f64], r: &[f64]) -> ColumnJacobian {
        let mut xp = x.to_vec();
        let mut rp = vec![0.0; r.len()];
        let columns = (0..x.len())
            .map(|j| {
                let h = self.step(j);
                xp[j] = x[j] + h;
                self.residuals(&xp, &mut rp);
                xp[j] = x[j];
                rp.iter()
                    .zip(r)
                    .enumerate()
                    .filter_map(|(i, (a, b))| {
                        let d = (a - b) / h;
                        (d != 0.0).then_some((i, d))
                    })
                    .collect()
            })
            .collect();
        ColumnJacobian {
            rows: r.len(),
            columns,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    /// Stop when an accepted step lowers the energy by less than this
    /// fraction.
    pub ftol: f64,
    /// Stop when `max |Jᵀr|` falls below this.
    pub gtol: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub max_damping: f64,
    pub deadline: Option<Instant>,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            ftol: 1e-6,
            gtol: 1e-8,
            max_iterations: 200,
            initial_damping: 1e-3,
            max_damping: 1e32,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ZeroEnergy,
    FunctionTolerance,
    GradientTolerance,
    MaxIterations,
    DampingLimit,
    Deadline,
    NoParameters,
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub x: Vec<f64>,
    /// Energy `Σ r²` at the start and after every accepted step.
    pub energy_trace: Vec<f64>,
    pub iterations: usize,
    pub rejected: usize,
    pub termination: Termination,
    /// Damping at exit; pass back as `initial_damping` to warm start.
    pub damping: f64,
}

impl LmReport {
    pub fn energy(&self) -> f64 {
        *self.energy_trace.last().unwrap_or(&0.0)
    }
}

fn energy(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(problem: &P, x0: &[f64], opts: &LmOptions) -> Result<LmReport> {
    let n = problem.parameter_count();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("expected {n} parameters, got {}", x0.len())));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; problem.residual_count()];
    problem.residuals(&x, &mut r);
    let mut e = energy(&r);
    if !e.is_finite() {
        return Err(Error::Optimization("non-finite energy at the starting point".into()));
    }
    let mut report = LmReport {
        x: Vec::new(),
        energy_trace: vec![e],
        iterations: 0,
        rejected: 0,
        termination: Termination::MaxIterations,
        damping: opts.initial_damping,
    };
    let mut damping = opts.initial_damping;
    let mut trial = vec![0.0; n];
    let mut rt = vec![0.0; r.len()];

    let termination = 'outer: {
        if n == 0 {
            break 'outer Termination::NoParameters;
        }
        if e == 0.0 {
            break 'outer Termination::ZeroEnergy;
        }
        while report.iterations < opts.max_iterations {
            if opts.deadline.is_some_and(|d| Instant::now() >= d) {
                break 'outer Termination::Deadline;
            }
            report.iterations += 1;
            let jac = problem.jacobian(&x, &r);
            let g = jac.transpose_mul(&r);
            if g.amax() <= opts.gtol {
                break 'outer Termination::GradientTolerance;
            }
            let jtj = jac.normal_matrix();
            let diag_floor = 1e-12 * jtj.diagonal().amax().max(1e-300);
            loop {
                if damping > opts.max_damping {
                    break 'outer Termination::DampingLimit;
                }
                let mut a = jtj.clone();
                for i in 0..n {
                    a[(i, i)] += damping * jtj[(i, i)].max(diag_floor);
                }
                let Some(chol) = a.cholesky() else {
                    damping *= 4.0;
                    report.rejected += 1;
                    continue;
                };
                let delta = chol.solve(&(-&g));
                for i in 0..n {
                    trial[i] = x[i] + delta[i];
                }
                problem.residuals(&trial, &mut rt);
                let et = energy(&rt);
                if et.is_finite() && et < e {
                    let decrease = e - et;
                    std::mem::swap(&mut x, &mut trial);
                    std::mem::swap(&mut r, &mut rt);
                    e = et;
                    report.energy_trace.push(e);
                    damping /= 3.0;
                    if e == 0.0 {
                        break 'outer Termination::ZeroEnergy;
                    }
                    if decrease <= opts.ftol * (e + decrease) {
                        break 'outer Termination::FunctionTolerance;
                    }
                    break;
                }
                damping *= 4.0;
                report.rejected += 1;
                if opts.deadline.is_some_and(|d| Instant::now() >= d) {
                    break 'outer Termination::Deadline;
                }
            }
        }
        Termination::MaxIterations
    };
    report.termination = termination;
    report.damping = damping;
    report.x = x;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl LeastSquares for Rosenbrock {
        fn parameter_count(&self) -> usize {
            2
        }
        fn residual_count(&self) -> usize {
            2
        }
        fn residuals(&self, x: &[f64], out: &mut [f64]) {
            out[0] = 10.0 * (x[1] - x[0] * x[0]);
            out[1] = 1.0 - x[0];
        }
        fn step(&self, _j: usize) -> f64 {
            1e-8
        }
    }

    #[test]
    fn rosenbrock_reaches_the_minimum() {
        let opts = LmOptions {
            ftol: 1e-14,
            ..Default::default()
        };
        let rep = levenberg_marquardt(&Rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert!((rep.x[0] - 1.0).abs() < 1e-5 && (rep.x[1] - 1.0).abs() < 1e-5, "{:?}", rep);
        for w in rep.energy_trace.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    /// Linear problem `A x = b` with a closed-form least-squares answer.
    struct Linear {
        a: DMatrix<f64>,
        b: DVector<f64>,
    }

    impl LeastSquares for Linear {
        fn parameter_count(&self) -> usize {
            self.a.ncols()
        }
        fn residual_count(&self) -> usize {
            self.a.nrows()
        }
        fn residuals(&self, x: &[f64], out: &mut [f64]) {
            let r = &self.a * DVector::from_column_slice(x) - &self.b;
            out.copy_from_slice(r.as_slice());
        }
    }

    #[test]
    fn linear_problem_matches_normal_equations() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 1.0, 1.0, 2.0, 1.0, 3.0]);
        let b = DVector::from_column_slice(&[6.0, 5.0, 7.0, 10.0]);
        let exact = (a.transpose() * &a).cholesky().unwrap().solve(&(a.transpose() * &b));
        let p = Linear { a, b };
        let rep = levenberg_marquardt(&p, &[0.0, 0.0], &LmOptions::default()).unwrap();
        assert!((rep.x[0] - exact[0]).abs() < 1e-4);
        assert!((rep.x[1] - exact[1]).abs() < 1e-4);
    }

    #[test]
    fn zero_residual_start_is_returned_untouched() {
        let p = Linear {
            a: DMatrix::identity(2, 2),
            b: DVector::from_column_slice(&[0.5, -0.25]),
        };
        let rep = levenberg_marquardt(&p, &[0.5, -0.25], &LmOptions::default()).unwrap();
        assert_eq!(rep.x, vec![0.5, -0.25]);
        assert_eq!(rep.termination, Termination::ZeroEnergy);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn normal_matrix_matches_dense_product() {
        let jac = ColumnJacobian {
            rows: 3,
            columns: vec![vec![(0, 1.0), (2, 2.0)], vec![(1, -1.0), (2, 3.0)], vec![]],
        };
        let d = jac.to_dense();
        assert_eq!(jac.normal_matrix(), d.transpose() * &d);
        let r = [1.0, 2.0, 3.0];
        assert_eq!(jac.transpose_mul(&r), d.transpose() * DVector::from_column_slice(&r));
    }

    #[test]
    fn expired_deadline_stops_before_stepping() {
        let opts = LmOptions {
            deadline: Some(Instant::now()),
            ..Default::default()
        };
        let rep = levenberg_marquardt(&Rosenbrock, &[-1.2, 1.0], &opts).unwrap();
        assert_eq!(rep.termination, Termination::Deadline);
        assert_eq!(rep.x, vec![-1.2, 1.0]);
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        assert!(levenberg_marquardt(&Rosenbrock, &[0.0], &LmOptions::default()).is_err());
    }

    #[test]
    fn non_finite_start_is_rejected() {
        assert!(levenberg_marquardt(&Rosenbrock, &[f64::NAN, 0.0], &LmOptions::default()).is_err());
    }
}
