//! End-to-end runs: build a benchmark model, solve it through the condensed
//! or the saddle-point path, and summarize the result.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::condense::{condense, recover, CondenseTimings, CondensedSystem};
use crate::krylov::{
    cg, dense_solve, gcr, make_preconditioner, PreconditionerKind, PreconditionerTarget, SolveReport,
    StopRule, GCR_RESTART,
};
use crate::mesh::{build_contact_model, ContactModel};
use crate::mortar::QuadratureRule;
use crate::system::{build_saddle, nodal_displacements, SaddleSystem};
use crate::vtk::FieldExport;
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Condensed,
    Saddle,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Condensed => "condensed",
            Self::Saddle => "saddle",
        }
    }

    /// The Krylov method paired with each path.
    pub fn solver(&self) -> SolverKind {
        match self {
            Self::Condensed => SolverKind::Cg,
            Self::Saddle => SolverKind::Gcr,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "condensed" => Ok(Self::Condensed),
            "saddle" => Ok(Self::Saddle),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Cg,
    Gcr,
}

impl SolverKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Cg => "cg",
            Self::Gcr => "gcr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub model_id: u8,
    pub resolution: usize,
    pub mismatch: f64,
    pub method: Method,
    pub solver: SolverKind,
    pub preconditioner: PreconditionerKind,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
    /// Compare against a dense direct solve of the saddle system.
    pub verify: bool,
}

impl RunConfig {
    pub fn new(model_id: u8, resolution: usize, mismatch: f64, method: Method, preconditioner: PreconditionerKind) -> Self {
        Self {
            model_id,
            resolution,
            mismatch,
            method,
            solver: method.solver(),
            preconditioner,
            tol: StopRule::DEFAULT.tol,
            maxit: StopRule::DEFAULT.maxit,
            restart: GCR_RESTART,
            verify: false,
        }
    }

    pub fn validate(&self) -> Result<StopRule, Error> {
        if self.solver != self.method.solver() {
            return Err(Error::Config(format!(
                "method `{}` requires solver `{}`",
                self.method,
                self.method.solver().label()
            )));
        }
        if self.restart == 0 {
            return Err(Error::Config("restart length must be positive".into()));
        }
        Ok(StopRule::new(self.tol, self.maxit)?)
    }
}

/// Dense-oracle comparison of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    /// `max |x - x_dense| / max |x_dense|` over all saddle unknowns.
    pub max_rel_deviation: f64,
    pub dense_residual: f64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: RunConfig,
    pub model: ContactModel,
    pub saddle: SaddleSystem,
    pub condensed: Option<CondensedSystem>,
    /// Full saddle unknown vector (recovered for condensed runs).
    pub x: Vec<f64>,
    pub report: SolveReport,
    pub verification: Option<Verification>,
}

/// JSON report written by the command-line tool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: u8,
    pub resolution: usize,
    pub mismatch: f64,
    pub equation: Method,
    pub dofs: usize,
    #[serde(flatten)]
    pub solve: SolveReport,
    pub tol: f64,
    pub maxit: usize,
    /// `||A x - b|| / ||b||` of the full saddle system.
    pub full_rel_residual: f64,
    /// `||G d|| / ||d||`.
    pub constraint_rel_residual: f64,
    pub condense_timings: Option<CondenseTimings>,
    pub verification: Option<Verification>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

impl RunOutcome {
    pub fn dofs(&self) -> usize {
        self.report.n
    }

    pub fn full_rel_residual(&self) -> f64 {
        self.saddle.relative_residual(&self.x)
    }

    pub fn constraint_rel_residual(&self) -> f64 {
        let d = &self.x[..self.saddle.n_displacement()];
        let nd = crate::system::norm(d);
        let g = self.saddle.constraint_residual(d);
        if nd > 0.0 {
            g / nd
        } else {
            g
        }
    }

    pub fn to_report(&self) -> RunReport {
        RunReport {
            model: self.config.model_id,
            resolution: self.config.resolution,
            mismatch: self.config.mismatch,
            equation: self.config.method,
            dofs: self.dofs(),
            solve: self.report.clone(),
            tol: self.config.tol,
            maxit: self.config.maxit,
            full_rel_residual: self.full_rel_residual(),
            constraint_rel_residual: self.constraint_rel_residual(),
            condense_timings: self.condensed.as_ref().map(|c| c.timings),
            verification: self.verification,
        }
    }

    pub fn fields(&self) -> FieldExport {
        let disp = nodal_displacements(&self.saddle.dofmap, &self.x);
        let multipliers = (0..self.saddle.dofmap.n_surfaces())
            .map(|k| {
                self.x[self.saddle.dofmap.surface_multiplier_range(k)]
                    .chunks(2)
                    .map(|c| [c[0], c[1]])
                    .collect()
            })
            .collect();
        FieldExport::new(&self.model.bodies, disp, multipliers)
    }
}

/// Solves the condensed system with CG and recovers the full solution.
/// `T_tot` is timed independently around condensation plus solve.
pub fn solve_condensed(
    saddle: &SaddleSystem,
    pc: PreconditionerKind,
    stop: StopRule,
) -> Result<(CondensedSystem, Vec<f64>, SolveReport), Error> {
    let start = Instant::now();
    let condensed = condense(saddle)?;
    let precond = make_preconditioner(pc, PreconditionerTarget::Matrix(&condensed.a_hat))?;
    let (x_hat, mut report) = cg(&condensed.a_hat, &condensed.b_hat, &*precond, stop)?;
    let t_tot = start.elapsed().as_secs_f64();
    report.t_con_s = Some(condensed.timings.total_s);
    report.t_tot_s = Some(t_tot);
    let x = recover(&x_hat, saddle, &condensed.ops)?;
    Ok((condensed, x, report))
}

/// Solves the saddle system directly with restarted GCR.
pub fn solve_saddle(
    saddle: &SaddleSystem,
    pc: PreconditionerKind,
    stop: StopRule,
    restart: usize,
) -> Result<(Vec<f64>, SolveReport), Error> {
    let precond = make_preconditioner(
        pc,
        PreconditionerTarget::Saddle { matrix: &saddle.a, n_primal: saddle.n_displacement() },
    )?;
    let (x, mut report) = gcr(&saddle.a, &saddle.b, &*precond, stop, restart)?;
    report.t_tot_s = Some(report.t_sol_s);
    Ok((x, report))
}

/// Dense LU of the full saddle system compared against `x`.
pub fn verify_dense(saddle: &SaddleSystem, x: &[f64]) -> Result<Verification, Error> {
    let xd = dense_solve(&saddle.a, &saddle.b)?;
    let diff: Vec<f64> = x.iter().zip(&xd).map(|(a, b)| a - b).collect();
    let scale = max_abs(&xd);
    Ok(Verification {
        max_rel_deviation: if scale > 0.0 { max_abs(&diff) / scale } else { max_abs(&diff) },
        dense_residual: saddle.relative_residual(&xd),
    })
}

pub fn build_model_system(config: &RunConfig) -> Result<(ContactModel, SaddleSystem), Error> {
    let model = build_contact_model(config.model_id, config.resolution, config.mismatch)?;
    let saddle = build_saddle(&model, QuadratureRule::Gauss2)?;
    Ok((model, saddle))
}

/// Builds, solves and optionally verifies one configuration.
pub fn run(config: &RunConfig) -> Result<RunOutcome, Error> {
    let stop = config.validate()?;
    let (model, saddle) = build_model_system(config)?;
    let (condensed, x, report) = match config.method {
        Method::Condensed => {
            let (c, x, r) = solve_condensed(&saddle, config.preconditioner, stop)?;
            (Some(c), x, r)
        }
        Method::Saddle => {
            let (x, r) = solve_saddle(&saddle, config.preconditioner, stop, config.restart)?;
            (None, x, r)
        }
    };
    let verification = if config.verify { Some(verify_dense(&saddle, &x)?) } else { None };
    Ok(RunOutcome { config: config.clone(), model, saddle, condensed, x, report, verification })
}

/// One line of a comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub model: u8,
    pub resolution: usize,
    pub mismatch: f64,
    pub equation: Method,
    pub dofs: usize,
    pub method: String,
    pub preconditioner: String,
    /// `None` when the preconditioner could not be built.
    pub nit: Option<usize>,
    pub r_rel: Option<f64>,
    pub converged: bool,
    pub t_con_s: Option<f64>,
    pub t_sol_s: Option<f64>,
    pub t_tot_s: Option<f64>,
    /// `ok`, `not_converged` or the construction error message.
    pub status: String,
}

impl CompareRow {
    pub const HEADER: [&'static str; 14] = [
        "model", "resolution", "mismatch", "equation", "dofs", "method", "preconditioner", "nit", "r_rel",
        "converged", "t_con_s", "t_sol_s", "t_tot_s", "status",
    ];

    pub fn fields(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_else(|| "*".into());
        vec![
            self.model.to_string(),
            self.resolution.to_string(),
            self.mismatch.to_string(),
            self.equation.to_string(),
            self.dofs.to_string(),
            self.method.clone(),
            self.preconditioner.clone(),
            self.nit.map(|n| n.to_string()).unwrap_or_else(|| "*".into()),
            opt(self.r_rel),
            self.converged.to_string(),
            opt(self.t_con_s),
            opt(self.t_sol_s),
            opt(self.t_tot_s),
            self.status.clone(),
        ]
    }
}

/// Runs `config` for a comparison table. Preconditioner construction
/// failures (e.g. zero diagonals of the raw saddle matrix) become rows with
/// empty results instead of errors.
pub fn compare_row(config: &RunConfig) -> Result<CompareRow, Error> {
    let stop = config.validate()?;
    let (_, saddle) = build_model_system(config)?;
    let mut row = CompareRow {
        model: config.model_id,
        resolution: config.resolution,
        mismatch: config.mismatch,
        equation: config.method,
        dofs: 0,
        method: config.solver.label().into(),
        preconditioner: config.preconditioner.label().into(),
        nit: None,
        r_rel: None,
        converged: false,
        t_con_s: None,
        t_sol_s: None,
        t_tot_s: None,
        status: String::new(),
    };
    let result = match config.method {
        Method::Condensed => {
            row.dofs = saddle.dofmap.range(crate::system::Part::Master).end;
            solve_condensed(&saddle, config.preconditioner, stop).map(|(_, _, r)| r)
        }
        Method::Saddle => {
            row.dofs = saddle.n();
            solve_saddle(&saddle, config.preconditioner, stop, config.restart).map(|(_, r)| r)
        }
    };
    match result {
        Ok(r) => {
            row.nit = Some(r.nit);
            row.r_rel = Some(r.rel_residual_final);
            row.converged = r.converged;
            row.t_con_s = r.t_con_s;
            row.t_sol_s = Some(r.t_sol_s);
            row.t_tot_s = r.t_tot_s;
            row.status = if r.converged { "ok".into() } else { "not_converged".into() };
        }
        Err(Error::Linalg(e)) => row.status = e.to_string(),
        Err(e) => return Err(e),
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_solver_pairing_enforced() {
        let mut c = RunConfig::new(3, 2, 1.0, Method::Condensed, PreconditionerKind::SSOR_DEFAULT);
        assert!(c.validate().is_ok());
        c.solver = SolverKind::Gcr;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = RunConfig::new(3, 2, 1.0, Method::Saddle, PreconditionerKind::Jacobi);
        c.tol = 1.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn condensed_run_converges_and_recovers() {
        let c = RunConfig::new(2, 3, 1.5, Method::Condensed, PreconditionerKind::SSOR_DEFAULT);
        let out = run(&c).unwrap();
        assert!(out.report.converged);
        assert!(out.full_rel_residual() <= 1e-8);
        let rep = out.to_report();
        assert!(rep.solve.t_tot_s.unwrap() >= rep.solve.t_sol_s);
    }

    #[test]
    fn saddle_block_jacobi_row_is_starred() {
        let c = RunConfig::new(3, 2, 1.0, Method::Saddle, PreconditionerKind::BLOCK_JACOBI_DEFAULT);
        let row = compare_row(&c).unwrap();
        assert_eq!(row.nit, None);
        assert!(row.status.contains("zero diagonal"), "{}", row.status);
        assert_eq!(row.fields()[7], "*");
    }
}
