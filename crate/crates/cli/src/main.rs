use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use tiedcontact::krylov::{write_matrix_market, CsrMatrix, PreconditionerKind};
use tiedcontact::mesh::build_contact_model;
use tiedcontact::pipeline::{compare_row, run, CompareRow, Method, RunConfig, SolverKind};
use tiedcontact::vtk::write_vtk;

/// Tied-contact elasticity with mortar coupling on non-matching meshes.
#[derive(Parser, Debug)]
#[command(name = "tiedcontact", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the meshes and a JSON manifest of a benchmark model.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Assemble and solve one configuration.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Compare against a dense direct solve of the saddle system.
        #[arg(long)]
        verify: bool,
        /// Also write the saddle, condensed and mortar matrices.
        #[arg(long)]
        dump_matrices: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run several configurations and tabulate them.
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        /// `method:preconditioner`, e.g. `condensed:ssor` or `saddle:jac`; repeatable.
        #[arg(long = "run", value_name = "METHOD:PC")]
        runs: Vec<String>,
        /// Comma-separated resolutions for a refinement sweep (overrides --resolution).
        #[arg(long, value_delimiter = ',')]
        resolutions: Vec<usize>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        maxit: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Benchmark model: 1, 2 or 3.
    #[arg(long, default_value_t = 1)]
    model: u8,
    /// Cells per unit length on master bodies.
    #[arg(long, default_value_t = 8)]
    resolution: usize,
    /// Ratio of slave to master mesh density.
    #[arg(long, default_value_t = 1.5)]
    mismatch: f64,
}

#[derive(Args, Debug, Clone)]
struct SolverArgs {
    #[arg(long, default_value = "condensed")]
    method: String,
    /// cg or gcr; defaults to the method's solver.
    #[arg(long)]
    solver: Option<String>,
    /// jac, ssor, bjac, simple or none; defaults to ssor (condensed) or jac (saddle).
    #[arg(long)]
    pc: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    maxit: usize,
}

fn default_pc(method: Method) -> PreconditionerKind {
    match method {
        Method::Condensed => PreconditionerKind::SSOR_DEFAULT,
        Method::Saddle => PreconditionerKind::Jacobi,
    }
}

fn parse_solver(s: &str) -> Result<SolverKind> {
    match s {
        "cg" => Ok(SolverKind::Cg),
        "gcr" => Ok(SolverKind::Gcr),
        other => bail!("unknown solver `{other}` (expected cg or gcr)"),
    }
}

fn run_config(model: &ModelArgs, s: &SolverArgs, verify: bool) -> Result<RunConfig> {
    let method: Method = s.method.parse()?;
    let pc = match &s.pc {
        Some(p) => p.parse()?,
        None => default_pc(method),
    };
    let mut cfg = RunConfig::new(model.model, model.resolution, model.mismatch, method, pc);
    if let Some(solver) = &s.solver {
        cfg.solver = parse_solver(solver)?;
    }
    cfg.tol = s.tol;
    cfg.maxit = s.maxit;
    cfg.verify = verify;
    cfg.validate()?;
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot create {}", path.display()))?))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    serde_json::to_writer_pretty(create(path)?, value)?;
    Ok(())
}

fn write_mtx(path: &Path, a: &CsrMatrix) -> Result<()> {
    write_matrix_market(a, &mut create(path)?)?;
    Ok(())
}

fn cmd_generate(model: &ModelArgs, out: &Path) -> Result<()> {
    let m = build_contact_model(model.model, model.resolution, model.mismatch)?;
    fs::create_dir_all(out)?;
    let mut bodies = Vec::new();
    for (b, mesh) in m.bodies.iter().enumerate() {
        let file = format!("body{b}.mesh");
        fs::write(out.join(&file), mesh.to_text())?;
        bodies.push(json!({
            "index": b,
            "file": file,
            "nodes": mesh.node_count(),
            "triangles": mesh.triangles().len(),
            "material": m.materials[b],
        }));
    }
    let manifest = json!({
        "model": model.model,
        "resolution": model.resolution,
        "mismatch": model.mismatch,
        "bodies": bodies,
        "surfaces": m.surfaces,
        "dirichlet": m.dirichlet,
        "tractions": m.tractions,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    println!("wrote {} bodies and manifest to {}", m.bodies.len(), out.display());
    Ok(())
}

fn cmd_solve(cfg: &RunConfig, dump: bool, out: &Path) -> Result<bool> {
    let outcome = run(cfg)?;
    fs::create_dir_all(out)?;
    let report = outcome.to_report();
    write_json(&out.join("report.json"), &report)?;
    let fields = outcome.fields();
    write_vtk(&fields, create(&out.join("solution.vtk"))?)?;
    write_json(&out.join("fields.json"), &fields)?;
    if dump {
        write_mtx(&out.join("saddle.mtx"), &outcome.saddle.a)?;
        for pair in &outcome.saddle.mortars {
            write_mtx(&out.join(format!("mortar_d{}.mtx", pair.surface)), &pair.d)?;
            write_mtx(&out.join(format!("mortar_m{}.mtx", pair.surface)), &pair.m)?;
        }
        if let Some(c) = &outcome.condensed {
            write_mtx(&out.join("condensed.mtx"), &c.a_hat)?;
            write_mtx(&out.join("elimination_p.mtx"), &c.ops.p)?;
            write_mtx(&out.join("elimination_f.mtx"), &c.ops.f)?;
        }
    }
    let r = &report.solve;
    println!(
        "{} {}+{}: n={} nit={} r_rel={:.3e} converged={} full residual={:.3e}",
        cfg.method, r.method, r.preconditioner, r.n, r.nit, r.rel_residual_final, r.converged,
        report.full_rel_residual
    );
    if let Some(v) = report.verification {
        println!("dense oracle: max relative deviation {:.3e}", v.max_rel_deviation);
    }
    Ok(r.converged)
}

fn parse_run(spec: &str) -> Result<(Method, PreconditionerKind)> {
    let (m, p) = spec.split_once(':').with_context(|| format!("run `{spec}` is not METHOD:PC"))?;
    Ok((m.parse()?, p.parse()?))
}

fn cmd_compare(model: &ModelArgs, runs: &[String], resolutions: &[usize], tol: f64, maxit: usize, out: &Path) -> Result<()> {
    if runs.is_empty() {
        bail!("compare needs at least one --run METHOD:PC");
    }
    let runs: Vec<_> = runs.iter().map(|s| parse_run(s)).collect::<Result<_>>()?;
    let resolutions = if resolutions.is_empty() { vec![model.resolution] } else { resolutions.to_vec() };
    if runs.len() * resolutions.len() < 2 {
        bail!("compare needs at least two configurations (add --run or --resolutions)");
    }
    let mut rows: Vec<CompareRow> = Vec::new();
    for &res in &resolutions {
        for &(method, pc) in &runs {
            let mut cfg = RunConfig::new(model.model, res, model.mismatch, method, pc);
            cfg.tol = tol;
            cfg.maxit = maxit;
            rows.push(compare_row(&cfg)?);
        }
    }
    fs::create_dir_all(out)?;
    let mut csv = csv::Writer::from_path(out.join("compare.csv"))?;
    csv.write_record(CompareRow::HEADER)?;
    for row in &rows {
        csv.write_record(row.fields())?;
    }
    csv.flush()?;
    write_json(&out.join("compare.json"), &rows)?;
    println!("{:>10} {:>7} {:>4} {:>6} {:>10} {:>10}  status", "equation", "dofs", "pc", "nit", "r_rel", "t_tot_s");
    let opt = |v: Option<f64>| v.map_or("*".to_string(), |v| format!("{v:.3e}"));
    for r in &rows {
        let nit = r.nit.map_or("*".to_string(), |n| n.to_string());
        println!(
            "{:>10} {:>7} {:>4} {:>6} {:>10} {:>10}  {}",
            r.equation.to_string(), r.dofs, r.preconditioner, nit, opt(r.r_rel), opt(r.t_tot_s), r.status
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version requests are not errors
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Generate { model, out } => cmd_generate(model, out).map(|_| true),
        Command::Solve { model, solver, verify, dump_matrices, out } => {
            run_config(model, solver, *verify).and_then(|cfg| cmd_solve(&cfg, *dump_matrices, out))
        }
        Command::Compare { model, runs, resolutions, tol, maxit, out } => {
            cmd_compare(model, runs, resolutions, *tol, *maxit, out).map(|_| true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
