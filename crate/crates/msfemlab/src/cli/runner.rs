//! Command dispatch: orchestrates meshes, offline data and solves, emits
//! the output files, and maps outcomes to exit codes.

use crate::analysis::{gap_sweep, homogenization_check, identity_report, ErrorRow};
use crate::cli::config::{Command, RunConfig};
use crate::cli::report;
use crate::error::{Error, Result};
use crate::fem::{h1_norm_diff, CoefficientField, QuadratureRule, SolveMethod};
use crate::mesh::{build_global_fine, build_structured_coarse};
use crate::offline::run_offline;
use crate::solvers::{
    inject_structured, interpolate_onto_fine, solve_msfem_galerkin_with, solve_msfem_pg_with,
    solve_nonintrusive_with, solve_reference, solve_standard_p1, Variant,
};

/// Run one command; returns the process exit code (0 success, 1 when the
/// identities command finds a violated threshold).
pub fn run(config: &RunConfig) -> Result<i32> {
    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Numeric(format!("cannot build worker pool: {e}")))?;
        pool.install(|| dispatch(config))
    } else {
        dispatch(config)
    }
}

fn dispatch(config: &RunConfig) -> Result<i32> {
    std::fs::create_dir_all(&config.output_dir)?;
    // converge and homog-check derive their refinement levels themselves
    let uses_configured_level = matches!(
        config.command,
        Command::Solve | Command::Compare | Command::Identities
    );
    if uses_configured_level {
        if let Some(msg) = crate::fem::resolution_warning(&config.coefficient, config.fine_h()) {
            eprintln!("warning: {msg}");
        }
    }
    let quad = QuadratureRule::edge_midpoint();
    match config.command {
        Command::Solve => run_solve(config, &quad),
        Command::Compare => run_compare(config, &quad),
        Command::Converge => run_converge(config, &quad),
        Command::HomogCheck => run_homog_check(config, &quad),
        Command::Identities => run_identities(config, &quad),
    }
}

fn solver_method(config: &RunConfig) -> Option<SolveMethod> {
    match config.solver.as_str() {
        "cg" => Some(SolveMethod::Cg { tol: config.tol, max_iterations: config.max_iterations }),
        _ => None,
    }
}

fn run_solve(config: &RunConfig, quad: &QuadratureRule) -> Result<i32> {
    let coarse = build_structured_coarse(config.n)?;
    let global = build_global_fine(&coarse, config.level)?;
    let out = |name: &str| config.output_dir.join(name);

    if config.variant == Variant::Reference {
        let u = solve_reference(
            &global,
            &config.coefficient,
            &config.source,
            quad,
            solver_method(config).as_ref(),
        )?;
        report::write_solution_csv(&out("solution_reference.csv"), &u)?;
        println!("wrote {}", out("solution_reference.csv").display());
        return Ok(0);
    }

    let with_basis = config.variant == Variant::Galerkin;
    let t0 = std::time::Instant::now();
    let offline = run_offline(&coarse, &config.coefficient, config.level, quad, with_basis)?;
    let offline_seconds = t0.elapsed().as_secs_f64();

    let mut sol = match config.variant {
        Variant::Galerkin => solve_msfem_galerkin_with(
            &coarse,
            &config.coefficient,
            &config.source,
            &offline,
            &global,
            quad,
        )?,
        Variant::PetrovGalerkin => solve_msfem_pg_with(
            &coarse,
            &config.coefficient,
            &config.source,
            &offline,
            &global,
            quad,
        )?,
        Variant::NonIntrusive => solve_nonintrusive_with(
            &coarse,
            &config.coefficient,
            &config.source,
            &offline,
            &global,
            quad,
        )?,
        Variant::Reference => unreachable!(),
    };
    sol.diagnostics.offline_seconds = offline_seconds;

    let solution_file = out(&format!("solution_{}.csv", sol.variant.as_str()));
    report::write_solution_csv(&solution_file, &sol.fine)?;
    report::write_tensors_csv(&out("tensors.csv"), &offline.tensors)?;
    println!(
        "variant = {}  offline = {:.3}s  assembly = {:.3}s  solve = {:.3}s  reconstruct = {:.3}s  residual = {:.3e}",
        sol.variant.as_str(),
        sol.diagnostics.offline_seconds,
        sol.diagnostics.assembly_seconds,
        sol.diagnostics.solve_seconds,
        sol.diagnostics.reconstruct_seconds,
        sol.diagnostics.solver_residual,
    );
    println!("wrote {}", solution_file.display());
    println!("wrote {}", out("tensors.csv").display());
    Ok(0)
}

fn run_compare(config: &RunConfig, quad: &QuadratureRule) -> Result<i32> {
    let fine_div = config.n * (1usize << config.level);
    if !config.n_ref.is_multiple_of(fine_div) || !(config.n_ref / fine_div).is_power_of_two() {
        return Err(Error::Usage(format!(
            "key 'n_ref': fine divisions {fine_div} (n * 2^r) must nest in n_ref = {}",
            config.n_ref
        )));
    }
    let eps = config.coefficient.epsilon().unwrap_or(f64::NAN);

    let ref_coarse = build_structured_coarse(config.n_ref)?;
    let ref_global = build_global_fine(&ref_coarse, 0)?;
    let u_ref = solve_reference(
        &ref_global,
        &config.coefficient,
        &config.source,
        quad,
        solver_method(config).as_ref(),
    )?;

    let coarse = build_structured_coarse(config.n)?;
    let offline = run_offline(&coarse, &config.coefficient, config.level, quad, true)?;
    let global = build_global_fine(&coarse, config.level)?;

    let galerkin = solve_msfem_galerkin_with(
        &coarse,
        &config.coefficient,
        &config.source,
        &offline,
        &global,
        quad,
    )?;
    let pg = solve_msfem_pg_with(
        &coarse,
        &config.coefficient,
        &config.source,
        &offline,
        &global,
        quad,
    )?;
    let p1 = solve_standard_p1(&coarse, &config.coefficient, &config.source, quad)?;
    let p1_fine = interpolate_onto_fine(&p1, &coarse, &global)?;

    let g_ref = inject_structured(&galerkin.fine, &ref_global)?;
    let pg_ref = inject_structured(&pg.fine, &ref_global)?;
    let p1_ref = inject_structured(&p1_fine, &ref_global)?;

    let row = ErrorRow {
        n: config.n,
        h: 1.0 / config.n as f64,
        h_over_eps: 1.0 / (config.n as f64 * eps),
        err_g_ref: h1_norm_diff(&g_ref, &u_ref)?,
        err_g_pg: h1_norm_diff(&g_ref, &pg_ref)?,
        err_pg_ref: h1_norm_diff(&pg_ref, &u_ref)?,
        err_p1_ref: h1_norm_diff(&p1_ref, &u_ref)?,
    };
    let path = config.output_dir.join("errors.csv");
    report::write_errors_csv(&path, &[row])?;
    println!(
        "H/eps = {:.4}  err_G_ref = {:.6e}  err_G_PG = {:.6e}  err_PG_ref = {:.6e}  err_P1_ref = {:.6e}",
        row.h_over_eps, row.err_g_ref, row.err_g_pg, row.err_pg_ref, row.err_p1_ref
    );
    println!("wrote {}", path.display());
    Ok(0)
}

fn run_converge(config: &RunConfig, quad: &QuadratureRule) -> Result<i32> {
    let report_data = gap_sweep(
        &config.coefficient,
        &config.source,
        &config.n_list,
        config.n_ref,
        quad,
    )?;
    let path = config.output_dir.join("errors.csv");
    report::write_errors_csv(&path, &report_data.rows)?;
    for warning in &report_data.warnings {
        eprintln!("warning: {warning}");
    }
    for row in &report_data.rows {
        println!(
            "n = {:4}  H/eps = {:8.4}  err_G_ref = {:.6e}  err_G_PG = {:.6e}  err_PG_ref = {:.6e}  err_P1_ref = {:.6e}",
            row.n, row.h_over_eps, row.err_g_ref, row.err_g_pg, row.err_pg_ref, row.err_p1_ref
        );
    }
    let fmt = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
    println!(
        "fitted slopes (log err vs log H): G_ref = {}  G_PG = {}  PG_ref = {}  P1_ref = {}",
        fmt(report_data.slopes.g_ref),
        fmt(report_data.slopes.g_pg),
        fmt(report_data.slopes.pg_ref),
        fmt(report_data.slopes.p1_ref),
    );
    println!("wrote {}", path.display());
    Ok(0)
}

fn run_homog_check(config: &RunConfig, quad: &QuadratureRule) -> Result<i32> {
    let (a_minus, a_plus) = match config.coefficient {
        CoefficientField::Layered { a_minus, a_plus, .. } => (a_minus, a_plus),
        _ => {
            return Err(Error::Usage(
                "key 'coefficient': homog-check requires the layered coefficient".into(),
            ))
        }
    };
    let h = 1.0 / config.n as f64;
    let eps_list = config
        .eps_list
        .clone()
        .unwrap_or_else(|| vec![h / 8.0, h / 16.0, h / 32.0]);
    let rows = homogenization_check(a_minus, a_plus, &eps_list, config.n, quad)?;
    let path = config.output_dir.join("homog.csv");
    report::write_homog_csv(&path, &rows)?;
    let mut monotone = true;
    for pair in rows.windows(2) {
        if pair[1].max_dev > pair[0].max_dev * (1.0 + 1e-12) {
            monotone = false;
        }
    }
    for row in &rows {
        println!(
            "eps = {:.6e}  r = {}  max_dev = {:.6e}  sample = diag({:.6}, {:.6})  target = diag({}, {})",
            row.epsilon,
            row.level,
            row.max_dev,
            row.sample.a[0][0],
            row.sample.a[1][1],
            row.target.a[0][0],
            row.target.a[1][1],
        );
    }
    println!("deviation trend non-increasing: {monotone}");
    println!("wrote {}", path.display());
    Ok(0)
}

fn run_identities(config: &RunConfig, quad: &QuadratureRule) -> Result<i32> {
    let coarse = build_structured_coarse(config.n)?;
    let report_data = identity_report(
        &coarse,
        &config.coefficient,
        &config.source,
        config.level,
        quad,
        config.seed,
    )?;
    let text = report_data.render();
    let path = config.output_dir.join("identities.txt");
    std::fs::write(&path, &text)?;
    print!("{text}");
    println!("wrote {}", path.display());
    Ok(if report_data.passes() { 0 } else { 1 })
}
