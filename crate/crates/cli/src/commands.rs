//! The subcommands. Each returns the text for stdout and an exit code;
//! files go to the output directory, written atomically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use quasilin_core::fixpoint::{
    classify_monotonicity, convergence_predicate, iterate, IterateOptions, IterationMode, IterationReport, PsiKind,
    Termination,
};
use quasilin_core::linearf::{solve_multi, solve_reduced, solve_single, LinearOutcome, Outcome};
use quasilin_core::matcore::{FunctionalSpec, LinearFunctional};
use quasilin_core::mech::{projection_demo, ElasticityIso, Scheme};
use quasilin_core::polyf::{
    solve_frobenius, solve_trace_inverse, solve_trace_inverse_rank1m, solve_trace_inverse_rank1n,
    solve_trace_power2, solve_trace_power_general, RejectReason, Solution, SolutionSet,
};
use quasilin_core::scalarnl::{
    assemble, fixed_point_solve, newton_solve, reduce, scan_roots, ScalarFn, ScalarMethod, ScalarOptions,
};
use quasilin_core::Mat;

use crate::instances::{randn, randn_vec, rng, table1_instance, trajectory_instance};
use crate::problem_file::{self, ProblemForm, SolveSettings};
use crate::{atomic_write, mmio, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Clone, Debug, Default)]
pub struct Common {
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mode: Option<IterationMode>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
}

impl Common {
    fn iterate_options(&self) -> IterateOptions {
        let d = IterateOptions::default();
        IterateOptions {
            tol: self.tol.unwrap_or(d.tol),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            mode: self.mode.unwrap_or(d.mode),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub exit_code: i32,
}

/// Files of one command, written together once the command has finished.
#[derive(Default)]
struct Files(Vec<(String, Vec<u8>)>);

impl Files {
    fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.0.push((name.into(), bytes.into()));
    }

    fn mat(&mut self, name: impl Into<String>, m: &Mat) {
        self.add(name, mmio::to_string(m));
    }

    fn write(self, dir: &Path) -> Result<(), CliError> {
        for (name, bytes) in self.0 {
            atomic_write(&dir.join(name), &bytes)?;
        }
        Ok(())
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Non-finite values become `null` in JSON.
fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

fn mode_name(m: IterationMode) -> &'static str {
    match m {
        IterationMode::Diagonalized => "diag",
        IterationMode::Direct => "direct",
    }
}

fn psi_name(p: PsiKind) -> &'static str {
    match p {
        PsiKind::ExpNeg => "exp_neg",
        PsiKind::Sqrt => "sqrt",
    }
}

// ---------------------------------------------------------------- solve

/// Solves the problem in `path`, writing `solution.mtx` (when there is one)
/// and `report.json` to the output directory (default `.`).
///
/// Exit code 0 for a verified solution (or solution family), 2 when there
/// is none or the iteration did not converge, 1 for input errors.
pub fn cmd_solve(path: &Path, c: &Common) -> Result<Output, CliError> {
    let loaded = problem_file::load(path)?;
    let mut s = loaded.settings;
    if c.tol.is_some() {
        s.tol = c.tol;
    }
    if c.max_iter.is_some() {
        s.max_iter = c.max_iter;
    }
    if let Some(m) = c.mode {
        s.mode = m;
    }
    let form = &loaded.form;
    let mut files = Files::default();
    let (report, code) = if form.terms().iter().all(|t| t.f.is_linear()) {
        solve_linear(form, &mut files)?
    } else {
        let red = form.reduced()?;
        let (m, n, f) = (&red.m, &red.terms[0].c, &red.terms[0].f);
        match f {
            FunctionalSpec::PowerTrace(2) => polynomial(form, solve_trace_power2(m, n), "trace_power", &mut files)?,
            FunctionalSpec::PowerTrace(p) => {
                polynomial(form, solve_trace_power_general(m, n, *p), "trace_power", &mut files)?
            }
            FunctionalSpec::FrobeniusSq => polynomial(form, solve_frobenius(m, n), "frobenius_sq", &mut files)?,
            FunctionalSpec::InverseTrace => polynomial(form, solve_trace_inverse(m, n), "trace_inverse", &mut files)?,
            FunctionalSpec::TracePsi(psi) => fixed_point(form, m, n, *psi, &s, c.format, &mut files)?,
            FunctionalSpec::GOfLinear { g, h } => scalar(form, m, n, g, h, &s, &mut files)?,
            FunctionalSpec::Linear(_) => unreachable!("linear problems are dispatched above"),
        }
    };
    let text = pretty(&report);
    files.add("report.json", text.clone());
    files.write(c.out.as_deref().unwrap_or(Path::new(".")))?;
    Ok(Output { stdout: text, exit_code: code })
}

fn solve_linear(form: &ProblemForm, files: &mut Files) -> Result<(Value, i32), CliError> {
    let out: LinearOutcome = match form {
        ProblemForm::Full(p) if p.terms.len() == 1 => solve_single(p)?,
        ProblemForm::Full(p) => solve_multi(p)?,
        ProblemForm::Reduced(r) => solve_reduced(r)?,
    };
    let d = &out.diagnostics;
    let diag = json!({
        "f_matrix": d.f_matrix,
        "f_rhs": d.f_rhs,
        "f_norm1": num(d.f_norm1),
        "norm_condition": d.norm_condition,
        "min_singular_value": num(d.min_singular_value),
    });
    Ok(match &out.outcome {
        Outcome::Unique { x, sigma } => {
            files.mat("solution.mtx", x);
            let res = form.relative_residual(x)?;
            let v = json!({
                "status": "solved",
                "solver": "linear",
                "sigma": sigma,
                "relative_residual": res,
                "solution": "solution.mtx",
                "diagnostics": diag,
            });
            (v, 0)
        }
        Outcome::NonUniqueFamily { base, directions } => {
            files.mat("solution.mtx", base);
            let mut names = Vec::new();
            for (k, dir) in directions.iter().enumerate() {
                let name = format!("direction_{k}.mtx");
                files.mat(name.clone(), dir);
                names.push(name);
            }
            let v = json!({
                "status": "non_unique",
                "solver": "linear",
                "relative_residual": form.relative_residual(base)?,
                "solution": "solution.mtx",
                "directions": names,
                "diagnostics": diag,
            });
            (v, 0)
        }
        Outcome::NoSolution => (json!({"status": "no_solution", "solver": "linear", "diagnostics": diag}), 2),
    })
}

fn complex_json(re: f64, im: f64) -> Value {
    json!({"re": num(re), "im": num(im)})
}

fn reason_json(r: &RejectReason) -> Value {
    match r {
        RejectReason::ComplexRoot => json!({"reason": "complex_root"}),
        RejectReason::NegativeRoot => json!({"reason": "negative_root"}),
        RejectReason::SingularSolution => json!({"reason": "singular_solution"}),
        RejectReason::VerificationFailed { f_residual, eq_residual } => json!({
            "reason": "verification_failed",
            "f_residual": num(*f_residual),
            "eq_residual": num(*eq_residual),
        }),
    }
}

fn polynomial(
    form: &ProblemForm,
    set: quasilin_core::Result<SolutionSet>,
    solver: &str,
    files: &mut Files,
) -> Result<(Value, i32), CliError> {
    let set = match set {
        Err(quasilin_core::Error::NoRealSolution) => {
            return Ok((json!({"status": "no_real_solution", "solver": solver, "accepted": [], "spurious": []}), 2))
        }
        other => other?,
    };
    let mut accepted = Vec::new();
    let mut first = true;
    for (k, a) in set.entries.iter().enumerate() {
        let mut entry = json!({
            "root": complex_json(a.root.re, a.root.im),
            "f_residual": num(a.f_residual),
            "eq_residual": num(a.eq_residual),
        });
        if let Solution::Real(x) = &a.x {
            let name = format!("solution_{k}.mtx");
            files.mat(name.clone(), x);
            if first {
                files.mat("solution.mtx", x);
                first = false;
            }
            entry["solution"] = json!(name);
            entry["relative_residual"] = num(form.relative_residual(x)?);
        }
        accepted.push(entry);
    }
    let spurious: Vec<Value> = set
        .spurious
        .iter()
        .map(|r| {
            let mut v = reason_json(&r.reason);
            v["root"] = complex_json(r.root.re, r.root.im);
            v
        })
        .collect();
    let solved = !first;
    let mut v = json!({
        "status": if solved { "solved" } else { "no_real_solution" },
        "solver": solver,
        "coefficients": set.coefficients,
        "accepted": accepted,
        "spurious": spurious,
    });
    if solved {
        v["solution"] = json!("solution.mtx");
        v["relative_residual"] = accepted.iter().find_map(|a| a.get("relative_residual").cloned()).unwrap_or(Value::Null);
    }
    Ok((v, if solved { 0 } else { 2 }))
}

/// One row per iteration: `k, f_value, residual, ratio`.
pub fn iteration_csv(r: &IterationReport) -> String {
    let mut s = String::from("k,f_value,residual,ratio\n");
    let f = &r.f_values;
    for k in 1..=r.iterations() {
        let ratio = if k >= 2 {
            let den = (f[k - 1] - f[k - 2]).abs();
            if den > 0.0 {
                format!("{:.16e}", (f[k] - f[k - 1]).abs() / den)
            } else {
                String::new()
            }
        } else {
            String::new()
        };
        let _ = writeln!(s, "{k},{:.16e},{:.16e},{ratio}", f[k], r.residuals[k - 1]);
    }
    s
}

fn termination_json(t: Termination) -> Value {
    match t {
        Termination::Converged(k) => json!({"kind": "converged", "iterations": k}),
        Termination::IterationCap => json!({"kind": "iteration_cap"}),
        Termination::Diverged => json!({"kind": "diverged"}),
    }
}

pub fn iteration_json(r: &IterationReport) -> Value {
    json!({
        "iterations": r.iterations(),
        "termination": termination_json(r.termination),
        "mode": mode_name(r.mode),
        "cond_q": r.cond_q.map(num),
        "warning": r.warning,
        "f_values": r.f_values.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "residuals": r.residuals.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "contraction_ratios": r.contraction_ratios.iter().map(|&v| num(v)).collect::<Vec<_>>(),
        "sigma_estimate": num(r.sigma_estimate),
        "final_residual": num(r.final_residual()),
    })
}

fn fixed_point(
    form: &ProblemForm,
    m: &Mat,
    n: &Mat,
    psi: PsiKind,
    s: &SolveSettings,
    format: Format,
    files: &mut Files,
) -> Result<(Value, i32), CliError> {
    let d = IterateOptions::default();
    let opts = IterateOptions { tol: s.tol.unwrap_or(d.tol), max_iter: s.max_iter.unwrap_or(d.max_iter), mode: s.mode };
    let (x, report) = iterate(m, n, psi, opts)?;
    let mut v = json!({
        "solver": "fixed_point",
        "psi": psi_name(psi),
        "iteration": iteration_json(&report),
    });
    match format {
        Format::Csv => files.add("iterations.csv", iteration_csv(&report)),
        Format::Json => files.add("iterations.json", pretty(&iteration_json(&report))),
    }
    if report.converged() {
        files.mat("solution.mtx", &x);
        v["status"] = json!("solved");
        v["solution"] = json!("solution.mtx");
        v["relative_residual"] = num(form.relative_residual(&x)?);
        if let Ok((sigma, _)) = convergence_predicate(&x, n, psi) {
            v["sigma"] = num(sigma);
        }
        Ok((v, 0))
    } else {
        v["status"] = json!("no_convergence");
        Ok((v, 2))
    }
}

fn scalar(
    form: &ProblemForm,
    m: &Mat,
    n: &Mat,
    g: &ScalarFn,
    h: &LinearFunctional,
    s: &SolveSettings,
    files: &mut Files,
) -> Result<(Value, i32), CliError> {
    let (g1, g2) = reduce(m, n, h)?;
    let mut opts = match s.method {
        ScalarMethod::Newton => ScalarOptions::newton(),
        ScalarMethod::FixedPoint => ScalarOptions::fixed_point(),
    };
    if let Some(t) = s.tol {
        opts.tol = t;
    }
    if let Some(k) = s.max_iter {
        opts.max_iter = k;
    }
    let rep = match s.method {
        ScalarMethod::Newton => newton_solve(g, g1, g2, s.y0, opts)?,
        ScalarMethod::FixedPoint => fixed_point_solve(g, g1, g2, s.y0, opts)?,
    };
    let x = assemble(m, n, g, rep.y_star, h)?;
    files.mat("solution.mtx", &x);
    let v = json!({
        "status": "solved",
        "solver": match s.method { ScalarMethod::Newton => "newton", ScalarMethod::FixedPoint => "fixed_point" },
        "gamma1": num(g1),
        "gamma2": num(g2),
        "y_star": num(rep.y_star),
        "iterations": rep.iterates.len() - 1,
        "scalar_residual": num(rep.residual),
        "ostrowski_value": num(rep.ostrowski_value),
        "bracket": rep.bracket.map(|(a, b)| json!([num(a), num(b)])),
        "hypotheses_hold": rep.hypotheses_hold,
        "relative_residual": num(form.relative_residual(&x)?),
        "solution": "solution.mtx",
    });
    Ok((v, 0))
}

// ---------------------------------------------------------------- table1

/// Contraction factors of the sweep when none are given.
pub const TABLE1_SIGMAS: [f64; 7] = [0.079, 0.176, 0.335, 0.570, 0.889, 1.296, 1.789];

#[derive(Clone, Debug)]
pub struct Table1Row {
    pub sigma_target: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
    /// Mean of the last (up to five) contraction ratios.
    pub tail_ratio: f64,
}

/// Runs the exp iteration on manufactured instances, one per target `σ`.
/// All rows share one `(G, N)` pair drawn from the seed.
pub fn table1_rows(sigmas: &[f64], n: usize, c: &Common) -> Result<Vec<Table1Row>, CliError> {
    let opts = c.iterate_options();
    let rows = std::thread::scope(|scope| {
        let handles: Vec<_> = sigmas
            .iter()
            .map(|&sigma| {
                scope.spawn(move || -> Result<Table1Row, CliError> {
                    let inst = table1_instance(c.seed, n, sigma)?;
                    let (_, r) = iterate(&inst.m, &inst.n, PsiKind::ExpNeg, opts)?;
                    let tail = &r.contraction_ratios[r.contraction_ratios.len().saturating_sub(5)..];
                    let tail_ratio = if tail.is_empty() { f64::NAN } else { tail.iter().sum::<f64>() / tail.len() as f64 };
                    Ok(Table1Row {
                        sigma_target: sigma,
                        sigma: inst.sigma,
                        alpha: inst.alpha,
                        iterations: r.iterations(),
                        final_residual: r.final_residual(),
                        converged: r.converged(),
                        tail_ratio,
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep row panicked")).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(rows)
}

pub fn table1_csv(rows: &[Table1Row]) -> String {
    let mut s = String::from("sigma,alpha,iterations,final_residual,converged,tail_ratio\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.6},{:.6},{},{:.4e},{},{:.6}",
            r.sigma, r.alpha, r.iterations, r.final_residual, r.converged, r.tail_ratio
        );
    }
    s
}

pub fn cmd_table1(sigmas: &[f64], n: usize, c: &Common) -> Result<Output, CliError> {
    let rows = table1_rows(sigmas, n, c)?;
    let text = match c.format {
        Format::Csv => table1_csv(&rows),
        Format::Json => pretty(&Value::Array(
            rows.iter()
                .map(|r| {
                    json!({
                        "sigma": num(r.sigma),
                        "alpha": num(r.alpha),
                        "iterations": r.iterations,
                        "final_residual": num(r.final_residual),
                        "converged": r.converged,
                        "tail_ratio": num(r.tail_ratio),
                    })
                })
                .collect(),
        )),
    };
    if let Some(dir) = &c.out {
        let name = if c.format == Format::Csv { "table1.csv" } else { "table1.json" };
        atomic_write(&dir.join(name), text.as_bytes())?;
    }
    Ok(Output { stdout: text, exit_code: 0 })
}

// ---------------------------------------------------------------- fig1

/// Default stopping tolerance of the trajectory runs: the square root
/// iteration reaches `1e-7` within three steps on these instances, too few
/// to show its monotonicity.
pub const FIG1_TOL: f64 = 1e-12;

/// Diagonal element `(n/2, n/2)` (1-based) of `X₁⁽ᵏ⁾`, `k = 1, 2, …`, for
/// the manufactured trajectory instance.
pub fn fig1_trajectory(psi: PsiKind, n: usize, n_scale: Option<f64>, c: &Common) -> Result<(Vec<f64>, IterationReport), CliError> {
    if n < 2 {
        return Err(CliError::Input("fig1 needs n ≥ 2".into()));
    }
    let inst = trajectory_instance(c.seed, n, psi, n_scale)?;
    let mut opts = c.iterate_options();
    if c.tol.is_none() {
        opts.tol = FIG1_TOL;
    }
    let (_, r) = iterate(&inst.m, &inst.n, psi, opts)?;
    let idx = n / 2 - 1;
    Ok((r.iterates_diag.iter().map(|d| d[idx]).collect(), r))
}

pub fn cmd_fig1(psi: PsiKind, n: usize, n_scale: Option<f64>, c: &Common) -> Result<Output, CliError> {
    let (values, r) = fig1_trajectory(psi, n, n_scale, c)?;
    let class = classify_monotonicity(&r).map(|m| format!("{m:?}")).ok();
    let text = match c.format {
        Format::Csv => {
            let mut s = String::from("k,value\n");
            for (k, v) in values.iter().enumerate() {
                let _ = writeln!(s, "{},{:.16e}", k + 1, v);
            }
            s
        }
        Format::Json => pretty(&json!({
            "psi": psi_name(psi),
            "element": n / 2,
            "values": values.iter().map(|&v| num(v)).collect::<Vec<_>>(),
            "classification": class,
            "iteration": iteration_json(&r),
        })),
    };
    if let Some(dir) = &c.out {
        let name = format!("fig1_{}.{}", psi_name(psi), if c.format == Format::Csv { "csv" } else { "json" });
        atomic_write(&dir.join(name), text.as_bytes())?;
    }
    Ok(Output { stdout: text, exit_code: 0 })
}

// ---------------------------------------------------------------- example31

/// `trace(X⁻¹)` with rank-one `M` (cubic) and rank-one `N` (quadratic) on
/// normal random data: `|f(Xᵢ) − rᵢ|` for every root.
pub fn example31_residuals(n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = rng(seed);
    let (m1, m2) = (randn_vec(&mut r, n), randn_vec(&mut r, n));
    let nm = randn(&mut r, n, n);
    let left = solve_trace_inverse_rank1m(&m1, &m2, &nm)?;
    let (n1, n2) = (randn_vec(&mut r, n), randn_vec(&mut r, n));
    let mm = randn(&mut r, n, n);
    let right = solve_trace_inverse_rank1n(&mm, &n1, &n2)?;
    let res = |s: &SolutionSet| -> Vec<f64> {
        let mut v: Vec<f64> = s.entries.iter().map(|a| a.f_residual).collect();
        v.extend(s.spurious.iter().filter_map(|r| match r.reason {
            RejectReason::VerificationFailed { f_residual, .. } => Some(f_residual),
            _ => None,
        }));
        v
    };
    Ok((res(&left), res(&right)))
}

pub fn cmd_example31(n: usize, c: &Common) -> Result<Output, CliError> {
    let (left, right) = example31_residuals(n, c.seed)?;
    let text = match c.format {
        Format::Csv => {
            let mut s = String::from("case,root,f_residual\n");
            for (k, v) in left.iter().enumerate() {
                let _ = writeln!(s, "rank_one_m,{},{:.4e}", k + 1, v);
            }
            for (k, v) in right.iter().enumerate() {
                let _ = writeln!(s, "rank_one_n,{},{:.4e}", k + 1, v);
            }
            s
        }
        Format::Json => pretty(&json!({"rank_one_m": left, "rank_one_n": right})),
    };
    if let Some(dir) = &c.out {
        let name = if c.format == Format::Csv { "example31.csv" } else { "example31.json" };
        atomic_write(&dir.join(name), text.as_bytes())?;
    }
    Ok(Output { stdout: text, exit_code: 0 })
}

// ---------------------------------------------------------------- demo

#[derive(Clone, Debug)]
pub struct DemoArgs {
    pub scheme: Scheme,
    pub steps: usize,
    pub young: f64,
    pub poisson: f64,
    pub mu0: f64,
    pub mu_factor: f64,
    /// `Ȳ` from a file; otherwise a seeded symmetric normal matrix.
    pub ybar: Option<PathBuf>,
    pub n: usize,
}

pub fn cmd_demo(a: &DemoArgs, c: &Common) -> Result<Output, CliError> {
    let ybar = match &a.ybar {
        Some(p) => mmio::read(p)?,
        None => randn(&mut rng(c.seed), a.n, a.n).symmetrized(),
    };
    let el = ElasticityIso::new(a.young, a.poisson)?;
    let steps = projection_demo(&ybar, &el, a.scheme, a.steps, a.mu0, a.mu_factor)?;
    let mut rows = Vec::new();
    for (k, st) in steps.iter().enumerate() {
        let ye = st.y.symmetric_eigenvalues()?;
        let se = st.s.symmetric_eigenvalues()?;
        rows.push((k + 1, st.mu, st.tau, st.step_residual, ye[0], se[0]));
    }
    let text = match c.format {
        Format::Csv => {
            let mut s = String::from("step,mu,tau,step_residual,min_eig_y,min_eig_s\n");
            for r in &rows {
                let _ = writeln!(s, "{},{:.6e},{:.6e},{:.4e},{:.6e},{:.6e}", r.0, r.1, r.2, r.3, r.4, r.5);
            }
            s
        }
        Format::Json => pretty(&Value::Array(
            rows.iter()
                .map(|r| {
                    json!({"step": r.0, "mu": num(r.1), "tau": num(r.2), "step_residual": num(r.3),
                           "min_eig_y": num(r.4), "min_eig_s": num(r.5)})
                })
                .collect(),
        )),
    };
    if let Some(dir) = &c.out {
        if let Some(last) = steps.last() {
            atomic_write(&dir.join("y.mtx"), mmio::to_string(&last.y).as_bytes())?;
            atomic_write(&dir.join("s.mtx"), mmio::to_string(&last.s).as_bytes())?;
        }
        let name = if c.format == Format::Csv { "demo.csv" } else { "demo.json" };
        atomic_write(&dir.join(name), text.as_bytes())?;
    }
    Ok(Output { stdout: text, exit_code: 0 })
}

// ---------------------------------------------------------------- scan

/// Roots of `γ₁ + g(y)γ₂ − y` on `[lo, hi]`.
pub fn cmd_scan(g: &ScalarFn, gamma1: f64, gamma2: f64, lo: f64, hi: f64, samples: usize, c: &Common) -> Result<Output, CliError> {
    if !(lo < hi) {
        return Err(CliError::Input("scan needs lo < hi".into()));
    }
    let roots = scan_roots(g, gamma1, gamma2, lo, hi, samples);
    let text = match c.format {
        Format::Csv => {
            let mut s = String::from("root\n");
            for r in &roots {
                let _ = writeln!(s, "{r:.16e}");
            }
            s
        }
        Format::Json => pretty(&json!({ "roots": roots })),
    };
    Ok(Output { stdout: text, exit_code: if roots.is_empty() { 2 } else { 0 } })
}
