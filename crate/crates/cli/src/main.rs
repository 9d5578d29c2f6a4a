use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use udisc_core::bounds::{priors_from_ratio, total_upper_bound, RankTwoAngles};
use udisc_core::canonical::canonical_pair;
use udisc_core::format::{parse_problem, to_repr, LoadedProblem, ProblemFile, ResultRecord};
use udisc_core::random;
use udisc_core::sdp::{certificate, formulate, solve, SolveOptions, Status};
use udisc_core::statemodel::support_intersection_dim;
use udisc_core::sweep::{eta_grid, scan, table1};
use udisc_core::synthesis::{extract_povm, realize, verify_outputs, REALIZATION_TOL};
use udisc_core::Error;

#[derive(Parser)]
#[command(
    name = "udisc",
    version,
    about = "Optimal unambiguous discrimination of mixed states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// No summary on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
}

#[derive(Args, Clone, Default)]
struct SolverFlags {
    /// Barrier stopping tolerance (overrides the problem file).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Newton step budget (overrides the problem file).
    #[arg(long, global = true)]
    max_iter: Option<usize>,
    #[arg(skip)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem and print the result record.
    Solve {
        file: PathBuf,
        /// Include the wall time in the record.
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Canonical-pair upper bound and its regions (two states).
    Bounds {
        file: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Canonical vectors and fidelity (two states).
    Canonical {
        file: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Comparison table for the rank-2 family.
    Table1 {
        /// Angles in radians.
        #[arg(long, requires = "theta2", conflicts_with_all = ["cos1", "cos2"])]
        theta1: Option<f64>,
        #[arg(long, requires = "theta1")]
        theta2: Option<f64>,
        #[arg(long, requires = "cos2")]
        cos1: Option<f64>,
        #[arg(long, requires = "cos1", conflicts_with_all = ["theta1", "theta2"])]
        cos2: Option<f64>,
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Solve a two-state problem over a grid of priors.
    Scan {
        file: PathBuf,
        #[arg(long, default_value_t = 19)]
        eta_grid: usize,
        #[arg(long)]
        csv: bool,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Check a solution file against its problem.
    Verify {
        problem: PathBuf,
        solution: PathBuf,
        #[command(flatten)]
        flags: SolverFlags,
    },
    /// Random two-state problem file, for fixtures.
    Gen {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long, default_value_t = 2)]
        rank1: usize,
        #[arg(long, default_value_t = 2)]
        rank2: usize,
        /// Prior of the first state; random when absent.
        #[arg(long)]
        eta: Option<f64>,
    },
}

/// Failure classes and their exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Parse = 2,
    Validation = 3,
    Solver = 4,
    Psd = 5,
    Optimality = 6,
    Realization = 7,
}

impl Class {
    fn id(self) -> &'static str {
        match self {
            Class::Parse => "parse",
            Class::Validation => "validation",
            Class::Solver => "solver",
            Class::Psd => "psd",
            Class::Optimality => "optimality",
            Class::Realization => "realization",
        }
    }
}

struct Failure {
    class: Class,
    message: String,
    /// Printed on stdout before exiting.
    output: Option<String>,
}

impl Failure {
    fn new(class: Class, message: impl Into<String>) -> Self {
        Self {
            class,
            message: message.into(),
            output: None,
        }
    }
}

type CmdResult = Result<String, Failure>;

fn validation(e: Error) -> Failure {
    Failure::new(Class::Validation, e.to_string())
}

fn solver(e: Error) -> Failure {
    Failure::new(Class::Solver, e.to_string())
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(Class::Parse, format!("{}: {e}", path.display())))
}

fn load(path: &Path, flags: &SolverFlags) -> Result<LoadedProblem, Failure> {
    let text = read(path)?;
    let file = parse_problem(&text)
        .map_err(|e| Failure::new(Class::Parse, format!("{}: {e}", path.display())))?;
    let mut loaded = file.load().map_err(validation)?;
    if let Some(t) = flags.tol {
        loaded.options.tol = t;
    }
    if let Some(m) = flags.max_iter {
        loaded.options.max_iter = m;
    }
    Ok(loaded)
}

fn two_states(loaded: &LoadedProblem) -> Result<(), Failure> {
    match loaded.problem.states().len() {
        2 => Ok(()),
        n => Err(Failure::new(
            Class::Validation,
            format!("states: this command needs exactly 2 states, got {n}"),
        )),
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn note(flags: &SolverFlags, msg: impl AsRef<str>) {
    if !flags.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn cmd_solve(path: &Path, timing: bool, flags: &SolverFlags) -> CmdResult {
    let loaded = load(path, flags)?;
    let x = loaded.gram().map_err(validation)?;
    let problem = formulate(x, loaded.problem.priors()).map_err(validation)?;
    let start = Instant::now();
    let sol = solve(&problem, &loaded.options).map_err(solver)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let record = ResultRecord::new(&problem, &sol, timing.then_some(elapsed)).map_err(solver)?;
    let out = pretty(&record);
    note(
        flags,
        format!(
            "status {:?}: P* = {:.10}, gap {:.1e}, {} Newton steps",
            sol.status, sol.p_star, sol.dual_gap, sol.iterations
        ),
    );
    match sol.status {
        Status::Optimal => Ok(out),
        s => Err(Failure {
            class: Class::Solver,
            message: format!("solver stopped with status {s:?}"),
            output: Some(out),
        }),
    }
}

fn cmd_bounds(path: &Path, flags: &SolverFlags) -> CmdResult {
    let loaded = load(path, flags)?;
    two_states(&loaded)?;
    let states = loaded.problem.states();
    let priors = loaded.problem.priors();
    let pair = canonical_pair(&states[0], &states[1]).map_err(validation)?;
    let out = if pair.t == 0 {
        json!({
            "eta1": priors[0],
            "eta2": priors[1],
            "fidelity": 0.0,
            "per_pair": [],
            "total": 0.0,
            "unpaired_mass": priors[0] + priors[1],
            "full_bound": priors[0] + priors[1],
            "breakpoints": [],
            "breakpoints_eta1": [],
        })
    } else {
        let rep = total_upper_bound(priors[0], priors[1], &pair).map_err(validation)?;
        let eta_bps: Vec<f64> = rep
            .breakpoints
            .iter()
            .map(|&x| priors_from_ratio(x).0)
            .collect();
        let mut v = serde_json::to_value(&rep).expect("serializable report");
        v["fidelity"] = json!(pair.fidelity());
        v["breakpoints_eta1"] = json!(eta_bps);
        if let Some(obj) = v.as_object_mut() {
            obj.remove("comparison");
        }
        v
    };
    note(flags, format!("fidelity {:.10}", pair.fidelity()));
    Ok(pretty(&out))
}

fn cmd_canonical(path: &Path, flags: &SolverFlags) -> CmdResult {
    let loaded = load(path, flags)?;
    two_states(&loaded)?;
    let states = loaded.problem.states();
    let pair = canonical_pair(&states[0], &states[1]).map_err(validation)?;
    let cross = pair.cross_overlaps();
    let mut off = 0.0f64;
    for i in 0..cross.rows() {
        for j in 0..cross.cols() {
            if i != j {
                off = off.max(cross[(i, j)].norm());
            }
        }
    }
    let meet = support_intersection_dim(&states[0], &states[1]).map_err(validation)?;
    let out = json!({
        "t": pair.t,
        "f": pair.f,
        "fidelity": pair.fidelity(),
        "r_norms": pair.r_norms,
        "s_norms": pair.s_norms,
        "orthogonal_mass": [pair.orthogonal_mass1, pair.orthogonal_mass2],
        "support_intersection_dim": meet,
        "max_offdiagonal_overlap": off,
        "r_vectors": to_repr(&pair.r_vectors),
        "s_vectors": to_repr(&pair.s_vectors),
    });
    note(
        flags,
        format!("t = {}, fidelity {:.10}", pair.t, pair.fidelity()),
    );
    Ok(pretty(&out))
}

fn options(flags: &SolverFlags) -> SolveOptions {
    let mut o = SolveOptions::default();
    if let Some(t) = flags.tol {
        o.tol = t;
    }
    if let Some(m) = flags.max_iter {
        o.max_iter = m;
    }
    o
}

fn status_id(s: Option<Status>) -> String {
    s.map_or(String::new(), |s| format!("{s:?}"))
}

fn cmd_table1(angles: RankTwoAngles, grid: usize, csv: bool, flags: &SolverFlags) -> CmdResult {
    let rows = table1(angles, grid, Some(&options(flags))).map_err(validation)?;
    let worst = rows
        .iter()
        .filter_map(|r| r.p_sdp.map(|p| (p - r.p).abs()))
        .fold(0.0f64, f64::max);
    note(
        flags,
        format!("{} rows, max |P_sdp - P| = {worst:.2e}", rows.len()),
    );
    if !rows.iter().all(|r| r.status == Some(Status::Optimal)) {
        return Err(Failure::new(
            Class::Solver,
            "a grid point did not reach an optimum",
        ));
    }
    if !csv {
        return Ok(pretty(&json!({
            "cos1": angles.cos1,
            "cos2": angles.cos2,
            "boundaries": angles.boundaries(),
            "rows": rows,
        })));
    }
    let mut out = String::from("x,eta1,region,p,p_ra,p_ru,p_sdp,status\n");
    for r in &rows {
        let p_sdp = r.p_sdp.map_or(String::new(), |p| p.to_string());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.x,
            r.eta1,
            r.region,
            r.p,
            r.p_ra,
            r.p_ru,
            p_sdp,
            status_id(r.status)
        )
        .unwrap();
    }
    Ok(out)
}

fn cmd_scan(path: &Path, n: usize, csv: bool, flags: &SolverFlags) -> CmdResult {
    let loaded = load(path, flags)?;
    two_states(&loaded)?;
    if n == 0 {
        return Err(Failure::new(
            Class::Validation,
            "eta-grid: need at least one point",
        ));
    }
    let states = loaded.problem.states();
    let rep = scan(&states[0], &states[1], &eta_grid(n), &loaded.options).map_err(solver)?;
    note(
        flags,
        format!(
            "{} breakpoints, {} intervals",
            rep.breakpoints.len(),
            rep.intervals
        ),
    );
    if !csv {
        return Ok(pretty(&rep));
    }
    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
    let mut out = String::new();
    writeln!(out, "# breakpoints x: {}", join(&rep.breakpoints)).unwrap();
    writeln!(out, "# breakpoints eta1: {}", join(&rep.breakpoints_eta1)).unwrap();
    writeln!(out, "# intervals: {}", rep.intervals).unwrap();
    out.push_str("eta1,x,p_star,status,bound,interval,regions\n");
    for r in &rep.rows {
        let regions: Vec<&str> = r.regions.iter().map(|g| g.id()).collect();
        writeln!(
            out,
            "{},{},{},{:?},{},{},{}",
            r.eta1,
            r.x,
            r.p_star,
            r.status,
            r.bound,
            r.interval,
            regions.join(";")
        )
        .unwrap();
    }
    Ok(out)
}

#[derive(Serialize)]
struct VerifyCheck {
    name: String,
    class: &'static str,
    value: f64,
    limit: f64,
    pass: bool,
}

impl VerifyCheck {
    fn upper(name: &str, class: Class, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            class: class.id(),
            value,
            limit,
            pass: value <= limit,
        }
    }
}

fn cmd_verify(problem_path: &Path, solution_path: &Path, flags: &SolverFlags) -> CmdResult {
    let loaded = load(problem_path, flags)?;
    let text = read(solution_path)?;
    let record: ResultRecord = serde_json::from_str(&text)
        .map_err(|e| Failure::new(Class::Parse, format!("{}: {e}", solution_path.display())))?;
    let x = loaded.gram().map_err(validation)?;
    let sol = record.to_solution(&x).map_err(validation)?;
    let problem = formulate(x.clone(), loaded.problem.priors()).map_err(validation)?;
    let cert = certificate(&problem, &sol).map_err(validation)?;

    let mut checks = Vec::new();
    for c in &cert.checks {
        let class = if c.name.starts_with("psd") {
            Class::Psd
        } else {
            Class::Optimality
        };
        checks.push(VerifyCheck {
            name: c.name.to_string(),
            class: class.id(),
            value: c.value,
            limit: c.limit,
            pass: c.pass,
        });
    }
    let mass = x.weighted_mass(loaded.problem.priors());
    checks.push(VerifyCheck::upper(
        "p+q=mass",
        Class::Optimality,
        (record.p_star + record.q_star - mass).abs(),
        1e-10,
    ));
    checks.push(VerifyCheck {
        name: "status".into(),
        class: Class::Optimality.id(),
        value: f64::from(u8::from(record.status == Status::Optimal)),
        limit: 1.0,
        pass: record.status == Status::Optimal,
    });

    let psd_ok = checks.iter().filter(|c| c.class == "psd").all(|c| c.pass);
    let mut realization_error = None;
    if psd_ok {
        match realize(&x, &sol.y, &loaded.ensembles) {
            Ok(real) => {
                let o = verify_outputs(&real);
                let tol = REALIZATION_TOL;
                for (name, v) in [
                    ("cross-overlap", o.max_cross_overlap),
                    ("unitarity", o.unitarity_residual),
                    ("gram(phi)", o.phi_gram_residual),
                    ("gram(beta)", o.beta_gram_residual),
                    ("round-trip", o.round_trip_residual),
                    ("isometry-map", o.map_residual),
                ] {
                    checks.push(VerifyCheck::upper(name, Class::Realization, v, tol));
                }
                match extract_povm(&real) {
                    Ok(povm) => {
                        let states = loaded.problem.states();
                        let p = povm.success_probability(states, loaded.problem.priors());
                        checks.push(VerifyCheck::upper(
                            "povm-completeness",
                            Class::Realization,
                            povm.completeness_residual(),
                            tol,
                        ));
                        checks.push(VerifyCheck::upper(
                            "false-detection",
                            Class::Realization,
                            povm.max_false_detection(states),
                            tol,
                        ));
                        checks.push(VerifyCheck::upper(
                            "povm-success",
                            Class::Realization,
                            (p - record.p_star).abs(),
                            1e-7,
                        ));
                    }
                    Err(e) => realization_error = Some(e.to_string()),
                }
            }
            Err(e) => realization_error = Some(e.to_string()),
        }
    }
    if let Some(msg) = &realization_error {
        checks.push(VerifyCheck {
            name: format!("realize: {msg}"),
            class: Class::Realization.id(),
            value: f64::NAN,
            limit: 0.0,
            pass: false,
        });
    }

    let failed: Vec<&VerifyCheck> = checks.iter().filter(|c| !c.pass).collect();
    let class = [Class::Psd, Class::Optimality, Class::Realization]
        .into_iter()
        .find(|k| failed.iter().any(|c| c.class == k.id()));
    let out = pretty(&json!({
        "pass": class.is_none(),
        "objective": cert.objective,
        "upper_bound": cert.upper_bound,
        "realization_checked": psd_ok,
        "checks": checks,
    }));
    for c in &checks {
        note(
            flags,
            format!(
                "{:<5} {:<20} {:>12.3e}  limit {:.1e}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.value,
                c.limit
            ),
        );
    }
    match class {
        None => Ok(out),
        Some(class) => {
            let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
            let message = match class {
                Class::Psd if names.contains(&"psd(X-Y)") => format!(
                    "feasibility constraint X - Y >= 0 violated ({})",
                    names.join(", ")
                ),
                _ => format!("failed checks: {}", names.join(", ")),
            };
            Err(Failure {
                class,
                message,
                output: Some(out),
            })
        }
    }
}

fn cmd_gen(seed: u64, dim: usize, ranks: (usize, usize), eta: Option<f64>) -> CmdResult {
    if dim == 0 || ranks.0 == 0 || ranks.1 == 0 || ranks.0 > dim || ranks.1 > dim {
        return Err(Failure::new(
            Class::Validation,
            format!(
                "ranks must lie in 1..={dim}, got {} and {}",
                ranks.0, ranks.1
            ),
        ));
    }
    let mut rng = random::rng(seed);
    let a = random::density(&mut rng, dim, ranks.0);
    let b = random::density(&mut rng, dim, ranks.1);
    let (e1, e2) = match eta {
        Some(e) => (e, 1.0 - e),
        None => random::priors_pair(&mut rng, 0.05),
    };
    let file = ProblemFile::from_states(&[a, b], &[e1, e2]);
    file.clone().load().map_err(validation)?;
    Ok(pretty(&file))
}

fn run(cli: Cli) -> CmdResult {
    let quiet = cli.quiet;
    let with_quiet = |mut f: SolverFlags| {
        f.quiet = quiet;
        f
    };
    match cli.command {
        Command::Solve {
            file,
            timing,
            flags,
        } => cmd_solve(&file, timing, &with_quiet(flags)),
        Command::Bounds { file, flags } => cmd_bounds(&file, &with_quiet(flags)),
        Command::Canonical { file, flags } => cmd_canonical(&file, &with_quiet(flags)),
        Command::Table1 {
            theta1,
            theta2,
            cos1,
            cos2,
            grid,
            csv,
            flags,
        } => {
            let angles = match (theta1, theta2, cos1, cos2) {
                (Some(t1), Some(t2), _, _) => RankTwoAngles::from_angles(t1, t2),
                (_, _, Some(c1), Some(c2)) => RankTwoAngles::from_cosines(c1, c2),
                _ => {
                    return Err(Failure::new(
                        Class::Validation,
                        "give --theta1/--theta2 or --cos1/--cos2",
                    ))
                }
            }
            .map_err(validation)?;
            cmd_table1(angles, grid, csv, &with_quiet(flags))
        }
        Command::Scan {
            file,
            eta_grid,
            csv,
            flags,
        } => cmd_scan(&file, eta_grid, csv, &with_quiet(flags)),
        Command::Verify {
            problem,
            solution,
            flags,
        } => cmd_verify(&problem, &solution, &with_quiet(flags)),
        Command::Gen {
            seed,
            dim,
            rank1,
            rank2,
            eta,
        } => cmd_gen(seed, dim, (rank1, rank2), eta),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            if let Some(out) = f.output {
                print!("{out}");
            }
            eprintln!("udisc: error[{}]: {}", f.class.id(), f.message);
            ExitCode::from(f.class as u8)
        }
    }
}
