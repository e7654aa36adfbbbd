//! Command-line front end: configuration parsing, dispatch to the library
//! modules, and machine-readable result documents.
//!
//! Every number in a result document is produced by a library call; the
//! CLI only formats. Runs are reproducible: the same subcommand, resolved
//! configuration, and seed give byte-identical documents up to the
//! timestamp field. `BRANCHLAB_THREADS` overrides the compute-parallelism
//! degree.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Once;

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::branching::{
    late_time_branch, optimize_branches, q_value, sample_branch, BranchOracle, BranchSearchConfig,
};
use crate::complexity::bounds::{
    build_extended_trajectory, build_point_pair_trajectory, extended_constructive_cost, kappa,
    kappa_limit_quadrature, lambda, lambda_limit, lower_bound_extended, lower_bound_point_pair,
    omega_extended_state, omega_state, point_pair_constructive_cost, point_pair_start,
};
use crate::complexity::evolve;
use crate::complexity::optimize::{complexity_of_state, optimize_complexity, OptimizerConfig};
use crate::complexity::schmidt::angle_audit;
use crate::error::{Error, Result};
use crate::experiments::{
    bell_ensemble, bell_single, bell_state_check, separation_condition, stern_gerlach_run,
    BellConfig, SternGerlachConfig,
};
use crate::fock::{LatticeGeometry, Spin, StateVector};
use crate::opspace::lie_closure;

static THREAD_POOL: Once = Once::new();

/// Apply `BRANCHLAB_THREADS` to the global worker pool (first call wins).
pub fn init_parallelism() {
    THREAD_POOL.call_once(|| {
        if let Ok(v) = std::env::var("BRANCHLAB_THREADS") {
            if let Ok(n) = v.parse::<usize>() {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n.max(1))
                    .build_global();
            }
        }
    });
}

#[derive(Parser, Debug)]
#[command(
    name = "branchlab",
    version,
    about = "Lattice-fermion complexity bounds, branch decompositions, and toy measurement models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write the result document to this path instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Flat key=value configuration file (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write a tab-separated companion table to this path.
    #[arg(long, global = true)]
    table: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Two-sided complexity estimate for the reference entangled states.
    Complexity {
        #[arg(long)]
        sites: Option<usize>,
        /// Distance between the entangled pair.
        #[arg(long)]
        n: Option<usize>,
        /// Width of the extended component (switches to the extended state).
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Estimate the distance to the nearest product state instead of
        /// the distance from the adjacent-pair start.
        #[arg(long)]
        of_state: bool,
        /// Sector-dimension cap.
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Analytic bounds and the constructive trajectories realizing them.
    Bounds {
        /// `point-pair` or `extended`.
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
    },
    /// Branch decomposition of a reference state, or late-time branching
    /// of separating packets.
    Branch {
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// `surrogate`, `constructive`, or `optimizer`.
        #[arg(long)]
        oracle: Option<String>,
        /// Late-time mode: evolve an entangled packet pair under a hopping
        /// Hamiltonian, decompose at each scheduled time, and pull back.
        #[arg(long)]
        late_time: bool,
        /// Comma-separated increasing t_out schedule (late-time mode).
        #[arg(long)]
        t_outs: Option<String>,
        /// Hopping amplitude (late-time mode).
        #[arg(long)]
        hopping: Option<f64>,
    },
    /// Reachability check: close the control generators under commutators.
    LieClosure {
        #[arg(long)]
        sites: Option<usize>,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Stern-Gerlach model on analytic Gaussian packets.
    SternGerlach {
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
        /// Transverse momentum impulse.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        t1: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long)]
        t_outs: Option<String>,
        #[arg(long)]
        spacing: Option<f64>,
    },
    /// Four-particle Bell model: branch weights, state check, replica run.
    Bell {
        /// Analyzer angle in radians.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        replicas: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        w: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        #[arg(long)]
        m: Option<f64>,
    },
}

/// Self-describing result document.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultDocument {
    pub meta: RunMeta,
    pub inputs: serde_json::Value,
    pub outputs: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub timestamp_unix_ms: u64,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Flat `key = value` configuration file; `#` starts a comment.
fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::domain(format!("cannot read config {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::domain(format!(
                "config line {} is not key=value: {line:?}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

/// Precedence: command-line flag, then config file, then default.
fn resolve<T: FromStr + Clone>(
    flag: &Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T> {
    if let Some(v) = flag {
        return Ok(v.clone());
    }
    if let Some(raw) = file.get(key) {
        return raw
            .parse::<T>()
            .map_err(|_| Error::domain(format!("config key {key} has unparsable value {raw:?}")));
    }
    Ok(default)
}

fn parse_schedule(raw: &str) -> Result<Vec<f64>> {
    let out: std::result::Result<Vec<f64>, _> =
        raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
    out.map_err(|_| Error::domain(format!("unparsable schedule {raw:?}")))
}

struct RunOutput {
    document: ResultDocument,
    table: Option<String>,
    /// Set when the computation finished with an explicit non-converged
    /// status that should surface as a nonzero exit.
    non_converged: Option<String>,
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_parallelism();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap renders its own message; argument problems exit with 2.
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let file_cfg = match &cli.config {
        Some(path) => match load_config(path) {
            Ok(map) => map,
            Err(e) => {
                eprintln!("{e}");
                return e.exit_code();
            }
        },
        None => BTreeMap::new(),
    };
    match dispatch(&cli.command, &file_cfg) {
        Ok(output) => {
            let json =
                serde_json::to_string_pretty(&output.document).expect("documents serialize");
            match &cli.out {
                Some(path) => {
                    if let Err(e) = fs::write(path, json + "\n") {
                        eprintln!("cannot write {}: {e}", path.display());
                        return 2;
                    }
                }
                None => println!("{json}"),
            }
            if let (Some(path), Some(table)) = (&cli.table, &output.table) {
                if let Err(e) = fs::write(path, table) {
                    eprintln!("cannot write table {}: {e}", path.display());
                    return 2;
                }
            }
            if let Some(msg) = output.non_converged {
                eprintln!("did not converge: {msg}");
                return 4;
            }
            0
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}

fn document(
    command: &str,
    seed: u64,
    inputs: impl Serialize,
    outputs: impl Serialize,
) -> ResultDocument {
    ResultDocument {
        meta: RunMeta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            timestamp_unix_ms: now_ms(),
        },
        inputs: serde_json::to_value(inputs).expect("inputs serialize"),
        outputs: serde_json::to_value(outputs).expect("outputs serialize"),
    }
}

fn dispatch(command: &Command, file: &BTreeMap<String, String>) -> Result<RunOutput> {
    match command {
        Command::Complexity {
            sites,
            n,
            r,
            steps,
            restarts,
            seed,
            of_state,
            cap,
        } => run_complexity(
            file, sites, n, r, steps, restarts, seed, *of_state, cap,
        ),
        Command::Bounds { mode, n, r } => run_bounds(file, mode, n, r),
        Command::Branch {
            sites,
            n,
            b,
            seed,
            oracle,
            late_time,
            t_outs,
            hopping,
        } => run_branch(file, sites, n, b, seed, oracle, *late_time, t_outs, hopping),
        Command::LieClosure { sites, cap } => run_lie_closure(file, sites, cap),
        Command::SternGerlach {
            q,
            w,
            d,
            m,
            r,
            t1,
            b,
            t_outs,
            spacing,
        } => run_stern_gerlach(file, q, w, d, m, r, t1, b, t_outs, spacing),
        Command::Bell {
            theta,
            replicas,
            seed,
            q,
            w,
            d,
            m,
        } => run_bell(file, theta, replicas, seed, q, w, d, m),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_complexity(
    file: &BTreeMap<String, String>,
    sites: &Option<usize>,
    n: &Option<usize>,
    r: &Option<usize>,
    steps: &Option<usize>,
    restarts: &Option<usize>,
    seed: &Option<u64>,
    of_state: bool,
    cap: &Option<usize>,
) -> Result<RunOutput> {
    let n = resolve(n, file, "n", 2)?;
    let r = match r {
        Some(v) => Some(*v),
        None => file
            .get("r")
            .map(|s| s.parse())
            .transpose()
            .map_err(|_| Error::domain("config key r has an unparsable value"))?,
    };
    let min_sites = r.map_or(n + 1, |r| n + r);
    let sites = resolve(sites, file, "sites", min_sites.max(3))?;
    let seed = resolve(seed, file, "seed", 0)?;
    let geometry = LatticeGeometry::chain(sites);
    let mut cfg = OptimizerConfig {
        steps: Some(resolve(steps, file, "steps", 4 * n)?),
        restarts: resolve(restarts, file, "restarts", 8)?,
        seed,
        sector_cap: resolve(cap, file, "cap", 512)?,
        ..OptimizerConfig::default()
    };
    let (target, constructive, lower_formula) = match r {
        None => (
            omega_state(&geometry, n)?,
            build_point_pair_trajectory(&geometry, n)?,
            lower_bound_point_pair(n)?,
        ),
        Some(r) => (
            omega_extended_state(&geometry, n, r)?,
            build_extended_trajectory(&geometry, n, r)?,
            lower_bound_extended(n, r)?,
        ),
    };
    #[derive(Serialize)]
    struct Inputs {
        sites: usize,
        n: usize,
        r: Option<usize>,
        steps: usize,
        restarts: usize,
        seed: u64,
        of_state: bool,
    }
    let inputs = Inputs {
        sites,
        n,
        r,
        steps: cfg.steps.unwrap(),
        restarts: cfg.restarts,
        seed,
        of_state,
    };
    let est = if of_state {
        complexity_of_state(&target, &cfg)?
    } else {
        cfg.warm_starts = vec![constructive.clone()];
        let start = point_pair_start(&geometry)?;
        optimize_complexity(&target, &start, &cfg)?
    };
    #[derive(Serialize)]
    struct Outputs {
        lower_formula: f64,
        lower_audit: f64,
        upper: f64,
        constructive_cost: f64,
        witness_steps: usize,
        method: Vec<String>,
        converged: bool,
    }
    let outputs = Outputs {
        lower_formula,
        lower_audit: est.lower,
        upper: est.upper,
        constructive_cost: constructive.cost(),
        witness_steps: est.witness.steps().len(),
        method: est.method.clone(),
        converged: est.converged,
    };
    let mut table = String::from("step\tduration\tfield_norm\n");
    for (i, step) in est.witness.steps().iter().enumerate() {
        table.push_str(&format!(
            "{i}\t{:.12}\t{:.12}\n",
            step.duration,
            step.field.norm()
        ));
    }
    let converged = est.converged;
    Ok(RunOutput {
        document: document("complexity", seed, inputs, outputs),
        table: Some(table),
        non_converged: (!converged).then(|| "optimizer reported best-so-far".into()),
    })
}

fn run_bounds(
    file: &BTreeMap<String, String>,
    mode: &Option<String>,
    n: &Option<usize>,
    r: &Option<usize>,
) -> Result<RunOutput> {
    let mode = resolve(mode, file, "mode", "point-pair".to_string())?;
    let n = resolve(n, file, "n", 2)?;
    let r = resolve(r, file, "r", 2)?;
    match mode.as_str() {
        "point-pair" => {
            let geometry = LatticeGeometry::chain(n + 1);
            let traj = build_point_pair_trajectory(&geometry, n)?;
            let start = point_pair_start(&geometry)?;
            let end = evolve(&traj, &start);
            let target = omega_state(&geometry, n)?;
            let audit = angle_audit(&traj, &start, 48)?;
            #[derive(Serialize)]
            struct Outputs {
                lower: f64,
                constructive_upper: f64,
                constructive_cost_formula: f64,
                endpoint_overlap: f64,
                audit_lower: f64,
                audit_total_angle: f64,
            }
            let outputs = Outputs {
                lower: lower_bound_point_pair(n)?,
                constructive_upper: traj.cost(),
                constructive_cost_formula: point_pair_constructive_cost(n),
                endpoint_overlap: end.overlap(&target),
                audit_lower: audit.lower_bound,
                audit_total_angle: audit.total_angle,
            };
            let mut table = String::from("n\tlower\tconstructive\n");
            for k in 2..=n {
                table.push_str(&format!(
                    "{k}\t{:.12}\t{:.12}\n",
                    lower_bound_point_pair(k)?,
                    point_pair_constructive_cost(k)
                ));
            }
            Ok(RunOutput {
                document: document(
                    "bounds",
                    0,
                    serde_json::json!({"mode": mode, "n": n}),
                    outputs,
                ),
                table: Some(table),
                non_converged: None,
            })
        }
        "extended" => {
            let geometry = LatticeGeometry::chain(n + r);
            let traj = build_extended_trajectory(&geometry, n, r)?;
            let start = point_pair_start(&geometry)?;
            let end = evolve(&traj, &start);
            let target = omega_extended_state(&geometry, n, r)?;
            let audit = angle_audit(&traj, &start, 48)?;
            #[derive(Serialize)]
            struct Outputs {
                lower: f64,
                constructive_upper: f64,
                constructive_cost_formula: f64,
                endpoint_overlap: f64,
                audit_lower: f64,
                kappa: f64,
                kappa_limit: f64,
                lambda: f64,
                lambda_limit: f64,
            }
            let outputs = Outputs {
                lower: lower_bound_extended(n, r)?,
                constructive_upper: traj.cost(),
                constructive_cost_formula: extended_constructive_cost(n, r)?,
                endpoint_overlap: end.overlap(&target),
                audit_lower: audit.lower_bound,
                kappa: kappa(r)?,
                kappa_limit: kappa_limit_quadrature(),
                lambda: lambda(r)?,
                lambda_limit: lambda_limit(),
            };
            let mut table = String::from("r\tkappa\tlambda\tlower\tconstructive\n");
            for k in 2..=r {
                table.push_str(&format!(
                    "{k}\t{:.12}\t{:.12}\t{:.12}\t{:.12}\n",
                    kappa(k)?,
                    lambda(k)?,
                    lower_bound_extended(n, k)?,
                    extended_constructive_cost(n, k)?
                ));
            }
            Ok(RunOutput {
                document: document(
                    "bounds",
                    0,
                    serde_json::json!({"mode": mode, "n": n, "r": r}),
                    outputs,
                ),
                table: Some(table),
                non_converged: None,
            })
        }
        other => Err(Error::domain(format!(
            "unknown bounds mode {other:?} (expected point-pair or extended)"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_branch(
    file: &BTreeMap<String, String>,
    sites: &Option<usize>,
    n: &Option<usize>,
    b: &Option<f64>,
    seed: &Option<u64>,
    oracle: &Option<String>,
    late_time: bool,
    t_outs: &Option<String>,
    hopping: &Option<f64>,
) -> Result<RunOutput> {
    let n = resolve(n, file, "n", 2)?;
    let b = resolve(b, file, "b", 0.1)?;
    let seed = resolve(seed, file, "seed", 0)?;
    let oracle_name = resolve(oracle, file, "oracle", "surrogate".to_string())?;
    let oracle = match oracle_name.as_str() {
        "surrogate" => BranchOracle::SchmidtAngle,
        "constructive" => BranchOracle::Constructive(OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        }),
        "optimizer" => BranchOracle::Optimizer(OptimizerConfig {
            seed,
            ..OptimizerConfig::default()
        }),
        other => {
            return Err(Error::domain(format!(
                "unknown oracle {other:?} (expected surrogate, constructive, or optimizer)"
            )))
        }
    };
    let search = BranchSearchConfig {
        seed,
        ..BranchSearchConfig::default()
    };
    if late_time {
        let sites = resolve(sites, file, "sites", 12)?;
        let hopping_t = resolve(hopping, file, "hopping", 1.0)?;
        let schedule = match t_outs {
            Some(raw) => parse_schedule(raw)?,
            None => match file.get("t-outs") {
                Some(raw) => parse_schedule(raw)?,
                None => vec![1.2, 1.6, 2.0],
            },
        };
        let geometry = LatticeGeometry::chain(sites);
        let psi = separating_pair_state(&geometry)?;
        let h = crate::fock::hopping_hamiltonian(psi.sector(), hopping_t);
        let history = late_time_branch(&psi, &h, 0.0, &schedule, b, &oracle, &search)?;
        #[derive(Serialize)]
        struct Snapshot {
            t_out: f64,
            branch_count: usize,
            weights: Vec<f64>,
            q: f64,
        }
        #[derive(Serialize)]
        struct Outputs {
            stabilized: bool,
            stable_from: Option<usize>,
            snapshots: Vec<Snapshot>,
            sampled_branch: Option<usize>,
        }
        let snapshots: Vec<Snapshot> = history
            .snapshots
            .iter()
            .map(|s| Snapshot {
                t_out: s.t_out,
                branch_count: s.decomposition.branches.len(),
                weights: s.decomposition.weights(),
                q: q_value(&s.decomposition),
            })
            .collect();
        let sampled = history
            .stable_from
            .map(|i| sample_branch(&history.snapshots[i + 1].decomposition, seed).0);
        let stabilized = history.stabilized;
        let mut table = String::from("t_out\tbranches\tq\n");
        for s in &snapshots {
            table.push_str(&format!("{}\t{}\t{:.12}\n", s.t_out, s.branch_count, s.q));
        }
        Ok(RunOutput {
            document: document(
                "branch",
                seed,
                serde_json::json!({
                    "mode": "late-time", "sites": sites, "b": b,
                    "hopping": hopping_t, "t_outs": schedule,
                    "oracle": oracle_name,
                }),
                Outputs {
                    stabilized,
                    stable_from: history.stable_from,
                    snapshots,
                    sampled_branch: sampled,
                },
            ),
            table: Some(table),
            non_converged: (!stabilized)
                .then(|| "branching did not stabilize within the schedule".into()),
        })
    } else {
        let sites = resolve(sites, file, "sites", n + 1)?;
        let geometry = LatticeGeometry::chain(sites);
        let psi = omega_state(&geometry, n)?;
        let decomp = optimize_branches(&psi, b, &oracle, &search)?;
        #[derive(Serialize)]
        struct BranchRow {
            weight: f64,
            complexity: f64,
            support_dim: usize,
        }
        #[derive(Serialize)]
        struct Outputs {
            q: f64,
            mean_complexity: f64,
            entropy_term: f64,
            branches: Vec<BranchRow>,
            split_savings: Vec<f64>,
            oracle: String,
            sampled_branch: usize,
        }
        let rows: Vec<BranchRow> = decomp
            .branches
            .iter()
            .map(|br| BranchRow {
                weight: br.weight,
                complexity: br.complexity,
                support_dim: (0..br.state.sector().dim())
                    .filter(|&i| br.state.amplitudes()[i].norm_sqr() > 1e-12)
                    .count(),
            })
            .collect();
        let mut table = String::from("branch\tweight\tcomplexity\n");
        for (i, row) in rows.iter().enumerate() {
            table.push_str(&format!("{i}\t{:.12}\t{:.12}\n", row.weight, row.complexity));
        }
        let outputs = Outputs {
            q: q_value(&decomp),
            mean_complexity: decomp.mean_complexity(),
            entropy_term: decomp.entropy_term(),
            branches: rows,
            split_savings: decomp.split_savings.clone(),
            oracle: decomp.oracle.clone(),
            sampled_branch: sample_branch(&decomp, seed).0,
        };
        Ok(RunOutput {
            document: document(
                "branch",
                seed,
                serde_json::json!({
                    "mode": "static", "sites": sites, "n": n, "b": b,
                    "oracle": oracle_name,
                }),
                outputs,
            ),
            table: Some(table),
            non_converged: None,
        })
    }
}

fn run_lie_closure(
    file: &BTreeMap<String, String>,
    sites: &Option<usize>,
    cap: &Option<usize>,
) -> Result<RunOutput> {
    let sites = resolve(sites, file, "sites", 2)?;
    let cap = resolve(cap, file, "cap", 1500)?;
    let geometry = LatticeGeometry::chain(sites);
    let sectors: Vec<u32> = (1..=(2 * sites - 1) as u32).collect();
    let report = lie_closure(&geometry, &sectors, cap)?;
    let mut table = String::from("n\tsector_dim\tclosure_dim\texpected\n");
    for (n, d, dim, expected) in &report.sectors {
        table.push_str(&format!("{n}\t{d}\t{dim}\t{expected}\n"));
    }
    let pass = report.pass;
    Ok(RunOutput {
        document: document(
            "lie-closure",
            0,
            serde_json::json!({"sites": sites, "cap": cap, "sectors": sectors}),
            &report,
        ),
        table: Some(table),
        non_converged: (!pass).then(|| "closure dimension mismatch".into()),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_stern_gerlach(
    file: &BTreeMap<String, String>,
    q: &Option<f64>,
    w: &Option<f64>,
    d: &Option<f64>,
    m: &Option<f64>,
    r: &Option<f64>,
    t1: &Option<f64>,
    b: &Option<f64>,
    t_outs: &Option<String>,
    spacing: &Option<f64>,
) -> Result<RunOutput> {
    let cfg = SternGerlachConfig {
        q: resolve(q, file, "q", 4.0)?,
        w: resolve(w, file, "w", 10.0)?,
        d: resolve(d, file, "d", 1.0)?,
        m: resolve(m, file, "m", 1.0)?,
        impulse: resolve(r, file, "r", 2.0)?,
        t_impulse: resolve(t1, file, "t1", 1.0)?,
        b: resolve(b, file, "b", 1.0)?,
        t_out_schedule: match t_outs {
            Some(raw) => parse_schedule(raw)?,
            None => match file.get("t-outs") {
                Some(raw) => parse_schedule(raw)?,
                None => vec![2.0, 4.0, 8.0, 16.0],
            },
        },
        lattice_spacing: resolve(spacing, file, "spacing", 0.5)?,
    };
    let report = stern_gerlach_run(&cfg)?;
    let mut table = String::from("t\tseparation\tsurrogate\n");
    for (t, sep, c) in &report.surrogate_trace {
        table.push_str(&format!("{t}\t{sep:.12}\t{c:.12}\n"));
    }
    let branched = report.branched;
    Ok(RunOutput {
        document: document("stern-gerlach", 0, &cfg, &report),
        table: Some(table),
        non_converged: (!branched && separation_condition(cfg.impulse, cfg.d))
            .then(|| "no branching within the schedule".into()),
    })
}

#[allow(clippy::too_many_arguments)]
fn run_bell(
    file: &BTreeMap<String, String>,
    theta: &Option<f64>,
    replicas: &Option<usize>,
    seed: &Option<u64>,
    q: &Option<f64>,
    w: &Option<f64>,
    d: &Option<f64>,
    m: &Option<f64>,
) -> Result<RunOutput> {
    let cfg = BellConfig {
        theta: resolve(theta, file, "theta", std::f64::consts::FRAC_PI_2)?,
        q: resolve(q, file, "q", 4.0)?,
        w: resolve(w, file, "w", 10.0)?,
        d: resolve(d, file, "d", 1.0)?,
        m: resolve(m, file, "m", 1.0)?,
        replicas: resolve(replicas, file, "replicas", 10_000)?,
        seed: resolve(seed, file, "seed", 0)?,
    };
    cfg.validate()?;
    let branches = bell_single(cfg.theta);
    let outcome = bell_ensemble(&cfg)?;
    let check = bell_state_check(cfg.theta)?;
    #[derive(Serialize)]
    struct Outputs {
        weights: Vec<f64>,
        outcome: crate::experiments::BellOutcome,
        state_check_max_deviation: f64,
        state_check_rotation_deviation: f64,
    }
    let outputs = Outputs {
        weights: branches.iter().map(|b| b.weight).collect(),
        outcome: outcome.clone(),
        state_check_max_deviation: check.max_weight_deviation,
        state_check_rotation_deviation: check.rotation_invariance_deviation,
    };
    let mut table = String::from("e0\te1\tweight\n");
    for br in &branches {
        table.push_str(&format!(
            "{:?}\t{:?}\t{:.12}\n",
            br.e0, br.e1, br.weight
        ));
    }
    Ok(RunOutput {
        document: document("bell", cfg.seed, &cfg, outputs),
        table: Some(table),
        non_converged: None,
    })
}

/// The late-time demo state: a spin-entangled pair of counter-moving
/// Gaussian-profile packets in the middle of the chain.
fn separating_pair_state(geometry: &LatticeGeometry) -> Result<StateVector> {
    let sites = geometry.num_sites();
    if sites < 8 {
        return Err(Error::domain("late-time demo needs at least 8 sites"));
    }
    let gaussian = |center: f64, k: f64, spin: Spin| -> crate::fock::Packet {
        let mut pos = vec![C64::new(0.0, 0.0); sites];
        for (x, p) in pos.iter_mut().enumerate() {
            let g = (-(x as f64 - center).powi(2) / (2.0 * 1.2f64.powi(2))).exp();
            *p = C64::from_polar(g, k * x as f64);
        }
        let norm = pos.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for p in pos.iter_mut() {
            *p /= norm;
        }
        let s = match spin {
            Spin::Up => [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            Spin::Down => [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
        };
        crate::fock::Packet {
            position: pos,
            spin: s,
        }
    };
    let vac = crate::fock::vacuum_state(geometry);
    let mid = geometry.num_sites() as f64 / 2.0;
    let mut entangled: Option<StateVector> = None;
    for spin in Spin::BOTH {
        let left = gaussian(mid - 1.5, -std::f64::consts::FRAC_PI_2, spin);
        let right = gaussian(mid + 1.5, std::f64::consts::FRAC_PI_2, spin);
        let piece = crate::fock::apply_packet_creation(
            &crate::fock::apply_packet_creation(&vac, &left),
            &right,
        );
        entangled = Some(match entangled {
            None => piece,
            Some(acc) => acc.add(&piece),
        });
    }
    Ok(entangled.expect("nonempty").normalized())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(name: &str, args: &[&str]) -> (i32, ResultDocument) {
        let dir = std::env::temp_dir().join(format!("branchlab-cli-{}", std::process::id()));
        let _ = fs::create_dir_all(&dir);
        let out = dir.join(format!("{name}.json"));
        let mut full: Vec<String> = vec!["branchlab".into()];
        full.extend(args.iter().map(|s| s.to_string()));
        full.push("--out".into());
        full.push(out.to_str().unwrap().into());
        let code = run(full);
        let doc: ResultDocument =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        (code, doc)
    }

    #[test]
    fn bell_run_reports_near_zero_correlation_at_right_angle() {
        let (code, doc) = run_capture(
            "bell-right-angle",
            &[
                "bell",
                "--theta",
                "1.5707963",
                "--replicas",
                "10000",
                "--seed",
                "7",
            ],
        );
        assert_eq!(code, 0);
        let corr = doc.outputs["outcome"]["correlation"].as_f64().unwrap();
        assert!(corr.abs() < 0.03, "corr {corr}");
    }

    #[test]
    fn bounds_run_matches_reference_numbers() {
        let (code, doc) = run_capture("bounds-pp", &["bounds", "--mode", "point-pair", "--n", "2"]);
        assert_eq!(code, 0);
        let lower = doc.outputs["lower"].as_f64().unwrap();
        let upper = doc.outputs["constructive_upper"].as_f64().unwrap();
        assert!((lower - 0.5554).abs() < 1e-3);
        assert!((upper - 4.2523).abs() < 1e-3);
    }

    #[test]
    fn lie_closure_run_reports_65_for_two_sites() {
        let (code, doc) = run_capture("lie2", &["lie-closure", "--sites", "2"]);
        assert_eq!(code, 0);
        assert_eq!(doc.outputs["closure_dim"].as_u64().unwrap(), 65);
        assert!(doc.outputs["pass"].as_bool().unwrap());
    }

    #[test]
    fn documents_are_reproducible_modulo_timestamp() {
        let args = ["bell", "--theta", "0.7", "--replicas", "500", "--seed", "3"];
        let (_, a) = run_capture("repro-a", &args);
        let (_, b) = run_capture("repro-b", &args);
        let mut va = serde_json::to_value(&a).unwrap();
        let mut vb = serde_json::to_value(&b).unwrap();
        va["meta"]["timestamp_unix_ms"] = 0.into();
        vb["meta"]["timestamp_unix_ms"] = 0.into();
        assert_eq!(
            serde_json::to_string(&va).unwrap(),
            serde_json::to_string(&vb).unwrap()
        );
    }

    #[test]
    fn document_round_trips_losslessly() {
        let (_, doc) = run_capture(
            "roundtrip",
            &["bounds", "--mode", "extended", "--n", "2", "--r", "3"],
        );
        let text = serde_json::to_string(&doc).unwrap();
        let back: ResultDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(text, serde_json::to_string(&back).unwrap());
    }

    #[test]
    fn config_file_fills_defaults_and_flags_win() {
        let dir = std::env::temp_dir().join(format!("branchlab-cfg-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let cfg_path = dir.join("run.cfg");
        fs::write(&cfg_path, "theta = 0.3\nreplicas = 250\nseed = 9\n").unwrap();
        let out = dir.join("o.json");
        let code = run([
            "branchlab".to_string(),
            "bell".into(),
            "--config".into(),
            cfg_path.to_str().unwrap().into(),
            "--theta".into(),
            "0.5".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]);
        assert_eq!(code, 0);
        let doc: ResultDocument =
            serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
        assert!((doc.inputs["theta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(doc.inputs["replicas"].as_u64().unwrap(), 250);
        assert_eq!(doc.meta.seed, 9);
    }

    #[test]
    fn unknown_arguments_exit_with_code_2() {
        let code = run(["branchlab", "bell", "--no-such-flag"].map(String::from));
        assert_eq!(code, 2);
    }

    #[test]
    fn invalid_ranges_exit_with_code_2() {
        let code = run(["branchlab", "bell", "--theta", "9.9"].map(String::from));
        assert_eq!(code, 2);
    }

    #[test]
    fn cap_violations_exit_with_code_3() {
        let code = run(["branchlab", "lie-closure", "--sites", "4"].map(String::from));
        assert_eq!(code, 3);
    }
}
