//! `rmdp-geo`: value functions, membership tests, uncertainty reduction,
//! the property suite and figure data for finite (robust) MDPs.
//!
//! Machine-readable JSON goes to stdout, diagnostics to stderr. Exit status:
//! 0 success, 1 verification failure, 2 parse error, 3 usage or shape error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use rmdp_geometry::format::to_json;
use rmdp_geometry::geometry::value_space_membership;
use rmdp_geometry::harness::{
    emit_figure_data, run_suite, CheckId, FigureId, FigureOptions, SuiteConfig,
};
use rmdp_geometry::instance::{Instance, InstanceError, InstanceKind};
use rmdp_geometry::reduction::reduce;
use rmdp_geometry::rmdp::{robust_evaluate_policy, DEFAULT_COMBINATION_CAP};
use rmdp_geometry::robust_geometry::robust_space_membership;
use rmdp_geometry::{evaluate_policy, Error, Policy};

#[derive(Parser)]
#[command(
    name = "rmdp-geo",
    version,
    about = "Value-space geometry of finite robust MDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact value of a policy, or its robust value for uncertain instances.
    Evaluate {
        #[arg(long)]
        instance: PathBuf,
        /// JSON S x A array; overrides the instance's own policy.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Whether a point is the value of some policy.
    Membership {
        #[arg(long)]
        instance: PathBuf,
        /// Comma-separated coordinates, one per state.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Drops candidate kernels that are convex combinations of others.
    Reduce {
        #[arg(long)]
        instance: PathBuf,
        /// Where the reduced instance is written.
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs the property suite on random instances.
    Verify {
        /// `default`, or a JSON suite configuration file.
        #[arg(long, default_value = "default")]
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long, hide = true)]
        inject_failure: Option<String>,
    },
    /// Writes CSV and SVG data for a planar figure.
    Render {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        figure: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        /// Membership grid resolution per axis.
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }

    fn parse(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Instance(ie) => ie.exit_code() as u8,
            Error::NotStochastic { .. } | Error::Io(_) => 2,
            _ => 3,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<InstanceError> for Failure {
    fn from(e: InstanceError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_instance(path: &Path) -> CliResult<Instance> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
    Ok(Instance::parse(&text)?)
}

fn read_policy(path: &Path, inst: &Instance) -> CliResult<Policy> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = serde_json::from_str(&text)
        .map_err(|e| Failure::parse(format!("policy {}: {e}", path.display())))?;
    let (ns, na) = (inst.mdp.num_states(), inst.mdp.num_actions());
    if rows.len() != ns {
        return Err(Failure::usage(format!(
            "policy has {} rows, expected {ns}",
            rows.len()
        )));
    }
    if let Some((s, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != na) {
        return Err(Failure::usage(format!(
            "policy row {s} has {} entries, expected {na}",
            r.len()
        )));
    }
    Ok(Policy::new(rows)?)
}

#[derive(Serialize)]
struct EvaluateOutput {
    value: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    worst_kernel: Option<Vec<usize>>,
    iterations: usize,
}

fn evaluate(instance: &Path, policy: Option<&Path>, tol: f64) -> CliResult<String> {
    let inst = read_instance(instance)?;
    let pi = match policy {
        Some(p) => read_policy(p, &inst)?,
        None => inst.policy.clone().ok_or_else(|| {
            Failure::usage("no policy in the instance file; pass one with --policy")
        })?,
    };
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::usage("--tol must be positive"));
    }
    let u = inst.s_rectangular(DEFAULT_COMBINATION_CAP)?;
    // a single candidate everywhere is the plain model
    let out = if u.is_singleton() {
        EvaluateOutput {
            value: evaluate_policy(&inst.mdp.with_kernel(u.nominal_kernel())?, &pi)?.0,
            worst_kernel: None,
            iterations: 0,
        }
    } else {
        let r = robust_evaluate_policy(&inst.mdp, &u, &pi, tol)?;
        EvaluateOutput {
            value: r.value.0,
            worst_kernel: Some(r.worst_kernel),
            iterations: r.iterations,
        }
    };
    Ok(to_json(&out))
}

fn parse_point(text: &str, n: usize) -> CliResult<Vec<f64>> {
    let x: Vec<f64> = text
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Failure::usage(format!("--point entry `{}`: {e}", t.trim())))
        })
        .collect::<CliResult<_>>()?;
    if x.len() != n {
        return Err(Failure::usage(format!(
            "--point has {} coordinates, expected {n}",
            x.len()
        )));
    }
    Ok(x)
}

fn membership(instance: &Path, point: &str, tol: f64) -> CliResult<String> {
    let inst = read_instance(instance)?;
    let x = parse_point(point, inst.mdp.num_states())?;
    let report = if inst.kind() == InstanceKind::Mdp {
        value_space_membership(&inst.mdp, &x, tol)?
    } else {
        let u = inst.s_rectangular(DEFAULT_COMBINATION_CAP)?;
        robust_space_membership(&inst.mdp, &u, &x, tol)?
    };
    Ok(to_json(&report))
}

fn reduce_cmd(instance: &Path, out: &Path) -> CliResult<String> {
    let inst = read_instance(instance)?;
    let Some(u) = &inst.uncertainty else {
        return Err(Failure::usage("reduce needs an s_rect or sa_rect instance"));
    };
    let (reduced, report) = reduce(u)?;
    let mut next = Instance::with_uncertainty(&inst.mdp, reduced)?;
    next.policy = inst.policy.clone();
    next.p0 = inst.p0.clone();
    std::fs::write(out, next.to_json())
        .map_err(|e| Failure::usage(format!("cannot write {}: {e}", out.display())))?;
    Ok(to_json(&report))
}

fn verify(
    suite: &str,
    seed: Option<u64>,
    instances: Option<usize>,
    inject: Option<&str>,
) -> CliResult<(String, bool)> {
    let mut cfg = if suite == "default" {
        SuiteConfig::default()
    } else {
        let text = std::fs::read_to_string(suite)
            .map_err(|e| Failure::usage(format!("unknown suite `{suite}` ({e})")))?;
        serde_json::from_str(&text).map_err(|e| Failure::parse(format!("suite {suite}: {e}")))?
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = instances {
        cfg.num_instances = n;
    }
    if let Some(name) = inject {
        cfg.inject_failure = Some(
            CheckId::parse(name)
                .ok_or_else(|| Failure::usage(format!("unknown check `{name}`")))?,
        );
    }
    let report = run_suite(&cfg)?;
    for c in &report.checks {
        let worst = c.worst.map_or("-".to_string(), |w| format!("{w:.3e}"));
        eprintln!(
            "{} {:<42} {:>5}/{:<5} worst {}",
            if c.failures == 0 { "PASS" } else { "FAIL" },
            c.check.name(),
            c.passes,
            c.trials,
            worst
        );
    }
    Ok((to_json(&report), report.all_passed))
}

fn render(instance: &Path, figure: &str, out: &Path, opts: FigureOptions) -> CliResult<String> {
    let id = FigureId::parse(figure)
        .ok_or_else(|| Failure::usage(format!("unknown figure `{figure}`")))?;
    let inst = read_instance(instance)?;
    let summary = emit_figure_data(&inst, id, out, &opts)?;
    Ok(to_json(&summary))
}

fn run(cli: Cli) -> CliResult<(String, bool)> {
    match cli.command {
        Command::Evaluate {
            instance,
            policy,
            tol,
        } => Ok((evaluate(&instance, policy.as_deref(), tol)?, true)),
        Command::Membership {
            instance,
            point,
            tol,
        } => Ok((membership(&instance, &point, tol)?, true)),
        Command::Reduce { instance, out } => Ok((reduce_cmd(&instance, &out)?, true)),
        Command::Verify {
            suite,
            seed,
            instances,
            inject_failure,
        } => verify(&suite, seed, instances, inject_failure.as_deref()),
        Command::Render {
            instance,
            figure,
            out,
            seed,
            samples,
            grid,
        } => {
            let opts = FigureOptions {
                seed,
                samples,
                grid,
                ..FigureOptions::default()
            };
            Ok((render(&instance, &figure, &out, opts)?, true))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok((json, ok)) => {
            print!("{json}");
            ExitCode::from(if ok { 0 } else { 1 })
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
