//! Command-line driver: `solve`, `ladder` and `estimate`.
//!
//! Settings come from built-in defaults (the perpetual-put benchmark),
//! optionally overridden by a JSON config file (`--config`), then by
//! individual flags.

mod config;
mod output;

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

pub use config::RunConfig;
pub use output::{fmt_csv, fmt_sig7};

use crate::grid::MapKind;
use crate::problem::{to_financial, ExactSolution, PerpetualPut};
use crate::richardson::{build_ladder, error_report, observed_order};
use crate::solver::{continuation_solve, Continuation, Method};

#[derive(Debug, Parser)]
#[command(
    name = "freebound",
    version,
    about = "Free-boundary BVPs on [1, inf) via quasi-uniform grids"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve on every N of the list and write one solution CSV per level.
    Solve(Overrides),
    /// Richardson ladder for the free boundary across the N list.
    Ladder(Overrides),
    /// Error estimates from the solutions on N and 2N.
    Estimate(Overrides),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapArg {
    Log,
    Alg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Lm,
    Newton,
}

#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the effective configuration to this file.
    #[arg(long)]
    pub save_config: Option<PathBuf>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub strike: Option<f64>,
    #[arg(long, value_enum)]
    pub map: Option<MapArg>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Comma-separated, doubling grid sizes, e.g. 2,4,8,16.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    #[arg(long)]
    pub tol_f: Option<f64>,
    #[arg(long)]
    pub tol_x: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub p0: Option<f64>,
    #[arg(long)]
    pub dp: Option<f64>,
    /// Highest extrapolation column in the ladder output.
    #[arg(long)]
    pub max_k: Option<usize>,
    /// Coarse level for `estimate`.
    #[arg(long)]
    pub n: Option<usize>,
    /// Leave out exact-solution columns.
    #[arg(long)]
    pub no_oracle: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        take!(
            sigma2,
            rate,
            strike,
            n_list,
            tol_f,
            tol_x,
            max_iterations,
            p0,
            dp,
            max_k,
            n,
            out
        );
        if let Some(m) = self.map {
            cfg.map = match m {
                MapArg::Log => MapKind::Logarithmic,
                MapArg::Alg => MapKind::Algebraic,
            };
        }
        if self.c.is_some() {
            cfg.c = self.c;
        }
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Lm => Method::LevenbergMarquardt,
                MethodArg::Newton => Method::DampedNewton,
            };
        }
        if self.no_oracle {
            cfg.oracle = false;
        }
        cfg.validate()?;
        if let Some(p) = &self.save_config {
            cfg.save(p)?;
        }
        Ok(cfg)
    }
}

/// Files written by a command, plus the solved free boundaries.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub free_boundaries: Vec<(usize, f64)>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> anyhow::Result<Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    run(cli)
}

pub fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Solve(o) => cmd_solve(&o.resolve()?),
        Command::Ladder(o) => cmd_ladder(&o.resolve()?),
        Command::Estimate(o) => {
            let cfg = o.resolve()?;
            cmd_estimate(&cfg, cfg.n)
        }
    }
}

fn prepare_out(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
}

fn run_continuation(
    cfg: &RunConfig,
    n_list: &[usize],
) -> anyhow::Result<(PerpetualPut, Continuation)> {
    let put = PerpetualPut::new(cfg.market()?)?;
    let run = continuation_solve(&put, cfg.grid_map()?, n_list, &cfg.solver_settings())?;
    for l in &run.levels {
        log::info!(
            "N = {:>5}: R = {:.10}, {:?} in {} iterations",
            l.intervals(),
            l.free_boundary(),
            l.report.termination,
            l.report.iterations
        );
    }
    Ok((put, run))
}

fn failure_message(run: &Continuation) -> Option<String> {
    run.failed_level().map(|l| {
        format!(
            "solve failed at N = {}: {:?} after {} iterations (|F| = {:e})",
            l.intervals(),
            l.report.termination,
            l.report.iterations,
            l.report.final_residual_norm
        )
    })
}

/// Writes `solution_N{N}.csv` for every level.
pub fn cmd_solve(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    prepare_out(&cfg.out)?;
    let (put, run) = run_continuation(cfg, &cfg.n_list)?;
    let mut outcome = Outcome::default();
    for level in run.levels.iter().filter(|l| l.report.converged) {
        let n = level.intervals();
        let path = cfg.out.join(format!("solution_N{n}.csv"));
        let fin = to_financial(&level.grid, &level.solution)?;
        let mut header = vec!["n", "xi", "x", "S", "u", "v", "P", "dPdS"];
        if cfg.oracle {
            header.extend(["u_exact", "v_exact"]);
        }
        let mut w = output::csv_writer(&path)?;
        w.write_record(&header)?;
        for (i, &x) in level.grid.nodes().iter().enumerate() {
            let (u, v, _) = level.solution.node(i);
            let mut rec = vec![
                i.to_string(),
                fmt_csv(level.grid.xi(i)),
                fmt_csv(x),
                fmt_csv(fin.s[i]),
                fmt_csv(u),
                fmt_csv(v),
                fmt_csv(fin.p[i]),
                fmt_csv(fin.delta[i]),
            ];
            if cfg.oracle {
                let (ue, ve) = put.transformed(x)?;
                rec.push(fmt_csv(ue));
                rec.push(fmt_csv(ve));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        outcome.files.push(path);
        outcome.free_boundaries.push((n, level.free_boundary()));
    }
    if let Some(msg) = failure_message(&run) {
        bail!(msg);
    }
    Ok(outcome)
}

/// Writes `ladder.csv` and prints the table.
pub fn cmd_ladder(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    prepare_out(&cfg.out)?;
    if cfg.n_list.len() < 2 {
        bail!("ladder needs at least two grid levels");
    }
    let (put, run) = run_continuation(cfg, &cfg.n_list)?;
    let values = run.free_boundaries();
    let table = if values.len() >= 2 {
        Some(build_ladder(&values, cfg.p0, cfg.dp, 2.0)?)
    } else {
        None
    };
    let reference = if cfg.oracle {
        Some(put.free_boundary())
    } else {
        values.last().copied()
    };
    let kmax = cfg.max_k.min(cfg.n_list.len() - 1);

    let path = cfg.out.join("ladder.csv");
    let mut w = output::csv_writer(&path)?;
    let mut header = vec!["N".to_string()];
    header.extend((0..=kmax).map(|k| format!("R_{k}")));
    header.push("observed_order".into());
    header.push("status".into());
    w.write_record(&header)?;

    let mut human = vec![header[..header.len() - 1].to_vec()];
    for (g, &n) in cfg.n_list.iter().enumerate() {
        let level = run.level(n);
        let converged = level.is_some_and(|l| l.report.converged);
        let mut csv_row = vec![n.to_string()];
        let mut human_row = vec![n.to_string()];
        for k in 0..=kmax {
            let v = if converged {
                table.as_ref().and_then(|t| t.get(g, k))
            } else {
                None
            };
            csv_row.push(v.map(fmt_csv).unwrap_or_default());
            human_row.push(v.map(fmt_sig7).unwrap_or_default());
        }
        let order = match (g, reference, converged) {
            (g, Some(r), true) if g > 0 && g < values.len() => {
                observed_order(values[g - 1], values[g], r)
            }
            _ => None,
        };
        csv_row.push(order.map(fmt_csv).unwrap_or_default());
        human_row.push(order.map(|p| format!("{p:.4}")).unwrap_or_default());
        let status = match level {
            None => "not run".to_string(),
            Some(l) if l.report.converged => "ok".to_string(),
            Some(l) => format!("failed: {:?}", l.report.termination),
        };
        csv_row.push(status);
        w.write_record(&csv_row)?;
        human.push(human_row);
    }
    w.flush()?;
    println!("{}", output::render_table(&human));

    let outcome = Outcome {
        files: vec![path],
        free_boundaries: run
            .levels
            .iter()
            .filter(|l| l.report.converged)
            .map(|l| (l.intervals(), l.free_boundary()))
            .collect(),
    };
    if let Some(msg) = failure_message(&run) {
        bail!(msg);
    }
    Ok(outcome)
}

/// Grid sizes from the first entry of the N list doubling up to `2n`.
fn chain_to(start: usize, n: usize) -> anyhow::Result<Vec<usize>> {
    let mut list = vec![start];
    while *list.last().unwrap() < 2 * n {
        let next = 2 * list.last().unwrap();
        list.push(next);
    }
    if !list.contains(&n) {
        bail!("N = {n} is not reachable by doubling from N = {start}");
    }
    Ok(list)
}

/// Writes `estimate_N{n}.csv` comparing the solutions on `n` and `2n`.
pub fn cmd_estimate(cfg: &RunConfig, n: usize) -> anyhow::Result<Outcome> {
    prepare_out(&cfg.out)?;
    let list = chain_to(cfg.n_list[0], n)?;
    let (put, run) = run_continuation(cfg, &list)?;
    if let Some(msg) = failure_message(&run) {
        bail!(msg);
    }
    let coarse = run.level(n).context("coarse level missing")?;
    let fine = run.level(2 * n).context("fine level missing")?;
    let oracle: Option<&dyn ExactSolution> = if cfg.oracle { Some(&put) } else { None };
    let rep = error_report(
        &coarse.grid,
        &coarse.solution,
        &fine.grid,
        &fine.solution,
        oracle,
        cfg.p0,
    )?;

    let path = cfg.out.join(format!("estimate_N{n}.csv"));
    let mut w = output::csv_writer(&path)?;
    let mut header = vec!["S"];
    if cfg.oracle {
        header.extend(["E1", "E2"]);
    }
    header.extend(["Esafe1", "Esafe2", "Eest1", "Eest2"]);
    w.write_record(&header)?;
    for (i, &x) in rep.nodes.iter().enumerate() {
        let mut rec = vec![fmt_csv(x * rep.free_boundary)];
        if let (Some(e1), Some(e2)) = (&rep.u.true_error, &rep.v.true_error) {
            rec.push(fmt_csv(e1[i]));
            rec.push(fmt_csv(e2[i]));
        }
        rec.extend([
            fmt_csv(rep.u.esafe[i]),
            fmt_csv(rep.v.esafe[i]),
            fmt_csv(rep.u.eest[i]),
            fmt_csv(rep.v.eest[i]),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!(
        "N = {n}/{}: R = {}, Eest(R) = {:.4e}, Esafe(R) = {:.4e}",
        2 * n,
        fmt_sig7(rep.free_boundary),
        rep.free_boundary_eest,
        rep.free_boundary_esafe
    );
    Ok(Outcome {
        files: vec![path],
        free_boundaries: vec![(n, coarse.free_boundary()), (2 * n, fine.free_boundary())],
    })
}
