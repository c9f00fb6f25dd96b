//! Configuration-driven command line for the homogenization laboratory.
//!
//! Every subcommand builds an `ExperimentConfig` and goes through the same
//! `run` dispatcher, so a CLI invocation and a `run --config file.json`
//! invocation of the same experiment produce identical outputs.

mod config;
mod report;

use clap::{Args, Parser, Subcommand};
use config::{parse_eps_list, ExperimentConfig, IntegrandSpec, LatticeConfig};
use reithom::cellsolver::{
    solve_inner, solve_outer, CellProblem, HomTable, LatticeSpec, Tabulator,
};
use reithom::error::{Error, Result};
use reithom::gammaharness::{convergence_study, recovery_study, tabulate_outer, StudyConfig};
use reithom::multiscale::{
    generator_by_name, test_by_name, triple_integral, two_scale_pair, OscillatingSequence,
};
use reithom::nfunction;
use reithom::solver::SolverParams;
use report::{fmt17, Csv, RunOutputs};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "reithom",
    about = "Reiterated periodic homogenization laboratory",
    version
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalOpts {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Treat solver non-convergence as an error instead of a flagged row.
    #[arg(long, global = true, default_value_t = false)]
    strict: bool,
    /// Seed for sampled validation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for report files.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// N-function diagnostics: doubling condition and conjugate samples.
    Nfcheck {
        /// Catalog name: power:p, plog:p,q, exp, square.
        #[arg(long)]
        nf: String,
        #[arg(long, default_value_t = 1e-2)]
        t_min: f64,
        #[arg(long, default_value_t = 1e4)]
        t_max: f64,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Cell-problem solves.
    Cell {
        #[command(subcommand)]
        cmd: CellCommand,
    },
    /// Tabulate the level-one effective density on a xi lattice.
    Table {
        #[arg(long)]
        integrand: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        nf_param: Option<String>,
        #[arg(long)]
        xi_min: f64,
        #[arg(long)]
        xi_max: f64,
        #[arg(long)]
        xi_count: usize,
        #[arg(long, default_value_t = 16)]
        y_samples: usize,
        #[arg(long, default_value_t = 256)]
        res: usize,
        #[arg(long)]
        out: String,
    },
    /// Two-scale pairing studies.
    Twoscale {
        #[command(subcommand)]
        cmd: TwoscaleCommand,
    },
    /// Recovery-sequence energies along a decreasing epsilon list.
    Corrector {
        #[arg(long)]
        integrand: String,
        #[arg(long, default_value_t = 1.0)]
        xi0: f64,
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 8)]
        res_per_period: usize,
        #[arg(long, default_value_t = 256)]
        cell_res: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Direct-minimization convergence studies.
    Gamma {
        #[command(subcommand)]
        cmd: GammaCommand,
    },
}

#[derive(Subcommand)]
enum CellCommand {
    /// Solve the inner problem at a frozen slow point.
    Inner {
        #[arg(long)]
        integrand: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        nf_param: Option<String>,
        #[arg(long, default_value_t = 1)]
        order: u8,
        /// Applied gradient entries, comma separated.
        #[arg(long, value_delimiter = ',')]
        xi: Vec<f64>,
        /// Frozen slow point coordinates.
        #[arg(long, value_delimiter = ',', default_value = "0.0")]
        y: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        res: usize,
        #[arg(long)]
        out: Option<String>,
    },
    /// Solve the outer problem against a stored inner table.
    Outer {
        #[arg(long)]
        integrand: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        nf_param: Option<String>,
        #[arg(long)]
        table: String,
        #[arg(long, value_delimiter = ',')]
        xi: Vec<f64>,
        #[arg(long, default_value_t = 256)]
        res: usize,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Subcommand)]
enum TwoscaleCommand {
    /// Pair an oscillating sequence against a periodic test function.
    Pair {
        #[arg(long)]
        seq: String,
        #[arg(long)]
        test: String,
        /// Epsilon list, e.g. 2^-3..2^-7 or 0.25,0.125.
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 8)]
        res_per_period: usize,
        #[arg(long)]
        out: Option<String>,
    },
}

#[derive(Subcommand)]
enum GammaCommand {
    /// Minimize the oscillating energy along an epsilon list and compare with
    /// the homogenized minimum.
    Study {
        #[arg(long)]
        integrand: String,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        q: Option<f64>,
        #[arg(long)]
        nf_param: Option<String>,
        #[arg(long, default_value_t = 1)]
        order: u8,
        #[arg(long, default_value_t = 1.0)]
        xi0: f64,
        #[arg(long)]
        eps: String,
        #[arg(long, default_value_t = 16)]
        res_per_period: usize,
        #[arg(long, default_value_t = 256)]
        cell_res: usize,
        /// Attach the exact 1-D quadratic-formula oracle column.
        #[arg(long, default_value_t = false)]
        exact_oracle: bool,
        #[arg(long)]
        out: Option<String>,
    },
}

fn log_enabled() -> bool {
    matches!(
        std::env::var("REITHOM_LOG").as_deref(),
        Ok("debug") | Ok("info") | Ok("trace")
    )
}

macro_rules! logln {
    ($($arg:tt)*) => {
        if log_enabled() {
            eprintln!($($arg)*);
        }
    };
}

fn integrand_spec(
    name: &str,
    p: Option<f64>,
    q: Option<f64>,
    nf: Option<String>,
    order: Option<u8>,
) -> IntegrandSpec {
    IntegrandSpec {
        p,
        q,
        nf,
        order,
        ..IntegrandSpec::named(name)
    }
}

fn main() {
    let cli = Cli::parse();
    if let Some(jobs) = cli.global.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    let cfg = match command_to_config(cli.command) {
        Ok(cfg) => cfg,
        Err(err) => fail(&err),
    };
    match run(&cfg, &cli.global) {
        Ok(summary) => {
            let text = serde_json::to_string_pretty(&summary).expect("summary is json");
            let path = cli
                .global
                .out_dir
                .join(format!("{}.summary.json", summary.kind));
            if let Err(err) = std::fs::write(&path, &text) {
                fail(&Error::Io(err));
            }
            println!("{text}");
        }
        Err(err) => fail(&err),
    }
}

fn fail(err: &Error) -> ! {
    let payload = serde_json::json!({
        "error": { "code": err.code(), "kind": err.kind(), "message": err.to_string() }
    });
    eprintln!("{payload}");
    std::process::exit(err.code());
}

fn command_to_config(cmd: Command) -> Result<ExperimentConfig> {
    Ok(match cmd {
        Command::Run { config } => config::load_config(&config)?,
        Command::Nfcheck {
            nf,
            t_min,
            t_max,
            samples,
            out,
        } => ExperimentConfig::NfunctionCheck {
            nfunction: nf,
            t_min,
            t_max,
            samples,
            out,
        },
        Command::Cell { cmd } => match cmd {
            CellCommand::Inner {
                integrand,
                p,
                q,
                nf_param,
                order,
                xi,
                y,
                res,
                out,
            } => ExperimentConfig::CellInner {
                integrand: integrand_spec(&integrand, p, q, nf_param, Some(order)),
                xi,
                y,
                res,
                out,
                validate_budget: None,
            },
            CellCommand::Outer {
                integrand,
                p,
                q,
                nf_param,
                table,
                xi,
                res,
                out,
            } => ExperimentConfig::CellOuter {
                integrand: integrand_spec(&integrand, p, q, nf_param, None),
                table,
                xi,
                res,
                out,
            },
        },
        Command::Table {
            integrand,
            p,
            q,
            nf_param,
            xi_min,
            xi_max,
            xi_count,
            y_samples,
            res,
            out,
        } => ExperimentConfig::HomTable {
            integrand: integrand_spec(&integrand, p, q, nf_param, None),
            lattice: LatticeConfig {
                min: xi_min,
                max: xi_max,
                count: xi_count,
            },
            y_samples,
            res,
            out,
        },
        Command::Twoscale { cmd } => match cmd {
            TwoscaleCommand::Pair {
                seq,
                test,
                eps,
                res_per_period,
                out,
            } => ExperimentConfig::Twoscale {
                seq,
                test,
                eps,
                res_per_period,
                out,
            },
        },
        Command::Corrector {
            integrand,
            xi0,
            eps,
            res_per_period,
            cell_res,
            out,
        } => ExperimentConfig::Corrector {
            integrand: IntegrandSpec::named(&integrand),
            xi0,
            eps,
            res_per_period,
            cell_res,
            out,
        },
        Command::Gamma { cmd } => match cmd {
            GammaCommand::Study {
                integrand,
                p,
                q,
                nf_param,
                order,
                xi0,
                eps,
                res_per_period,
                cell_res,
                exact_oracle,
                out,
            } => ExperimentConfig::GammaStudy {
                integrand: integrand_spec(&integrand, p, q, nf_param, Some(order)),
                xi0,
                eps,
                res_per_period,
                cell_res,
                exact_oracle,
                out,
            },
        },
    })
}

#[derive(Serialize)]
struct RunSummary {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    warnings: Option<Vec<String>>,
    outputs: RunOutputs,
    #[serde(flatten)]
    payload: serde_json::Value,
}

fn out_path(opts: &GlobalOpts, name: &str) -> PathBuf {
    opts.out_dir.join(name)
}

/// Accept `--out study` and `--out study.csv` alike.
fn csv_stem(out: &str) -> &str {
    out.strip_suffix(".csv").unwrap_or(out)
}

/// Dispatch one experiment. Deterministic given the seed; writes the report
/// files and returns the JSON summary.
fn run(cfg: &ExperimentConfig, opts: &GlobalOpts) -> Result<RunSummary> {
    std::fs::create_dir_all(&opts.out_dir)?;
    let mut warnings = Vec::new();
    let summary = match cfg {
        ExperimentConfig::NfunctionCheck {
            nfunction,
            t_min,
            t_max,
            samples,
            out,
        } => {
            let nf = nfunction::by_name(nfunction)?;
            logln!("[nfcheck] {} on [{t_min}, {t_max}]", nf.label());
            let report = nfunction::nfunction_report(&nf, *t_min, *t_max, *samples)?;
            let mut outputs = RunOutputs::default();
            if let Some(out) = out {
                let path = out_path(opts, &format!("{out}.json"));
                report::write_json(&path, &report)?;
                outputs.files.push(path);
            }
            RunSummary {
                kind: "nfunction-check".into(),
                warnings: None,
                outputs,
                payload: serde_json::to_value(&report)?,
            }
        }
        ExperimentConfig::CellInner {
            integrand,
            xi,
            y,
            res,
            out,
            validate_budget,
        } => {
            let ig = integrand.build()?;
            let validation = match validate_budget {
                Some(budget) => Some(ig.validate(*budget, opts.seed)?),
                None => None,
            };
            let y = if y.is_empty() {
                vec![0.0; ig.dims().space]
            } else {
                y.clone()
            };
            let cp = CellProblem::inner(ig, y, xi.clone(), *res);
            logln!("[cell inner] {} xi={xi:?} res={res}", cp.integrand.label());
            let sol = solve_inner(&cp)?;
            if !sol.converged {
                let msg = format!(
                    "inner solve stopped at max iterations (grad norm {:.3e})",
                    sol.final_grad_norm
                );
                if opts.strict {
                    return Err(Error::NonConvergence(msg));
                }
                warnings.push(msg);
            }
            let mut outputs = RunOutputs::default();
            if let Some(out) = out {
                let path = out_path(opts, out);
                sol.corrector.save(&path)?;
                outputs.files.push(path.with_extension("json"));
                outputs.files.push(path.with_extension("bin"));
            }
            RunSummary {
                kind: "cell-inner".into(),
                warnings: (!warnings.is_empty()).then_some(warnings),
                outputs,
                payload: serde_json::json!({
                    "energy": sol.energy,
                    "iterations": sol.iterations,
                    "grad_norm": sol.final_grad_norm,
                    "converged": sol.converged,
                    "zero_candidate_energy": sol.zero_candidate_energy,
                    "validation": validation,
                }),
            }
        }
        ExperimentConfig::CellOuter {
            integrand,
            table,
            xi,
            res,
            out,
        } => {
            let ig = integrand.build()?;
            let mut table = HomTable::load(Path::new(table))?;
            let tab = Tabulator::new(&ig, table.resolution.max(8));
            let cp = CellProblem::outer(ig.clone(), xi.clone(), *res);
            logln!("[cell outer] {} xi={xi:?} res={res}", ig.label());
            let sol = solve_outer(&cp, &mut table, Some(&tab))?;
            if !sol.converged {
                let msg = "outer solve stopped at max iterations".to_string();
                if opts.strict {
                    return Err(Error::NonConvergence(msg));
                }
                warnings.push(msg);
            }
            let mut outputs = RunOutputs::default();
            if let Some(out) = out {
                let path = out_path(opts, out);
                sol.corrector.save(&path)?;
                outputs.files.push(path.with_extension("json"));
                outputs.files.push(path.with_extension("bin"));
            }
            RunSummary {
                kind: "cell-outer".into(),
                warnings: (!warnings.is_empty()).then_some(warnings),
                outputs,
                payload: serde_json::json!({
                    "energy": sol.energy,
                    "iterations": sol.iterations,
                    "converged": sol.converged,
                }),
            }
        }
        ExperimentConfig::HomTable {
            integrand,
            lattice,
            y_samples,
            res,
            out,
        } => {
            let ig = integrand.build()?;
            let tab = Tabulator::new(&ig, *res);
            logln!(
                "[table] {} lattice [{}, {}] x {} with {y_samples} y-samples",
                ig.label(),
                lattice.min,
                lattice.max,
                lattice.count
            );
            let table = tab.tabulate(lattice.to_spec()?, *y_samples)?;
            let flagged = table.converged.iter().filter(|c| !**c).count();
            if flagged > 0 {
                let msg = format!("{flagged} table entries did not converge");
                if opts.strict {
                    return Err(Error::NonConvergence(msg));
                }
                warnings.push(msg);
            }
            let path = out_path(opts, out);
            table.save(&path)?;
            RunSummary {
                kind: "hom-table".into(),
                warnings: (!warnings.is_empty()).then_some(warnings),
                outputs: RunOutputs {
                    files: vec![path.with_extension("json"), path.with_extension("bin")],
                },
                payload: serde_json::json!({
                    "entries": table.values.len(),
                    "worst_convexity_violation": table.worst_convexity_violation(),
                    "worst_growth_violation": table.worst_growth_violation(&ig),
                }),
            }
        }
        ExperimentConfig::Twoscale {
            seq,
            test,
            eps,
            res_per_period,
            out,
        } => {
            let generator = generator_by_name(seq)?;
            let test_fn = test_by_name(test)?;
            let eps_list = parse_eps_list(eps)?;
            let finest = eps_list.last().copied().unwrap();
            let n = (*res_per_period as f64 / (finest * finest)).round() as usize;
            let grid = reithom::fields::MacroGrid::unit_affine_1d(n, 0.0);
            let sequence = OscillatingSequence::new(generator.clone(), eps_list, grid)?;
            logln!("[twoscale] seq={seq} test={test} n={n}");
            let study = two_scale_pair(&sequence, &*test_fn)?;
            let gen2 = generator.clone();
            let test2 = test_fn.clone();
            let target = triple_integral(&move |x, y, z| gen2(x, y, z) * test2(x, y, z), 1.0, 96);
            let mut csv = Csv::new(vec!["epsilon", "pairing", "target", "residual"]);
            for row in &study.rows {
                csv.row(vec![
                    fmt17(row.epsilon),
                    fmt17(row.pairing),
                    fmt17(target),
                    fmt17((row.pairing - target).abs()),
                ]);
            }
            let mut outputs = RunOutputs::default();
            if let Some(out) = out {
                let path = out_path(opts, &format!("{}.csv", csv_stem(out)));
                csv.write(&path)?;
                outputs.files.push(path);
            }
            RunSummary {
                kind: "twoscale".into(),
                warnings: None,
                outputs,
                payload: serde_json::json!({
                    "rows": study.rows,
                    "target": target,
                    "limit_estimate": study.limit_estimate,
                }),
            }
        }
        ExperimentConfig::Corrector {
            integrand,
            xi0,
            eps,
            res_per_period,
            cell_res,
            out,
        } => {
            let ig = integrand.build()?;
            let eps_list = parse_eps_list(eps)?;
            logln!("[corrector] {} xi0={xi0}", ig.label());
            let rows = recovery_study(
                &ig,
                *xi0,
                &eps_list,
                *res_per_period,
                *cell_res,
                &SolverParams::default(),
            )?;
            let mut csv = Csv::new(vec![
                "epsilon",
                "recovery_energy",
                "direct_min",
                "target",
                "excess",
            ]);
            for r in &rows {
                csv.row(vec![
                    fmt17(r.epsilon),
                    fmt17(r.recovery_energy),
                    fmt17(r.direct_min),
                    fmt17(r.target),
                    fmt17(r.recovery_energy - r.direct_min),
                ]);
            }
            let mut outputs = RunOutputs::default();
            if let Some(out) = out {
                let path = out_path(opts, &format!("{}.csv", csv_stem(out)));
                csv.write(&path)?;
                outputs.files.push(path);
            }
            RunSummary {
                kind: "corrector".into(),
                warnings: None,
                outputs,
                payload: serde_json::json!({ "rows": rows }),
            }
        }
        ExperimentConfig::GammaStudy {
            integrand,
            xi0,
            eps,
            res_per_period,
            cell_res,
            exact_oracle,
            out,
        } => {
            let ig = integrand.build()?;
            let eps_list = parse_eps_list(eps)?;
            let params = SolverParams::default();
            logln!("[gamma] {} xi0={xi0} eps={eps}", ig.label());
            // effective density tabulated around the boundary slope; xi0 sits
            // on a lattice node so the homogenized minimum is interpolation-free
            let span = 2.0 * xi0.abs().max(1.0);
            let tab = Tabulator {
                integrand: &ig,
                resolution: *cell_res,
                params,
            };
            let mut inner = tab.tabulate(LatticeSpec::uniform_1d(-span, span, 81), *cell_res)?;
            let outer_lattice = if *xi0 == 0.0 {
                LatticeSpec::uniform_1d(0.0, 0.0, 1)
            } else {
                LatticeSpec::uniform_1d(xi0.min(0.0), xi0.max(0.0), 3)
            };
            let outer = tabulate_outer(&ig, &mut inner, &tab, outer_lattice, *cell_res, params)?;
            let cfg = StudyConfig {
                xi0: *xi0,
                epsilon_list: eps_list,
                res_per_period: *res_per_period,
                quadratic_oracle: *exact_oracle,
                params,
            };
            let study = convergence_study(&ig, &cfg, &outer)?;
            let flagged = study.rows.iter().filter(|r| !r.converged).count();
            if flagged > 0 {
                let msg = format!("{flagged} epsilon runs did not converge");
                if opts.strict {
                    return Err(Error::NonConvergence(msg));
                }
                warnings.push(msg);
            }
            let mut csv = Csv::new(vec![
                "epsilon",
                "grid_points",
                "F_eps_min",
                "oracle_min",
                "hom_value",
                "residual",
                "iterations",
            ]);
            for r in &study.rows {
                csv.row(vec![
                    fmt17(r.epsilon),
                    r.grid_points.to_string(),
                    fmt17(r.f_eps_min),
                    r.oracle_min.map(fmt17).unwrap_or_default(),
                    fmt17(r.hom_value),
                    fmt17(r.residual),
                    r.iterations.to_string(),
                ]);
            }
            let mut outputs = RunOutputs::default();
            let path = out_path(
                opts,
                &format!("{}.csv", csv_stem(out.as_deref().unwrap_or("study"))),
            );
            csv.write(&path)?;
            outputs.files.push(path);
            RunSummary {
                kind: "gamma-study".into(),
                warnings: (!warnings.is_empty()).then_some(warnings),
                outputs,
                payload: serde_json::json!({
                    "rows": study.rows,
                    "homogenized_value": study.homogenized_value,
                    "oracle_value": study.oracle_value,
                    "fitted_rate": study.fitted_rate,
                }),
            }
        }
    };
    Ok(summary)
}
