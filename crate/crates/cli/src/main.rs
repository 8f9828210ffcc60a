//! `tljunction`: command-line front end for the traffic-light junction crate.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use tljunction::battery::{run_battery, select_criteria, Tolerances};
use tljunction::effective::{build_effective_germ, SubgermPoint};
use tljunction::fvm::{homogenization_error, homogenization_error_2to1, BranchField, Trajectory};
use tljunction::germ::{check_germ_property, generator_set, germ_violation, Fluxes, GermSampler};
use tljunction::hj::{corrector, verify_corrector, VerifyGrid};
use tljunction::scenario::{Model, Scenario};
use tljunction::signal::Signal;

use output::{write_manifest, Csv, RunDir, RunManifest, Versions};

#[derive(Parser)]
#[command(
    name = "tljunction",
    version,
    about = "Traffic-light junctions and their homogenized germs"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Root under which run directories are created when --out is absent.
    #[arg(long, global = true, env = "TLJUNCTION_OUT_ROOT", default_value = "runs")]
    out_root: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the homogenized split curves of a scenario's light.
    Effective {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the homogenized germ and check membership and dissipation.
    GermCheck {
        scenario: PathBuf,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 20240611)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build and verify the periodic corrector of one subgerm point.
    Corrector {
        scenario: PathBuf,
        /// `fluid:<share of the total limiter>`, `saturated:1`, `saturated:2` or `jammed`.
        #[arg(long, default_value = "fluid:0.5")]
        point: String,
        /// Half-width of the sampled space window.
        #[arg(long, default_value_t = 5.0)]
        width: f64,
        #[arg(long, default_value_t = 0.05)]
        dx: f64,
        /// Sample times per period.
        #[arg(long, default_value_t = 20)]
        times: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the finite-volume solver on a scenario.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        model: Option<Model>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L1 distance between the light and the homogenized junction for several periods.
    Homogenize {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05,0.025")]
        eps_list: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance battery.
    Battery {
        /// Only criteria of this group, or whose name starts with this string.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading {}", path.display()))
}

/// Fluxes seen by the light: the reversed ones for a converging junction.
fn node_fluxes(s: &Scenario) -> Fluxes {
    match s.model() {
        Model::TwoToOne => s.fluxes.reversed(),
        _ => s.fluxes.clone(),
    }
}

fn manifest<'a, T: Serialize>(
    cli: &Cli,
    command: &'a str,
    scenario: Option<(&Path, &Scenario)>,
    parameters: T,
    tolerances: &'a Tolerances,
) -> RunManifest<'a, T> {
    RunManifest {
        command,
        argv: std::env::args().collect(),
        versions: Versions {
            tljunction: tljunction::VERSION,
            cli: env!("CARGO_PKG_VERSION"),
        },
        jobs: cli.jobs,
        scenario_path: scenario.map(|(p, _)| p.display().to_string()),
        scenario: scenario.map(|(_, s)| s.to_toml()),
        parameters,
        tolerances,
        output_dir: String::new(),
        outputs: Vec::new(),
        budget_seconds: None,
        elapsed_seconds: 0.0,
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let start = Instant::now();
    let tol = Tolerances::default();
    match &cli.command {
        Command::Effective { scenario, out } => {
            let s = load(scenario)?;
            let fl = node_fluxes(&s);
            let eff = build_effective_germ(&s.signal, &fl)?;
            let g = &eff.params;
            let [b0, b1, b2] = g.bars();
            let mut csv = Csv::with_comment(&format!("bar0={b0},bar1={b1},bar2={b2}"), "lambda,hat1,hat2");
            for &l in &eff.lambdas {
                csv.row(&[&l, &g.hat(1, l), &g.hat(2, l)]);
            }
            let mut dir = RunDir::create(out.as_deref(), &cli.out_root, &format!("effective-{}", stem(scenario)))?;
            dir.write("effective_germ.csv", &csv.finish())?;
            println!(
                "bar = ({b0}, {b1}, {b2}), {} nodes -> {}",
                eff.lambdas.len(),
                dir.path.display()
            );
            write_manifest(
                &mut dir,
                manifest(cli, "effective", Some((scenario, &s)), (), &tol),
                start,
            )?;
            Ok(true)
        }
        Command::GermCheck {
            scenario,
            samples,
            pairs,
            seed,
            out,
        } => {
            let s = load(scenario)?;
            let fl = node_fluxes(&s);
            let eff = build_effective_germ(&s.signal, &fl)?;
            let g = &eff.params;
            let mut csv = Csv::new("kind,p0,p1,p2,violation");
            for p in generator_set(g, &fl, 64) {
                csv.row(&[&"generator", &p[0], &p[1], &p[2], &germ_violation(g, &fl, &p)]);
            }
            let mut sampler = GermSampler::new(g, &fl, *seed);
            for _ in 0..*samples {
                let p = sampler.sample();
                csv.row(&[&"sample", &p[0], &p[1], &p[2], &germ_violation(g, &fl, &p)]);
            }
            let report = check_germ_property(g, &fl, *pairs, *seed);
            let (a, b) = report.worst_pair;
            for (kind, p) in [("worst-pair-a", a), ("worst-pair-b", b)] {
                csv.row(&[&kind, &p[0], &p[1], &p[2], &germ_violation(g, &fl, &p)]);
            }
            let mut dir = RunDir::create(out.as_deref(), &cli.out_root, &format!("germ-check-{}", stem(scenario)))?;
            dir.write("germ_check.csv", &csv.finish())?;
            let ok = report.min_dissipation >= tol.germ_min_dissipation;
            println!(
                "{} pairs, min dissipation {:.3e}, worst sample violation {:.3e}: {}",
                report.pairs,
                report.min_dissipation,
                report.max_sample_violation,
                if ok { "ok" } else { "FAILED" }
            );
            #[derive(Serialize)]
            struct P {
                samples: usize,
                pairs: usize,
                seed: u64,
            }
            let params = P {
                samples: *samples,
                pairs: *pairs,
                seed: *seed,
            };
            write_manifest(
                &mut dir,
                manifest(cli, "germ-check", Some((scenario, &s)), params, &tol),
                start,
            )?;
            Ok(ok)
        }
        Command::Corrector {
            scenario,
            point,
            width,
            dx,
            times,
            out,
        } => {
            let s = load(scenario)?;
            let fl = node_fluxes(&s);
            let p = parse_point(point, &s.signal, &fl)?;
            let c = corrector(p, &s.signal, &fl)?;
            if !(*dx > 0.0 && *width > 0.0 && *times > 0) {
                bail!("--dx, --width and --times must be positive");
            }
            let n = (width / dx).round() as usize;
            let mut csv = Csv::new("t,x,branch,u");
            for k in 0..*times {
                let t = k as f64 / *times as f64;
                for i in (0..n).rev() {
                    let x = -(i as f64 + 0.5) * dx;
                    csv.row(&[&t, &x, &0, &c.density(0, t, x)]);
                }
                for j in 1..3 {
                    for i in 0..n {
                        let x = (i as f64 + 0.5) * dx;
                        csv.row(&[&t, &x, &j, &c.density(j, t, x)]);
                    }
                }
            }
            let r = verify_corrector(&c, tol.corrector_membership, &VerifyGrid::default());
            let pass = r.passes(tol.corrector_rate, tol.corrector_membership);
            let mut text = format!("point: {p:?}\ntarget: {:?}\n{r:#?}\n", c.triple.0);
            text.push_str(&format!("verdict: {}\n", if pass { "pass" } else { "fail" }));
            let mut dir = RunDir::create(out.as_deref(), &cli.out_root, &format!("corrector-{}", stem(scenario)))?;
            dir.write("corrector.csv", &csv.finish())?;
            dir.write("report.txt", &text)?;
            println!(
                "membership {:.4}, red-exit flux {:.2e}, decay stable {}: {}",
                r.membership_rate,
                r.red_exit_flux,
                r.decay_stable,
                if pass { "pass" } else { "FAIL" }
            );
            #[derive(Serialize)]
            struct P<'a> {
                point: &'a str,
                width: f64,
                dx: f64,
                times: usize,
            }
            let params = P {
                point,
                width: *width,
                dx: *dx,
                times: *times,
            };
            write_manifest(
                &mut dir,
                manifest(cli, "corrector", Some((scenario, &s)), params, &tol),
                start,
            )?;
            Ok(pass)
        }
        Command::Simulate {
            scenario,
            model,
            eps,
            out,
        } => {
            let s = load(scenario)?;
            let traj = s.run(*model, *eps)?;
            let mut dir = RunDir::create(out.as_deref(), &cli.out_root, &format!("simulate-{}", stem(scenario)))?;
            write_trajectory(&mut dir, &traj)?;
            println!(
                "{} steps, audit rate {:.6}, worst ledger residual {:.2e}, mass {:.6}",
                traj.steps,
                traj.audit_rate(),
                traj.worst_ledger,
                traj.last.mass()
            );
            #[derive(Serialize)]
            struct P {
                model: Model,
                eps: Option<f64>,
            }
            let params = P {
                model: model.unwrap_or(s.model()),
                eps: eps.or(s.file.run.eps),
            };
            write_manifest(
                &mut dir,
                manifest(cli, "simulate", Some((scenario, &s)), params, &tol),
                start,
            )?;
            Ok(true)
        }
        Command::Homogenize {
            scenario,
            eps_list,
            out,
        } => {
            let s = load(scenario)?;
            if eps_list.iter().any(|e| !(*e > 0.0)) {
                bail!("every period in --eps-list must be positive");
            }
            let opts = s.options();
            let rows = match s.model() {
                Model::TwoToOne => homogenization_error_2to1(&s.initial, &s.signal, &s.fluxes, eps_list, &opts)?,
                _ => homogenization_error(&s.initial, &s.signal, &s.fluxes, eps_list, &opts)?,
            };
            let mut csv = Csv::new("eps,l1_error");
            for (e, err) in &rows {
                csv.row(&[e, err]);
                println!("eps = {e}: L1 error {err:.6}");
            }
            let mut dir = RunDir::create(out.as_deref(), &cli.out_root, &format!("homogenize-{}", stem(scenario)))?;
            dir.write("convergence.csv", &csv.finish())?;
            #[derive(Serialize)]
            struct P<'a> {
                eps_list: &'a [f64],
            }
            write_manifest(
                &mut dir,
                manifest(cli, "homogenize", Some((scenario, &s)), P { eps_list }, &tol),
                start,
            )?;
            Ok(true)
        }
        Command::Battery { filter, out } => {
            let reports = run_battery(filter.as_deref(), &tol);
            if reports.is_empty() {
                bail!("no criterion matches {:?}", filter.as_deref().unwrap_or(""));
            }
            let mut csv = Csv::new("name,group,pass,elapsed_s");
            let mut lines = String::new();
            for r in &reports {
                println!("{}", r.line());
                lines.push_str(&r.line());
                lines.push('\n');
                csv.row(&[&r.name, &r.group, &r.pass, &r.elapsed.as_secs_f64()]);
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} passed, {failed} failed", reports.len() - failed);
            let mut dir = RunDir::create(out.as_deref(), &cli.out_root, "battery")?;
            dir.write("battery.txt", &lines)?;
            dir.write("battery.csv", &csv.finish())?;
            #[derive(Serialize)]
            struct P<'a> {
                filter: Option<&'a str>,
            }
            let budget: f64 = select_criteria(filter.as_deref())
                .iter()
                .map(|c| c.budget.as_secs_f64())
                .sum();
            let mut m = manifest(
                cli,
                "battery",
                None,
                P {
                    filter: filter.as_deref(),
                },
                &tol,
            );
            m.budget_seconds = Some(budget);
            write_manifest(&mut dir, m, start)?;
            Ok(failed == 0)
        }
    }
}

fn parse_point(spec: &str, signal: &Signal, fl: &Fluxes) -> Result<SubgermPoint> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    match kind {
        "fluid" => {
            let share: f64 = arg.parse().with_context(|| format!("fluid share in {spec:?}"))?;
            if !(0.0..=1.0).contains(&share) {
                bail!("fluid share must lie in [0, 1], got {share}");
            }
            Ok(SubgermPoint::Fluid {
                p0: fl[0].inv_fluid(share * signal.mean())?,
            })
        }
        "saturated" => match arg {
            "1" => Ok(SubgermPoint::Saturated { k: 1 }),
            "2" => Ok(SubgermPoint::Saturated { k: 2 }),
            _ => bail!("saturated exit must be 1 or 2, got {arg:?}"),
        },
        "jammed" => Ok(SubgermPoint::Jammed),
        _ => bail!("unknown point {spec:?}"),
    }
}

fn write_snapshot(field: &BranchField) -> String {
    let mut csv = Csv::new("x,branch,rho");
    for j in 0..3 {
        for (i, rho) in field.cells[j].iter().enumerate() {
            csv.row(&[&field.x(j, i), &j, rho]);
        }
    }
    csv.finish()
}

fn write_trajectory(dir: &mut RunDir, traj: &Trajectory) -> Result<()> {
    for snap in &traj.snapshots {
        dir.write(&format!("snapshot_{}.csv", snap.t), &write_snapshot(snap))?;
    }
    dir.write("final.csv", &write_snapshot(&traj.last))?;
    let mut trace = Csv::new("t,phi0,phi1,phi2,p0,p1,p2");
    for r in &traj.trace {
        trace.row(&[
            &r.t,
            &r.phi[0],
            &r.phi[1],
            &r.phi[2],
            &r.trace[0],
            &r.trace[1],
            &r.trace[2],
        ]);
    }
    dir.write("trace.csv", &trace.finish())?;
    let mut ledger = Csv::new("t,dt,mass,inflow,outflow,residual");
    for r in &traj.ledger {
        ledger.row(&[&r.t, &r.dt, &r.mass, &r.inflow, &r.outflow, &r.residual]);
    }
    dir.write("ledger.csv", &ledger.finish())
}
