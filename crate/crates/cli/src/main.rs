//! `phenofront` command-line tool.
//!
//! Exit codes: 0 success, 1 error, 2 population not persistent, 3 simulated front
//! escaped the domain, 4 a `check` invariant failed.

mod check;
mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use phenofront::asymptotics::{harmonic_speed, homogenized_speed_l0, mutation_gap, speed_l_inf, speed_m_0, speed_m_inf};
use phenofront::simulate::{run_front, write_rho_csv, SimSpec};
use phenofront::speed::{fg_speed, k_lambda_curve, sweep_l, sweep_m};
use phenofront::{Error, ModelConfig64, SpeedResult64};
use serde_json::{json, Map, Value};

use output::{csv, num, opt, prefixed, to_json, RunManifest};

#[derive(Parser)]
#[command(name = "phenofront", version, about = "Spreading speeds of phenotype-structured Fisher-KPP fronts")]
struct Cli {
    /// Worker threads for sweeps and simulations; SEED_THREADS overrides it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Machine-readable JSON on stdout for every command.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spreading speed c = inf k(lambda) / lambda.
    Speed {
        #[arg(long)]
        config: PathBuf,
    },
    /// Speed over a list of m, L or lambda values, written as CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Skip the golden-section refinement of an interior argmax in m.
        #[arg(long)]
        no_refine: bool,
    },
    /// Limits in L and m, the harmonic speed and the mutation gap.
    Limits {
        #[arg(long)]
        config: PathBuf,
    },
    /// Direct simulation and fitted front speed.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Final time.
        #[arg(long = "T", default_value_t = 40.0)]
        t_final: f64,
        /// Output prefix; a directory places the files inside it.
        #[arg(long)]
        out: PathBuf,
        /// Also write every recorded rho(t, x) profile to rho.csv.
        #[arg(long)]
        snapshots: bool,
    },
    /// Runs the invariant suites on a configuration.
    Check {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    M,
    #[value(name = "L", alias = "l")]
    L,
    Lambda,
}

enum Failure {
    Error(String),
    NotPersistent,
    Escaped(String),
    CheckFailed,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::FrontEscaped { .. } => Failure::Escaped(e.to_string()),
            e => Failure::Error(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Error(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = std::env::var("SEED_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .or(cli.threads);
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let res = match &cli.command {
        Command::Speed { config } => cmd_speed(config),
        Command::Sweep {
            config,
            param,
            values,
            out,
            no_refine,
        } => cmd_sweep(config, *param, values, out, !no_refine, cli.json),
        Command::Limits { config } => cmd_limits(config),
        Command::Simulate {
            config,
            t_final,
            out,
            snapshots,
        } => cmd_simulate(config, *t_final, out, *snapshots, cli.json),
        Command::Check { config } => cmd_check(config, cli.json),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::NotPersistent) => ExitCode::from(2),
        Err(Failure::Escaped(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("hint: the domain length is 1.5 c T + 10 with c the predicted speed; the simulated front outran it, so refine Nx/Ntheta for a better prediction or use a smaller --T");
            ExitCode::from(3)
        }
        Err(Failure::CheckFailed) => ExitCode::from(4),
    }
}

fn load(path: &Path) -> std::result::Result<ModelConfig64, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))?;
    ModelConfig64::parse(&text).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn print(s: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(s.as_bytes());
    let _ = out.flush();
}

fn elapsed_ms(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e6).round() / 1e3
}

fn cmd_speed(path: &Path) -> Outcome {
    let cfg = load(path)?;
    let t = Instant::now();
    let s = fg_speed(&cfg)?;
    let v = json!({
        "c": opt(s.c),
        "lambda_star": opt(s.lambda_star),
        "k0": num(s.k0),
        "persistent": s.persistent,
        "evals": s.evals,
        "runtime_ms": elapsed_ms(t),
    });
    print(&to_json(&v));
    if s.persistent {
        Ok(())
    } else {
        Err(Failure::NotPersistent)
    }
}

fn speed_row(p: f64, s: &SpeedResult64) -> String {
    format!(
        "{},{},{},{},{}\n",
        csv(p),
        s.c.map_or(String::new(), csv),
        s.lambda_star.map_or(String::new(), csv),
        csv(s.k0),
        s.persistent
    )
}

fn cmd_sweep(path: &Path, param: Param, values: &[f64], out: &Path, refine: bool, json_out: bool) -> Outcome {
    let cfg = load(path)?;
    let t = Instant::now();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Failure::Error("--values must be finite".into()));
    }
    let mut text = String::new();
    let mut summary = Map::new();
    match param {
        Param::M | Param::L => {
            if values.iter().any(|&v| v <= 0.0) {
                return Err(Failure::Error("m and L values must be positive".into()));
            }
            if values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Failure::Error("m and L values must be strictly increasing".into()));
            }
            let (name, rec) = match param {
                Param::M => ("m", sweep_m(&cfg, values, refine)?),
                _ => ("L", sweep_l(&cfg, values)?),
            };
            text.push_str(&format!("{name},c,lambda_star,k0,persistent\n"));
            for (p, s) in &rec.points {
                text.push_str(&speed_row(*p, s));
            }
            if let (Param::M, Some(am)) = (param, rec.argmax) {
                text.push_str(&format!("argmax={},{},,,\n", csv(am.value), csv(am.c)));
                summary.insert(
                    "argmax".into(),
                    json!({"m": num(am.value), "c": num(am.c), "refined": am.refined}),
                );
            }
            summary.insert("points".into(), json!(rec.points.len()));
        }
        Param::Lambda => {
            let curve = k_lambda_curve(&cfg, values)?;
            text.push_str("lambda,k,k_over_lambda\n");
            for (l, k) in &curve {
                let ratio = if *l > 0.0 { csv(k / l) } else { String::new() };
                text.push_str(&format!("{},{},{}\n", csv(*l), csv(*k), ratio));
            }
            summary.insert("points".into(), json!(curve.len()));
        }
    }
    let mut manifest = RunManifest::new("sweep", &cfg);
    manifest.write(out, text.as_bytes())?;
    let mpath = PathBuf::from(format!("{}.manifest.json", out.display()));
    summary.insert("out".into(), json!(out.display().to_string()));
    summary.insert("manifest".into(), json!(mpath.display().to_string()));
    manifest.finish(&mpath, elapsed_ms(t))?;
    if json_out {
        print(&to_json(&Value::Object(summary)));
    } else {
        print(&format!("wrote {} ({} rows)\n", out.display(), summary["points"]));
    }
    Ok(())
}

fn field<T>(r: phenofront::Result<T>, f: impl FnOnce(T) -> Value) -> std::result::Result<Value, Failure> {
    match r {
        Ok(v) => Ok(f(v)),
        Err(e @ (Error::Parse { .. } | Error::Validation(_))) => Err(e.into()),
        Err(e) => Ok(json!({ "skipped": e.to_string() })),
    }
}

fn cmd_limits(path: &Path) -> Outcome {
    let cfg = load(path)?;
    let t = Instant::now();
    let mut v = Map::new();
    v.insert(
        "L_to_0".into(),
        field(homogenized_speed_l0(&cfg), |h| match h.c {
            Some(c) => num(c),
            None => json!({ "skipped": format!("homogenized problem not persistent (k0 = {})", num(h.k0)) }),
        })?,
    );
    v.insert("L_to_inf".into(), field(speed_l_inf(&cfg), num)?);
    v.insert("m_to_0".into(), field(speed_m_0(&cfg, 65), |(c, _)| num(c))?);
    v.insert("m_to_inf".into(), field(speed_m_inf(&cfg), num)?);
    v.insert("c_H".into(), field(harmonic_speed(&cfg), num)?);
    v.insert("gamma".into(), field(mutation_gap(&cfg), |g| num(g.gamma))?);
    v.insert("runtime_ms".into(), json!(elapsed_ms(t)));
    print(&to_json(&Value::Object(v)));
    Ok(())
}

fn cmd_simulate(path: &Path, t_final: f64, out: &Path, snapshots: bool, json_out: bool) -> Outcome {
    let cfg = load(path)?;
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Failure::Error("--T must be positive".into()));
    }
    let t = Instant::now();
    let s = fg_speed(&cfg)?;
    let Some(c_pred) = s.c else {
        eprintln!("population does not persist (k0 = {}); nothing to simulate", s.k0);
        return Err(Failure::NotPersistent);
    };
    let trace = run_front(&cfg, SimSpec::for_config(&cfg, c_pred, t_final))?;
    let mut manifest = RunManifest::new("simulate", &cfg);

    let mut front = String::from("t,X,rho_at_front\n");
    for &(tt, x, rho) in &trace.points {
        front.push_str(&format!("{},{},{}\n", csv(tt), csv(x), csv(rho)));
    }
    manifest.write(&prefixed(out, "front.csv"), front.as_bytes())?;

    let summary = json!({
        "c_hat": num(trace.c_hat),
        "r_squared": num(trace.r_squared),
        "c_predicted": num(c_pred),
        "relative_gap": num((trace.c_hat - c_pred) / c_pred),
        "delta": num(trace.delta),
        "fit_window": [num(trace.fit_window.0), num(trace.fit_window.1)],
        "clipped_relative": num(trace.clipped_relative),
        "T": num(t_final),
    });
    let summary_text = to_json(&summary);
    manifest.write(&prefixed(out, "speed.json"), summary_text.as_bytes())?;

    if snapshots {
        let mut buf = Vec::new();
        write_rho_csv(&trace, &mut buf)?;
        manifest.write(&prefixed(out, "rho.csv"), &buf)?;
    }
    let outputs = manifest.outputs.clone();
    manifest.finish(&prefixed(out, "manifest.json"), elapsed_ms(t))?;
    if json_out {
        print(&summary_text);
    } else {
        print(&format!(
            "c_hat = {:.6} (predicted {:.6}, gap {:+.2}%), R^2 = {:.6}\nwrote {}\n",
            trace.c_hat,
            c_pred,
            100.0 * (trace.c_hat - c_pred) / c_pred,
            trace.r_squared,
            outputs.join(", ")
        ));
    }
    Ok(())
}

fn cmd_check(path: &Path, json_out: bool) -> Outcome {
    let cfg = load(path)?;
    let suite = check::run_suite(&cfg)?;
    let ok = suite.iter().all(|i| i.pass);
    if json_out {
        let v = json!({
            "all_pass": ok,
            "invariants": suite.iter().map(|i| i.to_json()).collect::<Vec<_>>(),
        });
        print(&to_json(&v));
    } else {
        let mut s: String = suite.iter().map(|i| i.line() + "\n").collect();
        s.push_str(&format!(
            "{} of {} invariants pass\n",
            suite.iter().filter(|i| i.pass).count(),
            suite.len()
        ));
        print(&s);
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::CheckFailed)
    }
}
