mod config;
mod output;

use std::fmt::Write as _;
use std::process::ExitCode;

use clap::Parser;
use ladderwalk::closed_form::speed;
use ladderwalk::harness::{clt_experiment, speed_curve, trap_time_row, verify_suite, Check, CltMode};
use ladderwalk::tree::{TreeSampler, TreeWindow};
use ladderwalk::rng::StreamKey;
use ladderwalk::TrapShape;
use serde_json::{json, Value};

use config::{alpha_grid, beta_grid, Cli, Command, Format, UsageError};
use output::{emit, header, num};

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e.0)
    }
}

impl From<ladderwalk::Error> for Failure {
    fn from(e: ladderwalk::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("cannot write output: {e}"))
    }
}

/// A table of rows rendered as CSV (with a comment header) or JSON.
struct Table {
    columns: &'static [&'static str],
    rows: Vec<Vec<Value>>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => num(n.as_f64().unwrap_or(f64::NAN)),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn float(x: f64) -> Value {
    num(x).parse::<f64>().map(Value::from).unwrap_or(Value::Null)
}

impl Table {
    fn render(&self, format: Format, config: &Value, seed: Option<u64>) -> String {
        match format {
            Format::Csv => {
                let mut s = header(&config.to_string(), seed);
                s.push_str(&self.columns.join(","));
                s.push('\n');
                for row in &self.rows {
                    let cells: Vec<String> = row.iter().map(cell).collect();
                    s.push_str(&cells.join(","));
                    s.push('\n');
                }
                s
            }
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
                    .collect();
                let doc = json!({ "meta": meta(config, seed), "rows": rows });
                format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"))
            }
        }
    }
}

fn meta(config: &Value, seed: Option<u64>) -> Value {
    json!({ "version": env!("CARGO_PKG_VERSION"), "seed": seed, "config": config })
}

fn verify_report(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        let tag = if c.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{tag}  {:<34} expected {:>18}  observed {:>18}  tol {}",
            c.name,
            num(c.expected),
            num(c.observed),
            num(c.tolerance)
        );
    }
    s
}

fn execute(cmd: &Command) -> Result<ExitCode, Failure> {
    let config = serde_json::to_value(cmd).expect("serializable");
    let run = cmd.run_args();
    let out = run.output.as_deref();
    if let Some(dir) = out.and_then(|p| p.parent()).filter(|d| !d.as_os_str().is_empty()) {
        if !dir.is_dir() {
            return Err(Failure::Runtime(format!("output directory {} does not exist", dir.display())));
        }
    }
    match cmd {
        Command::SpeedCurve { model, beta_min, beta_max, beta_count, steps, replicas, .. } => {
            let betas = beta_grid(*beta_min, *beta_max, *beta_count)?;
            let params = model.params(betas[0])?;
            if *steps < 10_000 || *replicas < 10 {
                return Err(Failure::Usage("--steps must be >= 10000 and --replicas >= 10".into()));
            }
            let pts = speed_curve(&params, &betas, *steps, *replicas)?;
            let rows = pts
                .iter()
                .map(|p| {
                    vec![
                        float(p.alpha),
                        float(p.beta),
                        float(p.v_formula),
                        float(p.estimate.point),
                        float(p.estimate.std_error),
                        json!(p.estimate.replicas),
                        json!(p.estimate.steps_per_replica),
                        float(p.estimate.capped_fraction),
                    ]
                })
                .collect();
            let t = Table {
                columns: &["alpha", "beta", "v_formula", "v_mc", "std_err", "replicas", "steps", "capped_fraction"],
                rows,
            };
            emit(out, &t.render(run.format, &config, Some(model.seed)))?;
        }
        Command::SpeedVsAlpha { beta, alpha_min, alpha_max, alpha_count, .. } => {
            if *beta < 1.0 {
                return Err(Failure::Usage("--beta must be at least 1".into()));
            }
            let rows = alpha_grid(*alpha_min, *alpha_max, *alpha_count)?
                .into_iter()
                .map(|a| Ok(vec![float(*beta), float(a), float(speed(a, *beta)?.v)]))
                .collect::<Result<Vec<_>, Failure>>()?;
            let t = Table { columns: &["beta", "alpha", "v_formula"], rows };
            emit(out, &t.render(run.format, &config, None))?;
        }
        Command::Verify { model, beta, quick, .. } => {
            let params = model.params(*beta)?;
            let checks = verify_suite(&params, *quick)?;
            let table = verify_report(&checks);
            let doc = json!({ "meta": meta(&config, Some(model.seed)), "checks": checks });
            let body = format!("{}\n", serde_json::to_string_pretty(&doc).expect("serializable"));
            match (out, run.format) {
                (Some(p), _) => {
                    emit(Some(p), &body)?;
                    print!("{table}");
                }
                (None, Format::Json) => {
                    eprint!("{table}");
                    emit(None, &body)?;
                }
                (None, Format::Csv) => print!("{table}"),
            }
            if checks.iter().any(|c| !c.pass) {
                return Ok(ExitCode::from(3));
            }
        }
        Command::CltHist { model, beta, steps, replicas, .. } => {
            let params = model.params(*beta)?;
            let mode = if *beta == 1.0 { CltMode::Quenched } else { CltMode::Annealed };
            let r = clt_experiment(&params, *steps, *replicas, mode).map_err(|e| match e {
                ladderwalk::Error::Domain(m) => Failure::Usage(m),
                other => other.into(),
            })?;
            let rows = r
                .endpoints
                .iter()
                .zip(&r.samples)
                .enumerate()
                .map(|(i, (x, z))| vec![json!(i), json!(x), float(*z)])
                .collect();
            let t = Table { columns: &["replica", "endpoint", "standardized"], rows };
            emit(out, &t.render(run.format, &config, Some(model.seed)))?;
        }
        Command::TrapTimes { beta, kind, max_arm, samples, seed, .. } => {
            if *beta < 1.0 {
                return Err(Failure::Usage("--beta must be at least 1".into()));
            }
            let mut rows = Vec::new();
            for k in kind.kinds() {
                for a in 0..=*max_arm as i64 {
                    for b in 0..=*max_arm as i64 {
                        let Ok(shape) = TrapShape::new(k, a, b) else { continue };
                        let r = trap_time_row(shape, *beta, *samples, *seed)?;
                        rows.push(vec![
                            json!(k.label()),
                            json!(a),
                            json!(b),
                            float(*beta),
                            float(r.mean_formula),
                            float(r.mean_oracle),
                            float(r.mean_mc),
                            float(r.std_err),
                        ]);
                    }
                }
            }
            let t = Table {
                columns: &["kind", "k", "l", "beta", "mean_formula", "mean_oracle", "mean_mc", "std_err"],
                rows,
            };
            emit(out, &t.render(run.format, &config, Some(*seed)))?;
        }
        Command::SampleTree { model, blocks, .. } => {
            let params = model.params(1.0)?;
            if *blocks == 0 {
                return Err(Failure::Usage("--blocks must be positive".into()));
            }
            let sampler = TreeSampler::new(StreamKey::new(params.seed()), params.alpha())?;
            let window = TreeWindow::build(sampler, *blocks, *blocks)?;
            let mut body = header(&config.to_string(), Some(params.seed()));
            body.push_str(&window.dump());
            emit(out, &body)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let jobs = cli.command.run_args().jobs;
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| execute(&cli.command)) {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
