//! `rel-estim`: command-line front end for the estimators.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rel_estim::io::{belgium_dataset, read_dataset, ResponseColumn, TabularSource};
use rel_estim::methods::{self, Method, MethodConfig};
use rel_estim::sim::{self, ErrorModel, ScenarioReport, ScenarioSpec, Truth};
use rel_estim::{ElOptions, Error, FitReport};

#[derive(Debug, Parser)]
#[command(name = "rel-estim", version, about = "Classical and robust empirical likelihood regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Table,
    Json,
    Csv,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit one estimator to a CSV file.
    Fit {
        csv: PathBuf,
        #[arg(long, default_value = "el")]
        method: String,
        /// Fixed residual scale (robust methods); turns on the variance constraint for `el`.
        #[arg(long)]
        sigma: Option<f64>,
        /// Kernel tuning constant (default 1.345 Huber, 4.685 Tukey).
        #[arg(long)]
        tuning: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Extra seeded starts for the outer search.
        #[arg(long, default_value_t = 0)]
        multistart: usize,
        /// Response column name or zero-based index (default: last column).
        #[arg(long)]
        response: Option<String>,
        #[arg(long, default_value = ",")]
        delimiter: char,
        #[arg(long)]
        no_header: bool,
        #[arg(long)]
        no_intercept: bool,
        #[arg(long, value_enum, default_value = "table")]
        out: Output,
    },
    /// Run the Monte Carlo comparison for each (k, n) pair.
    Simulate {
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', required = true)]
        k: Vec<usize>,
        /// Fraction of errors drawn from N(20, 1).
        #[arg(long, default_value_t = 0.0)]
        contam: f64,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<String>>,
        /// Redraw the true coefficients in every replication.
        #[arg(long)]
        redraw_beta: bool,
        #[arg(long, default_value_t = 0.0)]
        truth_mean: f64,
        #[arg(long, default_value_t = 1.0)]
        truth_variance: f64,
        #[arg(long, env = "REL_ESTIM_THREADS")]
        threads: Option<usize>,
        #[arg(long, value_enum, default_value = "table")]
        out: Output,
    },
    /// Fit the Belgium international phone-calls data.
    Belgium {
        #[arg(long, value_delimiter = ',')]
        method: Option<Vec<String>>,
        #[arg(long)]
        tuning: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "table")]
        out: Output,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl Failure {
    fn at(stage: &str, err: Error) -> Self {
        let msg = format!("{stage}: {err}");
        if err.is_data_error() {
            Failure::Data(msg)
        } else {
            Failure::Numerical(msg)
        }
    }
}

fn parse_methods(list: &[String]) -> Result<Vec<Method>, Failure> {
    list.iter()
        .map(|s| s.parse::<Method>().map_err(|e| Failure::Usage(format!("arguments: {e}"))))
        .collect()
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Data(format!("output: {e}")))
}

fn to_json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn fit_table(report: &FitReport) -> String {
    let mut s = format!("method     {}\nn, k       {}, {}\n", report.method, report.n, report.k);
    for (term, b) in report.terms.iter().zip(&report.coefficients) {
        s.push_str(&format!("{term:<10} {b:>14.6}\n"));
    }
    if let Some(sigma) = report.sigma {
        s.push_str(&format!("sigma      {sigma:>14.6}\n"));
    }
    if let Some(el) = &report.el {
        s.push_str(&format!("log-EL     {:>14.6}  (bound {:.6})\n", el.log_el, el.log_el_bound));
    }
    s.push_str(&format!("converged  {}\n", report.converged));
    s
}

fn fit_csv(report: &FitReport) -> String {
    let mut s = String::from("name,value\n");
    for (term, b) in report.terms.iter().zip(&report.coefficients) {
        s.push_str(&format!("{term},{b}\n"));
    }
    if let Some(sigma) = report.sigma {
        s.push_str(&format!("sigma,{sigma}\n"));
    }
    if let Some(el) = &report.el {
        s.push_str(&format!("log_el,{}\n", el.log_el));
    }
    s.push_str(&format!("converged,{}\n", report.converged));
    s
}

fn run_fit(cmd: Command) -> Result<(), Failure> {
    let Command::Fit { csv, method, sigma, tuning, seed, multistart, response, delimiter, no_header, no_intercept, out } = cmd
    else {
        unreachable!()
    };
    let method: Method = method.parse().map_err(|e| Failure::Usage(format!("arguments: {e}")))?;
    if !delimiter.is_ascii() {
        return Err(Failure::Usage("arguments: delimiter must be a single ASCII character".into()));
    }
    let mut src = TabularSource::path(csv);
    src.delimiter = delimiter as u8;
    src.has_header = !no_header;
    src.intercept = !no_intercept;
    src.response = match response {
        None => ResponseColumn::Last,
        Some(r) => match r.parse::<usize>() {
            Ok(i) => ResponseColumn::Index(i),
            Err(_) => ResponseColumn::Name(r),
        },
    };
    let data = read_dataset(&src).map_err(|e| Failure::at("read", e))?;
    let cfg = MethodConfig { tuning, sigma, el: ElOptions { seed, multistart, ..ElOptions::default() } };
    let report = methods::fit(method, &data, &cfg).map_err(|e| Failure::at("fit", e))?;
    emit(&match out {
        Output::Table => fit_table(&report),
        Output::Json => to_json(&serde_json::to_value(&report).expect("reports serialize")),
        Output::Csv => fit_csv(&report),
    })
}

fn simulate_table(reports: &[ScenarioReport]) -> String {
    let Some(first) = reports.first() else { return String::new() };
    let methods: Vec<Method> = first.estimators.iter().map(|s| s.method).collect();
    let mut s = format!("{:>4} {:>5} {:>6} {:<8}", "k", "n", "contam", "metric");
    for m in &methods {
        s.push_str(&format!(" {:>10}", m.label()));
    }
    s.push('\n');
    for r in reports {
        let rows: [(&str, Box<dyn Fn(Method) -> String>); 3] = [
            ("mse", Box::new(|m| r.mse_of(m).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()))),
            ("re", Box::new(|m| r.re_of(m).map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()))),
            ("failures", Box::new(|m| r.get(m).map(|s| s.failures.len().to_string()).unwrap_or_default())),
        ];
        for (metric, value) in rows {
            s.push_str(&format!(
                "{:>4} {:>5} {:>6} {:<8}",
                r.spec.k,
                r.spec.n,
                r.spec.error_model.contamination(),
                metric
            ));
            for m in &methods {
                s.push_str(&format!(" {:>10}", value(*m)));
            }
            s.push('\n');
        }
    }
    s
}

fn run_simulate(cmd: Command) -> Result<(), Failure> {
    let Command::Simulate {
        n,
        k,
        contam,
        reps,
        seed,
        estimators,
        redraw_beta,
        truth_mean,
        truth_variance,
        threads,
        out,
    } = cmd
    else {
        unreachable!()
    };
    if !(0.0..1.0).contains(&contam) {
        return Err(Failure::Usage(format!("arguments: --contam must be in [0, 1), got {contam}")));
    }
    let estimators = match estimators {
        Some(list) => parse_methods(&list)?,
        None => Method::SIMULATION.to_vec(),
    };
    let truth = if redraw_beta {
        Truth::PerReplication { mean: truth_mean, variance: truth_variance }
    } else {
        Truth::DrawOnce { mean: truth_mean, variance: truth_variance }
    };
    let mut reports = Vec::new();
    for &kk in &k {
        for &nn in &n {
            let spec = ScenarioSpec {
                n: nn,
                k: kk,
                error_model: ErrorModel::contaminated(contam),
                replications: reps,
                seed,
                estimators: estimators.clone(),
                truth: truth.clone(),
            };
            spec.validate().map_err(|e| Failure::Usage(format!("arguments: {e}")))?;
            let report = sim::run_scenario_with(&spec, &MethodConfig::default(), threads)
                .map_err(|e| Failure::at("simulate", e))?;
            eprintln!("k={kk} n={nn}: {:.2}s", report.runtime_seconds);
            reports.push(report);
        }
    }
    emit(&match out {
        Output::Table => simulate_table(&reports),
        Output::Json => to_json(&serde_json::json!({ "schema_version": 1, "scenarios": reports })),
        Output::Csv => {
            let mut buf = Vec::new();
            sim::write_csv(&reports, &mut buf).map_err(|e| Failure::at("output", e))?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
    })
}

const BELGIUM_ORDER: [Method; 4] = [Method::El, Method::ElTukey, Method::ElHuber, Method::Ols];

fn run_belgium(cmd: Command) -> Result<(), Failure> {
    let Command::Belgium { method, tuning, seed, out } = cmd else { unreachable!() };
    let methods = match method {
        Some(list) => parse_methods(&list)?,
        None => BELGIUM_ORDER.to_vec(),
    };
    let data = belgium_dataset();
    let cfg = MethodConfig { tuning, sigma: None, el: ElOptions { seed, ..ElOptions::default() } };
    let reports = methods
        .iter()
        .map(|m| methods::fit(*m, &data, &cfg).map_err(|e| Failure::at(&format!("fit {m}"), e)))
        .collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<&str> = methods.iter().map(|m| m.label()).collect();
    emit(&match out {
        Output::Json => to_json(&serde_json::json!({ "schema_version": 1, "dataset": "belgium", "fits": reports })),
        Output::Csv => {
            let mut s = format!("term,{}\n", labels.join(","));
            for (j, term) in data.names().iter().enumerate() {
                let vals: Vec<String> = reports.iter().map(|r| r.coefficients[j].to_string()).collect();
                s.push_str(&format!("{term},{}\n", vals.join(",")));
            }
            s
        }
        Output::Table => {
            let mut s = format!("{:<10}", "");
            for l in &labels {
                s.push_str(&format!(" {l:>10}"));
            }
            s.push('\n');
            for (j, term) in ["beta0", "beta1"].iter().enumerate() {
                s.push_str(&format!("{term:<10}"));
                for r in &reports {
                    s.push_str(&format!(" {:>10.4}", r.coefficients[j]));
                }
                s.push('\n');
            }
            s
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        cmd @ Command::Fit { .. } => run_fit(cmd),
        cmd @ Command::Simulate { .. } => run_simulate(cmd),
        cmd @ Command::Belgium { .. } => run_belgium(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
