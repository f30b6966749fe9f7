use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use groupsparse::css::{css_select, projection_residual, CssInstance, CssLoss};
use groupsparse::io::{read_matrix, to_report_json, to_report_json_exact, write_matrix_csv, InstanceFile};
use groupsparse::selection::{
    select as run_select, Algorithm, SelectParams, SelectionConfig, SelectionTrace,
};
use groupsparse::verify::{certify, Claim, Family, Instance};
use serde::Serialize;
use serde_json::json;

use crate::manifest::RunManifest;
use crate::{
    AlgorithmArgs, BenchArgs, CssArgs, Failure, GenArgs, GenFamily, LossArg, SelectArgs, VerifyArgs,
};

#[derive(Serialize)]
struct SelectReport<'a> {
    algorithm: Algorithm,
    k: usize,
    k_prime: usize,
    selected: Option<Vec<usize>>,
    value: Option<f64>,
    beta: Option<Vec<f64>>,
    error: Option<String>,
    trace: &'a SelectionTrace,
}

#[derive(Serialize)]
struct CssReport<'a> {
    algorithm: Algorithm,
    k: usize,
    loss: CssLoss,
    ridge: f64,
    columns: Option<Vec<usize>>,
    value: Option<f64>,
    projection_residual: Option<f64>,
    error: Option<String>,
    trace: &'a SelectionTrace,
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn params(a: &AlgorithmArgs) -> SelectParams {
    SelectParams {
        algorithm: a.algorithm,
        k: a.k,
        k_prime: a.k_prime.unwrap_or(a.k),
        rounds: a.rounds,
        delta: a.delta,
    }
}

fn config_json(cfg: &SelectionConfig, p: &SelectParams) -> serde_json::Value {
    json!({ "selection": cfg, "params": p })
}

/// Writes the trace files and the report, then the manifest.
fn finish_run(
    out: &Path,
    report: &str,
    trace: &SelectionTrace,
    mut manifest: RunManifest,
) -> Result<(), Failure> {
    let report_path = out.join("report.json");
    let jsonl_path = out.join("trace.jsonl");
    let csv_path = out.join("summary.csv");
    write(&report_path, report)?;
    trace.write_jsonl(BufWriter::new(File::create(&jsonl_path)?))?;
    trace.write_csv(BufWriter::new(File::create(&csv_path)?))?;
    manifest.outputs = vec![report_path, jsonl_path, csv_path];
    manifest.finish(&out.join("manifest.json"))?;
    Ok(())
}

pub fn gen(a: &GenArgs) -> Result<(), Failure> {
    let family = match a.family {
        GenFamily::RidgeQuadratic => Family::RidgeQuadratic,
        GenFamily::Logistic => Family::Logistic,
        GenFamily::Quadratic => Family::Quadratic { t: a.t },
        GenFamily::NearIsotropic => Family::NearIsotropic { t: a.t, spread: a.spread },
        GenFamily::Isotropic => Family::Isotropic { t: a.t },
        GenFamily::Css => Family::Css { n: a.rows, d: a.cols, loss: CssLoss::Frobenius, ridge: 0.0 },
    };
    if matches!(a.family, GenFamily::Quadratic | GenFamily::NearIsotropic | GenFamily::Isotropic) && a.t == 0
    {
        return Err(Failure::Input("--t must be at least 1".into()));
    }
    if matches!(a.family, GenFamily::Css) && (a.rows == 0 || a.cols == 0) {
        return Err(Failure::Input("--rows and --cols must be at least 1".into()));
    }
    match family.generate(a.common.seed) {
        Instance::Objective(file) => file.save(&a.out)?,
        Instance::Css { x, .. } => {
            if a.out.extension().is_some_and(|e| e == "json") {
                write(&a.out, &to_report_json_exact(&x)?)?;
            } else {
                write_matrix_csv(&x.to_matrix()?, BufWriter::new(File::create(&a.out)?))?;
            }
        }
    }
    Ok(())
}

pub fn select(a: &SelectArgs, argv: &[String]) -> Result<(), Failure> {
    let cfg = a.common.selection_config()?;
    let p = params(&a.algorithm);
    let (obj, partition) = InstanceFile::load(&a.instance)?.build()?;
    fs::create_dir_all(&a.out)?;
    let mut manifest = RunManifest::start("select", argv, config_json(&cfg, &p), cfg.seed);
    manifest.input(&a.instance)?;

    let outcome = run_select(&*obj, &partition, &p, &cfg);
    let (report, trace, failure) = match &outcome {
        Ok(out) => (
            SelectReport {
                algorithm: p.algorithm,
                k: p.k,
                k_prime: p.k_prime,
                selected: Some(out.selected.clone()),
                value: Some(out.value),
                beta: Some(out.beta.values().iter().copied().collect()),
                error: None,
                trace: &out.trace,
            },
            &out.trace,
            None,
        ),
        Err(f) => (
            SelectReport {
                algorithm: p.algorithm,
                k: p.k,
                k_prime: p.k_prime,
                selected: None,
                value: None,
                beta: None,
                error: Some(f.to_string()),
                trace: &f.trace,
            },
            &f.trace,
            Some(f),
        ),
    };
    finish_run(&a.out, &to_report_json(&report)?, trace, manifest)?;
    match failure {
        Some(f) if f.error.is_input_error() => Err(Failure::Input(f.to_string())),
        Some(f) => Err(Failure::Solver(f.to_string())),
        None => Ok(()),
    }
}

pub fn css(a: &CssArgs, argv: &[String]) -> Result<(), Failure> {
    let cfg = a.common.selection_config()?;
    let p = params(&a.algorithm);
    let loss = match a.loss {
        LossArg::Frobenius => CssLoss::Frobenius,
        LossArg::PseudoHuber => CssLoss::PseudoHuber { delta: a.huber_delta },
    };
    let x = read_matrix(&a.matrix)?;
    let inst = CssInstance::new(x.clone(), loss, a.ridge, p.k)?;
    fs::create_dir_all(&a.out)?;
    let mut manifest = RunManifest::start("css", argv, config_json(&cfg, &p), cfg.seed);
    manifest.input(&a.matrix)?;

    let outcome = css_select(&inst, &p, &cfg);
    let (report, trace, failure) = match &outcome {
        Ok(r) => {
            let residual = match loss {
                CssLoss::Frobenius => Some(projection_residual(&x, &r.columns)?),
                CssLoss::PseudoHuber { .. } => None,
            };
            (
                CssReport {
                    algorithm: p.algorithm,
                    k: p.k,
                    loss,
                    ridge: a.ridge,
                    columns: Some(r.columns.clone()),
                    value: Some(r.value),
                    projection_residual: residual,
                    error: None,
                    trace: &r.trace,
                },
                &r.trace,
                None,
            )
        }
        Err(f) => (
            CssReport {
                algorithm: p.algorithm,
                k: p.k,
                loss,
                ridge: a.ridge,
                columns: None,
                value: None,
                projection_residual: None,
                error: Some(f.to_string()),
                trace: &f.trace,
            },
            &f.trace,
            Some(f),
        ),
    };
    finish_run(&a.out, &to_report_json(&report)?, trace, manifest)?;
    match failure {
        Some(f) if f.error.is_input_error() => Err(Failure::Input(f.to_string())),
        Some(f) => Err(Failure::Solver(f.to_string())),
        None => Ok(()),
    }
}

fn default_trials(claim: Claim) -> usize {
    match claim {
        Claim::Equivalence => 100,
        Claim::Omp | Claim::Attention => 50,
        Claim::Ompr | Claim::Css => 25,
    }
}

pub fn verify(a: &VerifyArgs, argv: &[String]) -> Result<(), Failure> {
    let cfg = a.common.selection_config()?;
    let trials = a.trials.unwrap_or_else(|| default_trials(a.claim));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(Failure::Input("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Failure::Input(e.to_string()))?;
    let manifest = RunManifest::start(
        "verify",
        argv,
        json!({ "selection": cfg, "claim": a.claim, "trials": trials }),
        cfg.seed,
    );
    let report = pool.install(|| certify(a.claim, trials, cfg.seed, &cfg));
    let text = to_report_json(&report)?;
    match &a.out {
        Some(path) => {
            write(path, &text)?;
            let mut manifest = manifest;
            manifest.outputs = vec![path.clone()];
            manifest.finish(&manifest_path(path))?;
        }
        None => print!("{text}"),
    }
    eprintln!("{}: {}/{} trials passed", report.claim, report.passes, report.instances);
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::ClaimFailed)
    }
}

fn manifest_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    report.with_file_name(format!("{stem}.manifest.json"))
}

pub fn bench(a: &BenchArgs) -> Result<(), Failure> {
    let cfg = a.common.selection_config()?;
    let (obj, p) = InstanceFile::load(&a.instance)?.build()?;
    if a.repeats == 0 {
        return Err(Failure::Input("--repeats must be at least 1".into()));
    }
    let mut text = String::from("algorithm,k,repeats,median_ms,value\n");
    for algorithm in [Algorithm::Omp, Algorithm::Ompr, Algorithm::SeqLasso, Algorithm::SeqAttention] {
        let sp = SelectParams {
            algorithm,
            k: a.k,
            k_prime: a.k,
            rounds: 10,
            delta: groupsparse::selection::DEFAULT_DELTA,
        };
        let mut times = Vec::with_capacity(a.repeats);
        let mut value = f64::NAN;
        for _ in 0..a.repeats {
            let start = Instant::now();
            let out = run_select(&*obj, &p, &sp, &cfg).map_err(|f| Failure::from(f.error))?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            value = out.value;
        }
        times.sort_by(f64::total_cmp);
        let name = serde_json::to_value(algorithm).map_err(groupsparse::Error::from)?;
        text.push_str(&format!(
            "{},{},{},{:.3},{}\n",
            name.as_str().unwrap_or_default(),
            a.k,
            a.repeats,
            times[times.len() / 2],
            groupsparse::io::format_sig(value)
        ));
    }
    match &a.out {
        Some(path) => write(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
