//! Implementations of the five subcommands.

use std::path::{Path, PathBuf};
use std::time::Instant;

use varclust::cmvar::{self, CmvarConfig, CmvarInit};
use varclust::datagen::{generate_dataset, DatasetSpec};
use varclust::error::{Error, Result};
use varclust::io;
use varclust::klmvar::{self, KlmvarConfig, KlmvarInit};
use varclust::metrics::{nmi_detailed, rand_index, LabelVector};
use varclust::modelsel::{self, Algorithm, SweepConfig};
use varclust::twostep::naive_two_step;
use varclust::types::TimeSeriesSet;
use varclust::varfit::QrCache;

use crate::config::{parse_candidates, FileConfig};
use crate::{
    bench, BenchmarkArgs, ClusterArgs, EvaluateArgs, GenerateArgs, SelectArgs, EXIT_IO,
    EXIT_NO_CONVERGENCE, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE,
};

pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format(_) => EXIT_IO,
        Error::InvalidArgument(_)
        | Error::RangeError(_)
        | Error::DimensionMismatch { .. }
        | Error::InsufficientData { .. } => EXIT_USAGE,
        Error::NumericFailure { .. }
        | Error::InvalidCovariance(_)
        | Error::SimulationFailure(_)
        | Error::FitFailure(_)
        | Error::InitFailure(_)
        | Error::DegenerateCluster { .. } => EXIT_NUMERIC,
    }
}

/// Accepts either a dataset CSV or a directory containing dataset.csv.
fn resolve_dataset(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("dataset.csv")
    } else {
        path.to_path_buf()
    }
}

fn load_dataset(path: &Path) -> Result<TimeSeriesSet> {
    io::read_dataset_csv(&resolve_dataset(path))
}

pub fn run_generate(args: &GenerateArgs) -> Result<u8> {
    let spec = DatasetSpec {
        burn_in: args.burn_in,
        root_min_abs: args.root_min,
        root_max_abs: args.root_max,
        ..DatasetSpec::new(args.m, args.p, args.t_len, args.k, args.n_per_cluster, args.seed)
    };
    let gen = generate_dataset(&spec)?;
    std::fs::create_dir_all(&args.out)?;
    let data_path = args.out.join("dataset.csv");
    let truth_path = args.out.join("truth.json");
    io::write_dataset_csv(&data_path, &gen.data)?;
    io::write_truth_json(&truth_path, &gen)?;
    println!(
        "generated {} series (K={}, Nc={}, m={}, p={}, T={}, seed={})",
        gen.data.n_series(),
        spec.k,
        spec.n_per_cluster,
        spec.m,
        spec.p,
        spec.t_len,
        spec.seed
    );
    println!("dataset: {}", data_path.display());
    println!("truth:   {}", truth_path.display());
    Ok(EXIT_OK)
}

struct ClusterSettings {
    algo: String,
    orders: Vec<usize>,
    p_max: usize,
    tol: f64,
    max_iters: usize,
    seed: u64,
    restarts: usize,
    init: String,
    unnormalized: bool,
}

fn resolve_cluster_settings(args: &ClusterArgs) -> Result<ClusterSettings> {
    let file = FileConfig::load(args.config.as_deref())?;
    let algo = args
        .algo
        .clone()
        .or(file.algo)
        .unwrap_or_else(|| "klmvar".to_string());
    if !matches!(algo.as_str(), "klmvar" | "cmvar" | "naive2step") {
        return Err(Error::InvalidArgument(format!(
            "unknown algorithm `{algo}` (expected cmvar, klmvar or naive2step)"
        )));
    }
    let k = args
        .k
        .or(file.k)
        .ok_or_else(|| Error::InvalidArgument("--K is required".into()))?;
    if k == 0 {
        return Err(Error::InvalidArgument("K must be at least 1".into()));
    }
    let orders = match args.orders.clone().or(file.orders) {
        Some(orders) => {
            if orders.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "--orders lists {} values for K={k}",
                    orders.len()
                )));
            }
            orders
        }
        None => {
            let p = args
                .p
                .or(file.p)
                .ok_or_else(|| Error::InvalidArgument("--p or --orders is required".into()))?;
            vec![p; k]
        }
    };
    if orders.iter().any(|&p| p == 0) {
        return Err(Error::InvalidArgument("orders must be at least 1".into()));
    }
    let max_order = *orders.iter().max().expect("K >= 1");
    let p_max = args.p_max.or(file.p_max).unwrap_or(max_order);
    if p_max < max_order {
        return Err(Error::InvalidArgument(format!(
            "--p-max {p_max} below the largest order {max_order}"
        )));
    }
    let init = args
        .init
        .clone()
        .or(file.init)
        .unwrap_or_else(|| "2step".to_string());
    if !matches!(init.as_str(), "2step" | "random") {
        return Err(Error::InvalidArgument(format!(
            "unknown init `{init}` (expected 2step or random)"
        )));
    }
    Ok(ClusterSettings {
        algo,
        orders,
        p_max,
        tol: args.tol.or(file.tol).unwrap_or(1e-8),
        max_iters: args.max_iters.or(file.max_iters).unwrap_or(500),
        seed: args.seed.or(file.seed).unwrap_or(0),
        restarts: args.restarts.or(file.restarts).unwrap_or(3),
        init,
        unnormalized: args.unnormalized || file.unnormalized.unwrap_or(false),
    })
}

pub fn run_cluster(args: &ClusterArgs) -> Result<u8> {
    let s = resolve_cluster_settings(args)?;
    let data = load_dataset(&args.data)?;
    std::fs::create_dir_all(&args.out)?;
    let cache = QrCache::build(&data, &s.orders, s.p_max)?;
    let ids: Vec<&str> = data.series().iter().map(|x| x.id()).collect();
    let k = s.orders.len();
    let started = Instant::now();

    let (result_file, labels, exit) = match s.algo.as_str() {
        "klmvar" => {
            let config = KlmvarConfig {
                max_iters: s.max_iters,
                tol: s.tol,
                seed: s.seed,
                init: match s.init.as_str() {
                    "random" => KlmvarInit::RandomLabels,
                    _ => KlmvarInit::NaiveTwoStep,
                },
                unnormalized: s.unnormalized,
                ..KlmvarConfig::default()
            };
            let res = klmvar::fit_klmvar_restarts(&data, &s.orders, &config, s.restarts, &cache)?;
            let seconds = started.elapsed().as_secs_f64();
            let exit = if res.converged { EXIT_OK } else { EXIT_NO_CONVERGENCE };
            println!(
                "klmvar: K={k} iterations={} converged={} objective={:.6} ({:.2}s)",
                res.iterations, res.converged, res.objective, seconds
            );
            let file = io::ResultFile {
                algorithm: "klmvar".into(),
                k,
                orders: s.orders.clone(),
                p_max: s.p_max,
                seed: s.seed,
                converged: res.converged,
                iterations: res.iterations,
                labels: label_pairs(&ids, &res.labels),
                weights: None,
                components: Some(res.params.components().iter().map(Into::into).collect()),
                normalized_covariances: Some(
                    res.normalized_covariances
                        .iter()
                        .map(|m| (0..m.nrows())
                            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                            .collect())
                        .collect(),
                ),
                log_likelihood: None,
                log_likelihood_trace: None,
                objective: Some(res.objective),
                objective_trace: Some(res.objective_trace.clone()),
                cluster_sizes: Some(res.cluster_sizes.clone()),
                underflow_events: None,
                underflow_dominated: None,
                degenerate_init: None,
                flags: Some(res.component_flags.iter().map(Into::into).collect()),
                seconds,
            };
            (file, res.labels, exit)
        }
        "cmvar" => {
            let init = match s.init.as_str() {
                "random" => CmvarInit::RandomResponsibilities,
                _ => CmvarInit::FromComponents(klmvar::initialize(
                    &data,
                    &s.orders,
                    &KlmvarInit::NaiveTwoStep,
                    s.seed,
                    &cache,
                )?),
            };
            let config = CmvarConfig {
                max_iters: s.max_iters,
                tol: s.tol,
                seed: s.seed,
                init,
            };
            let res = cmvar::fit_cmvar_restarts(&data, &s.orders, &config, s.restarts, &cache)?;
            let seconds = started.elapsed().as_secs_f64();
            let exit = if res.underflow_dominated {
                eprintln!(
                    "warning: every responsibility row underflowed at the first E-step \
                     ({} events total); the plain-formula algorithm would have failed here",
                    res.underflow_events
                );
                EXIT_NUMERIC
            } else if !res.converged {
                EXIT_NO_CONVERGENCE
            } else {
                EXIT_OK
            };
            println!(
                "cmvar: K={k} iterations={} converged={} logL={:.6} underflow_events={} ({:.2}s)",
                res.iterations,
                res.converged,
                res.log_likelihood,
                res.underflow_events,
                seconds
            );
            let file = io::ResultFile {
                algorithm: "cmvar".into(),
                k,
                orders: s.orders.clone(),
                p_max: s.p_max,
                seed: s.seed,
                converged: res.converged,
                iterations: res.iterations,
                labels: label_pairs(&ids, &res.labels),
                weights: res.params.weights().map(|w| w.iter().copied().collect()),
                components: Some(res.params.components().iter().map(Into::into).collect()),
                normalized_covariances: None,
                log_likelihood: Some(res.log_likelihood),
                log_likelihood_trace: Some(res.log_likelihood_trace.clone()),
                objective: None,
                objective_trace: None,
                cluster_sizes: None,
                underflow_events: Some(res.underflow_events),
                underflow_dominated: Some(res.underflow_dominated),
                degenerate_init: Some(res.degenerate_init),
                flags: Some(res.component_flags.iter().map(Into::into).collect()),
                seconds,
            };
            (file, res.labels, exit)
        }
        "naive2step" => {
            let order = *s.orders.iter().max().expect("K >= 1");
            let res = naive_two_step(&data, k, order, s.seed, &cache)?;
            let seconds = started.elapsed().as_secs_f64();
            println!("naive2step: K={k} p={order} ({seconds:.2}s)");
            let file = io::ResultFile {
                algorithm: "naive2step".into(),
                k,
                orders: vec![order; k],
                p_max: s.p_max,
                seed: s.seed,
                converged: true,
                iterations: 1,
                labels: label_pairs(&ids, &res.labels),
                weights: None,
                components: None,
                normalized_covariances: None,
                log_likelihood: None,
                log_likelihood_trace: None,
                objective: None,
                objective_trace: None,
                cluster_sizes: None,
                underflow_events: None,
                underflow_dominated: None,
                degenerate_init: None,
                flags: None,
                seconds,
            };
            (file, res.labels, EXIT_OK)
        }
        _ => unreachable!("algorithm validated in settings"),
    };

    io::write_json(&args.out.join("result.json"), &result_file)?;
    io::write_labels_csv(&args.out.join("labels.csv"), &ids, &labels)?;
    println!("results: {}", args.out.join("result.json").display());
    Ok(exit)
}

pub fn run_select(args: &SelectArgs) -> Result<u8> {
    let file = FileConfig::load(args.config.as_deref())?;
    let k_candidates = parse_candidates(&args.k)?;
    let p_candidates = parse_candidates(&args.p)?;
    let gamma = args.gamma.or(file.gamma).unwrap_or(0.5);
    let algo = match args
        .algo
        .clone()
        .or(file.algo)
        .unwrap_or_else(|| "klmvar".into())
        .as_str()
    {
        "klmvar" => Algorithm::Klmvar,
        "cmvar" => Algorithm::Cmvar,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown algorithm `{other}` (expected cmvar or klmvar)"
            )))
        }
    };
    let cfg = SweepConfig {
        seed: args.seed.or(file.seed).unwrap_or(0),
        restarts: args.restarts.or(file.restarts).unwrap_or(3),
        tol: args.tol.or(file.tol).unwrap_or(1e-8),
        max_iters: args.max_iters.or(file.max_iters).unwrap_or(500),
    };
    let data = load_dataset(&args.data)?;

    let method = args
        .method
        .clone()
        .or(file.method)
        .unwrap_or_else(|| "grid".into());
    match method.as_str() {
        "grid" => {
            let grid = modelsel::bic_surface(&data, &k_candidates, &p_candidates, gamma, algo, &cfg)?;
            let out = if args.out.is_dir() || args.out.extension().is_none() {
                std::fs::create_dir_all(&args.out)?;
                args.out.join("grid.csv")
            } else {
                args.out.clone()
            };
            io::write_grid_csv(&out, &grid)?;
            println!("best K={} p={}", grid.best.0, grid.best.1);
            println!("grid: {}", out.display());
        }
        "adhoc" => {
            let (k, p) = modelsel::adhoc_select(&data, &k_candidates, &p_candidates, algo, &cfg)?;
            println!("best K={k} p={p}");
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected grid or adhoc)"
            )))
        }
    }
    Ok(EXIT_OK)
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<u8> {
    let truth = io::read_labels_any(&args.truth)?;
    let pred = io::read_labels_csv(&args.labels)?;
    let (t, p) = io::align_labels(&truth, &pred).map_err(|e| match e {
        // Mismatched id sets are a usage error per the exit-code contract.
        Error::Format(msg) => Error::InvalidArgument(msg),
        other => other,
    })?;
    let t = LabelVector::new(t)?;
    let p = LabelVector::new(p)?;
    let ri = rand_index(&t, &p)?;
    let nmi = nmi_detailed(&t, &p)?;
    println!("RI  = {ri:.6}");
    println!("NMI = {:.6}{}", nmi.value, if nmi.degenerate { " (degenerate: single cluster)" } else { "" });
    if let Some(out) = &args.out {
        io::write_json(out, &io::MetricsFile::new(t.len(), ri, nmi))?;
        println!("metrics: {}", out.display());
    }
    Ok(EXIT_OK)
}

pub fn run_benchmark(args: &BenchmarkArgs) -> Result<u8> {
    let rows = bench::run_suite(args)?;
    io::append_benchmark_rows(&args.out, &rows)?;
    let failures = rows.iter().filter(|r| r.failed).count();
    println!(
        "{}: {} runs appended to {} ({} failed)",
        args.suite,
        rows.len(),
        args.out.display(),
        failures
    );
    Ok(EXIT_OK)
}

fn label_pairs(ids: &[&str], labels: &[usize]) -> Vec<io::LabeledSeries> {
    ids.iter()
        .zip(labels)
        .map(|(id, &l)| io::LabeledSeries {
            series_id: id.to_string(),
            label: l + 1,
        })
        .collect()
}
