//! Benchmark suites: precision, scalability and baseline studies over
//! synthetic grids, emitting one CSV row per (configuration, seed,
//! algorithm).
//!
//! `--scale` shrinks the grids: cluster counts and per-cluster sizes are
//! multiplied by the factor (with small floors), and swept axes (T, m, K
//! ranges) are subsampled. Scale 1 reproduces the full grids.

use std::time::Instant;

use varclust::cmvar::{self, CmvarConfig, CmvarInit};
use varclust::datagen::{generate_dataset, DatasetSpec, GeneratedDataset};
use varclust::error::{Error, Result};
use varclust::io::BenchRow;
use varclust::klmvar::{self, KlmvarConfig, KlmvarInit};
use varclust::metrics::{nmi, rand_index, LabelVector};
use varclust::twostep::naive_two_step;
use varclust::varfit::QrCache;

use crate::BenchmarkArgs;

#[derive(Debug, Clone, Copy)]
struct SuiteConfig {
    m: usize,
    p: usize,
    t_len: usize,
    k: usize,
    n_per_cluster: usize,
}

fn scaled(base: usize, scale: f64, floor: usize) -> usize {
    ((base as f64 * scale).round() as usize).max(floor)
}

/// Subsampling stride for swept axes; scale 1 keeps every point.
fn stride(scale: f64) -> usize {
    ((1.0 / (2.0 * scale)).round() as usize).max(1)
}

fn subsample<T: Copy>(values: &[T], scale: f64) -> Vec<T> {
    values.iter().copied().step_by(stride(scale)).collect()
}

fn suite_configs(suite: &str, scale: f64) -> Result<(Vec<SuiteConfig>, Vec<&'static str>)> {
    let configs = match suite {
        // Clustering precision across variable dimensions.
        "precision" => [3usize, 6, 9]
            .iter()
            .map(|&m| SuiteConfig {
                m,
                p: 5,
                t_len: 100,
                k: scaled(8, scale, 2),
                n_per_cluster: scaled(40, scale, 4),
            })
            .collect(),
        // Increasing number of clusters.
        "scale-K" => {
            let k_max = scaled(84, scale, 6);
            let ks: Vec<usize> = (2..=k_max).step_by(2).collect();
            subsample(&ks, scale)
                .into_iter()
                .map(|k| SuiteConfig {
                    m: 6,
                    p: 5,
                    t_len: 100,
                    k,
                    n_per_cluster: scaled(50, scale, 4),
                })
                .collect()
        }
        // Increasing series length.
        "scale-T" => {
            let ts: Vec<usize> = (50..=1200).step_by(50).collect();
            subsample(&ts, scale)
                .into_iter()
                .map(|t_len| SuiteConfig {
                    m: 2,
                    p: 5,
                    t_len,
                    k: 5,
                    n_per_cluster: scaled(20, scale, 4),
                })
                .collect()
        }
        // Increasing variable dimension.
        "scale-m" => {
            let ms: Vec<usize> = (2..=20).collect();
            subsample(&ms, scale)
                .into_iter()
                .map(|m| SuiteConfig {
                    m,
                    p: 5,
                    t_len: 150,
                    k: 5,
                    n_per_cluster: scaled(20, scale, 4),
                })
                .collect()
        }
        // The two-step baseline as T grows.
        "twostep-T" => {
            let ts: Vec<usize> = (100..=1500).step_by(200).collect();
            subsample(&ts, scale)
                .into_iter()
                .map(|t_len| SuiteConfig {
                    m: 3,
                    p: 5,
                    t_len,
                    k: scaled(8, scale, 2),
                    n_per_cluster: scaled(40, scale, 4),
                })
                .collect()
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown suite `{other}` (expected precision, scale-K, scale-T, scale-m or twostep-T)"
            )))
        }
    };
    let default_algos = match suite {
        "precision" => vec!["klmvar", "cmvar", "naive2step"],
        "twostep-T" => vec!["naive2step"],
        _ => vec!["klmvar", "cmvar"],
    };
    Ok((configs, default_algos))
}

struct RunOutcome {
    ri: Option<f64>,
    nmi: Option<f64>,
    seconds: f64,
    failed: bool,
}

fn score(gen: &GeneratedDataset, labels: &[usize]) -> (Option<f64>, Option<f64>) {
    let truth = LabelVector::from_zero_based(&gen.truth).expect("labels valid");
    let pred = LabelVector::from_zero_based(labels).expect("labels valid");
    (
        rand_index(&truth, &pred).ok(),
        nmi(&truth, &pred).ok(),
    )
}

fn run_algo(algo: &str, gen: &GeneratedDataset, seed: u64, restarts: usize) -> Result<RunOutcome> {
    let k = gen.spec.k;
    let orders = vec![gen.spec.p; k];
    let cache = QrCache::build(&gen.data, &orders, gen.spec.p)?;
    let start = Instant::now();
    match algo {
        "klmvar" => {
            let config = KlmvarConfig {
                seed,
                ..KlmvarConfig::default()
            };
            match klmvar::fit_klmvar_restarts(&gen.data, &orders, &config, restarts, &cache) {
                Ok(res) => {
                    let (ri, nmi) = score(gen, &res.labels);
                    Ok(RunOutcome {
                        ri,
                        nmi,
                        seconds: start.elapsed().as_secs_f64(),
                        failed: false,
                    })
                }
                Err(_) => Ok(RunOutcome {
                    ri: None,
                    nmi: None,
                    seconds: start.elapsed().as_secs_f64(),
                    failed: true,
                }),
            }
        }
        "cmvar" => {
            let init = klmvar::initialize(
                &gen.data,
                &orders,
                &KlmvarInit::NaiveTwoStep,
                seed,
                &cache,
            );
            let outcome = init.and_then(|comps| {
                let config = CmvarConfig {
                    seed,
                    init: CmvarInit::FromComponents(comps),
                    ..CmvarConfig::default()
                };
                cmvar::fit_cmvar_restarts(&gen.data, &orders, &config, restarts, &cache)
            });
            match outcome {
                Ok(res) => {
                    let (ri, nmi) = score(gen, &res.labels);
                    Ok(RunOutcome {
                        ri,
                        nmi,
                        seconds: start.elapsed().as_secs_f64(),
                        // A plain-formula implementation dies exactly
                        // where every row is one-hot from the first E-step.
                        failed: res.underflow_dominated,
                    })
                }
                Err(_) => Ok(RunOutcome {
                    ri: None,
                    nmi: None,
                    seconds: start.elapsed().as_secs_f64(),
                    failed: true,
                }),
            }
        }
        "naive2step" => match naive_two_step(&gen.data, k, gen.spec.p, seed, &cache) {
            Ok(res) => {
                let (ri, nmi) = score(gen, &res.labels);
                Ok(RunOutcome {
                    ri,
                    nmi,
                    seconds: start.elapsed().as_secs_f64(),
                    failed: false,
                })
            }
            Err(_) => Ok(RunOutcome {
                ri: None,
                nmi: None,
                seconds: start.elapsed().as_secs_f64(),
                failed: true,
            }),
        },
        other => Err(Error::InvalidArgument(format!(
            "unknown algorithm `{other}` in --algos"
        ))),
    }
}

pub fn run_suite(args: &BenchmarkArgs) -> Result<Vec<BenchRow>> {
    if args.scale <= 0.0 || args.scale > 1.0 {
        return Err(Error::InvalidArgument("--scale must lie in (0, 1]".into()));
    }
    if args.seeds == 0 {
        return Err(Error::InvalidArgument("--seeds must be at least 1".into()));
    }
    let (configs, default_algos) = suite_configs(&args.suite, args.scale)?;
    let algos: Vec<String> = match &args.algos {
        Some(list) => list.clone(),
        None => default_algos.into_iter().map(String::from).collect(),
    };

    let mut rows = Vec::new();
    for (cfg_idx, cfg) in configs.iter().enumerate() {
        for rep in 0..args.seeds {
            let data_seed = args
                .seed
                .wrapping_add(1000 * cfg_idx as u64)
                .wrapping_add(rep as u64);
            let spec = DatasetSpec::new(cfg.m, cfg.p, cfg.t_len, cfg.k, cfg.n_per_cluster, data_seed);
            let gen = generate_dataset(&spec)?;
            for algo in &algos {
                let out = run_algo(algo, &gen, data_seed, args.restarts)?;
                eprintln!(
                    "[{}] m={} p={} T={} K={} Nc={} seed={} {}: nmi={} {:.2}s{}",
                    args.suite,
                    cfg.m,
                    cfg.p,
                    cfg.t_len,
                    cfg.k,
                    cfg.n_per_cluster,
                    data_seed,
                    algo,
                    out.nmi.map(|v| format!("{v:.3}")).unwrap_or_else(|| "-".into()),
                    out.seconds,
                    if out.failed { " FAILED" } else { "" }
                );
                rows.push(BenchRow {
                    suite: args.suite.clone(),
                    algo: algo.clone(),
                    m: cfg.m,
                    p: cfg.p,
                    t_len: cfg.t_len,
                    k: cfg.k,
                    n_per_cluster: cfg.n_per_cluster,
                    seed: data_seed,
                    ri: out.ri,
                    nmi: out.nmi,
                    seconds: out.seconds,
                    failed: out.failed,
                });
            }
        }
    }
    Ok(rows)
}
