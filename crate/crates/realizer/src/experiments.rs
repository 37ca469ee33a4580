//! Monte Carlo harness: seeded paired trials over noisy Markov data, with
//! per-trial RNG streams so results do not depend on thread count.

use crate::error::{RealizeError, Result};
use crate::estimators::{
    kung_realize, ols_realize, tls_realize, wls_realize, Method, WlsConfig, WlsInit,
};
use crate::hankel::build_hankel;
use crate::matrix::Matrix;
use crate::model::{fit, markov, system_one, system_two, MarkovSequence, StateSpaceModel};
use crate::random::{random_stable_system, stream_rng};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Budget of (system, noise) draws per accepted trial under rejection
/// sampling on the kappa window.
const KAPPA_REJECTION_BUDGET: usize = 200_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemSource {
    /// Fixed systems, used round-robin over trials.
    Explicit(Vec<StateSpaceModel>),
    /// Fresh random minimal system per trial.
    Generator { nx: usize, rho_min: f64, rho_max: f64 },
}

impl SystemSource {
    pub fn order(&self) -> usize {
        match self {
            SystemSource::Explicit(models) => models.iter().map(|m| m.order()).max().unwrap_or(0),
            SystemSource::Generator { nx, .. } => *nx,
        }
    }
}

/// One experiment group: a source of systems, a noise level, the methods to
/// compare and an optional acceptance window on the noisy ratio kappa.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub label: String,
    pub source: SystemSource,
    pub n: usize,
    pub noise_std: f64,
    pub trials: usize,
    pub methods: Vec<Method>,
    #[serde(default = "default_fit_horizon")]
    pub fit_horizon: usize,
    #[serde(default)]
    pub kappa_window: Option<(f64, f64)>,
    #[serde(default)]
    pub seed: u64,
    /// Scatter/win-rate pair (x, y): the paper's bisector plots.
    pub scatter: (Method, Method),
    #[serde(default)]
    pub wls_init: WlsInit,
}

fn default_fit_horizon() -> usize {
    crate::model::DEFAULT_FIT_HORIZON
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodOutcome {
    pub method: Method,
    pub fit: Option<f64>,
    pub a_hat: Option<Vec<f64>>,
    pub converged: bool,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub system_id: String,
    pub kappa: f64,
    pub delta: f64,
    pub outcomes: Vec<MethodOutcome>,
}

#[derive(Clone, Debug, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub mean_fit: Option<f64>,
    pub median_fit: Option<f64>,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairWinRate {
    pub x: Method,
    pub y: Method,
    /// Fraction of paired trials where y strictly beats x on FIT.
    pub y_win_rate: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub trials: usize,
    pub methods: Vec<MethodSummary>,
    pub pairs: Vec<PairWinRate>,
    /// Win rate for the configured scatter pair.
    pub scatter_win_rate: f64,
    pub mean_kappa: Option<f64>,
    pub mean_delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentOutput {
    pub config_label: String,
    pub scatter: (Method, Method),
    pub records: Vec<TrialRecord>,
    pub summary: GroupSummary,
}

/// Deterministic per-group salt so groups sharing a master seed get
/// independent streams.
fn label_salt(label: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn run_methods(
    cfg: &ExperimentConfig,
    system: &StateSpaceModel,
    g: &MarkovSequence,
) -> Result<(f64, f64, Vec<MethodOutcome>)> {
    let nx = system.order();
    let h = build_hankel(g, nx, nx)?;
    let (kappa, delta) = match crate::diagnostics::sensitivity_report(&h) {
        Ok(r) => (r.kappa, r.delta),
        Err(_) => (f64::NAN, f64::NAN),
    };
    let var = if cfg.noise_std > 0.0 { cfg.noise_std * cfg.noise_std } else { 1.0 };
    let outcomes = cfg
        .methods
        .iter()
        .map(|&method| {
            let realization = match method {
                Method::Ols => ols_realize(&h),
                Method::Tls => tls_realize(&h),
                Method::Kung => kung_realize(&h),
                Method::Wls => {
                    let mut wcfg = WlsConfig::with_p_g(Matrix::identity(cfg.n).scale(var));
                    wcfg.init = cfg.wls_init;
                    wls_realize(&h, g, &wcfg)
                }
            };
            match realization {
                Ok(r) => {
                    let score = fit(&r.model, system, cfg.fit_horizon);
                    MethodOutcome {
                        method,
                        fit: score.as_ref().ok().copied(),
                        a_hat: Some(r.a_hat.coeffs.clone()),
                        converged: r.converged,
                        failure: score.err().map(|e| e.to_string()),
                    }
                }
                Err(e) => MethodOutcome {
                    method,
                    fit: None,
                    a_hat: None,
                    converged: false,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok((kappa, delta, outcomes))
}

fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialRecord> {
    let mut rng = stream_rng(cfg.seed ^ label_salt(&cfg.label), trial as u64 + 1);
    let mut attempts = 0usize;
    loop {
        attempts += 1;
        if attempts > KAPPA_REJECTION_BUDGET {
            return Err(RealizeError::SamplingBudget { attempts });
        }
        let system = match &cfg.source {
            SystemSource::Explicit(models) => models[trial % models.len()].clone(),
            SystemSource::Generator { nx, rho_min, rho_max } => {
                random_stable_system(*nx, *rho_min, *rho_max, &mut rng)?
            }
        };
        let mut g = markov(&system, cfg.n);
        for v in g.values.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += cfg.noise_std * e;
        }
        if let Some((lo, hi)) = cfg.kappa_window {
            let h = build_hankel(&g, system.order(), system.order())?;
            let kappa = match crate::diagnostics::sensitivity_report(&h) {
                Ok(r) => r.kappa,
                Err(_) => continue,
            };
            if !(kappa >= lo && kappa <= hi) {
                continue;
            }
        }
        let (kappa, delta, outcomes) = run_methods(cfg, &system, &g)?;
        return Ok(TrialRecord {
            trial,
            system_id: cfg.label.clone(),
            kappa,
            delta,
            outcomes,
        });
    }
}

/// Run all trials of one group. Trials execute in parallel; each consumes
/// its own RNG stream, so the records are identical for any thread count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    if cfg.trials == 0 {
        return Err(RealizeError::Dimension("trials must be >= 1".into()));
    }
    if cfg.noise_std < 0.0 {
        return Err(RealizeError::Dimension("noise_std must be >= 0".into()));
    }
    if cfg.methods.is_empty() {
        return Err(RealizeError::Dimension("at least one method".into()));
    }
    let nx = cfg.source.order();
    if nx == 0 || cfg.n < 2 * nx + 1 {
        return Err(RealizeError::Dimension(format!(
            "n = {} too short for nx = {nx}",
            cfg.n
        )));
    }
    let records: Result<Vec<TrialRecord>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, i))
        .collect();
    let records = records?;
    let summary = group_stats(cfg, &records);
    Ok(ExperimentOutput {
        config_label: cfg.label.clone(),
        scatter: cfg.scatter,
        records,
        summary,
    })
}

/// Aggregate per-method means/medians, pairwise win rates and mean
/// diagnostics over trial records, in trial order.
pub fn group_stats(cfg: &ExperimentConfig, records: &[TrialRecord]) -> GroupSummary {
    let fits_of = |method: Method| -> Vec<Option<f64>> {
        records
            .iter()
            .map(|r| {
                r.outcomes
                    .iter()
                    .find(|o| o.method == method)
                    .and_then(|o| o.fit)
            })
            .collect()
    };
    let methods: Vec<MethodSummary> = cfg
        .methods
        .iter()
        .map(|&method| {
            let fits = fits_of(method);
            let ok: Vec<f64> = fits.iter().flatten().copied().collect();
            let failures = fits.len() - ok.len();
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
            let median = (!ok.is_empty()).then(|| {
                let mut sorted = ok.clone();
                sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let m = sorted.len();
                if m % 2 == 1 {
                    sorted[m / 2]
                } else {
                    0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
                }
            });
            MethodSummary { method, mean_fit: mean, median_fit: median, failures }
        })
        .collect();

    let mut pairs = Vec::new();
    for (i, &mx) in cfg.methods.iter().enumerate() {
        for &my in cfg.methods.iter().skip(i + 1) {
            let fx = fits_of(mx);
            let fy = fits_of(my);
            let mut both = 0usize;
            let mut wins = 0usize;
            for (a, b) in fx.iter().zip(&fy) {
                if let (Some(a), Some(b)) = (a, b) {
                    both += 1;
                    if b > a {
                        wins += 1;
                    }
                }
            }
            pairs.push(PairWinRate {
                x: mx,
                y: my,
                y_win_rate: if both > 0 { wins as f64 / both as f64 } else { 0.0 },
            });
        }
    }
    let scatter_win_rate = {
        let fx = fits_of(cfg.scatter.0);
        let fy = fits_of(cfg.scatter.1);
        let mut both = 0usize;
        let mut wins = 0usize;
        for (a, b) in fx.iter().zip(&fy) {
            if let (Some(a), Some(b)) = (a, b) {
                both += 1;
                if b > a {
                    wins += 1;
                }
            }
        }
        if both > 0 {
            wins as f64 / both as f64
        } else {
            0.0
        }
    };
    let finite_mean = |xs: Vec<f64>| {
        let ok: Vec<f64> = xs.into_iter().filter(|x| x.is_finite()).collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
    };
    GroupSummary {
        label: cfg.label.clone(),
        trials: records.len(),
        methods,
        pairs,
        scatter_win_rate,
        mean_kappa: finite_mean(records.iter().map(|r| r.kappa).collect()),
        mean_delta: finite_mean(records.iter().map(|r| r.delta).collect()),
    }
}

/// Named presets mirroring the four studies.
pub fn preset(name: &str, seed: u64, trials: Option<usize>) -> Result<Vec<ExperimentConfig>> {
    let trials_or = |d: usize| trials.unwrap_or(d);
    let base = |label: &str, source: SystemSource, n: usize, noise_std: f64, default_trials: usize, methods: Vec<Method>, scatter: (Method, Method)| {
        ExperimentConfig {
            label: label.to_string(),
            source,
            n,
            noise_std,
            trials: trials_or(default_trials),
            methods,
            fit_horizon: crate::model::DEFAULT_FIT_HORIZON,
            kappa_window: None,
            seed,
            scatter,
            wls_init: WlsInit::Auto,
        }
    };
    match name {
        "exp1" => Ok(vec![
            base(
                "system1",
                SystemSource::Explicit(vec![system_one()]),
                20,
                1.0,
                200,
                vec![Method::Ols, Method::Tls],
                (Method::Ols, Method::Tls),
            ),
            base(
                "system2",
                SystemSource::Explicit(vec![system_two()]),
                20,
                1.0,
                200,
                vec![Method::Ols, Method::Tls],
                (Method::Ols, Method::Tls),
            ),
        ]),
        "exp2" => {
            let windows = [(1.0, 1.1), (1.3, 1.4), (1.6, 1.7)];
            Ok(windows
                .iter()
                .enumerate()
                .map(|(i, &w)| {
                    let mut cfg = base(
                        ["A", "B", "C"][i],
                        SystemSource::Generator { nx: 2, rho_min: 0.78, rho_max: 0.9 },
                        20,
                        0.5_f64.sqrt(),
                        200,
                        vec![Method::Ols, Method::Tls],
                        (Method::Ols, Method::Tls),
                    );
                    cfg.kappa_window = Some(w);
                    cfg
                })
                .collect())
        }
        "exp3" => {
            let rows: [(&str, f64, f64, usize, usize); 6] = [
                ("A1", 0.85, 0.95, 2, 20),
                ("A2", 0.55, 0.65, 2, 20),
                ("A3", 0.05, 0.15, 2, 20),
                ("B1", 0.78, 0.90, 2, 50),
                ("B2", 0.78, 0.90, 6, 50),
                ("B3", 0.78, 0.90, 10, 50),
            ];
            Ok(rows
                .iter()
                .map(|&(label, lo, hi, nx, n)| {
                    base(
                        label,
                        SystemSource::Generator { nx, rho_min: lo, rho_max: hi },
                        n,
                        0.5_f64.sqrt(),
                        200,
                        vec![Method::Ols, Method::Tls],
                        (Method::Ols, Method::Tls),
                    )
                })
                .collect())
        }
        "exp4" => {
            let mut sys1 = base(
                "system1",
                SystemSource::Explicit(vec![system_one()]),
                20,
                1.0,
                200,
                vec![Method::Ols, Method::Tls, Method::Wls],
                (Method::Ols, Method::Wls),
            );
            sys1.wls_init = WlsInit::Ols;
            let mut sys2 = base(
                "system2",
                SystemSource::Explicit(vec![system_two()]),
                20,
                1.0,
                200,
                vec![Method::Ols, Method::Tls, Method::Wls],
                (Method::Tls, Method::Wls),
            );
            sys2.wls_init = WlsInit::Tls;
            Ok(vec![sys1, sys2])
        }
        other => Err(RealizeError::Dimension(format!("unknown preset '{other}'"))),
    }
}

/// records.csv: one row per (trial, method).
pub fn records_to_csv(outputs: &[ExperimentOutput]) -> String {
    let mut out = String::from("trial,system_id,method,fit,kappa,delta,converged\n");
    for output in outputs {
        for r in &output.records {
            for o in &r.outcomes {
                let fit = o.fit.map(|f| f.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.trial, r.system_id, o.method.label(), fit, r.kappa, r.delta, o.converged
                ));
            }
        }
    }
    out
}

/// summary.json body for a list of group outputs.
pub fn summaries_to_json(outputs: &[ExperimentOutput]) -> serde_json::Value {
    serde_json::json!({
        "groups": outputs.iter().map(|o| &o.summary).collect::<Vec<_>>(),
    })
}
