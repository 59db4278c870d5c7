//! Execution layer of the `poisar` binary: a resolved [`RunConfig`] goes in,
//! rendered artifacts come out. Argument parsing and file I/O live in the
//! binary; everything here is pure and deterministic given the config.

use poisar::kernel::DEFAULT_MAX_ITERATIONS;
use poisar::transience::escape_step;
use poisar::{
    classify, dominant_eigenvalue, geometric_rate, irreducibility, simulate, simulate_stream,
    stationary, transience_ensemble, Error, Params, Phase, State, TruncatedKernel,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// A fully resolved invocation: subcommand plus every knob it needs, after
/// config-file merging and defaulting. Serializes losslessly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub command: CommandConfig,
    pub seed: u64,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum CommandConfig {
    Classify {
        params: Params,
        tol: f64,
    },
    Simulate {
        params: Params,
        /// Initial counts, latest first: `(x1, x0)`.
        init: (u64, u64),
        steps: usize,
    },
    DriftCheck {
        params: Params,
        initial_box: u64,
    },
    Stationary {
        params: Params,
        n: u64,
        tol: f64,
        defect_budget: f64,
    },
    Rate {
        params: Params,
        n: u64,
        horizon: usize,
        init: (u64, u64),
        tol: f64,
        defect_budget: f64,
    },
    Transience {
        params: Params,
        runs: usize,
        horizon: usize,
        escape_level: u64,
        ratio_threshold: u64,
        ratio_eps: f64,
    },
    Irreducibility {
        params: Params,
    },
    PhaseDiagram {
        a_min: f64,
        a_max: f64,
        b_min: f64,
        b_max: f64,
        grid: usize,
        lambda: f64,
        tol: f64,
        with_simulation: bool,
        steps: usize,
        escape_level: u64,
    },
}

/// Rendered command output. `primary` goes to `--output` (or stdout);
/// `meta` is a one-line JSON summary for stderr when the primary format
/// cannot carry it.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub primary: String,
    pub meta: Option<String>,
    /// False when the command ran but its soundness check failed.
    pub check_ok: bool,
}

impl Artifacts {
    fn new(primary: String) -> Self {
        Artifacts {
            primary,
            meta: None,
            check_ok: true,
        }
    }
}

fn join_sublabels(label: &poisar::RegionLabel) -> String {
    label
        .sublabels
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("|")
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Executes a resolved config and renders its artifacts.
pub fn run(config: &RunConfig) -> Result<Artifacts, Error> {
    match &config.command {
        CommandConfig::Classify { params, tol } => {
            let label = classify(params, *tol);
            let theta = dominant_eigenvalue(params);
            match config.format {
                OutputFormat::Json => {
                    let value = json!({
                        "params": params,
                        "phase": label.phase,
                        "sublabels": label.sublabels,
                        "theta": theta,
                        "irreducibility": irreducibility(params),
                    });
                    Ok(Artifacts::new(to_pretty(&value)))
                }
                OutputFormat::Csv => {
                    let mut out = String::from("a,b,lambda,phase,sublabels,theta\n");
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        params.a,
                        params.b,
                        params.lambda,
                        label.phase,
                        join_sublabels(&label),
                        fmt_opt(theta)
                    ));
                    Ok(Artifacts::new(out))
                }
            }
        }

        CommandConfig::Simulate {
            params,
            init,
            steps,
        } => {
            let trajectory = simulate(params, State::new(init.0, init.1), *steps, config.seed);
            match config.format {
                OutputFormat::Json => Ok(Artifacts::new(to_pretty(&trajectory))),
                OutputFormat::Csv => Ok(Artifacts {
                    primary: trajectory.to_csv(),
                    meta: Some(
                        json!({"seed": trajectory.seed, "status": trajectory.status}).to_string(),
                    ),
                    check_ok: true,
                }),
            }
        }

        CommandConfig::DriftCheck {
            params,
            initial_box,
        } => {
            let report = poisar::certify_with_box(params, *initial_box)?;
            let sound = report.verify(params);
            let c_size = report.c.len();
            let value = json!({
                "params": params,
                "sublabel": report.sublabel,
                "function": report.function,
                "epsilon": report.epsilon,
                "k": report.k,
                "a_description": format!(
                    "A = {{(i,j) : {}*i + {}*j + {} <= 0}}",
                    params.a, params.b, params.lambda
                ),
                "c_size": c_size,
                "c": if c_size <= 100 { Some(&report.c) } else { None },
                "box": report.box_size,
                "boundary_margin": report.boundary_margin,
                "k_box_only": report.k_box_only,
                "sound": sound,
            });
            match config.format {
                OutputFormat::Json => Ok(Artifacts {
                    primary: to_pretty(&value),
                    meta: None,
                    check_ok: sound,
                }),
                OutputFormat::Csv => {
                    let mut out =
                        String::from("sublabel,epsilon,k,c_size,box,boundary_margin,sound\n");
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        report.sublabel,
                        report.epsilon,
                        report.k,
                        c_size,
                        report.box_size,
                        report.boundary_margin,
                        sound
                    ));
                    Ok(Artifacts {
                        primary: out,
                        meta: None,
                        check_ok: sound,
                    })
                }
            }
        }

        CommandConfig::Stationary {
            params,
            n,
            tol,
            defect_budget,
        } => {
            let kernel = TruncatedKernel::build(params, *n);
            let result = stationary(&kernel, *tol, *defect_budget, DEFAULT_MAX_ITERATIONS)?;
            let meta = json!({
                "residual": result.residual,
                "iterations": result.iterations,
                "max_row_defect": result.max_row_defect,
                "mass_loss_per_step": result.mass_loss_per_step,
            });
            match config.format {
                OutputFormat::Json => {
                    let value = json!({
                        "params": params,
                        "n": n,
                        "residual": result.residual,
                        "iterations": result.iterations,
                        "max_row_defect": result.max_row_defect,
                        "mass_loss_per_step": result.mass_loss_per_step,
                        "weights": result
                            .distribution
                            .iter()
                            .map(|(s, w)| json!({"i": s.i, "j": s.j, "weight": w}))
                            .collect::<Vec<_>>(),
                    });
                    Ok(Artifacts::new(to_pretty(&value)))
                }
                OutputFormat::Csv => {
                    let mut out = String::from("i,j,weight\n");
                    for (s, w) in result.distribution.iter() {
                        out.push_str(&format!("{},{},{}\n", s.i, s.j, w));
                    }
                    Ok(Artifacts {
                        primary: out,
                        meta: Some(meta.to_string()),
                        check_ok: true,
                    })
                }
            }
        }

        CommandConfig::Rate {
            params,
            n,
            horizon,
            init,
            tol,
            defect_budget,
        } => {
            let kernel = TruncatedKernel::build(params, *n);
            let pi = stationary(&kernel, *tol, *defect_budget, DEFAULT_MAX_ITERATIONS)?;
            let rate = geometric_rate(&kernel, State::new(init.0, init.1), *horizon, &pi)?;
            let meta = json!({
                "beta_hat": rate.beta_hat,
                "r_squared": rate.r_squared,
                "fit_window": rate.fit_window,
                "stationary_residual": pi.residual,
            });
            match config.format {
                OutputFormat::Json => {
                    let value = json!({
                        "params": params,
                        "n": n,
                        "init": init,
                        "beta_hat": rate.beta_hat,
                        "r_squared": rate.r_squared,
                        "fit_window": rate.fit_window,
                        "stationary_residual": pi.residual,
                        "tv": rate
                            .tv_sequence
                            .iter()
                            .map(|(step, tv)| json!({"n": step, "tv": tv}))
                            .collect::<Vec<_>>(),
                    });
                    Ok(Artifacts::new(to_pretty(&value)))
                }
                OutputFormat::Csv => {
                    let mut out = String::from("n,tv\n");
                    for (step, tv) in &rate.tv_sequence {
                        out.push_str(&format!("{step},{tv}\n"));
                    }
                    Ok(Artifacts {
                        primary: out,
                        meta: Some(meta.to_string()),
                        check_ok: true,
                    })
                }
            }
        }

        CommandConfig::Transience {
            params,
            runs,
            horizon,
            escape_level,
            ratio_threshold,
            ratio_eps,
        } => {
            let report = transience_ensemble(
                params,
                *runs,
                *horizon,
                *escape_level,
                config.seed,
                *ratio_threshold,
                *ratio_eps,
            )?;
            match config.format {
                OutputFormat::Json => Ok(Artifacts::new(to_pretty(&report))),
                OutputFormat::Csv => {
                    let mut out =
                        String::from("seed,escaped,escape_step,growth_rate,ratio_fraction\n");
                    for run in &report.runs {
                        out.push_str(&format!(
                            "{},{},{},{},{}\n",
                            run.index,
                            run.escaped,
                            fmt_opt(run.escape_step),
                            fmt_opt(run.growth_rate),
                            fmt_opt(run.ratio.map(|r| r.fraction)),
                        ));
                    }
                    Ok(Artifacts {
                        primary: out,
                        meta: Some(to_compact(&json!({
                            "theta": report.theta,
                            "stats": report.stats,
                        }))),
                        check_ok: true,
                    })
                }
            }
        }

        CommandConfig::Irreducibility { params } => {
            let report = irreducibility(params);
            match config.format {
                OutputFormat::Json => {
                    let value = json!({
                        "params": params,
                        "report": report,
                    });
                    Ok(Artifacts::new(to_pretty(&value)))
                }
                OutputFormat::Csv => {
                    let mut out = String::from(
                        "a,b,lambda,verdict,witness_i,witness_j,k_star,origin_class_identified\n",
                    );
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        params.a,
                        params.b,
                        params.lambda,
                        serde_json::to_value(report.verdict)
                            .unwrap()
                            .as_str()
                            .unwrap(),
                        fmt_opt(report.witness.map(|w| w.i)),
                        fmt_opt(report.witness.map(|w| w.j)),
                        fmt_opt(report.k_star),
                        report.origin_class_identified,
                    ));
                    Ok(Artifacts::new(out))
                }
            }
        }

        CommandConfig::PhaseDiagram {
            a_min,
            a_max,
            b_min,
            b_max,
            grid,
            lambda,
            tol,
            with_simulation,
            steps,
            escape_level,
        } => {
            if *grid < 2 {
                return Err(Error::InvalidArgument(format!(
                    "grid must be at least 2, got {grid}"
                )));
            }
            let rows: Vec<PhaseDiagramRow> = (0..grid * grid)
                .into_par_iter()
                .map(|flat| {
                    let gi = flat / grid;
                    let gj = flat % grid;
                    let a = a_min + (a_max - a_min) * gi as f64 / (grid - 1) as f64;
                    let b = b_min + (b_max - b_min) * gj as f64 / (grid - 1) as f64;
                    let p = Params {
                        a,
                        b,
                        lambda: *lambda,
                    };
                    let label = classify(&p, *tol);
                    let (max_count, escaped) = if *with_simulation {
                        let t =
                            simulate_stream(&p, State::ORIGIN, *steps, config.seed, flat as u64);
                        (
                            Some(t.counts.iter().copied().max().unwrap_or(0)),
                            Some(
                                escape_step(&t, *escape_level).is_some()
                                    || !t.status.is_completed(),
                            ),
                        )
                    } else {
                        (None, None)
                    };
                    PhaseDiagramRow {
                        a,
                        b,
                        phase: label.phase,
                        sublabels: join_sublabels(&label),
                        theta: dominant_eigenvalue(&p),
                        max_count,
                        escaped,
                    }
                })
                .collect();
            match config.format {
                OutputFormat::Json => Ok(Artifacts::new(to_pretty(&rows))),
                OutputFormat::Csv => {
                    let mut out = if *with_simulation {
                        String::from("a,b,phase,sublabels,theta,max_count,escaped\n")
                    } else {
                        String::from("a,b,phase,sublabels,theta\n")
                    };
                    for row in &rows {
                        out.push_str(&format!(
                            "{},{},{},{},{}",
                            row.a,
                            row.b,
                            row.phase,
                            row.sublabels,
                            fmt_opt(row.theta)
                        ));
                        if *with_simulation {
                            out.push_str(&format!(
                                ",{},{}",
                                fmt_opt(row.max_count),
                                fmt_opt(row.escaped)
                            ));
                        }
                        out.push('\n');
                    }
                    Ok(Artifacts::new(out))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
struct PhaseDiagramRow {
    a: f64,
    b: f64,
    phase: Phase,
    sublabels: String,
    theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_count: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    escaped: Option<bool>,
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("serializable artifact");
    out.push('\n');
    out
}

fn to_compact<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable artifact")
}
