//! Method pipelines behind the `fit` and `sweep` subcommands.

use std::time::Instant;

use anyhow::{bail, Result};
use nalgebra::DVector;
use rayon::prelude::*;

use maxcon::bco::BcoLimits;
use maxcon::datagen::{self, GroundTruth};
use maxcon::ibco::{run_ibco, BisectionTrace};
use maxcon::models::{
    build_fundamental_instance, build_homography_instance, build_regression_instance,
    build_triangulation_instance, fundamental_post_step, least_squares_fit, ModelData,
    ModelFamily,
};
use maxcon::problem::{ConsensusInstance, Estimate};
use maxcon::ransac::{random_init, run_ransac, RansacConfig, RansacResult};

use crate::schema::{
    self, data_to_core, BcoCycleRecord, BisectionRecord, BisectionStepRecord, ExperimentConfig,
    FamilyTag, GroundTruthFile, InstanceFile, Method, RansacSummary, RunRecord,
    StageConsensus, SCHEMA_VERSION,
};

/// A loaded problem: the consensus instance plus the data the samplers
/// draw from (for fundamental matrices these are the Hartley-normalized
/// correspondences matching the instance frame).
pub struct Problem {
    pub family: ModelFamily,
    pub tag: FamilyTag,
    pub inst: ConsensusInstance,
    pub data: ModelData,
}

pub fn build_problem(file: &InstanceFile, epsilon_override: Option<f64>) -> Result<Problem> {
    let epsilon = epsilon_override.unwrap_or(file.epsilon);
    let data = data_to_core(&file.data)?;
    let (family, inst, data) = match (&file.family, data) {
        (FamilyTag::Regression, ModelData::Regression(rows)) => {
            let d = rows.first().map(|r| r.a.len()).unwrap_or(0);
            let inst = build_regression_instance(&rows, epsilon)?;
            (
                ModelFamily::Regression { dimension: d },
                inst,
                ModelData::Regression(rows),
            )
        }
        (FamilyTag::Homography, ModelData::Correspondences(corrs)) => {
            let inst = build_homography_instance(&corrs, epsilon)?;
            (
                ModelFamily::Homography,
                inst,
                ModelData::Correspondences(corrs),
            )
        }
        (FamilyTag::Fundamental, ModelData::Correspondences(corrs)) => {
            let (inst, frame) = build_fundamental_instance(&corrs, epsilon)?;
            (
                ModelFamily::Fundamental,
                inst,
                ModelData::Correspondences(frame.normalized),
            )
        }
        (FamilyTag::Triangulation, ModelData::Views(views)) => {
            let inst = build_triangulation_instance(&views, epsilon)?;
            (ModelFamily::Triangulation, inst, ModelData::Views(views))
        }
        (tag, _) => bail!("instance data does not match family '{}'", tag.name()),
    };
    Ok(Problem {
        family,
        tag: file.family.clone(),
        inst,
        data,
    })
}

fn bisection_record(trace: &BisectionTrace) -> BisectionRecord {
    BisectionRecord {
        steps: trace
            .steps
            .iter()
            .map(|s| BisectionStepRecord {
                delta_low: s.delta_low,
                delta_high: s.delta_high,
                delta: s.delta,
                achieved: s.achieved,
                cycles: s.bco.iterations,
                converged_to_zero: s.bco.converged_to_zero,
                objective: s.bco.state.objective,
                trace: s
                    .bco
                    .trace
                    .iter()
                    .map(|c| BcoCycleRecord {
                        cycle: c.cycle,
                        objective_after_assignment: c.objective_after_assignment,
                        objective_after_conic: c.objective_after_conic,
                        consensus: c.consensus,
                    })
                    .collect(),
            })
            .collect(),
        final_delta_low: trace.final_delta_low,
        final_delta_high: trace.final_delta_high,
    }
}

fn consensus_set_fit(
    problem: &Problem,
    estimate: &Estimate,
) -> Option<DVector<f64>> {
    let idx: Vec<usize> = estimate
        .inlier_mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(i, _)| i)
        .collect();
    if idx.len() < problem.family.minimal_subset_size() {
        return None;
    }
    least_squares_fit(&problem.family, &problem.data, &idx).ok()
}

/// Runs one method on a loaded problem and assembles its run record.
/// Runtime covers the method execution only.
pub fn run_method(
    problem: &Problem,
    method: Method,
    seed: u64,
    tol: f64,
    max_iterations: usize,
    x0: Option<&[f64]>,
    gt: Option<&GroundTruthFile>,
) -> Result<RunRecord> {
    let limits = BcoLimits {
        socp_tol: tol,
        ..BcoLimits::default()
    };
    let ransac_cfg = RansacConfig {
        seed,
        max_iterations,
        ..RansacConfig::default()
    };
    let post_step = match problem.family {
        ModelFamily::Fundamental => Some(&fundamental_post_step as maxcon::ibco::PostStep<'_>),
        _ => None,
    };

    let start = Instant::now();
    let mut ransac_out: Option<RansacResult> = None;
    let initial: Estimate = match method {
        Method::Ransac | Method::RansacIbco => {
            let r = run_ransac(&problem.inst, &problem.family, &problem.data, &ransac_cfg)?;
            let est = r.estimate.clone();
            ransac_out = Some(r);
            est
        }
        Method::Ibco => {
            let x = match x0 {
                Some(values) => {
                    if values.len() != problem.family.dimension() {
                        bail!(
                            "--x0 has {} entries, family needs {}",
                            values.len(),
                            problem.family.dimension()
                        );
                    }
                    DVector::from_vec(values.to_vec())
                }
                None => random_init(&problem.inst, &problem.family, &problem.data, seed),
            };
            problem.inst.consensus(&x)
        }
    };

    // Closed-domain margin calibrated at the initial estimate.
    let margin = problem.inst.calibrated_margin(&initial.x);
    let inst = problem.inst.clone().with_domain_margin(margin)?;
    let initial = inst.consensus(&initial.x);

    let (final_est, bisection, solver_failure) = match method {
        Method::Ransac => (initial.clone(), None, false),
        Method::Ibco | Method::RansacIbco => {
            let (est, trace) = run_ibco(&inst, &initial.x, post_step, &limits);
            let failed = trace
                .steps
                .iter()
                .any(|s| s.bco.solver_failure);
            (est, Some(bisection_record(&trace)), failed)
        }
    };
    let runtime_seconds = start.elapsed().as_secs_f64();

    let e_ls = gt.and_then(|g| {
        if g.inlier_mask_true.len() != inst.len() {
            return None;
        }
        let gt_core = GroundTruth {
            x_true: DVector::from_vec(g.x_true.clone()),
            inlier_mask_true: g.inlier_mask_true.clone(),
        };
        let fit = consensus_set_fit(problem, &final_est)?;
        datagen::e_ls(&fit, &gt_core, &inst).ok()
    });

    Ok(RunRecord {
        schema_version: SCHEMA_VERSION,
        family: problem.tag.name().to_string(),
        method: method.name().to_string(),
        seed,
        n: inst.len(),
        epsilon: inst.epsilon(),
        consensus: StageConsensus {
            initial: initial.consensus,
            final_consensus: final_est.consensus,
        },
        runtime_seconds,
        e_ls,
        solver_failure,
        ransac: ransac_out.map(|r| RansacSummary {
            iterations: r.iterations,
            unpolished_consensus: r.unpolished_consensus,
            polished_adopted: r.polished_adopted,
            all_degenerate: r.all_degenerate,
        }),
        bisection,
        x: final_est.x.iter().copied().collect(),
    })
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SweepRecord {
    pub eta: f64,
    pub run: usize,
    #[serde(flatten)]
    pub record: RunRecord,
}

fn generate_for_sweep(
    cfg: &ExperimentConfig,
    eta: f64,
    seed: u64,
) -> Result<(InstanceFile, GroundTruthFile)> {
    crate::generate::synthesize(
        &schema::GenerateConfig {
            family: cfg.family.clone(),
            n: cfg.n,
            d: cfg.d,
            eta,
            seed,
            epsilon: cfg.epsilon,
            out: String::new(),
        },
    )
}

/// Executes the full sweep: every `(eta, run)` cell is generated once and
/// each method runs on it. Cells execute in a worker pool; records are
/// ordered afterwards so results do not depend on the worker count.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<(Vec<SweepRecord>, Vec<String>)> {
    cfg.validate()?;
    let methods: Vec<Method> = cfg
        .methods
        .iter()
        .map(|m| schema::parse_method(m))
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> = (0..cfg.etas.len())
        .flat_map(|e| (0..cfg.runs).map(move |r| (e, r)))
        .collect();

    let outcomes: Vec<(usize, usize, Result<Vec<RunRecord>>)> = cells
        .par_iter()
        .map(|&(eta_idx, run_idx)| {
            let eta = cfg.etas[eta_idx];
            let seed = cfg
                .base_seed
                .wrapping_add(eta_idx as u64 * 10_000)
                .wrapping_add(run_idx as u64);
            let result = (|| -> Result<Vec<RunRecord>> {
                let (inst_file, gt) = generate_for_sweep(cfg, eta, seed)?;
                let problem = build_problem(&inst_file, None)?;
                methods
                    .iter()
                    .map(|&m| {
                        run_method(&problem, m, seed, cfg.tol, cfg.max_iterations, None, Some(&gt))
                    })
                    .collect()
            })();
            (eta_idx, run_idx, result)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut ordered = outcomes;
    ordered.sort_by_key(|&(e, r, _)| (e, r));
    for (eta_idx, run_idx, result) in ordered {
        match result {
            Ok(recs) => {
                for record in recs {
                    records.push(SweepRecord {
                        eta: cfg.etas[eta_idx],
                        run: run_idx,
                        record,
                    });
                }
            }
            Err(e) => failures.push(format!(
                "eta {} run {}: {e:#}",
                cfg.etas[eta_idx], run_idx
            )),
        }
    }
    Ok((records, failures))
}

pub struct SweepRow {
    pub eta: f64,
    pub method: String,
    pub runs: usize,
    pub mean_consensus: f64,
    pub std_consensus: f64,
    pub mean_runtime_seconds: f64,
    pub mean_e_ls: Option<f64>,
    pub rel_diff_to_ransac: Option<f64>,
}

/// Per-(eta, method) aggregates with the relative consensus difference to
/// the ransac baseline at the same eta.
pub fn aggregate(cfg: &ExperimentConfig, records: &[SweepRecord]) -> Vec<SweepRow> {
    let mut rows = Vec::new();
    for &eta in &cfg.etas {
        let ransac_mean: Option<f64> = {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.eta == eta && r.record.method == "ransac")
                .map(|r| r.record.consensus.final_consensus as f64)
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        for method in &cfg.methods {
            let group: Vec<&SweepRecord> = records
                .iter()
                .filter(|r| r.eta == eta && &r.record.method == method)
                .collect();
            if group.is_empty() {
                rows.push(SweepRow {
                    eta,
                    method: method.clone(),
                    runs: 0,
                    mean_consensus: f64::NAN,
                    std_consensus: f64::NAN,
                    mean_runtime_seconds: f64::NAN,
                    mean_e_ls: None,
                    rel_diff_to_ransac: None,
                });
                continue;
            }
            let n = group.len() as f64;
            let consensus: Vec<f64> = group
                .iter()
                .map(|r| r.record.consensus.final_consensus as f64)
                .collect();
            let mean = consensus.iter().sum::<f64>() / n;
            let var = if group.len() > 1 {
                consensus.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let mean_runtime =
                group.iter().map(|r| r.record.runtime_seconds).sum::<f64>() / n;
            let e_vals: Vec<f64> = group.iter().filter_map(|r| r.record.e_ls).collect();
            let mean_e = if e_vals.is_empty() {
                None
            } else {
                Some(e_vals.iter().sum::<f64>() / e_vals.len() as f64)
            };
            rows.push(SweepRow {
                eta,
                method: method.clone(),
                runs: group.len(),
                mean_consensus: mean,
                std_consensus: var.sqrt(),
                mean_runtime_seconds: mean_runtime,
                mean_e_ls: mean_e,
                rel_diff_to_ransac: ransac_mean.map(|rm| (mean - rm) / rm),
            });
        }
    }
    rows
}

pub fn rows_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "eta,method,runs,mean_consensus,std_consensus,mean_runtime_seconds,mean_e_ls,rel_diff_to_ransac\n",
    );
    for r in rows {
        let e_ls = r
            .mean_e_ls
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        let rel = r
            .rel_diff_to_ransac
            .map(|v| format!("{v}"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.eta,
            r.method,
            r.runs,
            r.mean_consensus,
            r.std_consensus,
            r.mean_runtime_seconds,
            e_ls,
            rel
        ));
    }
    out
}
