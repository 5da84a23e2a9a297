//! The four subcommands, each turning a [`RunConfig`] into a JSON result.

use anyhow::Context;
use esig_core::covariance::{CovarianceModel, Model};
use esig_core::diagrams::enumerate_pairings;
use esig_core::engine::{chaos_projection_kernels, diagram_scalar, ChaosKernel};
use esig_core::oracle::{PlOracle, UniformGrid};
use esig_core::words::Word;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::output::{diagram_json, word_key, word_map, write_word_csv};
use crate::{parallel, verify};

/// Outcome of a subcommand: the result document body and whether the run
/// succeeded (verification suites can fail without an error).
pub struct Outcome {
    pub result: Value,
    pub success: bool,
}

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    cfg.validate()?;
    match cfg.command {
        Command::Compute => compute(cfg),
        Command::Verify => run_verify(cfg),
        Command::Convergence => convergence(cfg),
        Command::Sample => sample(cfg),
    }
}

fn kernel_word(cfg: &RunConfig) -> anyhow::Result<Word> {
    let letters = cfg.word.clone().unwrap_or_else(|| vec![1; cfg.level]);
    Ok(Word::new(cfg.dim, letters)?)
}

/// Increasing `m`-tuples from `max(5, m)` evenly spaced interior points.
pub fn default_free_times(s: f64, t: f64, m: usize) -> Vec<Vec<f64>> {
    let k = m.max(5);
    let points: Vec<f64> = (1..=k).map(|i| s + (t - s) * i as f64 / (k + 1) as f64).collect();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..m).collect();
    loop {
        out.push(idx.iter().map(|&i| points[i]).collect());
        // Next combination in lexicographic order.
        let Some(pos) = (0..m).rev().find(|&p| idx[p] < k - m + p) else {
            break;
        };
        idx[pos] += 1;
        for p in pos + 1..m {
            idx[p] = idx[p - 1] + 1;
        }
    }
    out
}

fn kernel_metadata(k: &ChaosKernel<Model>, cfg: &RunConfig) -> Value {
    json!({
        "diagram": diagram_json(k.diagram()),
        "chaos_order": k.chaos_order(),
        "free_positions": k.free_positions(),
        "free_letters": k.free_letters(),
        "eliminated_positions": k.eliminated_positions(),
        "retained_positions": k.retained_positions(),
        "quadrature_dims": k.quadrature_dims(&cfg.quadrature_config()),
    })
}

fn compute(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let model = cfg.model.build()?;
    let q = cfg.quadrature_config();
    if cfg.chaos == 0 {
        let es = parallel::expected_signature(&model, cfg.dim, cfg.level, cfg.s, cfg.t, &q)?;
        let terms: Vec<Value> = es
            .terms
            .iter()
            .map(|t| {
                json!({
                    "diagram": diagram_json(&t.diagram),
                    "value": t.estimate.value,
                    "error": t.estimate.err,
                })
            })
            .collect();
        if let Some(path) = &cfg.csv {
            write_word_csv(path, &["value", "error"], &[&es.value, &es.error])?;
        }
        return Ok(Outcome {
            result: json!({
                "word_values": word_map(&es.value),
                "word_errors": word_map(&es.error),
                "terms": terms,
            }),
            success: true,
        });
    }
    let word = kernel_word(cfg)?;
    let kernels = chaos_projection_kernels(&model, &word, cfg.chaos, cfg.s, cfg.t)?;
    let lattice = cfg
        .free_times
        .clone()
        .unwrap_or_else(|| default_free_times(cfg.s, cfg.t, cfg.chaos));
    let out: Vec<Value> = kernels
        .par_iter()
        .map(|k| {
            let letters = k.free_letters();
            let values = lattice
                .iter()
                .map(|times| {
                    let e = k.eval(times, &letters, &q)?;
                    Ok(json!({"free_times": times, "value": e.value, "error": e.err}))
                })
                .collect::<esig_core::Result<Vec<_>>>()?;
            let mut meta = kernel_metadata(k, cfg);
            meta["values"] = json!(values);
            Ok(meta)
        })
        .collect::<esig_core::Result<_>>()?;
    Ok(Outcome {
        result: json!({
            "word": word_key(&word),
            "chaos_order": cfg.chaos,
            "kernels": out,
        }),
        success: true,
    })
}

fn run_verify(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let suite = cfg.suite.as_deref().context("verify needs a suite")?;
    let reports = verify::run(suite, cfg)?;
    let success = reports.iter().all(|r| r.passed);
    Ok(Outcome {
        result: json!({ "passed": success, "reports": reports }),
        success,
    })
}

fn relative_error(approx: f64, exact: f64) -> f64 {
    if exact == 0.0 {
        approx.abs()
    } else {
        ((approx - exact) / exact).abs()
    }
}

fn convergence(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let model = cfg.model.build()?;
    let q = cfg.quadrature_config();
    let oracles: Vec<PlOracle> = cfg
        .grids
        .iter()
        .map(|&l| Ok(PlOracle::new(&model, UniformGrid::new(cfg.s, cfg.t, l)?)?.with_budget(cfg.oracle_budget)))
        .collect::<esig_core::Result<_>>()?;
    let mut rows = Vec::new();
    if cfg.chaos == 0 {
        for d in enumerate_pairings(cfg.level, 0)? {
            let exact = diagram_scalar(&d, &model, cfg.s, cfg.t, &q)?;
            let table: Vec<Value> = oracles
                .par_iter()
                .map(|o| {
                    let v = o.diagram_scalar(&d)?;
                    Ok(json!({
                        "grid": o.grid().cells(),
                        "oracle": v,
                        "abs_error": (v - exact.value).abs(),
                        "rel_error": relative_error(v, exact.value),
                    }))
                })
                .collect::<esig_core::Result<_>>()?;
            rows.push(json!({
                "diagram": diagram_json(&d),
                "analytic": exact.value,
                "analytic_error": exact.err,
                "grids": table,
            }));
        }
    } else {
        let word = kernel_word(cfg)?;
        let lattice = match &cfg.free_times {
            Some(t) => t.clone(),
            None => generic_free_times(cfg.s, cfg.t, cfg.chaos),
        };
        for k in chaos_projection_kernels(&model, &word, cfg.chaos, cfg.s, cfg.t)? {
            let letters = k.free_letters();
            for times in &lattice {
                let exact = k.eval(times, &letters, &q)?;
                let table: Vec<Value> = oracles
                    .par_iter()
                    .map(|o| {
                        let v = o.chaos_kernel(k.diagram(), &word, times, &letters)?;
                        Ok(json!({
                            "grid": o.grid().cells(),
                            "oracle": v,
                            "abs_error": (v - exact.value).abs(),
                            "rel_error": relative_error(v, exact.value),
                        }))
                    })
                    .collect::<esig_core::Result<_>>()?;
                rows.push(json!({
                    "diagram": diagram_json(k.diagram()),
                    "free_times": times,
                    "analytic": exact.value,
                    "analytic_error": exact.err,
                    "grids": table,
                }));
            }
        }
    }
    Ok(Outcome {
        result: json!({ "rows": rows }),
        success: true,
    })
}

/// Five increasing `m`-tuples built from fixed irrational offsets, so that
/// they avoid the points of dyadic grids.
pub fn generic_free_times(s: f64, t: f64, m: usize) -> Vec<Vec<f64>> {
    (0..verify::GENERIC_POINTS.len())
        .map(|i| {
            let mut v: Vec<f64> = (0..m)
                .map(|j| {
                    let u = verify::GENERIC_POINTS[(i + j) % verify::GENERIC_POINTS.len()];
                    let x = u + j as f64 * std::f64::consts::FRAC_1_SQRT_2;
                    s + (t - s) * (x - x.floor())
                })
                .collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect()
}

fn sample(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let model = cfg.model.build()?;
    let grid = UniformGrid::new(cfg.s, cfg.t, cfg.grid)?;
    if cfg.t > model.horizon() {
        anyhow::bail!("grid end {} exceeds the model horizon {}", cfg.t, model.horizon());
    }
    let est = parallel::estimate_expected_signature(&model, grid, cfg.dim, cfg.level, cfg.paths, cfg.seed)?;
    if let Some(path) = &cfg.csv {
        write_word_csv(path, &["mean", "std_error"], &[&est.mean, &est.std_error])?;
    }
    Ok(Outcome {
        result: json!({
            "n_paths": est.n_paths,
            "seed": est.seed,
            "grid": {"s": grid.s(), "t": grid.t(), "cells": grid.cells()},
            "mean": word_map(&est.mean),
            "std_error": word_map(&est.std_error),
        }),
        success: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_lattice_enumerates_combinations() {
        let l = default_free_times(0.0, 1.0, 2);
        assert_eq!(l.len(), 10);
        assert!(l.iter().all(|v| v[0] < v[1]));
        assert_eq!(default_free_times(0.0, 1.0, 1).len(), 5);
        assert_eq!(default_free_times(0.0, 1.0, 6).len(), 1);
    }

    #[test]
    fn generic_points_are_increasing_and_inside() {
        for m in 1..=3 {
            for v in generic_free_times(0.0, 1.0, m) {
                assert!(v.windows(2).all(|w| w[0] < w[1]));
                assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
            }
        }
    }
}
