//! Parallel drivers over diagrams, words and Monte Carlo chunks.
//!
//! Work items are independent and results are combined in a fixed order, so
//! outputs do not depend on the number of worker threads.

use esig_core::covariance::CovarianceModel;
use esig_core::diagrams::{enumerate_pairings, Diagram};
use esig_core::engine::{
    assemble_expected_signature, check_interval, check_signature_request, diagram_scalar, signature_diagrams,
    DiagramTerm, ExpectedSignature, QuadratureConfig,
};
use esig_core::montecarlo::{chunks, McEstimate, PathSampler, SignatureAccumulator, MAX_DEPTH};
use esig_core::oracle::{PlOracle, UniformGrid};
use esig_core::quadrature::Estimate;
use esig_core::words::TensorPolynomial;
use rayon::prelude::*;

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "ESIG_THREADS";

/// Sizes the global thread pool from `ESIG_THREADS` when set. Later calls
/// are no-ops.
pub fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{THREADS_VAR} must be a positive integer, got {v:?}"))?;
        if n == 0 {
            anyhow::bail!("{THREADS_VAR} must be a positive integer, got 0");
        }
        // Fails only if the pool already exists, which is fine.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// [`esig_core::engine::expected_signature`] with diagrams integrated in
/// parallel.
pub fn expected_signature<M: CovarianceModel + Sync + ?Sized>(
    model: &M,
    dim: usize,
    depth: usize,
    s: f64,
    t: f64,
    cfg: &QuadratureConfig,
) -> esig_core::Result<ExpectedSignature> {
    check_signature_request(dim, depth)?;
    check_interval(model, s, t)?;
    cfg.validate()?;
    if s == t {
        return esig_core::engine::expected_signature(model, dim, depth, s, t, cfg);
    }
    let terms = signature_diagrams(depth)?
        .into_par_iter()
        .map(|diagram| {
            let estimate = diagram_scalar(&diagram, model, s, t, cfg)?;
            Ok(DiagramTerm { diagram, estimate })
        })
        .collect::<esig_core::Result<Vec<_>>>()?;
    assemble_expected_signature(dim, depth, terms)
}

/// Piecewise-linear diagram values `Pˡ_st` for every full pairing of
/// `n` positions, in enumeration order.
pub fn pl_diagram_scalars(oracle: &PlOracle, n: usize) -> esig_core::Result<Vec<(Diagram, f64)>> {
    enumerate_pairings(n, 0)?
        .into_par_iter()
        .map(|d| {
            let v = oracle.diagram_scalar(&d)?;
            Ok((d, v))
        })
        .collect()
}

/// `𝔼𝒮(Xˡ)` of every word up to `depth`, assembled from per-diagram values
/// of the discrete oracle.
pub fn pl_expected_signature<M: CovarianceModel + ?Sized>(
    model: &M,
    grid: UniformGrid,
    dim: usize,
    depth: usize,
    budget: u64,
) -> esig_core::Result<TensorPolynomial> {
    check_signature_request(dim, depth)?;
    let oracle = PlOracle::new(model, grid)?.with_budget(budget);
    let mut terms = Vec::new();
    for n in (2..=depth).step_by(2) {
        for (diagram, v) in pl_diagram_scalars(&oracle, n)? {
            terms.push(DiagramTerm {
                diagram,
                estimate: Estimate::exact(v),
            });
        }
    }
    Ok(assemble_expected_signature(dim, depth, terms)?.value)
}

/// [`esig_core::montecarlo::estimate_expected_signature`] with chunks
/// sampled in parallel and merged in chunk order.
pub fn estimate_expected_signature<M: CovarianceModel + ?Sized>(
    model: &M,
    grid: UniformGrid,
    dim: usize,
    depth: usize,
    n_paths: u64,
    seed: u64,
) -> esig_core::Result<McEstimate> {
    if depth > MAX_DEPTH {
        return Err(esig_core::Error::Capability {
            what: "pathwise signature depth",
            value: depth as u64,
            limit: MAX_DEPTH as u64,
        });
    }
    let sampler = PathSampler::new(model, grid, dim, seed)?;
    let ranges: Vec<_> = chunks(n_paths).collect();
    let parts: Vec<SignatureAccumulator> = ranges
        .into_par_iter()
        .map(|r| sampler.accumulate(depth, r))
        .collect();
    let mut acc = SignatureAccumulator::new(dim, depth);
    for p in &parts {
        acc.merge(p);
    }
    Ok(acc.finish(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use esig_core::covariance::Fbm;

    #[test]
    fn parallel_matches_sequential() {
        let m = Fbm::new(0.4, 1.0).unwrap();
        let cfg = QuadratureConfig::default();
        let par = expected_signature(&m, 2, 4, 0.0, 1.0, &cfg).unwrap();
        let seq = esig_core::engine::expected_signature(&m, 2, 4, 0.0, 1.0, &cfg).unwrap();
        assert_eq!(par.value, seq.value);

        let grid = UniformGrid::new(0.0, 1.0, 8).unwrap();
        let par = estimate_expected_signature(&m, grid, 2, 3, 3000, 4).unwrap();
        let seq = esig_core::montecarlo::estimate_expected_signature(&m, grid, 2, 3, 3000, 4).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn assembled_oracle_matches_per_word_oracle() {
        let m = Fbm::new(0.3, 1.0).unwrap();
        let grid = UniformGrid::new(0.0, 1.0, 6).unwrap();
        let all = pl_expected_signature(&m, grid, 2, 4, 1_000_000).unwrap();
        for (w, v) in all.iter() {
            let direct = esig_core::oracle::pl_expected_signature(&m, grid, &w).unwrap();
            let direct = if w.is_empty() { 1.0 } else { direct };
            assert!((v - direct).abs() < 1e-14, "{w}");
        }
    }
}
