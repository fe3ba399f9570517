//! Prover and verifier measurements across workload sizes.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use sslc_core::ledger::LedgerError;
use sslc_core::proof::{prove_claim, ProofBackend, ProveError};
use sslc_core::{build_claim, generate_chain, AccountId, Chain, QuerySpec};

use crate::alloc::PeakAlloc;

/// Selected transactions per fixture block; the other half of each block is unrelated traffic.
pub const RELEVANT_PER_BLOCK: u64 = 100;

/// Verifications per repetition; the recorded time is their median.
pub const VERIFY_RUNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub workload: u64,
    pub proof_size_bytes: u64,
    pub prover_time_s: f64,
    pub prover_mem_bytes: u64,
    pub verifier_time_s: f64,
    pub verifier_mem_bytes: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("a block of {txs} transactions needs a tree deeper than {depth}")]
    ShapeTooSmall { txs: u64, depth: usize },
    #[error("workloads must be positive and ascending")]
    Workloads,
    #[error("repetitions must be positive")]
    Repetitions,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Prove(#[from] ProveError),
    #[error("proof failed to verify at workload {0}")]
    Unverified(u64),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub fn bench_account() -> AccountId {
    AccountId([0x5a; 32])
}

/// `workload` selected transactions spread 100 per block over blocks twice that size.
pub fn fixture(workload: u64, seed: u64) -> Result<Chain, LedgerError> {
    let per_block = workload.min(RELEVANT_PER_BLOCK);
    let blocks = workload.div_ceil(per_block);
    generate_chain(seed, blocks as usize, 2 * per_block as usize, per_block as usize, bench_account())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn median_u64(v: Vec<u64>) -> u64 {
    median(v.into_iter().map(|x| x as f64).collect()).round() as u64
}

/// Runs `f` and reports its wall time and extra peak heap.
fn measure<T>(f: impl FnOnce() -> T) -> (T, f64, u64) {
    let base = PeakAlloc::reset_peak();
    let t = Instant::now();
    let out = f();
    let secs = t.elapsed().as_secs_f64();
    (out, secs, PeakAlloc::peak().saturating_sub(base) as u64)
}

pub fn bench<B: ProofBackend + ?Sized>(
    backend: &B,
    workloads: &[u64],
    repetitions: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>, BenchError> {
    if workloads.is_empty() || workloads[0] == 0 || workloads.windows(2).any(|w| w[0] > w[1]) {
        return Err(BenchError::Workloads);
    }
    if repetitions == 0 {
        return Err(BenchError::Repetitions);
    }
    let depth = backend.params().shape.tree_depth;
    let widest = 2 * workloads.last().copied().unwrap_or(0).min(RELEVANT_PER_BLOCK);
    if widest > 1u64 << depth {
        return Err(BenchError::ShapeTooSmall { txs: widest, depth });
    }
    let spec = QuerySpec::average_amount(bench_account());
    let mut out = Vec::with_capacity(workloads.len());
    for &w in workloads {
        let chain = fixture(w, seed ^ w)?;
        let (claim, witness) = build_claim(&chain, &spec).map_err(ProveError::from)?;
        let (mut pt, mut pm, mut vt, mut vm) = (vec![], vec![], vec![], vec![]);
        let mut size = 0;
        for _ in 0..repetitions {
            let (proof, secs, mem) = measure(|| prove_claim(backend, &spec, &claim, &witness));
            let proof = proof?;
            pt.push(secs);
            pm.push(mem);
            size = proof.bytes.len() as u64;
            let mut runs = Vec::with_capacity(VERIFY_RUNS);
            for _ in 0..VERIFY_RUNS {
                let (ok, secs, mem) = measure(|| backend.verify(&proof, &claim));
                if !ok {
                    return Err(BenchError::Unverified(w));
                }
                runs.push(secs);
                vm.push(mem);
            }
            vt.push(median(runs));
        }
        out.push(BenchRecord {
            workload: w,
            proof_size_bytes: size,
            prover_time_s: median(pt),
            prover_mem_bytes: median_u64(pm),
            verifier_time_s: median(vt),
            verifier_mem_bytes: median_u64(vm),
        });
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Coefficient of determination of the least-squares line through `(x, y)`.
pub fn r_squared(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - (my + slope * (p.0 - mx))).powi(2)).sum();
    1.0 - ss_res / syy
}

#[cfg(test)]
mod tests {
    use super::*;
    use sslc_core::proof::CircuitShape;
    use sslc_core::NativeBackend;

    #[test]
    fn fixture_shape() {
        let c = fixture(250, 1).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.blocks()[0].transactions.len(), 200);
        assert_eq!(sslc_core::tx_count_for_account(&c, &bench_account()), 300);
        assert_eq!(fixture(10, 1).unwrap().blocks()[0].transactions.len(), 20);
    }

    #[test]
    fn native_bench_and_csv() {
        let b = NativeBackend::setup(CircuitShape::new(100, 8)).unwrap();
        let recs = bench(&b, &[10, 100, 200], 3, 7).unwrap();
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.proof_size_bytes == 32));
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(
            "workload,proof_size_bytes,prover_time_s,prover_mem_bytes,verifier_time_s,verifier_mem_bytes\n"
        ));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn rejects_bad_inputs() {
        let b = NativeBackend::setup(CircuitShape::new(100, 7)).unwrap();
        assert!(matches!(bench(&b, &[100], 1, 0), Err(BenchError::ShapeTooSmall { txs: 200, depth: 7 })));
        assert!(matches!(bench(&b, &[10, 5], 1, 0), Err(BenchError::Workloads)));
        assert!(matches!(bench(&b, &[10], 0, 0), Err(BenchError::Repetitions)));
    }

    #[test]
    fn r_squared_of_lines() {
        assert!((r_squared(&[(1.0, 2.0), (2.0, 4.0), (3.0, 6.0)]) - 1.0).abs() < 1e-12);
        assert!(r_squared(&[(1.0, 1.0), (2.0, 3.0), (3.0, 1.0)]) < 0.1);
    }
}
