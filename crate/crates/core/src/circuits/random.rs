//! Random circuit descriptions with exactly trace-preserving internal
//! operations, for round-trip and property tests.
//!
//! For QC-QCs the TP conditions tie together all branches that share the
//! same applied set `K_n`: the internal operations are sampled as one Haar
//! isometry per set, from the direct sum of the `(K_n\k, k)` input slots to
//! the direct sum of the `(K_n, l)` output slots, and then sliced into the
//! per-branch operators.

use super::*;
use crate::random::{haar_isometry, rng as seeded_rng};
use crate::tensor::choi_vector;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Cplx {
    Cplx::new(re, im)
}

/// Extracts the `(row_block, col_block)` slice of a row-major matrix whose
/// rows/cols are partitioned into contiguous blocks.
fn block(
    m: &[Cplx],
    row_sizes: &[usize],
    col_sizes: &[usize],
    rb: usize,
    cb: usize,
) -> Vec<Cplx> {
    let cols: usize = col_sizes.iter().sum();
    let r0: usize = row_sizes[..rb].iter().sum();
    let c0: usize = col_sizes[..cb].iter().sum();
    let (nr, nc) = (row_sizes[rb], col_sizes[cb]);
    let mut out = vec![c(0.0, 0.0); nr * nc];
    for r in 0..nr {
        for cc in 0..nc {
            out[r * nc + cc] = m[(r0 + r) * cols + c0 + cc];
        }
    }
    out
}

/// Random fixed-order circuit with layer ancilla ranks `ranks` (length N).
pub fn random_qcfo(dims: &ProcessDims, order: &[usize], ranks: &[usize], seed: u64) -> QcFoDescription {
    let mut rng = seeded_rng(seed);
    random_qcfo_with(dims, order, ranks, &mut rng)
}

pub fn random_qcfo_with(
    dims: &ProcessDims,
    order: &[usize],
    ranks: &[usize],
    rng: &mut ChaCha8Rng,
) -> QcFoDescription {
    let n = dims.n_parties;
    assert_eq!(order.len(), n);
    assert_eq!(ranks.len(), n);
    let mut ops = Vec::new();
    let k1 = order[0];
    let v1 = haar_isometry(rng, dims.d_in[k1 - 1] * ranks[0], dims.d_p);
    let ket = choi_vector(
        &v1,
        vec![dims.past()],
        vec![dims.party_in(k1), SystemLabel::new(ancilla_name(1), ranks[0])],
    )
    .unwrap();
    ops.push(ket.outer());
    for step in 1..n {
        let (kp, kn) = (order[step - 1], order[step]);
        let vin = dims.d_out[kp - 1] * ranks[step - 1];
        let vout = dims.d_in[kn - 1] * ranks[step];
        assert!(vout >= vin, "rank schedule too small at step {step}");
        let v = haar_isometry(rng, vout, vin);
        let ket = choi_vector(
            &v,
            vec![dims.party_out(kp), SystemLabel::new(ancilla_name(step), ranks[step - 1])],
            vec![dims.party_in(kn), SystemLabel::new(ancilla_name(step + 1), ranks[step])],
        )
        .unwrap();
        ops.push(ket.outer());
    }
    // last layer: CPTP via an environment that is traced out
    let kn = order[n - 1];
    let vin = dims.d_out[kn - 1] * ranks[n - 1];
    let env = vin.div_ceil(dims.d_f);
    let v = haar_isometry(rng, dims.d_f * env, vin);
    let ket = choi_vector(
        &v,
        vec![dims.party_out(kn), SystemLabel::new(ancilla_name(n), ranks[n - 1])],
        vec![dims.future(), SystemLabel::new("env", env)],
    )
    .unwrap();
    ops.push(ket.outer().partial_trace(&["env"]).unwrap());
    QcFoDescription::new(dims.clone(), order.to_vec(), ranks.to_vec(), ops).unwrap()
}

/// Random classically-controlled circuit: one Haar instrument per ordered
/// sequence, single-Kraus branches except the final CPTP layer.
pub fn random_qccc(dims: &ProcessDims, ranks: &[usize], seed: u64) -> QcCcDescription {
    let mut rng = seeded_rng(seed);
    random_qccc_with(dims, ranks, &mut rng)
}

pub fn random_qccc_with(dims: &ProcessDims, ranks: &[usize], rng: &mut ChaCha8Rng) -> QcCcDescription {
    let n = dims.n_parties;
    assert_eq!(ranks.len(), n);
    let mut ops = BTreeMap::new();
    let mut sequences: Vec<Vec<usize>> = vec![vec![]];
    for len in 0..n {
        let mut next_seqs = Vec::new();
        for seq in sequences.iter().filter(|s| s.len() == len) {
            let continuations: Vec<usize> = (1..=n).filter(|k| !seq.contains(k)).collect();
            let (in_dim, in_factors) = if len == 0 {
                (dims.d_p, vec![dims.past()])
            } else {
                let kp = seq[len - 1];
                (
                    dims.d_out[kp - 1] * ranks[len - 1],
                    vec![dims.party_out(kp), SystemLabel::new(ancilla_name(len), ranks[len - 1])],
                )
            };
            let out_sizes: Vec<usize> =
                continuations.iter().map(|&k| dims.d_in[k - 1] * ranks[len]).collect();
            let total_out: usize = out_sizes.iter().sum();
            assert!(total_out >= in_dim, "rank schedule too small for sequence {seq:?}");
            let u = haar_isometry(rng, total_out, in_dim);
            for (bi, &k) in continuations.iter().enumerate() {
                let vk = block(&u, &out_sizes, &[in_dim], bi, 0);
                let ket = choi_vector(
                    &vk,
                    in_factors.clone(),
                    vec![dims.party_in(k), SystemLabel::new(ancilla_name(len + 1), ranks[len])],
                )
                .unwrap();
                ops.insert((seq.clone(), Target::Party(k)), ket.outer());
                let mut s = seq.clone();
                s.push(k);
                next_seqs.push(s);
            }
        }
        sequences.extend(next_seqs);
    }
    // final layer per full order
    for seq in sequences.iter().filter(|s| s.len() == n) {
        let kp = seq[n - 1];
        let vin = dims.d_out[kp - 1] * ranks[n - 1];
        let env = vin.div_ceil(dims.d_f);
        let v = haar_isometry(rng, dims.d_f * env, vin);
        let ket = choi_vector(
            &v,
            vec![dims.party_out(kp), SystemLabel::new(ancilla_name(n), ranks[n - 1])],
            vec![dims.future(), SystemLabel::new("env", env)],
        )
        .unwrap();
        ops.insert((seq.clone(), Target::Future), ket.outer().partial_trace(&["env"]).unwrap());
    }
    QcCcDescription::new(dims.clone(), ranks.to_vec(), ops).unwrap()
}

/// Rank schedule satisfying the QC-QC isometry size constraints
/// `(N-n) d r_{n+1} >= n d r_n`, starting from `r_1`.
pub fn qcqc_rank_schedule(n: usize, r1: usize) -> Vec<usize> {
    let mut ranks = vec![r1];
    for level in 1..n {
        let prev = ranks[level - 1];
        let needed = (level * prev).div_ceil(n - level);
        ranks.push(needed.max(prev));
    }
    ranks
}

/// Random quantum-controlled circuit. `ranks` must satisfy the size
/// constraints of [`qcqc_rank_schedule`]; the final ancilla dimension is
/// chosen minimal.
pub fn random_qcqc(dims: &ProcessDims, ranks: &[usize], seed: u64) -> QcQcDescription {
    let mut rng = seeded_rng(seed);
    random_qcqc_with(dims, ranks, &mut rng)
}

pub fn random_qcqc_with(dims: &ProcessDims, ranks: &[usize], rng: &mut ChaCha8Rng) -> QcQcDescription {
    let n = dims.n_parties;
    assert_eq!(ranks.len(), n);
    let mut ops: BTreeMap<QcqcKey, LabeledKet> = BTreeMap::new();
    // first layer: P -> direct sum over k1 of A_{k1}^I (x) a1
    {
        let out_sizes: Vec<usize> = (1..=n).map(|k| dims.d_in[k - 1] * ranks[0]).collect();
        let total: usize = out_sizes.iter().sum();
        assert!(total >= dims.d_p, "first-layer rank too small");
        let u = haar_isometry(rng, total, dims.d_p);
        for k1 in 1..=n {
            let vk = block(&u, &out_sizes, &[dims.d_p], k1 - 1, 0);
            let ket = choi_vector(
                &vk,
                vec![dims.past()],
                vec![dims.party_in(k1), SystemLabel::new(ancilla_name(1), ranks[0])],
            )
            .unwrap();
            ops.insert(QcqcKey::first(k1), ket);
        }
    }
    // one isometry per set K_n (1 <= |K_n| <= N): from the direct sum of
    // (K_n\k, k) input slots to the direct sum of (K_n, l) output slots
    for mask in 1u32..(1 << n) {
        let members = mask_members(mask, n);
        let size = members.len();
        let in_sizes: Vec<usize> = members.iter().map(|&k| dims.d_out[k - 1] * ranks[size - 1]).collect();
        let total_in: usize = in_sizes.iter().sum();
        let (out_labels, out_sizes): (Vec<Target>, Vec<usize>) = if size == n {
            // minimal final ancilla that fits the isometry
            let af = total_in.div_ceil(dims.d_f);
            (vec![Target::Future], vec![dims.d_f * af])
        } else {
            let ls: Vec<usize> = (1..=n).filter(|l| mask & (1 << (l - 1)) == 0).collect();
            (
                ls.iter().map(|&l| Target::Party(l)).collect(),
                ls.iter().map(|&l| dims.d_in[l - 1] * ranks[size]).collect(),
            )
        };
        let total_out: usize = out_sizes.iter().sum();
        assert!(total_out >= total_in, "rank schedule too small for set {members:?}");
        let u = haar_isometry(rng, total_out, total_in);
        for (ci, &k) in members.iter().enumerate() {
            let prev_members: Vec<usize> = members.iter().copied().filter(|&m| m != k).collect();
            let in_factors = vec![
                dims.party_out(k),
                SystemLabel::new(ancilla_name(size), ranks[size - 1]),
            ];
            for (bi, target) in out_labels.iter().enumerate() {
                let vk = block(&u, &out_sizes, &in_sizes, bi, ci);
                match target {
                    Target::Party(l) => {
                        let ket = choi_vector(
                            &vk,
                            in_factors.clone(),
                            vec![
                                dims.party_in(*l),
                                SystemLabel::new(ancilla_name(size + 1), ranks[size]),
                            ],
                        )
                        .unwrap();
                        ops.insert(QcqcKey::mid(&prev_members, k, *l), ket);
                    }
                    Target::Future => {
                        let af = out_sizes[bi] / dims.d_f;
                        let ket = choi_vector(
                            &vk,
                            in_factors.clone(),
                            vec![dims.future(), SystemLabel::new("aF", af)],
                        )
                        .unwrap();
                        ops.insert(QcqcKey::last(&prev_members, k), ket);
                    }
                }
            }
        }
    }
    let af = {
        let total_in: usize = (1..=n).map(|k| dims.d_out[k - 1] * ranks[n - 1]).sum();
        total_in.div_ceil(dims.d_f)
    };
    QcQcDescription::new(dims.clone(), ranks.to_vec(), af, ops).unwrap()
}

/// Random instrument for one party: `n_settings` settings, each with
/// `n_outcomes` CP maps summing to a CPTP map.
pub fn random_instrument(
    d_in: usize,
    d_out: usize,
    n_settings: usize,
    n_outcomes: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<LabeledOperator>> {
    let env = 2usize;
    (0..n_settings)
        .map(|_| {
            let u = haar_isometry(rng, d_out * env * n_outcomes, d_in);
            (0..n_outcomes)
                .map(|a| {
                    // slice rows (out, env, a)
                    let mut v = vec![c(0.0, 0.0); d_out * env * d_in];
                    for o in 0..d_out {
                        for e in 0..env {
                            for i in 0..d_in {
                                v[(o * env + e) * d_in + i] =
                                    u[((o * env + e) * n_outcomes + a) * d_in + i];
                            }
                        }
                    }
                    let ket = choi_vector(
                        &v,
                        vec![SystemLabel::new(in_name(k), d_in)],
                        vec![SystemLabel::new(out_name(k), d_out), SystemLabel::new("env", env)],
                    )
                    .unwrap();
                    ket.outer().partial_trace(&["env"]).unwrap()
                })
                .collect()
        })
        .collect()
}
