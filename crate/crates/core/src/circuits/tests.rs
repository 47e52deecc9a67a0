use super::gallery::*;
use super::random::*;
use super::*;
use crate::process::{is_valid_process, VALIDITY_TOL};
use crate::random;
use crate::tensor::{max_entangled, LabeledKet};

fn c(re: f64, im: f64) -> Cplx {
    Cplx::new(re, im)
}

fn lbl(name: &str, dim: usize) -> SystemLabel {
    SystemLabel::new(name, dim)
}

fn assert_close(a: &LabeledOperator, b: &LabeledOperator, tol: f64, what: &str) {
    let names: Vec<&str> = a.factors().iter().map(|f| f.name.as_str()).collect();
    let d = a.sub(&b.reorder(&names).unwrap()).unwrap().max_abs();
    assert!(d <= tol, "{what}: operators differ by {d:.3e} (tol {tol:.1e})");
}

#[test]
fn sequential_matches_formula() {
    let desc = sequential(2, 2);
    assert!(desc.tp_check().unwrap().passes());
    let w = desc.build().unwrap();
    let formula = max_entangled(lbl("P", 2), lbl("A1I", 2))
        .unwrap()
        .tensor(&max_entangled(lbl("A1O", 2), lbl("A2I", 2)).unwrap())
        .unwrap()
        .tensor(&max_entangled(lbl("A2O", 2), lbl("F", 2)).unwrap())
        .unwrap()
        .outer();
    assert_close(w.op(), &formula, 1e-13, "sequential");
    assert!(is_valid_process(&w, VALIDITY_TOL).unwrap().is_valid());
}

#[test]
fn parallel_par_and_both_fo_realizations_agree() {
    let par = parallel(2);
    assert!(par.tp_check().unwrap().passes());
    let w_par = par.build().unwrap();
    let w12 = parallel_fo(2, [1, 2]).build().unwrap();
    let w21 = parallel_fo(2, [2, 1]).build().unwrap();
    assert_close(w_par.op(), w12.op(), 1e-12, "PAR vs FO(1,2)");
    assert_close(w_par.op(), w21.op(), 1e-12, "PAR vs FO(2,1)");
    // direct formula: |1>><<1|^{P1 A1I} (x) |1>><<1|^{P2 A2I} (x) ...
    let formula = max_entangled(lbl("P1", 2), lbl("A1I", 2))
        .unwrap()
        .tensor(&max_entangled(lbl("P2", 2), lbl("A2I", 2)).unwrap())
        .unwrap()
        .tensor(&max_entangled(lbl("A1O", 2), lbl("F1", 2)).unwrap())
        .unwrap()
        .tensor(&max_entangled(lbl("A2O", 2), lbl("F2", 2)).unwrap())
        .unwrap()
        .merge_factors(&["P1", "P2"], "P")
        .unwrap()
        .merge_factors(&["F1", "F2"], "F")
        .unwrap()
        .outer();
    assert_close(w_par.op(), &formula, 1e-12, "PAR vs formula");
}

/// Direct construction of W_CS as in the paper: the incoherent sum of the
/// two order chains with the control recorded in `Pc`/`Fc`.
fn w_cs_formula(d_t: usize) -> LabeledOperator {
    let mut w: Option<LabeledOperator> = None;
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let term = LabeledKet::basis(lbl("Pc", 2), k1 - 1)
            .unwrap()
            .outer()
            .tensor(&max_entangled(lbl("Pt", d_t), lbl(&in_name(k1), d_t)).unwrap().outer())
            .unwrap()
            .tensor(&max_entangled(lbl(&out_name(k1), d_t), lbl(&in_name(k2), d_t)).unwrap().outer())
            .unwrap()
            .tensor(&max_entangled(lbl(&out_name(k2), d_t), lbl("Ft", d_t)).unwrap().outer())
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Fc", 2), k1 - 1).unwrap().outer())
            .unwrap();
        w = Some(match w {
            None => term,
            Some(a) => a.add(&term).unwrap(),
        });
    }
    w.unwrap()
        .merge_factors(&["Pt", "Pc"], "P")
        .unwrap()
        .merge_factors(&["Ft", "Fc"], "F")
        .unwrap()
}

#[test]
fn classical_switch_matches_formula() {
    let desc = classical_switch(2);
    assert!(desc.tp_check().unwrap().passes());
    let w = desc.build().unwrap();
    assert_close(w.op(), &w_cs_formula(2), 1e-12, "W_CS");
    assert!(is_valid_process(&w, VALIDITY_TOL).unwrap().is_valid());
}

#[test]
fn quantum_switch_matches_process_tests_construction() {
    let desc = quantum_switch(2);
    assert!(desc.tp_check().unwrap().passes());
    let w = desc.build().unwrap();
    let direct = crate::process::tests::switch_w(2);
    assert_close(w.op(), direct.op(), 1e-12, "W_QS");
}

#[test]
fn switch_traced_control_equals_classical_switch() {
    let qs = quantum_switch(2).build().unwrap();
    let cs = classical_switch(2).build().unwrap();
    let split = |op: &LabeledOperator| {
        op.split_factor("F", &[lbl("Ft", 2), lbl("Fc", 2)])
            .unwrap()
            .partial_trace(&["Fc"])
            .unwrap()
    };
    assert_close(&split(qs.op()), &split(cs.op()), 1e-12, "Tr_Fc W_QS = Tr_Fc W_CS");
}

#[test]
fn scaled_switch_first_condition_residual() {
    let mut desc = quantum_switch(2);
    let key = QcqcKey::first(1);
    let v = desc.ops[&key].scale(c(1.01, 0.0));
    desc.ops.insert(key, v);
    let report = desc.tp_check().unwrap();
    let first = report
        .residuals
        .iter()
        .find(|(name, _)| name == "n=0")
        .map(|(_, r)| *r)
        .unwrap();
    assert!(
        (first - 0.0201).abs() < 1e-6,
        "P-block residual should be 1.01^2 - 1 = 0.0201, got {first}"
    );
}

#[test]
fn conditioned_switch_is_rank_one_and_matches_formula() {
    let psi = [c(0.6, 0.0), c(0.0, 0.8)];
    let desc = conditioned_switch(&psi);
    assert!(desc.tp_check().unwrap().passes());
    let w = desc.build().unwrap();
    // rank 1
    let (vals, _) = w.op().herm_eigen();
    let big: Vec<f64> = vals.iter().copied().filter(|v| v.abs() > 1e-10).collect();
    assert_eq!(big.len(), 1);
    // direct formula for |w_QS^{+,psi}>
    let amp = 1.0 / 2.0f64.sqrt();
    let mut ket: Option<LabeledKet> = None;
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let term = LabeledKet::new(vec![lbl(&in_name(k1), 2)], psi.to_vec())
            .unwrap()
            .scale(c(amp, 0.0))
            .tensor(&max_entangled(lbl(&out_name(k1), 2), lbl(&in_name(k2), 2)).unwrap())
            .unwrap()
            .tensor(&max_entangled(lbl(&out_name(k2), 2), lbl("Ft", 2)).unwrap())
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Fc", 2), k1 - 1).unwrap())
            .unwrap();
        ket = Some(match ket {
            None => term,
            Some(a) => a.add(&term).unwrap(),
        });
    }
    let formula = ket
        .unwrap()
        .merge_factors(&["Ft", "Fc"], "F")
        .unwrap()
        .tensor(&LabeledKet::basis(lbl("P", 1), 0).unwrap())
        .unwrap()
        .outer();
    assert_close(w.op(), &formula, 1e-12, "W_QS^{+,psi}");
    assert!(is_valid_process(&w, VALIDITY_TOL).unwrap().is_valid());
}

#[test]
fn two_switch_equals_quantum_switch() {
    let ns = n_switch(2, 2).build().unwrap();
    let qs = quantum_switch(2).build().unwrap();
    let d = ns.op().sub(qs.op()).unwrap().frob_norm();
    assert!(d <= 1e-10, "2-switch vs switch: {d:.3e}");
}

#[test]
fn n_switch_three_parties_is_valid() {
    // d_t = 1 keeps the check cheap while exercising all 3! = 6 branches
    let desc = n_switch(3, 1);
    assert!(desc.tp_check().unwrap().passes());
    let w = desc.build().unwrap();
    assert!(is_valid_process(&w, VALIDITY_TOL).unwrap().is_valid());
}

#[test]
fn dynamical_qcqc_normalization_and_validity() {
    let psi = [c(1.0, 0.0), c(0.0, 0.0)];
    let desc = dynamical_qcqc(&psi);
    assert!(desc.tp_check().unwrap().passes(), "{:?}", desc.tp_check().unwrap().residuals);
    let w = desc.build().unwrap();
    assert!((w.op().trace().re - 8.0).abs() < 1e-10, "Tr W = d_P prod d_O = 8");
    assert!(is_valid_process(&w, VALIDITY_TOL).unwrap().is_valid());
}

#[test]
fn dynamical_family_specializes_to_main_example() {
    // V_COPY: |i> -> |i>|i>; rows (A_{k2}I, alpha), cols A_{k1}O
    let mut v_copy = vec![c(0.0, 0.0); 4 * 2];
    for i in 0..2 {
        v_copy[(i * 2 + i) * 2 + i] = c(1.0, 0.0);
    }
    // V_CNOT: |i>|j> -> |i>|i xor j>; rows (A_{k3}I, alpha_3), cols (A_{k2}O, alpha')
    let mut v_cnot = vec![c(0.0, 0.0); 4 * 4];
    for i in 0..2 {
        for j in 0..2 {
            v_cnot[(i * 2 + (i ^ j)) * 4 + (i * 2 + j)] = c(1.0, 0.0);
        }
    }
    let family = dynamical_qcqc_family(
        &[v_copy.clone(), v_copy.clone(), v_copy.clone()],
        &[v_cnot.clone(), v_cnot.clone(), v_cnot.clone()],
        2,
        2,
    )
    .unwrap();
    assert!(family.tp_check().unwrap().passes());
    let w_fam = family.build().unwrap();
    assert!(is_valid_process(&w_fam, VALIDITY_TOL).unwrap().is_valid());

    // condition on |psi>^{Pt} (x) (1/sqrt3) sum_k |k>^{Pc}, trace F
    let psi = [c(0.5, 0.5), c(0.5, -0.5)];
    let s = 1.0 / 3.0f64.sqrt();
    let prep = LabeledKet::new(vec![lbl("Pt", 2)], psi.to_vec())
        .unwrap()
        .tensor(&LabeledKet::new(vec![lbl("Pc", 3)], vec![c(s, 0.0); 3]).unwrap())
        .unwrap()
        .merge_factors(&["Pt", "Pc"], "P")
        .unwrap()
        .outer();
    let reduced = w_fam.condition_on_past(&prep).unwrap().trace_future().unwrap();
    let main = dynamical_qcqc(&psi).build().unwrap();
    assert_close(reduced.op(), main.op(), 1e-10, "family -> main example");
}

#[test]
fn non_isometric_family_input_rejected() {
    let mut v_bad = vec![c(0.0, 0.0); 4 * 2];
    v_bad[0] = c(1.0, 0.0);
    v_bad[5] = c(0.5, 0.0); // not an isometry
    let v_cnot = {
        let mut v = vec![c(0.0, 0.0); 16];
        for i in 0..2 {
            for j in 0..2 {
                v[(i * 2 + (i ^ j)) * 4 + (i * 2 + j)] = c(1.0, 0.0);
            }
        }
        v
    };
    let err = dynamical_qcqc_family(
        &[v_bad.clone(), v_bad.clone(), v_bad],
        &[v_cnot.clone(), v_cnot.clone(), v_cnot],
        2,
        2,
    );
    assert!(matches!(err, Err(GalleryError::NotIsometric(_, _))));
}

/// Embeds a pure fixed-order description into a classically-controlled one
/// with zero operators on every off-order branch.
fn fo_as_cc(fo: &QcFoDescription) -> QcCcDescription {
    let n = fo.dims.n_parties;
    let mut ops = BTreeMap::new();
    let cc_probe = QcCcDescription {
        dims: fo.dims.clone(),
        ancilla_dims: fo.ancilla_dims.clone(),
        ops: BTreeMap::new(),
    };
    for seq in cc_probe.all_sequences() {
        for target in cc_probe.continuations(&seq) {
            let on_path = seq.iter().enumerate().all(|(i, &k)| fo.order[i] == k);
            let next_on_path = match target {
                Target::Party(k) => on_path && seq.len() < n && fo.order[seq.len()] == k,
                Target::Future => on_path,
            };
            let op = if next_on_path {
                fo.ops[seq.len()].clone()
            } else {
                LabeledOperator::zeros(cc_probe.slot_factors(&seq, target)).unwrap()
            };
            ops.insert((seq.clone(), target), op);
        }
    }
    QcCcDescription::new(fo.dims.clone(), fo.ancilla_dims.clone(), ops).unwrap()
}

/// Embeds a pure fixed-order description into a quantum-controlled one with
/// zero kets off the order path. Requires rank-1 internal ops.
fn fo_as_qc(fo: &QcFoDescription, kets: &[LabeledKet], alpha_f_dim: usize) -> QcQcDescription {
    let n = fo.dims.n_parties;
    let mut path_keys = vec![QcqcKey::first(fo.order[0])];
    for slot in 1..n {
        path_keys.push(QcqcKey::mid(&fo.order[..slot - 1], fo.order[slot - 1], fo.order[slot]));
    }
    path_keys.push(QcqcKey::last(&fo.order[..n - 1], fo.order[n - 1]));
    let probe = QcQcDescription {
        dims: fo.dims.clone(),
        ancilla_dims: fo.ancilla_dims.clone(),
        alpha_f_dim,
        ops: BTreeMap::new(),
    };
    let mut ops = BTreeMap::new();
    for key in probe.all_keys() {
        let ket = match path_keys.iter().position(|k| k == &key) {
            Some(slot) => kets[slot].clone(),
            None => LabeledKet::zeros(probe.slot_factors(&key)).unwrap(),
        };
        ops.insert(key, ket);
    }
    QcQcDescription::new(fo.dims.clone(), fo.ancilla_dims.clone(), alpha_f_dim, ops).unwrap()
}

#[test]
fn class_inclusions_fo_cc_qc_builds_agree() {
    let mut rng = random::rng(77);
    for trial in 0..5 {
        let dims = ProcessDims::new(2, vec![2, 2], vec![2, 2], 4);
        let order = if trial % 2 == 0 { vec![1, 2] } else { vec![2, 1] };
        let ranks = vec![1usize, 2];
        // pure last layer: choose d_F = d^O * r_N so the env is trivial
        let fo = {
            let mut d = random_qcfo_with(&dims, &order, &ranks, &mut rng);
            // rebuild the last op as a pure isometry into F
            let kn = order[1];
            let v = random::haar_isometry(&mut rng, 4, 4);
            let ket = crate::tensor::choi_vector(
                &v,
                vec![d.dims.party_out(kn), lbl("a2", 2)],
                vec![d.dims.future()],
            )
            .unwrap();
            d.ops[2] = ket.outer();
            d
        };
        assert!(fo.tp_check().unwrap().passes());
        let w_fo = fo.build().unwrap();

        let cc = fo_as_cc(&fo);
        assert!(cc.tp_check().unwrap().passes());
        let w_cc = cc.build().unwrap();
        assert!(w_fo.op().sub(w_cc.op()).unwrap().frob_norm() <= 1e-10);

        // extract the kets of the rank-1 FO ops
        let kets: Vec<LabeledKet> = fo
            .ops
            .iter()
            .map(|m| {
                let (vals, vecs) = m.herm_eigen();
                let i = vals
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| i)
                    .unwrap();
                vecs[i].scale(c(vals[i].sqrt(), 0.0))
            })
            .collect();
        let mut qc_kets = kets.clone();
        // last ket gains the trivial aF factor
        qc_kets[2] = qc_kets[2].tensor(&LabeledKet::basis(lbl("aF", 1), 0).unwrap()).unwrap();
        let qc = fo_as_qc(&fo, &qc_kets, 1);
        assert!(qc.tp_check().unwrap().passes());
        let w_qc = qc.build().unwrap();
        assert!(
            w_fo.op().sub(w_qc.op()).unwrap().frob_norm() <= 1e-10,
            "FO embedded in QC differs"
        );
    }
}

#[test]
fn decohered_switch_control_gives_classical_switch() {
    let qs = quantum_switch(2);
    let cc = decohere_control(&qs).unwrap();
    let w_cc = cc.build().unwrap();
    let w_cs = classical_switch(2).build().unwrap();
    assert_close(w_cc.op(), w_cs.op(), 1e-12, "decohered QS = CS");
}

#[test]
fn random_descriptions_pass_tp_and_validity() {
    for seed in 0..3u64 {
        let dims = ProcessDims::new(2, vec![2, 2], vec![2, 2], 2);
        let fo = random_qcfo(&dims, &[2, 1], &[1, 2], seed);
        assert!(fo.tp_check().unwrap().passes());
        assert!(is_valid_process(&fo.build().unwrap(), VALIDITY_TOL).unwrap().is_valid());

        let cc = random_qccc(&dims, &[1, 2], seed + 10);
        assert!(cc.tp_check().unwrap().passes());
        assert!(is_valid_process(&cc.build().unwrap(), VALIDITY_TOL).unwrap().is_valid());

        let ranks = qcqc_rank_schedule(2, 1);
        let qc = random_qcqc(&dims, &ranks, seed + 20);
        assert!(qc.tp_check().unwrap().passes());
        assert!(is_valid_process(&qc.build().unwrap(), VALIDITY_TOL).unwrap().is_valid());

        // three parties, trivial past/future
        let dims3 = ProcessDims::new(1, vec![2; 3], vec![2; 3], 1);
        let ranks3 = qcqc_rank_schedule(3, 1);
        let qc3 = random_qcqc(&dims3, &ranks3, seed + 30);
        assert!(qc3.tp_check().unwrap().passes(), "{:?}", qc3.tp_check().unwrap().residuals);
        assert!(is_valid_process(&qc3.build().unwrap(), VALIDITY_TOL).unwrap().is_valid());
    }
}

#[test]
fn probabilistic_sets_sum_to_valid_processes() {
    // basis measurement after a sequential circuit
    let p = pqcfo_basis_measurement(2);
    assert!(p.tp_check().unwrap().passes());
    let set = p.build().unwrap();
    assert_eq!(set.ws.len(), 2);
    let sum = set.sum().unwrap();
    assert!(is_valid_process(&sum, VALIDITY_TOL).unwrap().is_valid());
    let seq = sequential(2, 2).build().unwrap();
    assert_close(sum.op(), seq.op(), 1e-12, "sum of basis readout = sequential W");

    // switch +/- measurement
    let p = pqcqc_switch_pm(2);
    assert!(p.tp_check().unwrap().passes());
    let set = p.build().unwrap();
    assert_eq!(set.ws.len(), 2);
    for w in &set.ws {
        let (vals, _) = w.herm_eigen();
        let rank = vals.iter().filter(|v| v.abs() > 1e-10).count();
        assert_eq!(rank, 1, "W_QS^[pm] should be rank one");
    }
    let sum = set.sum().unwrap();
    assert!(is_valid_process(&sum, VALIDITY_TOL).unwrap().is_valid());
    // sum equals Tr_{Fc} W_QS
    let qs = quantum_switch(2).build().unwrap();
    let traced = qs
        .op()
        .split_factor("F", &[lbl("Ft", 2), lbl("Fc", 2)])
        .unwrap()
        .partial_trace(&["Fc"])
        .unwrap()
        .rename_factor("Ft", "F")
        .unwrap();
    assert_close(sum.op(), &traced, 1e-12, "W+ + W- = Tr_Fc W_QS");

    // order readout on the classical switch
    let p = pqccc_order_readout(2);
    assert!(p.tp_check().unwrap().passes());
    let set = p.build().unwrap();
    let sum = set.sum().unwrap();
    let cs = classical_switch(2);
    assert_close(sum.op(), cs.build().unwrap().op(), 1e-12, "order readout sums to W_CS");
    // each outcome equals the per-order block of the decomposition
    let dec = cs.decomposition().unwrap();
    assert_close(&set.ws[0], &dec.tops[&vec![1, 2]], 1e-12, "W^[r=(1,2)]");
    assert_close(&set.ws[1], &dec.tops[&vec![2, 1]], 1e-12, "W^[r=(2,1)]");
}

#[test]
fn pad_dimensions_identity_and_lcm() {
    let mut rng = random::rng(55);
    // already equal: identity transformation
    let dims = ProcessDims::new(1, vec![2, 2], vec![2, 2], 1);
    let w = crate::process::random_valid_process(&dims, &mut rng, 0.3).unwrap();
    let padded = super::pad::pad_process(&w, &[2, 2], &[2, 2]).unwrap();
    assert_close(padded.op(), w.op(), 0.0, "identity padding");

    // d_I = (2,4) -> common 4 via a dim-2 pad on party 1
    let dims = ProcessDims::new(1, vec![2, 4], vec![2, 2], 1);
    let w = crate::process::random_valid_process(&dims, &mut rng, 0.3).unwrap();
    let padded = super::pad::pad_process(&w, &[4, 4], &[2, 2]).unwrap();
    assert_eq!(padded.dims().d_in, vec![4, 4]);
    assert!(is_valid_process(&padded, VALIDITY_TOL).unwrap().is_valid());

    // Born probabilities agree before/after padding
    let a1 = crate::tensor::choi_matrix(
        &random::random_cptp_kraus(&mut rng, 2, 2, 2),
        vec![lbl("A1I", 2)],
        vec![lbl("A1O", 2)],
    )
    .unwrap();
    let a2 = crate::tensor::choi_matrix(
        &random::random_cptp_kraus(&mut rng, 4, 2, 2),
        vec![lbl("A2I", 4)],
        vec![lbl("A2O", 2)],
    )
    .unwrap();
    let p_before = a1
        .tensor(&a2)
        .unwrap()
        .link(w.op())
        .unwrap();
    let a1p = super::pad::pad_party_op(&a1, 1, 2, 2, 4, 2).unwrap();
    let p_after = a1p.tensor(&a2).unwrap().link(padded.op()).unwrap();
    assert!(
        (p_before.get(0, 0) - p_after.get(0, 0)).norm() < 1e-12,
        "Born value changed under padding"
    );
}

#[test]
fn non_divisible_pad_target_rejected() {
    let mut rng = random::rng(56);
    let dims = ProcessDims::new(1, vec![2, 3], vec![2, 2], 1);
    let w = crate::process::random_valid_process(&dims, &mut rng, 0.3).unwrap();
    assert!(super::pad::pad_process(&w, &[4, 4], &[2, 2]).is_err());
}
