use super::*;
use crate::random;
use crate::tensor::{max_entangled, LabeledKet, LabeledOperator, SystemLabel};

fn lbl(name: &str, dim: usize) -> SystemLabel {
    SystemLabel::new(name, dim)
}

fn c(re: f64, im: f64) -> Cplx {
    Cplx::new(re, im)
}

/// Quantum switch process matrix built directly from its process vector,
/// with `P = Pt (x) Pc` and `F = Ft (x) Fc` merged into single factors.
pub fn switch_w(d_t: usize) -> ProcessMatrix {
    let mut w: Option<LabeledKet> = None;
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let term = LabeledKet::basis(lbl("Pc", 2), k1 - 1)
            .unwrap()
            .tensor(&max_entangled(lbl("Pt", d_t), lbl(&in_name(k1), d_t)).unwrap())
            .unwrap()
            .tensor(&max_entangled(lbl(&out_name(k1), d_t), lbl(&in_name(k2), d_t)).unwrap())
            .unwrap()
            .tensor(&max_entangled(lbl(&out_name(k2), d_t), lbl("Ft", d_t)).unwrap())
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Fc", 2), k1 - 1).unwrap())
            .unwrap();
        w = Some(match w {
            None => term,
            Some(acc) => acc.add(&term).unwrap(),
        });
    }
    let ket = w
        .unwrap()
        .merge_factors(&["Pt", "Pc"], "P")
        .unwrap()
        .merge_factors(&["Ft", "Fc"], "F")
        .unwrap();
    let dims = ProcessDims::new(2 * d_t, vec![d_t; 2], vec![d_t; 2], 2 * d_t);
    ProcessMatrix::new(dims, ket.outer()).unwrap()
}

#[test]
fn trace_replace_identity_fixed_point() {
    let id = LabeledOperator::identity(vec![lbl("X", 2), lbl("Y", 3)]).unwrap();
    let out = trace_out_and_replace(&id, "Y").unwrap();
    assert!(out.sub(&id).unwrap().max_abs() < 1e-15);
}

#[test]
fn trace_replace_product_state() {
    let mut rng = random::rng(21);
    let rho = LabeledOperator::new(vec![lbl("X", 2)], random::random_density(&mut rng, 2)).unwrap();
    let sigma = LabeledOperator::new(vec![lbl("Y", 3)], random::random_density(&mut rng, 3)).unwrap();
    let prod = rho.tensor(&sigma).unwrap();
    let out = trace_out_and_replace(&prod, "Y").unwrap();
    let expect = rho
        .tensor(&LabeledOperator::identity(vec![lbl("Y", 3)]).unwrap().scale(c(1.0 / 3.0, 0.0)))
        .unwrap();
    assert!(out.sub(&expect).unwrap().max_abs() < 1e-14);
}

#[test]
fn trace_replace_is_projector() {
    let mut rng = random::rng(22);
    for _ in 0..100 {
        let g = random::gaussian_matrix(&mut rng, 6, 6);
        let mut h = vec![c(0.0, 0.0); 36];
        for r in 0..6 {
            for cc in 0..6 {
                h[r * 6 + cc] = (g[r * 6 + cc] + g[cc * 6 + r].conj()) * c(0.5, 0.0);
            }
        }
        let m = LabeledOperator::new(vec![lbl("X", 2), lbl("Y", 3)], h).unwrap();
        let once = trace_out_and_replace(&m, "X").unwrap();
        let twice = trace_out_and_replace(&once, "X").unwrap();
        assert!(twice.sub(&once).unwrap().max_abs() <= 1e-13);
        // trace preserving
        assert!((once.trace() - m.trace()).norm() < 1e-12);
    }
}

#[test]
fn trace_replace_is_linear() {
    let mut rng = random::rng(23);
    let a = LabeledOperator::new(vec![lbl("X", 2), lbl("Y", 2)], random::gaussian_matrix(&mut rng, 4, 4)).unwrap();
    let b = LabeledOperator::new(vec![lbl("X", 2), lbl("Y", 2)], random::gaussian_matrix(&mut rng, 4, 4)).unwrap();
    let lhs = trace_out_and_replace(&a.add(&b.scale(c(2.5, 0.0))).unwrap(), "Y").unwrap();
    let rhs = trace_out_and_replace(&a, "Y")
        .unwrap()
        .add(&trace_out_and_replace(&b, "Y").unwrap().scale(c(2.5, 0.0)))
        .unwrap();
    assert!(lhs.sub(&rhs).unwrap().max_abs() < 1e-13);
}

#[test]
fn switch_is_valid_process() {
    let w = switch_w(2);
    let report = is_valid_process(&w, VALIDITY_TOL).unwrap();
    assert!(report.psd_ok, "PSD failed: min eig {}", report.min_eigenvalue);
    assert!(report.trace_ok, "trace residual {}", report.trace_residual);
    assert!(report.subspace_ok, "subspace residuals: {:?}", report.residuals);
}

#[test]
fn white_noise_is_valid() {
    let dims = ProcessDims::new(3, vec![2, 3], vec![2, 2], 2);
    let w = ProcessMatrix::white_noise(&dims);
    let report = is_valid_process(&w, VALIDITY_TOL).unwrap();
    assert!(report.is_valid());
}

#[test]
fn relabeled_switch_fails_subspace() {
    let w = switch_w(2);
    let op = w
        .op()
        .rename_factor("A1I", "tmp")
        .unwrap()
        .rename_factor("A1O", "A1I")
        .unwrap()
        .rename_factor("tmp", "A1O")
        .unwrap();
    let swapped = ProcessMatrix::new(w.dims().clone(), op).unwrap();
    let report = is_valid_process(&swapped, VALIDITY_TOL).unwrap();
    assert!(!report.subspace_ok);
}

/// `W_{P->A1->A2->F}`: identity channels chained through both parties.
pub fn sequential_w(d: usize) -> ProcessMatrix {
    let w = max_entangled(lbl("P", d), lbl("A1I", d))
        .unwrap()
        .tensor(&max_entangled(lbl("A1O", d), lbl("A2I", d)).unwrap())
        .unwrap()
        .tensor(&max_entangled(lbl("A2O", d), lbl("F", d)).unwrap())
        .unwrap();
    let dims = ProcessDims::new(d, vec![d; 2], vec![d; 2], d);
    ProcessMatrix::new(dims, w.outer()).unwrap()
}

#[test]
fn reduced_fo_sequential_first_slot() {
    let w = sequential_w(2);
    let red = w.reduced_fo(&[1, 2], 1).unwrap();
    let expect = max_entangled(lbl("P", 2), lbl("A1I", 2)).unwrap().outer();
    let names: Vec<&str> = red.factors().iter().map(|f| f.name.as_str()).collect();
    let expect = expect.reorder(&names).unwrap();
    assert!(red.sub(&expect).unwrap().max_abs() < 1e-13);
}

#[test]
fn reduced_fo_n_plus_one_is_w() {
    let w = switch_w(2);
    let red = w.reduced_fo(&[2, 1], 3).unwrap();
    assert!(red.sub(w.op()).unwrap().max_abs() < 1e-15);
}

#[test]
fn reduced_fo_chain_passes_for_sequential_fails_generic() {
    // built QC-FO: Tr_{A1I} W_(1) = 1^P
    let w = sequential_w(2);
    let w1 = w.reduced_fo(&[1, 2], 1).unwrap();
    let tr = w1.partial_trace(&["A1I"]).unwrap();
    let idp = LabeledOperator::identity(vec![lbl("P", 2)]).unwrap();
    assert!(tr.sub(&idp).unwrap().max_abs() < 1e-12);

    // a generic Hermitian matrix (not a valid process) fails it
    let mut rng = random::rng(41);
    let g = random::gaussian_matrix(&mut rng, 16, 16);
    let mut h = vec![c(0.0, 0.0); 256];
    for r in 0..16 {
        for cc in 0..16 {
            h[r * 16 + cc] = (g[r * 16 + cc] + g[cc * 16 + r].conj()) * c(0.5, 0.0);
        }
    }
    let dims = ProcessDims::new(2, vec![2], vec![2], 2);
    let generic = ProcessMatrix::new(dims, LabeledOperator::new(dims_factors(), h).unwrap()).unwrap();
    let g1 = generic.reduced_fo(&[1], 1).unwrap();
    let tr = g1.partial_trace(&["A1I"]).unwrap();
    let idp = LabeledOperator::identity(vec![lbl("P", 2)]).unwrap();
    assert!(tr.sub(&idp).unwrap().max_abs() > 1e-3);

    // the switch is in no fixed order: the last condition
    // Tr_F W = W_(N) (x) 1^{A_N^O} fails for both orders
    let qs = switch_w(2);
    for order in [[1usize, 2], [2usize, 1]] {
        let lhs = qs.op().partial_trace(&["F"]).unwrap();
        let wn = qs.reduced_fo(&order, 2).unwrap();
        let rhs = wn
            .tensor(&LabeledOperator::identity(vec![lbl(&out_name(order[1]), 2)]).unwrap())
            .unwrap();
        let names: Vec<&str> = lhs.factors().iter().map(|f| f.name.as_str()).collect();
        let rhs = rhs.reorder(&names).unwrap();
        let resid = lhs.sub(&rhs).unwrap().max_abs();
        assert!(resid > 1e-3, "switch should not satisfy the FO top condition for order {order:?}");
    }
}

fn dims_factors() -> Vec<SystemLabel> {
    vec![lbl("P", 2), lbl("A1I", 2), lbl("A1O", 2), lbl("F", 2)]
}

#[test]
fn reduced_subset_full_mask_traces_f_only() {
    let w = switch_w(2);
    let full_mask = 0b11;
    let red = w.reduced_pkf(full_mask).unwrap();
    assert!(red.sub(w.op()).unwrap().max_abs() < 1e-15);
    let red_pk = w.reduced_pk(full_mask).unwrap();
    let expect = w.op().partial_trace(&["F"]).unwrap();
    assert!(red_pk.sub(&expect).unwrap().max_abs() < 1e-15);
}

#[test]
fn reduced_p_is_total_out_identity() {
    let mut rng = random::rng(31);
    let dims = ProcessDims::new(2, vec![2, 2], vec![2, 2], 2);
    for _ in 0..5 {
        let w = random_valid_process(&dims, &mut rng, 0.2).unwrap();
        let wp = w.reduced_p().unwrap();
        let expect = LabeledOperator::identity(vec![lbl("P", 2)])
            .unwrap()
            .scale(c(dims.total_out() as f64, 0.0));
        assert!(
            wp.sub(&expect).unwrap().max_abs() < 1e-9,
            "W^[P] != d_O 1^P"
        );
    }
}

#[test]
fn reduced_subset_composition() {
    let mut rng = random::rng(32);
    let dims = ProcessDims::new(1, vec![2, 2, 2], vec![2, 2, 2], 2);
    let w = random_valid_process(&dims, &mut rng, 0.2).unwrap();
    // K' = {1} subset of K = {1,3}
    let pk = w.reduced_pk(0b101).unwrap();
    let direct = w.reduced_pk(0b001).unwrap();
    let via = pk.partial_trace(&["A3I", "A3O"]).unwrap();
    assert!(via.sub(&direct).unwrap().max_abs() < 1e-12);
}

#[test]
fn random_valid_process_is_valid() {
    let mut rng = random::rng(33);
    for dims in [
        ProcessDims::new(1, vec![2, 2], vec![2, 2], 1),
        ProcessDims::new(2, vec![2, 2], vec![2, 2], 2),
        ProcessDims::new(1, vec![2, 3], vec![2, 2], 2),
    ] {
        for _ in 0..5 {
            let w = random_valid_process(&dims, &mut rng, 0.3).unwrap();
            let report = is_valid_process(&w, VALIDITY_TOL).unwrap();
            assert!(report.is_valid(), "report: {report:?}");
        }
    }
}

#[test]
fn process_json_round_trip() {
    let w = switch_w(2);
    let dir = std::env::temp_dir().join(format!("procmat_proc_{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let p = dir.join("w_qs.json");
    w.save(&p).unwrap();
    let back = ProcessMatrix::load(&p).unwrap();
    assert_eq!(back.dims(), w.dims());
    assert!(back.op().sub(w.op()).unwrap().max_abs() == 0.0);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn condition_and_trace_future() {
    let w = switch_w(2);
    // prepare |psi_t> (x) |+_c> on P, discard F
    let psi = LabeledKet::basis(lbl("Pt", 2), 0).unwrap();
    let plus = LabeledKet::new(
        vec![lbl("Pc", 2)],
        vec![c(std::f64::consts::FRAC_1_SQRT_2, 0.0), c(std::f64::consts::FRAC_1_SQRT_2, 0.0)],
    )
    .unwrap();
    let rho = psi.tensor(&plus).unwrap().outer().merge_factors(&["Pt", "Pc"], "P").unwrap();
    let cond = w.condition_on_past(&rho).unwrap();
    assert_eq!(cond.dims().d_p, 1);
    let report = is_valid_process(&cond, VALIDITY_TOL).unwrap();
    assert!(report.is_valid());
    let no_f = cond.trace_future().unwrap();
    assert_eq!(no_f.dims().d_f, 1);
    let report = is_valid_process(&no_f, VALIDITY_TOL).unwrap();
    assert!(report.is_valid());
}
