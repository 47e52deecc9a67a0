//! Canonical circuit examples: sequential and parallel circuits, the
//! classical and quantum switches, the N-switch, a three-party circuit with
//! dynamical coherent control of causal order, and the probabilistic
//! variants used in discrimination tasks.

use super::*;
use crate::tensor::{max_entangled, LabeledKet};

fn c(re: f64, im: f64) -> Cplx {
    Cplx::new(re, im)
}

fn lbl(name: &str, dim: usize) -> SystemLabel {
    SystemLabel::new(name, dim)
}

fn trivial(name: &str) -> SystemLabel {
    lbl(name, 1)
}

fn attach_trivial(ket: LabeledKet, names: &[&str]) -> LabeledKet {
    let mut out = ket;
    for n in names {
        out = out.tensor(&LabeledKet::basis(trivial(n), 0).unwrap()).unwrap();
    }
    out
}

/// `W_{P->A1->...->AN->F}`: identity channels chained through all parties in
/// ascending order.
pub fn sequential(n: usize, d: usize) -> QcFoDescription {
    let dims = ProcessDims::uniform(n, d, d, d);
    let order: Vec<usize> = (1..=n).collect();
    let ancillas = vec![1usize; n];
    let mut ops = Vec::new();
    let m1 = identity_choi(lbl("P", d), lbl(&in_name(1), d)).unwrap();
    ops.push(m1.tensor(&LabeledOperator::identity(vec![trivial("a1")]).unwrap()).unwrap());
    for k in 1..n {
        let m = identity_choi(lbl(&out_name(k), d), lbl(&in_name(k + 1), d)).unwrap();
        let m = m
            .tensor(&LabeledOperator::identity(vec![trivial(&ancilla_name(k))]).unwrap())
            .unwrap()
            .tensor(&LabeledOperator::identity(vec![trivial(&ancilla_name(k + 1))]).unwrap())
            .unwrap();
        ops.push(m);
    }
    let ml = identity_choi(lbl(&out_name(n), d), lbl("F", d)).unwrap();
    ops.push(ml.tensor(&LabeledOperator::identity(vec![trivial(&ancilla_name(n))]).unwrap()).unwrap());
    QcFoDescription::new(dims, order, ancillas, ops).unwrap()
}

/// Two-party parallel circuit `W_par` as a QC-PAR: a bipartite state flows
/// through both parties at once, `P = P1 (x) P2` and `F = F1 (x) F2`.
pub fn parallel(d: usize) -> QcParDescription {
    let dims = ProcessDims::new(d * d, vec![d; 2], vec![d; 2], d * d);
    let m_p = identity_choi(lbl("P1", d), lbl("A1I", d))
        .unwrap()
        .tensor(&identity_choi(lbl("P2", d), lbl("A2I", d)).unwrap())
        .unwrap()
        .merge_factors(&["P1", "P2"], "P")
        .unwrap()
        .tensor(&LabeledOperator::identity(vec![trivial("a1")]).unwrap())
        .unwrap();
    let m_f = identity_choi(lbl("A1O", d), lbl("F1", d))
        .unwrap()
        .tensor(&identity_choi(lbl("A2O", d), lbl("F2", d)).unwrap())
        .unwrap()
        .merge_factors(&["F1", "F2"], "F")
        .unwrap()
        .tensor(&LabeledOperator::identity(vec![trivial("a1")]).unwrap())
        .unwrap();
    QcParDescription::new(dims, 1, m_p, m_f).unwrap()
}

/// A fixed-order realisation of the parallel circuit for either order,
/// routing the idle party's input/output through ancillas.
pub fn parallel_fo(d: usize, order: [usize; 2]) -> QcFoDescription {
    let dims = ProcessDims::new(d * d, vec![d; 2], vec![d; 2], d * d);
    let [k1, k2] = order;
    // alpha1 carries P_{k2} forward, alpha2 carries A_{k1}^O forward
    let m1 = identity_choi(lbl(&format!("P{k1}"), d), lbl(&in_name(k1), d))
        .unwrap()
        .tensor(&identity_choi(lbl(&format!("P{k2}"), d), lbl("a1", d)).unwrap())
        .unwrap()
        .merge_factors(&["P1", "P2"], "P")
        .unwrap();
    let m2 = identity_choi(lbl(&out_name(k1), d), lbl("a2", d))
        .unwrap()
        .tensor(&identity_choi(lbl("a1", d), lbl(&in_name(k2), d)).unwrap())
        .unwrap();
    let m3 = identity_choi(lbl(&out_name(k2), d), lbl(&format!("F{k2}"), d))
        .unwrap()
        .tensor(&identity_choi(lbl("a2", d), lbl(&format!("F{k1}"), d)).unwrap())
        .unwrap()
        .merge_factors(&["F1", "F2"], "F")
        .unwrap();
    QcFoDescription::new(dims, order.to_vec(), vec![d, d], vec![m1, m2, m3]).unwrap()
}

/// Classical switch: the order of the two parties is decided by measuring a
/// control bit provided in `P_c`. `P = Pt (x) Pc`, `F = Ft (x) Fc`.
pub fn classical_switch(d_t: usize) -> QcCcDescription {
    let dims = ProcessDims::new(2 * d_t, vec![d_t; 2], vec![d_t; 2], 2 * d_t);
    let mut ops = BTreeMap::new();
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let proj = LabeledKet::basis(lbl("Pc", 2), k1 - 1).unwrap().outer();
        let m0 = identity_choi(lbl("Pt", d_t), lbl(&in_name(k1), d_t))
            .unwrap()
            .tensor(&proj)
            .unwrap()
            .merge_factors(&["Pt", "Pc"], "P")
            .unwrap()
            .tensor(&LabeledOperator::identity(vec![trivial("a1")]).unwrap())
            .unwrap();
        ops.insert((vec![], Target::Party(k1)), m0);

        let m1 = identity_choi(lbl(&out_name(k1), d_t), lbl(&in_name(k2), d_t))
            .unwrap()
            .tensor(&LabeledOperator::identity(vec![trivial("a1")]).unwrap())
            .unwrap()
            .tensor(&LabeledOperator::identity(vec![trivial("a2")]).unwrap())
            .unwrap();
        ops.insert((vec![k1], Target::Party(k2)), m1);

        let rec = LabeledKet::basis(lbl("Fc", 2), k1 - 1).unwrap().outer();
        let mf = identity_choi(lbl(&out_name(k2), d_t), lbl("Ft", d_t))
            .unwrap()
            .tensor(&rec)
            .unwrap()
            .merge_factors(&["Ft", "Fc"], "F")
            .unwrap()
            .tensor(&LabeledOperator::identity(vec![trivial("a2")]).unwrap())
            .unwrap();
        ops.insert((vec![k1, k2], Target::Future), mf);
    }
    QcCcDescription::new(dims, vec![1, 1], ops).unwrap()
}

/// Quantum switch: same wiring as the classical switch but with the control
/// qubit routed coherently.
pub fn quantum_switch(d_t: usize) -> QcQcDescription {
    let dims = ProcessDims::new(2 * d_t, vec![d_t; 2], vec![d_t; 2], 2 * d_t);
    let mut ops = BTreeMap::new();
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let v0 = max_entangled(lbl("Pt", d_t), lbl(&in_name(k1), d_t))
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Pc", 2), k1 - 1).unwrap())
            .unwrap()
            .merge_factors(&["Pt", "Pc"], "P")
            .unwrap();
        ops.insert(QcqcKey::first(k1), attach_trivial(v0, &["a1"]));

        let v1 = max_entangled(lbl(&out_name(k1), d_t), lbl(&in_name(k2), d_t)).unwrap();
        ops.insert(QcqcKey::mid(&[], k1, k2), attach_trivial(v1, &["a1", "a2"]));

        let vf = max_entangled(lbl(&out_name(k2), d_t), lbl("Ft", d_t))
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Fc", 2), k1 - 1).unwrap())
            .unwrap()
            .merge_factors(&["Ft", "Fc"], "F")
            .unwrap();
        ops.insert(QcqcKey::last(&[k1], k2), attach_trivial(vf, &["a2", "aF"]));
    }
    QcQcDescription::new(dims, vec![1, 1], 1, ops).unwrap()
}

/// Conditioned quantum switch `W_QS^{+,psi_t}`: the control is fixed in
/// `|+>` and the target in `psi_t`, leaving a trivial global past and
/// `F = Ft (x) Fc`.
pub fn conditioned_switch(psi_t: &[Cplx]) -> QcQcDescription {
    let d_t = psi_t.len();
    let dims = ProcessDims::new(1, vec![d_t; 2], vec![d_t; 2], 2 * d_t);
    let mut ops = BTreeMap::new();
    let amp = 1.0 / 2.0f64.sqrt();
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let v0 = LabeledKet::new(
            vec![lbl(&in_name(k1), d_t)],
            psi_t.iter().map(|a| a * c(amp, 0.0)).collect(),
        )
        .unwrap();
        ops.insert(QcqcKey::first(k1), attach_trivial(v0, &["P", "a1"]));

        let v1 = max_entangled(lbl(&out_name(k1), d_t), lbl(&in_name(k2), d_t)).unwrap();
        ops.insert(QcqcKey::mid(&[], k1, k2), attach_trivial(v1, &["a1", "a2"]));

        let vf = max_entangled(lbl(&out_name(k2), d_t), lbl("Ft", d_t))
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Fc", 2), k1 - 1).unwrap())
            .unwrap()
            .merge_factors(&["Ft", "Fc"], "F")
            .unwrap();
        ops.insert(QcqcKey::last(&[k1], k2), attach_trivial(vf, &["a2", "aF"]));
    }
    QcQcDescription::new(dims, vec![1, 1], 1, ops).unwrap()
}

/// Index of a permutation in the lexicographically sorted list of all
/// permutations of `1..=n`.
fn perm_index(perm: &[usize]) -> usize {
    let mut perms = permutations(&(1..=perm.len()).collect::<Vec<_>>());
    perms.sort();
    perms.iter().position(|p| p == perm).expect("valid permutation")
}

/// Quantum N-switch: all `N!` orders coherently controlled by an
/// `N!`-dimensional control system provided in `P_c`; the full order is
/// carried through the layer ancillas.
pub fn n_switch(n: usize, d_t: usize) -> QcQcDescription {
    let nfact: usize = (1..=n).product();
    let dims = ProcessDims::new(nfact * d_t, vec![d_t; n], vec![d_t; n], nfact * d_t);
    let perms = {
        let mut p = permutations(&(1..=n).collect::<Vec<_>>());
        p.sort();
        p
    };
    let mut ops = BTreeMap::new();
    // first layer
    for k1 in 1..=n {
        let mut acc: Option<LabeledKet> = None;
        for perm in perms.iter().filter(|p| p[0] == k1) {
            let idx = perm_index(perm);
            let term = max_entangled(lbl("Pt", d_t), lbl(&in_name(k1), d_t))
                .unwrap()
                .tensor(&LabeledKet::basis(lbl("Pc", nfact), idx).unwrap())
                .unwrap()
                .tensor(&LabeledKet::basis(lbl("a1", nfact), idx).unwrap())
                .unwrap();
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term).unwrap(),
            });
        }
        let v = acc.unwrap().merge_factors(&["Pt", "Pc"], "P").unwrap();
        ops.insert(QcqcKey::first(k1), v);
    }
    // middle layers
    for mask in 0u32..(1 << n) {
        let members = mask_members(mask, n);
        let sz = members.len();
        if sz + 1 >= n {
            continue;
        }
        for cur in 1..=n {
            if mask & (1 << (cur - 1)) != 0 {
                continue;
            }
            for nxt in 1..=n {
                if nxt == cur || mask & (1 << (nxt - 1)) != 0 {
                    continue;
                }
                let slot = sz + 1;
                let mut acc: Option<LabeledKet> = None;
                for perm in perms.iter().filter(|p| {
                    mask_of(&p[..sz]) == mask && p[sz] == cur && p[sz + 1] == nxt
                }) {
                    let idx = perm_index(perm);
                    let term = max_entangled(lbl(&out_name(cur), d_t), lbl(&in_name(nxt), d_t))
                        .unwrap()
                        .tensor(&LabeledKet::basis(lbl(&ancilla_name(slot), nfact), idx).unwrap())
                        .unwrap()
                        .tensor(&LabeledKet::basis(lbl(&ancilla_name(slot + 1), nfact), idx).unwrap())
                        .unwrap();
                    acc = Some(match acc {
                        None => term,
                        Some(a) => a.add(&term).unwrap(),
                    });
                }
                ops.insert(
                    QcqcKey { done: mask, current: cur, next: Target::Party(nxt) },
                    acc.unwrap(),
                );
            }
        }
    }
    // last layer
    for cur in 1..=n {
        let done: Vec<usize> = (1..=n).filter(|&k| k != cur).collect();
        let mut acc: Option<LabeledKet> = None;
        for perm in perms.iter().filter(|p| p[n - 1] == cur) {
            let idx = perm_index(perm);
            let term = max_entangled(lbl(&out_name(cur), d_t), lbl("Ft", d_t))
                .unwrap()
                .tensor(&LabeledKet::basis(lbl(&ancilla_name(n), nfact), idx).unwrap())
                .unwrap()
                .tensor(&LabeledKet::basis(lbl("Fc", nfact), idx).unwrap())
                .unwrap();
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term).unwrap(),
            });
        }
        let v = acc.unwrap().merge_factors(&["Ft", "Fc"], "F").unwrap();
        ops.insert(QcqcKey::last(&done, cur), attach_trivial(v, &["aF"]));
    }
    QcQcDescription::new(dims, vec![nfact; n], 1, ops).unwrap()
}

/// Three-party circuit in which the causal order is established dynamically
/// *and* coherently: the state emitted by each operation decides, in
/// superposition, which operation comes next. Trivial global past and
/// future; `psi` is the initial qubit state sent into the first slot.
pub fn dynamical_qcqc(psi: &[Cplx]) -> QcQcDescription {
    assert_eq!(psi.len(), 2, "qubit initial state expected");
    let dims = ProcessDims::new(1, vec![2; 3], vec![2; 3], 1);
    let mut ops = BTreeMap::new();
    let amp = 1.0 / 3.0f64.sqrt();
    for k1 in 1..=3usize {
        let v0 = LabeledKet::new(
            vec![lbl(&in_name(k1), 2)],
            psi.iter().map(|a| a * c(amp, 0.0)).collect(),
        )
        .unwrap();
        ops.insert(QcqcKey::first(k1), attach_trivial(v0, &["P", "a1"]));
        for k2 in 1..=3usize {
            if k2 == k1 {
                continue;
            }
            // signature 0 if k2 = k1+1 (mod 3), 1 if k2 = k1+2 (mod 3)
            let sigma = if k2 == (k1 % 3) + 1 { 0usize } else { 1usize };
            // V = |sigma><sigma| as a map A_{k1}^O -> A_{k2}^I
            let mut v1 = LabeledKet::zeros(vec![lbl(&out_name(k1), 2), lbl(&in_name(k2), 2)]).unwrap();
            v1.amplitudes_mut()[sigma * 2 + sigma] = c(1.0, 0.0);
            ops.insert(QcqcKey::mid(&[], k1, k2), attach_trivial(v1, &["a1", "a2"]));

            let k3 = 6 - k1 - k2;
            // V_{{k1},k2}^{->k3}: |i>^{A_{k3}I} |i (+) sigma>^{a3} <i|^{A_{k2}O}
            let mut v2 = LabeledKet::zeros(vec![
                lbl(&out_name(k2), 2),
                lbl(&in_name(k3), 2),
                lbl("a3", 2),
            ])
            .unwrap();
            for i in 0..2usize {
                let anc = i ^ sigma;
                v2.amplitudes_mut()[(i * 2 + i) * 2 + anc] = c(1.0, 0.0);
            }
            ops.insert(QcqcKey::mid(&[k1], k2, k3), attach_trivial(v2, &["a2"]));
        }
    }
    // last layer: V_{{k1,k2},k3}^{->F} = 1^{A_{k3}^O a3 -> aF1} (x) |k3>^{aF2}
    for k3 in 1..=3usize {
        let done: Vec<usize> = (1..=3).filter(|&k| k != k3).collect();
        let v = max_entangled(lbl(&out_name(k3), 2), lbl("x1", 2))
            .unwrap()
            .tensor(&max_entangled(lbl("a3", 2), lbl("x2", 2)).unwrap())
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("x3", 3), k3 - 1).unwrap())
            .unwrap()
            .merge_factors(&["x1", "x2", "x3"], "aF")
            .unwrap();
        ops.insert(QcqcKey::last(&done, k3), attach_trivial(v, &["F"]));
    }
    QcQcDescription::new(dims, vec![1, 1, 2], 12, ops).unwrap()
}

#[derive(Debug, Error)]
pub enum GalleryError {
    #[error("operator {0} is not an isometry (residual {1:.2e})")]
    NotIsometric(String, f64),
    #[error("unknown gallery name `{0}`")]
    UnknownName(String),
    #[error("{0}")]
    BadParams(String),
}

fn isometry_residual(v: &[Cplx], rows: usize, cols: usize) -> f64 {
    let mut max = 0.0f64;
    for i in 0..cols {
        for j in 0..cols {
            let mut s = c(0.0, 0.0);
            for r in 0..rows {
                s += v[r * cols + i].conj() * v[r * cols + j];
            }
            let want = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
            let d = (s - want).norm();
            if d > max {
                max = d;
            }
        }
    }
    max
}

/// The family generalizing [`dynamical_qcqc`]: arbitrary isometries
/// `V_{k_1}: A_{k_1}^O -> A_{k_2}^I (x) alpha` (one per `k_1`, shared across
/// `k_2`) and `V'_{k_3}: A_{k_2}^O (x) alpha' -> A_{k_3}^I (x) alpha_3`,
/// with nontrivial `P = Pt (x) Pc` and `F = Ft (x) Fa (x) Fc`.
///
/// `v_first[k-1]` is `(d_t*2) x d_t` row-major; `v_third[k-1]` is
/// `(d_t*d_fa) x (d_t*2)` row-major with rows indexed `(A_{k_3}^I, alpha_3)`
/// and columns `(A_{k_2}^O, alpha')`.
pub fn dynamical_qcqc_family(
    v_first: &[Vec<Cplx>; 3],
    v_third: &[Vec<Cplx>; 3],
    d_t: usize,
    d_fa: usize,
) -> std::result::Result<QcQcDescription, GalleryError> {
    for (i, v) in v_first.iter().enumerate() {
        if v.len() != (d_t * 2) * d_t {
            return Err(GalleryError::BadParams(format!("V_{} has wrong shape", i + 1)));
        }
        let r = isometry_residual(v, d_t * 2, d_t);
        if r > 1e-9 {
            return Err(GalleryError::NotIsometric(format!("V_{}", i + 1), r));
        }
    }
    for (i, v) in v_third.iter().enumerate() {
        if v.len() != (d_t * d_fa) * (d_t * 2) {
            return Err(GalleryError::BadParams(format!("V'_{} has wrong shape", i + 1)));
        }
        let r = isometry_residual(v, d_t * d_fa, d_t * 2);
        if r > 1e-9 {
            return Err(GalleryError::NotIsometric(format!("V'_{}", i + 1), r));
        }
    }
    let dims = ProcessDims::new(3 * d_t, vec![d_t; 3], vec![d_t; 3], 3 * d_t * d_fa);
    let mut ops = BTreeMap::new();
    for k1 in 1..=3usize {
        // V_{0,0}^{->k1} = 1^{Pt -> A_{k1}^I} (x) <k1|^{Pc}
        let v0 = max_entangled(lbl("Pt", d_t), lbl(&in_name(k1), d_t))
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Pc", 3), k1 - 1).unwrap())
            .unwrap()
            .merge_factors(&["Pt", "Pc"], "P")
            .unwrap();
        ops.insert(QcqcKey::first(k1), attach_trivial(v0, &["a1"]));
        for k2 in 1..=3usize {
            if k2 == k1 {
                continue;
            }
            let sigma = if k2 == (k1 % 3) + 1 { 0usize } else { 1usize };
            // (1 (x) <sigma|) V_{k1}: matrix d_t x d_t
            let vk = &v_first[k1 - 1];
            let mut m = vec![c(0.0, 0.0); d_t * d_t];
            for i in 0..d_t {
                for j in 0..d_t {
                    // row (i, sigma) of V_{k1}
                    m[i * d_t + j] = vk[(i * 2 + sigma) * d_t + j];
                }
            }
            let v1 = crate::tensor::choi_vector(
                &m,
                vec![lbl(&out_name(k1), d_t)],
                vec![lbl(&in_name(k2), d_t)],
            )
            .unwrap();
            ops.insert(QcqcKey::mid(&[], k1, k2), attach_trivial(v1, &["a1", "a2"]));

            let k3 = 6 - k1 - k2;
            // V'_{k3} (1 (x) |sigma>): matrix (d_t*d_fa) x d_t
            let vp = &v_third[k3 - 1];
            let mut m = vec![c(0.0, 0.0); (d_t * d_fa) * d_t];
            for r in 0..d_t * d_fa {
                for j in 0..d_t {
                    m[r * d_t + j] = vp[r * (d_t * 2) + j * 2 + sigma];
                }
            }
            let v2 = crate::tensor::choi_vector(
                &m,
                vec![lbl(&out_name(k2), d_t)],
                vec![lbl(&in_name(k3), d_t), lbl("a3", d_fa)],
            )
            .unwrap();
            ops.insert(QcqcKey::mid(&[k1], k2, k3), attach_trivial(v2, &["a2"]));
        }
    }
    for k3 in 1..=3usize {
        let done: Vec<usize> = (1..=3).filter(|&k| k != k3).collect();
        let v = max_entangled(lbl(&out_name(k3), d_t), lbl("Ft", d_t))
            .unwrap()
            .tensor(&max_entangled(lbl("a3", d_fa), lbl("Fa", d_fa)).unwrap())
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Fc", 3), k3 - 1).unwrap())
            .unwrap()
            .merge_factors(&["Ft", "Fa", "Fc"], "F")
            .unwrap();
        ops.insert(QcqcKey::last(&done, k3), attach_trivial(v, &["aF"]));
    }
    Ok(QcQcDescription::new(dims, vec![1, 1, d_fa], 1, ops).unwrap())
}

/// Sequential two-party circuit followed by a computational-basis
/// measurement whose post-measurement state goes to `F`.
pub fn pqcfo_basis_measurement(d: usize) -> ProbabilisticDescription {
    let base = sequential(2, d);
    let mut last = Vec::new();
    for i in 0..d {
        let m = LabeledKet::basis(lbl(&out_name(2), d), i)
            .unwrap()
            .outer()
            .tensor(&LabeledKet::basis(lbl("F", d), i).unwrap().outer())
            .unwrap()
            .tensor(&LabeledOperator::identity(vec![trivial("a2")]).unwrap())
            .unwrap();
        last.push(m);
    }
    ProbabilisticDescription::Fo { base, last }
}

/// The switch-based discrimination superinstrument `{W_QS^[+], W_QS^[-]}`:
/// the final control qubit is measured in the `|+>/|->` basis and only the
/// target survives to `F = Ft`.
pub fn pqcqc_switch_pm(d_t: usize) -> ProbabilisticDescription {
    let dims = ProcessDims::new(2 * d_t, vec![d_t; 2], vec![d_t; 2], d_t);
    let mut ops = BTreeMap::new();
    for k1 in 1..=2usize {
        let k2 = 3 - k1;
        let v0 = max_entangled(lbl("Pt", d_t), lbl(&in_name(k1), d_t))
            .unwrap()
            .tensor(&LabeledKet::basis(lbl("Pc", 2), k1 - 1).unwrap())
            .unwrap()
            .merge_factors(&["Pt", "Pc"], "P")
            .unwrap();
        ops.insert(QcqcKey::first(k1), attach_trivial(v0, &["a1"]));
        let v1 = max_entangled(lbl(&out_name(k1), d_t), lbl(&in_name(k2), d_t)).unwrap();
        ops.insert(QcqcKey::mid(&[], k1, k2), attach_trivial(v1, &["a1", "a2"]));
    }
    let base = QcQcDescription::new_partial(dims, vec![1, 1], 1, ops).unwrap();
    let amp = 1.0 / 2.0f64.sqrt();
    let mut last = Vec::new();
    for sign in [1.0f64, -1.0] {
        let mut branch = BTreeMap::new();
        for k2 in 1..=2usize {
            // |V^{->F[pm]}>> = (pm 1)^{k2} / sqrt(2) |1>>^{A_{k2}^O Ft}
            let coeff = if k2 == 1 { sign } else { 1.0 };
            let v = max_entangled(lbl(&out_name(k2), d_t), lbl("F", d_t))
                .unwrap()
                .scale(c(coeff * amp, 0.0));
            branch.insert(k2, attach_trivial(v, &["a2", "aF"]));
        }
        last.push(branch);
    }
    ProbabilisticDescription::Qc { base, last }
}

/// Classical switch with the realised order read out as the circuit outcome.
pub fn pqccc_order_readout(d_t: usize) -> ProbabilisticDescription {
    let det = classical_switch(d_t);
    let mut base_ops = det.ops.clone();
    let full_orders: Vec<Vec<usize>> = vec![vec![1, 2], vec![2, 1]];
    let mut finals = BTreeMap::new();
    for seq in &full_orders {
        let op = base_ops.remove(&(seq.clone(), Target::Future)).unwrap();
        finals.insert(seq.clone(), op);
    }
    let base = QcCcDescription::new_partial(det.dims.clone(), det.ancilla_dims.clone(), base_ops).unwrap();
    let mut last = Vec::new();
    for seq in &full_orders {
        let mut branch = BTreeMap::new();
        for other in &full_orders {
            if other == seq {
                branch.insert(other.clone(), finals[other].clone());
            } else {
                branch.insert(other.clone(), finals[other].scale(c(0.0, 0.0)));
            }
        }
        last.push(branch);
    }
    ProbabilisticDescription::Cc { base, last }
}

/// A named gallery object.
pub enum GalleryItem {
    Process(ProcessMatrix),
    Set(ProcessSet),
}

/// CLI-facing dispatcher. Deterministic entries return the built process
/// matrix; probabilistic ones return the outcome-indexed set.
pub fn gallery(name: &str, params: &GalleryParams) -> std::result::Result<GalleryItem, GalleryError> {
    let build_err = |e: CircuitError| GalleryError::BadParams(e.to_string());
    match name {
        "sequential" => Ok(GalleryItem::Process(
            sequential(params.n.unwrap_or(2), params.d_t).build().map_err(build_err)?,
        )),
        "parallel" => Ok(GalleryItem::Process(parallel(params.d_t).build().map_err(build_err)?)),
        "classical_switch" => Ok(GalleryItem::Process(
            classical_switch(params.d_t).build().map_err(build_err)?,
        )),
        "quantum_switch" => Ok(GalleryItem::Process(
            quantum_switch(params.d_t).build().map_err(build_err)?,
        )),
        "conditioned_switch" => {
            let psi = params
                .psi
                .clone()
                .ok_or_else(|| GalleryError::BadParams("conditioned_switch needs --psi".into()))?;
            Ok(GalleryItem::Process(conditioned_switch(&psi).build().map_err(build_err)?))
        }
        "n_switch" => {
            let n = params.n.ok_or_else(|| GalleryError::BadParams("n_switch needs --n".into()))?;
            Ok(GalleryItem::Process(n_switch(n, params.d_t).build().map_err(build_err)?))
        }
        "dynamical_qcqc" => {
            let psi = params
                .psi
                .clone()
                .ok_or_else(|| GalleryError::BadParams("dynamical_qcqc needs --psi".into()))?;
            Ok(GalleryItem::Process(dynamical_qcqc(&psi).build().map_err(build_err)?))
        }
        "pqcfo_basis_measurement" => Ok(GalleryItem::Set(
            pqcfo_basis_measurement(params.d_t).build().map_err(build_err)?,
        )),
        "pqcqc_switch_pm" => Ok(GalleryItem::Set(
            pqcqc_switch_pm(params.d_t).build().map_err(build_err)?,
        )),
        "pqccc_order_readout" => Ok(GalleryItem::Set(
            pqccc_order_readout(params.d_t).build().map_err(build_err)?,
        )),
        other => Err(GalleryError::UnknownName(other.to_string())),
    }
}

/// Parameters for [`gallery`].
pub struct GalleryParams {
    pub d_t: usize,
    pub n: Option<usize>,
    pub psi: Option<Vec<Cplx>>,
}

impl Default for GalleryParams {
    fn default() -> Self {
        GalleryParams { d_t: 2, n: None, psi: None }
    }
}
