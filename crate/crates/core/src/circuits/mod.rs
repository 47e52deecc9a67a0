//! Circuit descriptions for the four classes — fixed order (FO), parallel
//! (PAR), classical control (CC), quantum control (QC) — their
//! trace-preservation validators, process-matrix builders, and probabilistic
//! variants with an outcome-indexed last layer.
//!
//! Naming conventions shared by every description: party slots `A{k}I` /
//! `A{k}O` (k is 1-based), global past `P`, global future `F`, layer
//! ancillas `a1..aN`, and the final QC ancilla `aF`. Ordered sequences are
//! keyed as integer vectors, unordered subsets as bitmasks (bit `k-1` set
//! means party `k` was applied).

pub mod gallery;
pub mod pad;
pub mod random;

use crate::process::{in_name, out_name, ProcessDims, ProcessError, ProcessMatrix};
use crate::tensor::{Cplx, LabeledKet, LabeledOperator, SystemLabel, TensorError};
use std::collections::BTreeMap;
use thiserror::Error;

/// Default tolerance on TP-condition residuals.
pub const TP_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Process(#[from] ProcessError),
    #[error("missing operation for index {0}")]
    MissingOp(String),
    #[error("operation for {0} has wrong factors: expected {1}, got {2}")]
    WrongFactors(String, String, String),
    #[error("trace-preservation check failed: max residual {0:.3e} (tol {1:.1e})")]
    TpFailure(f64, f64),
    #[error("{0}")]
    Other(String),
}

type Result<T> = std::result::Result<T, CircuitError>;

pub fn ancilla_name(n: usize) -> String {
    format!("a{n}")
}

/// Where an internal operation routes the target system next.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    Party(usize),
    Future,
}

/// Residual report from a TP check: one named residual per condition, plus
/// the positivity floor of each internal operation.
#[derive(Clone, Debug)]
pub struct TpReport {
    pub residuals: Vec<(String, f64)>,
    pub min_op_eigenvalue: f64,
    pub tol: f64,
}

impl TpReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.max_residual() <= self.tol && self.min_op_eigenvalue >= -self.tol
    }
}

fn diff_norm(a: &LabeledOperator, b: &LabeledOperator) -> Result<f64> {
    let names: Vec<&str> = a.factors().iter().map(|f| f.name.as_str()).collect();
    Ok(a.sub(&b.reorder(&names)?)?.max_abs())
}

/// All permutations of `items`.
pub fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for (i, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Parties in a bitmask, ascending.
pub fn mask_members(mask: u32, n: usize) -> Vec<usize> {
    (1..=n).filter(|k| mask & (1 << (k - 1)) != 0).collect()
}

pub fn mask_of(parties: &[usize]) -> u32 {
    parties.iter().fold(0u32, |m, &k| m | (1 << (k - 1)))
}

// ---------------------------------------------------------------------------
// QC-FO
// ---------------------------------------------------------------------------

/// Quantum circuit with fixed causal order: internal CPTP maps `M_1 ..
/// M_{N+1}` wiring the external slots in the order given by `order`.
///
/// `ops[0]` lives on `[P, A{k_1}I, a1]`, `ops[n]` on
/// `[A{k_n}O, a{n}, A{k_{n+1}}I, a{n+1}]`, and `ops[N]` on `[A{k_N}O, aN, F]`.
#[derive(Clone, Debug)]
pub struct QcFoDescription {
    pub dims: ProcessDims,
    pub order: Vec<usize>,
    pub ancilla_dims: Vec<usize>,
    pub ops: Vec<LabeledOperator>,
}

impl QcFoDescription {
    pub fn new(
        dims: ProcessDims,
        order: Vec<usize>,
        ancilla_dims: Vec<usize>,
        ops: Vec<LabeledOperator>,
    ) -> Result<Self> {
        let n = dims.n_parties;
        if order.len() != n || ancilla_dims.len() != n || ops.len() != n + 1 {
            return Err(CircuitError::Other("wrong number of orders/ancillas/ops".into()));
        }
        let mut sorted = order.clone();
        sorted.sort_unstable();
        if sorted != (1..=n).collect::<Vec<_>>() {
            return Err(CircuitError::Other(format!("order {order:?} is not a permutation")));
        }
        let desc = QcFoDescription { dims, order, ancilla_dims, ops };
        for (i, op) in desc.ops.iter().enumerate() {
            check_factors_match(op.factors(), &desc.slot_factors(i), &format!("M_{}", i + 1))?;
        }
        Ok(desc)
    }

    fn ancilla(&self, n: usize) -> SystemLabel {
        SystemLabel::new(ancilla_name(n), self.ancilla_dims[n - 1])
    }

    /// Expected factor set of `ops[i]` (`M_{i+1}`).
    fn slot_factors(&self, i: usize) -> Vec<SystemLabel> {
        let n = self.dims.n_parties;
        if i == 0 {
            vec![self.dims.past(), self.dims.party_in(self.order[0]), self.ancilla(1)]
        } else if i < n {
            vec![
                self.dims.party_out(self.order[i - 1]),
                self.ancilla(i),
                self.dims.party_in(self.order[i]),
                self.ancilla(i + 1),
            ]
        } else {
            vec![self.dims.party_out(self.order[n - 1]), self.ancilla(n), self.dims.future()]
        }
    }

    /// Evaluates the TP equalities on cumulative link products.
    pub fn tp_check(&self) -> Result<TpReport> {
        let n = self.dims.n_parties;
        let mut residuals = Vec::new();
        let mut min_eig = f64::INFINITY;
        for (i, op) in self.ops.iter().enumerate() {
            let e = op.min_eigenvalue() / op.max_abs().max(1.0);
            if e < min_eig {
                min_eig = e;
            }
            let h = op.herm_residual() / op.max_abs().max(1.0);
            residuals.push((format!("herm(M_{})", i + 1), h));
        }
        // condition 1
        let k1 = self.order[0];
        let lhs = self.ops[0].partial_trace(&[&in_name(k1), &ancilla_name(1)])?;
        let idp = LabeledOperator::identity(vec![self.dims.past()])?;
        residuals.push(("n=0".into(), diff_norm(&lhs, &idp)?));
        // cumulative products
        let mut cum = self.ops[0].clone();
        for step in 1..=n {
            let next = cum.link(&self.ops[step])?;
            let kn = self.order[step - 1];
            let rhs = cum
                .partial_trace(&[&ancilla_name(step)])?
                .tensor(&LabeledOperator::identity(vec![self.dims.party_out(kn)])?)?;
            let lhs = if step < n {
                let knext = self.order[step];
                next.partial_trace(&[&in_name(knext), &ancilla_name(step + 1)])?
            } else {
                next.partial_trace(&["F"])?
            };
            residuals.push((format!("n={step}"), diff_norm(&lhs, &rhs)?));
            cum = next;
        }
        Ok(TpReport { residuals, min_op_eigenvalue: min_eig, tol: TP_TOL })
    }

    /// `W = M_1 * M_2 * ... * M_{N+1}`.
    pub fn build(&self) -> Result<ProcessMatrix> {
        let report = self.tp_check()?;
        if !report.passes() {
            return Err(CircuitError::TpFailure(report.max_residual(), report.tol));
        }
        Ok(self.build_unchecked()?)
    }

    pub fn build_unchecked(&self) -> std::result::Result<ProcessMatrix, ProcessError> {
        let mut w = self.ops[0].clone();
        for op in &self.ops[1..] {
            w = w.link(op)?;
        }
        ProcessMatrix::new(self.dims.clone(), w)
    }
}

// ---------------------------------------------------------------------------
// QC-PAR
// ---------------------------------------------------------------------------

/// Quantum circuit with all operations in parallel: one preparation map
/// `M_P` on `[P, A1I..ANI, a]` and one collection map `M_F` on
/// `[A1O..ANO, a, F]`.
#[derive(Clone, Debug)]
pub struct QcParDescription {
    pub dims: ProcessDims,
    pub ancilla_dim: usize,
    pub m_p: LabeledOperator,
    pub m_f: LabeledOperator,
}

impl QcParDescription {
    pub fn new(
        dims: ProcessDims,
        ancilla_dim: usize,
        m_p: LabeledOperator,
        m_f: LabeledOperator,
    ) -> Result<Self> {
        let desc = QcParDescription { dims, ancilla_dim, m_p, m_f };
        let mut pf = vec![desc.dims.past()];
        for k in 1..=desc.dims.n_parties {
            pf.push(desc.dims.party_in(k));
        }
        pf.push(SystemLabel::new("a1", desc.ancilla_dim));
        check_factors_match(desc.m_p.factors(), &pf, "M_P")?;
        let mut ff: Vec<SystemLabel> = (1..=desc.dims.n_parties).map(|k| desc.dims.party_out(k)).collect();
        ff.push(SystemLabel::new("a1", desc.ancilla_dim));
        ff.push(desc.dims.future());
        check_factors_match(desc.m_f.factors(), &ff, "M_F")?;
        Ok(desc)
    }

    pub fn tp_check(&self) -> Result<TpReport> {
        let n = self.dims.n_parties;
        let mut residuals = Vec::new();
        let min_eig = self
            .m_p
            .min_eigenvalue()
            .min(self.m_f.min_eigenvalue())
            / self.m_p.max_abs().max(self.m_f.max_abs()).max(1.0);
        residuals.push(("herm(M_P)".into(), self.m_p.herm_residual() / self.m_p.max_abs().max(1.0)));
        residuals.push(("herm(M_F)".into(), self.m_f.herm_residual() / self.m_f.max_abs().max(1.0)));
        let mut tr_names: Vec<String> = (1..=n).map(in_name).collect();
        tr_names.push("a1".into());
        let refs: Vec<&str> = tr_names.iter().map(|s| s.as_str()).collect();
        let lhs = self.m_p.partial_trace(&refs)?;
        let idp = LabeledOperator::identity(vec![self.dims.past()])?;
        residuals.push(("n=0".into(), diff_norm(&lhs, &idp)?));

        let w = self.m_p.link(&self.m_f)?;
        let lhs = w.partial_trace(&["F"])?;
        let mut rhs = self.m_p.partial_trace(&["a1"])?;
        for k in 1..=n {
            rhs = rhs.tensor(&LabeledOperator::identity(vec![self.dims.party_out(k)])?)?;
        }
        residuals.push(("n=F".into(), diff_norm(&lhs, &rhs)?));
        Ok(TpReport { residuals, min_op_eigenvalue: min_eig, tol: TP_TOL })
    }

    pub fn build(&self) -> Result<ProcessMatrix> {
        let report = self.tp_check()?;
        if !report.passes() {
            return Err(CircuitError::TpFailure(report.max_residual(), report.tol));
        }
        Ok(ProcessMatrix::new(self.dims.clone(), self.m_p.link(&self.m_f)?)?)
    }
}

// ---------------------------------------------------------------------------
// QC-CC
// ---------------------------------------------------------------------------

/// Quantum circuit with classical control of causal order: one CP map per
/// (already-applied ordered sequence, next target).
///
/// `ops[((), Party(k1))]` lives on `[P, A{k1}I, a1]`; a mid-circuit
/// `ops[((k1..kn), Party(k))]` on `[A{kn}O, a{n}, A{k}I, a{n+1}]`; a final
/// `ops[((k1..kN), Future)]` on `[A{kN}O, aN, F]`.
#[derive(Clone, Debug)]
pub struct QcCcDescription {
    pub dims: ProcessDims,
    pub ancilla_dims: Vec<usize>,
    pub ops: BTreeMap<(Vec<usize>, Target), LabeledOperator>,
}

impl QcCcDescription {
    pub fn new(
        dims: ProcessDims,
        ancilla_dims: Vec<usize>,
        ops: BTreeMap<(Vec<usize>, Target), LabeledOperator>,
    ) -> Result<Self> {
        Self::validate(dims, ancilla_dims, ops, false)
    }

    /// As [`QcCcDescription::new`], but the final-layer (`Target::Future`)
    /// maps may be absent: used as the deterministic part of a probabilistic
    /// circuit whose last layer is outcome-indexed.
    pub fn new_partial(
        dims: ProcessDims,
        ancilla_dims: Vec<usize>,
        ops: BTreeMap<(Vec<usize>, Target), LabeledOperator>,
    ) -> Result<Self> {
        Self::validate(dims, ancilla_dims, ops, true)
    }

    fn validate(
        dims: ProcessDims,
        ancilla_dims: Vec<usize>,
        ops: BTreeMap<(Vec<usize>, Target), LabeledOperator>,
        allow_missing_last: bool,
    ) -> Result<Self> {
        let desc = QcCcDescription { dims, ancilla_dims, ops };
        for seq in desc.all_sequences() {
            for target in desc.continuations(&seq) {
                let key = (seq.clone(), target);
                match desc.ops.get(&key) {
                    Some(op) => check_factors_match(
                        op.factors(),
                        &desc.slot_factors(&seq, target),
                        &format!("{key:?}"),
                    )?,
                    None if allow_missing_last && target == Target::Future => {}
                    None => return Err(CircuitError::MissingOp(format!("{key:?}"))),
                }
            }
        }
        Ok(desc)
    }

    fn ancilla(&self, n: usize) -> SystemLabel {
        SystemLabel::new(ancilla_name(n), self.ancilla_dims[n - 1])
    }

    /// All ordered sequences of length `0..=N` (the full-length ones key the
    /// final maps).
    fn all_sequences(&self) -> Vec<Vec<usize>> {
        let n = self.dims.n_parties;
        let mut out = vec![vec![]];
        let mut frontier: Vec<Vec<usize>> = vec![vec![]];
        for _ in 0..n {
            let mut next = Vec::new();
            for seq in &frontier {
                for k in 1..=n {
                    if !seq.contains(&k) {
                        let mut s = seq.clone();
                        s.push(k);
                        next.push(s);
                    }
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    fn continuations(&self, seq: &[usize]) -> Vec<Target> {
        let n = self.dims.n_parties;
        if seq.len() == n {
            vec![Target::Future]
        } else {
            (1..=n)
                .filter(|k| !seq.contains(k))
                .map(Target::Party)
                .collect()
        }
    }

    fn slot_factors(&self, seq: &[usize], target: Target) -> Vec<SystemLabel> {
        let n = seq.len();
        let incoming = match target {
            Target::Party(k) => self.dims.party_in(k),
            Target::Future => self.dims.future(),
        };
        if n == 0 {
            vec![self.dims.past(), incoming, self.ancilla(1)]
        } else {
            let last = seq[n - 1];
            let mut f = vec![self.dims.party_out(last), self.ancilla(n)];
            f.push(incoming);
            if target != Target::Future {
                f.push(self.ancilla(n + 1));
            }
            f
        }
    }

    /// Cumulative link products `M_empty^{->k_1} * ... * M^{->k_n}` per
    /// sequence.
    fn cumulative(&self) -> Result<BTreeMap<Vec<usize>, LabeledOperator>> {
        let n = self.dims.n_parties;
        let mut cum: BTreeMap<Vec<usize>, LabeledOperator> = BTreeMap::new();
        for k in 1..=n {
            let op = &self.ops[&(vec![], Target::Party(k))];
            cum.insert(vec![k], op.clone());
        }
        for len in 1..n {
            let seqs: Vec<Vec<usize>> = cum.keys().filter(|s| s.len() == len).cloned().collect();
            for seq in seqs {
                for k in 1..=n {
                    if !seq.contains(&k) {
                        let op = &self.ops[&(seq.clone(), Target::Party(k))];
                        let mut s = seq.clone();
                        s.push(k);
                        let c = cum[&seq].link(op)?;
                        cum.insert(s, c);
                    }
                }
            }
        }
        Ok(cum)
    }

    pub fn tp_check(&self) -> Result<TpReport> {
        self.tp_check_with_last(None)
    }

    /// TP check where the last layer may be replaced by an outcome sum
    /// (probabilistic circuits).
    fn tp_check_with_last(
        &self,
        last_sum: Option<&BTreeMap<Vec<usize>, LabeledOperator>>,
    ) -> Result<TpReport> {
        let n = self.dims.n_parties;
        let mut residuals = Vec::new();
        let mut min_eig = f64::INFINITY;
        for (key, op) in &self.ops {
            let e = op.min_eigenvalue() / op.max_abs().max(1.0);
            if e < min_eig {
                min_eig = e;
            }
            residuals.push((format!("herm{key:?}"), op.herm_residual() / op.max_abs().max(1.0)));
        }
        // first condition: sum over k1
        let mut lhs: Option<LabeledOperator> = None;
        for k in 1..=n {
            let t = self.ops[&(vec![], Target::Party(k))]
                .partial_trace(&[&in_name(k), &ancilla_name(1)])?;
            lhs = Some(match lhs {
                None => t,
                Some(acc) => acc.add(&t)?,
            });
        }
        let idp = LabeledOperator::identity(vec![self.dims.past()])?;
        residuals.push(("n=0".into(), diff_norm(&lhs.unwrap(), &idp)?));

        let cum = self.cumulative()?;
        for (seq, c) in &cum {
            let len = seq.len();
            let last = seq[len - 1];
            let rhs = c
                .partial_trace(&[&ancilla_name(len)])?
                .tensor(&LabeledOperator::identity(vec![self.dims.party_out(last)])?)?;
            let lhs = if len < n {
                let mut acc: Option<LabeledOperator> = None;
                for k in 1..=n {
                    if !seq.contains(&k) {
                        let nxt = c.link(&self.ops[&(seq.clone(), Target::Party(k))])?;
                        let t = nxt.partial_trace(&[&in_name(k), &ancilla_name(len + 1)])?;
                        acc = Some(match acc {
                            None => t,
                            Some(a) => a.add(&t)?,
                        });
                    }
                }
                acc.unwrap()
            } else {
                let final_op = match last_sum {
                    Some(map) => map
                        .get(seq)
                        .ok_or_else(|| CircuitError::MissingOp(format!("last layer {seq:?}")))?
                        .clone(),
                    None => self.ops[&(seq.clone(), Target::Future)].clone(),
                };
                c.link(&final_op)?.partial_trace(&["F"])?
            };
            residuals.push((format!("seq={seq:?}"), diff_norm(&lhs, &rhs)?));
        }
        Ok(TpReport { residuals, min_op_eigenvalue: min_eig, tol: TP_TOL })
    }

    /// `W = sum over full orders of the per-order link products`.
    pub fn build(&self) -> Result<ProcessMatrix> {
        let report = self.tp_check()?;
        if !report.passes() {
            return Err(CircuitError::TpFailure(report.max_residual(), report.tol));
        }
        self.build_unchecked()
    }

    pub fn build_unchecked(&self) -> Result<ProcessMatrix> {
        let n = self.dims.n_parties;
        let cum = self.cumulative()?;
        let mut w: Option<LabeledOperator> = None;
        for (seq, c) in cum.iter().filter(|(s, _)| s.len() == n) {
            let term = c.link(&self.ops[&(seq.clone(), Target::Future)])?;
            w = Some(match w {
                None => term,
                Some(acc) => acc.add(&term)?,
            });
        }
        Ok(ProcessMatrix::new(self.dims.clone(), w.unwrap())?)
    }

    /// The certifying decomposition `{W_(k_1..k_n)}` (trace the layer
    /// ancilla off each cumulative product), plus the top-level
    /// `W_(k_1..k_N,F)` terms keyed by the full sequence with `Target::Future`.
    pub fn decomposition(&self) -> Result<CcDecomposition> {
        let n = self.dims.n_parties;
        let cum = self.cumulative()?;
        let mut prefixes = BTreeMap::new();
        let mut tops = BTreeMap::new();
        for (seq, c) in &cum {
            prefixes.insert(seq.clone(), c.partial_trace(&[&ancilla_name(seq.len())])?);
            if seq.len() == n {
                tops.insert(seq.clone(), c.link(&self.ops[&(seq.clone(), Target::Future)])?);
            }
        }
        Ok(CcDecomposition { prefixes, tops })
    }
}

/// `{W_(k_1..k_n)}` blocks certifying QC-CC membership.
#[derive(Clone, Debug)]
pub struct CcDecomposition {
    /// `W_(k_1..k_n)` for every nonempty ordered sequence.
    pub prefixes: BTreeMap<Vec<usize>, LabeledOperator>,
    /// `W_(k_1..k_N,F)` for every full order.
    pub tops: BTreeMap<Vec<usize>, LabeledOperator>,
}

// ---------------------------------------------------------------------------
// QC-QC
// ---------------------------------------------------------------------------

/// Key of an internal QC-QC operation `V_{K_{n-1}, k_n}^{-> next}`: the
/// unordered set of already-applied parties, the currently applied party
/// (`0` for the first layer, where no party has acted yet), and the routing
/// target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct QcqcKey {
    pub done: u32,
    pub current: usize,
    pub next: Target,
}

impl QcqcKey {
    pub fn first(k1: usize) -> Self {
        QcqcKey { done: 0, current: 0, next: Target::Party(k1) }
    }

    pub fn mid(done: &[usize], current: usize, next: usize) -> Self {
        QcqcKey { done: mask_of(done), current, next: Target::Party(next) }
    }

    pub fn last(done: &[usize], current: usize) -> Self {
        QcqcKey { done: mask_of(done), current, next: Target::Future }
    }
}

/// Quantum circuit with quantum control of causal order: pure internal
/// operations (Choi vectors) indexed by `(K_{n-1}, k_n, next)`.
///
/// First-layer kets live on `[P, A{k1}I, a1]`, mid kets on
/// `[A{k_n}O, a{n}, A{k_next}I, a{n+1}]`, last kets on `[A{k_N}O, aN, F, aF]`.
#[derive(Clone, Debug)]
pub struct QcQcDescription {
    pub dims: ProcessDims,
    pub ancilla_dims: Vec<usize>,
    pub alpha_f_dim: usize,
    pub ops: BTreeMap<QcqcKey, LabeledKet>,
}

impl QcQcDescription {
    pub fn new(
        dims: ProcessDims,
        ancilla_dims: Vec<usize>,
        alpha_f_dim: usize,
        ops: BTreeMap<QcqcKey, LabeledKet>,
    ) -> Result<Self> {
        Self::validate(dims, ancilla_dims, alpha_f_dim, ops, false)
    }

    /// As [`QcQcDescription::new`], but the final-layer kets may be absent:
    /// used as the deterministic part of a probabilistic circuit.
    pub fn new_partial(
        dims: ProcessDims,
        ancilla_dims: Vec<usize>,
        alpha_f_dim: usize,
        ops: BTreeMap<QcqcKey, LabeledKet>,
    ) -> Result<Self> {
        Self::validate(dims, ancilla_dims, alpha_f_dim, ops, true)
    }

    fn validate(
        dims: ProcessDims,
        ancilla_dims: Vec<usize>,
        alpha_f_dim: usize,
        ops: BTreeMap<QcqcKey, LabeledKet>,
        allow_missing_last: bool,
    ) -> Result<Self> {
        let desc = QcQcDescription { dims, ancilla_dims, alpha_f_dim, ops };
        for key in desc.all_keys() {
            match desc.ops.get(&key) {
                Some(ket) => check_factors_match_ket(
                    ket.factors(),
                    &desc.slot_factors(&key),
                    &format!("{key:?}"),
                )?,
                None if allow_missing_last && key.next == Target::Future => {}
                None => return Err(CircuitError::MissingOp(format!("{key:?}"))),
            }
        }
        Ok(desc)
    }

    fn ancilla(&self, n: usize) -> SystemLabel {
        SystemLabel::new(ancilla_name(n), self.ancilla_dims[n - 1])
    }

    pub fn all_keys(&self) -> Vec<QcqcKey> {
        let n = self.dims.n_parties;
        let mut keys = Vec::new();
        for k1 in 1..=n {
            keys.push(QcqcKey::first(k1));
        }
        for mask in 0u32..(1 << n) {
            let members = mask_members(mask, n);
            if members.len() >= n {
                continue;
            }
            for cur in 1..=n {
                if mask & (1 << (cur - 1)) != 0 {
                    continue;
                }
                if members.len() == n - 1 {
                    keys.push(QcqcKey { done: mask, current: cur, next: Target::Future });
                } else {
                    for nxt in 1..=n {
                        if nxt != cur && mask & (1 << (nxt - 1)) == 0 {
                            keys.push(QcqcKey { done: mask, current: cur, next: Target::Party(nxt) });
                        }
                    }
                }
            }
        }
        keys
    }

    fn slot_factors(&self, key: &QcqcKey) -> Vec<SystemLabel> {
        if key.current == 0 {
            let k1 = match key.next {
                Target::Party(k) => k,
                Target::Future => unreachable!("first layer routes to a party"),
            };
            return vec![self.dims.past(), self.dims.party_in(k1), self.ancilla(1)];
        }
        let n = mask_members(key.done, self.dims.n_parties).len() + 1;
        match key.next {
            Target::Party(k) => vec![
                self.dims.party_out(key.current),
                self.ancilla(n),
                self.dims.party_in(k),
                self.ancilla(n + 1),
            ],
            Target::Future => vec![
                self.dims.party_out(key.current),
                self.ancilla(n),
                self.dims.future(),
                SystemLabel::new("aF", self.alpha_f_dim),
            ],
        }
    }

    /// The vectors `|w_(K_{n-1}, k_n)>` (and `|w_(N,F)>` under the key
    /// `(N, 0, Future)`), built by summing the per-order chains over all
    /// orderings of each set.
    pub fn w_vectors(&self) -> Result<BTreeMap<(u32, usize, bool), LabeledKet>> {
        self.w_vectors_with_last(None)
    }

    fn w_vectors_with_last(
        &self,
        last_override: Option<&BTreeMap<usize, LabeledKet>>,
    ) -> Result<BTreeMap<(u32, usize, bool), LabeledKet>> {
        let n = self.dims.n_parties;
        // key: (mask of applied-before set K_{n-1}, current party, is_future)
        let mut w: BTreeMap<(u32, usize, bool), LabeledKet> = BTreeMap::new();
        for k1 in 1..=n {
            w.insert((0, k1, false), self.ops[&QcqcKey::first(k1)].clone());
        }
        for size in 1..=n {
            for mask in 1u32..(1 << n) {
                let members = mask_members(mask, n);
                if members.len() != size {
                    continue;
                }
                let nexts: Vec<Target> = if size == n {
                    vec![Target::Future]
                } else {
                    (1..=n)
                        .filter(|k| mask & (1 << (k - 1)) == 0)
                        .map(Target::Party)
                        .collect()
                };
                for next in nexts {
                    let mut acc: Option<LabeledKet> = None;
                    for &k in &members {
                        let prev_mask = mask & !(1 << (k - 1));
                        let prev = &w[&(prev_mask, k, false)];
                        let v = match (next, last_override) {
                            (Target::Future, Some(map)) => map
                                .get(&k)
                                .ok_or_else(|| CircuitError::MissingOp(format!("last layer k_N={k}")))?,
                            _ => {
                                let key = QcqcKey { done: prev_mask, current: k, next };
                                self.ops
                                    .get(&key)
                                    .ok_or_else(|| CircuitError::MissingOp(format!("{key:?}")))?
                            }
                        };
                        let term = prev.link(v)?;
                        acc = Some(match acc {
                            None => term,
                            Some(a) => a.add(&term)?,
                        });
                    }
                    let entry_key = match next {
                        Target::Party(k) => (mask, k, false),
                        Target::Future => (mask, 0, true),
                    };
                    w.insert(entry_key, acc.unwrap());
                }
            }
        }
        Ok(w)
    }

    pub fn tp_check(&self) -> Result<TpReport> {
        let w = self.w_vectors()?;
        self.tp_check_on(&w, true)
    }

    fn tp_check_on(
        &self,
        w: &BTreeMap<(u32, usize, bool), LabeledKet>,
        include_final: bool,
    ) -> Result<TpReport> {
        let n = self.dims.n_parties;
        let mut residuals = Vec::new();
        // first condition
        let mut lhs: Option<LabeledOperator> = None;
        for k1 in 1..=n {
            let t = w[&(0, k1, false)]
                .outer()
                .partial_trace(&[&in_name(k1), &ancilla_name(1)])?;
            lhs = Some(match lhs {
                None => t,
                Some(a) => a.add(&t)?,
            });
        }
        let idp = LabeledOperator::identity(vec![self.dims.past()])?;
        residuals.push(("n=0".into(), diff_norm(&lhs.unwrap(), &idp)?));
        // intermediate and final conditions, per set K_n
        for mask in 1u32..(1 << n) {
            let members = mask_members(mask, n);
            let size = members.len();
            if size == n && !include_final {
                continue;
            }
            let mut rhs: Option<LabeledOperator> = None;
            for &k in &members {
                let prev_mask = mask & !(1 << (k - 1));
                let t = w[&(prev_mask, k, false)]
                    .outer()
                    .partial_trace(&[&ancilla_name(size)])?
                    .tensor(&LabeledOperator::identity(vec![self.dims.party_out(k)])?)?;
                rhs = Some(match rhs {
                    None => t,
                    Some(a) => a.add(&t)?,
                });
            }
            let rhs = rhs.unwrap();
            let lhs = if size < n {
                let mut acc: Option<LabeledOperator> = None;
                for k in 1..=n {
                    if mask & (1 << (k - 1)) == 0 {
                        let t = w[&(mask, k, false)]
                            .outer()
                            .partial_trace(&[&in_name(k), &ancilla_name(size + 1)])?;
                        acc = Some(match acc {
                            None => t,
                            Some(a) => a.add(&t)?,
                        });
                    }
                }
                acc.unwrap()
            } else {
                w[&(mask, 0, true)].outer().partial_trace(&["F", "aF"])?
            };
            residuals.push((format!("K={members:?}"), diff_norm(&lhs, &rhs)?));
        }
        Ok(TpReport { residuals, min_op_eigenvalue: 0.0, tol: TP_TOL })
    }

    /// `W = Tr_{aF} |w_(N,F)><w_(N,F)|`.
    pub fn build(&self) -> Result<ProcessMatrix> {
        let w = self.w_vectors()?;
        let report = self.tp_check_on(&w, true)?;
        if !report.passes() {
            return Err(CircuitError::TpFailure(report.max_residual(), report.tol));
        }
        let full = &w[&((1 << self.dims.n_parties) - 1, 0, true)];
        let op = full.outer().partial_trace(&["aF"])?;
        Ok(ProcessMatrix::new(self.dims.clone(), op)?)
    }

    /// The certifying decomposition `{W_(K_{n-1},k_n)}` keyed by
    /// `(mask, k_n)`.
    pub fn decomposition(&self) -> Result<QcDecomposition> {
        let n = self.dims.n_parties;
        let w = self.w_vectors()?;
        let mut blocks = BTreeMap::new();
        for ((mask, k, fut), ket) in &w {
            if *fut {
                continue;
            }
            let size = mask_members(*mask, n).len() + 1;
            blocks.insert((*mask, *k), ket.outer().partial_trace(&[&ancilla_name(size)])?);
        }
        Ok(QcDecomposition { blocks })
    }
}

/// `{W_(K_{n-1},k_n)}` blocks certifying QC-QC membership, keyed by the
/// bitmask of `K_{n-1}` and the current party.
#[derive(Clone, Debug)]
pub struct QcDecomposition {
    pub blocks: BTreeMap<(u32, usize), LabeledOperator>,
}

// ---------------------------------------------------------------------------
// Probabilistic circuits
// ---------------------------------------------------------------------------

/// A set of probabilistic process matrices (a quantum superinstrument once
/// the sum is a valid process).
#[derive(Clone, Debug)]
pub struct ProcessSet {
    pub dims: ProcessDims,
    pub ws: Vec<LabeledOperator>,
}

impl ProcessSet {
    pub fn sum(&self) -> Result<ProcessMatrix> {
        let mut acc: Option<LabeledOperator> = None;
        for w in &self.ws {
            acc = Some(match acc {
                None => w.clone(),
                Some(a) => a.add(w)?,
            });
        }
        Ok(ProcessMatrix::new(self.dims.clone(), acc.ok_or_else(|| {
            CircuitError::Other("empty process set".into())
        })?)?)
    }
}

/// Deterministic layers plus an outcome-indexed last layer. The paper's
/// canonical form: post-selection happens only in the final internal
/// operation.
#[derive(Clone, Debug)]
pub enum ProbabilisticDescription {
    Fo { base: QcFoDescription, last: Vec<LabeledOperator> },
    Par { base: QcParDescription, last: Vec<LabeledOperator> },
    Cc { base: QcCcDescription, last: Vec<BTreeMap<Vec<usize>, LabeledOperator>> },
    Qc { base: QcQcDescription, last: Vec<BTreeMap<usize, LabeledKet>> },
}

impl ProbabilisticDescription {
    pub fn n_outcomes(&self) -> usize {
        match self {
            ProbabilisticDescription::Fo { last, .. } => last.len(),
            ProbabilisticDescription::Par { last, .. } => last.len(),
            ProbabilisticDescription::Cc { last, .. } => last.len(),
            ProbabilisticDescription::Qc { last, .. } => last.len(),
        }
    }

    pub fn dims(&self) -> &ProcessDims {
        match self {
            ProbabilisticDescription::Fo { base, .. } => &base.dims,
            ProbabilisticDescription::Par { base, .. } => &base.dims,
            ProbabilisticDescription::Cc { base, .. } => &base.dims,
            ProbabilisticDescription::Qc { base, .. } => &base.dims,
        }
    }

    /// TP check: deterministic conditions for the first `N` layers, and the
    /// last condition with the outcome sum substituted for the final layer.
    pub fn tp_check(&self) -> Result<TpReport> {
        if self.n_outcomes() == 0 {
            return Err(CircuitError::Other("empty outcome set".into()));
        }
        match self {
            ProbabilisticDescription::Fo { base, last } => {
                let mut sum = last[0].clone();
                for op in &last[1..] {
                    sum = sum.add(op)?;
                }
                let mut subst = base.clone();
                let n = subst.ops.len();
                subst.ops[n - 1] = sum;
                subst.tp_check()
            }
            ProbabilisticDescription::Par { base, last } => {
                let mut sum = last[0].clone();
                for op in &last[1..] {
                    sum = sum.add(op)?;
                }
                let mut subst = base.clone();
                subst.m_f = sum;
                subst.tp_check()
            }
            ProbabilisticDescription::Cc { base, last } => {
                let mut sums: BTreeMap<Vec<usize>, LabeledOperator> = BTreeMap::new();
                for branch in last {
                    for (seq, op) in branch {
                        let e = match sums.remove(seq) {
                            None => op.clone(),
                            Some(a) => a.add(op)?,
                        };
                        sums.insert(seq.clone(), e);
                    }
                }
                base.tp_check_with_last(Some(&sums))
            }
            ProbabilisticDescription::Qc { base, last } => {
                // the last condition sums |w^{[r]}><w^{[r]}| over outcomes
                let n = base.dims.n_parties;
                let full_mask = (1u32 << n) - 1;
                let mut residuals = Vec::new();
                let w0 = base.w_vectors_with_last(Some(&last[0]))?;
                let base_report = base.tp_check_on(&w0, false)?;
                residuals.extend(base_report.residuals);
                // final condition with outcome sum
                let mut lhs: Option<LabeledOperator> = None;
                for branch in last {
                    let w = base.w_vectors_with_last(Some(branch))?;
                    let t = w[&(full_mask, 0, true)].outer().partial_trace(&["F", "aF"])?;
                    lhs = Some(match lhs {
                        None => t,
                        Some(a) => a.add(&t)?,
                    });
                }
                let mut rhs: Option<LabeledOperator> = None;
                for k in 1..=n {
                    let prev_mask = full_mask & !(1 << (k - 1));
                    let t = w0[&(prev_mask, k, false)]
                        .outer()
                        .partial_trace(&[&ancilla_name(n)])?
                        .tensor(&LabeledOperator::identity(vec![base.dims.party_out(k)])?)?;
                    rhs = Some(match rhs {
                        None => t,
                        Some(a) => a.add(&t)?,
                    });
                }
                residuals.push(("K=N (outcome sum)".into(), diff_norm(&lhs.unwrap(), &rhs.unwrap())?));
                Ok(TpReport { residuals, min_op_eigenvalue: 0.0, tol: TP_TOL })
            }
        }
    }

    /// Builds the outcome-indexed probabilistic process matrices `{W^[r]}`.
    pub fn build(&self) -> Result<ProcessSet> {
        let report = self.tp_check()?;
        if !report.passes() {
            return Err(CircuitError::TpFailure(report.max_residual(), report.tol));
        }
        let dims = self.dims().clone();
        let ws = match self {
            ProbabilisticDescription::Fo { base, last } => {
                let mut chain = base.ops[0].clone();
                for op in &base.ops[1..base.ops.len() - 1] {
                    chain = chain.link(op)?;
                }
                last.iter()
                    .map(|m| chain.link(m).map_err(CircuitError::from))
                    .collect::<Result<Vec<_>>>()?
            }
            ProbabilisticDescription::Par { base, last } => last
                .iter()
                .map(|m| base.m_p.link(m).map_err(CircuitError::from))
                .collect::<Result<Vec<_>>>()?,
            ProbabilisticDescription::Cc { base, last } => {
                let n = base.dims.n_parties;
                let cum = base.cumulative()?;
                let mut out = Vec::new();
                for branch in last {
                    let mut w: Option<LabeledOperator> = None;
                    for (seq, c) in cum.iter().filter(|(s, _)| s.len() == n) {
                        let m = branch
                            .get(seq)
                            .ok_or_else(|| CircuitError::MissingOp(format!("last layer {seq:?}")))?;
                        let term = c.link(m)?;
                        w = Some(match w {
                            None => term,
                            Some(a) => a.add(&term)?,
                        });
                    }
                    out.push(w.unwrap());
                }
                out
            }
            ProbabilisticDescription::Qc { base, last } => {
                let full_mask = (1u32 << base.dims.n_parties) - 1;
                let mut out = Vec::new();
                for branch in last {
                    let w = base.w_vectors_with_last(Some(branch))?;
                    out.push(w[&(full_mask, 0, true)].outer().partial_trace(&["aF"])?);
                }
                out
            }
        };
        Ok(ProcessSet { dims, ws })
    }
}

/// One description of any class.
#[derive(Clone, Debug)]
pub enum CircuitDescription {
    Fo(QcFoDescription),
    Par(QcParDescription),
    Cc(QcCcDescription),
    Qc(QcQcDescription),
}

impl CircuitDescription {
    pub fn tp_check(&self) -> Result<TpReport> {
        match self {
            CircuitDescription::Fo(d) => d.tp_check(),
            CircuitDescription::Par(d) => d.tp_check(),
            CircuitDescription::Cc(d) => d.tp_check(),
            CircuitDescription::Qc(d) => d.tp_check(),
        }
    }

    pub fn build(&self) -> Result<ProcessMatrix> {
        match self {
            CircuitDescription::Fo(d) => d.build(),
            CircuitDescription::Par(d) => d.build(),
            CircuitDescription::Cc(d) => d.build(),
            CircuitDescription::Qc(d) => d.build(),
        }
    }

    pub fn dims(&self) -> &ProcessDims {
        match self {
            CircuitDescription::Fo(d) => &d.dims,
            CircuitDescription::Par(d) => &d.dims,
            CircuitDescription::Cc(d) => &d.dims,
            CircuitDescription::Qc(d) => &d.dims,
        }
    }

    pub fn class_tag(&self) -> &'static str {
        match self {
            CircuitDescription::Fo(_) => "fo",
            CircuitDescription::Par(_) => "par",
            CircuitDescription::Cc(_) => "cc",
            CircuitDescription::Qc(_) => "qc",
        }
    }
}

fn check_factors_match(got: &[SystemLabel], expect: &[SystemLabel], what: &str) -> Result<()> {
    let mut g: Vec<SystemLabel> = got.to_vec();
    let mut e: Vec<SystemLabel> = expect.to_vec();
    g.sort_by(|a, b| a.name.cmp(&b.name));
    e.sort_by(|a, b| a.name.cmp(&b.name));
    if g != e {
        return Err(CircuitError::WrongFactors(
            what.to_string(),
            format!("{expect:?}"),
            format!("{got:?}"),
        ));
    }
    Ok(())
}

fn check_factors_match_ket(got: &[SystemLabel], expect: &[SystemLabel], what: &str) -> Result<()> {
    check_factors_match(got, expect, what)
}

/// Identity-channel Choi matrix `|1>><<1|^{X Y}` as an operator.
pub fn identity_choi(x: SystemLabel, y: SystemLabel) -> Result<LabeledOperator> {
    Ok(crate::tensor::max_entangled(x, y)?.outer())
}

/// Decoheres the control of a quantum-controlled circuit: projecting the
/// control onto its classical basis before each time slot turns every
/// internal ket into the corresponding classical instrument element, giving
/// a classically-controlled circuit over the same dimensions.
pub fn decohere_control(qc: &QcQcDescription) -> Result<QcCcDescription> {
    let dims = qc.dims.clone();
    let probe = QcCcDescription {
        dims: dims.clone(),
        ancilla_dims: qc.ancilla_dims.clone(),
        ops: BTreeMap::new(),
    };
    let mut ops = BTreeMap::new();
    for seq in probe.all_sequences() {
        for target in probe.continuations(&seq) {
            let key = if seq.is_empty() {
                match target {
                    Target::Party(k) => QcqcKey::first(k),
                    Target::Future => unreachable!("empty sequence routes to a party"),
                }
            } else {
                let done = &seq[..seq.len() - 1];
                let cur = seq[seq.len() - 1];
                match target {
                    Target::Party(k) => QcqcKey::mid(done, cur, k),
                    Target::Future => QcqcKey::last(done, cur),
                }
            };
            let ket = qc
                .ops
                .get(&key)
                .ok_or_else(|| CircuitError::MissingOp(format!("{key:?}")))?;
            let m = match target {
                Target::Future => ket.outer().partial_trace(&["aF"])?,
                Target::Party(_) => ket.outer(),
            };
            ops.insert((seq.clone(), target), m);
        }
    }
    QcCcDescription::new(dims, qc.ancilla_dims.clone(), ops)
}

pub use permutations as all_orders;

#[cfg(test)]
mod tests;
