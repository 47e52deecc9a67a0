//! Process matrices: the central `W` object, its validity constraints, and
//! the reduced matrices used by the class characterizations.
//!
//! A process matrix lives on the factors `P, A1I, A1O, ..., ANI, ANO, F`
//! (trivial global past/future appear as dimension-1 factors). Validity is
//! checked by explicit residuals of each trace-out-and-replace condition
//! rather than by projecting onto a precomputed subspace basis.

use crate::tensor::{Cplx, LabeledOperator, SystemLabel, TensorError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute tolerance on validity residuals.
pub const VALIDITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ProcessError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("factor set does not match declared dimensions: {0}")]
    FactorMismatch(String),
    #[error("party index {0} out of range (N = {1})")]
    BadParty(usize, usize),
    #[error("{0}")]
    Other(String),
}

type Result<T> = std::result::Result<T, ProcessError>;

/// Dimension data for an N-party process.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessDims {
    pub n_parties: usize,
    pub d_p: usize,
    pub d_f: usize,
    pub d_in: Vec<usize>,
    pub d_out: Vec<usize>,
}

impl ProcessDims {
    pub fn new(d_p: usize, d_in: Vec<usize>, d_out: Vec<usize>, d_f: usize) -> Self {
        assert_eq!(d_in.len(), d_out.len());
        ProcessDims { n_parties: d_in.len(), d_p, d_f, d_in, d_out }
    }

    /// Uniform party dimensions `d` for `n` parties.
    pub fn uniform(n: usize, d: usize, d_p: usize, d_f: usize) -> Self {
        ProcessDims::new(d_p, vec![d; n], vec![d; n], d_f)
    }

    pub fn party_in(&self, k: usize) -> SystemLabel {
        SystemLabel::new(in_name(k), self.d_in[k - 1])
    }

    pub fn party_out(&self, k: usize) -> SystemLabel {
        SystemLabel::new(out_name(k), self.d_out[k - 1])
    }

    pub fn past(&self) -> SystemLabel {
        SystemLabel::new("P", self.d_p)
    }

    pub fn future(&self) -> SystemLabel {
        SystemLabel::new("F", self.d_f)
    }

    /// All factors in canonical order: `P, A1I, A1O, ..., F`.
    pub fn factors(&self) -> Vec<SystemLabel> {
        let mut f = vec![self.past()];
        for k in 1..=self.n_parties {
            f.push(self.party_in(k));
            f.push(self.party_out(k));
        }
        f.push(self.future());
        f
    }

    pub fn total_out(&self) -> usize {
        self.d_out.iter().product()
    }

    pub fn total_in(&self) -> usize {
        self.d_in.iter().product()
    }

    pub fn full_side(&self) -> usize {
        self.d_p * self.total_in() * self.total_out() * self.d_f
    }

    /// The expected trace of a deterministic process: `d_P * prod_k d_k^O`.
    pub fn expected_trace(&self) -> f64 {
        (self.d_p * self.total_out()) as f64
    }
}

pub fn in_name(k: usize) -> String {
    format!("A{k}I")
}

pub fn out_name(k: usize) -> String {
    format!("A{k}O")
}

/// A process matrix: Hermitian operator over `P, A_k^{I/O}, F`.
#[derive(Clone, Debug)]
pub struct ProcessMatrix {
    dims: ProcessDims,
    w: LabeledOperator,
}

impl ProcessMatrix {
    pub fn new(dims: ProcessDims, w: LabeledOperator) -> Result<Self> {
        let mut expected: Vec<SystemLabel> = dims.factors();
        expected.sort_by(|a, b| a.name.cmp(&b.name));
        let mut got: Vec<SystemLabel> = w.factors().to_vec();
        got.sort_by(|a, b| a.name.cmp(&b.name));
        if expected != got {
            return Err(ProcessError::FactorMismatch(format!(
                "expected {:?}, got {:?}",
                expected, got
            )));
        }
        let names: Vec<String> = dims.factors().iter().map(|f| f.name.clone()).collect();
        let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let w = w.reorder(&name_refs)?;
        Ok(ProcessMatrix { dims, w })
    }

    pub fn dims(&self) -> &ProcessDims {
        &self.dims
    }

    pub fn op(&self) -> &LabeledOperator {
        &self.w
    }

    pub fn into_op(self) -> LabeledOperator {
        self.w
    }

    pub fn n_parties(&self) -> usize {
        self.dims.n_parties
    }

    /// Maximally mixed process (white noise), `1 / (prod_k d_k^I * d_F)`.
    pub fn white_noise(dims: &ProcessDims) -> Self {
        let norm = 1.0 / ((dims.total_in() * dims.d_f) as f64);
        let w = LabeledOperator::identity(dims.factors())
            .expect("valid factors")
            .scale(Cplx::new(norm, 0.0));
        ProcessMatrix { dims: dims.clone(), w }
    }

    /// `W^{[PK]}`: trace over all parties outside `K` (bitmask) and `F`.
    pub fn reduced_pk(&self, k_mask: u32) -> Result<LabeledOperator> {
        let mut names: Vec<String> = vec!["F".to_string()];
        for k in 1..=self.dims.n_parties {
            if k_mask & (1 << (k - 1)) == 0 {
                names.push(in_name(k));
                names.push(out_name(k));
            }
        }
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(self.w.partial_trace(&refs)?)
    }

    /// `W^{[PKF]}`: trace over all parties outside `K` (bitmask) only.
    pub fn reduced_pkf(&self, k_mask: u32) -> Result<LabeledOperator> {
        let mut names: Vec<String> = Vec::new();
        for k in 1..=self.dims.n_parties {
            if k_mask & (1 << (k - 1)) == 0 {
                names.push(in_name(k));
                names.push(out_name(k));
            }
        }
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(self.w.partial_trace(&refs)?)
    }

    /// `W^{[P]}`: trace over everything but `P`.
    pub fn reduced_p(&self) -> Result<LabeledOperator> {
        self.reduced_pk(0)
    }

    /// Reduced matrix `W_(n)` of the fixed-order characterization, relative
    /// to `order` (a permutation of `1..=N`); `n` ranges over `1..=N+1`,
    /// with `n = N+1` giving `W` itself.
    pub fn reduced_fo(&self, order: &[usize], n: usize) -> Result<LabeledOperator> {
        let nn = self.dims.n_parties;
        if order.len() != nn || n == 0 || n > nn + 1 {
            return Err(ProcessError::BadParty(n, nn));
        }
        if n == nn + 1 {
            return Ok(self.w.clone());
        }
        // trace over A_{k_n}^O, all A_{k_m}^{IO} for m > n, and F
        let mut names: Vec<String> = vec!["F".to_string(), out_name(order[n - 1])];
        let mut denom = self.dims.d_out[order[n - 1] - 1] as f64;
        for m in n + 1..=nn {
            let k = order[m - 1];
            names.push(in_name(k));
            names.push(out_name(k));
            denom *= self.dims.d_out[k - 1] as f64;
        }
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        Ok(self.w.partial_trace(&refs)?.scale(Cplx::new(1.0 / denom, 0.0)))
    }

    /// Full validity check; see [`is_valid_process`].
    pub fn validate(&self, tol: f64) -> Result<ValidityReport> {
        is_valid_process(self, tol)
    }

    /// Fixes the preparation in the global past: returns a process with
    /// trivial `P` given a state `rho` on `P`.
    pub fn condition_on_past(&self, rho: &LabeledOperator) -> Result<ProcessMatrix> {
        if rho.factors().len() != 1 || rho.factors()[0] != self.dims.past() {
            return Err(ProcessError::Other("state must live on the P factor".into()));
        }
        let contracted = rho.link(&self.w)?;
        let w = contracted.tensor(&LabeledOperator::identity(vec![SystemLabel::new("P", 1)])?)?;
        let mut dims = self.dims.clone();
        dims.d_p = 1;
        ProcessMatrix::new(dims, w)
    }

    /// Discards the global future: returns a process with trivial `F`.
    pub fn trace_future(&self) -> Result<ProcessMatrix> {
        let traced = self.w.partial_trace(&["F"])?;
        let w = traced.tensor(&LabeledOperator::identity(vec![SystemLabel::new("F", 1)])?)?;
        let mut dims = self.dims.clone();
        dims.d_f = 1;
        ProcessMatrix::new(dims, w)
    }
}

/// `(Tr_X m) (x) 1^X / d_X`, in the original factor order.
pub fn trace_out_and_replace(m: &LabeledOperator, name: &str) -> std::result::Result<LabeledOperator, TensorError> {
    let pos = m
        .factors()
        .iter()
        .position(|f| f.name == name)
        .ok_or_else(|| TensorError::UnknownFactor(name.to_string()))?;
    let label = m.factors()[pos].clone();
    let d = label.dim as f64;
    let traced = m.partial_trace(&[name])?;
    let id = LabeledOperator::identity(vec![label])?.scale(Cplx::new(1.0 / d, 0.0));
    let out = traced.tensor(&id)?;
    let names: Vec<&str> = m.factors().iter().map(|f| f.name.as_str()).collect();
    out.reorder(&names)
}

/// `m - trace_out_and_replace(m, name)`: the `[1-X]` component.
pub fn one_minus_replace(m: &LabeledOperator, name: &str) -> std::result::Result<LabeledOperator, TensorError> {
    m.sub(&trace_out_and_replace(m, name)?)
}

/// Report from [`is_valid_process`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidityReport {
    pub psd_ok: bool,
    pub trace_ok: bool,
    pub subspace_ok: bool,
    pub min_eigenvalue: f64,
    pub trace_residual: f64,
    /// Per-condition max-norm violations, keyed by a printable condition name.
    pub residuals: Vec<(String, f64)>,
    pub tol: f64,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.psd_ok && self.trace_ok && self.subspace_ok
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

/// Checks `W >= 0`, `Tr W = d_P prod_k d_k^O`, and the subspace conditions:
/// for every nonempty `K <= N`, `prod_{k in K}[1-A_k^O] W^{[PK]} = 0`, and
/// `[1-P] W^{[P]} = 0`.
pub fn is_valid_process(w: &ProcessMatrix, tol: f64) -> Result<ValidityReport> {
    let dims = w.dims();
    let n = dims.n_parties;
    let scale = w.op().max_abs().max(f64::MIN_POSITIVE);

    let min_eig = w.op().min_eigenvalue();
    let herm = w.op().herm_residual();
    let psd_ok = herm <= 1e-10 * scale && min_eig >= -tol * scale.max(1.0);

    let tr = w.op().trace();
    let trace_residual = (tr - Cplx::new(dims.expected_trace(), 0.0)).norm();
    let trace_ok = trace_residual <= 1e-10 * dims.expected_trace().max(1.0);

    let mut residuals = Vec::new();
    for k_mask in 1u32..(1 << n) {
        let mut red = w.reduced_pk(k_mask)?;
        for k in 1..=n {
            if k_mask & (1 << (k - 1)) != 0 {
                red = one_minus_replace(&red, &out_name(k))?;
            }
        }
        let parties: Vec<String> = (1..=n)
            .filter(|k| k_mask & (1 << (k - 1)) != 0)
            .map(|k| k.to_string())
            .collect();
        residuals.push((format!("K={{{}}}", parties.join(",")), red.max_abs()));
    }
    let wp = w.reduced_p()?;
    residuals.push(("P".to_string(), one_minus_replace(&wp, "P")?.max_abs()));

    let subspace_ok = residuals.iter().all(|(_, r)| *r <= tol * scale.max(1.0));
    Ok(ValidityReport {
        psd_ok,
        trace_ok,
        subspace_ok,
        min_eigenvalue: min_eig,
        trace_residual,
        residuals,
        tol,
    })
}

/// Orthogonal projection of a full-size Hermitian operator onto the valid
/// subspace `L^{PNF}`. The condition maps commute, so applying `1 - Q` for
/// each condition in sequence projects onto the intersection.
pub fn project_validity(op: &LabeledOperator, dims: &ProcessDims) -> Result<LabeledOperator> {
    let n = dims.n_parties;
    let mut cur = op.clone();
    for k_mask in 1u32..(1 << n) {
        let mut t = trace_out_and_replace(&cur, "F")?;
        for j in 1..=n {
            if k_mask & (1 << (j - 1)) == 0 {
                t = trace_out_and_replace(&t, &in_name(j))?;
                t = trace_out_and_replace(&t, &out_name(j))?;
            }
        }
        for k in 1..=n {
            if k_mask & (1 << (k - 1)) != 0 {
                t = one_minus_replace(&t, &out_name(k))?;
            }
        }
        cur = cur.sub(&t)?;
    }
    // [1-P] on the full reduction
    let mut t = trace_out_and_replace(&cur, "F")?;
    for j in 1..=n {
        t = trace_out_and_replace(&t, &in_name(j))?;
        t = trace_out_and_replace(&t, &out_name(j))?;
    }
    t = one_minus_replace(&t, "P")?;
    cur = cur.sub(&t)?;
    Ok(cur)
}

/// Samples a random valid process matrix: a GUE matrix is projected onto the
/// valid subspace, trace-normalized, and mixed with just enough white noise
/// to be strictly positive semidefinite.
pub fn random_valid_process(
    dims: &ProcessDims,
    rng: &mut rand_chacha::ChaCha8Rng,
    noise_margin: f64,
) -> Result<ProcessMatrix> {
    let side = dims.full_side();
    let g = crate::random::gaussian_matrix(rng, side, side);
    let mut h = vec![Cplx::new(0.0, 0.0); side * side];
    for r in 0..side {
        for c in 0..side {
            h[r * side + c] = (g[r * side + c] + g[c * side + r].conj()) * Cplx::new(0.5, 0.0);
        }
    }
    let op = LabeledOperator::new(dims.factors(), h)?;
    let mut v = project_validity(&op, dims)?;
    // normalize trace
    let target = dims.expected_trace();
    let tr = v.trace().re;
    let shift = (target - tr) / side as f64;
    v = v.add(&LabeledOperator::identity(dims.factors())?.scale(Cplx::new(shift, 0.0)))?;
    // mix with white noise until strictly PSD:
    // eigmin((1-mu) V + mu W_white) >= (1-mu) lam + mu w = margin * w
    let lam = v.min_eigenvalue();
    let w_level = target / side as f64;
    let mu = if lam < noise_margin * w_level {
        (noise_margin * w_level - lam) / (w_level - lam)
    } else {
        0.0
    };
    let white = ProcessMatrix::white_noise(dims).into_op();
    let mixed = v
        .scale(Cplx::new(1.0 - mu, 0.0))
        .add(&white.scale(Cplx::new(mu, 0.0)))?;
    ProcessMatrix::new(dims.clone(), mixed)
}

/// JSON bundle for a process matrix: the operator plus dimension metadata.
#[derive(Serialize, Deserialize)]
pub struct ProcessJson {
    pub n_parties: usize,
    #[serde(rename = "d_P")]
    pub d_p: usize,
    #[serde(rename = "d_F")]
    pub d_f: usize,
    #[serde(rename = "d_I")]
    pub d_i: Vec<usize>,
    #[serde(rename = "d_O")]
    pub d_o: Vec<usize>,
    #[serde(flatten)]
    pub op: crate::tensor::io::TensorJson,
}

impl ProcessMatrix {
    pub fn to_json(&self) -> ProcessJson {
        ProcessJson {
            n_parties: self.dims.n_parties,
            d_p: self.dims.d_p,
            d_f: self.dims.d_f,
            d_i: self.dims.d_in.clone(),
            d_o: self.dims.d_out.clone(),
            op: self.w.to_json(),
        }
    }

    pub fn from_json(j: &ProcessJson, base_dir: Option<&std::path::Path>) -> Result<Self> {
        let op = LabeledOperator::from_json(&j.op, base_dir)?;
        let dims = ProcessDims::new(j.d_p, j.d_i.clone(), j.d_o.clone(), j.d_f);
        ProcessMatrix::new(dims, op)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json())
            .map_err(|e| ProcessError::Other(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| ProcessError::Other(e.to_string()))?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ProcessError::Other(format!("{}: {}", path.display(), e)))?;
        let j: ProcessJson =
            serde_json::from_str(&text).map_err(|e| ProcessError::Other(e.to_string()))?;
        ProcessMatrix::from_json(&j, path.parent())
    }
}

#[cfg(test)]
pub(crate) mod tests;
