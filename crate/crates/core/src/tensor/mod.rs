//! Labeled finite-dimensional tensor algebra.
//!
//! Kets and operators carry an ordered list of named tensor factors with
//! fixed computational bases. All contractions are keyed by factor *name*:
//! the link product `a * b` contracts every factor the two arguments share
//! and tensors the rest, which is exactly composition of maps at the Choi
//! level. Storage is dense, row-major, double-precision complex.

mod contraction;
pub mod io;

use num_complex::Complex64;
use std::fmt;
use thiserror::Error;

use contraction::{contract, permute_axes};

/// Relative tolerance for Hermiticity checks.
pub const HERM_TOL: f64 = 1e-10;

pub type Cplx = Complex64;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("dimension mismatch on factor `{0}`: {1} vs {2}")]
    DimMismatch(String, usize, usize),
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),
    #[error("duplicate factor `{0}`")]
    DuplicateFactor(String),
    #[error("data length {0} does not match factor dimensions (expected {1})")]
    ShapeMismatch(usize, usize),
    #[error("factor dimension must be >= 1")]
    ZeroDim,
    #[error("empty Kraus list")]
    EmptyKraus,
    #[error("{0}")]
    Other(String),
}

type Result<T> = std::result::Result<T, TensorError>;

/// A named, dimensioned tensor factor (one Hilbert-space slot).
#[derive(Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SystemLabel {
    pub name: String,
    pub dim: usize,
}

impl SystemLabel {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        SystemLabel { name: name.into(), dim }
    }
}

impl fmt::Debug for SystemLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.dim)
    }
}

/// Canonical ordering of factor names: P-family, then party slots `A{k}I` /
/// `A{k}O` ascending in k with I before O, then numbered ancillas `a{n}`
/// (with `aF` after all numbered ones), then everything else, then the
/// F-family, then the outcome-extension factor `Fp`.
fn canonical_key(name: &str) -> (u8, u64, u8, String) {
    if name == "Fp" {
        return (5, 0, 0, name.to_string());
    }
    if name == "F" || (name.len() == 2 && name.starts_with('F')) {
        return (4, 0, 0, name.to_string());
    }
    if name == "P" || (name.len() == 2 && name.starts_with('P')) {
        return (0, 0, 0, name.to_string());
    }
    if let Some(rest) = name.strip_prefix('A') {
        if rest.len() >= 2 {
            let (num, io) = rest.split_at(rest.len() - 1);
            if let Ok(k) = num.parse::<u64>() {
                if io == "I" {
                    return (1, k, 0, name.to_string());
                }
                if io == "O" {
                    return (1, k, 1, name.to_string());
                }
            }
        }
    }
    if let Some(rest) = name.strip_prefix('a') {
        if rest == "F" {
            return (2, u64::MAX, 0, name.to_string());
        }
        if let Ok(n) = rest.parse::<u64>() {
            return (2, n, 0, name.to_string());
        }
    }
    (3, 0, 0, name.to_string())
}

fn canonical_perm(factors: &[SystemLabel]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..factors.len()).collect();
    idx.sort_by_key(|&i| canonical_key(&factors[i].name));
    idx
}

fn check_factors(factors: &[SystemLabel]) -> Result<usize> {
    let mut total = 1usize;
    for (i, f) in factors.iter().enumerate() {
        if f.dim == 0 {
            return Err(TensorError::ZeroDim);
        }
        if factors[..i].iter().any(|g| g.name == f.name) {
            return Err(TensorError::DuplicateFactor(f.name.clone()));
        }
        total *= f.dim;
    }
    Ok(total)
}

fn positions_of(factors: &[SystemLabel], names: &[&str]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            factors
                .iter()
                .position(|f| &f.name == n)
                .ok_or_else(|| TensorError::UnknownFactor(n.to_string()))
        })
        .collect()
}

/// Pure state / Choi vector over labeled factors, row-major amplitudes.
#[derive(Clone, PartialEq)]
pub struct LabeledKet {
    factors: Vec<SystemLabel>,
    amps: Vec<Cplx>,
}

/// Square operator over labeled factors, row-major `side x side` entries.
#[derive(Clone, PartialEq)]
pub struct LabeledOperator {
    factors: Vec<SystemLabel>,
    side: usize,
    entries: Vec<Cplx>,
}

impl fmt::Debug for LabeledKet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabeledKet{:?} dim {}", self.factors, self.amps.len())
    }
}

impl fmt::Debug for LabeledOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LabeledOperator{:?} side {}", self.factors, self.side)
    }
}

impl LabeledKet {
    pub fn new(factors: Vec<SystemLabel>, amps: Vec<Cplx>) -> Result<Self> {
        let total = check_factors(&factors)?;
        if amps.len() != total {
            return Err(TensorError::ShapeMismatch(amps.len(), total));
        }
        Ok(LabeledKet { factors, amps })
    }

    pub fn zeros(factors: Vec<SystemLabel>) -> Result<Self> {
        let total = check_factors(&factors)?;
        Ok(LabeledKet { factors, amps: vec![Cplx::new(0.0, 0.0); total] })
    }

    /// Scalar ket (no factors, single amplitude).
    pub fn scalar(v: Cplx) -> Self {
        LabeledKet { factors: vec![], amps: vec![v] }
    }

    /// Computational basis state `|i>` on a single factor.
    pub fn basis(label: SystemLabel, i: usize) -> Result<Self> {
        if i >= label.dim {
            return Err(TensorError::Other(format!("basis index {} out of range for {:?}", i, label)));
        }
        let mut amps = vec![Cplx::new(0.0, 0.0); label.dim];
        amps[i] = Cplx::new(1.0, 0.0);
        Ok(LabeledKet { factors: vec![label], amps })
    }

    pub fn factors(&self) -> &[SystemLabel] {
        &self.factors
    }

    pub fn amplitudes(&self) -> &[Cplx] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Cplx] {
        &mut self.amps
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm2(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn scale(&self, s: Cplx) -> Self {
        LabeledKet {
            factors: self.factors.clone(),
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    /// Sum of two kets over the same factor set (reorders `other` as needed).
    pub fn add(&self, other: &LabeledKet) -> Result<Self> {
        let names: Vec<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        let o = other.reorder(&names)?;
        if o.factors != self.factors {
            return Err(TensorError::Other("factor sets differ in ket addition".into()));
        }
        let amps = self.amps.iter().zip(&o.amps).map(|(a, b)| a + b).collect();
        Ok(LabeledKet { factors: self.factors.clone(), amps })
    }

    /// `<self|other>` with the conjugate on `self`.
    pub fn dot(&self, other: &LabeledKet) -> Result<Cplx> {
        let names: Vec<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        let o = other.reorder(&names)?;
        Ok(self.amps.iter().zip(&o.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Reorder factors to the given name order (must be a permutation).
    pub fn reorder(&self, names: &[&str]) -> Result<Self> {
        if names.len() != self.factors.len() {
            return Err(TensorError::Other("reorder: wrong number of names".into()));
        }
        let perm = positions_of(&self.factors, names)?;
        let dims = self.dims();
        let amps = permute_axes(&self.amps, &dims, &perm);
        let factors = perm.iter().map(|&i| self.factors[i].clone()).collect();
        Ok(LabeledKet { factors, amps })
    }

    pub fn canonicalize(&self) -> Self {
        let perm = canonical_perm(&self.factors);
        let dims = self.dims();
        let amps = permute_axes(&self.amps, &dims, &perm);
        let factors = perm.iter().map(|&i| self.factors[i].clone()).collect();
        LabeledKet { factors, amps }
    }

    pub fn conj(&self) -> Self {
        LabeledKet {
            factors: self.factors.clone(),
            amps: self.amps.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Tensor product; factor sets must be disjoint.
    pub fn tensor(&self, other: &LabeledKet) -> Result<Self> {
        for f in &other.factors {
            if self.factors.iter().any(|g| g.name == f.name) {
                return Err(TensorError::DuplicateFactor(f.name.clone()));
            }
        }
        self.link(other)
    }

    /// Link product: contracts all factors shared by name, tensors the rest.
    /// The result's factors are in canonical order.
    pub fn link(&self, other: &LabeledKet) -> Result<Self> {
        let (a_con, b_con) = shared_positions(&self.factors, &other.factors)?;
        let a_dims = self.dims();
        let b_dims = other.dims();
        let (data, _) = contract(&self.amps, &a_dims, &a_con, &other.amps, &b_dims, &b_con);
        let mut factors: Vec<SystemLabel> = Vec::new();
        for (i, f) in self.factors.iter().enumerate() {
            if !a_con.contains(&i) {
                factors.push(f.clone());
            }
        }
        for (j, f) in other.factors.iter().enumerate() {
            if !b_con.contains(&j) {
                factors.push(f.clone());
            }
        }
        LabeledKet { factors, amps: data }.canonicalize_ok()
    }

    fn canonicalize_ok(self) -> Result<Self> {
        Ok(self.canonicalize())
    }

    /// `|self><self|`.
    pub fn outer(&self) -> LabeledOperator {
        let n = self.amps.len();
        let mut entries = vec![Cplx::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c] = self.amps[r] * self.amps[c].conj();
            }
        }
        LabeledOperator { factors: self.factors.clone(), side: n, entries }
    }

    /// Merge consecutive factors (after reordering them together) into one.
    pub fn merge_factors(&self, names: &[&str], new_name: &str, ) -> Result<Self> {
        let (order, merged) = merge_order(&self.factors, names, new_name)?;
        let k = self.reorder(&order)?;
        Ok(LabeledKet { factors: merged, amps: k.amps })
    }

    /// Split one factor into several (product of dims must match).
    pub fn split_factor(&self, name: &str, parts: &[SystemLabel]) -> Result<Self> {
        let factors = split_factors(&self.factors, name, parts)?;
        Ok(LabeledKet { factors, amps: self.amps.clone() })
    }

    /// Drop factors of dimension 1 with the given names.
    pub fn drop_trivial(&self, names: &[&str]) -> Result<Self> {
        let pos = positions_of(&self.factors, names)?;
        for &p in &pos {
            if self.factors[p].dim != 1 {
                return Err(TensorError::Other(format!(
                    "factor `{}` has dim {} != 1",
                    self.factors[p].name, self.factors[p].dim
                )));
            }
        }
        let factors = self
            .factors
            .iter()
            .enumerate()
            .filter(|(i, _)| !pos.contains(i))
            .map(|(_, f)| f.clone())
            .collect();
        Ok(LabeledKet { factors, amps: self.amps.clone() })
    }
}

impl LabeledOperator {
    pub fn new(factors: Vec<SystemLabel>, entries: Vec<Cplx>) -> Result<Self> {
        let side = check_factors(&factors)?;
        if entries.len() != side * side {
            return Err(TensorError::ShapeMismatch(entries.len(), side * side));
        }
        Ok(LabeledOperator { factors, side, entries })
    }

    pub fn zeros(factors: Vec<SystemLabel>) -> Result<Self> {
        let side = check_factors(&factors)?;
        Ok(LabeledOperator { factors, side, entries: vec![Cplx::new(0.0, 0.0); side * side] })
    }

    pub fn scalar(v: Cplx) -> Self {
        LabeledOperator { factors: vec![], side: 1, entries: vec![v] }
    }

    pub fn identity(factors: Vec<SystemLabel>) -> Result<Self> {
        let side = check_factors(&factors)?;
        let mut entries = vec![Cplx::new(0.0, 0.0); side * side];
        for i in 0..side {
            entries[i * side + i] = Cplx::new(1.0, 0.0);
        }
        Ok(LabeledOperator { factors, side, entries })
    }

    pub fn factors(&self) -> &[SystemLabel] {
        &self.factors
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn entries(&self) -> &[Cplx] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Cplx] {
        &mut self.entries
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }

    pub fn get(&self, r: usize, c: usize) -> Cplx {
        self.entries[r * self.side + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Cplx) {
        self.entries[r * self.side + c] = v;
    }

    pub fn trace(&self) -> Cplx {
        (0..self.side).map(|i| self.entries[i * self.side + i]).sum()
    }

    pub fn scale(&self, s: Cplx) -> Self {
        LabeledOperator {
            factors: self.factors.clone(),
            side: self.side,
            entries: self.entries.iter().map(|a| a * s).collect(),
        }
    }

    pub fn add(&self, other: &LabeledOperator) -> Result<Self> {
        let names: Vec<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        let o = other.reorder(&names)?;
        if o.factors != self.factors {
            return Err(TensorError::Other("factor sets differ in operator addition".into()));
        }
        let entries = self.entries.iter().zip(&o.entries).map(|(a, b)| a + b).collect();
        Ok(LabeledOperator { factors: self.factors.clone(), side: self.side, entries })
    }

    pub fn sub(&self, other: &LabeledOperator) -> Result<Self> {
        self.add(&other.scale(Cplx::new(-1.0, 0.0)))
    }

    pub fn adjoint(&self) -> Self {
        let n = self.side;
        let mut entries = vec![Cplx::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c] = self.entries[c * n + r].conj();
            }
        }
        LabeledOperator { factors: self.factors.clone(), side: n, entries }
    }

    pub fn transpose(&self) -> Self {
        let n = self.side;
        let mut entries = vec![Cplx::new(0.0, 0.0); n * n];
        for r in 0..n {
            for c in 0..n {
                entries[r * n + c] = self.entries[c * n + r];
            }
        }
        LabeledOperator { factors: self.factors.clone(), side: n, entries }
    }

    pub fn conj(&self) -> Self {
        LabeledOperator {
            factors: self.factors.clone(),
            side: self.side,
            entries: self.entries.iter().map(|a| a.conj()).collect(),
        }
    }

    /// Matrix product (same factor set; `other` is reordered to match).
    pub fn matmul(&self, other: &LabeledOperator) -> Result<Self> {
        let names: Vec<&str> = self.factors.iter().map(|f| f.name.as_str()).collect();
        let o = other.reorder(&names)?;
        let n = self.side;
        let mut entries = vec![Cplx::new(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let a = self.entries[r * n + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    entries[r * n + c] += a * o.entries[k * n + c];
                }
            }
        }
        Ok(LabeledOperator { factors: self.factors.clone(), side: n, entries })
    }

    pub fn reorder(&self, names: &[&str]) -> Result<Self> {
        if names.len() != self.factors.len() {
            return Err(TensorError::Other("reorder: wrong number of names".into()));
        }
        let perm = positions_of(&self.factors, names)?;
        Ok(self.apply_perm(&perm))
    }

    fn apply_perm(&self, perm: &[usize]) -> Self {
        let m = self.factors.len();
        let mut dims = self.dims();
        let mut all_dims = dims.clone();
        all_dims.append(&mut dims);
        // rows and columns permuted together
        let mut full_perm: Vec<usize> = perm.to_vec();
        full_perm.extend(perm.iter().map(|&i| i + m));
        let entries = permute_axes(&self.entries, &all_dims, &full_perm);
        let factors = perm.iter().map(|&i| self.factors[i].clone()).collect();
        LabeledOperator { factors, side: self.side, entries }
    }

    pub fn canonicalize(&self) -> Self {
        let perm = canonical_perm(&self.factors);
        self.apply_perm(&perm)
    }

    /// Partial trace over the named factors.
    pub fn partial_trace(&self, names: &[&str]) -> Result<Self> {
        let pos = positions_of(&self.factors, names)?;
        if pos.is_empty() {
            return Ok(self.clone());
        }
        // reorder so traced factors are last
        let mut keep: Vec<usize> = (0..self.factors.len()).filter(|i| !pos.contains(i)).collect();
        let keep_len = keep.len();
        keep.extend(&pos);
        let re = self.apply_perm(&keep);
        let traced_dim: usize = re.factors[keep_len..].iter().map(|f| f.dim).product();
        let kept_dim = re.side / traced_dim;
        let mut entries = vec![Cplx::new(0.0, 0.0); kept_dim * kept_dim];
        for r in 0..kept_dim {
            for c in 0..kept_dim {
                let mut s = Cplx::new(0.0, 0.0);
                for t in 0..traced_dim {
                    s += re.entries[(r * traced_dim + t) * re.side + c * traced_dim + t];
                }
                entries[r * kept_dim + c] = s;
            }
        }
        let factors = re.factors[..keep_len].to_vec();
        Ok(LabeledOperator { factors, side: kept_dim, entries })
    }

    /// Partial transpose over the named factors (computational basis).
    pub fn partial_transpose(&self, names: &[&str]) -> Result<Self> {
        let pos = positions_of(&self.factors, names)?;
        let dims = self.dims();
        let m = dims.len();
        let mut strides = vec![1usize; m];
        for i in (0..m - 1).rev() {
            strides[i] = strides[i + 1] * dims[i + 1];
        }
        let n = self.side;
        let mut entries = vec![Cplx::new(0.0, 0.0); n * n];
        let mut ridx = vec![0usize; m];
        for r in 0..n {
            // decode r
            let mut rr = r;
            for i in 0..m {
                ridx[i] = rr / strides[i];
                rr %= strides[i];
            }
            let mut cidx = vec![0usize; m];
            for c in 0..n {
                let mut cc = c;
                for i in 0..m {
                    cidx[i] = cc / strides[i];
                    cc %= strides[i];
                }
                // swap row/col indices on transposed factors
                let mut r2 = 0usize;
                let mut c2 = 0usize;
                for i in 0..m {
                    let (ri, ci) = if pos.contains(&i) { (cidx[i], ridx[i]) } else { (ridx[i], cidx[i]) };
                    r2 += ri * strides[i];
                    c2 += ci * strides[i];
                }
                entries[r2 * n + c2] = self.entries[r * n + c];
            }
        }
        Ok(LabeledOperator { factors: self.factors.clone(), side: n, entries })
    }

    /// Tensor product; factor sets must be disjoint.
    pub fn tensor(&self, other: &LabeledOperator) -> Result<Self> {
        for f in &other.factors {
            if self.factors.iter().any(|g| g.name == f.name) {
                return Err(TensorError::DuplicateFactor(f.name.clone()));
            }
        }
        self.link(other)
    }

    /// Mixed-case link product: contracts shared factors, tensors the rest.
    /// Result factors in canonical order; full contraction gives a scalar
    /// operator with no factors.
    pub fn link(&self, other: &LabeledOperator) -> Result<Self> {
        let (a_con, b_con) = shared_positions(&self.factors, &other.factors)?;
        let ma = self.factors.len();
        let mb = other.factors.len();
        // operator as 2m-axis tensor: row axes then column axes.
        let mut a_dims = self.dims();
        a_dims.extend(self.dims());
        let mut b_dims = other.dims();
        b_dims.extend(other.dims());
        // contract row-with-row and col-with-col on shared factors
        let mut a_axes: Vec<usize> = a_con.clone();
        a_axes.extend(a_con.iter().map(|&i| i + ma));
        let mut b_axes: Vec<usize> = b_con.clone();
        b_axes.extend(b_con.iter().map(|&j| j + mb));
        let (data, out_dims) = contract(&self.entries, &a_dims, &a_axes, &other.entries, &b_dims, &b_axes);
        // output axes: [a free rows, a free cols, b free rows, b free cols]
        let a_free: Vec<usize> = (0..ma).filter(|i| !a_con.contains(i)).collect();
        let b_free: Vec<usize> = (0..mb).filter(|j| !b_con.contains(j)).collect();
        let fa = a_free.len();
        let fb = b_free.len();
        // permute to [a free rows, b free rows, a free cols, b free cols]
        let mut perm: Vec<usize> = Vec::with_capacity(2 * (fa + fb));
        perm.extend(0..fa);
        perm.extend(2 * fa..2 * fa + fb);
        perm.extend(fa..2 * fa);
        perm.extend(2 * fa + fb..2 * fa + 2 * fb);
        let data = permute_axes(&data, &out_dims, &perm);
        let mut factors: Vec<SystemLabel> = a_free.iter().map(|&i| self.factors[i].clone()).collect();
        factors.extend(b_free.iter().map(|&j| other.factors[j].clone()));
        let side: usize = factors.iter().map(|f| f.dim).product();
        Ok(LabeledOperator { factors, side, entries: data }.canonicalize())
    }

    /// Applies a map to a state at the Choi level: `rho * M`.
    pub fn apply_choi(rho: &LabeledOperator, m: &LabeledOperator) -> Result<LabeledOperator> {
        rho.link(m)
    }

    pub fn merge_factors(&self, names: &[&str], new_name: &str) -> Result<Self> {
        let (order, merged) = merge_order(&self.factors, names, new_name)?;
        let o = self.reorder(&order)?;
        Ok(LabeledOperator { factors: merged, side: o.side, entries: o.entries })
    }

    pub fn split_factor(&self, name: &str, parts: &[SystemLabel]) -> Result<Self> {
        let factors = split_factors(&self.factors, name, parts)?;
        Ok(LabeledOperator { factors, side: self.side, entries: self.entries.clone() })
    }

    pub fn drop_trivial(&self, names: &[&str]) -> Result<Self> {
        let pos = positions_of(&self.factors, names)?;
        for &p in &pos {
            if self.factors[p].dim != 1 {
                return Err(TensorError::Other(format!(
                    "factor `{}` has dim {} != 1",
                    self.factors[p].name, self.factors[p].dim
                )));
            }
        }
        let factors = self
            .factors
            .iter()
            .enumerate()
            .filter(|(i, _)| !pos.contains(i))
            .map(|(_, f)| f.clone())
            .collect();
        Ok(LabeledOperator { factors, side: self.side, entries: self.entries.clone() })
    }

    /// Renames a factor (dimension unchanged).
    pub fn rename_factor(&self, old: &str, new: &str) -> Result<Self> {
        let mut factors = self.factors.clone();
        let p = factors
            .iter()
            .position(|f| f.name == old)
            .ok_or_else(|| TensorError::UnknownFactor(old.to_string()))?;
        factors[p].name = new.to_string();
        check_factors(&factors)?;
        Ok(LabeledOperator { factors, side: self.side, entries: self.entries.clone() })
    }

    pub fn frob_norm(&self) -> f64 {
        self.entries.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Max absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn herm_residual(&self) -> f64 {
        let n = self.side;
        let mut r = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let d = (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm();
                if d > r {
                    r = d;
                }
            }
        }
        r
    }

    pub fn is_hermitian(&self, rel_tol: f64) -> bool {
        self.herm_residual() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Eigenvalues and eigenvectors of a Hermitian operator, ascending.
    pub fn herm_eigen(&self) -> (Vec<f64>, Vec<LabeledKet>) {
        let n = self.side;
        let mut m = faer::Mat::<faer::complex_native::c64>::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                let e = self.entries[r * n + c];
                m[(r, c)] = faer::complex_native::c64::new(e.re, e.im);
            }
        }
        let e = m.selfadjoint_eigendecomposition(faer::Side::Lower);
        let s = e.s();
        let u = e.u();
        let vals: Vec<f64> = (0..n).map(|i| s.column_vector()[i].re).collect();
        let vecs: Vec<LabeledKet> = (0..n)
            .map(|i| {
                let amps: Vec<Cplx> = (0..n).map(|r| Cplx::new(u[(r, i)].re, u[(r, i)].im)).collect();
                LabeledKet { factors: self.factors.clone(), amps }
            })
            .collect();
        (vals, vecs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (vals, _) = self.herm_eigen();
        vals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_psd(&self, rel_tol: f64) -> bool {
        self.is_hermitian(HERM_TOL.max(rel_tol))
            && self.min_eigenvalue() >= -rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Moore-Penrose pseudoinverse of a Hermitian operator. Eigenvalues with
    /// `|lambda| <= cutoff * max|lambda|` are treated as zero.
    pub fn herm_pinv(&self, cutoff: f64) -> Self {
        let (vals, vecs) = self.herm_eigen();
        let vmax = vals.iter().map(|v| v.abs()).fold(0.0f64, f64::max);
        let mut out = LabeledOperator::zeros(self.factors.clone()).expect("valid factors");
        if vmax == 0.0 {
            return out;
        }
        for (v, k) in vals.iter().zip(&vecs) {
            if v.abs() > cutoff * vmax {
                let p = k.outer().scale(Cplx::new(1.0 / v, 0.0));
                out = out.add(&p).expect("same factors");
            }
        }
        out
    }
}

/// Positions of factors shared by name (same order in both outputs);
/// errors if a shared name has mismatched dims.
fn shared_positions(a: &[SystemLabel], b: &[SystemLabel]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut a_pos = Vec::new();
    let mut b_pos = Vec::new();
    for (i, f) in a.iter().enumerate() {
        if let Some(j) = b.iter().position(|g| g.name == f.name) {
            if b[j].dim != f.dim {
                return Err(TensorError::DimMismatch(f.name.clone(), f.dim, b[j].dim));
            }
            a_pos.push(i);
            b_pos.push(j);
        }
    }
    Ok((a_pos, b_pos))
}

fn merge_order<'a>(
    factors: &'a [SystemLabel],
    names: &[&'a str],
    new_name: &str,
) -> Result<(Vec<&'a str>, Vec<SystemLabel>)> {
    let pos = positions_of(factors, names)?;
    let first = *pos.iter().min().unwrap_or(&0);
    let mut order: Vec<&str> = Vec::new();
    let mut merged: Vec<SystemLabel> = Vec::new();
    let mut merged_dim = 1usize;
    for n in names {
        let p = factors.iter().position(|f| &f.name == n).unwrap();
        merged_dim *= factors[p].dim;
    }
    for (i, f) in factors.iter().enumerate() {
        if pos.contains(&i) {
            if i == first {
                for n in names {
                    order.push(n);
                }
                merged.push(SystemLabel::new(new_name, merged_dim));
            }
        } else {
            order.push(&f.name);
            merged.push(f.clone());
        }
    }
    Ok((order, merged))
}

fn split_factors(
    factors: &[SystemLabel],
    name: &str,
    parts: &[SystemLabel],
) -> Result<Vec<SystemLabel>> {
    let p = factors
        .iter()
        .position(|f| f.name == name)
        .ok_or_else(|| TensorError::UnknownFactor(name.to_string()))?;
    let prod: usize = parts.iter().map(|f| f.dim).product();
    if prod != factors[p].dim {
        return Err(TensorError::DimMismatch(name.to_string(), factors[p].dim, prod));
    }
    let mut out = factors[..p].to_vec();
    out.extend(parts.iter().cloned());
    out.extend(factors[p + 1..].iter().cloned());
    check_factors(&out)?;
    Ok(out)
}

/// The unnormalised maximally entangled ket `sum_i |i>^x |i>^x'`.
pub fn max_entangled(x: SystemLabel, x_prime: SystemLabel) -> Result<LabeledKet> {
    if x.dim != x_prime.dim {
        return Err(TensorError::DimMismatch(x_prime.name, x.dim, x_prime.dim));
    }
    let d = x.dim;
    let mut k = LabeledKet::zeros(vec![x, x_prime])?;
    for i in 0..d {
        k.amps[i * d + i] = Cplx::new(1.0, 0.0);
    }
    Ok(k)
}

/// Choi vector of a linear map given as a dense matrix `v` (rows indexed by
/// the output factors, columns by the input factors): `(1 (x) V)|1>>`.
/// The result's factors are `in_factors ++ out_factors` before
/// canonicalization.
pub fn choi_vector(
    v: &[Cplx],
    in_factors: Vec<SystemLabel>,
    out_factors: Vec<SystemLabel>,
) -> Result<LabeledKet> {
    let din: usize = in_factors.iter().map(|f| f.dim).product();
    let dout: usize = out_factors.iter().map(|f| f.dim).product();
    if v.len() != din * dout {
        return Err(TensorError::ShapeMismatch(v.len(), din * dout));
    }
    let mut factors = in_factors;
    factors.extend(out_factors);
    let mut amps = vec![Cplx::new(0.0, 0.0); din * dout];
    for i in 0..din {
        for j in 0..dout {
            amps[i * dout + j] = v[j * din + i];
        }
    }
    LabeledKet::new(factors, amps)
}

/// Recovers the map matrix from a Choi vector: inverse of [`choi_vector`].
pub fn choi_vector_inverse(
    k: &LabeledKet,
    in_names: &[&str],
    out_names: &[&str],
) -> Result<Vec<Cplx>> {
    let mut order: Vec<&str> = in_names.to_vec();
    order.extend(out_names);
    let re = k.reorder(&order)?;
    let din: usize = re.factors[..in_names.len()].iter().map(|f| f.dim).product();
    let dout: usize = re.factors[in_names.len()..].iter().map(|f| f.dim).product();
    let mut v = vec![Cplx::new(0.0, 0.0); din * dout];
    for i in 0..din {
        for j in 0..dout {
            v[j * din + i] = re.amps[i * dout + j];
        }
    }
    Ok(v)
}

/// Choi matrix of a CP map given by Kraus operators: `sum_k |V_k>><<V_k|`.
pub fn choi_matrix(
    kraus: &[Vec<Cplx>],
    in_factors: Vec<SystemLabel>,
    out_factors: Vec<SystemLabel>,
) -> Result<LabeledOperator> {
    if kraus.is_empty() {
        return Err(TensorError::EmptyKraus);
    }
    let mut acc: Option<LabeledOperator> = None;
    for v in kraus {
        let kv = choi_vector(v, in_factors.clone(), out_factors.clone())?;
        let o = kv.outer();
        acc = Some(match acc {
            None => o,
            Some(a) => a.add(&o)?,
        });
    }
    Ok(acc.unwrap())
}
