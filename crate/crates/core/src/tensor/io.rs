//! JSON (de)serialization of kets and operators.
//!
//! Format: `{"factors": [{"name": str, "dim": int}...], "kind": "ket"|"op",
//! "data": [[re, im], ...]}` with row-major data, or `"data_file"` naming a
//! sidecar binary (little-endian f64, interleaved re/im) instead of inline
//! data. Both forms round-trip bit-exactly.

use super::{Cplx, LabeledKet, LabeledOperator, SystemLabel, TensorError};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

#[derive(Serialize, Deserialize, Clone)]
pub struct TensorJson {
    pub factors: Vec<SystemLabel>,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_file: Option<String>,
}

fn to_pairs(data: &[Cplx]) -> Vec<[f64; 2]> {
    data.iter().map(|c| [c.re, c.im]).collect()
}

fn from_pairs(pairs: &[[f64; 2]]) -> Vec<Cplx> {
    pairs.iter().map(|p| Cplx::new(p[0], p[1])).collect()
}

fn write_sidecar(path: &Path, data: &[Cplx]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(data.len() * 16);
    for c in data {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)
}

fn read_sidecar(path: &Path, len: usize) -> Result<Vec<Cplx>, TensorError> {
    let mut f = fs::File::open(path).map_err(|e| TensorError::Other(format!("{}: {}", path.display(), e)))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| TensorError::Other(e.to_string()))?;
    if buf.len() != len * 16 {
        return Err(TensorError::ShapeMismatch(buf.len() / 16, len));
    }
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let re = f64::from_le_bytes(buf[16 * i..16 * i + 8].try_into().unwrap());
        let im = f64::from_le_bytes(buf[16 * i + 8..16 * i + 16].try_into().unwrap());
        out.push(Cplx::new(re, im));
    }
    Ok(out)
}

impl LabeledKet {
    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            factors: self.factors().to_vec(),
            kind: "ket".into(),
            data: Some(to_pairs(self.amplitudes())),
            data_file: None,
        }
    }

    pub fn from_json(j: &TensorJson, base_dir: Option<&Path>) -> Result<Self, TensorError> {
        if j.kind != "ket" {
            return Err(TensorError::Other(format!("expected kind `ket`, got `{}`", j.kind)));
        }
        let total: usize = j.factors.iter().map(|f| f.dim).product();
        let data = load_data(j, base_dir, total)?;
        LabeledKet::new(j.factors.clone(), data)
    }

    pub fn save(&self, path: &Path, sidecar: bool) -> Result<(), TensorError> {
        save_tensor(path, self.to_json(), self.amplitudes(), sidecar)
    }

    pub fn load(path: &Path) -> Result<Self, TensorError> {
        let j = read_json(path)?;
        Self::from_json(&j, path.parent())
    }
}

impl LabeledOperator {
    pub fn to_json(&self) -> TensorJson {
        TensorJson {
            factors: self.factors().to_vec(),
            kind: "op".into(),
            data: Some(to_pairs(self.entries())),
            data_file: None,
        }
    }

    pub fn from_json(j: &TensorJson, base_dir: Option<&Path>) -> Result<Self, TensorError> {
        if j.kind != "op" {
            return Err(TensorError::Other(format!("expected kind `op`, got `{}`", j.kind)));
        }
        let side: usize = j.factors.iter().map(|f| f.dim).product();
        let data = load_data(j, base_dir, side * side)?;
        LabeledOperator::new(j.factors.clone(), data)
    }

    pub fn save(&self, path: &Path, sidecar: bool) -> Result<(), TensorError> {
        save_tensor(path, self.to_json(), self.entries(), sidecar)
    }

    pub fn load(path: &Path) -> Result<Self, TensorError> {
        let j = read_json(path)?;
        Self::from_json(&j, path.parent())
    }
}

fn load_data(j: &TensorJson, base_dir: Option<&Path>, expect: usize) -> Result<Vec<Cplx>, TensorError> {
    match (&j.data, &j.data_file) {
        (Some(pairs), _) => {
            if pairs.len() != expect {
                return Err(TensorError::ShapeMismatch(pairs.len(), expect));
            }
            Ok(from_pairs(pairs))
        }
        (None, Some(file)) => {
            let p = match base_dir {
                Some(d) => d.join(file),
                None => Path::new(file).to_path_buf(),
            };
            read_sidecar(&p, expect)
        }
        (None, None) => Err(TensorError::Other("neither data nor data_file present".into())),
    }
}

fn save_tensor(path: &Path, mut j: TensorJson, data: &[Cplx], sidecar: bool) -> Result<(), TensorError> {
    if sidecar {
        let bin_name = format!(
            "{}.bin",
            path.file_stem().and_then(|s| s.to_str()).unwrap_or("tensor")
        );
        let bin_path = path.with_file_name(&bin_name);
        write_sidecar(&bin_path, data).map_err(|e| TensorError::Other(e.to_string()))?;
        j.data = None;
        j.data_file = Some(bin_name);
    }
    let text = serde_json::to_string_pretty(&j).map_err(|e| TensorError::Other(e.to_string()))?;
    fs::write(path, text).map_err(|e| TensorError::Other(e.to_string()))
}

fn read_json(path: &Path) -> Result<TensorJson, TensorError> {
    let text = fs::read_to_string(path).map_err(|e| TensorError::Other(format!("{}: {}", path.display(), e)))?;
    serde_json::from_str(&text).map_err(|e| TensorError::Other(e.to_string()))
}
