//! Dimension padding: embeds a process with unequal party dimensions into
//! one with common input/output dimensions, so that the equal-dimension
//! quantum-control machinery applies. The process feeds `|0>` into each
//! input pad and an identity into each output pad; a party recovers the
//! original behavior by routing its pad through any channel (the Born
//! probabilities do not depend on the choice).

use super::CircuitError;
use crate::process::{in_name, out_name, ProcessDims, ProcessMatrix};
use crate::tensor::{LabeledKet, LabeledOperator, SystemLabel};

type Result<T> = std::result::Result<T, CircuitError>;

fn check_divisible(target: usize, d: usize, what: &str) -> Result<usize> {
    if target % d != 0 {
        return Err(CircuitError::Other(format!(
            "target dimension {target} for {what} is not a multiple of {d}"
        )));
    }
    Ok(target / d)
}

/// Pads a process matrix to the common party dimensions `target_in` /
/// `target_out` (each entry must be a multiple of the current dimension).
/// The padded factor is ordered `(original, pad)` inside the merged slot.
pub fn pad_process(
    w: &ProcessMatrix,
    target_in: &[usize],
    target_out: &[usize],
) -> Result<ProcessMatrix> {
    let dims = w.dims();
    let n = dims.n_parties;
    if target_in.len() != n || target_out.len() != n {
        return Err(CircuitError::Other("target dimension lists must have length N".into()));
    }
    let mut op = w.op().clone();
    for k in 1..=n {
        let ei = check_divisible(target_in[k - 1], dims.d_in[k - 1], &in_name(k))?;
        if ei > 1 {
            let pad = LabeledKet::basis(SystemLabel::new("pad", ei), 0).unwrap().outer();
            op = op.tensor(&pad)?.merge_factors(&[&in_name(k), "pad"], &in_name(k))?;
        }
        let eo = check_divisible(target_out[k - 1], dims.d_out[k - 1], &out_name(k))?;
        if eo > 1 {
            let pad = LabeledOperator::identity(vec![SystemLabel::new("pad", eo)])?;
            op = op.tensor(&pad)?.merge_factors(&[&out_name(k), "pad"], &out_name(k))?;
        }
    }
    let new_dims = ProcessDims::new(dims.d_p, target_in.to_vec(), target_out.to_vec(), dims.d_f);
    Ok(ProcessMatrix::new(new_dims, op)?)
}

/// Pads one party's operation (a Choi matrix over `[A{k}I, A{k}O]`) to the
/// target dimensions: the pad input is discarded and `|0>` is prepared in
/// the pad output, which leaves all Born probabilities unchanged.
pub fn pad_party_op(
    op: &LabeledOperator,
    k: usize,
    d_in: usize,
    d_out: usize,
    target_in: usize,
    target_out: usize,
) -> Result<LabeledOperator> {
    let ei = check_divisible(target_in, d_in, &in_name(k))?;
    let eo = check_divisible(target_out, d_out, &out_name(k))?;
    let mut out = op.clone();
    if ei > 1 || eo > 1 {
        // discard-and-prepare channel on the pads: rho -> Tr[rho] |0><0|
        let pad_choi = LabeledOperator::identity(vec![SystemLabel::new("padI", ei)])?
            .tensor(&LabeledKet::basis(SystemLabel::new("padO", eo), 0).unwrap().outer())?;
        out = out.tensor(&pad_choi)?;
        if ei > 1 {
            out = out.merge_factors(&[&in_name(k), "padI"], &in_name(k))?;
        } else {
            out = out.drop_trivial(&["padI"])?;
        }
        if eo > 1 {
            out = out.merge_factors(&[&out_name(k), "padO"], &out_name(k))?;
        } else {
            out = out.drop_trivial(&["padO"])?;
        }
    }
    Ok(out)
}
