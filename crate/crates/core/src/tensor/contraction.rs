//! Flat-array axis permutation and pairwise tensor contraction.

use num_complex::Complex64 as Cplx;

/// Permutes the axes of a dense row-major tensor. `perm[i]` is the old axis
/// that lands at new position `i`.
pub fn permute_axes(data: &[Cplx], dims: &[usize], perm: &[usize]) -> Vec<Cplx> {
    debug_assert_eq!(dims.len(), perm.len());
    let m = dims.len();
    if m == 0 {
        return data.to_vec();
    }
    if perm.iter().enumerate().all(|(i, &p)| i == p) {
        return data.to_vec();
    }
    let mut old_strides = vec![1usize; m];
    for i in (0..m.saturating_sub(1)).rev() {
        old_strides[i] = old_strides[i + 1] * dims[i + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let total: usize = dims.iter().product();
    let mut out = vec![Cplx::new(0.0, 0.0); total];
    // stride in the old layout for each new axis
    let strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
    let mut idx = vec![0usize; m];
    let mut old_flat = 0usize;
    for item in out.iter_mut() {
        *item = data[old_flat];
        // increment mixed-radix counter over new_dims, updating old_flat
        for ax in (0..m).rev() {
            idx[ax] += 1;
            old_flat += strides[ax];
            if idx[ax] < new_dims[ax] {
                break;
            }
            old_flat -= strides[ax] * new_dims[ax];
            idx[ax] = 0;
        }
    }
    out
}

/// Contracts two dense row-major tensors over the given axis pairs
/// (`a_axes[i]` with `b_axes[i]`). Returns the result data with axes
/// `[a free axes in order, b free axes in order]` and their dims.
pub fn contract(
    a: &[Cplx],
    a_dims: &[usize],
    a_axes: &[usize],
    b: &[Cplx],
    b_dims: &[usize],
    b_axes: &[usize],
) -> (Vec<Cplx>, Vec<usize>) {
    debug_assert_eq!(a_axes.len(), b_axes.len());
    let a_free: Vec<usize> = (0..a_dims.len()).filter(|i| !a_axes.contains(i)).collect();
    let b_free: Vec<usize> = (0..b_dims.len()).filter(|j| !b_axes.contains(j)).collect();

    let mut a_perm: Vec<usize> = a_free.clone();
    a_perm.extend(a_axes);
    let a_p = permute_axes(a, a_dims, &a_perm);

    let mut b_perm: Vec<usize> = b_axes.to_vec();
    b_perm.extend(&b_free);
    let b_p = permute_axes(b, b_dims, &b_perm);

    let m: usize = a_free.iter().map(|&i| a_dims[i]).product();
    let k: usize = a_axes.iter().map(|&i| a_dims[i]).product();
    let n: usize = b_free.iter().map(|&j| b_dims[j]).product();

    let mut out = vec![Cplx::new(0.0, 0.0); m * n];
    for r in 0..m {
        for t in 0..k {
            let av = a_p[r * k + t];
            if av.re == 0.0 && av.im == 0.0 {
                continue;
            }
            let brow = &b_p[t * n..(t + 1) * n];
            let orow = &mut out[r * n..(r + 1) * n];
            for c in 0..n {
                orow[c] += av * brow[c];
            }
        }
    }
    let mut out_dims: Vec<usize> = a_free.iter().map(|&i| a_dims[i]).collect();
    out_dims.extend(b_free.iter().map(|&j| b_dims[j]));
    (out, out_dims)
}
