//! Data-parallel helpers. With the `parallel` feature (default) the work is
//! spread over the rayon pool; without it everything runs on the caller's
//! thread. Both paths produce bit-identical results: every output element is
//! computed by the same sequential arithmetic regardless of scheduling.

use nalgebra::{DMatrix, DVector};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this dimension a matrix-vector product is not worth splitting.
pub const PAR_MATVEC_MIN_DIM: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Auto,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Auto
    }
}

/// Order-preserving map.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// `out = H x` for symmetric `H`. Row `i` is read as column `i`, which is
/// contiguous in nalgebra's column-major storage.
pub fn symv_into(exec: Execution, h: &DMatrix<f64>, x: &DVector<f64>, out: &mut DVector<f64>) {
    let n = h.nrows();
    debug_assert_eq!(h.ncols(), n);
    debug_assert_eq!(x.len(), n);
    debug_assert_eq!(out.len(), n);
    let xs = x.as_slice();
    let data = h.as_slice();
    let row = |i: usize| dot(&data[i * n..(i + 1) * n], xs);

    #[cfg(feature = "parallel")]
    if exec.is_parallel() && n >= PAR_MATVEC_MIN_DIM {
        out.as_mut_slice()
            .par_iter_mut()
            .enumerate()
            .for_each(|(i, o)| *o = row(i));
        return;
    }
    let _ = exec;
    for (i, o) in out.iter_mut().enumerate() {
        *o = row(i);
    }
}

pub fn symv(exec: Execution, h: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(h.nrows());
    symv_into(exec, h, x, &mut out);
    out
}

// Fixed 4-way accumulation so the result does not depend on how the
// surrounding loop is scheduled.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let j = 4 * k;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}
