//! Periodic finite-difference stencils on per-site complex data.

use crate::linalg::C64;

/// Stencils acting within one time slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialStencil {
    /// (f_{p+1} − f_{p−1}) / 2
    GradP,
    /// (f_{p+1} + f_{p−1}) / 2
    AvgC,
    /// f_{p+1} − f_{p−1}
    GradPDoubled,
}

/// Stencils combining slice j (`current`) and slice j+1 (`next`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalStencil {
    /// f_{j+1,p} − f_{j,p}
    GradJPlain,
    /// f_{j+1,p} − (f_{j,p+1} + f_{j,p−1}) / 2
    GradJAvg,
}

#[inline]
pub fn wrap(p: isize, n: usize) -> usize {
    p.rem_euclid(n as isize) as usize
}

#[inline]
pub(crate) fn neighbours(p: usize, n: usize) -> (usize, usize) {
    ((p + n - 1) % n, (p + 1) % n)
}

pub fn spatial(field: &[C64], kind: SpatialStencil) -> Vec<C64> {
    let n = field.len();
    (0..n)
        .map(|p| {
            let (m, q) = neighbours(p, n);
            match kind {
                SpatialStencil::GradP => (field[q] - field[m]) * 0.5,
                SpatialStencil::AvgC => (field[q] + field[m]) * 0.5,
                SpatialStencil::GradPDoubled => field[q] - field[m],
            }
        })
        .collect()
}

/// Panics if the slices differ in length.
pub fn temporal(current: &[C64], next: &[C64], kind: TemporalStencil) -> Vec<C64> {
    assert_eq!(current.len(), next.len(), "time slices must share n_sites");
    let n = current.len();
    (0..n)
        .map(|p| match kind {
            TemporalStencil::GradJPlain => next[p] - current[p],
            TemporalStencil::GradJAvg => {
                let (m, q) = neighbours(p, n);
                next[p] - (current[q] + current[m]) * 0.5
            }
        })
        .collect()
}
