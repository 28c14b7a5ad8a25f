//! Exact solver for small box-constrained projections onto an affine set,
//! by active-set enumeration.
//!
//! Solves `min |x - target|^2` subject to `A x = b`, `lo <= x <= hi`. Every
//! optimum of this strictly convex program fixes some coordinate subset at
//! its bounds and solves the reduced equality-constrained least-squares
//! problem on the rest, so enumerating all lower/upper/free patterns and
//! keeping the best feasible candidate is exact. Cost grows as `3^d`;
//! intended for desk-scale instances and as an independent cross-check of
//! the iterative projection.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const EQ_TOL: f64 = 1e-9;
const BOX_TOL: f64 = 1e-9;

/// Largest dimension accepted by the enumerator.
pub const MAX_ENUM_DIM: usize = 12;

/// Exact projection; `None` when the constraint set is empty.
pub fn project_box_affine_exact(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    target: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<Option<DVector<f64>>> {
    let d = a.ncols();
    if target.len() != d || lo.len() != d || hi.len() != d || b.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            what: "box-affine projection",
            expected: d,
            actual: target.len(),
        });
    }
    for j in 0..d {
        if lo[j] > hi[j] {
            return Err(Error::BadBounds {
                index: j,
                lower: lo[j],
                upper: hi[j],
            });
        }
    }
    if d > MAX_ENUM_DIM {
        return Err(Error::Infeasible(format!(
            "active-set enumeration limited to {MAX_ENUM_DIM} variables, got {d}"
        )));
    }

    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut pattern = vec![0u8; d]; // 0 free, 1 at lower, 2 at upper
    loop {
        if let Some(x) = candidate(a, b, target, lo, hi, &pattern) {
            let obj = (&x - target).norm_squared();
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
        // Advance the base-3 counter.
        let mut carry = true;
        for slot in pattern.iter_mut() {
            if carry {
                *slot += 1;
                if *slot == 3 {
                    *slot = 0;
                } else {
                    carry = false;
                }
            }
        }
        if carry {
            break;
        }
    }
    Ok(best.map(|(_, x)| x))
}

fn candidate(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    target: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    pattern: &[u8],
) -> Option<DVector<f64>> {
    let d = a.ncols();
    let free: Vec<usize> = (0..d).filter(|&j| pattern[j] == 0).collect();

    let mut x = DVector::zeros(d);
    let mut rhs = b.clone();
    for j in 0..d {
        match pattern[j] {
            1 => {
                x[j] = lo[j];
                rhs -= lo[j] * a.column(j);
            }
            2 => {
                x[j] = hi[j];
                rhs -= hi[j] * a.column(j);
            }
            _ => {}
        }
    }

    if free.is_empty() {
        if rhs.amax() > EQ_TOL {
            return None;
        }
    } else {
        let af = a.select_columns(free.iter());
        let tf = DVector::from_fn(free.len(), |r, _| target[free[r]]);
        // Minimizer of |x_f - t_f|^2 under A_f x_f = rhs:
        // x_f = t_f - A_f^T (A_f A_f^T)^+ (A_f t_f - rhs).
        let gram = &af * af.transpose();
        let pinv = gram.svd(true, true).pseudo_inverse(1e-12).ok()?;
        let xf = &tf - af.transpose() * (pinv * (&af * &tf - &rhs));
        if (&af * &xf - rhs).amax() > EQ_TOL {
            return None; // inconsistent pattern
        }
        for (r, &j) in free.iter().enumerate() {
            if xf[r] < lo[j] - BOX_TOL || xf[r] > hi[j] + BOX_TOL {
                return None;
            }
            x[j] = xf[r].clamp(lo[j], hi[j]);
        }
    }
    Some(x)
}

/// Decides whether `{x : A x = b, lo <= x <= hi}` is nonempty.
///
/// Uses the exact enumerator for small instances and a projected-gradient
/// minimization of `|A x - b|^2` over the box otherwise.
pub fn box_affine_feasible(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Result<bool> {
    let d = a.ncols();
    let mid = DVector::from_fn(d, |j, _| 0.5 * (lo[j] + hi[j]));
    if d <= MAX_ENUM_DIM {
        return Ok(project_box_affine_exact(a, b, &mid, lo, hi)?.is_some());
    }
    let lip = {
        let sv = a.clone().svd(false, false).singular_values[0];
        (sv * sv).max(1e-12)
    };
    let mut x = mid;
    for _ in 0..200_000 {
        let grad = a.transpose() * (a * &x - b);
        x -= grad / lip;
        for j in 0..d {
            x[j] = x[j].clamp(lo[j], hi[j]);
        }
    }
    Ok((a * x - b).amax() <= 1e-7)
}
