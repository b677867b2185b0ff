//! Small dense vector helpers for the low dimensions used here (n + 1 <= 6
//! in practice), plus orthonormalization.

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Coordinates of a point or vector; stored inline up to ℝ⁶.
pub type Coords = SmallVec<[f64; 6]>;

/// Relative threshold below which a Gram-Schmidt residual counts as zero.
pub const ORTHO_TOL: f64 = 1e-12;

pub fn zeros(dim: usize) -> Coords {
    SmallVec::from_elem(0.0, dim)
}

pub fn unit(dim: usize, axis: usize) -> Coords {
    let mut e = zeros(dim);
    e[axis] = 1.0;
    e
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Coords {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scaled(alpha: f64, a: &[f64]) -> Coords {
    a.iter().map(|x| alpha * x).collect()
}

/// Removes from `v` its components along the (orthonormal) `basis`.
pub fn project_out(v: &mut Coords, basis: &[Coords]) {
    for b in basis {
        let c = dot(v, b);
        axpy(-c, b, v);
    }
}

/// Modified Gram-Schmidt with one re-orthogonalization pass.
///
/// Fails with [`Error::DegenerateFlat`] when a vector has no component
/// (relative to its own length) outside the span of its predecessors.
pub fn orthonormalize(vectors: &[Coords]) -> Result<Vec<Coords>> {
    let mut out: Vec<Coords> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let scale = norm(v);
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::DegenerateFlat);
        }
        let mut w = v.clone();
        project_out(&mut w, &out);
        project_out(&mut w, &out);
        let len = norm(&w);
        if len <= ORTHO_TOL * scale {
            return Err(Error::DegenerateFlat);
        }
        for x in w.iter_mut() {
            *x /= len;
        }
        out.push(w);
    }
    Ok(out)
}

/// Extends an orthonormal family in ℝ^dim to a full orthonormal basis by
/// sweeping the coordinate vectors e₁, e₂, … in order. Deterministic.
pub fn complete_basis(family: &[Coords], dim: usize) -> Vec<Coords> {
    let mut out: Vec<Coords> = family.to_vec();
    for axis in 0..dim {
        if out.len() == dim {
            break;
        }
        let mut w = unit(dim, axis);
        project_out(&mut w, &out);
        project_out(&mut w, &out);
        let len = norm(&w);
        // A coordinate axis always has a residual >= 1/sqrt(dim) for at least
        // one choice still available; 0.1 skips near-dependent axes.
        if len > 0.1 {
            for x in w.iter_mut() {
                *x /= len;
            }
            out.push(w);
        }
    }
    debug_assert_eq!(out.len(), dim);
    out
}

/// Lower-dimensional orthonormal basis of `{ a ∈ span(basis) : a·c = 0 }`
/// where `c` is given through its coefficients `coef[i] = basis[i]·c`.
pub fn null_combination(basis: &[Coords], coef: &[f64]) -> Vec<Coords> {
    let m = basis.len();
    let dim = basis.first().map_or(0, |b| b.len());
    let cn = norm(coef);
    if cn == 0.0 {
        return basis.to_vec();
    }
    // Orthonormal complement of coef in ℝ^m, mapped through the basis.
    let chat: Coords = coef.iter().map(|c| c / cn).collect();
    let full = complete_basis(&[chat], m);
    full[1..]
        .iter()
        .map(|a| {
            let mut out = zeros(dim);
            for (ai, bi) in a.iter().zip(basis) {
                axpy(*ai, bi, &mut out);
            }
            out
        })
        .collect()
}
