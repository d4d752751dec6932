//! Symmetric CSR matrices on a fixed pattern and Jacobi-preconditioned CG.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone)]
pub(crate) struct Pattern {
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
}

impl Pattern {
    /// Vertex adjacency of a triangle list (self loops included).
    pub fn from_triangles(n: usize, triangles: &[[usize; 3]]) -> Pattern {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for t in triangles {
            for &a in t {
                for &b in t {
                    adj[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        Pattern { row_ptr, cols }
    }

    pub fn position(&self, i: usize, j: usize) -> usize {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        self.row_ptr[i] + row.binary_search(&j).expect("entry in pattern")
    }

    pub fn n(&self) -> usize {
        self.row_ptr.len() - 1
    }
}

/// `y = A x`.
pub(crate) fn matvec(p: &Pattern, vals: &[f64], x: &[f64], y: &mut [f64]) {
    for i in 0..p.n() {
        let mut acc = 0.0;
        for k in p.row_ptr[i]..p.row_ptr[i + 1] {
            acc += vals[k] * x[p.cols[k]];
        }
        y[i] = acc;
    }
}

/// Solves `A x = b` for symmetric positive definite `A`; returns the
/// iteration count, or `None` if `rtol` was not reached in `max_iter`.
pub(crate) fn pcg(p: &Pattern, vals: &[f64], b: &[f64], x: &mut [f64], rtol: f64, max_iter: usize) -> Option<usize> {
    let n = p.n();
    let diag: Vec<f64> = (0..n)
        .map(|i| {
            let d = vals[p.position(i, i)];
            if d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();
    let mut r = vec![0.0; n];
    matvec(p, vals, x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a * d).collect();
    let mut dir = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ad = vec![0.0; n];
    for it in 0..max_iter {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rtol * bnorm {
            return Some(it);
        }
        matvec(p, vals, &dir, &mut ad);
        let dad: f64 = dir.iter().zip(&ad).map(|(a, b)| a * b).sum();
        if !(dad > 0.0) {
            return None;
        }
        let alpha = rz / dad;
        for i in 0..n {
            x[i] += alpha * dir[i];
            r[i] -= alpha * ad[i];
        }
        for i in 0..n {
            z[i] = r[i] * diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            dir[i] = z[i] + beta * dir[i];
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pcg_solves_laplacian_chain() {
        // 1D Dirichlet Laplacian on 50 nodes
        let n = 50;
        let tris: Vec<[usize; 3]> = (0..n - 1).map(|i| [i, i + 1, i + 1]).collect();
        let p = Pattern::from_triangles(n, &tris);
        let mut vals = vec![0.0; p.cols.len()];
        for i in 0..n {
            vals[p.position(i, i)] = 2.0;
            if i + 1 < n {
                vals[p.position(i, i + 1)] = -1.0;
                vals[p.position(i + 1, i)] = -1.0;
            }
        }
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        pcg(&p, &vals, &b, &mut x, 1e-12, 500).unwrap();
        let mut ax = vec![0.0; n];
        matvec(&p, &vals, &x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - 1.0).abs() < 1e-9);
        }
    }
}
