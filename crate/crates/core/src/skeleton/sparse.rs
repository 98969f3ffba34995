//! Compressed sparse rows, the cotangent Laplacian and a Jacobi-preconditioned
//! conjugate gradient solver.

use nalgebra::Point3;

use crate::mesh::TriMesh;

/// Lower clamp on cotangent edge weights.
pub const MIN_COT_WEIGHT: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Csr {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    /// Diagonal of `AᵀA`, i.e. squared column norms (rows for symmetric A).
    pub fn gram_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for (&c, &v) in self.cols.iter().zip(&self.vals) {
            d[c] += v * v;
        }
        d
    }
}

fn cot(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    // Cotangent of the angle at `a`.
    let u = b - a;
    let v = c - a;
    let cross = u.cross(&v).norm();
    let floor = 1e-12 * u.norm() * v.norm();
    u.dot(&v) / cross.max(floor).max(f64::MIN_POSITIVE)
}

/// Symmetric cotangent Laplacian: `L_ij = max(cot α + cot β, MIN_COT_WEIGHT)`
/// for each edge, `L_ii = −Σ_j L_ij`.
pub fn cotangent_laplacian(mesh: &TriMesh) -> Csr {
    let v = mesh.vertices();
    let mut weights = std::collections::BTreeMap::new();
    for &[i, j, k] in mesh.faces() {
        for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
            // Angle at `a` faces edge (b, c).
            let w = cot(&v[a], &v[b], &v[c]);
            *weights.entry((b.min(c), b.max(c))).or_insert(0.0) += w;
        }
    }
    let n = mesh.vertex_count();
    let mut triplets = Vec::with_capacity(weights.len() * 2 + n);
    let mut diag = vec![0.0; n];
    for ((a, b), w) in weights {
        let w = f64::max(w, MIN_COT_WEIGHT);
        triplets.push((a, b, w));
        triplets.push((b, a, w));
        diag[a] -= w;
        diag[b] -= w;
    }
    triplets.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    Csr::from_triplets(n, triplets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

/// Solve `A x = b` for symmetric positive definite `A` given as an operator,
/// starting from `x`. `diag` is the diagonal of `A` for preconditioning.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if !res.is_finite() {
            return CgOutcome {
                iterations: it,
                relative_residual: res,
                converged: false,
            };
        }
        if res <= tol {
            return CgOutcome {
                iterations: it,
                relative_residual: res,
                converged: true,
            };
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgOutcome {
                iterations: it,
                relative_residual: res,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
    }
    CgOutcome {
        iterations: max_iter,
        relative_residual: res,
        converged: res <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::tetrahedron;

    #[test]
    fn triplets_sum_duplicates() {
        let m = Csr::from_triplets(2, vec![(1, 0, 2.0), (0, 0, 1.0), (1, 0, 3.0), (0, 1, -1.0)]);
        let mut y = [0.0; 2];
        m.mul_vec(&[1.0, 2.0], &mut y);
        assert_eq!(y, [-1.0, 5.0]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_is_symmetric() {
        let l = cotangent_laplacian(&tetrahedron());
        for i in 0..l.dim() {
            let s: f64 = l.row(i).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-12);
            for (j, v) in l.row(i) {
                let back = l.row(j).find(|&(k, _)| k == i).unwrap().1;
                assert_eq!(v, back);
            }
        }
        // Regular tetrahedron: every angle is 60°, each edge weight 2·cot 60°.
        let w = 2.0 / 3f64.sqrt();
        assert!((l.row(0).find(|&(j, _)| j == 1).unwrap().1 - w).abs() < 1e-12);
    }

    #[test]
    fn cg_solves_small_spd_system() {
        // [[4,1],[1,3]] x = [1,2] → x = [1/11, 7/11]
        let a = Csr::from_triplets(2, vec![(0, 0, 4.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)]);
        let mut x = [0.0; 2];
        let out = conjugate_gradient(
            |v, y| a.mul_vec(v, y),
            &[4.0, 3.0],
            &[1.0, 2.0],
            &mut x,
            1e-14,
            10,
        );
        assert!(out.converged);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12 && (x[1] - 7.0 / 11.0).abs() < 1e-12);
    }
}
