//! Dense LU factorization with partial pivoting, stored row-major so the
//! factors can be written to disk and reused across runs.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLu {
    n: usize,
    /// Unit-lower and upper factors packed in one row-major array.
    lu: Vec<f64>,
    /// Row `i` of the factored matrix is row `perm[i]` of the original.
    perm: Vec<usize>,
    min_pivot: f64,
}

/// Relative pivot size below which the matrix is declared singular.
pub const PIVOT_TOLERANCE: f64 = 1e-13;

impl DenseLu {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("LU of a {}x{} matrix", n, a.ncols())));
        }
        let mut lu = vec![0.0; n * n];
        let mut scale = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                lu[i * n + j] = v;
                scale = scale.max(v.abs());
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        let mut min_pivot = f64::INFINITY;
        for k in 0..n {
            let (p, pv) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            min_pivot = min_pivot.min(pv);
            if !(pv > PIVOT_TOLERANCE * scale) {
                return Err(Error::SingularSystem(pv));
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let piv = pivot_row[k];
            let update = |row: &mut [f64]| {
                let l = row[k] / piv;
                row[k] = l;
                if l != 0.0 {
                    for (r, &u) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                        *r -= l * u;
                    }
                }
            };
            crate::par::for_each_chunk(tail, n, update);
        }
        Ok(DenseLu { n, lu, perm, min_pivot })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn min_pivot(&self) -> f64 {
        self.min_pivot
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Dimension(format!("right-hand side of length {} for dimension {n}", b.len())));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&self.min_pivot.to_le_bytes());
        for &p in &self.perm {
            out.extend_from_slice(&(p as u64).to_le_bytes());
        }
        for &v in &self.lu {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }

    pub fn read_from(input: &mut &[u8]) -> Result<Self> {
        let n = read_u64(input)? as usize;
        let min_pivot = read_f64(input)?;
        let mut perm = Vec::with_capacity(n);
        for _ in 0..n {
            perm.push(read_u64(input)? as usize);
        }
        let lu = read_f64s(input, n * n)?;
        Ok(DenseLu { n, lu, perm, min_pivot })
    }
}

fn take<'a>(input: &mut &'a [u8], k: usize) -> Result<&'a [u8]> {
    if input.len() < k {
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "truncated cache file")));
    }
    let (h, t) = input.split_at(k);
    *input = t;
    Ok(h)
}

pub(crate) fn read_u64(input: &mut &[u8]) -> Result<u64> {
    Ok(u64::from_le_bytes(take(input, 8)?.try_into().unwrap()))
}

pub(crate) fn read_f64(input: &mut &[u8]) -> Result<f64> {
    Ok(f64::from_le_bytes(take(input, 8)?.try_into().unwrap()))
}

pub(crate) fn read_f64s(input: &mut &[u8], n: usize) -> Result<Vec<f64>> {
    let bytes = take(input, 8 * n)?;
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub(crate) fn write_matrix(m: &DMatrix<f64>, out: &mut Vec<u8>) {
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub(crate) fn read_matrix(input: &mut &[u8]) -> Result<DMatrix<f64>> {
    let r = read_u64(input)? as usize;
    let c = read_u64(input)? as usize;
    Ok(DMatrix::from_vec(r, c, read_f64s(input, r * c)?))
}

/// Relative Frobenius asymmetry ‖A − Aᵀ‖ / ‖A‖.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let d = a - a.transpose();
    let n = a.norm();
    if n == 0.0 {
        0.0
    } else {
        d.norm() / n
    }
}
