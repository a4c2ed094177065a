//! Minimal dense complex tensor with axis permutation and pairwise
//! contraction. Storage is Fortran-ordered (first index fastest), so
//! grouping a prefix of the axes into matrix rows is a zero-copy
//! reinterpretation that feeds straight into `nalgebra`'s column-major
//! GEMM.

use crate::linalg::CMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CTensor {
    dims: Vec<usize>,
    data: Vec<Complex64>,
}

impl CTensor {
    pub fn zeros(dims: &[usize]) -> Self {
        let len = dims.iter().product();
        CTensor {
            dims: dims.to_vec(),
            data: vec![Complex64::from(0.0); len],
        }
    }

    pub fn from_data(dims: &[usize], data: Vec<Complex64>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len());
        CTensor {
            dims: dims.to_vec(),
            data,
        }
    }

    /// Reinterprets a matrix as a tensor whose leading axes fuse to the
    /// matrix rows and trailing axes to the columns.
    pub fn from_matrix(m: &CMatrix, row_dims: &[usize], col_dims: &[usize]) -> Self {
        assert_eq!(row_dims.iter().product::<usize>(), m.nrows());
        assert_eq!(col_dims.iter().product::<usize>(), m.ncols());
        let mut dims = row_dims.to_vec();
        dims.extend_from_slice(col_dims);
        CTensor {
            dims,
            data: m.as_slice().to_vec(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn conj(&self) -> Self {
        CTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CTensor {
            dims: self.dims.clone(),
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn add_scaled(&mut self, other: &CTensor, s: Complex64) {
        assert_eq!(self.dims, other.dims);
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += b * s;
        }
    }

    #[inline]
    fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut off = 0;
        let mut stride = 1;
        for (i, &d) in idx.iter().zip(self.dims.iter()) {
            debug_assert!(*i < d);
            off += i * stride;
            stride *= d;
        }
        off
    }

    pub fn get(&self, idx: &[usize]) -> Complex64 {
        self.data[self.offset(idx)]
    }

    pub fn set(&mut self, idx: &[usize], v: Complex64) {
        let off = self.offset(idx);
        self.data[off] = v;
    }

    /// Returns the tensor with axes reordered so new axis `k` is old axis
    /// `perm[k]`.
    pub fn permute(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dims.len());
        let rank = perm.len();
        if perm.iter().enumerate().all(|(i, &p)| i == p) {
            return self.clone();
        }
        let new_dims: Vec<usize> = perm.iter().map(|&p| self.dims[p]).collect();
        let mut out = vec![Complex64::from(0.0); self.data.len()];
        // Strides of the old axes inside the old layout.
        let mut old_strides = vec![1usize; rank];
        for i in 1..rank {
            old_strides[i] = old_strides[i - 1] * self.dims[i - 1];
        }
        // For each new axis, the stride it advances in the old buffer.
        let read_strides: Vec<usize> = perm.iter().map(|&p| old_strides[p]).collect();
        let mut counters = vec![0usize; rank];
        let mut src = 0usize;
        for slot in out.iter_mut() {
            *slot = self.data[src];
            for ax in 0..rank {
                counters[ax] += 1;
                src += read_strides[ax];
                if counters[ax] < new_dims[ax] {
                    break;
                }
                counters[ax] = 0;
                src -= read_strides[ax] * new_dims[ax];
            }
        }
        CTensor {
            dims: new_dims,
            data: out,
        }
    }

    /// Views the tensor as a matrix with the first `split` axes fused into
    /// rows and the rest into columns.
    pub fn to_matrix(&self, split: usize) -> CMatrix {
        let rows: usize = self.dims[..split].iter().product();
        let cols: usize = self.dims[split..].iter().product();
        CMatrix::from_column_slice(rows, cols, &self.data)
    }

    /// Contracts `axes_a` of `a` with `axes_b` of `b` (pairwise, in order).
    /// Result axes: uncontracted axes of `a` (in order) then of `b`.
    pub fn contract(a: &CTensor, axes_a: &[usize], b: &CTensor, axes_b: &[usize]) -> CTensor {
        assert_eq!(axes_a.len(), axes_b.len());
        for (&ia, &ib) in axes_a.iter().zip(axes_b.iter()) {
            assert_eq!(
                a.dims[ia], b.dims[ib],
                "contracted axes must have equal dimension"
            );
        }
        let free_a: Vec<usize> = (0..a.rank()).filter(|i| !axes_a.contains(i)).collect();
        let free_b: Vec<usize> = (0..b.rank()).filter(|i| !axes_b.contains(i)).collect();
        let mut perm_a = free_a.clone();
        perm_a.extend_from_slice(axes_a);
        let mut perm_b = axes_b.to_vec();
        perm_b.extend_from_slice(&free_b);
        let at = a.permute(&perm_a);
        let bt = b.permute(&perm_b);
        let m: usize = free_a.iter().map(|&i| a.dims[i]).product();
        let k: usize = axes_a.iter().map(|&i| a.dims[i]).product();
        let n: usize = free_b.iter().map(|&i| b.dims[i]).product();
        let am = CMatrix::from_column_slice(m, k, &at.data);
        let bm = CMatrix::from_column_slice(k, n, &bt.data);
        let cm = am * bm;
        let mut dims: Vec<usize> = free_a.iter().map(|&i| a.dims[i]).collect();
        dims.extend(free_b.iter().map(|&i| b.dims[i]));
        if dims.is_empty() {
            dims.push(1);
        }
        CTensor {
            dims,
            data: cm.as_slice().to_vec(),
        }
    }

    /// Traces out the pair of axes `(ax1, ax2)` (equal dims).
    pub fn trace_axes(&self, ax1: usize, ax2: usize) -> CTensor {
        assert_ne!(ax1, ax2);
        assert_eq!(self.dims[ax1], self.dims[ax2]);
        let d = self.dims[ax1];
        let free: Vec<usize> = (0..self.rank()).filter(|&i| i != ax1 && i != ax2).collect();
        let mut perm = free.clone();
        perm.push(ax1);
        perm.push(ax2);
        let t = self.permute(&perm);
        let free_dims: Vec<usize> = free.iter().map(|&i| self.dims[i]).collect();
        let m: usize = free_dims.iter().product();
        let mut out = vec![Complex64::from(0.0); m];
        for j in 0..d {
            let base = m * (j + d * j);
            for i in 0..m {
                out[i] += t.data[base + i];
            }
        }
        let dims = if free_dims.is_empty() {
            vec![1]
        } else {
            free_dims
        };
        CTensor { dims, data: out }
    }

    /// Full contraction of two equal-shape tensors: `sum conj(a) * b`.
    pub fn inner(a: &CTensor, b: &CTensor) -> Complex64 {
        assert_eq!(a.dims, b.dims);
        a.data
            .iter()
            .zip(b.data.iter())
            .map(|(x, y)| x.conj() * y)
            .sum()
    }
}
