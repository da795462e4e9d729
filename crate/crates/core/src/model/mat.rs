//! Dense row-major `f64` matrices with the handful of kernels the model needs.
//!
//! Every product is computed row by row with a fixed accumulation order, so
//! row `r` of a result depends only on row `r` of the left operand. Batched
//! and one-at-a-time evaluation therefore agree bit for bit.

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "data length vs shape {rows}x{cols}"
        );
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Mat) -> Mat {
        let mut out = Mat::zeros(self.rows, rhs.cols);
        self.matmul_into(rhs, &mut out);
        out
    }

    /// `out = self * rhs`.
    pub fn matmul_into(&self, rhs: &Mat, out: &mut Mat) {
        assert_eq!(self.cols, rhs.rows, "matmul inner dims");
        assert_eq!(out.shape(), (self.rows, rhs.cols), "matmul output shape");
        for r in 0..self.rows {
            vec_mat(self.row(r), rhs, out.row_mut(r));
        }
    }

    /// `self * rhs^T`.
    pub fn matmul_t(&self, rhs: &Mat) -> Mat {
        assert_eq!(self.cols, rhs.cols, "matmul_t inner dims");
        let mut out = Mat::zeros(self.rows, rhs.rows);
        for r in 0..self.rows {
            let a = self.row(r);
            let o = out.row_mut(r);
            for (k, ok) in o.iter_mut().enumerate() {
                *ok = dot(a, rhs.row(k));
            }
        }
        out
    }

    /// `self += lhs^T * rhs`, the usual weight-gradient accumulation.
    pub fn add_t_matmul(&mut self, lhs: &Mat, rhs: &Mat) {
        assert_eq!(lhs.rows, rhs.rows, "add_t_matmul rows");
        assert_eq!(
            self.shape(),
            (lhs.cols, rhs.cols),
            "add_t_matmul output shape"
        );
        for r in 0..lhs.rows {
            add_outer(self, lhs.row(r), rhs.row(r));
        }
    }

    pub fn add_assign(&mut self, other: &Mat) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for a in &mut self.data {
            *a *= k;
        }
    }

    /// Columns `[from, to)` as a new matrix.
    pub fn cols_range(&self, from: usize, to: usize) -> Mat {
        let mut out = Mat::zeros(self.rows, to - from);
        for r in 0..self.rows {
            out.row_mut(r).copy_from_slice(&self.row(r)[from..to]);
        }
        out
    }

    /// Rows `[from, to)` as a new matrix.
    pub fn rows_range(&self, from: usize, to: usize) -> Mat {
        Mat::from_vec(
            to - from,
            self.cols,
            self.data[from * self.cols..to * self.cols].to_vec(),
        )
    }

    /// `[self || other]` column-wise.
    pub fn hcat(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hcat rows");
        let mut out = Mat::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            let o = out.row_mut(r);
            o[..self.cols].copy_from_slice(self.row(r));
            o[self.cols..].copy_from_slice(other.row(r));
        }
        out
    }

    /// `self` with an extra all-ones column appended, paired with
    /// [`Mat::vcat_bias`] to fold a bias into a product.
    pub fn with_ones_col(&self) -> Mat {
        self.hcat(&Mat::from_vec(self.rows, 1, vec![1.0; self.rows]))
    }

    /// `self` (weights) stacked over one bias row.
    pub fn vcat_bias(&self, bias: &[f64]) -> Mat {
        assert_eq!(bias.len(), self.cols);
        let mut data = self.data.clone();
        data.extend_from_slice(bias);
        Mat::from_vec(self.rows + 1, self.cols, data)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += k * x`.
#[inline]
pub fn axpy(k: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

/// `out = v * m` for a row vector `v`.
#[inline]
pub fn vec_mat(v: &[f64], m: &Mat, out: &mut [f64]) {
    debug_assert_eq!(v.len(), m.rows);
    out.fill(0.0);
    for (k, &vk) in v.iter().enumerate() {
        if vk != 0.0 {
            axpy(vk, m.row(k), out);
        }
    }
}

/// `m += a^T b` for row vectors `a`, `b`.
#[inline]
pub fn add_outer(m: &mut Mat, a: &[f64], b: &[f64]) {
    debug_assert_eq!(m.shape(), (a.len(), b.len()));
    for (k, &ak) in a.iter().enumerate() {
        if ak != 0.0 {
            axpy(ak, b, m.row_mut(k));
        }
    }
}

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
pub fn leaky_relu_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// In-place numerically stable softmax.
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}
