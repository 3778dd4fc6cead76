//! Dense linear-model primitives: centering and normalization, least squares,
//! orthogonal projections, and pseudoinverse application.
//!
//! Everything is backed by a thin Householder QR with column pivoting; no
//! normal-equation inverse is ever formed. For a full-column-rank `X_M = QR`
//! (columns permuted internally):
//!
//! * least squares        `(X_M'X_M)^-1 X_M' y  = R^-1 Q' y`
//! * projection           `P_M v                = Q Q' v`
//! * pseudoinverse apply  `X_M (X_M'X_M)^-1 s   = Q R^-T s`

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Relative rank tolerance: the factorization is declared singular when
/// `min |R_kk| <= tol * max |R_kk|`.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Design matrix plus the standardization metadata needed to map results back
/// to raw-column units.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    data: Array2<f64>,
    /// Scale factor each column was divided by (1.0 when not normalized).
    column_norms: Vec<f64>,
    centered: bool,
    normalized: bool,
}

impl DesignMatrix {
    /// Wraps a matrix as-is (no centering, no scaling).
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, p) = data.dim();
        if n < 1 || p < 1 {
            return Err(Error::InvalidConfig(format!(
                "design must be at least 1x1, got {n}x{p}"
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(
                "design contains non-finite entries".into(),
            ));
        }
        Ok(Self {
            data,
            column_norms: vec![1.0; p],
            centered: false,
            normalized: false,
        })
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn p(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, f64> {
        self.data.column(j)
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Scale factors applied during normalization (all 1.0 otherwise).
    pub fn column_norms(&self) -> &[f64] {
        &self.column_norms
    }

    /// Gathers the columns indexed by `m` into a dense `n x |m|` matrix.
    pub fn submatrix(&self, m: &[usize]) -> Array2<f64> {
        let n = self.n();
        let mut out = Array2::zeros((n, m.len()));
        for (k, &j) in m.iter().enumerate() {
            out.column_mut(k).assign(&self.data.column(j));
        }
        out
    }

    /// Restriction of the design to the columns `m`, keeping flags and the
    /// matching scale factors.
    pub fn restrict(&self, m: &[usize]) -> Result<Self> {
        let data = self.submatrix(m);
        Ok(Self {
            data,
            column_norms: m.iter().map(|&j| self.column_norms[j]).collect(),
            centered: self.centered,
            normalized: self.normalized,
        })
    }

    /// Maps coefficients estimated on the standardized columns back to the
    /// units of the raw columns.
    pub fn coefficients_in_raw_scale(&self, beta: &Array1<f64>) -> Array1<f64> {
        Array1::from_iter(
            beta.iter()
                .zip(&self.column_norms)
                .map(|(b, c)| b / c),
        )
    }
}

/// Centers every column of `x` and `y`; optionally rescales each centered
/// column to unit squared norm. `y` is centered but never rescaled.
pub fn standardize(
    x: &Array2<f64>,
    y: &Array1<f64>,
    normalize: bool,
) -> Result<(DesignMatrix, Array1<f64>)> {
    let (n, p) = x.dim();
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "standardize needs n >= 2 rows, got {n}"
        )));
    }
    if y.len() != n {
        return Err(Error::InvalidConfig(format!(
            "response length {} does not match n = {n}",
            y.len()
        )));
    }
    if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidConfig("non-finite entries in input".into()));
    }

    let mut data = x.clone();
    let max_abs = data.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    for mut col in data.columns_mut() {
        let mean = col.sum() / n as f64;
        col.mapv_inplace(|v| v - mean);
    }

    let mut column_norms = vec![1.0; p];
    if normalize {
        for (j, mut col) in data.columns_mut().into_iter().enumerate() {
            let norm = col.dot(&col).sqrt();
            if norm <= 1e-12 * (n as f64).sqrt() * max_abs {
                return Err(Error::ZeroVarianceColumn(j));
            }
            col.mapv_inplace(|v| v / norm);
            column_norms[j] = norm;
        }
    }

    let y_mean = y.sum() / n as f64;
    let y_centered = y.mapv(|v| v - y_mean);

    Ok((
        DesignMatrix {
            data,
            column_norms,
            centered: true,
            normalized: normalize,
        },
        y_centered,
    ))
}

/// Thin Householder QR with column pivoting of an `n x m` matrix, `m <= n`.
#[derive(Debug, Clone)]
pub struct ThinQr {
    q: Array2<f64>,
    r: Array2<f64>,
    /// `perm[k]` is the original column held in pivoted position `k`.
    perm: Vec<usize>,
}

impl ThinQr {
    pub fn factor(a: ArrayView2<'_, f64>, rank_tol: f64) -> Result<Self> {
        let (n, m) = a.dim();
        if m == 0 {
            return Ok(Self {
                q: Array2::zeros((n, 0)),
                r: Array2::zeros((0, 0)),
                perm: Vec::new(),
            });
        }
        if m > n {
            return Err(Error::SingularDesign { tol: rank_tol });
        }

        let mut work = a.to_owned();
        let mut perm: Vec<usize> = (0..m).collect();
        // Householder vectors, one per step, each of length n - k.
        let mut reflectors: Vec<Array1<f64>> = Vec::with_capacity(m);
        let mut r = Array2::zeros((m, m));

        for k in 0..m {
            // Pivot on the largest remaining column norm.
            let mut best = k;
            let mut best_norm = -1.0f64;
            for j in k..m {
                let nrm = work.column(j).slice(ndarray::s![k..]).dot(
                    &work.column(j).slice(ndarray::s![k..]),
                );
                if nrm > best_norm {
                    best_norm = nrm;
                    best = j;
                }
            }
            if best != k {
                perm.swap(k, best);
                for i in 0..n {
                    work.swap((i, k), (i, best));
                }
            }

            // Householder vector for column k, rows k..n.
            let x = work.column(k).slice(ndarray::s![k..]).to_owned();
            let norm_x = x.dot(&x).sqrt();
            let mut v = x.clone();
            if norm_x > 0.0 {
                let alpha = if x[0] >= 0.0 { -norm_x } else { norm_x };
                v[0] -= alpha;
            }
            let v_norm2 = v.dot(&v);

            // Apply (I - 2 v v' / v'v) to the remaining columns.
            if v_norm2 > 0.0 {
                for j in k..m {
                    let mut col = work.column_mut(j);
                    let mut tail = col.slice_mut(ndarray::s![k..]);
                    let coef = 2.0 * v.dot(&tail.view()) / v_norm2;
                    for (t, vi) in tail.iter_mut().zip(v.iter()) {
                        *t -= coef * vi;
                    }
                }
            }
            reflectors.push(v);
            for i in 0..=k {
                r[(i, k)] = work[(i, k)];
            }
            for j in (k + 1)..m {
                r[(k, j)] = work[(k, j)];
            }
        }

        // Rank check on the pivoted diagonal.
        let diag: Vec<f64> = (0..m).map(|k| r[(k, k)].abs()).collect();
        let d_max = diag.iter().cloned().fold(0.0f64, f64::max);
        let d_min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        if d_max == 0.0 || d_min <= rank_tol * d_max {
            return Err(Error::SingularDesign { tol: rank_tol });
        }

        // Form thin Q explicitly: Q = H_1 ... H_m [I_m; 0].
        let mut q = Array2::zeros((n, m));
        for k in 0..m {
            q[(k, k)] = 1.0;
        }
        for k in (0..m).rev() {
            let v = &reflectors[k];
            let v_norm2 = v.dot(v);
            if v_norm2 == 0.0 {
                continue;
            }
            for j in 0..m {
                let mut col = q.column_mut(j);
                let mut tail = col.slice_mut(ndarray::s![k..]);
                let coef = 2.0 * v.dot(&tail.view()) / v_norm2;
                for (t, vi) in tail.iter_mut().zip(v.iter()) {
                    *t -= coef * vi;
                }
            }
        }

        // Fix R's diagonal sign so R_kk > 0 (flip matching Q columns).
        for k in 0..m {
            if r[(k, k)] < 0.0 {
                for j in k..m {
                    r[(k, j)] = -r[(k, j)];
                }
                q.column_mut(k).mapv_inplace(|v| -v);
            }
        }

        Ok(Self { q, r, perm })
    }

    pub fn ncols(&self) -> usize {
        self.perm.len()
    }

    /// Orthonormal basis of the column span.
    pub fn q(&self) -> ArrayView2<'_, f64> {
        self.q.view()
    }

    fn back_substitute(&self, w: &Array1<f64>) -> Array1<f64> {
        let m = self.ncols();
        let mut u = Array1::zeros(m);
        for i in (0..m).rev() {
            let mut acc = w[i];
            for j in (i + 1)..m {
                acc -= self.r[(i, j)] * u[j];
            }
            u[i] = acc / self.r[(i, i)];
        }
        u
    }

    fn forward_substitute(&self, v: &Array1<f64>) -> Array1<f64> {
        let m = self.ncols();
        let mut w = Array1::zeros(m);
        for i in 0..m {
            let mut acc = v[i];
            for j in 0..i {
                acc -= self.r[(j, i)] * w[j];
            }
            w[i] = acc / self.r[(i, i)];
        }
        w
    }

    /// Least-squares coefficients in the original column order.
    pub fn solve_ls(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        let w = self.q.t().dot(&y);
        let u = self.back_substitute(&w);
        let mut beta = Array1::zeros(self.ncols());
        for (k, &j) in self.perm.iter().enumerate() {
            beta[j] = u[k];
        }
        beta
    }

    /// `A (A'A)^-1 s` for the factored matrix `A`.
    pub fn pinv_transpose_apply(&self, s: ArrayView1<'_, f64>) -> Array1<f64> {
        let v = Array1::from_iter(self.perm.iter().map(|&j| s[j]));
        let w = self.forward_substitute(&v);
        self.q.dot(&w)
    }

    /// `(A'A)^-1 s`, in the original column order.
    pub fn gram_inverse_apply(&self, s: ArrayView1<'_, f64>) -> Array1<f64> {
        let v = Array1::from_iter(self.perm.iter().map(|&j| s[j]));
        let w = self.forward_substitute(&v);
        let u = self.back_substitute(&w);
        let mut out = Array1::zeros(self.ncols());
        for (k, &j) in self.perm.iter().enumerate() {
            out[j] = u[k];
        }
        out
    }

    /// `P v = Q Q' v`.
    pub fn project(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let w = self.q.t().dot(&v);
        self.q.dot(&w)
    }

    /// `P_perp v = v - Q Q' v`.
    pub fn project_complement(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut out = v.to_owned();
        out -= &self.project(v);
        out
    }
}

/// Orthogonal projector onto the span of the design columns `basis_columns`.
#[derive(Debug, Clone)]
pub struct Projector {
    basis_columns: Vec<usize>,
    qr: ThinQr,
}

impl Projector {
    pub fn new(x: &DesignMatrix, m: &[usize]) -> Result<Self> {
        Self::with_tol(x, m, DEFAULT_RANK_TOL)
    }

    pub fn with_tol(x: &DesignMatrix, m: &[usize], rank_tol: f64) -> Result<Self> {
        let sub = x.submatrix(m);
        let qr = ThinQr::factor(sub.view(), rank_tol)?;
        Ok(Self {
            basis_columns: m.to_vec(),
            qr,
        })
    }

    pub fn basis_columns(&self) -> &[usize] {
        &self.basis_columns
    }

    pub fn qr(&self) -> &ThinQr {
        &self.qr
    }

    pub fn apply(&self, v: ArrayView1<'_, f64>, complement: bool) -> Array1<f64> {
        if complement {
            self.qr.project_complement(v)
        } else {
            self.qr.project(v)
        }
    }
}

/// `beta_hat = (X_M'X_M)^-1 X_M' y` for the columns `m` of `x`.
pub fn least_squares(x: &DesignMatrix, m: &[usize], y: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let qr = ThinQr::factor(x.submatrix(m).view(), DEFAULT_RANK_TOL)?;
    Ok(qr.solve_ls(y))
}

/// `P_M v` (or `P_M_perp v` with `complement`).
pub fn project(
    m: &[usize],
    x: &DesignMatrix,
    v: ArrayView1<'_, f64>,
    complement: bool,
) -> Result<Array1<f64>> {
    let proj = Projector::new(x, m)?;
    Ok(proj.apply(v, complement))
}

/// `X_M (X_M'X_M)^-1 s`, an n-vector.
pub fn pinv_transpose_apply(
    m: &[usize],
    x: &DesignMatrix,
    s: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let qr = ThinQr::factor(x.submatrix(m).view(), DEFAULT_RANK_TOL)?;
    Ok(qr.pinv_transpose_apply(s))
}

/// Gathers `y - X_M beta` without materializing the submatrix.
pub fn residual(x: &DesignMatrix, m: &[usize], beta: &Array1<f64>, y: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut r = y.to_owned();
    for (k, &j) in m.iter().enumerate() {
        let col = x.column(j);
        r.scaled_add(-beta[k], &col);
    }
    r
}

/// Squared Euclidean norm, the workhorse in RSS computations.
pub fn norm2(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v)
}

/// Builds an `n x p` design with exactly orthonormal columns from an i.i.d.
/// Gaussian draw (thin QR of the draw). Requires `p <= n`.
pub fn orthonormal_design<R: rand::Rng>(n: usize, p: usize, rng: &mut R) -> Result<DesignMatrix> {
    if p > n {
        return Err(Error::InvalidConfig(format!(
            "orthonormal design needs p <= n, got n={n}, p={p}"
        )));
    }
    let raw = Array2::from_shape_fn((n, p), |_| sample_standard_normal(rng));
    let qr = ThinQr::factor(raw.view(), DEFAULT_RANK_TOL)?;
    let mut dm = DesignMatrix::new(qr.q().to_owned())?;
    dm.normalized = true;
    Ok(dm)
}

/// One N(0,1) draw.
pub fn sample_standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    use rand::distributions::Distribution;
    rand_distr::StandardNormal.sample(rng)
}
