//! Small dense row-major matrices over [`Real`] scalars.
//!
//! Sizes here are the latent dimension (a handful) or its square for the
//! Kronecker-form Lyapunov system, so plain `O(n^3)` kernels suffice.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn column(v: Vec<S>) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn map<T: Real>(&self, f: impl Fn(S) -> T) -> Mat<T> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn values(&self) -> Mat<f64> {
        self.map(|x| x.value())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// `self · rhsᵀ`
    pub fn matmul_t(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.cols, "matmul_t shape mismatch");
        Self::from_fn(self.rows, rhs.rows, |i, j| {
            let mut acc = S::zero();
            for k in 0..self.cols {
                acc += self[(i, k)] * rhs[(j, k)];
            }
            acc
        })
    }

    /// `self · v` for a plain vector.
    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for (a, b) in self.row(i).iter().zip(v) {
                    acc += *a * *b;
                }
                acc
            })
            .collect()
    }

    /// `self · v` for a vector of constants.
    pub fn mul_vec_f64(&self, v: &[f64]) -> Vec<S> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                let mut acc = S::zero();
                for (a, &b) in self.row(i).iter().zip(v) {
                    if b != 0.0 {
                        acc += *a * b;
                    }
                }
                acc
            })
            .collect()
    }

    /// `self · p · selfᵀ`
    pub fn sandwich(&self, p: &Self) -> Self {
        self.matmul(p).matmul_t(self)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|x| x * s)
    }

    pub fn scale_f64(&self, s: f64) -> Self {
        self.map(|x| x * s)
    }

    /// `(self + selfᵀ) / 2`
    pub fn symmetrize(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * 0.5)
    }

    pub fn norm1_value(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].value().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_value(&self) -> f64 {
        self.data.iter().map(|x| x.value().powi(2)).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Solves `self · X = rhs` by LU with partial pivoting; `None` when singular.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        assert!(self.is_square() && rhs.rows == self.rows);
        let n = self.rows;
        let mut a = self.clone();
        let mut b = rhs.clone();
        for col in 0..n {
            let pivot = (col..n).max_by(|&i, &j| a[(i, col)].value().abs().total_cmp(&a[(j, col)].value().abs()))?;
            if a[(pivot, col)].value() == 0.0 || !a[(pivot, col)].value().is_finite() {
                return None;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                b.swap_rows(pivot, col);
            }
            let inv = a[(col, col)].recip();
            for r in col + 1..n {
                let factor = a[(r, col)] * inv;
                for c in col..n {
                    let t = a[(col, c)];
                    a[(r, c)] -= factor * t;
                }
                for c in 0..b.cols {
                    let t = b[(col, c)];
                    b[(r, c)] -= factor * t;
                }
            }
        }
        for col in (0..n).rev() {
            let inv = a[(col, col)].recip();
            for c in 0..b.cols {
                let mut acc = b[(col, c)];
                for k in col + 1..n {
                    acc -= a[(col, k)] * b[(k, c)];
                }
                b[(col, c)] = acc * inv;
            }
        }
        Some(b)
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    /// Lower Cholesky factor; `None` unless positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        assert!(self.is_square());
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d.value() > 0.0) {
                return None;
            }
            let ljj = d.sqrt();
            l[(j, j)] = ljj;
            let inv = ljj.recip();
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s * inv;
            }
        }
        Some(l)
    }

    /// Matrix exponential by scaling and squaring with a diagonal Padé
    /// approximant of degree 3–13 chosen from the 1-norm.
    pub fn expm(&self) -> Self {
        assert!(self.is_square());
        let n = self.rows;
        let norm = self.norm1_value();
        const THETA: [(usize, f64); 4] = [
            (3, 1.495585217958292e-2),
            (5, 2.53939833006323e-1),
            (7, 9.504178996162932e-1),
            (9, 2.097847961257068e0),
        ];
        for (m, theta) in THETA {
            if norm <= theta {
                return pade(self, m);
            }
        }
        const THETA13: f64 = 5.371920351148152;
        let s = if norm > THETA13 {
            (norm / THETA13).log2().ceil().max(0.0) as i32
        } else {
            0
        };
        let scaled = self.scale_f64(0.5f64.powi(s));
        let mut r = pade(&scaled, 13);
        for _ in 0..s {
            r = r.matmul(&r);
        }
        debug_assert_eq!(r.rows, n);
        r
    }

    /// Sub-block `[r0..r0+rows) × [c0..c0+cols)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| self[(r0 + i, c0 + j)])
    }
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn pade<S: Real>(a: &Mat<S>, m: usize) -> Mat<S> {
    let n = a.rows;
    let ident = Mat::<S>::identity(n);
    let a2 = a.matmul(a);
    let (u, v) = if m == 13 {
        let b = &PADE13;
        let a4 = a2.matmul(&a2);
        let a6 = a4.matmul(&a2);
        let inner_u = a6.scale_f64(b[13]).add(&a4.scale_f64(b[11])).add(&a2.scale_f64(b[9]));
        let u = a.matmul(
            &a6.matmul(&inner_u)
                .add(&a6.scale_f64(b[7]))
                .add(&a4.scale_f64(b[5]))
                .add(&a2.scale_f64(b[3]))
                .add(&ident.scale_f64(b[1])),
        );
        let inner_v = a6.scale_f64(b[12]).add(&a4.scale_f64(b[10])).add(&a2.scale_f64(b[8]));
        let v = a6
            .matmul(&inner_v)
            .add(&a6.scale_f64(b[6]))
            .add(&a4.scale_f64(b[4]))
            .add(&a2.scale_f64(b[2]))
            .add(&ident.scale_f64(b[0]));
        (u, v)
    } else {
        let b: &[f64] = match m {
            3 => &PADE3,
            5 => &PADE5,
            7 => &PADE7,
            9 => &PADE9,
            _ => unreachable!("unsupported Padé degree {m}"),
        };
        // Even powers A^0, A^2, ..., A^(m-1).
        let mut powers = vec![ident.clone()];
        while powers.len() * 2 <= m {
            let next = powers.last().unwrap().matmul(&a2);
            powers.push(next);
        }
        let mut u_inner = Mat::zeros(n, n);
        let mut v = Mat::zeros(n, n);
        for (k, p) in powers.iter().enumerate() {
            u_inner = u_inner.add(&p.scale_f64(b[2 * k + 1]));
            v = v.add(&p.scale_f64(b[2 * k]));
        }
        (a.matmul(&u_inner), v)
    };
    v.sub(&u)
        .solve(&v.add(&u))
        .expect("Padé denominator is nonsingular within its convergence radius")
}

impl<S> Index<(usize, usize)> for Mat<S> {
    type Output = S;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &S {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Mat<S> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mat<f64> {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }

    pub fn lift<S: Real>(&self) -> Mat<S> {
        self.map(S::cst)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
