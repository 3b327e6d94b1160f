//! Exact integer linear algebra.
//!
//! Everything here works over arbitrary-precision integers: determinants by
//! fraction-free elimination, characteristic polynomials, Smith normal form,
//! and the smallest `A`-invariant subgroup `H` generated by the differences of
//! the support of an increment measure. Floating point only appears when a
//! residual polynomial factor has to have its roots located.

use std::fmt;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::measure::IncrementMeasure;

/// Roots closer than this to the unit circle make a matrix non-hyperbolic.
pub const TAU_EIG: f64 = 1e-9;
/// Roots between `TAU_EIG` and this distance are reported as ambiguous.
pub const TAU_EIG_CERTIFY: f64 = 1e-7;

/// Dense integer matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<BigInt>) -> Self {
        assert_eq!(data.len(), rows * cols, "entry count does not match shape");
        IntMatrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix::new(rows, cols, vec![BigInt::zero(); rows * cols])
    }

    pub fn identity(d: usize) -> Self {
        let mut m = IntMatrix::zeros(d, d);
        for i in 0..d {
            m.data[i * d + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from row vectors; ragged input is rejected.
    pub fn from_rows<T: Clone + Into<BigInt>>(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
            }
            data.extend(row.iter().cloned().map(Into::into));
        }
        Ok(IntMatrix::new(rows.len(), cols, data))
    }

    /// Row-major `rows x cols` matrix from machine integers.
    pub fn from_slice(rows: usize, cols: usize, entries: &[i64]) -> Self {
        IntMatrix::new(rows, cols, entries.iter().map(|&x| BigInt::from(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Side length of a square matrix.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j).clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "incompatible shapes");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn pow(&self, mut k: u32) -> IntMatrix {
        let mut base = self.clone();
        let mut acc = IntMatrix::identity(self.dim());
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            k >>= 1;
        }
        acc
    }

    pub fn trace(&self) -> BigInt {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i).clone()).sum()
    }

    /// Determinant by Bareiss fraction-free elimination.
    pub fn determinant(&self) -> BigInt {
        let n = self.dim();
        if n == 0 {
            return BigInt::one();
        }
        let mut m = self.data.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if m[k * n + k].is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !m[i * n + k].is_zero()) else {
                    return BigInt::zero();
                };
                for j in 0..n {
                    m.swap(k * n + j, p * n + j);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                    m[i * n + j] = num / &prev;
                }
            }
            prev = m[k * n + k].clone();
        }
        sign * &m[n * n - 1]
    }

    /// Integer inverse, if the matrix is unimodular.
    pub fn inverse(&self) -> Option<IntMatrix> {
        let n = self.dim();
        let mut aug: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                let mut row: Vec<BigRational> =
                    self.row(i).iter().map(|x| BigRational::from_integer(x.clone())).collect();
                row.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
                row
            })
            .collect();
        for c in 0..n {
            let p = (c..n).find(|&r| !aug[r][c].is_zero())?;
            aug.swap(c, p);
            let pivot = aug[c][c].clone();
            for x in aug[c].iter_mut() {
                *x /= &pivot;
            }
            let pivot_row = aug[c].clone();
            for (r, row) in aug.iter_mut().enumerate() {
                if r != c && !row[c].is_zero() {
                    let f = row[c].clone();
                    for (x, y) in row.iter_mut().zip(&pivot_row) {
                        *x -= &f * y;
                    }
                }
            }
        }
        let mut data = Vec::with_capacity(n * n);
        for row in &aug {
            for x in &row[n..] {
                if !x.is_integer() {
                    return None;
                }
                data.push(x.to_integer());
            }
        }
        Some(IntMatrix::new(n, n, data))
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| big_to_f64(self.get(i, j)))
    }

    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(ToPrimitive::to_i64).collect())
            .collect()
    }

    /// Entries reduced into `[0, n)`, row-major.
    pub fn reduce_mod(&self, n: u64) -> Vec<u64> {
        let modulus = BigInt::from(n);
        self.data
            .iter()
            .map(|x| x.mod_floor(&modulus).to_u64().expect("residue fits in u64"))
            .collect()
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.data
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for (j, x) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

pub(crate) fn big_to_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(if x.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// Integer polynomial with coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(mut coeffs: Vec<BigInt>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        IntPolynomial { coeffs }
    }

    pub fn from_i64(coeffs: &[i64]) -> Self {
        IntPolynomial::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// `x^deg p(1/x)`.
    pub fn reverse(&self) -> IntPolynomial {
        let mut c = self.coeffs.clone();
        c.reverse();
        IntPolynomial::new(c)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + big_to_f64(c))
    }
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let mag = c.abs();
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if c.is_negative() { '-' } else { '+' })?;
            }
            first = false;
            let show_coeff = k == 0 || !mag.is_one();
            if show_coeff {
                write!(f, "{mag}")?;
            }
            match k {
                0 => {}
                1 => write!(f, "x")?,
                _ => write!(f, "x^{k}")?,
            }
        }
        Ok(())
    }
}

/// `det(xI - A)` by the Faddeev–LeVerrier recursion, exact over the integers.
pub fn characteristic_polynomial(a: &IntMatrix) -> IntPolynomial {
    let d = a.dim();
    let mut coeffs = vec![BigInt::zero(); d + 1];
    coeffs[d] = BigInt::one();
    let mut m = IntMatrix::zeros(d, d);
    for k in 1..=d {
        m = a.mul(&m);
        for i in 0..d {
            let v = m.get(i, i) + &coeffs[d - k + 1];
            m.set(i, i, v);
        }
        let tr = a.mul(&m).trace();
        coeffs[d - k] = -(tr / BigInt::from(k));
    }
    IntPolynomial::new(coeffs)
}

pub fn is_unimodular(a: &IntMatrix) -> bool {
    a.is_square() && a.determinant().abs().is_one()
}

type RatPoly = Vec<BigRational>;

fn rat_trim(mut p: RatPoly) -> RatPoly {
    while p.last().is_some_and(Zero::is_zero) {
        p.pop();
    }
    p
}

fn rat_divmod(a: &RatPoly, b: &RatPoly) -> (RatPoly, RatPoly) {
    let mut r = a.clone();
    let db = b.len() - 1;
    let lead = b[db].clone();
    if r.len() < b.len() {
        return (Vec::new(), r);
    }
    let mut q = vec![BigRational::zero(); r.len() - db];
    while r.len() > db && !r.is_empty() {
        let shift = r.len() - 1 - db;
        let f = r.last().unwrap() / &lead;
        for (i, c) in b.iter().enumerate() {
            let delta = &f * c;
            r[i + shift] -= delta;
        }
        q[shift] = f;
        r.pop();
        r = rat_trim(r);
    }
    (rat_trim(q), r)
}

fn rat_gcd(a: &RatPoly, b: &RatPoly) -> RatPoly {
    let (mut x, mut y) = (rat_trim(a.clone()), rat_trim(b.clone()));
    while !y.is_empty() {
        let (_, r) = rat_divmod(&x, &y);
        x = y;
        y = r;
    }
    if let Some(lead) = x.last().cloned() {
        for c in x.iter_mut() {
            *c /= &lead;
        }
    }
    x
}

fn rat_derivative(p: &RatPoly) -> RatPoly {
    rat_trim(
        p.iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| c * BigRational::from_integer(BigInt::from(k)))
            .collect(),
    )
}

fn to_rat(p: &IntPolynomial) -> RatPoly {
    p.coeffs().iter().map(|c| BigRational::from_integer(c.clone())).collect()
}

/// Roots of a monic square-free rational polynomial: companion eigenvalues
/// polished by a few Newton steps.
fn simple_roots(p: &RatPoly) -> Vec<Complex64> {
    let deg = p.len() - 1;
    if deg == 0 {
        return Vec::new();
    }
    let c: Vec<f64> = p.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect();
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if j == deg - 1 {
            -c[i] / c[deg]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut roots: Vec<Complex64> = companion.complex_eigenvalues().iter().copied().collect();
    let eval = |z: Complex64| -> (Complex64, Complex64) {
        let mut v = Complex64::new(0.0, 0.0);
        let mut dv = Complex64::new(0.0, 0.0);
        for &ck in c.iter().rev() {
            dv = dv * z + v;
            v = v * z + ck;
        }
        (v, dv)
    };
    for z in roots.iter_mut() {
        for _ in 0..8 {
            let (v, dv) = eval(*z);
            if dv.norm() == 0.0 {
                break;
            }
            let step = v / dv;
            *z -= step;
            if step.norm() <= 1e-17 * z.norm().max(1.0) {
                break;
            }
        }
    }
    roots
}

/// All complex eigenvalues of `A`, with multiplicity.
pub fn spectrum(a: &IntMatrix) -> Vec<Complex64> {
    a.to_f64().complex_eigenvalues().iter().copied().collect()
}

/// True iff no eigenvalue of `A` lies on the unit circle.
///
/// Unit-modulus roots of `p` are shared with its reversal, so only the
/// square-free part of `gcd(p, reverse(p))` is ever examined numerically.
pub fn is_hyperbolic(a: &IntMatrix) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::NotSquare { rows: a.rows(), cols: a.cols() });
    }
    let p = characteristic_polynomial(a);
    let g = rat_gcd(&to_rat(&p), &to_rat(&p.reverse()));
    if g.len() <= 1 {
        return Ok(true);
    }
    let dg = rat_derivative(&g);
    let common = rat_gcd(&g, &dg);
    let (square_free, _) = rat_divmod(&g, &common);
    let closest = simple_roots(&square_free)
        .into_iter()
        .map(|z| (z.norm() - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    if closest <= TAU_EIG {
        Ok(false)
    } else if closest <= TAU_EIG_CERTIFY {
        Err(Error::AmbiguousSpectrum { distance: closest })
    } else {
        Ok(true)
    }
}

/// `U * M * V = diag(factors, 0, ...)` with unimodular `U`, `V`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithDecomposition {
    pub u: IntMatrix,
    pub v: IntMatrix,
    /// Inverse of `u`, tracked alongside it.
    pub u_inv: IntMatrix,
    /// Nonzero invariant factors, each dividing the next.
    pub factors: Vec<BigInt>,
    pub rank: usize,
}

impl SmithDecomposition {
    /// The diagonal matrix `U M V`, with the shape of `M`.
    pub fn diagonal(&self) -> IntMatrix {
        let mut d = IntMatrix::zeros(self.u.rows(), self.v.rows());
        for (i, a) in self.factors.iter().enumerate() {
            d.set(i, i, a.clone());
        }
        d
    }
}

struct SnfState {
    a: IntMatrix,
    u: IntMatrix,
    u_inv: IntMatrix,
    v: IntMatrix,
}

impl SnfState {
    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for m in [&mut self.a, &mut self.u] {
            for c in 0..m.cols {
                m.data.swap(i * m.cols + c, j * m.cols + c);
            }
        }
        swap_cols(&mut self.u_inv, i, j);
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        swap_cols(&mut self.a, i, j);
        swap_cols(&mut self.v, i, j);
    }

    /// row[dst] += q * row[src]
    fn add_row(&mut self, dst: usize, src: usize, q: &BigInt) {
        for m in [&mut self.a, &mut self.u] {
            for c in 0..m.cols {
                let delta = q * &m.data[src * m.cols + c];
                m.data[dst * m.cols + c] += delta;
            }
        }
        // U^{-1} picks up the inverse operation on the right.
        let ui = &mut self.u_inv;
        for r in 0..ui.rows {
            let delta = q * &ui.data[r * ui.cols + dst];
            ui.data[r * ui.cols + src] -= delta;
        }
    }

    /// col[dst] += q * col[src]
    fn add_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        for m in [&mut self.a, &mut self.v] {
            for r in 0..m.rows {
                let delta = q * &m.data[r * m.cols + src];
                m.data[r * m.cols + dst] += delta;
            }
        }
    }

    fn negate_row(&mut self, i: usize) {
        for m in [&mut self.a, &mut self.u] {
            for c in 0..m.cols {
                let x = -std::mem::take(&mut m.data[i * m.cols + c]);
                m.data[i * m.cols + c] = x;
            }
        }
        let ui = &mut self.u_inv;
        for r in 0..ui.rows {
            let x = -std::mem::take(&mut ui.data[r * ui.cols + i]);
            ui.data[r * ui.cols + i] = x;
        }
    }
}

fn swap_cols(m: &mut IntMatrix, i: usize, j: usize) {
    for r in 0..m.rows {
        m.data.swap(r * m.cols + i, r * m.cols + j);
    }
}

/// Smith normal form of an arbitrary (possibly non-square) integer matrix.
pub fn smith_normal_form(m: &IntMatrix) -> SmithDecomposition {
    let (rows, cols) = (m.rows(), m.cols());
    let mut s = SnfState {
        a: m.clone(),
        u: IntMatrix::identity(rows),
        u_inv: IntMatrix::identity(rows),
        v: IntMatrix::identity(cols),
    };
    let mut t = 0;
    while t < rows.min(cols) {
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                let x = s.a.get(i, j);
                if !x.is_zero() && best.is_none_or(|(bi, bj)| x.abs() < s.a.get(bi, bj).abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        s.swap_rows(t, pi);
        s.swap_cols(t, pj);
        loop {
            for i in t + 1..rows {
                if !s.a.get(i, t).is_zero() {
                    let q = s.a.get(i, t).div_floor(s.a.get(t, t));
                    s.add_row(i, t, &-q);
                }
            }
            for j in t + 1..cols {
                if !s.a.get(t, j).is_zero() {
                    let q = s.a.get(t, j).div_floor(s.a.get(t, t));
                    s.add_col(j, t, &-q);
                }
            }
            // Any remainder is smaller than the pivot: promote it and retry.
            let mut smaller: Option<(usize, usize)> = None;
            for i in t + 1..rows {
                if !s.a.get(i, t).is_zero()
                    && smaller.is_none_or(|(bi, bj)| s.a.get(i, t).abs() < s.a.get(bi, bj).abs())
                {
                    smaller = Some((i, t));
                }
            }
            for j in t + 1..cols {
                if !s.a.get(t, j).is_zero()
                    && smaller.is_none_or(|(bi, bj)| s.a.get(t, j).abs() < s.a.get(bi, bj).abs())
                {
                    smaller = Some((t, j));
                }
            }
            if let Some((i, j)) = smaller {
                s.swap_rows(t, i);
                s.swap_cols(t, j);
                continue;
            }
            let pivot = s.a.get(t, t).clone();
            let offender = (t + 1..rows)
                .flat_map(|i| (t + 1..cols).map(move |j| (i, j)))
                .find(|&(i, j)| !s.a.get(i, j).is_multiple_of(&pivot));
            match offender {
                Some((i, _)) => s.add_row(t, i, &BigInt::one()),
                None => break,
            }
        }
        if s.a.get(t, t).is_negative() {
            s.negate_row(t);
        }
        t += 1;
    }
    let factors: Vec<BigInt> = (0..t).map(|i| s.a.get(i, i).clone()).collect();
    SmithDecomposition { u: s.u, v: s.v, u_inv: s.u_inv, rank: factors.len(), factors }
}

/// The subgroup `H = span{a_i u_i}` of `Z^d`, in Smith-adapted coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubgroupBasis {
    pub dim: usize,
    /// Columns `u_1..u_d`: a basis of `Z^d` whose first `rank` vectors carry `H`.
    pub basis: IntMatrix,
    /// Inverse of `basis`; maps a vector to its adapted coordinates.
    pub coordinates: IntMatrix,
    pub factors: Vec<BigInt>,
    pub rank: usize,
}

impl SubgroupBasis {
    pub fn basis_vectors(&self) -> Vec<Vec<BigInt>> {
        (0..self.rank).map(|j| self.basis.column(j)).collect()
    }

    /// The generators `a_i u_i`.
    pub fn generators(&self) -> Vec<Vec<BigInt>> {
        self.basis_vectors()
            .into_iter()
            .zip(&self.factors)
            .map(|(u, a)| u.into_iter().map(|x| x * a).collect())
            .collect()
    }

    pub fn contains(&self, v: &[BigInt]) -> bool {
        let c = self.coordinates.mul_vec(v);
        c.iter().enumerate().all(|(i, ci)| match self.factors.get(i) {
            Some(a) => ci.is_multiple_of(a),
            None => ci.is_zero(),
        })
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim
    }
}

/// Smallest `A`-invariant subgroup containing `supp μ − supp μ`.
///
/// Differences against one fixed support point generate the same group, and
/// Cayley–Hamilton makes powers `0..d` sufficient.
pub fn invariant_subgroup(a: &IntMatrix, mu: &IncrementMeasure) -> Result<SubgroupBasis> {
    if !is_unimodular(a) {
        return Err(Error::NotUnimodular { det: a.determinant().to_string() });
    }
    let d = a.dim();
    if mu.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: mu.dim() });
    }
    let base = &mu.support()[0];
    let mut columns: Vec<Vec<BigInt>> = Vec::new();
    for x in &mu.support()[1..] {
        let mut v: Vec<BigInt> = x.iter().zip(base).map(|(p, q)| BigInt::from(p - q)).collect();
        for _ in 0..d {
            columns.push(v.clone());
            v = a.mul_vec(&v);
        }
    }
    if columns.is_empty() {
        return Ok(SubgroupBasis {
            dim: d,
            basis: IntMatrix::identity(d),
            coordinates: IntMatrix::identity(d),
            factors: Vec::new(),
            rank: 0,
        });
    }
    let mut gens = IntMatrix::zeros(d, columns.len());
    for (j, col) in columns.into_iter().enumerate() {
        for (i, x) in col.into_iter().enumerate() {
            gens.set(i, j, x);
        }
    }
    let snf = smith_normal_form(&gens);
    Ok(SubgroupBasis { dim: d, basis: snf.u_inv, coordinates: snf.u, rank: snf.rank, factors: snf.factors })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConvergenceDiagnostic {
    Convergent,
    RankDeficient { rank: usize, dim: usize },
    SharedFactor { index: usize, factor: BigInt, gcd: BigInt },
}

impl fmt::Display for ConvergenceDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConvergenceDiagnostic::Convergent => write!(f, "rank is full and n is coprime to every invariant factor"),
            ConvergenceDiagnostic::RankDeficient { rank, dim } => {
                write!(f, "H has rank {rank} < {dim}; the walk stays on a proper coset")
            }
            ConvergenceDiagnostic::SharedFactor { index, factor, gcd } => {
                write!(f, "invariant factor a_{} = {factor} shares {gcd} with n", index + 1)
            }
        }
    }
}

/// The walk mod `n` converges to uniform iff `H` has full rank and `n` is
/// coprime to every invariant factor.
pub fn convergence_check(h: &SubgroupBasis, n: u64) -> (bool, ConvergenceDiagnostic) {
    if !h.is_full_rank() {
        return (false, ConvergenceDiagnostic::RankDeficient { rank: h.rank, dim: h.dim });
    }
    let n = BigInt::from(n);
    for (index, a) in h.factors.iter().enumerate() {
        let g = a.gcd(&n);
        if !g.is_one() {
            return (false, ConvergenceDiagnostic::SharedFactor { index, factor: a.clone(), gcd: g });
        }
    }
    (true, ConvergenceDiagnostic::Convergent)
}
