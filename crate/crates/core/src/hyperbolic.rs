//! Linear hyperbolic dynamics on the continuous torus `R^d / Z^d`.
//!
//! A hyperbolic `A` splits `R^d = E_s ⊕ E_u`. On top of that splitting sits an
//! adapted norm
//!
//! ```text
//! ‖x‖' = max( Σ_{k<l} ‖S^k x_s‖, Σ_{k<l} ‖T^k x_u‖ ),   S = A|E_s,  T = A⁻¹|E_u
//! ```
//!
//! in which both `S` and `T` are strict contractions with rate `λ`. The torus
//! distance is the quotient of `‖·‖'` by `Z^d`.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::lattice::{big_to_f64, is_hyperbolic, spectrum, IntMatrix, SubgroupBasis};

/// Subspace residual tolerance.
pub const TAU_LIN: f64 = 1e-9;
/// Tolerance for metric identities and boundary tests.
pub const TAU_GEO: f64 = 1e-12;

const MAX_POWER: usize = 10_000;

/// Maps a real vector into `[0, 1)^d`.
pub fn wrap(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&c| wrap_scalar(c)).collect()
}

pub(crate) fn wrap_scalar(c: f64) -> f64 {
    let w = c - c.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

/// Stable and unstable subspaces of a hyperbolic matrix.
#[derive(Clone, Debug)]
pub struct Splitting {
    pub dim: usize,
    /// Orthonormal columns spanning `E_s`.
    pub stable_basis: DMatrix<f64>,
    /// Orthonormal columns spanning `E_u`.
    pub unstable_basis: DMatrix<f64>,
    pub proj_stable: DMatrix<f64>,
    pub proj_unstable: DMatrix<f64>,
    /// `A` restricted to `E_s`, in `stable_basis` coordinates.
    pub stable_map: DMatrix<f64>,
    /// `A` restricted to `E_u`, in `unstable_basis` coordinates.
    pub unstable_map: DMatrix<f64>,
    pub stable_eigenvalues: Vec<Complex64>,
    pub unstable_eigenvalues: Vec<Complex64>,
}

impl Splitting {
    pub fn dims(&self) -> (usize, usize) {
        (self.stable_basis.ncols(), self.unstable_basis.ncols())
    }

    /// Coordinates of `P_s x` in the stable basis.
    pub fn stable_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.stable_basis.transpose() * (&self.proj_stable * x)
    }

    pub fn unstable_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        self.unstable_basis.transpose() * (&self.proj_unstable * x)
    }
}

/// Real coefficients (ascending) of `Π (x − z)`.
fn real_poly_from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &z in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (k, &ck) in c.iter().enumerate() {
            next[k + 1] += ck;
            next[k] -= ck * z;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

fn eval_matrix_poly(coeffs: &[f64], a: &DMatrix<f64>) -> DMatrix<f64> {
    let d = a.nrows();
    let mut acc = DMatrix::<f64>::zeros(d, d);
    for &c in coeffs.iter().rev() {
        acc = &acc * a + DMatrix::<f64>::identity(d, d) * c;
    }
    acc
}

/// Orthonormal basis of the numerical kernel of `m`, whose dimension is known.
fn kernel_basis(m: &DMatrix<f64>, dim: usize) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    if dim == 0 {
        return Ok(DMatrix::zeros(d, 0));
    }
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let scale = svd.singular_values.max().max(1.0);
    let kernel_sv = svd.singular_values[order[dim - 1]];
    if kernel_sv > TAU_LIN * scale {
        return Err(Error::Numerical(format!("kernel of dimension {dim} not found (σ = {kernel_sv:e})")));
    }
    if dim < d && svd.singular_values[order[dim]] <= TAU_LIN * scale {
        return Err(Error::Numerical("kernel is larger than expected".into()));
    }
    let mut basis = DMatrix::zeros(d, dim);
    for (c, &i) in order[..dim].iter().enumerate() {
        basis.set_column(c, &v_t.row(i).transpose());
    }
    Ok(basis)
}

/// Splits `R^d` into the generalized eigenspaces inside and outside the
/// unit circle, as kernels of the real factors `P_s(A)` and `P_u(A)`.
pub fn stable_unstable_split(a: &IntMatrix) -> Result<Splitting> {
    if !is_hyperbolic(a)? {
        return Err(Error::NotHyperbolic);
    }
    let d = a.dim();
    let af = a.to_f64();
    let eig = spectrum(a);
    let (stable_eigenvalues, unstable_eigenvalues): (Vec<Complex64>, Vec<Complex64>) =
        eig.iter().partition(|z| z.norm() < 1.0);
    let ps = eval_matrix_poly(&real_poly_from_roots(&stable_eigenvalues), &af);
    let pu = eval_matrix_poly(&real_poly_from_roots(&unstable_eigenvalues), &af);
    let es = kernel_basis(&ps, stable_eigenvalues.len())?;
    let eu = kernel_basis(&pu, unstable_eigenvalues.len())?;
    let mut b = DMatrix::zeros(d, d);
    b.columns_mut(0, es.ncols()).copy_from(&es);
    b.columns_mut(es.ncols(), eu.ncols()).copy_from(&eu);
    let b_inv = b.clone().try_inverse().ok_or_else(|| Error::Numerical("E_s and E_u are not complementary".into()))?;
    let ds = es.ncols();
    let proj_stable = &es * b_inv.rows(0, ds);
    let proj_unstable = &eu * b_inv.rows(ds, d - ds);
    let stable_map = es.transpose() * &af * &es;
    let unstable_map = eu.transpose() * &af * &eu;
    let scale = af.norm().max(1.0);
    let res_s = (&af * &es - &es * &stable_map).norm();
    let res_u = (&af * &eu - &eu * &unstable_map).norm();
    if res_s > TAU_LIN * scale || res_u > TAU_LIN * scale {
        return Err(Error::Numerical(format!("invariant subspace residuals {res_s:e}, {res_u:e}")));
    }
    Ok(Splitting {
        dim: d,
        stable_basis: es,
        unstable_basis: eu,
        proj_stable,
        proj_unstable,
        stable_map,
        unstable_map,
        stable_eigenvalues,
        unstable_eigenvalues,
    })
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// The adapted norm together with its contraction rates and the constants
/// comparing it with the Euclidean norm.
#[derive(Clone, Debug)]
pub struct AdaptedNorm {
    pub splitting: Splitting,
    /// The power `l` in the construction.
    pub power: usize,
    stable_powers: Vec<DMatrix<f64>>,
    unstable_powers: Vec<DMatrix<f64>>,
    stable_coord_map: DMatrix<f64>,
    unstable_coord_map: DMatrix<f64>,
    /// Operator norm bound of `A|E_s`.
    pub lambda_stable: f64,
    /// Operator norm bound of `A⁻¹|E_u`.
    pub lambda_unstable: f64,
    pub lambda: f64,
    /// Bound on `‖A‖'`.
    pub forward_norm: f64,
    /// Bound on `‖A⁻¹‖'`.
    pub backward_norm: f64,
    /// `‖x‖' ≥ lower · ‖x‖₂`.
    pub lower: f64,
    /// `‖x‖' ≤ upper · ‖x‖₂`.
    pub upper: f64,
}

/// Contraction bound for `N(c) = Σ_{k<l} ‖M^k c‖` under `M`. Exact for 1-D.
fn contraction_bound(m: &DMatrix<f64>, powers: &[DMatrix<f64>], l: usize) -> f64 {
    if m.nrows() == 1 {
        return m[(0, 0)].abs();
    }
    if m.nrows() == 0 {
        return 0.0;
    }
    let total: f64 = powers.iter().map(spectral_norm).sum();
    let q = spectral_norm(&(&powers[l - 1] * m));
    1.0 - (1.0 - q) / total
}

/// Builds `‖·‖'` for the given splitting of `A`.
pub fn adapted_norm(splitting: &Splitting) -> Result<AdaptedNorm> {
    let s = &splitting.stable_map;
    let t = splitting
        .unstable_map
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("A restricted to E_u is singular".into()))?;
    let power = (1..=MAX_POWER)
        .find(|&l| spectral_norm(&s.pow(l as u32)) < 1.0 && spectral_norm(&t.pow(l as u32)) < 1.0)
        .ok_or_else(|| Error::Numerical("no contracting power found".into()))?;
    let stable_powers: Vec<_> = (0..power).map(|k| s.pow(k as u32)).collect();
    let unstable_powers: Vec<_> = (0..power).map(|k| t.pow(k as u32)).collect();
    let lambda_stable = contraction_bound(s, &stable_powers, power);
    let lambda_unstable = contraction_bound(&t, &unstable_powers, power);
    // A|E_u = T⁻¹ commutes with every T^k, so its norm is at most ‖T⁻¹‖₂; dually for S⁻¹.
    let expand_u = if t.nrows() == 1 { 1.0 / t[(0, 0)].abs() } else { spectral_norm(&splitting.unstable_map) };
    let s_inv = s.clone().try_inverse().ok_or_else(|| Error::Numerical("A restricted to E_s is singular".into()))?;
    let expand_s = if s.nrows() == 1 { 1.0 / s[(0, 0)].abs() } else { spectral_norm(&s_inv) };
    let stable_coord_map = splitting.stable_basis.transpose() * &splitting.proj_stable;
    let unstable_coord_map = splitting.unstable_basis.transpose() * &splitting.proj_unstable;
    let sum_s: f64 = stable_powers.iter().map(spectral_norm).sum();
    let sum_u: f64 = unstable_powers.iter().map(spectral_norm).sum();
    let upper = (sum_s * spectral_norm(&stable_coord_map)).max(sum_u * spectral_norm(&unstable_coord_map));
    let d = splitting.dim;
    let mut b = DMatrix::zeros(d, d);
    let ds = splitting.stable_basis.ncols();
    b.columns_mut(0, ds).copy_from(&splitting.stable_basis);
    b.columns_mut(ds, d - ds).copy_from(&splitting.unstable_basis);
    let lower = 0.5f64.max(1.0 / (std::f64::consts::SQRT_2 * spectral_norm(&b)));
    Ok(AdaptedNorm {
        splitting: splitting.clone(),
        power,
        stable_powers,
        unstable_powers,
        stable_coord_map,
        unstable_coord_map,
        lambda_stable,
        lambda_unstable,
        lambda: lambda_stable.max(lambda_unstable),
        forward_norm: lambda_stable.max(expand_u),
        backward_norm: lambda_unstable.max(expand_s),
        lower,
        upper,
    })
}

impl AdaptedNorm {
    pub fn stable_coord_norm(&self, c: &DVector<f64>) -> f64 {
        self.stable_powers.iter().map(|m| (m * c).norm()).sum()
    }

    pub fn unstable_coord_norm(&self, c: &DVector<f64>) -> f64 {
        self.unstable_powers.iter().map(|m| (m * c).norm()).sum()
    }

    /// `‖P_s x‖'`.
    pub fn stable_norm(&self, x: &[f64]) -> f64 {
        self.stable_coord_norm(&(&self.stable_coord_map * DVector::from_column_slice(x)))
    }

    /// `‖P_u x‖'`.
    pub fn unstable_norm(&self, x: &[f64]) -> f64 {
        self.unstable_coord_norm(&(&self.unstable_coord_map * DVector::from_column_slice(x)))
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.stable_norm(x).max(self.unstable_norm(x))
    }

    pub fn project_stable(&self, x: &[f64]) -> Vec<f64> {
        (&self.splitting.proj_stable * DVector::from_column_slice(x)).iter().copied().collect()
    }

    pub fn project_unstable(&self, x: &[f64]) -> Vec<f64> {
        (&self.splitting.proj_unstable * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// The lift of `diff` modulo `Z^d` with the smallest adapted norm, and
    /// that norm.
    pub fn representative(&self, diff: &[f64]) -> (Vec<f64>, f64) {
        let z: Vec<f64> = diff.iter().map(|&c| c - c.round()).collect();
        let start = self.norm(&z);
        // A better lift has Euclidean length at most start / lower.
        let radius = start / self.lower;
        let ranges: Vec<(i64, i64)> =
            z.iter().map(|&c| ((-radius - c).ceil() as i64, (radius - c).floor() as i64)).collect();
        let mut best = (z.clone(), start);
        let mut shift: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut w = vec![0.0; z.len()];
        'outer: loop {
            for ((wi, &zi), &si) in w.iter_mut().zip(&z).zip(&shift) {
                *wi = zi + si as f64;
            }
            if w.iter().map(|x| x * x).sum::<f64>().sqrt() <= radius + TAU_GEO {
                let v = self.norm(&w);
                if v < best.1 {
                    best = (w.clone(), v);
                }
            }
            for (i, s) in shift.iter_mut().enumerate() {
                if *s < ranges[i].1 {
                    *s += 1;
                    continue 'outer;
                }
                *s = ranges[i].0;
            }
            break;
        }
        best
    }

    /// Quotient distance between torus points.
    pub fn torus_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.representative(&diff).1
    }

    /// Shortest nonzero vector of `Z^d` in `‖·‖'`, by enumeration.
    pub fn shortest_vector(&self) -> (Vec<i64>, f64) {
        let d = self.splitting.dim;
        let mut best: (Vec<i64>, f64) = (vec![0; d], f64::INFINITY);
        for i in 0..d {
            let mut e = vec![0i64; d];
            e[i] = 1;
            let v = self.norm(&e.iter().map(|&c| c as f64).collect::<Vec<_>>());
            if v < best.1 {
                best = (e, v);
            }
        }
        let r = (best.1 / self.lower).floor() as i64;
        let mut v = vec![-r; d];
        'outer: loop {
            if v.iter().any(|&c| c != 0) {
                let vf: Vec<f64> = v.iter().map(|&c| c as f64).collect();
                let nv = self.norm(&vf);
                if nv < best.1 - TAU_GEO {
                    best = (v.clone(), nv);
                }
            }
            for c in v.iter_mut() {
                if *c < r {
                    *c += 1;
                    continue 'outer;
                }
                *c = -r;
            }
            break;
        }
        best
    }
}

/// A hyperbolic automorphism of the torus with its adapted norm.
#[derive(Clone, Debug)]
pub struct HyperbolicSystem {
    pub matrix: IntMatrix,
    pub forward: DMatrix<f64>,
    pub backward: DMatrix<f64>,
    pub norm: AdaptedNorm,
}

impl HyperbolicSystem {
    pub fn new(a: &IntMatrix) -> Result<Self> {
        let splitting = stable_unstable_split(a)?;
        let norm = adapted_norm(&splitting)?;
        let inv = a.inverse().ok_or(Error::NotUnimodular { det: a.determinant().to_string() })?;
        Ok(HyperbolicSystem { matrix: a.clone(), forward: a.to_f64(), backward: inv.to_f64(), norm })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.forward * DVector::from_column_slice(x)).iter().copied().collect()
    }

    pub fn apply_inverse(&self, x: &[f64]) -> Vec<f64> {
        (&self.backward * DVector::from_column_slice(x)).iter().copied().collect()
    }

    /// `A x mod 1`.
    pub fn step(&self, x: &[f64]) -> Vec<f64> {
        wrap(&self.apply(x))
    }

    pub fn step_back(&self, x: &[f64]) -> Vec<f64> {
        wrap(&self.apply_inverse(x))
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        self.norm.torus_distance(x, y)
    }

    pub fn constants(&self, h: &SubgroupBasis) -> Result<HyperbolicConstants> {
        hyperbolic_constants(self, h)
    }

    /// `ε_c = shortest / (2 max(‖A‖', ‖A⁻¹‖'))`.
    pub fn expansiveness_constant(&self) -> f64 {
        let (_, shortest) = self.norm.shortest_vector();
        shortest / (2.0 * self.norm.forward_norm.max(self.norm.backward_norm))
    }
}

pub fn torus_distance(x: &[f64], y: &[f64], norm: &AdaptedNorm) -> f64 {
    norm.torus_distance(x, y)
}

/// Expansiveness and gap constants.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct HyperbolicConstants {
    pub epsilon_c: f64,
    pub c1: f64,
    pub c2: f64,
    pub shortest_vector: f64,
    pub lambda: f64,
    pub forward_norm: f64,
    pub backward_norm: f64,
    pub largest_factor: f64,
    pub longest_basis_vector: f64,
}

/// `ε_c = shortest / (2 max(‖A‖', ‖A⁻¹‖'))`, `c₂ = 1 + log‖A‖' / log(1/λ)`,
/// and `c₁ = lower / (a_max · max‖u_i‖₂)`.
///
/// For `ρ/n` off the bad set, some coordinate `⟨u_i, ρ/n − w⟩` is a nonzero
/// multiple of `1/(a_i n)` modulo 1, which gives `d(ρ/n, W) ≥ c₁ / n`.
pub fn hyperbolic_constants(system: &HyperbolicSystem, h: &SubgroupBasis) -> Result<HyperbolicConstants> {
    if !h.is_full_rank() {
        return Err(Error::RankDeficient { rank: h.rank, dim: h.dim });
    }
    let norm = &system.norm;
    let (_, shortest) = norm.shortest_vector();
    let epsilon_c = shortest / (2.0 * norm.forward_norm.max(norm.backward_norm));
    let c2 = 1.0 + norm.forward_norm.ln() / (1.0 / norm.lambda).ln();
    let largest_factor = h.factors.iter().map(big_to_f64).fold(1.0, f64::max);
    let longest_basis_vector = h
        .basis_vectors()
        .iter()
        .map(|u| u.iter().map(|c| big_to_f64(c).powi(2)).sum::<f64>().sqrt())
        .fold(1.0, f64::max);
    let c1 = (norm.lower / (largest_factor * longest_basis_vector)).min(1.0 - 1e-12);
    Ok(HyperbolicConstants {
        epsilon_c,
        c1,
        c2,
        shortest_vector: shortest,
        lambda: norm.lambda,
        forward_norm: norm.forward_norm,
        backward_norm: norm.backward_norm,
        largest_factor,
        longest_basis_vector,
    })
}

/// Closeness horizons of a pair of orbits.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpansivenessReport {
    /// Largest `K₊ ≤ cap` with `d(A^l x, A^l y) < ε` for all `0 ≤ l ≤ K₊`;
    /// `None` when already `d(x, y) ≥ ε`.
    pub forward_horizon: Option<usize>,
    /// Same for `A⁻¹`.
    pub backward_horizon: Option<usize>,
    pub representative: Vec<f64>,
    pub stable_part: Vec<f64>,
    pub unstable_part: Vec<f64>,
    pub stable_norm: f64,
    pub unstable_norm: f64,
    /// `‖v_u‖' < λ^{K₊} ε`.
    pub forward_bound_holds: bool,
    /// `‖v_s‖' < λ^{K₋} ε`.
    pub backward_bound_holds: bool,
}

fn horizon(mut v: Vec<f64>, map: &DMatrix<f64>, norm: &AdaptedNorm, epsilon: f64, cap: usize) -> Option<usize> {
    if norm.norm(&v) >= epsilon {
        return None;
    }
    for l in 1..=cap {
        v = (map * DVector::from_column_slice(&v)).iter().copied().collect();
        // within ε the iterated lift stays the representative
        let (rep, dist) = norm.representative(&v);
        if dist >= epsilon {
            return Some(l - 1);
        }
        v = rep;
    }
    Some(cap)
}

pub fn expansiveness_report(x: &[f64], y: &[f64], system: &HyperbolicSystem, epsilon: f64, cap: usize) -> ExpansivenessReport {
    let norm = &system.norm;
    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let (v, _) = norm.representative(&diff);
    let forward_horizon = horizon(v.clone(), &system.forward, norm, epsilon, cap);
    let backward_horizon = horizon(v.clone(), &system.backward, norm, epsilon, cap);
    let stable_part = norm.project_stable(&v);
    let unstable_part = norm.project_unstable(&v);
    let stable_norm = norm.stable_norm(&v);
    let unstable_norm = norm.unstable_norm(&v);
    let check = |h: Option<usize>, part: f64| match h {
        None => true,
        Some(k) => part == 0.0 || part < norm.lambda.powi(k as i32) * epsilon * (1.0 + TAU_LIN),
    };
    ExpansivenessReport {
        forward_bound_holds: check(forward_horizon, unstable_norm),
        backward_bound_holds: check(backward_horizon, stable_norm),
        forward_horizon,
        backward_horizon,
        representative: v,
        stable_part,
        unstable_part,
        stable_norm,
        unstable_norm,
    }
}

/// `[x, y] = x + P_s v`, the point on the stable leaf of `x` and the unstable
/// leaf of `y`, where `v` is the short representative of `y − x`.
pub fn local_product(x: &[f64], y: &[f64], norm: &AdaptedNorm, epsilon: f64) -> Result<Vec<f64>> {
    let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
    let (v, distance) = norm.representative(&diff);
    if distance >= epsilon {
        return Err(Error::TooFar { distance, epsilon });
    }
    let vs = norm.project_stable(&v);
    Ok(wrap(&x.iter().zip(&vs).map(|(a, b)| a + b).collect::<Vec<_>>()))
}

#[derive(Clone, Debug)]
pub struct Shadow {
    /// The shadowing point `y_0`.
    pub point: Vec<f64>,
    /// The true orbit `y_k = A^k y_0`, reconstructed without forward iteration.
    pub orbit: Vec<Vec<f64>>,
    /// `α / (1 − λ)`.
    pub beta: f64,
    /// `max_k d(x_k, y_k)`.
    pub max_deviation: f64,
    /// `max_k d(A y_k, y_{k+1})`, which is zero up to rounding.
    pub max_step_residual: f64,
}

/// Shadows a finite `α`-pseudo-orbit by a true orbit.
///
/// With jumps `e_k = x_{k+1} − A x_k`, the correction `δ_k` solves
/// `δ_{k+1} = A δ_k + e_k`: its stable part is summed forward from `δ_0^s = 0`
/// and its unstable part backward from `δ_{N−1}^u = 0`, so both are geometric
/// sums bounded by `α / (1 − λ)`. The shadow is `y_k = x_k − δ_k`.
pub fn shadow_orbit(pseudo_orbit: &[Vec<f64>], system: &HyperbolicSystem, alpha: f64) -> Result<Shadow> {
    let norm = &system.norm;
    let (_, shortest) = norm.shortest_vector();
    let limit = shortest / 2.0;
    if alpha * (1.0 + norm.forward_norm) / (1.0 - norm.lambda) >= limit {
        return Err(Error::AlphaTooLarge { alpha, limit });
    }
    let len = pseudo_orbit.len();
    let beta = alpha / (1.0 - norm.lambda);
    if len == 0 {
        return Err(Error::Domain("empty pseudo-orbit".into()));
    }
    let split = &norm.splitting;
    let mut jumps_s = Vec::with_capacity(len);
    let mut jumps_u = Vec::with_capacity(len);
    for k in 0..len.saturating_sub(1) {
        let ax = system.apply(&pseudo_orbit[k]);
        let diff: Vec<f64> = pseudo_orbit[k + 1].iter().zip(&ax).map(|(a, b)| a - b).collect();
        let (e, dev) = norm.representative(&diff);
        if dev >= alpha {
            return Err(Error::NotPseudoOrbit { index: k, deviation: dev, alpha });
        }
        let e = DVector::from_column_slice(&e);
        jumps_s.push(split.stable_coords(&e));
        jumps_u.push(split.unstable_coords(&e));
    }
    let (ds, du) = split.dims();
    let t = split.unstable_map.clone().try_inverse().expect("checked when building the norm");
    let mut delta_s = vec![DVector::zeros(ds); len];
    for k in 0..len - 1 {
        delta_s[k + 1] = &split.stable_map * &delta_s[k] + &jumps_s[k];
    }
    let mut delta_u = vec![DVector::zeros(du); len];
    for k in (0..len - 1).rev() {
        delta_u[k] = &t * (&delta_u[k + 1] - &jumps_u[k]);
    }
    let mut orbit = Vec::with_capacity(len);
    let mut max_deviation: f64 = 0.0;
    for k in 0..len {
        let delta = &split.stable_basis * &delta_s[k] + &split.unstable_basis * &delta_u[k];
        max_deviation = max_deviation.max(norm.stable_coord_norm(&delta_s[k]).max(norm.unstable_coord_norm(&delta_u[k])));
        let y: Vec<f64> = pseudo_orbit[k].iter().zip(delta.iter()).map(|(a, b)| a - b).collect();
        orbit.push(wrap(&y));
    }
    let max_step_residual = orbit
        .windows(2)
        .map(|w| norm.torus_distance(&system.apply(&w[0]), &w[1]))
        .fold(0.0, f64::max);
    Ok(Shadow { point: orbit[0].clone(), orbit, beta, max_deviation, max_step_residual })
}

/// Integer matrix entries as machine integers, for reports.
pub fn matrix_rows_i64(a: &IntMatrix) -> Vec<Vec<i64>> {
    (0..a.rows()).map(|i| a.row(i).iter().map(|x: &BigInt| x.to_i64().unwrap_or(i64::MAX)).collect()).collect()
}
