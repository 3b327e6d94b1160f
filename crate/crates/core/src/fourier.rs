//! Characters of `(Z/nZ)^d` and of the continuous torus.
//!
//! The law of `X_t` has Fourier transform `Π_{j<t} μ̂((Aᵀ)^j ρ)`, so the
//! squared ℓ² sum over nonzero `ρ` reduces to windowed products along the
//! cycles of `Aᵀ` acting on `(Z/nZ)^d`.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hyperbolic::AdaptedNorm;
use crate::lattice::{IntMatrix, SubgroupBasis};
use crate::measure::IncrementMeasure;
use crate::numeric::NeumaierSum;
use crate::parallel::map_range;
use crate::walk::{ModMatrix, Torus, DEFAULT_STATE_CAP};

const TAU: f64 = std::f64::consts::TAU;
/// `|μ̂|` below this counts as an exact zero.
pub const ZERO_CHARACTER: f64 = 1e-300;
/// Largest bad set that will be enumerated.
pub const MAX_BAD_SET: usize = 1 << 20;

/// `Σ_x μ(x) e^{2πi⟨x,ρ⟩/n}`.
pub fn mu_hat(mu: &IncrementMeasure, rho: &[u64], n: u64) -> Complex64 {
    let n_i = n as i128;
    let mut re = NeumaierSum::default();
    let mut im = NeumaierSum::default();
    for (x, &p) in mu.support().iter().zip(mu.probabilities()) {
        let k = x.iter().zip(rho).map(|(&a, &b)| a as i128 * b as i128).sum::<i128>().rem_euclid(n_i);
        let angle = TAU * k as f64 / n as f64;
        re.add(p * angle.cos());
        im.add(p * angle.sin());
    }
    Complex64::new(re.value(), im.value())
}

/// `Π_{j<t} μ̂((Aᵀ)^j ρ)`.
pub fn walk_character(mu: &IncrementMeasure, a: &IntMatrix, rho: &[u64], n: u64, t: usize) -> Complex64 {
    let at = ModMatrix::new(&a.transpose(), n);
    let mut r = rho.to_vec();
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..t {
        acc *= mu_hat(mu, &r, n);
        r = at.apply(&r);
    }
    acc
}

/// `B = Σ_{ρ≠0} |P̂^t(ρ)|²` and the total variation bound `½√B`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct L2Bound {
    pub sum: f64,
    pub tv_bound: f64,
}

/// Cycles of `Aᵀ` on `(Z/nZ)^d \ {0}` with `|μ̂|²` along each one.
#[derive(Clone, Debug)]
pub struct CharacterCycles {
    cycles: Vec<Cycle>,
}

#[derive(Clone, Debug)]
struct Cycle {
    len: usize,
    zeros_total: usize,
    log_total: f64,
    /// Prefix counts and log sums over the cycle written out twice.
    zero_prefix: Vec<u32>,
    log_prefix: Vec<f64>,
}

impl Cycle {
    fn new(values: &[f64]) -> Self {
        let len = values.len();
        let mut zero_prefix = Vec::with_capacity(2 * len + 1);
        let mut log_prefix = Vec::with_capacity(2 * len + 1);
        zero_prefix.push(0);
        log_prefix.push(0.0);
        let mut zeros = 0u32;
        let mut acc = NeumaierSum::default();
        for k in 0..2 * len {
            let v = values[k % len];
            if v == 0.0 {
                zeros += 1;
            } else {
                acc.add(v.ln());
            }
            zero_prefix.push(zeros);
            log_prefix.push(acc.value());
        }
        Cycle {
            len,
            zeros_total: zero_prefix[len] as usize,
            log_total: log_prefix[len],
            zero_prefix,
            log_prefix,
        }
    }

    /// `Σ_i Π_{j<t} v_{(i+j) mod len}` over all starting points.
    fn window_sum(&self, t: usize) -> f64 {
        let (q, rem) = (t / self.len, t % self.len);
        if q > 0 && self.zeros_total > 0 {
            return 0.0;
        }
        let full = q as f64 * self.log_total;
        let mut acc = NeumaierSum::default();
        for i in 0..self.len {
            if self.zero_prefix[i + rem] != self.zero_prefix[i] {
                continue;
            }
            acc.add((full + self.log_prefix[i + rem] - self.log_prefix[i]).exp());
        }
        acc.value()
    }
}

impl CharacterCycles {
    pub fn new(mu: &IncrementMeasure, a: &IntMatrix, n: u64) -> Result<Self> {
        CharacterCycles::with_cap(mu, a, n, DEFAULT_STATE_CAP)
    }

    pub fn with_cap(mu: &IncrementMeasure, a: &IntMatrix, n: u64, cap: u128) -> Result<Self> {
        let torus = Torus::new(n, a.dim());
        let size = torus.size_within(cap)?;
        let at = ModMatrix::new(&a.transpose(), n);
        let mut seen = vec![false; size];
        seen[0] = true;
        let mut orbits: Vec<Vec<Vec<u64>>> = Vec::new();
        for start in 1..size {
            if seen[start] {
                continue;
            }
            let mut orbit = Vec::new();
            let mut rho = torus.decode(start);
            let mut idx = start;
            while !seen[idx] {
                seen[idx] = true;
                let next = at.apply(&rho);
                orbit.push(std::mem::replace(&mut rho, next));
                idx = torus.encode(&rho);
            }
            orbits.push(orbit);
        }
        let cycles = map_range(orbits.len(), |c| {
            let values: Vec<f64> = orbits[c]
                .iter()
                .map(|rho| {
                    let z = mu_hat(mu, rho, n).norm();
                    if z < ZERO_CHARACTER {
                        0.0
                    } else {
                        z * z
                    }
                })
                .collect();
            Cycle::new(&values)
        });
        Ok(CharacterCycles { cycles })
    }

    pub fn cycle_count(&self) -> usize {
        self.cycles.len()
    }

    pub fn bound(&self, t: usize) -> L2Bound {
        let parts = map_range(self.cycles.len(), |c| self.cycles[c].window_sum(t));
        let mut acc = NeumaierSum::default();
        for p in parts {
            acc.add(p);
        }
        let sum = acc.value();
        L2Bound { sum, tv_bound: 0.5 * sum.sqrt() }
    }
}

pub fn l2_bound(mu: &IncrementMeasure, a: &IntMatrix, n: u64, t: usize) -> Result<L2Bound> {
    Ok(CharacterCycles::new(mu, a, n)?.bound(t))
}

/// Continuous-torus characters `f_k(ξ) = |Σ_x μ(x) e^{2πi⟨A^k x, ξ⟩}|²` for
/// `k < d`, and their minimum `f`.
#[derive(Clone, Debug)]
pub struct CharacterSquares {
    /// `A^k x` for each `k` and support point.
    images: Vec<Vec<Vec<f64>>>,
    weights: Vec<f64>,
    /// Lipschitz constants `2π Σ_{x,y} μ(x)μ(y)‖A^k(x − y)‖₂`.
    pub lipschitz: Vec<f64>,
}

impl CharacterSquares {
    pub fn new(mu: &IncrementMeasure, a: &IntMatrix) -> Self {
        let d = a.dim();
        let af = a.to_f64();
        let weights = mu.probabilities().to_vec();
        let mut power = DMatrix::<f64>::identity(d, d);
        let mut images = Vec::with_capacity(d);
        let mut lipschitz = Vec::with_capacity(d);
        for _ in 0..d {
            let img: Vec<Vec<f64>> = mu
                .support()
                .iter()
                .map(|x| {
                    let v = nalgebra::DVector::from_iterator(d, x.iter().map(|&c| c as f64));
                    (&power * v).iter().copied().collect()
                })
                .collect();
            let mut l = 0.0;
            for (i, xi) in img.iter().enumerate() {
                for (j, xj) in img.iter().enumerate() {
                    let dist = xi.iter().zip(xj).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
                    l += weights[i] * weights[j] * dist;
                }
            }
            lipschitz.push(TAU * l);
            images.push(img);
            power = &af * power;
        }
        CharacterSquares { images, weights, lipschitz }
    }

    pub fn f_k(&self, k: usize, xi: &[f64]) -> f64 {
        let mut re = 0.0;
        let mut im = 0.0;
        for (x, &w) in self.images[k].iter().zip(&self.weights) {
            let phase = TAU * x.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>();
            re += w * phase.cos();
            im += w * phase.sin();
        }
        (re * re + im * im).min(1.0)
    }

    pub fn f_min(&self, xi: &[f64]) -> f64 {
        (0..self.images.len()).map(|k| self.f_k(k, xi)).fold(f64::INFINITY, f64::min)
    }

    pub fn max_lipschitz(&self) -> f64 {
        self.lipschitz.iter().copied().fold(0.0, f64::max)
    }
}

pub fn f_min(xi: &[f64], mu: &IncrementMeasure, a: &IntMatrix) -> f64 {
    CharacterSquares::new(mu, a).f_min(xi)
}

/// The points of the torus where every character of `H` is trivial.
#[derive(Clone, Debug, PartialEq)]
pub struct BadSetW {
    /// Exact coordinates in `[0, 1)`.
    pub points: Vec<Vec<BigRational>>,
    pub factors: Vec<BigInt>,
}

fn frac(x: BigRational) -> BigRational {
    let f = x.floor();
    x - f
}

/// `W = Q^{-T}(k_1/a_1, …, k_d/a_d) mod 1`, where the columns of `Q` are the
/// adapted basis `u_i`.
pub fn bad_set_w(h: &SubgroupBasis) -> Result<BadSetW> {
    if !h.is_full_rank() {
        return Err(Error::RankDeficient { rank: h.rank, dim: h.dim });
    }
    let sizes: Vec<usize> = h
        .factors
        .iter()
        .map(|a| a.to_usize().filter(|&s| s <= MAX_BAD_SET))
        .collect::<Option<Vec<_>>>()
        .ok_or(Error::BudgetExceeded { states: u128::MAX, cap: MAX_BAD_SET as u128 })?;
    let total: u128 = sizes.iter().map(|&s| s as u128).product();
    if total > MAX_BAD_SET as u128 {
        return Err(Error::BudgetExceeded { states: total, cap: MAX_BAD_SET as u128 });
    }
    let q_inv_t = h.coordinates.transpose();
    let d = h.dim;
    let mut points = Vec::with_capacity(total as usize);
    let mut k = vec![0usize; d];
    'outer: loop {
        let y: Vec<BigRational> =
            k.iter().zip(&h.factors).map(|(&ki, a)| BigRational::new(BigInt::from(ki), a.clone())).collect();
        let p: Vec<BigRational> = (0..d)
            .map(|i| {
                let s = (0..d).fold(BigRational::zero(), |acc, j| {
                    acc + BigRational::from_integer(q_inv_t.get(i, j).clone()) * &y[j]
                });
                frac(s)
            })
            .collect();
        points.push(p);
        for (i, ki) in k.iter_mut().enumerate() {
            *ki += 1;
            if *ki < sizes[i] {
                continue 'outer;
            }
            *ki = 0;
        }
        break;
    }
    points.sort();
    Ok(BadSetW { points, factors: h.factors.clone() })
}

impl BadSetW {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points_f64(&self) -> Vec<Vec<f64>> {
        self.points.iter().map(|p| p.iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()).collect()
    }

    /// Exact check that `Aᵀ W = W` modulo 1.
    pub fn is_invariant(&self, a: &IntMatrix) -> bool {
        let at = a.transpose();
        let d = at.dim();
        let mut image: Vec<Vec<BigRational>> = self
            .points
            .iter()
            .map(|p| {
                (0..d)
                    .map(|i| {
                        frac((0..d).fold(BigRational::zero(), |acc, j| {
                            acc + BigRational::from_integer(at.get(i, j).clone()) * &p[j]
                        }))
                    })
                    .collect()
            })
            .collect();
        image.sort();
        image == self.points
    }

    /// Smallest torus distance between two distinct points of `W`.
    pub fn min_separation(&self, norm: &AdaptedNorm) -> f64 {
        let pts = self.points_f64();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min(norm.torus_distance(&pts[i], &pts[j]));
            }
        }
        best
    }

    pub fn distance_to(&self, xi: &[f64], norm: &AdaptedNorm) -> f64 {
        self.points_f64().iter().map(|w| norm.torus_distance(xi, w)).fold(f64::INFINITY, f64::min)
    }

    /// Whether `ρ/n` is a point of `W`.
    pub fn contains_rational(&self, rho: &[u64], n: u64) -> bool {
        let p: Vec<BigRational> = rho
            .iter()
            .map(|&r| frac(BigRational::new(BigInt::from(r), BigInt::from(n))))
            .collect();
        self.points.binary_search(&p).is_ok()
    }

    pub fn lcm_of_factors(&self) -> BigInt {
        self.factors.iter().fold(BigInt::one(), |acc, a| acc.lcm(a))
    }
}

/// Certified bound `sup { f(ξ) : d(ξ, W) ≥ η } ≤ γ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaCertificate {
    pub eta: f64,
    pub gamma: f64,
    /// Side of the grid cells.
    pub grid_step: f64,
    /// Lipschitz constant of `f` in the Euclidean norm.
    pub lipschitz_bound: f64,
    /// Largest value of `f` seen on the grid.
    pub grid_max: f64,
    /// `lipschitz_bound · grid_step · √d / 2`, added to `grid_max`.
    pub slack: f64,
    pub grid_points: usize,
}

/// Grid search for `γ`.
///
/// Every `ξ` lies within `h√d/2` of a cell center `g`, so
/// `f(ξ) ≤ f(g) + L h√d/2`. Centers are kept whenever
/// `d(g, W) ≥ η − upper · h√d/2`, which covers every cell meeting the region.
pub fn certified_gamma(
    mu: &IncrementMeasure,
    a: &IntMatrix,
    w: &BadSetW,
    eta: f64,
    norm: &AdaptedNorm,
    grid_step: Option<f64>,
) -> Result<GammaCertificate> {
    let d = a.dim();
    let chars = CharacterSquares::new(mu, a);
    let lipschitz = chars.max_lipschitz();
    if eta.is_nan() || eta <= 0.0 {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    let requested = grid_step.unwrap_or(eta / (8.0 * lipschitz.max(1e-12)));
    let per_axis = (1.0 / requested).ceil().max(1.0) as usize;
    let cells = (per_axis as u128).pow(d as u32);
    if cells > DEFAULT_STATE_CAP {
        return Err(Error::BudgetExceeded { states: cells, cap: DEFAULT_STATE_CAP });
    }
    let h = 1.0 / per_axis as f64;
    let half_diag = h * (d as f64).sqrt() / 2.0;
    let keep = eta - norm.upper * half_diag;
    let bad = w.points_f64();
    let slabs = map_range(per_axis, |i0| {
        let mut best = 0.0f64;
        let mut count = 0usize;
        let mut idx = vec![0usize; d];
        idx[0] = i0;
        let inner = per_axis.pow(d as u32 - 1);
        let mut g = vec![0.0; d];
        for r in 0..inner {
            let mut rem = r;
            for slot in idx.iter_mut().skip(1) {
                *slot = rem % per_axis;
                rem /= per_axis;
            }
            for (gc, &ic) in g.iter_mut().zip(&idx) {
                *gc = (ic as f64 + 0.5) * h;
            }
            if bad.iter().any(|p| norm.torus_distance(&g, p) < keep) {
                continue;
            }
            count += 1;
            best = best.max(chars.f_min(&g));
        }
        (best, count)
    });
    let grid_max = slabs.iter().map(|s| s.0).fold(0.0, f64::max);
    let grid_points = slabs.iter().map(|s| s.1).sum();
    let slack = lipschitz * half_diag;
    let gamma = grid_max + slack;
    if gamma >= 1.0 {
        return Err(Error::NotContractive { gamma });
    }
    Ok(GammaCertificate { eta, gamma, grid_step: h, lipschitz_bound: lipschitz, grid_max, slack, grid_points })
}

/// `¼ (e^{m₀ m₁ k γ^r} − 1)`.
pub fn theoretical_bound(m0: usize, m1: usize, k: usize, gamma: f64, r: usize) -> f64 {
    0.25 * ((m0 * m1 * k) as f64 * gamma.powi(r as i32)).exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperbolic::HyperbolicSystem;
    use crate::lattice::invariant_subgroup;
    use crate::walk::exact_distribution;
    use proptest::prelude::*;

    fn fib() -> IntMatrix {
        IntMatrix::from_slice(2, 2, &[1, 1, 1, 0])
    }

    fn cat() -> IntMatrix {
        IntMatrix::from_slice(2, 2, &[2, 1, 1, 1])
    }

    fn three_point() -> IncrementMeasure {
        IncrementMeasure::uniform(vec![vec![0, 0], vec![1, 0], vec![-1, 0]]).unwrap()
    }

    /// Direct DFT of the exact law.
    fn dft(a: &IntMatrix, mu: &IncrementMeasure, n: u64, t: usize) -> Vec<Complex64> {
        let p = exact_distribution(a, mu, n, t).unwrap();
        let torus = p.torus();
        (0..p.probs.len())
            .map(|r| {
                let rho = torus.decode(r);
                p.probs
                    .iter()
                    .enumerate()
                    .map(|(x, &px)| {
                        let xs = torus.decode(x);
                        let k: u64 = xs.iter().zip(&rho).map(|(a, b)| a * b).sum::<u64>() % n;
                        Complex64::from_polar(px, TAU * k as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn mu_hat_examples() {
        let mu = three_point();
        assert!((mu_hat(&mu, &[0, 0], 4) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((mu_hat(&mu, &[2, 0], 4) - Complex64::new(-1.0 / 3.0, 0.0)).norm() < 1e-15);
        let dirac = IncrementMeasure::dirac(vec![0, 0]);
        assert!((mu_hat(&dirac, &[3, 1], 7) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn walk_character_trivial_horizons() {
        let mu = three_point();
        assert_eq!(walk_character(&mu, &fib(), &[2, 3], 5, 0), Complex64::new(1.0, 0.0));
        assert_eq!(walk_character(&mu, &fib(), &[2, 3], 5, 1), mu_hat(&mu, &[2, 3], 5));
    }

    #[test]
    fn character_product_is_the_dft() {
        let mu = three_point();
        for t in 0..=10 {
            let f = dft(&fib(), &mu, 5, t);
            let torus = Torus::new(5, 2);
            for (r, fr) in f.iter().enumerate() {
                let c = walk_character(&mu, &fib(), &torus.decode(r), 5, t);
                assert!((c - fr).norm() < 1e-10, "t={t} rho={r}");
            }
        }
    }

    fn naive_l2(mu: &IncrementMeasure, a: &IntMatrix, n: u64, t: usize) -> f64 {
        let torus = Torus::new(n, a.dim());
        (1..torus.states() as usize).map(|r| walk_character(mu, a, &torus.decode(r), n, t).norm_sqr()).sum()
    }

    #[test]
    fn l2_at_time_zero_counts_characters() {
        let b = l2_bound(&three_point(), &fib(), 6, 0).unwrap();
        assert!((b.sum - 35.0).abs() < 1e-9);
    }

    #[test]
    fn l2_matches_naive_sum() {
        let mu = IncrementMeasure::exact(
            vec![vec![0, 0], vec![1, 0], vec![0, 1]],
            ["1/2", "1/4", "1/4"].iter().map(|s| crate::measure::parse_rational(s).unwrap()).collect(),
        )
        .unwrap();
        for a in [fib(), cat()] {
            for m in [&three_point(), &mu] {
                for n in [2u64, 3, 6, 9, 12, 17] {
                    let cycles = CharacterCycles::new(m, &a, n).unwrap();
                    for t in [0usize, 1, 2, 5, 13, 40] {
                        let fast = cycles.bound(t).sum;
                        let slow = naive_l2(m, &a, n, t);
                        assert!((fast - slow).abs() <= 1e-9 * slow.max(1e-300), "n={n} t={t} {fast} {slow}");
                    }
                }
            }
        }
    }

    #[test]
    fn exact_zero_factors_are_handled() {
        // μ̂ vanishes where cos(2πk/n) = −1/2, so n divisible by 3 gives zeros.
        let mu = IncrementMeasure::uniform(vec![vec![0], vec![1], vec![2]]).unwrap();
        let a = IntMatrix::identity(1);
        let b = l2_bound(&mu, &a, 3, 1).unwrap();
        assert!(b.sum.abs() < 1e-20);
        assert!(mu_hat(&mu, &[1], 3).norm() < 1e-15);
    }

    #[test]
    fn f_min_examples() {
        let mu = three_point();
        let chars = CharacterSquares::new(&mu, &fib());
        assert!((chars.f_min(&[0.0, 0.0]) - 1.0).abs() < 1e-15);
        let at = ModMatrix::new(&fib().transpose(), 11);
        for rho in [[1u64, 0], [3, 7], [10, 10]] {
            let want = (0..2)
                .scan(rho.to_vec(), |r, _| {
                    let v = mu_hat(&mu, r, 11).norm_sqr();
                    *r = at.apply(r);
                    Some(v)
                })
                .fold(f64::INFINITY, f64::min);
            let xi = [rho[0] as f64 / 11.0, rho[1] as f64 / 11.0];
            assert!((chars.f_min(&xi) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn bad_set_examples() {
        let mu = three_point();
        let h = invariant_subgroup(&fib(), &mu).unwrap();
        let w = bad_set_w(&h).unwrap();
        assert_eq!(w.points, vec![vec![BigRational::zero(), BigRational::zero()]]);

        // H = 2Z × Z, generated with the identity basis
        let h = SubgroupBasis {
            dim: 2,
            basis: IntMatrix::identity(2),
            coordinates: IntMatrix::identity(2),
            factors: vec![BigInt::from(2), BigInt::from(1)],
            rank: 2,
        };
        let w = bad_set_w(&h).unwrap();
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(w.points, vec![vec![BigRational::zero(), BigRational::zero()], vec![half, BigRational::zero()]]);

        let mu = IncrementMeasure::uniform(vec![vec![0, 0], vec![2, 0], vec![0, 2]]).unwrap();
        let h = invariant_subgroup(&cat(), &mu).unwrap();
        let w = bad_set_w(&h).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.is_invariant(&cat()));
        assert!(w.contains_rational(&[3, 0], 6));
        assert!(!w.contains_rational(&[1, 0], 6));
    }

    #[test]
    fn gamma_is_certified_for_the_fibonacci_walk() {
        let mu = three_point();
        let a = fib();
        let sys = HyperbolicSystem::new(&a.transpose()).unwrap();
        let w = bad_set_w(&invariant_subgroup(&a, &mu).unwrap()).unwrap();
        let cert = certified_gamma(&mu, &a, &w, 0.1, &sys.norm, None).unwrap();
        assert!(cert.gamma < 1.0);
        assert!(cert.gamma > cert.grid_max);
        // regression constant
        assert!((cert.gamma - 0.9564).abs() < 2e-3, "{cert:?}");
    }

    #[test]
    fn degenerate_measure_is_not_contractive() {
        let mu = IncrementMeasure::dirac(vec![0, 0]);
        let sys = HyperbolicSystem::new(&fib()).unwrap();
        let w = BadSetW { points: vec![vec![BigRational::zero(); 2]], factors: vec![BigInt::one(); 2] };
        assert!(matches!(certified_gamma(&mu, &fib(), &w, 0.1, &sys.norm, None), Err(Error::NotContractive { .. })));
    }

    #[test]
    fn gamma_shrinks_as_eta_grows() {
        let mu = three_point();
        let sys = HyperbolicSystem::new(&fib()).unwrap();
        let w = bad_set_w(&invariant_subgroup(&fib(), &mu).unwrap()).unwrap();
        let mut prev = f64::INFINITY;
        for eta in [0.08, 0.1, 0.15, 0.2, 0.3] {
            let c = certified_gamma(&mu, &fib(), &w, eta, &sys.norm, Some(2e-3)).unwrap();
            assert!(c.gamma <= prev);
            prev = c.gamma;
        }
    }

    #[test]
    fn theoretical_bound_examples() {
        let v = theoretical_bound(1, 2, 10, 0.5, 20);
        assert!((v - 0.25 * (20.0 * 2f64.powi(-20)).exp_m1()).abs() < 1e-18);
        assert!((v - 4.77e-6).abs() < 1e-8);
        assert!(theoretical_bound(1, 2, 10, 0.5, 200) < 1e-50);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn plancherel(n in 2u64..10, t in 0usize..8) {
            let mu = three_point();
            let p = exact_distribution(&fib(), &mu, n, t).unwrap();
            let lhs = 1.0 + l2_bound(&mu, &fib(), n, t).unwrap().sum;
            let rhs = (n * n) as f64 * p.probs.iter().map(|x| x * x).sum::<f64>();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
        }

        #[test]
        fn squared_upper_bound_holds(n in 2u64..14, t in 0usize..25, which in 0usize..2) {
            let a = [fib(), cat()][which].clone();
            let mu = three_point();
            let tv = crate::walk::tv_to_uniform(&exact_distribution(&a, &mu, n, t).unwrap());
            prop_assert!(tv <= l2_bound(&mu, &a, n, t).unwrap().tv_bound + 1e-9);
        }

        #[test]
        fn character_majoration(n in 3u64..10, t in 0usize..6, which in 0usize..2) {
            // for each fixed k < d, and with f = min_k f_k over disjoint windows of length d
            let a = [fib(), cat()][which].clone();
            let mu = three_point();
            let chars = CharacterSquares::new(&mu, &a);
            let at = ModMatrix::new(&a.transpose(), n);
            let torus = Torus::new(n, 2);
            let point = |r: &[u64]| [r[0] as f64 / n as f64, r[1] as f64 / n as f64];
            for r in 1..torus.states() as usize {
                let rho = torus.decode(r);
                let lhs = walk_character(&mu, &a, &rho, n, t + 2).norm_sqr();
                let orbit: Vec<Vec<u64>> = std::iter::successors(Some(rho.clone()), |x| Some(at.apply(x))).take(t + 2).collect();
                for k in 0..2 {
                    let rhs: f64 = orbit[..t].iter().map(|x| chars.f_k(k, &point(x))).product();
                    prop_assert!(lhs <= rhs + 1e-12);
                }
                let windows: f64 = orbit.iter().step_by(2).take((t + 2) / 2).map(|x| chars.f_min(&point(x))).product();
                prop_assert!(lhs <= windows + 1e-12);
            }
        }

        #[test]
        fn f_stays_in_unit_interval(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let v = f_min(&[x, y], &three_point(), &fib());
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn interchange_inequality(g in 0.01f64..0.99, a in 0i32..20, da in 0i32..20, b in 0i32..20, db in 0i32..20) {
            let (a2, b2) = (a + da, b + db);
            let lhs = g.powi(a + b2) + g.powi(a2 + b);
            let rhs = g.powi(a + b) + g.powi(a2 + b2);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12));
        }

        #[test]
        fn theoretical_bound_monotone(r in 1usize..60, k in 1usize..40, g in 0.05f64..0.95) {
            prop_assert!(theoretical_bound(1, 2, k, g, r + 1) <= theoretical_bound(1, 2, k, g, r));
            prop_assert!(theoretical_bound(1, 2, k + 1, g, r) >= theoretical_bound(1, 2, k, g, r));
        }
    }
}
