//! Mixing times and scans over the modulus.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{convergence_check, invariant_subgroup, IntMatrix};
use crate::measure::IncrementMeasure;
use crate::parallel::map_range;
use crate::walk::{empirical_distribution, simulate_walk, tv_to_uniform, Evolution, WalkConfig, DEFAULT_STATE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NFilter {
    All,
    CoprimeToFactors,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScanMethod {
    Exact,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanSpec {
    pub n_min: u64,
    pub n_max: u64,
    pub n_filter: NFilter,
    pub target_tv: f64,
    pub method: ScanMethod,
    /// Defaults to `⌈64 log₂ n⌉` per modulus.
    pub t_max: Option<usize>,
    /// Monte Carlo replicates per evaluated `t`.
    pub replicates: usize,
    /// Explicit moduli; when present they replace the range `n_min..=n_max`.
    pub n_values: Option<Vec<u64>>,
    pub state_cap: u128,
}

impl Default for ScanSpec {
    fn default() -> Self {
        ScanSpec {
            n_min: 2,
            n_max: 64,
            n_filter: NFilter::All,
            target_tv: 0.25,
            method: ScanMethod::Exact,
            t_max: None,
            replicates: 100_000,
            n_values: None,
            state_cap: DEFAULT_STATE_CAP,
        }
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_min < 2 || self.n_max < self.n_min {
            return Err(Error::Domain(format!("need 2 ≤ n_min ≤ n_max, got {}..{}", self.n_min, self.n_max)));
        }
        if !(self.target_tv > 0.0 && self.target_tv < 1.0) {
            return Err(Error::Domain(format!("target TV must lie in (0, 1), got {}", self.target_tv)));
        }
        if let Some(ns) = &self.n_values {
            if ns.iter().any(|&n| n < 2) {
                return Err(Error::Domain("every modulus must be at least 2".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanStatus {
    Ok,
    /// `convergence_check` fails for this `n`.
    NonConvergent,
    /// TV stayed above the target up to `t_max`.
    CapReached,
    /// The exact state space was too large, so Monte Carlo was used.
    McFallback,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: u64,
    pub t_mix: Option<usize>,
    pub t_mix_over_log_n: Option<f64>,
    pub status: ScanStatus,
}

pub fn default_t_max(n: u64) -> usize {
    (64.0 * (n as f64).log2()).ceil() as usize
}

/// Smallest `t ≤ t_max` with exact TV at most `target`, by stepping the
/// distribution forward until the first passage.
pub fn mixing_time_exact(a: &IntMatrix, mu: &IncrementMeasure, n: u64, target: f64, t_max: usize, cap: u128) -> Result<Option<usize>> {
    let mut evo = Evolution::with_cap(a, mu, n, cap)?;
    loop {
        if evo.tv_to_uniform() <= target {
            return Ok(Some(evo.time()));
        }
        if evo.time() >= t_max {
            return Ok(None);
        }
        evo.step();
    }
}

/// Monte Carlo TV to uniform at time `t`.
pub fn tv_monte_carlo(a: &IntMatrix, mu: &IncrementMeasure, n: u64, t: usize, replicates: usize, seed: u64) -> Result<f64> {
    let config = WalkConfig { a: a.clone(), mu: mu.clone(), n, t, seed, replicates };
    let states = simulate_walk(&config)?;
    Ok(tv_to_uniform(&empirical_distribution(&states, n, a.dim())?))
}

/// Bisection over `t` on Monte Carlo estimates, relying on TV being
/// non-increasing in `t`.
pub fn mixing_time_mc(
    a: &IntMatrix,
    mu: &IncrementMeasure,
    n: u64,
    target: f64,
    t_max: usize,
    replicates: usize,
    seed: u64,
) -> Result<Option<usize>> {
    if tv_monte_carlo(a, mu, n, t_max, replicates, seed)? > target {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0usize, t_max);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if tv_monte_carlo(a, mu, n, mid, replicates, seed)? <= target {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(Some(lo))
}

fn eligible(n: u64, filter: NFilter, factors: &[num_bigint::BigInt]) -> bool {
    use num_integer::Integer;
    use num_traits::One;
    match filter {
        NFilter::All => true,
        NFilter::Odd => n % 2 == 1,
        NFilter::CoprimeToFactors => factors.iter().all(|f| f.gcd(&num_bigint::BigInt::from(n)).is_one()),
    }
}

/// One row per eligible `n`, sorted by `n`.
pub fn scan(a: &IntMatrix, mu: &IncrementMeasure, spec: &ScanSpec, seed: u64) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    let h = invariant_subgroup(a, mu)?;
    let mut ns: Vec<u64> = match &spec.n_values {
        Some(v) => v.clone(),
        None => (spec.n_min..=spec.n_max).collect(),
    };
    ns.sort_unstable();
    ns.dedup();
    ns.retain(|&n| eligible(n, spec.n_filter, &h.factors));
    let rows = map_range(ns.len(), |i| -> Result<ScanRow> {
        let n = ns[i];
        let row = |t_mix: Option<usize>, status| ScanRow {
            n,
            t_mix,
            t_mix_over_log_n: t_mix.map(|t| t as f64 / (n as f64).ln()),
            status: if t_mix.is_none() && status == ScanStatus::Ok { ScanStatus::CapReached } else { status },
        };
        if !convergence_check(&h, n).0 {
            return Ok(row(None, ScanStatus::NonConvergent));
        }
        let t_max = spec.t_max.unwrap_or_else(|| default_t_max(n));
        let mc = |status| -> Result<ScanRow> {
            let t = mixing_time_mc(a, mu, n, spec.target_tv, t_max, spec.replicates, seed)?;
            Ok(row(t, if t.is_none() { ScanStatus::CapReached } else { status }))
        };
        match spec.method {
            ScanMethod::Mc => mc(ScanStatus::Ok),
            ScanMethod::Exact => match mixing_time_exact(a, mu, n, spec.target_tv, t_max, spec.state_cap) {
                Ok(t) => Ok(row(t, ScanStatus::Ok)),
                Err(Error::BudgetExceeded { .. }) => mc(ScanStatus::McFallback),
                Err(e) => Err(e),
            },
        }
    });
    rows.into_iter().collect()
}

/// Least-squares fit `t_mix ≈ slope · log n + intercept` over the rows with
/// a mixing time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogFit {
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

pub fn fit_log_n(rows: &[ScanRow]) -> Option<LogFit> {
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.t_mix.map(|t| ((r.n as f64).ln(), t as f64))).collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    let ratios = pts.iter().map(|p| p.1 / p.0);
    let ratio_min = ratios.clone().fold(f64::INFINITY, f64::min);
    let ratio_max = ratios.fold(0.0, f64::max);
    Some(LogFit { points: pts.len(), slope, intercept, r_squared, ratio_min, ratio_max })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fib() -> IntMatrix {
        IntMatrix::from_slice(2, 2, &[1, 1, 1, 0])
    }

    fn three_point() -> IncrementMeasure {
        IncrementMeasure::uniform(vec![vec![0, 0], vec![1, 0], vec![-1, 0]]).unwrap()
    }

    #[test]
    fn first_passage_matches_a_direct_sweep() {
        let (a, mu) = (fib(), three_point());
        for n in [5u64, 8, 13] {
            let t = mixing_time_exact(&a, &mu, n, 0.25, 200, DEFAULT_STATE_CAP).unwrap().unwrap();
            let mut evo = Evolution::new(&a, &mu, n).unwrap();
            let mut sweep = None;
            for s in 0..=200 {
                evo.advance_to(s);
                if evo.tv_to_uniform() <= 0.25 {
                    sweep = Some(s);
                    break;
                }
            }
            assert_eq!(Some(t), sweep);
        }
    }

    #[test]
    fn monte_carlo_bisection_lands_near_the_exact_time() {
        let (a, mu) = (fib(), three_point());
        let exact = mixing_time_exact(&a, &mu, 7, 0.25, 100, DEFAULT_STATE_CAP).unwrap().unwrap();
        let mc = mixing_time_mc(&a, &mu, 7, 0.25, 100, 200_000, 3).unwrap().unwrap();
        assert!(mc.abs_diff(exact) <= 1, "exact {exact}, mc {mc}");
    }

    #[test]
    fn non_convergent_moduli_are_flagged() {
        // H = 2Z × Z, so even n never mix
        let mu = IncrementMeasure::uniform(vec![vec![0, 0], vec![2, 0], vec![0, 1]]).unwrap();
        let a = IntMatrix::identity(2);
        let spec = ScanSpec { n_min: 3, n_max: 6, ..ScanSpec::default() };
        let rows = scan(&a, &mu, &spec, 0).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![3, 4, 5, 6]);
        assert_eq!(rows[1].status, ScanStatus::NonConvergent);
        assert_eq!(rows[3].status, ScanStatus::NonConvergent);
        let coprime = ScanSpec { n_filter: NFilter::CoprimeToFactors, ..spec };
        assert_eq!(scan(&a, &mu, &coprime, 0).unwrap().iter().map(|r| r.n).collect::<Vec<_>>(), vec![3, 5]);
    }

    #[test]
    fn tiny_cap_reports_the_failure() {
        let spec = ScanSpec { n_min: 11, n_max: 11, t_max: Some(2), ..ScanSpec::default() };
        let rows = scan(&fib(), &three_point(), &spec, 0).unwrap();
        assert_eq!(rows[0].status, ScanStatus::CapReached);
        assert_eq!(rows[0].t_mix, None);
    }

    #[test]
    fn looser_target_never_takes_longer() {
        let (a, mu) = (fib(), three_point());
        for n in [9u64, 16, 23] {
            let strict = mixing_time_exact(&a, &mu, n, 0.1, 500, DEFAULT_STATE_CAP).unwrap().unwrap();
            let loose = mixing_time_exact(&a, &mu, n, 0.2, 500, DEFAULT_STATE_CAP).unwrap().unwrap();
            assert!(loose <= strict);
        }
    }

    #[test]
    fn log_fit_recovers_a_line() {
        let rows: Vec<ScanRow> = [10u64, 100, 1000]
            .iter()
            .map(|&n| {
                let t = (3.0 * (n as f64).ln()).round() as usize + 2;
                ScanRow { n, t_mix: Some(t), t_mix_over_log_n: None, status: ScanStatus::Ok }
            })
            .collect();
        let fit = fit_log_n(&rows).unwrap();
        assert!((fit.slope - 3.0).abs() < 0.2);
        assert!(fit.r_squared > 0.99);
    }
}
