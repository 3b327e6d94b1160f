//! The closed-form upper bound on the distance to uniform, assembled from
//! the invariant subgroup, the hyperbolic constants of `Aᵀ`, a Markov
//! partition classified against `W`, and the certified `γ`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{bad_set_w, certified_gamma, theoretical_bound, BadSetW, GammaCertificate};
use crate::hyperbolic::{HyperbolicConstants, HyperbolicSystem};
use crate::lattice::{convergence_check, invariant_subgroup, IntMatrix, SubgroupBasis};
use crate::measure::IncrementMeasure;
use crate::symbolic::{
    block_length, block_threshold, build_partition_for, check_block_properties, classify_rectangles, widest_cross_partition,
    BlockPropertyCheck, Classification, MarkovPartition,
};
use crate::walk::{Evolution, DEFAULT_STATE_CAP};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundOptions {
    /// Overrides the distance `η` from `R₁` to `W`; must not exceed the
    /// distance the partition achieves.
    pub eta: Option<f64>,
    pub grid_step: Option<f64>,
    /// How far out lattice points are tried as segment half-lengths.
    pub reach: f64,
    /// State budget for the exact TV cross-check.
    pub exact_cap: u128,
}

impl Default for BoundOptions {
    fn default() -> Self {
        BoundOptions { eta: None, grid_step: None, reach: 6.0, exact_cap: DEFAULT_STATE_CAP }
    }
}

/// Everything in the bound that does not depend on `n`.
#[derive(Clone, Debug)]
pub struct BoundSetup {
    pub a: IntMatrix,
    pub mu: IncrementMeasure,
    pub subgroup: SubgroupBasis,
    /// The dynamics of `Aᵀ`, which acts on the dual torus.
    pub system: HyperbolicSystem,
    pub constants: HyperbolicConstants,
    pub w: BadSetW,
    pub partition: MarkovPartition,
    pub classification: Classification,
    pub certificate: GammaCertificate,
    pub exact_cap: u128,
}

impl BoundSetup {
    pub fn new(a: &IntMatrix, mu: &IncrementMeasure, options: &BoundOptions) -> Result<Self> {
        let subgroup = invariant_subgroup(a, mu)?;
        if !subgroup.is_full_rank() {
            return Err(Error::RankDeficient { rank: subgroup.rank, dim: subgroup.dim });
        }
        if a.dim() != 2 {
            return Err(Error::DimensionUnsupported(a.dim()));
        }
        let system = HyperbolicSystem::new(&a.transpose())?;
        let constants = system.constants(&subgroup)?;
        let w = bad_set_w(&subgroup)?;
        let delta0 = constants.epsilon_c.min(w.min_separation(&system.norm) / (1.0 + system.norm.forward_norm));
        let partition = widest_cross_partition(&system, &w.points_f64(), delta0, options.reach)
            .or_else(|_| build_partition_for(&system, 0.99 * delta0))?;
        let classification = classify_rectangles(&partition, &w, &system)?;
        let achieved = classification.eta.unwrap_or(0.0);
        let eta = match options.eta {
            Some(e) if !(e > 0.0 && e <= achieved) => {
                return Err(Error::Domain(format!("eta must lie in (0, {achieved}], got {e}")));
            }
            Some(e) => e,
            None => achieved,
        };
        let certificate = certified_gamma(mu, a, &w, eta, &system.norm, options.grid_step)?;
        Ok(BoundSetup {
            a: a.clone(),
            mu: mu.clone(),
            subgroup,
            system,
            constants,
            w,
            partition,
            classification,
            certificate,
            exact_cap: options.exact_cap,
        })
    }

    pub fn block_length(&self, n: u64) -> usize {
        block_length(n, self.constants.c2, self.constants.lambda)
    }

    /// `⌈log(m₀ m₁ k) / log(1/γ)⌉ + 10`.
    pub fn default_r(&self, n: u64) -> usize {
        let c = &self.classification;
        let k = self.block_length(n);
        let x = ((c.m0 * c.m1 * k) as f64).ln() / (1.0 / self.certificate.gamma).ln();
        x.ceil().max(0.0) as usize + 10
    }

    pub fn report(&self, n: u64, r: Option<usize>) -> Result<BoundReport> {
        let (ok, diagnostic) = convergence_check(&self.subgroup, n);
        if !ok {
            return Err(Error::NotConvergent { n, reason: diagnostic.to_string() });
        }
        let c = &self.classification;
        let k = self.block_length(n);
        let r = r.unwrap_or_else(|| self.default_r(n));
        let bound = theoretical_bound(c.m0, c.m1, k, self.certificate.gamma, r);
        let t = r * k + self.a.dim();
        let tv_exact = match Evolution::with_cap(&self.a, &self.mu, n, self.exact_cap) {
            Ok(mut evo) => {
                evo.advance_to(t);
                Some(evo.tv_to_uniform())
            }
            Err(Error::BudgetExceeded { .. }) => None,
            Err(e) => return Err(e),
        };
        Ok(BoundReport {
            w: self.w.points.iter().map(|p| p.iter().map(|x| x.to_string()).collect()).collect(),
            m0: c.m0,
            m1: c.m1,
            gamma: self.certificate.gamma,
            eta: self.certificate.eta,
            k,
            r,
            bound,
            certificate: self.certificate.clone(),
            n,
            t,
            tv_exact,
            delta0: c.delta0,
            partition_diameter: self.partition.diameter,
            rectangles: self.partition.len(),
            c2: self.constants.c2,
            lambda: self.constants.lambda,
        })
    }

    /// Exhaustive block checks for each modulus, skipping moduli where the
    /// walk does not converge.
    pub fn block_checks(&self, ns: &[u64]) -> Result<BlockChecks> {
        let mut checks = Vec::new();
        for &n in ns {
            if !convergence_check(&self.subgroup, n).0 {
                continue;
            }
            checks.push(check_block_properties(n, &self.partition, &self.system, &self.classification, &self.constants)?);
        }
        let threshold = block_threshold(&checks);
        Ok(BlockChecks { checks, threshold })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockChecks {
    pub checks: Vec<BlockPropertyCheck>,
    /// Smallest tested `n` above which every tested modulus passes.
    pub threshold: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    /// Exact coordinates `p/q` of the points of `W`.
    #[serde(rename = "W")]
    pub w: Vec<Vec<String>>,
    pub m0: usize,
    pub m1: usize,
    pub gamma: f64,
    pub eta: f64,
    pub k: usize,
    pub r: usize,
    pub bound: f64,
    pub certificate: GammaCertificate,
    pub n: u64,
    /// `r k + d`, the time the bound speaks about.
    pub t: usize,
    pub tv_exact: Option<f64>,
    pub delta0: f64,
    pub partition_diameter: f64,
    pub rectangles: usize,
    pub c2: f64,
    pub lambda: f64,
}
