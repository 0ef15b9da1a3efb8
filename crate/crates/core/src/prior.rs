use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const DEFAULT_VARIANCE: f64 = 1.0;
pub const DEFAULT_LENGTH_SCALE: f64 = 0.2;
pub const DEFAULT_NUGGET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CovarianceSpec {
    pub variance: f64,
    pub length_scale: f64,
    pub nugget: f64,
}

impl Default for CovarianceSpec {
    fn default() -> Self {
        Self {
            variance: DEFAULT_VARIANCE,
            length_scale: DEFAULT_LENGTH_SCALE,
            nugget: DEFAULT_NUGGET,
        }
    }
}

impl CovarianceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0) {
            return Err(Error::Config(format!(
                "prior variance must be positive, got {}",
                self.variance
            )));
        }
        if !(self.length_scale > 0.0) {
            return Err(Error::Config(format!(
                "prior length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if self.nugget < 0.0 {
            return Err(Error::Config(format!(
                "prior nugget must be nonnegative, got {}",
                self.nugget
            )));
        }
        Ok(())
    }
}

pub fn squared_exp_kernel(p: [f64; 2], q: [f64; 2], spec: &CovarianceSpec) -> f64 {
    let d2 = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
    spec.variance * (-d2 / (2.0 * spec.length_scale * spec.length_scale)).exp()
}

/// Zero-mean Gaussian field on the mesh nodes with squared-exponential
/// covariance, sampled through a dense Cholesky factor.
#[derive(Debug, Clone)]
pub struct PriorSampler {
    spec: CovarianceSpec,
    chol: DMatrix<f64>,
    marginal_variance: f64,
}

impl PriorSampler {
    pub fn build(nodes: &[[f64; 2]], spec: CovarianceSpec) -> Result<Self> {
        spec.validate()?;
        let n = nodes.len();
        let mut cov = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] = squared_exp_kernel(nodes[i], nodes[j], &spec);
            }
            cov[(i, i)] += spec.nugget;
        }
        let cov_norm = cov.norm();
        let chol = nalgebra::Cholesky::new(cov.clone())
            .ok_or_else(|| {
                Error::Numerics(format!(
                    "covariance factorization failed (variance {}, length scale {}, nugget {}); \
                     the matrix is numerically singular, try a larger nugget",
                    spec.variance, spec.length_scale, spec.nugget
                ))
            })?
            .unpack();
        let resid = (&chol * chol.transpose() - &cov).norm() / cov_norm;
        if resid > 1e-10 {
            return Err(Error::Numerics(format!(
                "covariance factor residual {resid:.3e} exceeds 1e-10"
            )));
        }
        Ok(Self {
            spec,
            chol,
            marginal_variance: spec.variance + spec.nugget,
        })
    }

    pub fn dim(&self) -> usize {
        self.chol.nrows()
    }

    pub fn spec(&self) -> &CovarianceSpec {
        &self.spec
    }

    /// Prior variance at every node (stationary kernel).
    pub fn marginal_variance(&self) -> f64 {
        self.marginal_variance
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::<f64>::from_fn(self.dim(), |_, _| rng.sample(StandardNormal));
        &self.chol * z
    }
}

/// One pCN move: sqrt(1 - beta^2) * current + beta * (fresh prior draw).
/// Leaves the prior invariant for any beta in (0, 1].
pub fn pcn_propose<R: Rng>(
    current: &DVector<f64>,
    beta: f64,
    sampler: &PriorSampler,
    rng: &mut R,
) -> Result<DVector<f64>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::Config(format!(
            "pCN beta must be in (0, 1], got {beta}"
        )));
    }
    let contraction = (1.0 - beta * beta).sqrt();
    Ok(current * contraction + sampler.sample(rng) * beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{Domain, Mesh, DEFAULT_SPACING};
    use crate::rng::{stream_rng, STREAM_CHAIN};
    use approx::assert_relative_eq;

    fn nodes() -> Vec<[f64; 2]> {
        Mesh::build(Domain::default(), DEFAULT_SPACING)
            .unwrap()
            .nodes()
            .to_vec()
    }

    fn example3_spec() -> CovarianceSpec {
        CovarianceSpec {
            variance: 0.64,
            length_scale: 0.15,
            nugget: 1e-8,
        }
    }

    #[test]
    fn frozen_kernel_and_factor_entries() {
        let nodes = nodes();
        let spec = example3_spec();
        assert_relative_eq!(
            squared_exp_kernel(nodes[0], nodes[0], &spec),
            0.64,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            squared_exp_kernel(nodes[0], nodes[1], &spec),
            4.522548978289384e-1,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            squared_exp_kernel(nodes[0], nodes[16], &spec),
            3.195851447035368e-1,
            max_relative = 1e-12
        );
        let sampler = PriorSampler::build(&nodes, spec).unwrap();
        let l = sampler.factor();
        assert_relative_eq!(l[(0, 0)], 8.000000062500000e-1, max_relative = 1e-10);
        assert_relative_eq!(l[(1, 0)], 5.653186178696212e-1, max_relative = 1e-10);
        assert_relative_eq!(l[(1, 1)], 5.660520031675369e-1, max_relative = 1e-10);
        assert_eq!(l[(0, 1)], 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let nodes = nodes();
        for bad in [
            CovarianceSpec {
                variance: 0.0,
                ..Default::default()
            },
            CovarianceSpec {
                variance: -1.0,
                ..Default::default()
            },
            CovarianceSpec {
                length_scale: 0.0,
                ..Default::default()
            },
            CovarianceSpec {
                nugget: -1e-9,
                ..Default::default()
            },
        ] {
            assert!(PriorSampler::build(&nodes, bad).is_err());
        }
    }

    #[test]
    fn bundled_hyperparameters_all_factor() {
        let nodes = nodes();
        for (variance, ell) in [(0.64, 0.15), (0.25, 0.15), (1.0, 0.2), (1.0, 0.15)] {
            PriorSampler::build(
                &nodes,
                CovarianceSpec {
                    variance,
                    length_scale: ell,
                    nugget: 1e-8,
                },
            )
            .unwrap();
        }
    }

    #[test]
    fn samples_reproduce_and_match_the_marginal_variance() {
        let nodes = nodes();
        let sampler = PriorSampler::build(&nodes, CovarianceSpec::default()).unwrap();
        let mut r1 = stream_rng(3, STREAM_CHAIN);
        let mut r2 = stream_rng(3, STREAM_CHAIN);
        assert_eq!(sampler.sample(&mut r1), sampler.sample(&mut r2));

        let mut rng = stream_rng(11, STREAM_CHAIN);
        let draws = 4000;
        let mut sum_sq = vec![0.0f64; sampler.dim()];
        for _ in 0..draws {
            let phi = sampler.sample(&mut rng);
            for (acc, v) in sum_sq.iter_mut().zip(phi.iter()) {
                *acc += v * v;
            }
        }
        let want = sampler.marginal_variance();
        // Pooled over nodes; per-node checks live in the acceptance suite.
        let pooled: f64 = sum_sq.iter().sum::<f64>() / (draws as f64 * sampler.dim() as f64);
        assert!(
            (pooled / want - 1.0).abs() < 0.05,
            "pooled variance {pooled}"
        );
    }

    #[test]
    fn tiny_length_scale_gives_nearly_independent_components() {
        let nodes = nodes();
        let sampler = PriorSampler::build(
            &nodes,
            CovarianceSpec {
                variance: 1.0,
                length_scale: 1e-6,
                nugget: 1e-8,
            },
        )
        .unwrap();
        let mut rng = stream_rng(5, STREAM_CHAIN);
        let (mut s0, mut s1, mut s01) = (0.0, 0.0, 0.0);
        let draws = 10_000;
        for _ in 0..draws {
            let phi = sampler.sample(&mut rng);
            s0 += phi[0] * phi[0];
            s1 += phi[1] * phi[1];
            s01 += phi[0] * phi[1];
        }
        let corr = s01 / (s0.sqrt() * s1.sqrt());
        assert!(corr.abs() < 0.05, "neighbor correlation {corr}");
    }

    #[test]
    fn pcn_proposal_limits() {
        let nodes = nodes();
        let sampler = PriorSampler::build(&nodes, CovarianceSpec::default()).unwrap();
        let mut rng = stream_rng(7, STREAM_CHAIN);
        let current = sampler.sample(&mut rng);

        let frozen = pcn_propose(&current, 1e-12, &sampler, &mut rng).unwrap();
        assert!((&frozen - &current).norm() < 1e-10 * current.norm().max(1.0));

        let mut ra = stream_rng(9, STREAM_CHAIN);
        let mut rb = stream_rng(9, STREAM_CHAIN);
        let fresh = pcn_propose(&current, 1.0, &sampler, &mut ra).unwrap();
        let draw = sampler.sample(&mut rb);
        assert_eq!(fresh, draw);

        assert!(pcn_propose(&current, 0.0, &sampler, &mut rng).is_err());
        assert!(pcn_propose(&current, 1.5, &sampler, &mut rng).is_err());
    }
}
