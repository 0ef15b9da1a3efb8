use crate::error::{Error, Result};
use crate::levelset::{suppress_node, threshold_weights, ThresholdSpec};
use crate::prior::{pcn_propose, PriorSampler};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Homoscedastic Gaussian observation noise.
#[derive(Debug, Clone, Copy)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise standard deviation must be positive, got {sigma}"
            )));
        }
        Ok(Self { sigma })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Negative log-likelihood up to a constant: ||A w - g||^2 / (2 sigma^2).
#[derive(Debug, Clone)]
pub struct Likelihood<'a> {
    pub matrix: &'a DMatrix<f64>,
    pub data: &'a DVector<f64>,
    pub noise: NoiseModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PosteriorEval {
    pub potential: f64,
    /// Relative data misfit ||K(f) - g|| / ||g||.
    pub data_misfit: f64,
}

impl<'a> Likelihood<'a> {
    pub fn new(
        matrix: &'a DMatrix<f64>,
        data: &'a DVector<f64>,
        noise: NoiseModel,
    ) -> Result<Self> {
        if matrix.nrows() != data.len() {
            return Err(Error::Config(format!(
                "observation matrix has {} rows but the data vector has {} entries",
                matrix.nrows(),
                data.len()
            )));
        }
        Ok(Self {
            matrix,
            data,
            noise,
        })
    }

    pub fn residual(&self, weights: &DVector<f64>) -> DVector<f64> {
        self.matrix * weights - self.data
    }

    pub fn potential_of_residual(&self, residual: &DVector<f64>) -> f64 {
        residual.norm_squared() / (2.0 * self.noise.sigma * self.noise.sigma)
    }

    pub fn potential(&self, weights: &DVector<f64>) -> f64 {
        self.potential_of_residual(&self.residual(weights))
    }

    pub fn evaluate(&self, weights: &DVector<f64>) -> PosteriorEval {
        let r = self.residual(weights);
        PosteriorEval {
            potential: self.potential_of_residual(&r),
            data_misfit: r.norm() / self.data.norm(),
        }
    }
}

/// pCN accept/reject. The decision reads only the two potential values and
/// the uniform draw; the prior enters through the proposal alone, so no
/// prior density is available here even by signature.
pub fn accept_pcn(potential_current: f64, potential_proposed: f64, u: f64) -> bool {
    let d = potential_current - potential_proposed;
    // ln(0) = -inf accepts any finite difference, matching u < min(1, e^d).
    d >= 0.0 || u.ln() < d
}

/// Leave-one-out thinning decision: alpha = min(1, exp(Phi - Phi_without) *
/// prior_factor); the point is removed when alpha > u.
pub fn accept_removal(
    potential_current: f64,
    potential_without: f64,
    prior_factor: f64,
    u: f64,
) -> bool {
    let d = potential_current - potential_without + prior_factor.ln();
    let alpha = if d >= 0.0 { 1.0 } else { d.exp() };
    alpha > u
}

#[derive(Debug, Clone, Copy)]
pub struct ChainParams {
    pub beta: f64,
    /// pCN steps per outer iteration (Step 1).
    pub pcn_steps: usize,
    /// Outer iterations, each one Step 1 + Step 2.
    pub sweeps: usize,
    pub prior_factor: f64,
    pub thinning: bool,
}

pub const DEFAULT_BETA: f64 = 0.1;
pub const DEFAULT_PCN_STEPS: usize = 50;
pub const DEFAULT_SWEEPS: usize = 200;
pub const DEFAULT_PRIOR_FACTOR: f64 = 1.0;

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            pcn_steps: DEFAULT_PCN_STEPS,
            sweeps: DEFAULT_SWEEPS,
            prior_factor: DEFAULT_PRIOR_FACTOR,
            thinning: true,
        }
    }
}

impl ChainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "pCN beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        if !(self.prior_factor > 0.0) || !self.prior_factor.is_finite() {
            return Err(Error::Config(format!(
                "thinning prior factor must be positive and finite, got {}",
                self.prior_factor
            )));
        }
        Ok(())
    }
}

/// Latent field plus its thresholded weights and cached potential.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub field: DVector<f64>,
    pub weights: DVector<f64>,
    pub potential: f64,
}

impl ChainState {
    pub fn from_field(field: DVector<f64>, likelihood: &Likelihood, spec: &ThresholdSpec) -> Self {
        let weights = threshold_weights(&field, spec);
        let potential = likelihood.potential(&weights);
        Self {
            field,
            weights,
            potential,
        }
    }

    pub fn active_count(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }

    #[cfg(debug_assertions)]
    fn assert_consistent(&self, likelihood: &Likelihood, spec: &ThresholdSpec) {
        let w = threshold_weights(&self.field, spec);
        debug_assert_eq!(
            w, self.weights,
            "thresholded weights out of sync with the latent field"
        );
        let p = likelihood.potential(&self.weights);
        debug_assert!(
            (p - self.potential).abs() <= 1e-8 * (1.0 + p.abs()),
            "cached potential {} drifted from recomputed {}",
            self.potential,
            p
        );
    }

    #[cfg(not(debug_assertions))]
    fn assert_consistent(&self, _likelihood: &Likelihood, _spec: &ThresholdSpec) {}
}

/// One pCN move on the state; returns whether the proposal was accepted.
pub fn pcn_step<R: Rng>(
    rng: &mut R,
    state: &mut ChainState,
    likelihood: &Likelihood,
    prior: &PriorSampler,
    beta: f64,
    spec: &ThresholdSpec,
) -> Result<bool> {
    let proposal = pcn_propose(&state.field, beta, prior, rng)?;
    let weights = threshold_weights(&proposal, spec);
    let potential = likelihood.potential(&weights);
    let u: f64 = rng.gen();
    if accept_pcn(state.potential, potential, u) {
        state.field = proposal;
        state.weights = weights;
        state.potential = potential;
        Ok(true)
    } else {
        Ok(false)
    }
}

/// One sequential leave-one-out sweep over the active nodes in node-index
/// order; removals apply immediately, so later decisions see the updated
/// set. Returns the number of removed points. Never adds points.
pub fn thinning_pass<R: Rng>(
    rng: &mut R,
    state: &mut ChainState,
    likelihood: &Likelihood,
    spec: &ThresholdSpec,
    prior_factor: f64,
) -> usize {
    let active: Vec<usize> = (0..state.weights.len())
        .filter(|&j| state.weights[j] != 0.0)
        .collect();
    if active.is_empty() {
        return 0;
    }
    let mut residual = likelihood.residual(&state.weights);
    let mut removed = 0usize;
    for j in active {
        let w_j = state.weights[j];
        let column = likelihood.matrix.column(j);
        let residual_without = &residual - column * w_j;
        let potential_without = likelihood.potential_of_residual(&residual_without);
        let u: f64 = rng.gen();
        if accept_removal(state.potential, potential_without, prior_factor, u) {
            suppress_node(&mut state.field, j, spec);
            state.weights[j] = 0.0;
            residual = residual_without;
            state.potential = potential_without;
            removed += 1;
        }
    }
    debug_assert!({
        let fresh = likelihood.residual(&state.weights);
        (&fresh - &residual).norm() <= 1e-9 * (1.0 + fresh.norm())
    });
    removed
}

/// One trace record per outer iteration.
#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub iteration: usize,
    pub relative_error: Option<f64>,
    pub active_count: usize,
    pub potential: f64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone)]
pub struct ChainResult {
    pub state: ChainState,
    pub trace: Vec<TraceRow>,
    pub mean_acceptance: f64,
    pub total_removals: usize,
}

/// ||w_est - w_true|| / ||w_true|| on node-weight vectors.
pub fn relative_error(estimate: &DVector<f64>, truth: &DVector<f64>) -> Result<f64> {
    let denom = truth.norm();
    if denom == 0.0 {
        return Err(Error::Config(
            "relative error undefined for an empty truth set".into(),
        ));
    }
    Ok((estimate - truth).norm() / denom)
}

/// Full loop: initialize the field from the prior, then alternate Step 1
/// (pcn_steps pCN moves) and Step 2 (one thinning sweep) for `sweeps`
/// outer iterations.
pub fn run_chain<R: Rng>(
    rng: &mut R,
    likelihood: &Likelihood,
    prior: &PriorSampler,
    spec: &ThresholdSpec,
    params: &ChainParams,
    truth_weights: Option<&DVector<f64>>,
) -> Result<ChainResult> {
    params.validate()?;
    spec.validate()?;
    if likelihood.matrix.ncols() != prior.dim() {
        return Err(Error::Config(format!(
            "observation matrix has {} columns but the prior field has {} nodes",
            likelihood.matrix.ncols(),
            prior.dim()
        )));
    }

    let mut state = ChainState::from_field(prior.sample(rng), likelihood, spec);
    let mut trace = Vec::with_capacity(params.sweeps);
    let mut accepted_total = 0usize;
    let mut removals_total = 0usize;

    for iteration in 1..=params.sweeps {
        let mut accepted = 0usize;
        for _ in 0..params.pcn_steps {
            if pcn_step(rng, &mut state, likelihood, prior, params.beta, spec)? {
                accepted += 1;
            }
        }
        accepted_total += accepted;
        state.assert_consistent(likelihood, spec);

        if params.thinning {
            removals_total += thinning_pass(rng, &mut state, likelihood, spec, params.prior_factor);
            state.assert_consistent(likelihood, spec);
        }

        let relative = match truth_weights {
            Some(truth) => Some(relative_error(&state.weights, truth)?),
            None => None,
        };
        trace.push(TraceRow {
            iteration,
            relative_error: relative,
            active_count: state.active_count(),
            potential: state.potential,
            acceptance_rate: if params.pcn_steps == 0 {
                0.0
            } else {
                accepted as f64 / params.pcn_steps as f64
            },
        });
    }

    let total_steps = params.sweeps * params.pcn_steps;
    Ok(ChainResult {
        state,
        trace,
        mean_acceptance: if total_steps == 0 {
            0.0
        } else {
            accepted_total as f64 / total_steps as f64
        },
        total_removals: removals_total,
    })
}
