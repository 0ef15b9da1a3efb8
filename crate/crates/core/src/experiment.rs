use crate::config::{RunConfig, TruthSource};
use crate::error::{Error, Result};
use crate::forward::{forward_flux, observation_matrix, observation_matrix_cached};
use crate::inference::{run_chain, Likelihood, NoiseModel, TraceRow};
use crate::levelset::{sources_from_weights, PointSource};
use crate::mesh::{Domain, Mesh, ObservationPlan};
use crate::prior::PriorSampler;
use crate::rng::{stream_rng, STREAM_CHAIN, STREAM_NOISE};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::path::Path;

/// A run configuration resolved into concrete numerical objects. The
/// observation matrix is assembled once and shared by every seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: RunConfig,
    pub domain: Domain,
    pub mesh: Mesh,
    pub plan: ObservationPlan,
    pub matrix: DMatrix<f64>,
    pub truth_weights: DVector<f64>,
    pub clean_data: DVector<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub seed: u64,
    /// Override the config's thinning switch (CLI --no-thinning).
    pub thinning: Option<bool>,
    /// Override the noise scale convention (CLI --literal-noise-norm).
    pub literal_norm: Option<bool>,
}

impl RunOptions {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            thinning: None,
            literal_norm: None,
        }
    }
}

/// One truth source paired with its nearest reconstructed source.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MatchPair {
    pub truth: TruthSource,
    pub estimate: PointSource,
    /// Euclidean distance in units of the mesh spacing.
    pub position_error_cells: f64,
    pub intensity_error: f64,
}

#[derive(Debug, Clone, Serialize, Default)]
pub struct MatchReport {
    pub pairs: Vec<MatchPair>,
    /// Reconstructed sources with no truth partner.
    pub spurious: Vec<PointSource>,
    /// Truth sources with no reconstructed partner.
    pub missed: Vec<TruthSource>,
}

impl MatchReport {
    pub fn max_position_error_cells(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.position_error_cells)
            .fold(0.0, f64::max)
    }

    pub fn max_intensity_error(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.intensity_error.abs())
            .fold(0.0, f64::max)
    }
}

/// Greedy globally-closest assignment between truth and reconstruction:
/// repeatedly pair the closest remaining (truth, estimate) couple.
/// Leftover estimates are spurious, leftover truths are missed.
pub fn match_sources(
    truth: &[TruthSource],
    estimates: &[PointSource],
    spacing: f64,
) -> MatchReport {
    let mut truth_left: Vec<usize> = (0..truth.len()).collect();
    let mut est_left: Vec<usize> = (0..estimates.len()).collect();
    let mut pairs = Vec::new();

    while !truth_left.is_empty() && !est_left.is_empty() {
        let mut best = (0usize, 0usize, f64::INFINITY);
        for (ti_pos, &ti) in truth_left.iter().enumerate() {
            for (ei_pos, &ei) in est_left.iter().enumerate() {
                let dx = truth[ti].x - estimates[ei].x;
                let dy = truth[ti].y - estimates[ei].y;
                let d = (dx * dx + dy * dy).sqrt();
                if d < best.2 {
                    best = (ti_pos, ei_pos, d);
                }
            }
        }
        let ti = truth_left.remove(best.0);
        let ei = est_left.remove(best.1);
        pairs.push(MatchPair {
            truth: truth[ti],
            estimate: estimates[ei],
            position_error_cells: best.2 / spacing,
            intensity_error: estimates[ei].intensity - truth[ti].intensity,
        });
    }

    MatchReport {
        pairs,
        spurious: est_left.into_iter().map(|ei| estimates[ei]).collect(),
        missed: truth_left.into_iter().map(|ti| truth[ti]).collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    pub seed: u64,
    pub thinning: bool,
    pub noise_sigma: f64,
    pub sources: Vec<PointSource>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    pub mean_acceptance: f64,
    pub total_removals: usize,
    pub final_potential: f64,
    /// ||K(f) - g|| / ||g|| at the final state.
    pub final_misfit: f64,
    /// ||w_est - w_true|| / ||w_true|| on node-weight vectors.
    pub relative_error: f64,
    pub matching: MatchReport,
}

impl Experiment {
    pub fn assemble(config: RunConfig, cache_dir: Option<&Path>) -> Result<Self> {
        config.validate()?;
        let domain = config.domain()?;
        let mesh = config.mesh()?;
        let plan = config.plan(&domain)?;
        let modes = config.forward.modes;
        let matrix = match cache_dir {
            Some(dir) => observation_matrix_cached(dir, &mesh, &plan, modes)?,
            None => observation_matrix(&mesh, &plan, modes)?,
        };

        let mut truth_weights = DVector::zeros(mesh.node_count());
        for s in &config.truth {
            let k = mesh.index_of(s.x, s.y).ok_or_else(|| {
                Error::Config(format!(
                    "truth source ({}, {}) is not a mesh node",
                    s.x, s.y
                ))
            })?;
            truth_weights[k] += s.intensity;
        }
        let sources: Vec<([f64; 2], f64)> = config
            .truth
            .iter()
            .map(|s| ([s.x, s.y], s.intensity))
            .collect();
        let clean_data = forward_flux(&domain, &sources, &plan, modes)?;

        Ok(Self {
            config,
            domain,
            mesh,
            plan,
            matrix,
            truth_weights,
            clean_data,
        })
    }

    /// Noise standard deviation for a given scale convention.
    pub fn noise_sigma(&self, literal_norm: bool) -> Result<f64> {
        let delta = self.config.noise.relative_level;
        let norm = self.clean_data.norm();
        if delta > 0.0 && norm == 0.0 {
            return Err(Error::Config(
                "noise level is relative to the clean signal, which is identically zero".into(),
            ));
        }
        let scale = if literal_norm {
            norm
        } else {
            (self.clean_data.norm_squared() / self.clean_data.len() as f64).sqrt()
        };
        Ok(delta * scale)
    }

    /// Observed data for one seed: clean signal plus iid Gaussian noise of
    /// the configured relative level, drawn on a stream reserved for noise
    /// so chain draws never perturb the data.
    pub fn generate_data(&self, seed: u64, literal_norm: bool) -> Result<(DVector<f64>, f64)> {
        let sigma = self.noise_sigma(literal_norm)?;
        if sigma == 0.0 {
            return Ok((self.clean_data.clone(), 0.0));
        }
        let mut rng = stream_rng(seed, STREAM_NOISE);
        let data = DVector::from_fn(self.clean_data.len(), |i, _| {
            self.clean_data[i] + sigma * rng.sample::<f64, _>(StandardNormal)
        });
        Ok((data, sigma))
    }

    pub fn run(&self, opts: RunOptions) -> Result<RunReport> {
        let literal = opts.literal_norm.unwrap_or(self.config.noise.literal_norm);
        let (data, sigma) = self.generate_data(opts.seed, literal)?;
        let noise = NoiseModel::new(sigma).map_err(|_| {
            Error::Config(
                "the chain needs a positive noise level; set noise.relative_level > 0".into(),
            )
        })?;
        let likelihood = Likelihood::new(&self.matrix, &data, noise)?;
        let prior = PriorSampler::build(self.mesh.nodes(), self.config.prior.clone())?;

        let mut params = self.config.sampler.chain_params();
        if let Some(t) = opts.thinning {
            params.thinning = t;
        }

        let mut rng = stream_rng(opts.seed, STREAM_CHAIN);
        let result = run_chain(
            &mut rng,
            &likelihood,
            &prior,
            &self.config.levelset,
            &params,
            Some(&self.truth_weights),
        )?;

        let sources = sources_from_weights(&result.state.weights, &self.mesh);
        let matching = match_sources(&self.config.truth, &sources, self.mesh.spacing);
        let final_eval = likelihood.evaluate(&result.state.weights);
        let relative_error =
            crate::inference::relative_error(&result.state.weights, &self.truth_weights)?;

        Ok(RunReport {
            name: self.config.name.clone(),
            seed: opts.seed,
            thinning: params.thinning,
            noise_sigma: sigma,
            sources,
            trace: result.trace,
            mean_acceptance: result.mean_acceptance,
            total_removals: result.total_removals,
            final_potential: final_eval.potential,
            final_misfit: final_eval.data_misfit,
            relative_error,
            matching,
        })
    }
}
