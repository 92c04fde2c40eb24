//! Langevin diffusions with double-bracket dissipation on reductive
//! groups, targeting the Gibbs measure `exp(-beta (Q(m,m)/2 + V(g)))`.
//!
//! Three variants share one stepper, distinguished only by where the
//! noise enters:
//!
//! * momentum: additive noise and linear friction on `m`,
//!   `dm = (-beta gamma m - grad V) dt + sqrt(2 gamma) X_i dW~^i`,
//!   `dg = (dL_g) m dt`;
//! * position: shared noise on `g` (a Riemannian Brownian motion) and a
//!   multiplicative bracket term on `m`,
//!   `dm = (-grad V + beta gamma [grad V, m]) dt + sqrt(2 gamma) [X_i, m] o dW^i`,
//!   `dg = (dL_g)((m - beta gamma grad V) dt + sqrt(2 gamma) X_i dW^i)`;
//! * symplectic: both mechanisms with independent rates `gamma_1`
//!   (momentum block, driven by `W~`) and `gamma_2` (position block,
//!   driven by `W`).
//!
//! Each step consumes exactly `2 d` standard normals: the `W` block then
//! the `W~` block, regardless of which rates vanish. Setting
//! `gamma_1 = 0` therefore reproduces the position variant bit for bit,
//! and `gamma_2 = 0` the momentum variant, because all three run the
//! same code path with the same stream layout.
//!
//! One step is the symmetric composition
//! kick(h/2) . drift(h/2) . position-noise(h) . momentum-noise(h)
//! . drift(h/2) . kick(h/2), where the position-noise block performs a
//! Stratonovich step with a Heun (predictor-corrector) average of the
//! potential gradient and applies the bracket part of the momentum
//! update as an exact conjugation, and the momentum-noise block is the
//! exact Ornstein-Uhlenbeck transition.

use crate::algebra::{AlgebraElement, OrthonormalBasis};
use crate::group::{compose, exp_algebra, group_defect, reproject, GroupElement};
use crate::linalg::Matrix;
use crate::mechanics::{
    conjugate_by_exp, left_trivialized_gradient, PhaseState, Potential,
};
use crate::rng::RngStream;
use crate::{Error, Result};
use rayon::prelude::*;

/// Which Langevin family to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LangevinVariant {
    Momentum,
    Position,
    Symplectic,
}

impl std::fmt::Display for LangevinVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LangevinVariant::Momentum => write!(f, "momentum"),
            LangevinVariant::Position => write!(f, "position"),
            LangevinVariant::Symplectic => write!(f, "symplectic"),
        }
    }
}

/// Variant, temperature, friction rates, and run geometry.
#[derive(Clone, Debug)]
pub struct LangevinConfig {
    pub variant: LangevinVariant,
    /// Inverse temperature.
    pub beta: f64,
    /// Friction rate of the momentum and position variants.
    pub gamma: f64,
    /// Momentum-noise rate of the symplectic variant.
    pub gamma1: f64,
    /// Position-noise rate of the symplectic variant.
    pub gamma2: f64,
    pub step_size: f64,
    pub horizon: f64,
    pub seed: u64,
    pub stream_id: u64,
    pub record_every: usize,
    pub reproject_every: usize,
}

impl LangevinConfig {
    pub fn new(variant: LangevinVariant, beta: f64, gamma: f64) -> Self {
        Self {
            variant,
            beta,
            gamma,
            gamma1: gamma,
            gamma2: gamma,
            step_size: 1e-3,
            horizon: 10.0,
            seed: 0,
            stream_id: 0,
            record_every: 10,
            reproject_every: 100,
        }
    }

    /// `(momentum-noise rate, position-noise rate)` for the variant.
    pub fn noise_rates(&self) -> (f64, f64) {
        match self.variant {
            LangevinVariant::Momentum => (self.gamma, 0.0),
            LangevinVariant::Position => (0.0, self.gamma),
            LangevinVariant::Symplectic => (self.gamma1, self.gamma2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| -> Result<()> {
            if !(v > 0.0) || !v.is_finite() {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive and finite, found {v}"),
                })
            } else {
                Ok(())
            }
        };
        positive("beta", self.beta)?;
        positive("step_size", self.step_size)?;
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be non-negative, found {}", self.horizon),
            });
        }
        let (g1, g2) = self.noise_rates();
        for (name, v) in [("gamma", self.gamma), ("gamma1", g1), ("gamma2", g2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be non-negative and finite, found {v}"),
                });
            }
        }
        Ok(())
    }
}

/// A recorded trajectory: times, group matrices, momentum coordinates,
/// and the per-sample energy, Casimir `Q(m, m)`, and group defect.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub positions: Vec<Matrix>,
    pub momentum_coefficients: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub casimirs: Vec<f64>,
    pub defects: Vec<f64>,
}

impl TrajectoryRecord {
    fn with_capacity(n: usize) -> Self {
        Self {
            times: Vec::with_capacity(n),
            positions: Vec::with_capacity(n),
            momentum_coefficients: Vec::with_capacity(n),
            energies: Vec::with_capacity(n),
            casimirs: Vec::with_capacity(n),
            defects: Vec::with_capacity(n),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Rebuilds the phase state at a recorded index.
    pub fn state_at(&self, index: usize, basis: &OrthonormalBasis) -> Result<PhaseState> {
        let position = GroupElement::new(self.positions[index].clone(), basis.descriptor())?;
        let momentum = basis.from_coefficients(&self.momentum_coefficients[index])?;
        Ok(PhaseState { position, momentum })
    }

    fn push(&mut self, t: f64, state: &PhaseState, basis: &OrthonormalBasis, potential: &Potential) {
        let q = basis.pairing(&state.momentum, &state.momentum).expect("same descriptor");
        self.times.push(t);
        self.positions.push(state.position.matrix().clone());
        self.momentum_coefficients
            .push(basis.coefficients(&state.momentum).expect("same descriptor"));
        self.energies.push(0.5 * q + potential.value(&state.position));
        self.casimirs.push(q);
        self.defects.push(group_defect(&state.position));
    }
}

/// One step of the unified Langevin integrator. `rates = (gamma_1,
/// gamma_2)` are the momentum- and position-noise rates.
fn step_kernel(
    state: &PhaseState,
    beta: f64,
    rates: (f64, f64),
    h: f64,
    potential: &Potential,
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    let (gamma1, gamma2) = rates;
    let d = basis.dimension();

    // Fixed stream layout: the position block W, then the momentum
    // block W~, drawn every step whether or not a rate vanishes.
    let mut w = vec![0.0; d];
    rng.fill_standard_normal(&mut w);
    let mut w_tilde = vec![0.0; d];
    rng.fill_standard_normal(&mut w_tilde);

    // Half kick.
    let grad0 = left_trivialized_gradient(potential, &state.position, basis)?;
    let mut m = state.momentum.sub(&grad0.scale(0.5 * h))?;
    // Half geodesic drift.
    let mut g = compose(&state.position, &exp_algebra(&m.scale(0.5 * h))?)?;

    // Position-noise block: shared increments drive both the group move
    // and the bracket term of the momentum equation.
    if gamma2 > 0.0 {
        let mut noise = AlgebraElement::zero(basis.descriptor());
        for (xi, x) in w.iter().zip(basis.elements()) {
            noise = noise.add(&x.scale((2.0 * gamma2 * h).sqrt() * xi))?;
        }
        let k0 = left_trivialized_gradient(potential, &g, basis)?;
        let predictor = compose(&g, &exp_algebra(&k0.scale(-beta * gamma2 * h).add(&noise)?)?)?;
        let k1 = left_trivialized_gradient(potential, &predictor, basis)?;
        let k_mean = k0.add(&k1)?.scale(0.5);
        // dm = [beta gamma_2 grad V dt + sqrt(2 gamma_2) dB, m], applied
        // as one exact conjugation.
        let conjugator = k_mean.scale(beta * gamma2 * h).add(&noise)?;
        m = conjugate_by_exp(&conjugator, &m)?;
        g = compose(&g, &exp_algebra(&k_mean.scale(-beta * gamma2 * h).add(&noise)?)?)?;
    }

    // Momentum-noise block: exact Ornstein-Uhlenbeck transition.
    if gamma1 > 0.0 {
        let decay = (-beta * gamma1 * h).exp();
        let amplitude = ((1.0 - decay * decay) / beta).sqrt();
        let mut refreshed = m.scale(decay);
        for (xi, x) in w_tilde.iter().zip(basis.elements()) {
            refreshed = refreshed.add(&x.scale(amplitude * xi))?;
        }
        m = refreshed;
    }

    // Half geodesic drift, half kick.
    g = compose(&g, &exp_algebra(&m.scale(0.5 * h))?)?;
    let grad1 = left_trivialized_gradient(potential, &g, basis)?;
    m = m.sub(&grad1.scale(0.5 * h))?;

    Ok(PhaseState { position: g, momentum: m })
}

/// One step of the momentum Langevin diffusion (kick / drift /
/// Ornstein-Uhlenbeck / drift / kick).
pub fn momentum_langevin_step(
    state: &PhaseState,
    config: &LangevinConfig,
    potential: &Potential,
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    step_kernel(state, config.beta, (config.gamma, 0.0), config.step_size, potential, basis, rng)
}

/// One step of the position Langevin diffusion (shared Riemannian noise
/// in the group, bracket noise in the momentum).
pub fn position_langevin_step(
    state: &PhaseState,
    config: &LangevinConfig,
    potential: &Potential,
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    step_kernel(state, config.beta, (0.0, config.gamma), config.step_size, potential, basis, rng)
}

/// One step of the symplectic Langevin diffusion (noise in the whole
/// phase space). With `gamma1 = 0` this is exactly the position step;
/// with `gamma2 = 0` exactly the momentum step.
pub fn symplectic_langevin_step(
    state: &PhaseState,
    config: &LangevinConfig,
    potential: &Potential,
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    step_kernel(
        state,
        config.beta,
        (config.gamma1, config.gamma2),
        config.step_size,
        potential,
        basis,
        rng,
    )
}

/// One step of whichever variant the config selects.
pub fn langevin_step(
    state: &PhaseState,
    config: &LangevinConfig,
    potential: &Potential,
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<PhaseState> {
    step_kernel(
        state,
        config.beta,
        config.noise_rates(),
        config.step_size,
        potential,
        basis,
        rng,
    )
}

/// Integrates one trajectory, recording every `record_every`-th step
/// (the initial state is always recorded) and reprojecting at the
/// configured cadence.
pub fn simulate(
    config: &LangevinConfig,
    potential: &Potential,
    basis: &OrthonormalBasis,
    initial: Option<PhaseState>,
) -> Result<TrajectoryRecord> {
    config.validate()?;
    let rates = config.noise_rates();
    let state0 = match initial {
        Some(s) => {
            s.descriptor().check_same(&basis.descriptor())?;
            s
        }
        None => PhaseState::rest(basis.descriptor()),
    };
    let steps = (config.horizon / config.step_size).round() as usize;
    let record_every = config.record_every.max(1);
    let mut rng = RngStream::new(config.seed, config.stream_id);
    let mut record = TrajectoryRecord::with_capacity(steps / record_every + 2);
    let mut state = state0;
    record.push(0.0, &state, basis, potential);
    for step in 1..=steps {
        state = step_kernel(
            &state,
            config.beta,
            rates,
            config.step_size,
            potential,
            basis,
            &mut rng,
        )?;
        if config.reproject_every > 0 && step % config.reproject_every == 0 {
            state.position = reproject(&state.position)?;
            state.momentum =
                crate::algebra::project_to_algebra(state.momentum.matrix(), basis.descriptor())?;
        }
        if step % record_every == 0 || step == steps {
            record.push(step as f64 * config.step_size, &state, basis, potential);
        }
    }
    Ok(record)
}

/// Integrates `n_trajectories` independent trajectories in parallel.
/// Trajectory `i` uses `stream_id = config.stream_id + i`, so the result
/// does not depend on the execution order or the degree of parallelism.
pub fn simulate_ensemble(
    config: &LangevinConfig,
    potential: &Potential,
    basis: &OrthonormalBasis,
    initial: Option<PhaseState>,
    n_trajectories: usize,
) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    (0..n_trajectories)
        .into_par_iter()
        .map(|index| {
            let mut cfg = config.clone();
            cfg.stream_id = config.stream_id + index as u64;
            simulate(&cfg, potential, basis, initial.clone())
        })
        .collect()
}
