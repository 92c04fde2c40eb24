//! Statistical verification layer.
//!
//! The central objects are an exact Gibbs oracle (rejection sampling
//! against Haar proposals, so the samples are independent and the
//! standard errors honest), ergodic averages with batch-means errors,
//! z-score comparisons between trajectory averages and oracle averages,
//! a weak generator-stationarity test assembled from Poisson brackets,
//! and conservation monitors for energy, Casimirs, spectra, and group
//! defects.

use crate::algebra::{project_to_algebra, AlgebraElement, Family, OrthonormalBasis};
use crate::group::{haar_sample, GroupElement};
use crate::langevin::TrajectoryRecord;
use crate::linalg::{self, Matrix, Scalar};
use crate::mechanics::{poisson_bracket, Observable, PhaseState, Potential};
use crate::rng::RngStream;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Maximum consecutive rejections before the oracle reports a
/// misconfigured bound.
const REJECTION_WINDOW: usize = 10_000;

/// Acceptance threshold for moment comparisons, in combined standard
/// errors.
pub const Z_THRESHOLD: f64 = 3.0;

/// Outcome of one observable's trajectory-versus-oracle comparison.
#[derive(Clone, Debug, Serialize)]
pub struct MomentReport {
    pub observable: String,
    pub ergodic_mean: f64,
    pub ergodic_se: f64,
    pub oracle_mean: f64,
    pub oracle_se: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// Outcome of one observable's generator-stationarity test.
#[derive(Clone, Debug, Serialize)]
pub struct StationarityReport {
    pub observable: String,
    pub mean: f64,
    pub se: f64,
    pub z_score: f64,
    pub pass: bool,
}

/// Conservation summary of a recorded trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct ConservationReport {
    pub energy_drift_max: f64,
    pub energy_drift_terminal: f64,
    pub casimir_drift_max: f64,
    pub casimir_drift_terminal: f64,
    pub spectrum_drift_max: f64,
    pub defect_max: f64,
}

/// Integrated autocorrelation time and effective sample size.
#[derive(Clone, Debug, Serialize)]
pub struct AutocorrelationReport {
    pub tau: f64,
    pub ess: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// A lower bound for the potential, used to normalise the rejection
/// acceptance probability. Trace potentials are bounded below by minus
/// the nuclear norm of the weight.
fn potential_lower_bound(potential: &Potential, explicit: Option<f64>) -> Result<f64> {
    if let Some(bound) = explicit {
        return Ok(bound);
    }
    match potential {
        Potential::Zero => Ok(0.0),
        Potential::Trace { weight } => Ok(-linalg::singular_values(weight).iter().sum::<f64>()),
        Potential::QuadraticEuclidean { .. } => Err(Error::UnsupportedFamily {
            family: "rn".into(),
            reason: "the Gibbs position marginal is not normalisable against Haar here".into(),
        }),
        Potential::Custom { .. } => Err(Error::InvalidParameter {
            name: "lower_bound",
            reason: "custom potentials need an explicit lower bound for rejection sampling".into(),
        }),
    }
}

/// One exact sample of the Gibbs measure `exp(-beta (Q(m,m)/2 + V(g)))`.
///
/// The momentum marginal is Gaussian with coordinate variance `1/beta`;
/// the position marginal is drawn by rejection: propose Haar, accept
/// with probability `exp(-beta (V(g) - V_min))`.
pub fn gibbs_oracle_sample(
    rng: &mut RngStream,
    beta: f64,
    potential: &Potential,
    basis: &OrthonormalBasis,
    lower_bound: Option<f64>,
) -> Result<PhaseState> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter {
            name: "beta",
            reason: format!("must be positive and finite, found {beta}"),
        });
    }
    let descriptor = basis.descriptor();
    if !descriptor.is_compact() {
        return Err(Error::UnsupportedFamily {
            family: descriptor.to_string(),
            reason: "the Gibbs oracle needs a compact position space".into(),
        });
    }
    let v_min = potential_lower_bound(potential, lower_bound)?;

    let scale = 1.0 / beta.sqrt();
    let mut coords = vec![0.0; basis.dimension()];
    rng.fill_standard_normal(&mut coords);
    for c in coords.iter_mut() {
        *c *= scale;
    }
    let momentum = basis.from_coefficients(&coords)?;

    let mut rejections = 0usize;
    let position = loop {
        let proposal = haar_sample(rng, descriptor)?;
        let log_accept = -beta * (potential.value(&proposal) - v_min);
        if log_accept > 700.0 {
            return Err(Error::InvalidParameter {
                name: "lower_bound",
                reason: "potential dips below the declared lower bound".into(),
            });
        }
        if rng.uniform() < log_accept.exp() {
            break proposal;
        }
        rejections += 1;
        if rejections >= REJECTION_WINDOW {
            return Err(Error::Degenerate(format!(
                "no acceptance in {REJECTION_WINDOW} proposals; the rejection bound is too loose"
            )));
        }
    };
    Ok(PhaseState { position, momentum })
}

/// A batch of independent Gibbs samples.
pub fn gibbs_oracle_samples(
    rng: &mut RngStream,
    beta: f64,
    potential: &Potential,
    basis: &OrthonormalBasis,
    lower_bound: Option<f64>,
    count: usize,
) -> Result<Vec<PhaseState>> {
    (0..count).map(|_| gibbs_oracle_sample(rng, beta, potential, basis, lower_bound)).collect()
}

/// Time average after burn-in, with a batch-means standard error using
/// `floor(sqrt(N))` batches.
pub fn ergodic_average(series: &[f64], burn_in_fraction: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidParameter {
            name: "burn_in_fraction",
            reason: format!("must lie in [0, 1), found {burn_in_fraction}"),
        });
    }
    let start = (series.len() as f64 * burn_in_fraction).ceil() as usize;
    let kept = &series[start.min(series.len())..];
    if kept.len() < 2 {
        return Err(Error::Degenerate(
            "series is empty (or a single point) after burn-in".into(),
        ));
    }
    let mean = kept.iter().sum::<f64>() / kept.len() as f64;
    let batches = (kept.len() as f64).sqrt().floor() as usize;
    if batches < 2 {
        return Ok((mean, 0.0));
    }
    let batch_len = kept.len() / batches;
    let batch_means: Vec<f64> = (0..batches)
        .map(|b| {
            let chunk = &kept[b * batch_len..(b + 1) * batch_len];
            chunk.iter().sum::<f64>() / batch_len as f64
        })
        .collect();
    let grand = batch_means.iter().sum::<f64>() / batches as f64;
    let var = batch_means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (batches as f64 - 1.0);
    Ok((mean, (var / batches as f64).sqrt()))
}

/// Evaluates an observable along the recorded states of a trajectory.
pub fn observable_series(
    record: &TrajectoryRecord,
    observable: &Observable,
    basis: &OrthonormalBasis,
) -> Result<Vec<f64>> {
    (0..record.len())
        .map(|i| {
            let state = record.state_at(i, basis)?;
            Ok(observable.value(&state))
        })
        .collect()
}

/// Compares ergodic trajectory averages against independent oracle
/// samples, one report per observable; `pass` means `|z| <= 3`.
pub fn compare_to_oracle(
    records: &[TrajectoryRecord],
    observables: &[Observable],
    oracle: &[PhaseState],
    basis: &OrthonormalBasis,
    burn_in_fraction: f64,
) -> Result<Vec<MomentReport>> {
    if records.is_empty() || oracle.is_empty() {
        return Err(Error::Degenerate("need at least one trajectory and one oracle sample".into()));
    }
    let mut reports = Vec::with_capacity(observables.len());
    for observable in observables {
        let mut means = Vec::with_capacity(records.len());
        let mut variances = Vec::with_capacity(records.len());
        for record in records {
            let series = observable_series(record, observable, basis)?;
            let (mean, se) = ergodic_average(&series, burn_in_fraction)?;
            means.push(mean);
            variances.push(se * se);
        }
        let k = records.len() as f64;
        let ergodic_mean = means.iter().sum::<f64>() / k;
        let ergodic_se = (variances.iter().sum::<f64>()).sqrt() / k;

        let oracle_values: Vec<f64> = oracle.iter().map(|s| observable.value(s)).collect();
        let (oracle_mean, oracle_se) = mean_and_se(&oracle_values);

        let combined = (ergodic_se * ergodic_se + oracle_se * oracle_se).sqrt();
        let diff = (ergodic_mean - oracle_mean).abs();
        let z_score = if combined > 0.0 {
            diff / combined
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        reports.push(MomentReport {
            observable: observable.name.clone(),
            ergodic_mean,
            ergodic_se,
            oracle_mean,
            oracle_se,
            z_score,
            pass: z_score <= Z_THRESHOLD,
        });
    }
    Ok(reports)
}

/// The default observable suite on a compact group: `Re tr g`,
/// `(Re tr g)^2`, `Q(m, m)`, `Q(m, X_1)`, `Re tr(W^dagger g)`, and
/// `Re tr g * Q(m, m)`, all with analytic derivatives.
pub fn standard_suite(basis: &Arc<OrthonormalBasis>, weight: &Matrix) -> Vec<Observable> {
    let descriptor = basis.descriptor();
    let multiplier = basis
        .metric()
        .effective_multiplier(descriptor)
        .expect("suite lives on compact families");
    let trace_direction = {
        let basis = Arc::clone(basis);
        move |g: &GroupElement| {
            project_to_algebra(&g.matrix().adjoint(), basis.descriptor())
                .expect("adjoint has ambient shape")
                .scale(1.0 / multiplier)
        }
    };

    let zero_m: Arc<dyn Fn(&PhaseState) -> AlgebraElement + Send + Sync> = {
        let basis = Arc::clone(basis);
        Arc::new(move |_: &PhaseState| AlgebraElement::zero(basis.descriptor()))
    };
    let zero_g = Arc::clone(&zero_m);

    let mut suite = Vec::new();

    let dir = trace_direction.clone();
    suite.push(Observable::new(
        "tr_g",
        Arc::new(|s: &PhaseState| s.position.trace_re()),
        Arc::clone(&zero_m),
        Arc::new(move |s: &PhaseState| dir(&s.position)),
    ));

    let dir = trace_direction.clone();
    suite.push(Observable::new(
        "tr_g_sq",
        Arc::new(|s: &PhaseState| {
            let t = s.position.trace_re();
            t * t
        }),
        Arc::clone(&zero_m),
        Arc::new(move |s: &PhaseState| dir(&s.position).scale(2.0 * s.position.trace_re())),
    ));

    {
        let b = Arc::clone(basis);
        suite.push(Observable::new(
            "casimir",
            Arc::new(move |s: &PhaseState| b.pairing(&s.momentum, &s.momentum).unwrap()),
            Arc::new(|s: &PhaseState| s.momentum.scale(2.0)),
            Arc::clone(&zero_g),
        ));
    }

    {
        let b = Arc::clone(basis);
        let b2 = Arc::clone(basis);
        suite.push(Observable::new(
            "m_1",
            Arc::new(move |s: &PhaseState| b.pairing(&s.momentum, b.element(0)).unwrap()),
            Arc::new(move |_s: &PhaseState| b2.element(0).clone()),
            Arc::clone(&zero_g),
        ));
    }

    {
        let w = weight.clone();
        let w2 = weight.clone();
        let b = Arc::clone(basis);
        suite.push(Observable::new(
            "tr_wg",
            Arc::new(move |s: &PhaseState| {
                crate::algebra::re_trace_adjoint_product(&w, s.position.matrix())
            }),
            Arc::clone(&zero_m),
            Arc::new(move |s: &PhaseState| {
                let ambient = s.position.matrix().adjoint() * &w2;
                project_to_algebra(&ambient, b.descriptor())
                    .expect("ambient shape")
                    .scale(1.0 / multiplier)
            }),
        ));
    }

    {
        let b = Arc::clone(basis);
        let b2 = Arc::clone(basis);
        let dir = trace_direction;
        suite.push(Observable::new(
            "tr_g_casimir",
            Arc::new(move |s: &PhaseState| {
                s.position.trace_re() * b.pairing(&s.momentum, &s.momentum).unwrap()
            }),
            Arc::new(|s: &PhaseState| s.momentum.scale(2.0 * s.position.trace_re())),
            Arc::new(move |s: &PhaseState| {
                dir(&s.position).scale(b2.pairing(&s.momentum, &s.momentum).unwrap())
            }),
        ));
    }

    suite
}

/// The drift Hamiltonian `Q(m, m)/2 + V(g)` as an observable.
pub fn drift_hamiltonian_observable(
    potential: &Potential,
    basis: &Arc<OrthonormalBasis>,
) -> Observable {
    let value_potential = potential.clone();
    let grad_potential = potential.clone();
    let b = Arc::clone(basis);
    let b2 = Arc::clone(basis);
    Observable::new(
        "drift_hamiltonian",
        Arc::new(move |s: &PhaseState| {
            0.5 * b.pairing(&s.momentum, &s.momentum).unwrap()
                + value_potential.value(&s.position)
        }),
        Arc::new(|s: &PhaseState| s.momentum.clone()),
        Arc::new(move |s: &PhaseState| {
            crate::mechanics::left_trivialized_gradient(&grad_potential, &s.position, &b2)
                .expect("gradient")
        }),
    )
}

/// The diffusion Hamiltonians of the momentum-noise family,
/// `-sqrt(2 gamma) Re tr(g X_i)`, with their trivialised gradients.
pub fn momentum_noise_hamiltonians(
    gamma: f64,
    basis: &Arc<OrthonormalBasis>,
) -> Vec<Observable> {
    let descriptor = basis.descriptor();
    let multiplier =
        basis.metric().effective_multiplier(descriptor).expect("compact family");
    let amp = (2.0 * gamma).sqrt();
    (0..basis.dimension())
        .map(|i| {
            let b = Arc::clone(basis);
            let b2 = Arc::clone(basis);
            let b3 = Arc::clone(basis);
            Observable::new(
                format!("noise_tr_{i}"),
                Arc::new(move |s: &PhaseState| {
                    -amp * (s.position.matrix() * b.element(i).matrix()).trace().re
                }),
                Arc::new(move |_s: &PhaseState| AlgebraElement::zero(b2.descriptor())),
                Arc::new(move |s: &PhaseState| {
                    let ambient = s.position.matrix().adjoint() * b3.element(i).matrix();
                    project_to_algebra(&ambient, b3.descriptor())
                        .expect("ambient shape")
                        .scale(amp / multiplier)
                }),
            )
        })
        .collect()
}

/// The diffusion Hamiltonians of the position-noise family,
/// `sqrt(2 gamma) Q(m, X_i)`.
pub fn position_noise_hamiltonians(
    gamma: f64,
    basis: &Arc<OrthonormalBasis>,
) -> Vec<Observable> {
    let amp = (2.0 * gamma).sqrt();
    (0..basis.dimension())
        .map(|i| {
            let b = Arc::clone(basis);
            let b2 = Arc::clone(basis);
            let b3 = Arc::clone(basis);
            Observable::new(
                format!("noise_m_{i}"),
                Arc::new(move |s: &PhaseState| amp * b.pairing(&s.momentum, b.element(i)).unwrap()),
                Arc::new(move |_s: &PhaseState| b2.element(i).scale(amp)),
                Arc::new(move |_s: &PhaseState| AlgebraElement::zero(b3.descriptor())),
            )
        })
        .collect()
}

/// Which pieces of the generator to assemble; dropping the
/// double-bracket dissipation must break Gibbs stationarity, which is
/// what the mutation guard checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorParts {
    Full,
    WithoutDoubleBracket,
}

/// Assembles the weak generator applied to `f`:
/// `L f = {f, H_0} + (beta/2) sum_i {H_0, H_i}{H_i, f}
///        + (1/2) sum_i {H_i, {H_i, f}}`,
/// with the inner bracket differentiated numerically for the outer one.
pub fn assemble_generator(
    f: &Observable,
    h0: &Observable,
    diffusion: &[Observable],
    beta: f64,
    basis: &Arc<OrthonormalBasis>,
    parts: GeneratorParts,
) -> impl Fn(&PhaseState) -> Result<f64> + Send + Sync {
    let f = f.clone();
    let h0 = h0.clone();
    let diffusion = diffusion.to_vec();
    let basis = Arc::clone(basis);
    let nested: Vec<Observable> = diffusion
        .iter()
        .map(|h_i| {
            let h_i = h_i.clone();
            let f = f.clone();
            let value_basis = Arc::clone(&basis);
            Observable::with_numeric_derivatives(
                format!("{{{}, {}}}", h_i.name, f.name),
                Arc::new(move |s: &PhaseState| {
                    poisson_bracket(&h_i, &f, s, &value_basis).expect("same descriptor")
                }),
                Arc::clone(&basis),
            )
        })
        .collect();
    move |state: &PhaseState| -> Result<f64> {
        let mut lf = poisson_bracket(&f, &h0, state, &basis)?;
        for (h_i, inner) in diffusion.iter().zip(&nested) {
            if parts == GeneratorParts::Full {
                lf += 0.5
                    * beta
                    * poisson_bracket(&h0, h_i, state, &basis)?
                    * poisson_bracket(h_i, &f, state, &basis)?;
            }
            lf += 0.5 * poisson_bracket(h_i, inner, state, &basis)?;
        }
        Ok(lf)
    }
}

/// Monte-Carlo test of `E_Gibbs[L f] = 0` for every observable in the
/// suite, with the diffusion Hamiltonians of the selected rates
/// (`gamma1` drives the momentum-noise family, `gamma2` the
/// position-noise family).
#[allow(clippy::too_many_arguments)]
pub fn generator_stationarity(
    beta: f64,
    gamma1: f64,
    gamma2: f64,
    potential: &Potential,
    observables: &[Observable],
    oracle: &[PhaseState],
    basis: &Arc<OrthonormalBasis>,
    parts: GeneratorParts,
) -> Result<Vec<StationarityReport>> {
    if oracle.is_empty() {
        return Err(Error::Degenerate("need oracle samples".into()));
    }
    let h0 = drift_hamiltonian_observable(potential, basis);
    let mut diffusion = Vec::new();
    if gamma1 > 0.0 {
        diffusion.extend(momentum_noise_hamiltonians(gamma1, basis));
    }
    if gamma2 > 0.0 {
        diffusion.extend(position_noise_hamiltonians(gamma2, basis));
    }
    let mut reports = Vec::with_capacity(observables.len());
    for f in observables {
        let generator = assemble_generator(f, &h0, &diffusion, beta, basis, parts);
        let values: Vec<f64> =
            oracle.par_iter().map(|s| generator(s)).collect::<Result<Vec<f64>>>()?;
        let (mean, se) = mean_and_se(&values);
        let z_score = if se > 0.0 {
            mean.abs() / se
        } else if mean == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        reports.push(StationarityReport {
            observable: f.name.clone(),
            mean,
            se,
            z_score,
            pass: z_score <= Z_THRESHOLD,
        });
    }
    Ok(reports)
}

/// Energy, Casimir, spectrum, and defect drift over a recorded
/// trajectory. Thresholds are the caller's business; this just measures.
pub fn conservation_monitors(
    record: &TrajectoryRecord,
    basis: &OrthonormalBasis,
) -> Result<ConservationReport> {
    if record.is_empty() {
        return Err(Error::Degenerate("empty trajectory record".into()));
    }
    let drift = |series: &[f64]| -> (f64, f64) {
        let first = series[0];
        let max = series.iter().map(|v| (v - first).abs()).fold(0.0, f64::max);
        let terminal = (series.last().unwrap() - first).abs();
        (max, terminal)
    };
    let (energy_drift_max, energy_drift_terminal) = drift(&record.energies);
    let (casimir_drift_max, casimir_drift_terminal) = drift(&record.casimirs);
    let defect_max = record.defects.iter().copied().fold(0.0, f64::max);

    let spectrum_drift_max = if basis.descriptor().family == Family::Euclidean {
        0.0
    } else {
        let spectrum_of = |coefficients: &[f64]| -> Result<Vec<f64>> {
            let m = basis.from_coefficients(coefficients)?;
            // i m is Hermitian for skew-adjoint m.
            Ok(linalg::hermitian_eigenvalues(&(m.matrix() * Scalar::new(0.0, 1.0))))
        };
        let reference = spectrum_of(&record.momentum_coefficients[0])?;
        let mut worst: f64 = 0.0;
        for coefficients in record.momentum_coefficients.iter().skip(1) {
            let spectrum = spectrum_of(coefficients)?;
            for (a, b) in reference.iter().zip(&spectrum) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    };

    Ok(ConservationReport {
        energy_drift_max,
        energy_drift_terminal,
        casimir_drift_max,
        casimir_drift_terminal,
        spectrum_drift_max,
        defect_max,
    })
}

/// Integrated autocorrelation time by the initial-positive-sequence
/// truncation, and the effective sample size `N / (1 + 2 tau)`.
pub fn autocorrelation_ess(series: &[f64]) -> Result<AutocorrelationReport> {
    let n = series.len();
    if n < 4 {
        return Err(Error::Degenerate("need at least 4 points".into()));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocovariance = |lag: usize| -> f64 {
        let mut sum = 0.0;
        for i in 0..(n - lag) {
            sum += centered[i] * centered[i + lag];
        }
        sum / n as f64
    };
    let gamma0 = autocovariance(0);
    if gamma0 <= 1e-300 {
        return Err(Error::Degenerate("constant series has no autocorrelation time".into()));
    }
    let mut tau = 0.0;
    let mut lag = 1usize;
    while lag + 1 < n {
        let pair = autocovariance(lag) + autocovariance(lag + 1);
        if pair <= 0.0 {
            break;
        }
        tau += pair / gamma0;
        lag += 2;
    }
    let ess = n as f64 / (1.0 + 2.0 * tau);
    Ok(AutocorrelationReport { tau, ess })
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn two_sample_ks(xs: &[f64], ys: &[f64]) -> f64 {
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    a.sort_by(|p, q| p.partial_cmp(q).unwrap());
    b.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (n, m) = (a.len(), b.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        let fa = i as f64 / n as f64;
        let fb = j as f64 / m as f64;
        d = d.max((fa - fb).abs());
    }
    d
}

/// Large-sample two-sided critical value of the two-sample KS statistic
/// at level `alpha`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
