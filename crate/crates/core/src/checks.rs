//! The structural verification suite: executable forms of the algebraic
//! and geometric identities behind the integrators, grouped per
//! descriptor. The CLI `check` command and the acceptance tests both run
//! this.

use crate::algebra::{
    adjoint_matrix, build_basis, curvature_tensor, killing_form, killing_matrix,
    project_to_algebra, ricci, ricci_from_curvature_trace, sample_algebra_gaussian,
    structure_constants, AlgebraDescriptor, BiInvariantMetric, Family, OrthonormalBasis,
};
use crate::group::{
    compose, exp_algebra, geodesic, group_defect, haar_sample, inverse, reproject, GroupElement,
};
use crate::linalg::{self, Matrix, Scalar};
use crate::mechanics::{
    hamiltonian_drift, poisson_bracket, symplectic_drift_step, total_energy, DriftHamiltonian,
    Observable, PhaseState,
};
use crate::rng::RngStream;
use crate::Result;
use serde::Serialize;
use std::sync::Arc;

/// Result of one named group of structural checks.
#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub descriptor: String,
    pub group: String,
    pub worst_defect: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn record(descriptor: AlgebraDescriptor, group: &str, worst: f64, tolerance: f64) -> Self {
        Self {
            descriptor: descriptor.to_string(),
            group: group.to_string(),
            worst_defect: worst,
            tolerance,
            passed: worst <= tolerance,
        }
    }
}

/// The descriptors exercised by default.
pub fn default_descriptors() -> Vec<AlgebraDescriptor> {
    vec![
        AlgebraDescriptor::special_orthogonal(3).unwrap(),
        AlgebraDescriptor::special_orthogonal(5).unwrap(),
        AlgebraDescriptor::special_unitary(2).unwrap(),
        AlgebraDescriptor::special_unitary(3).unwrap(),
        AlgebraDescriptor::euclidean(4).unwrap(),
    ]
}

fn random_group_point(
    rng: &mut RngStream,
    basis: &OrthonormalBasis,
) -> Result<GroupElement> {
    if basis.descriptor().is_compact() {
        haar_sample(rng, basis.descriptor())
    } else {
        exp_algebra(&sample_algebra_gaussian(rng, basis))
    }
}

/// Basis construction: orthonormality and span reconstruction.
fn check_basis(basis: &OrthonormalBasis, rng: &mut RngStream) -> Result<CheckOutcome> {
    let d = basis.dimension();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let q = basis.pairing(basis.element(i), basis.element(j))?;
            let expected = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((q - expected).abs());
        }
    }
    for _ in 0..10 {
        let x = sample_algebra_gaussian(rng, basis);
        let rebuilt = basis.from_coefficients(&basis.coefficients(&x)?)?;
        let err = x.sub(&rebuilt)?.norm_frobenius() / x.norm_frobenius().max(1.0);
        // Span reconstruction carries a looser budget than orthonormality.
        worst = worst.max(err * 1e-2);
    }
    Ok(CheckOutcome::record(basis.descriptor(), "basis", worst, 1e-12))
}

/// The quadratic-algebra identities: ad-invariance of the metric,
/// skew-adjointness of ad, full antisymmetry of the structure constants,
/// and the Jacobi identity.
fn check_quadratic_structure(
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<CheckOutcome> {
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let x = sample_algebra_gaussian(rng, basis);
        let y = sample_algebra_gaussian(rng, basis);
        let z = sample_algebra_gaussian(rng, basis);
        let lhs = basis.pairing(&x.bracket(&y)?, &z)?;
        let rhs = basis.pairing(&y, &x.bracket(&z)?)?;
        let scale = (x.norm_frobenius() * y.norm_frobenius() * z.norm_frobenius()).max(1.0);
        worst = worst.max((lhs + rhs).abs() / scale);
    }
    for _ in 0..20 {
        let x = sample_algebra_gaussian(rng, basis);
        let ad = adjoint_matrix(basis, &x)?;
        let skew = (&ad + ad.transpose()).norm() / x.norm_frobenius().max(1.0);
        worst = worst.max(skew);
    }
    let c = structure_constants(basis)?;
    let d = basis.dimension();
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                worst = worst.max((c.get(k, i, j) + c.get(k, j, i)).abs());
                worst = worst.max((c.get(k, i, j) + c.get(j, i, k)).abs());
            }
        }
    }
    worst = worst.max(c.jacobi_defect() * 1e-1);
    Ok(CheckOutcome::record(basis.descriptor(), "quadratic-structure", worst, 1e-10))
}

/// Killing form and curvature: the trace closed form, definiteness, the
/// Ricci cross-check, and non-negative sectional curvature.
fn check_killing_curvature(
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<CheckOutcome> {
    let descriptor = basis.descriptor();
    let mut worst: f64 = 0.0;
    let closed_form_factor = match descriptor.family {
        Family::SpecialOrthogonal if descriptor.ambient >= 3 => {
            Some(descriptor.ambient as f64 - 2.0)
        }
        Family::SpecialUnitary => Some(2.0 * descriptor.ambient as f64),
        _ => None,
    };
    for _ in 0..20 {
        let x = sample_algebra_gaussian(rng, basis);
        let y = sample_algebra_gaussian(rng, basis);
        let kappa = killing_form(basis, &x, &y)?;
        let scale = (x.norm_frobenius() * y.norm_frobenius()).max(1.0);
        if let Some(factor) = closed_form_factor {
            let closed = factor * (x.matrix() * y.matrix()).trace().re;
            worst = worst.max((kappa - closed).abs() / scale);
        } else {
            worst = worst.max(kappa.abs() / scale);
        }
        let direct = ricci(basis, &x, &y)?;
        let traced = ricci_from_curvature_trace(basis, &x, &y)?;
        worst = worst.max((direct - traced).abs() / scale);
        let sec = basis.pairing(&curvature_tensor(&x, &y, &y)?, &x)?;
        worst = worst.max((-sec).max(0.0) / scale);
    }
    if descriptor.is_compact() {
        let km = killing_matrix(basis)?;
        let hermitian = Matrix::from_fn(km.nrows(), km.ncols(), |i, j| {
            Scalar::new(km[(i, j)], 0.0)
        });
        for eig in linalg::hermitian_eigenvalues(&hermitian) {
            // Negative definiteness on the compact families.
            if eig >= -1e-8 {
                worst = worst.max(1.0);
            }
        }
    }
    Ok(CheckOutcome::record(descriptor, "killing-curvature", worst, 1e-10))
}

/// Exponential and group structure: membership, inverses, the adjoint
/// identity `Ad(exp X) = exp(ad_X)`, and geodesic additivity.
fn check_exponential_group(
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<CheckOutcome> {
    let descriptor = basis.descriptor();
    let id = GroupElement::identity(descriptor);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let x = sample_algebra_gaussian(rng, basis);
        let g = exp_algebra(&x)?;
        worst = worst.max(group_defect(&g) * 1e-2);
        let round = compose(&g, &exp_algebra(&x.scale(-1.0))?)?;
        worst = worst.max(linalg::frobenius_norm(&(round.matrix() - id.matrix())) * 1e-2);
        let gg = compose(&g, &inverse(&g))?;
        worst = worst.max(linalg::frobenius_norm(&(gg.matrix() - id.matrix())) * 1e-2);

        let (s, t) = (0.3, 0.5);
        let joint = geodesic(&id, &x, s + t)?;
        let split = compose(&geodesic(&id, &x, s)?, &geodesic(&id, &x, t)?)?;
        worst =
            worst.max(linalg::frobenius_norm(&(joint.matrix() - split.matrix())) * 1e-2);
    }
    if !descriptor.is_abelian() {
        for _ in 0..5 {
            let x = sample_algebra_gaussian(rng, basis);
            let y = sample_algebra_gaussian(rng, basis);
            let g = exp_algebra(&x)?;
            let conj = g.matrix() * y.matrix() * inverse(&g).matrix();
            let ad = adjoint_matrix(basis, &x)?;
            let ad_c =
                Matrix::from_fn(ad.nrows(), ad.ncols(), |i, j| Scalar::new(ad[(i, j)], 0.0));
            let ead = linalg::expm(&ad_c);
            let y_coeff = basis.coefficients(&y)?;
            let mut mapped = vec![0.0; y_coeff.len()];
            for (k, slot) in mapped.iter_mut().enumerate() {
                for (i, c) in y_coeff.iter().enumerate() {
                    *slot += ead[(k, i)].re * c;
                }
            }
            let rebuilt = basis.from_coefficients(&mapped)?;
            let err = linalg::frobenius_norm(&(&conj - rebuilt.matrix()))
                / y.norm_frobenius().max(1.0);
            worst = worst.max(err * 1e-2);
        }
    }
    Ok(CheckOutcome::record(descriptor, "exponential-group", worst, 1e-10))
}

/// Projection and reprojection: idempotence, the orthogonality of the
/// algebra projection, polar repair of perturbed group points, and Haar
/// membership on the compact families.
fn check_projection_reprojection(
    basis: &OrthonormalBasis,
    rng: &mut RngStream,
) -> Result<CheckOutcome> {
    let descriptor = basis.descriptor();
    let (rows, cols) = descriptor.matrix_shape();
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let raw = Matrix::from_fn(rows, cols, |_, _| {
            Scalar::new(rng.standard_normal(), rng.standard_normal())
        });
        let p = project_to_algebra(&raw, descriptor)?;
        worst = worst.max(p.membership_defect());
        let pp = project_to_algebra(p.matrix(), descriptor)?;
        worst = worst.max(p.sub(&pp)?.norm_frobenius());
        for y in basis.elements() {
            let lhs = crate::algebra::re_trace_adjoint_product(p.matrix(), y.matrix());
            let rhs = crate::algebra::re_trace_adjoint_product(&raw, y.matrix());
            worst = worst.max((lhs - rhs).abs());
        }
    }
    for _ in 0..10 {
        let g = random_group_point(rng, basis)?;
        let clean = reproject(&g)?;
        worst = worst.max(group_defect(&clean));
        if descriptor.is_compact() {
            let noise = Matrix::from_fn(rows, cols, |_, _| {
                Scalar::new(1e-6 * rng.standard_normal(), 0.0)
            });
            let dirty = GroupElement::new((g.matrix() + noise).clone(), descriptor)
                .unwrap_or_else(|_| clean.clone());
            let repaired = reproject(&dirty)?;
            worst = worst.max(group_defect(&repaired));
        }
    }
    if descriptor.is_compact() {
        for _ in 0..20 {
            let g = haar_sample(rng, descriptor)?;
            worst = worst.max(group_defect(&g));
        }
    }
    Ok(CheckOutcome::record(descriptor, "projection-reprojection", worst, 1e-11))
}

/// Mechanics sanity: bracket antisymmetry, derivative consistency, and
/// exact conservation of the free flow.
fn check_mechanics(basis_arc: &Arc<OrthonormalBasis>, rng: &mut RngStream) -> Result<CheckOutcome> {
    let basis = basis_arc.as_ref();
    let descriptor = basis.descriptor();
    let mut worst: f64 = 0.0;

    let casimir = {
        let b = Arc::clone(basis_arc);
        let b2 = Arc::clone(basis_arc);
        Observable::new(
            "casimir",
            Arc::new(move |s: &PhaseState| b.pairing(&s.momentum, &s.momentum).unwrap()),
            Arc::new(|s: &PhaseState| s.momentum.scale(2.0)),
            Arc::new(move |_s: &PhaseState| crate::algebra::AlgebraElement::zero(b2.descriptor())),
        )
    };
    let coordinate = {
        let b = Arc::clone(basis_arc);
        let b2 = Arc::clone(basis_arc);
        let b3 = Arc::clone(basis_arc);
        Observable::new(
            "m_0",
            Arc::new(move |s: &PhaseState| b.pairing(&s.momentum, b.element(0)).unwrap()),
            Arc::new(move |_s: &PhaseState| b2.element(0).clone()),
            Arc::new(move |_s: &PhaseState| crate::algebra::AlgebraElement::zero(b3.descriptor())),
        )
    };
    for _ in 0..10 {
        let state = PhaseState {
            position: random_group_point(rng, basis)?,
            momentum: sample_algebra_gaussian(rng, basis),
        };
        let ab = poisson_bracket(&casimir, &coordinate, &state, basis)?;
        let ba = poisson_bracket(&coordinate, &casimir, &state, basis)?;
        worst = worst.max((ab + ba).abs());
        worst = worst.max(
            crate::mechanics::observable_derivative_defect(&casimir, &state, basis)? * 1e-6,
        );
    }

    let free = DriftHamiltonian::free();
    let mut state = PhaseState {
        position: random_group_point(rng, basis)?,
        momentum: sample_algebra_gaussian(rng, basis),
    };
    let e0 = total_energy(&free, basis, &state)?;
    let (dm, _) = hamiltonian_drift(&free, &state, basis)?;
    worst = worst.max(dm.norm_frobenius());
    for _ in 0..50 {
        state = symplectic_drift_step(&free, &state, 0.02, basis)?;
    }
    worst = worst.max((total_energy(&free, basis, &state)? - e0).abs());
    Ok(CheckOutcome::record(descriptor, "mechanics", worst, 1e-10))
}

/// Runs every check group for one descriptor.
pub fn structural_checks(descriptor: AlgebraDescriptor, seed: u64) -> Result<Vec<CheckOutcome>> {
    let metric = BiInvariantMetric::frobenius(1.0)?;
    let basis = Arc::new(build_basis(descriptor, metric)?);
    let mut rng = RngStream::new(seed, 0);
    Ok(vec![
        check_basis(&basis, &mut rng)?,
        check_quadratic_structure(&basis, &mut rng)?,
        check_killing_curvature(&basis, &mut rng)?,
        check_exponential_group(&basis, &mut rng)?,
        check_projection_reprojection(&basis, &mut rng)?,
        check_mechanics(&basis, &mut rng)?,
    ])
}

/// Runs the suite over the default descriptors.
pub fn structural_checks_all(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::new();
    for descriptor in default_descriptors() {
        outcomes.extend(structural_checks(descriptor, seed)?);
    }
    Ok(outcomes)
}
