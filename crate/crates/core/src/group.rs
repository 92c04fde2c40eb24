//! Group-level operations: exponential, composition, reprojection,
//! geodesics, Haar sampling, and the explicit Riemannian Brownian motion.
//!
//! Group elements carry the descriptor of their Lie algebra. For the
//! compact families these are orthogonal/special-unitary matrices; for
//! the abelian family the "group element" is the translation vector
//! itself and composition is addition.

use crate::algebra::{
    sample_algebra_gaussian, AlgebraDescriptor, AlgebraElement, Family, OrthonormalBasis,
};
use crate::linalg::{self, Matrix, Scalar};
use crate::rng::RngStream;
use crate::{Error, Result};

/// Group defect above which [`reproject`] refuses to guess.
const REPROJECT_LIMIT: f64 = 0.1;

/// An element of the Lie group associated with an [`AlgebraDescriptor`].
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    matrix: Matrix,
    descriptor: AlgebraDescriptor,
}

impl GroupElement {
    /// Validating constructor; rejects matrices off the group.
    pub fn new(matrix: Matrix, descriptor: AlgebraDescriptor) -> Result<Self> {
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let shape = descriptor.matrix_shape();
        if (matrix.nrows(), matrix.ncols()) != shape {
            return Err(Error::InvalidParameter {
                name: "matrix",
                reason: format!(
                    "expected shape {:?} for {descriptor}, found {:?}",
                    shape,
                    (matrix.nrows(), matrix.ncols())
                ),
            });
        }
        let element = Self { matrix, descriptor };
        let defect = group_defect(&element);
        if defect > 1e-8 {
            return Err(Error::OffGroup { defect, limit: 1e-8 });
        }
        Ok(element)
    }

    pub(crate) fn from_parts_unchecked(matrix: Matrix, descriptor: AlgebraDescriptor) -> Self {
        Self { matrix, descriptor }
    }

    /// The group identity: the identity matrix, or the zero translation.
    pub fn identity(descriptor: AlgebraDescriptor) -> Self {
        let matrix = match descriptor.family {
            Family::Euclidean => Matrix::zeros(descriptor.ambient, 1),
            _ => Matrix::identity(descriptor.ambient, descriptor.ambient),
        };
        Self { matrix, descriptor }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn descriptor(&self) -> AlgebraDescriptor {
        self.descriptor
    }

    /// `Re tr(g)`, the natural scalar observable on the compact families.
    pub fn trace_re(&self) -> f64 {
        self.matrix.trace().re
    }
}

/// The Lie exponential. For the matrix families this is the matrix
/// exponential by fixed-order scaling and squaring; the abelian family
/// exponentiates to the vector itself.
pub fn exp_algebra(x: &AlgebraElement) -> Result<GroupElement> {
    if !linalg::is_finite(x.matrix()) {
        return Err(Error::NonFinite);
    }
    let matrix = match x.descriptor().family {
        Family::Euclidean => x.matrix().clone(),
        _ => linalg::expm(x.matrix()),
    };
    Ok(GroupElement::from_parts_unchecked(matrix, x.descriptor()))
}

/// Left composition `g h` (vector addition for the abelian family).
pub fn compose(g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
    g.descriptor.check_same(&h.descriptor)?;
    let matrix = match g.descriptor.family {
        Family::Euclidean => &g.matrix + &h.matrix,
        _ => &g.matrix * &h.matrix,
    };
    Ok(GroupElement::from_parts_unchecked(matrix, g.descriptor))
}

/// The group inverse: transpose / conjugate transpose / negation.
pub fn inverse(g: &GroupElement) -> GroupElement {
    let matrix = match g.descriptor.family {
        Family::SpecialOrthogonal => g.matrix.transpose(),
        Family::SpecialUnitary => g.matrix.adjoint(),
        Family::Euclidean => -&g.matrix,
    };
    GroupElement::from_parts_unchecked(matrix, g.descriptor)
}

/// Distance from the group: `||g^dagger g - I||_F` plus the deviation of
/// the determinant phase from one. The phase term is what distinguishes
/// the wrong orthogonal component (`det = -1`) and a drifted `su(n)`
/// determinant; for matrices that are exactly orthogonal/unitary with
/// unit determinant phase the defect is zero.
pub fn group_defect(g: &GroupElement) -> f64 {
    match g.descriptor.family {
        Family::Euclidean => 0.0,
        _ => {
            let n = g.descriptor.ambient;
            let gram = g.matrix.adjoint() * &g.matrix;
            let orth = linalg::frobenius_norm(&(&gram - Matrix::identity(n, n)));
            let det = g.matrix.determinant();
            let phase_defect = if det.norm() == 0.0 {
                2.0
            } else {
                (det / Scalar::new(det.norm(), 0.0) - Scalar::new(1.0, 0.0)).norm()
            };
            orth + phase_defect
        }
    }
}

/// Projects a near-group matrix back onto the group: the unitary polar
/// factor (the metric-nearest group point), with the `su(n)` determinant
/// phase divided out. Inputs with defect above 0.1 are rejected.
pub fn reproject(g: &GroupElement) -> Result<GroupElement> {
    if !linalg::is_finite(&g.matrix) {
        return Err(Error::NonFinite);
    }
    if g.descriptor.family == Family::Euclidean {
        return Ok(GroupElement::from_parts_unchecked(
            g.matrix.map(|z| Scalar::new(z.re, 0.0)),
            g.descriptor,
        ));
    }
    let defect = group_defect(g);
    if defect > REPROJECT_LIMIT {
        return Err(Error::OffGroup { defect, limit: REPROJECT_LIMIT });
    }
    let mut polar = linalg::unitary_polar_factor(&g.matrix)
        .ok_or_else(|| Error::Degenerate("polar iteration failed to converge".into()))?;
    match g.descriptor.family {
        Family::SpecialOrthogonal => {
            // Real part only; the polar factor of a near-rotation with
            // positive determinant is already special orthogonal.
            polar = polar.map(|z| Scalar::new(z.re, 0.0));
        }
        Family::SpecialUnitary => {
            let det = polar.determinant();
            let phase = det.arg() / g.descriptor.ambient as f64;
            polar *= Scalar::new(phase.cos(), -phase.sin());
        }
        Family::Euclidean => unreachable!(),
    }
    Ok(GroupElement::from_parts_unchecked(polar, g.descriptor))
}

/// The geodesic of the bi-invariant metric through `g0` with
/// left-trivialised velocity `x`: `g0 exp(t x)`.
pub fn geodesic(g0: &GroupElement, x: &AlgebraElement, t: f64) -> Result<GroupElement> {
    g0.descriptor.check_same(&x.descriptor())?;
    compose(g0, &exp_algebra(&x.scale(t))?)
}

/// A Haar-distributed element of a compact group, by QR of a Gaussian
/// matrix with the diagonal sign/phase correction. `SO(n)` fixes the
/// determinant to `+1` by flipping the last column when needed; `SU(n)`
/// divides out the determinant phase.
pub fn haar_sample(rng: &mut RngStream, descriptor: AlgebraDescriptor) -> Result<GroupElement> {
    let n = descriptor.ambient;
    let complex_entries = match descriptor.family {
        Family::SpecialOrthogonal => false,
        Family::SpecialUnitary => true,
        Family::Euclidean => {
            return Err(Error::UnsupportedFamily {
                family: descriptor.to_string(),
                reason: "R^n carries no normalisable Haar measure".into(),
            })
        }
    };
    // Row-major fill; real part then imaginary part for complex entries.
    let mut gauss = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = rng.standard_normal();
            let im = if complex_entries { rng.standard_normal() } else { 0.0 };
            gauss[(i, j)] = Scalar::new(re, im);
        }
    }
    let qr = gauss.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fix the gauge: make the R diagonal positive so Q is Haar.
    for j in 0..n {
        let d = r[(j, j)];
        if d.norm() == 0.0 {
            return Err(Error::Degenerate("singular Gaussian proposal in Haar sampling".into()));
        }
        let phase = d / Scalar::new(d.norm(), 0.0);
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    if descriptor.family == Family::SpecialOrthogonal {
        q = q.map(|z| Scalar::new(z.re, 0.0));
        if q.determinant().re < 0.0 {
            for i in 0..n {
                q[(i, n - 1)] = -q[(i, n - 1)];
            }
        }
    } else {
        let det = q.determinant();
        let phase = det.arg() / n as f64;
        q *= Scalar::new(phase.cos(), -phase.sin());
    }
    Ok(GroupElement::from_parts_unchecked(q, descriptor))
}

/// One strong Euler-exponential step of the left-trivialised Riemannian
/// Brownian motion: `g <- g exp(sqrt(h) * sum_i xi_i X_i)`.
///
/// The Gaussian block is drawn even when `h = 0` so the stream layout
/// does not depend on the step size.
pub fn rbm_step(
    g: &GroupElement,
    h: f64,
    rng: &mut RngStream,
    basis: &OrthonormalBasis,
) -> Result<GroupElement> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("step size must be finite and non-negative, found {h}"),
        });
    }
    g.descriptor.check_same(&basis.descriptor())?;
    let increment = sample_algebra_gaussian(rng, basis).scale(h.sqrt());
    compose(g, &exp_algebra(&increment)?)
}

/// Iterates [`rbm_step`], reprojecting every `reproject_every` steps, and
/// records `(t, g)` every `record_every` steps (plus the endpoint).
pub fn rbm_path(
    g0: &GroupElement,
    horizon: f64,
    h: f64,
    rng: &mut RngStream,
    basis: &OrthonormalBasis,
    record_every: usize,
    reproject_every: usize,
) -> Result<Vec<(f64, GroupElement)>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h",
            reason: format!("step size must be positive, found {h}"),
        });
    }
    if !(horizon >= 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidParameter {
            name: "horizon",
            reason: format!("horizon must be non-negative, found {horizon}"),
        });
    }
    let record_every = record_every.max(1);
    let steps = (horizon / h).round() as usize;
    let mut g = g0.clone();
    let mut path = Vec::with_capacity(steps / record_every + 2);
    path.push((0.0, g.clone()));
    for step in 1..=steps {
        g = rbm_step(&g, h, rng, basis)?;
        if reproject_every > 0 && step % reproject_every == 0 {
            g = reproject(&g)?;
        }
        if step % record_every == 0 || step == steps {
            path.push((step as f64 * h, g.clone()));
        }
    }
    Ok(path)
}
