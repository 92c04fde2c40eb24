//! Reductive matrix Lie algebras with bi-invariant metrics.
//!
//! Three families are supported: the skew-symmetric algebras `so(n)`, the
//! skew-Hermitian traceless algebras `su(n)`, and the abelian translation
//! algebra of `R^n` (stored as column vectors with a trivial bracket).
//! The module provides orthonormal bases built from canonical generators
//! by Gram-Schmidt, structure constants, the Killing form assembled from
//! adjoint matrices, the curvature identities of the bi-invariant
//! connection, and Gaussian sampling in the algebra.

use crate::linalg::{self, Matrix, Scalar};
use crate::rng::RngStream;
use crate::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// The supported families of reductive matrix Lie algebras.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// Skew-symmetric real matrices, the algebra of SO(n).
    SpecialOrthogonal,
    /// Skew-Hermitian traceless matrices, the algebra of SU(n).
    SpecialUnitary,
    /// The abelian translation algebra of R^n.
    Euclidean,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::SpecialOrthogonal => write!(f, "so"),
            Family::SpecialUnitary => write!(f, "su"),
            Family::Euclidean => write!(f, "rn"),
        }
    }
}

/// Identifies one concrete algebra: a family plus its ambient size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AlgebraDescriptor {
    pub family: Family,
    pub ambient: usize,
}

impl AlgebraDescriptor {
    pub fn special_orthogonal(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "ambient",
                reason: format!("so({n}) is degenerate; ambient size must be at least 2"),
            });
        }
        Ok(Self { family: Family::SpecialOrthogonal, ambient: n })
    }

    pub fn special_unitary(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidParameter {
                name: "ambient",
                reason: format!("su({n}) is degenerate; ambient size must be at least 2"),
            });
        }
        Ok(Self { family: Family::SpecialUnitary, ambient: n })
    }

    pub fn euclidean(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter {
                name: "ambient",
                reason: "the translation algebra needs at least one coordinate".into(),
            });
        }
        Ok(Self { family: Family::Euclidean, ambient: n })
    }

    /// Dimension of the algebra as a real vector space.
    pub fn dimension(&self) -> usize {
        let n = self.ambient;
        match self.family {
            Family::SpecialOrthogonal => n * (n - 1) / 2,
            Family::SpecialUnitary => n * n - 1,
            Family::Euclidean => n,
        }
    }

    /// Whether the corresponding group is compact (`so`/`su` families).
    pub fn is_compact(&self) -> bool {
        !matches!(self.family, Family::Euclidean)
    }

    /// Whether the bracket vanishes identically.
    pub fn is_abelian(&self) -> bool {
        matches!(self.family, Family::Euclidean)
            || (self.family == Family::SpecialOrthogonal && self.ambient == 2)
    }

    /// Storage shape: `n x n` matrices, or `n x 1` columns for `R^n`.
    pub fn matrix_shape(&self) -> (usize, usize) {
        match self.family {
            Family::Euclidean => (self.ambient, 1),
            _ => (self.ambient, self.ambient),
        }
    }

    pub(crate) fn check_same(&self, other: &Self) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch { expected: self.to_string(), found: other.to_string() })
        }
    }
}

impl fmt::Display for AlgebraDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            Family::Euclidean => write!(f, "rn:{}", self.ambient),
            _ => write!(f, "{}{}", self.family, self.ambient),
        }
    }
}

impl FromStr for AlgebraDescriptor {
    type Err = Error;

    /// Parses `"so3"`, `"su2"`, `"rn:4"`, and friends.
    fn from_str(s: &str) -> Result<Self> {
        let invalid = |reason: String| Error::InvalidParameter { name: "group", reason };
        if let Some(rest) = s.strip_prefix("rn:") {
            let n: usize = rest
                .parse()
                .map_err(|_| invalid(format!("cannot parse `{s}` as a group descriptor")))?;
            return AlgebraDescriptor::euclidean(n);
        }
        if let Some(rest) = s.strip_prefix("so") {
            let n: usize = rest
                .parse()
                .map_err(|_| invalid(format!("cannot parse `{s}` as a group descriptor")))?;
            return AlgebraDescriptor::special_orthogonal(n);
        }
        if let Some(rest) = s.strip_prefix("su") {
            let n: usize = rest
                .parse()
                .map_err(|_| invalid(format!("cannot parse `{s}` as a group descriptor")))?;
            return AlgebraDescriptor::special_unitary(n);
        }
        Err(invalid(format!("unknown group descriptor `{s}`; expected so<n>, su<n>, or rn:<n>")))
    }
}

/// An element of a Lie algebra: a matrix tagged with its descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    matrix: Matrix,
    descriptor: AlgebraDescriptor,
}

impl AlgebraElement {
    /// Validating constructor; rejects matrices outside the algebra.
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
        let defect = element.membership_defect();
        let tolerance = 1e-12 * element.norm_frobenius().max(1.0);
        if defect > tolerance {
            return Err(Error::OffAlgebra { defect, tolerance });
        }
        Ok(element)
    }

    /// Constructor for matrices already known to lie in the algebra.
    pub(crate) fn from_parts_unchecked(matrix: Matrix, descriptor: AlgebraDescriptor) -> Self {
        Self { matrix, descriptor }
    }

    pub fn zero(descriptor: AlgebraDescriptor) -> Self {
        let (r, c) = descriptor.matrix_shape();
        Self { matrix: Matrix::zeros(r, c), descriptor }
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn descriptor(&self) -> AlgebraDescriptor {
        self.descriptor
    }

    pub fn norm_frobenius(&self) -> f64 {
        linalg::frobenius_norm(&self.matrix)
    }

    /// Distance from the defining relations of the family: the
    /// skew-symmetry/skew-Hermitian residual, the trace residual for
    /// `su(n)`, and the imaginary residual for the real families.
    pub fn membership_defect(&self) -> f64 {
        match self.descriptor.family {
            Family::SpecialOrthogonal => {
                let sym = linalg::frobenius_norm(&(&self.matrix + self.matrix.transpose()));
                let imag: f64 = self.matrix.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
                sym + imag
            }
            Family::SpecialUnitary => {
                let herm = linalg::frobenius_norm(&(&self.matrix + self.matrix.adjoint()));
                herm + self.matrix.trace().norm()
            }
            Family::Euclidean => self.matrix.iter().map(|z| z.im * z.im).sum::<f64>().sqrt(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            matrix: &self.matrix * Scalar::new(factor, 0.0),
            descriptor: self.descriptor,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.descriptor.check_same(&other.descriptor)?;
        Ok(Self { matrix: &self.matrix + &other.matrix, descriptor: self.descriptor })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.descriptor.check_same(&other.descriptor)?;
        Ok(Self { matrix: &self.matrix - &other.matrix, descriptor: self.descriptor })
    }

    /// The Lie bracket `[X, Y] = XY - YX`; zero for the abelian family.
    pub fn bracket(&self, other: &Self) -> Result<Self> {
        self.descriptor.check_same(&other.descriptor)?;
        Ok(Self {
            matrix: commutator(&self.matrix, &other.matrix, self.descriptor),
            descriptor: self.descriptor,
        })
    }
}

pub(crate) fn commutator(x: &Matrix, y: &Matrix, descriptor: AlgebraDescriptor) -> Matrix {
    if descriptor.family == Family::Euclidean {
        Matrix::zeros(descriptor.ambient, 1)
    } else {
        x * y - y * x
    }
}

/// Bi-invariant metric kinds. Frobenius is `scale * Re tr(X^dagger Y)`;
/// the negative-Killing option rescales it by the family constant that
/// relates the Killing form to the trace form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricKind {
    Frobenius,
    NegativeKilling,
}

/// A bi-invariant metric `Q` on the algebra.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiInvariantMetric {
    pub kind: MetricKind,
    pub scale: f64,
}

impl BiInvariantMetric {
    pub fn frobenius(scale: f64) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: "metric scale must be positive and finite".into(),
            });
        }
        Ok(Self { kind: MetricKind::Frobenius, scale })
    }

    pub fn negative_killing(scale: f64) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: "metric scale must be positive and finite".into(),
            });
        }
        Ok(Self { kind: MetricKind::NegativeKilling, scale })
    }

    /// The effective multiplier in front of `Re tr(X^dagger Y)`.
    ///
    /// On the compact families the Killing form is a multiple of the
    /// trace form, `kappa(X, Y) = c tr(XY)` with `c = n - 2` for `so(n)`
    /// and `c = 2n` for `su(n)`; minus that is `c Re tr(X^dagger Y)` on
    /// skew-adjoint matrices.
    pub(crate) fn effective_multiplier(&self, descriptor: AlgebraDescriptor) -> Result<f64> {
        match self.kind {
            MetricKind::Frobenius => Ok(self.scale),
            MetricKind::NegativeKilling => {
                let n = descriptor.ambient as f64;
                let c = match descriptor.family {
                    Family::SpecialOrthogonal if descriptor.ambient >= 3 => n - 2.0,
                    Family::SpecialUnitary => 2.0 * n,
                    _ => {
                        return Err(Error::UnsupportedFamily {
                            family: descriptor.to_string(),
                            reason: "the Killing form is degenerate here; use the Frobenius metric"
                                .into(),
                        })
                    }
                };
                Ok(self.scale * c)
            }
        }
    }

    /// The pairing `Q(X, Y)`.
    pub fn pairing(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
        x.descriptor.check_same(&y.descriptor)?;
        let multiplier = self.effective_multiplier(x.descriptor)?;
        Ok(multiplier * re_trace_adjoint_product(&x.matrix, &y.matrix))
    }
}

/// `Re tr(X^dagger Y)` without allocating the product.
pub(crate) fn re_trace_adjoint_product(x: &Matrix, y: &Matrix) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).map(|z| z.re).sum()
}

/// A Q-orthonormal ordered basis of the algebra.
#[derive(Clone, Debug)]
pub struct OrthonormalBasis {
    descriptor: AlgebraDescriptor,
    metric: BiInvariantMetric,
    elements: Vec<AlgebraElement>,
}

impl OrthonormalBasis {
    pub fn descriptor(&self) -> AlgebraDescriptor {
        self.descriptor
    }

    pub fn metric(&self) -> &BiInvariantMetric {
        &self.metric
    }

    pub fn dimension(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[AlgebraElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &AlgebraElement {
        &self.elements[i]
    }

    /// Coordinates of `x` in this basis: `x_i = Q(x, X_i)`.
    pub fn coefficients(&self, x: &AlgebraElement) -> Result<Vec<f64>> {
        self.descriptor.check_same(&x.descriptor)?;
        self.elements.iter().map(|e| self.metric.pairing(x, e)).collect()
    }

    /// Reconstructs an element from coordinates.
    pub fn from_coefficients(&self, coefficients: &[f64]) -> Result<AlgebraElement> {
        if coefficients.len() != self.dimension() {
            return Err(Error::InvalidParameter {
                name: "coefficients",
                reason: format!(
                    "expected {} coordinates, found {}",
                    self.dimension(),
                    coefficients.len()
                ),
            });
        }
        let (r, c) = self.descriptor.matrix_shape();
        let mut matrix = Matrix::zeros(r, c);
        for (coef, element) in coefficients.iter().zip(&self.elements) {
            matrix += &element.matrix * Scalar::new(*coef, 0.0);
        }
        Ok(AlgebraElement::from_parts_unchecked(matrix, self.descriptor))
    }

    /// `Q(x, y)` under this basis' metric.
    pub fn pairing(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
        self.metric.pairing(x, y)
    }
}

/// Canonical generators, before orthonormalisation.
///
/// * `so(n)`: for each pair `a < b` in lexicographic order, the matrix
///   with entry `(a, b) = -1` and `(b, a) = +1`.
/// * `su(n)`: for each pair `a < b` in lexicographic order, the
///   symmetric-imaginary generator `i(e_ab + e_ba)` followed by the
///   antisymmetric-real generator `e_ab - e_ba`; then the traceless
///   diagonal generators `i diag(1, .., 1, -k, 0, .., 0)` for
///   `k = 1 .. n-1`.
/// * `R^n`: the coordinate vectors.
fn canonical_generators(descriptor: AlgebraDescriptor) -> Vec<Matrix> {
    let n = descriptor.ambient;
    let mut generators = Vec::with_capacity(descriptor.dimension());
    match descriptor.family {
        Family::SpecialOrthogonal => {
            for a in 0..n {
                for b in (a + 1)..n {
                    let mut m = Matrix::zeros(n, n);
                    m[(a, b)] = Scalar::new(-1.0, 0.0);
                    m[(b, a)] = Scalar::new(1.0, 0.0);
                    generators.push(m);
                }
            }
        }
        Family::SpecialUnitary => {
            for a in 0..n {
                for b in (a + 1)..n {
                    let mut sym = Matrix::zeros(n, n);
                    sym[(a, b)] = Scalar::new(0.0, 1.0);
                    sym[(b, a)] = Scalar::new(0.0, 1.0);
                    generators.push(sym);
                    let mut asym = Matrix::zeros(n, n);
                    asym[(a, b)] = Scalar::new(1.0, 0.0);
                    asym[(b, a)] = Scalar::new(-1.0, 0.0);
                    generators.push(asym);
                }
            }
            for k in 1..n {
                let mut diag = Matrix::zeros(n, n);
                for j in 0..k {
                    diag[(j, j)] = Scalar::new(0.0, 1.0);
                }
                diag[(k, k)] = Scalar::new(0.0, -(k as f64));
                generators.push(diag);
            }
        }
        Family::Euclidean => {
            for a in 0..n {
                let mut m = Matrix::zeros(n, 1);
                m[(a, 0)] = Scalar::new(1.0, 0.0);
                generators.push(m);
            }
        }
    }
    generators
}

/// Builds the Q-orthonormal basis from the canonical generators by
/// modified Gram-Schmidt. The generator enumeration is deterministic, so
/// the basis (and therefore every noise realisation built on it) is
/// reproducible across runs.
pub fn build_basis(
    descriptor: AlgebraDescriptor,
    metric: BiInvariantMetric,
) -> Result<OrthonormalBasis> {
    // Surface unsupported metric/family combinations before doing work.
    metric.effective_multiplier(descriptor)?;
    let mut elements: Vec<AlgebraElement> = Vec::with_capacity(descriptor.dimension());
    for raw in canonical_generators(descriptor) {
        let mut candidate = AlgebraElement::from_parts_unchecked(raw, descriptor);
        for previous in &elements {
            let overlap = metric.pairing(&candidate, previous)?;
            candidate = candidate.sub(&previous.scale(overlap))?;
        }
        let norm_sq = metric.pairing(&candidate, &candidate)?;
        if norm_sq <= 1e-20 {
            return Err(Error::Degenerate(format!(
                "canonical generators of {descriptor} are linearly dependent"
            )));
        }
        elements.push(candidate.scale(1.0 / norm_sq.sqrt()));
    }
    debug_assert_eq!(elements.len(), descriptor.dimension());
    Ok(OrthonormalBasis { descriptor, metric, elements })
}

/// Structure constants `C^k_ij` with `[X_i, X_j] = sum_k C^k_ij X_k`.
#[derive(Clone, Debug)]
pub struct StructureConstants {
    dimension: usize,
    tensor: Vec<f64>,
}

impl StructureConstants {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// `C^k_ij`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.tensor[(k * self.dimension + i) * self.dimension + j]
    }

    /// Maximum violation of the Jacobi identity over all index triples.
    pub fn jacobi_defect(&self) -> f64 {
        let d = self.dimension;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut sum = 0.0;
                        for m in 0..d {
                            sum += self.get(m, i, j) * self.get(l, m, k)
                                + self.get(m, j, k) * self.get(l, m, i)
                                + self.get(m, k, i) * self.get(l, m, j);
                        }
                        worst = worst.max(sum.abs());
                    }
                }
            }
        }
        worst
    }
}

/// Computes `C^k_ij = Q([X_i, X_j], X_k)` over an orthonormal basis.
pub fn structure_constants(basis: &OrthonormalBasis) -> Result<StructureConstants> {
    let d = basis.dimension();
    let mut tensor = vec![0.0; d * d * d];
    for i in 0..d {
        for j in 0..d {
            let bracket = basis.element(i).bracket(basis.element(j))?;
            for k in 0..d {
                tensor[(k * d + i) * d + j] = basis.pairing(&bracket, basis.element(k))?;
            }
        }
    }
    Ok(StructureConstants { dimension: d, tensor })
}

/// Orthogonal projection of an ambient matrix onto the algebra under the
/// Frobenius pairing: the real skew-symmetric part for `so(n)`, the
/// traceless skew-Hermitian part for `su(n)`, the real part for `R^n`.
pub fn project_to_algebra(matrix: &Matrix, descriptor: AlgebraDescriptor) -> Result<AlgebraElement> {
    if !linalg::is_finite(matrix) {
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
    let projected = match descriptor.family {
        Family::SpecialOrthogonal => {
            let real = matrix.map(|z| Scalar::new(z.re, 0.0));
            (&real - real.transpose()) * Scalar::new(0.5, 0.0)
        }
        Family::SpecialUnitary => {
            let mut skew = (matrix - matrix.adjoint()) * Scalar::new(0.5, 0.0);
            let trace = skew.trace() / Scalar::new(descriptor.ambient as f64, 0.0);
            for i in 0..descriptor.ambient {
                skew[(i, i)] -= trace;
            }
            skew
        }
        Family::Euclidean => matrix.map(|z| Scalar::new(z.re, 0.0)),
    };
    Ok(AlgebraElement::from_parts_unchecked(projected, descriptor))
}

/// The matrix of `ad_x` in the given orthonormal basis:
/// `(ad_x)_{ki} = Q([x, X_i], X_k)`.
pub fn adjoint_matrix(basis: &OrthonormalBasis, x: &AlgebraElement) -> Result<nalgebra::DMatrix<f64>> {
    basis.descriptor().check_same(&x.descriptor)?;
    let d = basis.dimension();
    let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let bracket = x.bracket(basis.element(i))?;
        for k in 0..d {
            m[(k, i)] = basis.pairing(&bracket, basis.element(k))?;
        }
    }
    Ok(m)
}

/// The Killing form `kappa(X, Y) = tr(ad_X ad_Y)`, assembled from the
/// adjoint matrices in the basis.
pub fn killing_form(basis: &OrthonormalBasis, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
    let ax = adjoint_matrix(basis, x)?;
    let ay = adjoint_matrix(basis, y)?;
    Ok((&ax * &ay).trace())
}

/// The Gram matrix of the Killing form over the basis.
pub fn killing_matrix(basis: &OrthonormalBasis) -> Result<nalgebra::DMatrix<f64>> {
    let d = basis.dimension();
    let ads: Vec<_> =
        basis.elements().iter().map(|e| adjoint_matrix(basis, e)).collect::<Result<_>>()?;
    let mut m = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = (&ads[i] * &ads[j]).trace();
        }
    }
    Ok(m)
}

/// Curvature tensor of the bi-invariant connection:
/// `R(X, Y) Z = -[[X, Y], Z] / 4`.
pub fn curvature_tensor(
    x: &AlgebraElement,
    y: &AlgebraElement,
    z: &AlgebraElement,
) -> Result<AlgebraElement> {
    Ok(x.bracket(y)?.bracket(z)?.scale(-0.25))
}

/// Ricci curvature: `Ric(X, Y) = -kappa(X, Y) / 4`.
pub fn ricci(basis: &OrthonormalBasis, x: &AlgebraElement, y: &AlgebraElement) -> Result<f64> {
    Ok(-0.25 * killing_form(basis, x, y)?)
}

/// Ricci curvature by the independent route: the basis trace of the
/// curvature tensor, `sum_i Q(R(X_i, X) Y, X_i)`.
pub fn ricci_from_curvature_trace(
    basis: &OrthonormalBasis,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<f64> {
    let mut sum = 0.0;
    for e in basis.elements() {
        let r = curvature_tensor(e, x, y)?;
        sum += basis.pairing(&r, e)?;
    }
    Ok(sum)
}

/// A standard Gaussian element of the algebra: `sum_i xi_i X_i` with
/// i.i.d. standard normal coefficients drawn in basis order.
pub fn sample_algebra_gaussian(rng: &mut RngStream, basis: &OrthonormalBasis) -> AlgebraElement {
    let (r, c) = basis.descriptor().matrix_shape();
    let mut matrix = Matrix::zeros(r, c);
    let out = matrix.as_mut_slice();
    for element in basis.elements() {
        let xi = rng.standard_normal();
        for (dst, src) in out.iter_mut().zip(element.matrix().as_slice()) {
            *dst += src * xi;
        }
    }
    AlgebraElement::from_parts_unchecked(matrix, basis.descriptor())
}
