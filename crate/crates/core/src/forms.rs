//! The four form families over a [`Domain`]: Neumann (graph Laplacian),
//! Dirichlet (boundary pinned), Robin with a boundary measure, and nonlocal
//! Robin with a boundary operator. Plus the form-level tests: Markovianity,
//! the entrywise form gap and the cross energy a(u+, u-).
//!
//! A form a(u, v) = u' A v is represented by its dense symmetric matrix
//! together with the set of pinned nodes where u is constrained to zero.
//! Pinning is realized by zeroing the pinned rows and columns (zero
//! extension of the principal submatrix), never by penalty entries.

use std::collections::BTreeSet;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};

/// Relative scale for all sign and symmetry checks on matrices.
pub const SIGN_TOL: f64 = 1e-12;

/// A symmetric bilinear form over a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FormMatrix {
    domain: Arc<Domain>,
    matrix: DMatrix<f64>,
    pinned: BTreeSet<usize>,
}

impl FormMatrix {
    /// Wraps a matrix after validating symmetry, dimensions and that pinned
    /// rows/columns are identically zero.
    pub fn from_parts(
        domain: Arc<Domain>,
        matrix: DMatrix<f64>,
        pinned: BTreeSet<usize>,
    ) -> Result<FormMatrix> {
        let n = domain.n_nodes();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: matrix.nrows(),
            });
        }
        let scale = matrix.amax();
        let tol = SIGN_TOL * scale;
        for i in 0..n {
            for j in (i + 1)..n {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > tol {
                    return Err(Error::AsymmetricForm(format!(
                        "entries ({i}, {j}) = {} and ({j}, {i}) = {} differ",
                        matrix[(i, j)],
                        matrix[(j, i)]
                    )));
                }
            }
        }
        for &p in &pinned {
            if p >= n {
                return Err(Error::InvalidArgument(format!(
                    "pinned index {p} out of range (n = {n})"
                )));
            }
            for j in 0..n {
                if matrix[(p, j)] != 0.0 || matrix[(j, p)] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "pinned node {p} has a nonzero row or column entry"
                    )));
                }
            }
        }
        Ok(FormMatrix {
            domain,
            matrix,
            pinned,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn pinned(&self) -> &BTreeSet<usize> {
        &self.pinned
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_pinned(&self, node: usize) -> bool {
        self.pinned.contains(&node)
    }

    /// Nodes not pinned, ascending.
    pub fn unpinned(&self) -> Vec<usize> {
        (0..self.n()).filter(|i| !self.pinned.contains(i)).collect()
    }

    /// Scale-invariant tolerance for sign checks on this matrix.
    pub fn sign_tol(&self) -> f64 {
        SIGN_TOL * self.matrix.amax()
    }

    /// Evaluates a(u, v) = u' A v.
    pub fn energy(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        if u.len() != self.n() || v.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                got: u.len().max(v.len()),
            });
        }
        Ok((u.transpose() * &self.matrix * v)[(0, 0)])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<FormMatrix> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct FormMatrixJson {
    domain: Domain,
    matrix: Vec<f64>,
    pinned: Vec<usize>,
}

impl Serialize for FormMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let n = self.n();
        let mut flat = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                flat.push(self.matrix[(i, j)]);
            }
        }
        FormMatrixJson {
            domain: (*self.domain).clone(),
            matrix: flat,
            pinned: self.pinned.iter().copied().collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FormMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let json = FormMatrixJson::deserialize(deserializer)?;
        let n = json.domain.n_nodes();
        if json.matrix.len() != n * n {
            return Err(D::Error::custom(format!(
                "matrix has {} entries, expected {}",
                json.matrix.len(),
                n * n
            )));
        }
        let matrix = DMatrix::from_row_slice(n, n, &json.matrix);
        FormMatrix::from_parts(
            Arc::new(json.domain),
            matrix,
            json.pinned.into_iter().collect(),
        )
        .map_err(D::Error::custom)
    }
}

/// Per-boundary-node measure values in `[0, +inf]`; `+inf` pins the node.
///
/// Values are aligned with the sorted boundary list of the domain the
/// measure is applied to. Serialized as an array mixing numbers and the
/// string `"inf"`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryMeasure(Vec<f64>);

impl BoundaryMeasure {
    pub fn new(values: Vec<f64>) -> Result<BoundaryMeasure> {
        for v in &values {
            if v.is_nan() || *v < 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "measure values must lie in [0, +inf], got {v}"
                )));
            }
        }
        Ok(BoundaryMeasure(values))
    }

    pub fn zero(len: usize) -> BoundaryMeasure {
        BoundaryMeasure(vec![0.0; len])
    }

    pub fn infinite(len: usize) -> BoundaryMeasure {
        BoundaryMeasure(vec![f64::INFINITY; len])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Positions (into the boundary list) where the measure is finite.
    pub fn finite_part(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&k| self.0[k].is_finite()).collect()
    }
}

impl Serialize for BoundaryMeasure {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for v in &self.0 {
            if v.is_infinite() {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element(v)?;
            }
        }
        seq.end()
    }
}

impl<'de> Deserialize<'de> for BoundaryMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Entry {
            Number(f64),
            Text(String),
        }
        let entries = Vec::<Entry>::deserialize(deserializer)?;
        let mut values = Vec::with_capacity(entries.len());
        for e in entries {
            match e {
                Entry::Number(v) => values.push(v),
                Entry::Text(s) if s == "inf" => values.push(f64::INFINITY),
                Entry::Text(s) => {
                    return Err(D::Error::custom(format!(
                        "expected a number or \"inf\", got \"{s}\""
                    )))
                }
            }
        }
        BoundaryMeasure::new(values).map_err(D::Error::custom)
    }
}

/// Symmetric operator on the boundary nodes, indexed like the sorted
/// boundary list.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryOperator {
    matrix: DMatrix<f64>,
}

impl BoundaryOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<BoundaryOperator> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let tol = SIGN_TOL * matrix.amax();
        for i in 0..matrix.nrows() {
            for j in (i + 1)..matrix.ncols() {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > tol {
                    return Err(Error::AsymmetricForm(format!(
                        "boundary operator entries ({i}, {j}) and ({j}, {i}) differ"
                    )));
                }
            }
        }
        Ok(BoundaryOperator { matrix })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<BoundaryOperator> {
        let b = rows.len();
        for r in rows {
            if r.len() != b {
                return Err(Error::DimensionMismatch {
                    expected: b,
                    got: r.len(),
                });
            }
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        BoundaryOperator::new(DMatrix::from_row_slice(b, b, &flat))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

fn laplacian(domain: &Domain) -> DMatrix<f64> {
    let n = domain.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    for e in domain.edges() {
        a[(e.i, e.i)] += e.conductance;
        a[(e.j, e.j)] += e.conductance;
        a[(e.i, e.j)] -= e.conductance;
        a[(e.j, e.i)] -= e.conductance;
    }
    a
}

fn zero_row_col(a: &mut DMatrix<f64>, node: usize) {
    for k in 0..a.nrows() {
        a[(node, k)] = 0.0;
        a[(k, node)] = 0.0;
    }
}

/// The graph Laplacian of the domain stencil: no killing, no pinning.
pub fn neumann_form(domain: &Arc<Domain>) -> FormMatrix {
    FormMatrix {
        domain: domain.clone(),
        matrix: laplacian(domain),
        pinned: BTreeSet::new(),
    }
}

/// The Neumann matrix with every boundary row and column zeroed; boundary
/// nodes are pinned.
pub fn dirichlet_form(domain: &Arc<Domain>) -> Result<FormMatrix> {
    if domain.interior().is_empty() {
        return Err(Error::EmptyInterior);
    }
    let mut a = laplacian(domain);
    for &b in domain.boundary() {
        zero_row_col(&mut a, b);
    }
    Ok(FormMatrix {
        domain: domain.clone(),
        matrix: a,
        pinned: domain.boundary().iter().copied().collect(),
    })
}

/// Neumann plus the measure on the diagonal of the finite boundary nodes;
/// nodes with an infinite measure are pinned.
///
/// `robin_form(d, 0)` equals `neumann_form(d)` exactly and an everywhere
/// infinite measure reproduces `dirichlet_form(d)` exactly.
pub fn robin_form(domain: &Arc<Domain>, mu: &BoundaryMeasure) -> Result<FormMatrix> {
    let boundary = domain.boundary();
    if mu.len() != boundary.len() {
        return Err(Error::InvalidMeasure(format!(
            "measure has {} values, boundary has {} nodes",
            mu.len(),
            boundary.len()
        )));
    }
    let mut a = laplacian(domain);
    let mut pinned = BTreeSet::new();
    for (k, &b) in boundary.iter().enumerate() {
        let v = mu.values()[k];
        if v.is_finite() {
            a[(b, b)] += v;
        } else {
            pinned.insert(b);
        }
    }
    for &p in &pinned {
        zero_row_col(&mut a, p);
    }
    Ok(FormMatrix {
        domain: domain.clone(),
        matrix: a,
        pinned,
    })
}

/// Neumann plus the sigma-weighted boundary block `S_ij = sigma_i * B_ij`.
///
/// The weighted block must come out symmetric (it does whenever sigma is
/// constant or B is diagonal); otherwise the form is rejected rather than
/// symmetrized, so reports always describe the operator actually given.
pub fn nonlocal_robin_form(domain: &Arc<Domain>, b_op: &BoundaryOperator) -> Result<FormMatrix> {
    let boundary = domain.boundary();
    if b_op.dim() != boundary.len() {
        return Err(Error::DimensionMismatch {
            expected: boundary.len(),
            got: b_op.dim(),
        });
    }
    let sigma = domain.boundary_weights();
    let b = b_op.matrix();
    let mut block_scale = 0.0f64;
    for k in 0..b_op.dim() {
        for l in 0..b_op.dim() {
            block_scale = block_scale.max((sigma[k] * b[(k, l)]).abs());
        }
    }
    let tol = SIGN_TOL * block_scale;
    for k in 0..b_op.dim() {
        for l in (k + 1)..b_op.dim() {
            let skl = sigma[k] * b[(k, l)];
            let slk = sigma[l] * b[(l, k)];
            if (skl - slk).abs() > tol {
                return Err(Error::AsymmetricForm(format!(
                    "sigma-weighted boundary block is asymmetric at boundary pair ({k}, {l}): {skl} vs {slk}"
                )));
            }
        }
    }
    let mut a = laplacian(domain);
    for k in 0..b_op.dim() {
        for l in 0..b_op.dim() {
            let (i, j) = (boundary[k], boundary[l]);
            if k == l {
                a[(i, i)] += sigma[k] * b[(k, k)];
            } else {
                // use the symmetrized value so the matrix is exactly symmetric
                let v = 0.5 * (sigma[k] * b[(k, l)] + sigma[l] * b[(l, k)]);
                a[(i, j)] += v;
            }
        }
    }
    Ok(FormMatrix {
        domain: domain.clone(),
        matrix: a,
        pinned: BTreeSet::new(),
    })
}

/// First Beurling-Deny criterion at matrix level: every off-diagonal entry
/// nonpositive and every row sum nonnegative, within the scale-invariant
/// sign tolerance.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Markovianity {
    Markovian,
    PositiveOffDiagonal { i: usize, j: usize, value: f64 },
    NegativeRowSum { row: usize, value: f64 },
}

impl Markovianity {
    pub fn is_markovian(&self) -> bool {
        matches!(self, Markovianity::Markovian)
    }

    /// Witness pair; the row-sum case reports (row, row).
    pub fn witness(&self) -> Option<(usize, usize, f64)> {
        match *self {
            Markovianity::Markovian => None,
            Markovianity::PositiveOffDiagonal { i, j, value } => Some((i, j, value)),
            Markovianity::NegativeRowSum { row, value } => Some((row, row, value)),
        }
    }
}

pub fn is_markovian(form: &FormMatrix) -> Markovianity {
    let a = form.matrix();
    let n = form.n();
    let tol = form.sign_tol();
    for i in 0..n {
        for j in 0..n {
            if i != j && a[(i, j)] > tol {
                return Markovianity::PositiveOffDiagonal {
                    i,
                    j,
                    value: a[(i, j)],
                };
            }
        }
    }
    for i in 0..n {
        let sum: f64 = a.row(i).iter().sum();
        if sum < -tol {
            return Markovianity::NegativeRowSum { row: i, value: sum };
        }
    }
    Markovianity::Markovian
}

/// Entrywise difference G = A - B with an entrywise nonnegativity verdict:
/// the form-level half of the domination criterion on the positive cone.
#[derive(Debug, Clone)]
pub struct OuhabazGap {
    pub gap: DMatrix<f64>,
    pub nonnegative: bool,
    /// First entry below -tol in row-major order, if any.
    pub witness: Option<(usize, usize, f64)>,
}

pub fn ouhabaz_gap(form_a: &FormMatrix, form_b: &FormMatrix) -> Result<OuhabazGap> {
    if form_a.domain() != form_b.domain() {
        return Err(Error::DomainMismatch(
            "forms live on different domains".into(),
        ));
    }
    if form_a.pinned() != form_b.pinned() {
        return Err(Error::DomainMismatch(
            "forms have different pinned sets".into(),
        ));
    }
    let gap = form_a.matrix() - form_b.matrix();
    let tol = SIGN_TOL * form_a.matrix().amax().max(form_b.matrix().amax());
    let mut witness = None;
    'scan: for i in 0..gap.nrows() {
        for j in 0..gap.ncols() {
            if gap[(i, j)] < -tol {
                witness = Some((i, j, gap[(i, j)]));
                break 'scan;
            }
        }
    }
    Ok(OuhabazGap {
        nonnegative: witness.is_none(),
        gap,
        witness,
    })
}

/// The cross energy a(u+, u-) with u+ = max(u, 0), u- = max(-u, 0).
///
/// Markovian forms give nonpositive values; a positive value exposes a
/// first-criterion violation. Note the continuum identity a(u+, u-) = 0 for
/// local forms does not transfer to stencil forms: nearest-neighbor coupling
/// makes the cross energy strictly negative whenever u changes sign across
/// an edge.
pub fn cross_form_energy(form: &FormMatrix, u: &[f64]) -> Result<f64> {
    if u.len() != form.n() {
        return Err(Error::DimensionMismatch {
            expected: form.n(),
            got: u.len(),
        });
    }
    let plus = DVector::from_iterator(u.len(), u.iter().map(|&x| x.max(0.0)));
    let minus = DVector::from_iterator(u.len(), u.iter().map(|&x| (-x).max(0.0)));
    form.energy(&plus, &minus)
}
