//! Decomposition of a symmetric form into jump and killing parts.
//!
//! On a finite node set the strongly local component vanishes (any two
//! distinct nodes carry disjointly supported indicators), so the whole
//! gradient part lands in the jump measure. Jumps along domain edges play
//! the role of the local part; jumps between non-adjacent nodes are the
//! genuinely nonlocal measure; row sums are the killing measure. The map is
//! a linear bijection, so decomposition and reconstruction are exact.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::forms::{FormMatrix, SIGN_TOL};

/// Jump weights and killing measure of a symmetric form.
#[derive(Debug, Clone, PartialEq)]
pub struct BdlParts {
    /// Jump weight per domain edge, aligned with the edge list.
    pub stencil_jump: Vec<f64>,
    /// Jump weights on non-adjacent pairs, keyed by (i, j) with i < j.
    /// Only pairs with a nonzero coupling are stored.
    pub nonlocal_jump: BTreeMap<(usize, usize), f64>,
    /// Killing measure per node (row sums of the form matrix).
    pub killing: Vec<f64>,
    /// True when every jump and every killing value is nonnegative within
    /// the sign tolerance of the source matrix.
    pub markovian: bool,
}

#[derive(Serialize, Deserialize)]
struct JumpEntry {
    i: usize,
    j: usize,
    #[serde(rename = "J")]
    jump: f64,
}

#[derive(Serialize, Deserialize)]
struct BdlPartsJson {
    stencil: Vec<JumpEntry>,
    nonlocal: Vec<JumpEntry>,
    killing: Vec<f64>,
    markovian: bool,
}

impl BdlParts {
    /// JSON with explicit pair indices for both jump families. Stencil
    /// entries follow the domain edge order.
    pub fn to_json(&self, domain: &Domain) -> Result<String> {
        let stencil = domain
            .edges()
            .iter()
            .zip(&self.stencil_jump)
            .map(|(e, &jump)| JumpEntry {
                i: e.i,
                j: e.j,
                jump,
            })
            .collect();
        let nonlocal = self
            .nonlocal_jump
            .iter()
            .map(|(&(i, j), &jump)| JumpEntry { i, j, jump })
            .collect();
        Ok(serde_json::to_string_pretty(&BdlPartsJson {
            stencil,
            nonlocal,
            killing: self.killing.clone(),
            markovian: self.markovian,
        })?)
    }
}

/// Splits a symmetric form: J_ij = -A_ij for every off-diagonal pair
/// (stencil or nonlocal by adjacency), k_i = i-th row sum. Closed form, no
/// iteration.
pub fn bdl_decompose(form: &FormMatrix) -> Result<BdlParts> {
    let a = form.matrix();
    let n = form.n();
    let tol = form.sign_tol();
    // FormMatrix already guarantees symmetry within tolerance; re-check so
    // the error contract holds for matrices right at the threshold.
    for i in 0..n {
        for j in (i + 1)..n {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return Err(Error::AsymmetricForm(format!(
                    "entries ({i}, {j}) and ({j}, {i}) differ"
                )));
            }
        }
    }
    let domain = form.domain();
    let stencil_jump: Vec<f64> = domain.edges().iter().map(|e| -a[(e.i, e.j)]).collect();
    let mut nonlocal_jump = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !domain.is_edge(i, j) && a[(i, j)] != 0.0 {
                nonlocal_jump.insert((i, j), -a[(i, j)]);
            }
        }
    }
    let killing: Vec<f64> = (0..n).map(|i| a.row(i).iter().sum()).collect();
    let markovian = stencil_jump.iter().all(|&j| j >= -tol)
        && nonlocal_jump.values().all(|&j| j >= -tol)
        && killing.iter().all(|&k| k >= -tol);
    Ok(BdlParts {
        stencil_jump,
        nonlocal_jump,
        killing,
        markovian,
    })
}

/// Rebuilds the matrix: A_ij = -J_ij off the diagonal and
/// A_ii = k_i + sum of jumps incident to i.
pub fn bdl_reconstruct(parts: &BdlParts, domain: &Arc<Domain>) -> Result<FormMatrix> {
    let n = domain.n_nodes();
    if parts.stencil_jump.len() != domain.edges().len() {
        return Err(Error::DimensionMismatch {
            expected: domain.edges().len(),
            got: parts.stencil_jump.len(),
        });
    }
    if parts.killing.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: parts.killing.len(),
        });
    }
    let mut a = DMatrix::zeros(n, n);
    for (e, &jump) in domain.edges().iter().zip(&parts.stencil_jump) {
        a[(e.i, e.j)] -= jump;
        a[(e.j, e.i)] -= jump;
        a[(e.i, e.i)] += jump;
        a[(e.j, e.j)] += jump;
    }
    for (&(i, j), &jump) in &parts.nonlocal_jump {
        if i >= n || j >= n {
            return Err(Error::InvalidArgument(format!(
                "nonlocal jump pair ({i}, {j}) out of range (n = {n})"
            )));
        }
        if i == j {
            return Err(Error::InvalidArgument(format!(
                "nonlocal jump pair ({i}, {j}) is diagonal"
            )));
        }
        if domain.is_edge(i, j) {
            return Err(Error::InvalidArgument(format!(
                "nonlocal jump pair ({i}, {j}) is a domain edge"
            )));
        }
        a[(i, j)] -= jump;
        a[(j, i)] -= jump;
        a[(i, i)] += jump;
        a[(j, j)] += jump;
    }
    for i in 0..n {
        a[(i, i)] += parts.killing[i];
    }
    FormMatrix::from_parts(domain.clone(), a, Default::default())
}

/// Locality classification of a form by the support of its jump measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Locality {
    /// The jump measure is supported on the stencil.
    StencilLocal,
    /// Largest-magnitude off-stencil jump.
    Nonlocal { i: usize, j: usize, jump: f64 },
}

impl Locality {
    pub fn is_local(&self) -> bool {
        matches!(self, Locality::StencilLocal)
    }
}

/// Stencil-local iff every off-stencil jump is below the sign tolerance.
pub fn classify_locality(form: &FormMatrix) -> Locality {
    let tol = SIGN_TOL * form.matrix().amax();
    let parts = match bdl_decompose(form) {
        Ok(p) => p,
        // unreachable for a validated FormMatrix
        Err(_) => {
            return Locality::StencilLocal;
        }
    };
    let mut worst: Option<(usize, usize, f64)> = None;
    for (&(i, j), &jump) in &parts.nonlocal_jump {
        if jump.abs() > tol {
            match worst {
                Some((_, _, w)) if jump.abs() <= w.abs() => {}
                _ => worst = Some((i, j, jump)),
            }
        }
    }
    match worst {
        Some((i, j, jump)) => Locality::Nonlocal { i, j, jump },
        None => Locality::StencilLocal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::unit_three_path;
    use crate::forms::{
        is_markovian, neumann_form, nonlocal_robin_form, robin_form, BoundaryMeasure,
        BoundaryOperator,
    };

    fn unit_path() -> Arc<Domain> {
        Arc::new(unit_three_path())
    }

    #[test]
    fn decompose_robin() {
        let d = unit_path();
        let mu = BoundaryMeasure::new(vec![1.0, 2.0]).unwrap();
        let parts = bdl_decompose(&robin_form(&d, &mu).unwrap()).unwrap();
        assert_eq!(parts.stencil_jump, vec![1.0, 1.0]);
        assert!(parts.nonlocal_jump.is_empty());
        assert_eq!(parts.killing, vec![1.0, 0.0, 2.0]);
        assert!(parts.markovian);
    }

    #[test]
    fn decompose_nonlocal_example() {
        let d = unit_path();
        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let parts = bdl_decompose(&nonlocal_robin_form(&d, &b).unwrap()).unwrap();
        assert_eq!(parts.stencil_jump, vec![1.0, 1.0]);
        assert_eq!(parts.nonlocal_jump.get(&(0, 2)), Some(&-1.0));
        assert_eq!(parts.killing, vec![2.0, 0.0, 2.0]);
        assert!(!parts.markovian);
    }

    #[test]
    fn decompose_zero_matrix() {
        let d = unit_path();
        let f = FormMatrix::from_parts(d.clone(), DMatrix::zeros(3, 3), Default::default()).unwrap();
        let parts = bdl_decompose(&f).unwrap();
        assert_eq!(parts.stencil_jump, vec![0.0, 0.0]);
        assert!(parts.nonlocal_jump.is_empty());
        assert_eq!(parts.killing, vec![0.0, 0.0, 0.0]);
        assert!(parts.markovian);
    }

    #[test]
    fn reconstruct_round_trip_and_explicit_parts() {
        let d = unit_path();
        let f = neumann_form(&d);
        let parts = bdl_decompose(&f).unwrap();
        let back = bdl_reconstruct(&parts, &d).unwrap();
        assert_eq!(back.matrix(), f.matrix());

        let mut nonlocal = BTreeMap::new();
        nonlocal.insert((0, 2), -1.0);
        let parts = BdlParts {
            stencil_jump: vec![1.0, 1.0],
            nonlocal_jump: nonlocal,
            killing: vec![2.0, 0.0, 2.0],
            markovian: false,
        };
        let rebuilt = bdl_reconstruct(&parts, &d).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 1.0, -1.0, 2.0, -1.0, 1.0, -1.0, 2.0]);
        assert_eq!(rebuilt.matrix(), &expected);

        let zero = BdlParts {
            stencil_jump: vec![0.0, 0.0],
            nonlocal_jump: BTreeMap::new(),
            killing: vec![0.0; 3],
            markovian: true,
        };
        assert_eq!(bdl_reconstruct(&zero, &d).unwrap().matrix().amax(), 0.0);
    }

    #[test]
    fn markovian_flag_matches_is_markovian() {
        let d = unit_path();
        let mu = BoundaryMeasure::new(vec![0.5, 0.0]).unwrap();
        let robin = robin_form(&d, &mu).unwrap();
        assert_eq!(
            bdl_decompose(&robin).unwrap().markovian,
            is_markovian(&robin).is_markovian()
        );
        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let nl = nonlocal_robin_form(&d, &b).unwrap();
        assert_eq!(
            bdl_decompose(&nl).unwrap().markovian,
            is_markovian(&nl).is_markovian()
        );
    }

    #[test]
    fn locality_classification() {
        let d = unit_path();
        let mu = BoundaryMeasure::new(vec![1.0, 2.0]).unwrap();
        assert!(classify_locality(&robin_form(&d, &mu).unwrap()).is_local());

        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let nl = nonlocal_robin_form(&d, &b).unwrap();
        assert_eq!(
            classify_locality(&nl),
            Locality::Nonlocal {
                i: 0,
                j: 2,
                jump: -1.0
            }
        );

        // plant a coupling between the non-adjacent pair
        let mut a = neumann_form(&d).matrix().clone();
        a[(0, 2)] -= 0.5;
        a[(2, 0)] -= 0.5;
        let f = FormMatrix::from_parts(d.clone(), a, Default::default()).unwrap();
        assert_eq!(
            classify_locality(&f),
            Locality::Nonlocal {
                i: 0,
                j: 2,
                jump: 0.5
            }
        );
    }

    #[test]
    fn parts_json_shape() {
        let d = unit_path();
        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let parts = bdl_decompose(&nonlocal_robin_form(&d, &b).unwrap()).unwrap();
        let text = parts.to_json(&d).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["stencil"][0]["J"], 1.0);
        assert_eq!(v["nonlocal"][0]["i"], 0);
        assert_eq!(v["nonlocal"][0]["j"], 2);
        assert_eq!(v["nonlocal"][0]["J"], -1.0);
        assert_eq!(v["markovian"], false);
    }
}
