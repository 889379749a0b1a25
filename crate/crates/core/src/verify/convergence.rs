//! Quantitative link back to the continuum operators on the unit interval:
//! generator eigenvalues on refined grids against closed-form or
//! root-finding references, with observed convergence orders.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::build_interval;
use crate::error::{Error, Result};
use crate::forms::{dirichlet_form, neumann_form, robin_form, BoundaryMeasure};
use crate::semigroup::Propagator;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryKind {
    Neumann,
    Dirichlet,
    Robin { beta: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub lambda: f64,
    pub reference: f64,
    pub abs_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    #[serde(flatten)]
    pub kind: BoundaryKind,
    pub k: usize,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// CSV with header `n,h,lambda_k,reference,abs_error,observed_order`;
    /// the order cell is empty on the first row and wherever the error sits
    /// at roundoff level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,h,lambda_k,reference,abs_error,observed_order\n");
        for row in &self.rows {
            let order = row
                .observed_order
                .map(|o| o.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                row.n, row.h, row.lambda, row.reference, row.abs_error, order
            ));
        }
        out
    }
}

/// Characteristic function of the Robin eigenvalue problem on (0, 1) with
/// parameter beta at both ends: positive roots kappa give eigenvalues
/// kappa^2.
pub fn robin_characteristic(beta: f64, kappa: f64) -> f64 {
    (kappa * kappa - beta * beta) * kappa.sin() - 2.0 * beta * kappa * kappa.cos()
}

/// First `count` positive roots of the characteristic function, found by
/// bracket scanning at resolution pi/100 followed by bisection to 1e-12.
/// Independent of the matrix eigensolver.
pub fn robin_reference_roots(beta: f64, count: usize) -> Result<Vec<f64>> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "robin reference needs beta > 0, got {beta}"
        )));
    }
    let step = std::f64::consts::PI / 100.0;
    let mut roots = Vec::with_capacity(count);
    let mut lo = step;
    let mut f_lo = robin_characteristic(beta, lo);
    // kappa = 0 is a root of the characteristic function but not an
    // eigenvalue; start the scan one step in
    let mut guard = 0usize;
    while roots.len() < count {
        guard += 1;
        if guard > 2_000_000 {
            return Err(Error::InvalidArgument(
                "bracket scan did not find enough roots".into(),
            ));
        }
        let hi = lo + step;
        let f_hi = robin_characteristic(beta, hi);
        if f_lo == 0.0 {
            roots.push(lo);
        } else if f_lo * f_hi < 0.0 {
            let (mut a, mut b) = (lo, hi);
            let mut f_a = f_lo;
            while b - a > 1e-12 {
                let mid = 0.5 * (a + b);
                let f_mid = robin_characteristic(beta, mid);
                if f_mid == 0.0 {
                    a = mid;
                    b = mid;
                } else if f_a * f_mid < 0.0 {
                    b = mid;
                } else {
                    a = mid;
                    f_a = f_mid;
                }
            }
            roots.push(0.5 * (a + b));
        }
        lo = hi;
        f_lo = f_hi;
    }
    Ok(roots)
}

fn continuum_reference(kind: BoundaryKind, k: usize) -> Result<f64> {
    let pi = std::f64::consts::PI;
    match kind {
        BoundaryKind::Neumann => Ok((k as f64 * pi).powi(2)),
        BoundaryKind::Dirichlet => {
            if k == 0 {
                return Err(Error::InvalidArgument(
                    "dirichlet eigenvalues are indexed from 1".into(),
                ));
            }
            Ok((k as f64 * pi).powi(2))
        }
        BoundaryKind::Robin { beta } => {
            if k == 0 {
                return Err(Error::InvalidArgument(
                    "robin eigenvalues are indexed from 1".into(),
                ));
            }
            let roots = robin_reference_roots(beta, k)?;
            Ok(roots[k - 1] * roots[k - 1])
        }
    }
}

fn discrete_eigenvalue(kind: BoundaryKind, n: usize, k: usize) -> Result<f64> {
    let domain = Arc::new(build_interval(n, 1.0)?);
    let form = match kind {
        BoundaryKind::Neumann => neumann_form(&domain),
        BoundaryKind::Dirichlet => dirichlet_form(&domain)?,
        BoundaryKind::Robin { beta } => {
            let sigma = domain.boundary_weights();
            let mu = BoundaryMeasure::new(sigma.iter().map(|s| beta * s).collect())?;
            robin_form(&domain, &mu)?
        }
    };
    let prop = Propagator::new(&form);
    // index k counts continuum eigenvalues: the Neumann list starts at the
    // zero mode, the pinned families at their first positive eigenvalue
    let idx = match kind {
        BoundaryKind::Neumann => k,
        _ => k - 1,
    };
    prop.eigenvalues()
        .get(idx)
        .copied()
        .ok_or_else(|| Error::InvalidArgument(format!("grid with n = {n} has no eigenvalue {k}")))
}

/// Eigenvalue k of the generator over a family of grids against the
/// continuum reference, with the observed order between consecutive sizes.
pub fn eigen_convergence(
    kind: BoundaryKind,
    sizes: &[usize],
    k: usize,
) -> Result<ConvergenceTable> {
    if sizes.is_empty() {
        return Err(Error::InvalidArgument("no grid sizes given".into()));
    }
    for w in sizes.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(
                "grid sizes must be strictly increasing".into(),
            ));
        }
    }
    let reference = continuum_reference(kind, k)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let h = 1.0 / (n - 1) as f64;
        let lambda = discrete_eigenvalue(kind, n, k)?;
        let abs_error = (lambda - reference).abs();
        let observed_order = rows.last().and_then(|prev: &ConvergenceRow| {
            let floor = 1e-13 * reference.abs().max(1.0);
            if prev.abs_error > floor && abs_error > floor {
                Some((prev.abs_error / abs_error).ln() / (prev.h / h).ln())
            } else {
                None
            }
        });
        rows.push(ConvergenceRow {
            n,
            h,
            lambda,
            reference,
            abs_error,
            observed_order,
        });
    }
    Ok(ConvergenceTable { kind, k, rows })
}
