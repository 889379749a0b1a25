//! Semigroups T(t) = exp(-t L) with L = M^-1 A, computed through the
//! mass-symmetrized matrix: with W = M^(-1/2), the matrix W A W is symmetric
//! and exp(-t L) = W exp(-t W A W) W^-1. A single eigendecomposition then
//! serves every time point, and its eigendata doubles as the certificate
//! for eventual positivity. Pinned nodes are carried as zero rows and
//! columns (zero extension of the active block).



use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forms::{is_markovian, FormMatrix};

/// Dense snapshot of exp(-t L); pinned rows/columns are zero.
#[derive(Debug, Clone)]
pub struct SemigroupSnapshot {
    pub t: f64,
    pub matrix: DMatrix<f64>,
}

impl SemigroupSnapshot {
    pub fn min_entry(&self) -> f64 {
        self.matrix.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.amax()
    }
}

/// Eigendecomposition of the mass-symmetrized generator of one form,
/// reusable across time points.
#[derive(Debug, Clone)]
pub struct Propagator {
    n: usize,
    unpinned: Vec<usize>,
    /// Eigenvalues of the symmetrized block, ascending.
    eigenvalues: Vec<f64>,
    /// Columns are eigenvectors, matching `eigenvalues`.
    eigenvectors: DMatrix<f64>,
    m_inv_sqrt: Vec<f64>,
    m_sqrt: Vec<f64>,
}

impl Propagator {
    pub fn new(form: &FormMatrix) -> Propagator {
        let n = form.n();
        let unpinned = form.unpinned();
        let b = unpinned.len();
        let masses = form.domain().masses();
        let m_sqrt: Vec<f64> = unpinned.iter().map(|&i| masses[i].sqrt()).collect();
        let m_inv_sqrt: Vec<f64> = m_sqrt.iter().map(|s| 1.0 / s).collect();
        let mut sym = DMatrix::zeros(b, b);
        for (r, &i) in unpinned.iter().enumerate() {
            for (c, &j) in unpinned.iter().enumerate() {
                sym[(r, c)] = form.matrix()[(i, j)] * m_inv_sqrt[r] * m_inv_sqrt[c];
            }
        }
        // exact symmetry guards the eigensolver against roundoff asymmetry
        for r in 0..b {
            for c in (r + 1)..b {
                let v = 0.5 * (sym[(r, c)] + sym[(c, r)]);
                sym[(r, c)] = v;
                sym[(c, r)] = v;
            }
        }
        let (eigenvalues, eigenvectors) = if b == 0 {
            (Vec::new(), DMatrix::zeros(0, 0))
        } else {
            let eig = sym.symmetric_eigen();
            let mut order: Vec<usize> = (0..b).collect();
            order.sort_by(|&a, &c| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[c]));
            let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
            let mut vectors = DMatrix::zeros(b, b);
            for (col, &k) in order.iter().enumerate() {
                vectors.set_column(col, &eig.eigenvectors.column(k));
            }
            (values, vectors)
        };
        Propagator {
            n,
            unpinned,
            eigenvalues,
            eigenvectors,
            m_inv_sqrt,
            m_sqrt,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Eigenvector of the k-th smallest eigenvalue (symmetrized block).
    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn unpinned(&self) -> &[usize] {
        &self.unpinned
    }

    /// exp(-t L), zero-extended over pinned nodes. t = 0 yields the exact
    /// identity on the active block.
    pub fn snapshot(&self, t: f64) -> Result<SemigroupSnapshot> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidTime(t));
        }
        let mut full = DMatrix::zeros(self.n, self.n);
        if t == 0.0 {
            for &i in &self.unpinned {
                full[(i, i)] = 1.0;
            }
            return Ok(SemigroupSnapshot { t, matrix: full });
        }
        let b = self.unpinned.len();
        // block = W Q exp(-t D) Q' W^-1 with W = diag(m^-1/2)
        let mut scaled = DMatrix::zeros(b, b);
        for c in 0..b {
            let decay = (-t * self.eigenvalues[c]).exp();
            for r in 0..b {
                scaled[(r, c)] = self.m_inv_sqrt[r] * self.eigenvectors[(r, c)] * decay;
            }
        }
        let mut right = DMatrix::zeros(b, b);
        for r in 0..b {
            for c in 0..b {
                right[(r, c)] = self.eigenvectors[(c, r)] * self.m_sqrt[c];
            }
        }
        let block = scaled * right;
        for (r, &i) in self.unpinned.iter().enumerate() {
            for (c, &j) in self.unpinned.iter().enumerate() {
                full[(i, j)] = block[(r, c)];
            }
        }
        Ok(SemigroupSnapshot { t, matrix: full })
    }

    /// Minimum entry of the active block at time t (pinned zero rows are
    /// excluded so strict positivity is decidable).
    fn block_min_entry(&self, t: f64) -> Result<f64> {
        let snap = self.snapshot(t)?;
        let mut min = f64::INFINITY;
        for &i in &self.unpinned {
            for &j in &self.unpinned {
                min = min.min(snap.matrix[(i, j)]);
            }
        }
        Ok(min)
    }
}

/// exp(-t L) for a single time point; build a [`Propagator`] to evaluate a
/// whole grid.
pub fn expm(form: &FormMatrix, t: f64) -> Result<SemigroupSnapshot> {
    Propagator::new(form).snapshot(t)
}

/// Twofold positivity check: the sign pattern of the generator (off-diagonal
/// entries of A nonpositive) against the sampled minimum entry of the
/// semigroup over a time grid. The two verdicts agree in exact arithmetic;
/// a disagreement is flagged for the caller to escalate.
#[derive(Debug, Clone, Serialize)]
pub struct PositivityReport {
    pub algebraic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub algebraic_witness: Option<EntryWitness>,
    pub numerical: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<TimedEntryWitness>,
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntryWitness {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimedEntryWitness {
    pub t: f64,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("time grid is empty".into()));
    }
    for &t in times {
        if t.is_nan() || t < 0.0 {
            return Err(Error::InvalidTime(t));
        }
    }
    Ok(())
}

pub fn is_positivity_preserving(form: &FormMatrix, times: &[f64]) -> Result<PositivityReport> {
    validate_grid(times)?;
    let a = form.matrix();
    let tol = form.sign_tol();
    let mut algebraic_witness = None;
    'scan: for i in 0..form.n() {
        for j in 0..form.n() {
            if i != j && a[(i, j)] > tol {
                algebraic_witness = Some(EntryWitness {
                    i,
                    j,
                    value: a[(i, j)],
                });
                break 'scan;
            }
        }
    }
    let prop = Propagator::new(form);
    let mut worst: Option<TimedEntryWitness> = None;
    let mut numerical = true;
    for &t in times {
        let snap = prop.snapshot(t)?;
        let tol_t = 1e-10 * snap.max_abs().max(1.0);
        for i in 0..form.n() {
            for j in 0..form.n() {
                let v = snap.matrix[(i, j)];
                if worst.map_or(true, |w| v < w.value) {
                    worst = Some(TimedEntryWitness { t, i, j, value: v });
                }
                if v < -tol_t {
                    numerical = false;
                }
            }
        }
    }
    let algebraic = algebraic_witness.is_none();
    Ok(PositivityReport {
        algebraic,
        algebraic_witness,
        numerical,
        worst,
        consistent: algebraic == numerical,
    })
}

/// Entrywise comparison of two semigroups over a time grid, reported next
/// to the algebraic form-level criterion.
#[derive(Debug, Clone, Serialize)]
pub struct DominationReport {
    pub verdict: bool,
    pub times: Vec<f64>,
    /// Largest excess of the lower snapshot over the upper one; a positive
    /// value beyond tolerance is the violation witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<TimedEntryWitness>,
    pub form_level: bool,
    /// Sign-pattern positivity of the dominated form's generator.
    pub positivity: bool,
}

/// Form-level half of the domination criterion with pinned sets treated as
/// ideals: the dominated (smaller) semigroup may pin more nodes, and on the
/// common active block its form matrix must dominate entrywise.
fn form_level_domination(lower: &FormMatrix, upper: &FormMatrix) -> bool {
    if !lower.pinned().is_superset(upper.pinned()) {
        return false;
    }
    let tol =
        crate::forms::SIGN_TOL * lower.matrix().amax().max(upper.matrix().amax());
    let active = lower.unpinned();
    for &i in &active {
        for &j in &active {
            if lower.matrix()[(i, j)] - upper.matrix()[(i, j)] < -tol {
                return false;
            }
        }
    }
    true
}

/// Checks exp(-t L_lower) <= exp(-t L_upper) entrywise over the grid.
///
/// The default tolerance at each time is 1e-10 times the largest entry of
/// the upper snapshot. Smaller form means larger semigroup, so the reported
/// `form_level` verdict compares the matrices in the reversed order.
pub fn dominates(
    lower: &FormMatrix,
    upper: &FormMatrix,
    times: &[f64],
    tol: Option<f64>,
) -> Result<DominationReport> {
    if lower.domain() != upper.domain() {
        return Err(Error::DomainMismatch(
            "semigroup comparison needs a shared domain".into(),
        ));
    }
    validate_grid(times)?;
    let lower_prop = Propagator::new(lower);
    let upper_prop = Propagator::new(upper);
    let mut worst: Option<TimedEntryWitness> = None;
    let mut verdict = true;
    for &t in times {
        let sl = lower_prop.snapshot(t)?;
        let su = upper_prop.snapshot(t)?;
        let tol_t = tol.unwrap_or_else(|| 1e-10 * su.max_abs().max(f64::MIN_POSITIVE));
        for i in 0..lower.n() {
            for j in 0..lower.n() {
                let excess = sl.matrix[(i, j)] - su.matrix[(i, j)];
                if worst.map_or(true, |w| excess > w.value) {
                    worst = Some(TimedEntryWitness {
                        t,
                        i,
                        j,
                        value: excess,
                    });
                }
                if excess > tol_t {
                    verdict = false;
                }
            }
        }
    }
    // positivity of the dominated semigroup is the Metzler sign condition
    // alone; killing does not affect it
    let positivity = !matches!(
        is_markovian(lower),
        crate::forms::Markovianity::PositiveOffDiagonal { .. }
    );
    Ok(DominationReport {
        verdict,
        times: times.to_vec(),
        worst,
        form_level: form_level_domination(lower, upper),
        positivity,
    })
}

/// Spectral certificate for eventual positivity: simple smallest eigenvalue
/// with an eigenvector of one strict sign.
#[derive(Debug, Clone, Serialize)]
pub struct PerronCertificate {
    pub holds: bool,
    pub smallest_eigenvalue: f64,
    pub spectral_gap: f64,
    pub simple: bool,
    pub eigenvector_positive: bool,
    pub min_eigenvector_entry: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EventualPositivity {
    pub verdict: bool,
    /// Smallest grid-refined time with a strictly positive active block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_star: Option<f64>,
    pub certificate: PerronCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

const CERT_TOL: f64 = 1e-10;

fn perron_certificate(prop: &Propagator) -> PerronCertificate {
    let ev = prop.eigenvalues();
    if ev.is_empty() {
        return PerronCertificate {
            holds: false,
            smallest_eigenvalue: f64::NAN,
            spectral_gap: f64::NAN,
            simple: false,
            eigenvector_positive: false,
            min_eigenvector_entry: f64::NAN,
        };
    }
    let smallest = ev[0];
    let scale = ev.last().unwrap().abs().max(1.0);
    let gap = if ev.len() > 1 { ev[1] - ev[0] } else { f64::INFINITY };
    let simple = gap > CERT_TOL * scale;
    let mut vec = prop.eigenvector(0);
    let lead = vec.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        vec.neg_mut();
    }
    let min_entry = vec.iter().copied().fold(f64::INFINITY, f64::min);
    let eigenvector_positive = min_entry > CERT_TOL;
    PerronCertificate {
        holds: simple && eigenvector_positive,
        smallest_eigenvalue: smallest,
        spectral_gap: gap,
        simple,
        eigenvector_positive,
        min_eigenvector_entry: min_entry,
    }
}

/// Decides eventual positivity of the active block and locates the onset
/// time by bisection on the sign of the minimum entry over [0, t_max].
pub fn eventually_positive(
    form: &FormMatrix,
    t_max: f64,
    bisect_tol: f64,
) -> Result<EventualPositivity> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "t_max must be positive and finite, got {t_max}"
        )));
    }
    if !(bisect_tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bisection tolerance must be positive, got {bisect_tol}"
        )));
    }
    let prop = Propagator::new(form);
    let certificate = perron_certificate(&prop);
    if !certificate.holds {
        return Ok(EventualPositivity {
            verdict: false,
            t_star: None,
            reason: Some(if !certificate.simple {
                "smallest eigenvalue of the symmetrized generator is not simple".into()
            } else {
                "leading eigenvector cannot be scaled strictly positive".into()
            }),
            certificate,
        });
    }
    if !(prop.block_min_entry(t_max)? > 0.0) {
        return Ok(EventualPositivity {
            verdict: false,
            t_star: None,
            reason: Some(format!("minimum entry still nonpositive at t_max = {t_max}")),
            certificate,
        });
    }
    let mut lo = 0.0;
    let mut hi = t_max;
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if prop.block_min_entry(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(EventualPositivity {
        verdict: true,
        t_star: Some(hi),
        certificate,
        reason: None,
    })
}

/// (t, min entry of exp(-t L)) over the grid; pinned zero rows included, so
/// pinned forms report nonpositive values by construction.
pub fn min_entry_profile(form: &FormMatrix, times: &[f64]) -> Result<Vec<(f64, f64)>> {
    validate_grid(times)?;
    let prop = Propagator::new(form);
    times
        .iter()
        .map(|&t| Ok((t, prop.snapshot(t)?.min_entry())))
        .collect()
}

/// Default grid for checks: zero plus four decades around unit time.
pub fn default_time_grid() -> Vec<f64> {
    vec![0.0, 0.001, 0.01, 0.1, 1.0, 10.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_graph, build_interval, unit_three_path};
    use crate::forms::{
        dirichlet_form, neumann_form, nonlocal_robin_form, robin_form, BoundaryMeasure,
        BoundaryOperator,
    };
    use std::sync::Arc;

    fn unit_path() -> Arc<crate::domain::Domain> {
        Arc::new(unit_three_path())
    }

    #[test]
    fn snapshot_at_zero_is_identity_on_active_block() {
        let d = unit_path();
        let mu = BoundaryMeasure::new(vec![f64::INFINITY, 2.0]).unwrap();
        let f = robin_form(&d, &mu).unwrap();
        let s = expm(&f, 0.0).unwrap();
        let mut expected = DMatrix::zeros(3, 3);
        expected[(1, 1)] = 1.0;
        expected[(2, 2)] = 1.0;
        assert_eq!(s.matrix, expected);
    }

    #[test]
    fn zero_form_gives_identity() {
        let d = unit_path();
        let f = FormMatrix::from_parts(d, DMatrix::zeros(3, 3), Default::default()).unwrap();
        let s = expm(&f, 3.7).unwrap();
        assert!((s.matrix - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn neumann_converges_to_uniform_projection() {
        let d = unit_path();
        let f = neumann_form(&d);
        let s = expm(&f, 60.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((s.matrix[(i, j)] - 1.0 / 3.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_negative_time() {
        let d = unit_path();
        let f = neumann_form(&d);
        assert!(matches!(expm(&f, -1.0), Err(Error::InvalidTime(_))));
    }

    #[test]
    fn positivity_verdicts() {
        let d = unit_path();
        let grid = [0.01, 0.1, 1.0];
        let rep = is_positivity_preserving(&neumann_form(&d), &grid).unwrap();
        assert!(rep.algebraic && rep.numerical && rep.consistent);

        let mu = BoundaryMeasure::new(vec![1.0, 2.0]).unwrap();
        let rep = is_positivity_preserving(&robin_form(&d, &mu).unwrap(), &grid).unwrap();
        assert!(rep.algebraic && rep.numerical);

        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let rep =
            is_positivity_preserving(&nonlocal_robin_form(&d, &b).unwrap(), &grid).unwrap();
        assert!(!rep.algebraic && !rep.numerical && rep.consistent);
        let w = rep.algebraic_witness.unwrap();
        assert_eq!((w.i, w.j), (0, 2));

        assert!(is_positivity_preserving(&neumann_form(&d), &[]).is_err());
    }

    #[test]
    fn nonlocal_entry_first_order_at_small_time() {
        // entry (0, 2) of exp(-tA) on the unit 3-path is -t + O(t^2)
        let d = unit_path();
        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = nonlocal_robin_form(&d, &b).unwrap();
        let s = expm(&f, 0.01).unwrap();
        let v = s.matrix[(0, 2)];
        assert!((v - (-0.01)).abs() <= 0.1 * 0.01, "entry {v}");
        assert!((v - (-0.0099)).abs() < 5e-4);
    }

    #[test]
    fn domination_triple_on_unit_path() {
        let d = unit_path();
        let grid = [0.01, 0.1, 1.0, 10.0];
        let mu = BoundaryMeasure::new(vec![1.0, 2.0]).unwrap();
        let robin = robin_form(&d, &mu).unwrap();
        let neumann = neumann_form(&d);
        let dirichlet = dirichlet_form(&d).unwrap();

        let up = dominates(&robin, &neumann, &grid, None).unwrap();
        assert!(up.verdict && up.form_level && up.positivity);

        let low = dominates(&dirichlet, &robin, &grid, None).unwrap();
        assert!(low.verdict && low.form_level);

        let rev = dominates(&neumann, &robin, &grid, None).unwrap();
        assert!(!rev.verdict);
        assert!(!rev.form_level);
        let w = rev.worst.unwrap();
        assert_eq!(w.i, w.j);
        assert!(w.value > 0.0);
    }

    #[test]
    fn domination_rejects_different_domains() {
        let a = unit_path();
        let b = Arc::new(build_interval(3, 1.0).unwrap());
        let r = dominates(&neumann_form(&a), &neumann_form(&b), &[1.0], None);
        assert!(matches!(r, Err(Error::DomainMismatch(_))));
    }

    #[test]
    fn eventual_positivity_neumann_is_immediate() {
        let d = unit_path();
        let r = eventually_positive(&neumann_form(&d), 10.0, 1e-6).unwrap();
        assert!(r.verdict);
        assert!(r.t_star.unwrap() <= 1e-5);
        assert!(r.certificate.holds);
    }

    #[test]
    fn eventual_positivity_fem_aw45_instance() {
        let d = Arc::new(build_interval(3, 1.0).unwrap());
        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = nonlocal_robin_form(&d, &b).unwrap();
        let r = eventually_positive(&f, 10.0, 1e-6).unwrap();
        assert!(r.verdict);
        let t_star = r.t_star.unwrap();
        assert!(t_star > 0.01 && t_star < 1.0, "t* = {t_star}");
        assert!(r.certificate.simple && r.certificate.eigenvector_positive);
    }

    #[test]
    fn eventual_positivity_degenerate_unit_path_instance() {
        // on the unit-weight path the smallest eigenvalue is double and the
        // asymptotic profile keeps a negative corner entry
        let d = unit_path();
        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let f = nonlocal_robin_form(&d, &b).unwrap();
        let r = eventually_positive(&f, 10.0, 1e-6).unwrap();
        assert!(!r.verdict);
        assert!(!r.certificate.simple);
    }

    #[test]
    fn eventual_positivity_disconnected_graph_fails() {
        let d = Arc::new(build_graph(&[(0, 1, 1.0), (2, 3, 1.0)], &[0, 2], None, None).unwrap());
        let f = neumann_form(&d);
        let r = eventually_positive(&f, 5.0, 1e-6).unwrap();
        assert!(!r.verdict);
    }

    #[test]
    fn min_entry_profile_values() {
        let d = unit_path();
        let f = neumann_form(&d);
        let profile = min_entry_profile(&f, &[0.0, 1.0]).unwrap();
        assert_eq!(profile[0], (0.0, 0.0));
        assert!(profile[1].1 > 0.0);

        let b = BoundaryOperator::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let nl = nonlocal_robin_form(&d, &b).unwrap();
        let profile = min_entry_profile(&nl, &[0.01]).unwrap();
        assert!(profile[0].1 < 0.0);
    }

    #[test]
    fn semigroup_law_small() {
        let d = unit_path();
        let mu = BoundaryMeasure::new(vec![1.0, 2.0]).unwrap();
        let f = robin_form(&d, &mu).unwrap();
        let p = Propagator::new(&f);
        let s = p.snapshot(0.7).unwrap();
        let t = p.snapshot(1.6).unwrap();
        let st = p.snapshot(2.3).unwrap();
        let prod = &s.matrix * &t.matrix;
        assert!((prod - st.matrix).amax() < 1e-12);
    }
}
