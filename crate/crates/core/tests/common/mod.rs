//! Shared test oracles and generators, independent of the library's
//! spectral code paths.

// each test binary uses its own subset of these helpers
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use formlab::bdl::BdlParts;
use formlab::domain::Domain;
use formlab::forms::FormMatrix;

/// Matrix exponential by Pade-13 scaling and squaring (Higham's constants).
/// Kept deliberately separate from the spectral route it cross-checks.
pub fn expm_scaling_squaring(a: &DMatrix<f64>) -> DMatrix<f64> {
    const THETA13: f64 = 5.371920351148152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ];
    let n = a.nrows();
    let one_norm = (0..a.ncols())
        .map(|c| a.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0i32;
    let mut m = a.clone();
    if one_norm > THETA13 {
        squarings = (one_norm / THETA13).log2().ceil() as i32;
        m /= 2f64.powi(squarings);
    }
    let identity = DMatrix::identity(n, n);
    let m2 = &m * &m;
    let m4 = &m2 * &m2;
    let m6 = &m4 * &m2;
    let u = &m
        * (&m6 * (B[13] * &m6 + B[11] * &m4 + B[9] * &m2)
            + B[7] * &m6
            + B[5] * &m4
            + B[3] * &m2
            + B[1] * &identity);
    let v = &m6 * (B[12] * &m6 + B[10] * &m4 + B[8] * &m2)
        + B[6] * &m6
        + B[4] * &m4
        + B[2] * &m2
        + B[0] * &identity;
    let denom = &v - &u;
    let numer = &v + &u;
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Pade denominator is invertible");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// exp(-t M^-1 A) computed with the scaling-and-squaring oracle on the
/// active block, zero-extended over pinned nodes.
pub fn oracle_snapshot(form: &FormMatrix, t: f64) -> DMatrix<f64> {
    let n = form.n();
    let active = form.unpinned();
    let masses = form.domain().masses();
    let b = active.len();
    let mut gen = DMatrix::zeros(b, b);
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            gen[(r, c)] = -t * form.matrix()[(i, j)] / masses[i];
        }
    }
    let block = expm_scaling_squaring(&gen);
    let mut full = DMatrix::zeros(n, n);
    for (r, &i) in active.iter().enumerate() {
        for (c, &j) in active.iter().enumerate() {
            full[(i, j)] = block[(r, c)];
        }
    }
    full
}

/// Random symmetric matrix with entries in [-1, 1), wrapped over `domain`.
pub fn random_symmetric_form<R: Rng>(rng: &mut R, domain: &Arc<Domain>) -> FormMatrix {
    let n = domain.n_nodes();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-1.0..1.0);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
    FormMatrix::from_parts(domain.clone(), a, Default::default())
        .expect("random symmetric matrix is a valid form")
}

/// Random Markovian form that the Neumann semigroup provably dominates:
/// stencil jumps at most the conductances and killing at least the coupling
/// deficit, so the form gap is entrywise nonnegative.
pub fn random_dominated_markovian_form<R: Rng>(rng: &mut R, domain: &Arc<Domain>) -> FormMatrix {
    let n = domain.n_nodes();
    let stencil_jump: Vec<f64> = domain
        .edges()
        .iter()
        .map(|e| rng.gen_range(0.0..=1.0) * e.conductance)
        .collect();
    let mut deficit = vec![0.0; n];
    for (e, &j) in domain.edges().iter().zip(&stencil_jump) {
        deficit[e.i] += e.conductance - j;
        deficit[e.j] += e.conductance - j;
    }
    let mut killing = deficit;
    for &b in domain.boundary() {
        killing[b] += rng.gen_range(0.0..2.0);
    }
    let parts = BdlParts {
        stencil_jump,
        nonlocal_jump: BTreeMap::new(),
        killing,
        markovian: true,
    };
    formlab::bdl_reconstruct(&parts, domain).expect("parts are consistent with the domain")
}

/// Componentwise distance between two decompositions.
pub fn parts_distance(a: &BdlParts, b: &BdlParts) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.stencil_jump.iter().zip(&b.stencil_jump) {
        worst = worst.max((x - y).abs());
    }
    for (x, y) in a.killing.iter().zip(&b.killing) {
        worst = worst.max((x - y).abs());
    }
    let keys: std::collections::BTreeSet<_> = a
        .nonlocal_jump
        .keys()
        .chain(b.nonlocal_jump.keys())
        .collect();
    for key in keys {
        let x = a.nonlocal_jump.get(key).copied().unwrap_or(0.0);
        let y = b.nonlocal_jump.get(key).copied().unwrap_or(0.0);
        worst = worst.max((x - y).abs());
    }
    worst
}
