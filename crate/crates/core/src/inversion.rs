//! Inverses of planar and Sylvester flows.
//!
//! A Sylvester flow only moves `z` inside the span `W` of the columns of `Q`.
//! Writing `v = Qᵀz`, the parallel coordinates satisfy
//! `v′ = v + R h(R̃ v + b)`, an upper-triangular system of strictly
//! increasing scalar maps that is solved from the last coordinate upwards.
//! When `R̃` is not diagonal the substitution `y = R̃ v` turns the system into
//! one with an identity inner matrix first.
//!
//! Gated IAF flows invert coordinate by coordinate: output `i` only depends
//! on `z_<i`, so `D` conditioner passes recover `z` exactly.
//!
//! Nothing in training depends on this module; it exists to verify the
//! forward passes.

use crate::error::{Error, Result};
use crate::flows::{
    made_outputs, Activation, Flow, FlowStack, MadeParams, OrthogonalFactor, PlanarParams,
    SylvesterParams,
};
use crate::linalg::{Matrix, UpperTriangular};

pub const DEFAULT_TOL: f64 = 1e-12;

/// `|r̃_ii|` below this makes the substitution `y = R̃ v` unusable.
pub const MIN_PIVOT: f64 = 1e-9;

/// Off-diagonal magnitude under which `R̃` counts as diagonal.
pub const DIAGONAL_TOL: f64 = 1e-14;

/// Bisection stops at this bracket width before Newton takes over.
const BISECTION_WIDTH: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;
/// Newton polishing steps applied to the parallel coordinates.
const REFINEMENT_STEPS: usize = 3;

/// Solve `f(v) = v + r h(r̃ v + b) = target` for `v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarRootProblem {
    pub r: f64,
    pub r_tilde: f64,
    pub b: f64,
    pub target: f64,
    pub activation: Activation,
}

impl ScalarRootProblem {
    pub fn eval(&self, v: f64) -> f64 {
        v + self.r * self.activation.apply(self.r_tilde * v + self.b)
    }

    pub fn derivative(&self, v: f64) -> f64 {
        1.0 + self.r * self.r_tilde * self.activation.derivative(self.r_tilde * v + self.b)
    }

    /// `1 + ‖h′‖_∞ · min(0, r r̃) > 0`, which makes `f` strictly increasing.
    pub fn is_monotone(&self) -> bool {
        1.0 + self.activation.derivative_bound() * (self.r * self.r_tilde).min(0.0) > 0.0
    }

    /// `|f(v) − v| ≤ |r| sup|h|`, so the root lies within that distance of the target.
    pub fn bracket(&self) -> (f64, f64) {
        let half = self.r.abs() * self.activation.range_bound();
        (self.target - half, self.target + half)
    }
}

/// Bracketed bisection down to a narrow interval, then safeguarded Newton.
pub fn invert_scalar(p: &ScalarRootProblem, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParams(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    if !p.is_monotone() {
        return Err(Error::NonInvertible(format!(
            "r·r̃ = {} leaves f non-monotone",
            p.r * p.r_tilde
        )));
    }
    if !(p.r.is_finite() && p.r_tilde.is_finite() && p.b.is_finite() && p.target.is_finite()) {
        return Err(Error::NonFinite(
            "scalar root problem has non-finite data".into(),
        ));
    }
    if p.r == 0.0 {
        return Ok(p.target);
    }
    let g = |v: f64| p.eval(v) - p.target;
    // Where h saturates, f(v) − v reaches ±|r| sup|h| up to rounding, so the
    // exact ends can land on the wrong side of the target.
    let (lo, hi) = p.bracket();
    let pad = 8.0 * f64::EPSILON * (p.target.abs() + p.r.abs() + 1.0);
    let (mut lo, mut hi) = (lo - pad, hi + pad);
    if g(lo) > 0.0 || g(hi) < 0.0 {
        return Err(Error::RootFinding(format!(
            "target {} is not bracketed by [{lo}, {hi}]",
            p.target
        )));
    }

    for _ in 0..MAX_ITERATIONS {
        if hi - lo <= BISECTION_WIDTH {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut v = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let gv = g(v);
        if gv.abs() <= tol {
            return Ok(v);
        }
        if gv > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let newton = v - gv / p.derivative(v);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == v {
            // No representable progress left; accept if we are at rounding level.
            let slack = 4.0 * f64::EPSILON * (p.target.abs() + p.r.abs() + 1.0);
            if gv.abs() <= tol.max(slack) {
                return Ok(v);
            }
            break;
        }
        v = next;
    }
    Err(Error::RootFinding(format!(
        "no root within {tol} of target {} (last residual {})",
        p.target,
        g(v)
    )))
}

/// Solves `v′ = v + R h(R̃ v + b)` for diagonal `R̃`, last coordinate first.
fn solve_diagonal(
    r: &UpperTriangular,
    r_tilde_diag: &[f64],
    bias: &[f64],
    v_prime: &[f64],
    act: Activation,
    tol: f64,
) -> Result<Vec<f64>> {
    let m = v_prime.len();
    let mut v = vec![0.0; m];
    let mut h = vec![0.0; m];
    for i in (0..m).rev() {
        let coupled: f64 = (i + 1..m).map(|j| r.get(i, j) * h[j]).sum();
        let problem = ScalarRootProblem {
            r: r.diag(i),
            r_tilde: r_tilde_diag[i],
            b: bias[i],
            target: v_prime[i] - coupled,
            activation: act,
        };
        v[i] = invert_scalar(&problem, tol)?;
        h[i] = act.apply(r_tilde_diag[i] * v[i] + bias[i]);
    }
    Ok(v)
}

/// Inverse of a Sylvester flow; `forward(result)` reproduces `z_prime` up to
/// the root-finding tolerance.
pub fn invert_sylvester(
    p: &SylvesterParams,
    z_prime: &[f64],
    act: Activation,
    tol: f64,
) -> Result<Vec<f64>> {
    let d = p.dim();
    if z_prime.len() != d {
        return Err(Error::Dimension(format!(
            "Sylvester flow in dimension {d} inverted at a vector of length {}",
            z_prime.len()
        )));
    }
    let q = p.q();
    let v_prime = q.apply_transpose(z_prime);

    let r_tilde = p.r_tilde();
    let v = if r_tilde.max_off_diagonal() < DIAGONAL_TOL {
        solve_diagonal(p.r(), &r_tilde.diagonal(), p.bias(), &v_prime, act, tol)?
    } else {
        for (i, d) in r_tilde.diagonal().iter().enumerate() {
            if d.abs() < MIN_PIVOT {
                return Err(Error::NonInvertible(format!(
                    "r̃_{i}{i} = {d} is too small to change variables"
                )));
            }
        }
        // y = R̃ v turns the system into y′ = y + (R̃R) h(y + b).
        let y_prime = r_tilde.matvec(&v_prime);
        let ones = vec![1.0; y_prime.len()];
        let y = solve_diagonal(&r_tilde.mul(p.r()), &ones, p.bias(), &y_prime, act, tol)?;
        r_tilde.solve(&y)?
    };
    // Björck stops at a residual of about 1e−6, and the solves above assume
    // QᵀQ = I; refining against the actual Gram matrix removes that error.
    let gram = match q {
        OrthogonalFactor::Columns(c) => Some(c.matrix().gram()),
        _ => None,
    };
    let v = refine(p, v, &v_prime, gram.as_ref(), act)?;

    // z = z′ − Q R h(R̃ v + b) with v = Qᵀz.
    let h: Vec<f64> = r_tilde
        .matvec(&v)
        .iter()
        .zip(p.bias())
        .map(|(x, b)| act.apply(x + b))
        .collect();
    let shift = q.apply(&p.r().matvec(&h));
    Ok(z_prime.iter().zip(&shift).map(|(a, b)| a - b).collect())
}

/// Newton steps on `F(v) = v + G R h(R̃ v + b) − v′`, `G = QᵀQ` (identity
/// when absent).
///
/// Solving through `y = R̃ v` loses accuracy in proportion to `1 / |r̃_ii|`;
/// with `G = I` the Jacobian `I + R diag(h′) R̃` is upper triangular with
/// diagonal `1 + h′ r_ii r̃_ii > 0`, so a few polishing steps restore it.
fn refine(
    p: &SylvesterParams,
    mut v: Vec<f64>,
    v_prime: &[f64],
    gram: Option<&Matrix>,
    act: Activation,
) -> Result<Vec<f64>> {
    let (r, r_tilde) = (p.r(), p.r_tilde());
    let residual = |v: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let pre: Vec<f64> = r_tilde.matvec(v).iter().zip(p.bias()).map(|(x, b)| x + b).collect();
        let h: Vec<f64> = pre.iter().map(|&x| act.apply(x)).collect();
        let mut shift = r.matvec(&h);
        if let Some(g) = gram {
            shift = g.matvec(&shift);
        }
        let f = shift.iter().zip(v).zip(v_prime).map(|((s, a), t)| a + s - t).collect();
        (f, pre)
    };
    let norm = |x: &[f64]| x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let (mut f, mut pre) = residual(&v);
    for _ in 0..REFINEMENT_STEPS {
        if norm(&f) == 0.0 {
            break;
        }
        let slopes: Vec<f64> = pre.iter().map(|&x| act.derivative(x)).collect();
        let coupling = r
            .as_matrix()
            .matmul(&Matrix::diag(&slopes).matmul(r_tilde.as_matrix()));
        let step = match gram {
            None => UpperTriangular::from_upper(&Matrix::identity(v.len()).add(&coupling)).solve(&f)?,
            Some(g) => solve_dense(Matrix::identity(v.len()).add(&g.matmul(&coupling)), f.clone())?,
        };
        let candidate: Vec<f64> = v.iter().zip(&step).map(|(a, d)| a - d).collect();
        let (f_new, pre_new) = residual(&candidate);
        if !(norm(&f_new) < norm(&f)) {
            break;
        }
        (v, f, pre) = (candidate, f_new, pre_new);
    }
    Ok(v)
}

/// Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Matrix, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[(i, c)].abs().total_cmp(&a[(j, c)].abs()))
            .unwrap_or(c);
        if a[(p, c)] == 0.0 {
            return Err(Error::SingularJacobian(0.0));
        }
        if p != c {
            for k in 0..n {
                let t = a[(p, k)];
                a[(p, k)] = a[(c, k)];
                a[(c, k)] = t;
            }
            b.swap(p, c);
        }
        for r in c + 1..n {
            let f = a[(r, c)] / a[(c, c)];
            for k in c..n {
                let x = a[(c, k)];
                a[(r, k)] -= f * x;
            }
            b[r] -= f * b[c];
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| a[(c, k)] * b[k]).sum();
        b[c] = (b[c] - s) / a[(c, c)];
    }
    Ok(b)
}

/// Inverse of a planar flow through its one-dimensional Sylvester form.
pub fn invert_planar(
    p: &PlanarParams,
    z_prime: &[f64],
    act: Activation,
    tol: f64,
) -> Result<Vec<f64>> {
    let (u, w) = (p.u(), p.w());
    if z_prime.len() != w.len() {
        return Err(Error::Dimension(format!(
            "planar flow in dimension {} inverted at a vector of length {}",
            w.len(),
            z_prime.len()
        )));
    }
    let uw: f64 = u.iter().zip(w).map(|(a, b)| a * b).sum();
    if uw <= -1.0 + MIN_PIVOT {
        return Err(Error::NonInvertible(format!(
            "planar uᵀw = {uw} is at the boundary −1"
        )));
    }
    // α = wᵀz solves α + (wᵀu) h(α + b) = wᵀz′.
    let problem = ScalarRootProblem {
        r: uw,
        r_tilde: 1.0,
        b: p.b(),
        target: w.iter().zip(z_prime).map(|(a, b)| a * b).sum(),
        activation: act,
    };
    let alpha = invert_scalar(&problem, tol)?;
    let h = act.apply(alpha + p.b());
    Ok(z_prime.iter().zip(u).map(|(z, u)| z - u * h).collect())
}

/// Inverse of a gated IAF flow.
pub fn invert_iaf(made: &MadeParams, context: &[f64], z_prime: &[f64]) -> Result<Vec<f64>> {
    let d = made.dim();
    if z_prime.len() != d {
        return Err(Error::Dimension(format!(
            "IAF in dimension {d} inverted at a vector of length {}",
            z_prime.len()
        )));
    }
    let mut z = vec![0.0; d];
    for i in 0..d {
        let (mu, s) = made_outputs(made, &z, context)?;
        let gate = 1.0 / (1.0 + (-s[i]).exp());
        if gate == 0.0 {
            return Err(Error::NonInvertible(format!("IAF gate {i} is closed")));
        }
        z[i] = (z_prime[i] - (1.0 - gate) * mu[i]) / gate;
    }
    Ok(z)
}

/// Inverse of one flow of a stack.
pub fn invert_flow(flow: &Flow, z_prime: &[f64], act: Activation, tol: f64) -> Result<Vec<f64>> {
    match flow {
        Flow::Planar(p) => invert_planar(p, z_prime, act, tol),
        Flow::Sylvester(p) => invert_sylvester(p, z_prime, act, tol),
        Flow::Iaf { made, context } => invert_iaf(made, context, z_prime),
        Flow::Reverse { .. } => Ok(z_prime.iter().rev().copied().collect()),
        Flow::GeneralSylvester(_) => Err(Error::NonInvertible(
            "general Sylvester flows have no constructive inverse".into(),
        )),
    }
}

/// Inverse of a whole stack, undoing the flows last to first.
pub fn invert_stack(stack: &FlowStack, z_prime: &[f64], tol: f64) -> Result<Vec<f64>> {
    let mut z = z_prime.to_vec();
    for flow in stack.flows().iter().rev() {
        z = invert_flow(flow, &z, stack.activation(), tol)?;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::flows::{
        iaf_forward, planar_forward, stack_forward, sylvester_forward, OrthogonalFactor,
        PermutationOrder,
    };
    use crate::linalg::{
        bjorck_orthogonalize, BjorckSettings, HouseholderChain, Matrix, OrthonormalColumns,
    };
    use crate::seeded_rng;

    const ACT: Activation = Activation::Tanh;

    fn scalar(r: f64, r_tilde: f64, b: f64, target: f64) -> ScalarRootProblem {
        ScalarRootProblem {
            r,
            r_tilde,
            b,
            target,
            activation: ACT,
        }
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn random_matrix(rng: &mut crate::Rng, r: usize, c: usize, scale: f64) -> Matrix {
        Matrix::from_vec(
            r,
            c,
            (0..r * c)
                .map(|_| rng.random_range(-scale..scale))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_r_returns_target() {
        assert_eq!(
            invert_scalar(&scalar(0.0, 0.7, 0.2, 3.5), DEFAULT_TOL).unwrap(),
            3.5
        );
    }

    #[test]
    fn saturated_root_sits_on_the_bracket_end() {
        // tanh rounds to ±1 near these roots and the targets carry a few ulps
        // of rounding (as wᵀz′ does for planar flows), putting the root a
        // hair outside the exact bracket.
        for (r, b, target) in [
            (-0.43509883307000585, 0.6217524290861927, -28.08380644671391),
            (1.628432107089841, 0.7541551925101375, 25.159917251261906),
            (1.9792658638683598, 0.5425730996866616, 39.20218758021689),
        ] {
            let p = ScalarRootProblem {
                target,
                ..scalar(r, 1.0, b, 0.0)
            };
            let v = invert_scalar(&p, DEFAULT_TOL).unwrap();
            assert!((p.eval(v) - target).abs() <= 1e-12, "{target}");
        }
    }

    #[test]
    fn recovers_known_root() {
        let target = 1.0 + 0.5 * 0.5f64.tanh();
        let v = invert_scalar(&scalar(0.5, 0.5, 0.0, target), DEFAULT_TOL).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }

    #[test]
    fn negative_product_round_trips() {
        let mut rng = seeded_rng(61);
        for _ in 0..50 {
            let v0: f64 = rng.random_range(-5.0..5.0);
            let b = rng.random_range(-1.0..1.0);
            let p = scalar(-0.9, 0.9, b, 0.0);
            let p = ScalarRootProblem {
                target: p.eval(v0),
                ..p
            };
            let v = invert_scalar(&p, DEFAULT_TOL).unwrap();
            assert!((v - v0).abs() < 1e-10, "{v} vs {v0}");
        }
    }

    #[test]
    fn rejects_non_monotone_problems() {
        assert!(matches!(
            invert_scalar(&scalar(-1.0, 1.0, 0.0, 0.3), DEFAULT_TOL),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn zero_r_sylvester_is_identity() {
        let d = 3;
        let q = OrthogonalFactor::Permutation {
            dim: d,
            order: PermutationOrder::Identity,
        };
        let zero = UpperTriangular::zeros(d);
        let p = SylvesterParams::new(q, zero.clone(), zero, vec![0.3; d], ACT).unwrap();
        let z = [1.0, -2.0, 0.5];
        assert_eq!(
            invert_sylvester(&p, &z, ACT, DEFAULT_TOL).unwrap(),
            z.to_vec()
        );
    }

    #[test]
    fn perpendicular_part_passes_through() {
        let q = OrthonormalColumns::new(Matrix::eye(3, 1), 1e-12).unwrap();
        let r = UpperTriangular::new(Matrix::from_rows(&[vec![0.8]])).unwrap();
        let rt = UpperTriangular::new(Matrix::from_rows(&[vec![0.6]])).unwrap();
        let p = SylvesterParams::new(OrthogonalFactor::Columns(q), r, rt, vec![0.0], ACT).unwrap();
        let z = invert_sylvester(&p, &[0.0, 2.0, 3.0], ACT, DEFAULT_TOL).unwrap();
        assert_eq!(&z[1..], &[2.0, 3.0]);
        assert!(z[0].abs() < 1e-14);
    }

    fn orthogonal_instance(rng: &mut crate::Rng, d: usize, m: usize, eps: f64) -> SylvesterParams {
        let raw = random_matrix(rng, d, m, 1.0);
        let scale = 0.5 / raw.frobenius_norm();
        let seed = Matrix::eye(d, m).add(&raw.scale(scale));
        let settings = BjorckSettings {
            eps,
            ..Default::default()
        };
        let q = bjorck_orthogonalize(&seed, settings).unwrap();
        let r = random_matrix(rng, m, m, 1.5);
        let rt = random_matrix(rng, m, m, 1.5);
        let b = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        SylvesterParams::from_raw(OrthogonalFactor::Columns(q), &r, &rt, b, ACT).unwrap()
    }

    #[test]
    fn orthogonal_round_trip() {
        let mut rng = seeded_rng(62);
        let p = orthogonal_instance(&mut rng, 6, 4, 1e-14);
        for _ in 0..100 {
            let z: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (zp, _) = sylvester_forward(&p, &z, ACT).unwrap();
            let back = invert_sylvester(&p, &zp, ACT, DEFAULT_TOL).unwrap();
            assert!(max_diff(&back, &z) < 1e-8);
            let (again, _) = sylvester_forward(&p, &back, ACT).unwrap();
            assert!(max_diff(&again, &zp) < 1e-8);
        }
    }

    #[test]
    fn loosely_orthonormal_columns_still_round_trip() {
        let mut rng = seeded_rng(63);
        let mut loosest = 0.0f64;
        for _ in 0..40 {
            let p = orthogonal_instance(&mut rng, 5, 3, 1e-6);
            if let OrthogonalFactor::Columns(q) = p.q() {
                loosest = loosest.max(q.residual());
            }
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-6.0..6.0)).collect();
            let (zp, _) = sylvester_forward(&p, &z, ACT).unwrap();
            let back = invert_sylvester(&p, &zp, ACT, DEFAULT_TOL).unwrap();
            let (again, _) = sylvester_forward(&p, &back, ACT).unwrap();
            assert!(max_diff(&again, &zp) < 1e-12, "{}", max_diff(&again, &zp));
            assert!(max_diff(&back, &z) < 1e-10);
        }
        assert!(loosest > 1e-9, "instances should stop well short of exact orthonormality");
    }

    #[test]
    fn householder_and_triangular_round_trip() {
        let mut rng = seeded_rng(63);
        let d = 5;
        let vectors = (0..3).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
        let h = HouseholderChain::new(d, vectors.collect()).unwrap();
        for q in [
            OrthogonalFactor::Householder(h),
            OrthogonalFactor::Permutation {
                dim: d,
                order: PermutationOrder::Reverse,
            },
        ] {
            let r = random_matrix(&mut rng, d, d, 2.0);
            let rt = random_matrix(&mut rng, d, d, 2.0);
            let p = SylvesterParams::from_raw(q, &r, &rt, vec![0.2; d], ACT).unwrap();
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let (zp, _) = sylvester_forward(&p, &z, ACT).unwrap();
            let back = invert_sylvester(&p, &zp, ACT, DEFAULT_TOL).unwrap();
            assert!(max_diff(&back, &z) < 1e-8);
        }
    }

    #[test]
    fn diagonal_r_tilde_uses_back_substitution() {
        let d = 3;
        let q = OrthogonalFactor::Permutation {
            dim: d,
            order: PermutationOrder::Identity,
        };
        let r = UpperTriangular::new(Matrix::from_rows(&[
            vec![0.5, 1.0, -2.0],
            vec![0.0, -0.4, 0.7],
            vec![0.0, 0.0, 0.9],
        ]))
        .unwrap();
        // A zero pivot in a diagonal R̃ is fine: that coordinate is just shifted.
        let rt = UpperTriangular::new(Matrix::diag(&[0.3, 0.0, -0.8])).unwrap();
        let p = SylvesterParams::new(q, r, rt, vec![0.1, -0.2, 0.3], ACT).unwrap();
        let z = [0.4, -1.1, 2.2];
        let (zp, _) = sylvester_forward(&p, &z, ACT).unwrap();
        let back = invert_sylvester(&p, &zp, ACT, DEFAULT_TOL).unwrap();
        assert!(max_diff(&back, &z) < 1e-10);
    }

    #[test]
    fn tiny_pivot_in_full_r_tilde_is_rejected() {
        let d = 2;
        let q = OrthogonalFactor::Permutation {
            dim: d,
            order: PermutationOrder::Identity,
        };
        let r = UpperTriangular::new(Matrix::diag(&[0.5, 0.5])).unwrap();
        let rt =
            UpperTriangular::new(Matrix::from_rows(&[vec![1e-12, 0.3], vec![0.0, 0.5]])).unwrap();
        let p = SylvesterParams::new(q, r, rt, vec![0.0; d], ACT).unwrap();
        assert!(matches!(
            invert_sylvester(&p, &[0.1, 0.2], ACT, DEFAULT_TOL),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn planar_round_trip_and_boundary() {
        let zero = PlanarParams::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], 0.4).unwrap();
        let z = [0.3, -0.1, 0.8];
        assert_eq!(
            invert_planar(&zero, &z, ACT, DEFAULT_TOL).unwrap(),
            z.to_vec()
        );

        let mut rng = seeded_rng(64);
        let mut v = || {
            (0..4)
                .map(|_| rng.random_range(-1.5..1.5))
                .collect::<Vec<f64>>()
        };
        let (u, w, z) = (v(), v(), v());
        let p = PlanarParams::from_raw(&u, w, 0.3).unwrap();
        let (zp, _) = planar_forward(&p, &z, ACT).unwrap();
        let back = invert_planar(&p, &zp, ACT, DEFAULT_TOL).unwrap();
        assert!(max_diff(&back, &z) < 1e-8);

        let boundary = PlanarParams::new(vec![-1.0, 0.0], vec![1.0, 0.0], 0.0).unwrap();
        assert!(matches!(
            invert_planar(&boundary, &[0.5, 0.5], ACT, DEFAULT_TOL),
            Err(Error::NonInvertible(_))
        ));
    }

    #[test]
    fn iaf_round_trip() {
        let mut rng = seeded_rng(67);
        for d in [1, 2, 5] {
            let made = MadeParams::random_with_biases(d, 3 * d + 1, 0.8, &mut rng).unwrap();
            let ctx: Vec<f64> = (0..3 * d + 1)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let z: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (zp, _) = iaf_forward(&made, &z, &ctx).unwrap();
            assert!(max_diff(&invert_iaf(&made, &ctx, &zp).unwrap(), &z) < 1e-12);
        }
    }

    #[test]
    fn stack_round_trip_with_reversal() {
        let mut rng = seeded_rng(68);
        let made = MadeParams::random_with_biases(3, 7, 0.8, &mut rng).unwrap();
        let ctx = vec![0.1; 7];
        let flows = vec![
            Flow::Iaf {
                made: made.clone(),
                context: ctx.clone(),
            },
            Flow::Reverse { dim: 3 },
            Flow::Iaf { made, context: ctx },
        ];
        let stack = FlowStack::new(3, flows, ACT).unwrap();
        let z = [0.4, -1.1, 0.9];
        let zp = stack_forward(&stack, &z, false).unwrap().z;
        assert!(max_diff(&invert_stack(&stack, &zp, DEFAULT_TOL).unwrap(), &z) < 1e-12);
    }
}
