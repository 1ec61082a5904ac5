use super::activation::{log_abs_factor, Activation};
use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};

/// One planar transformation `z′ = z + u h(wᵀz + b)`.
///
/// `u` is stored after the invertibility projection, so `uᵀw ≥ −1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarParams<T = f64> {
    u: Vec<T>,
    w: Vec<T>,
    b: T,
}

impl<T: Real> PlanarParams<T> {
    /// Takes `u` as is; it must already satisfy `uᵀw ≥ −1`.
    pub fn new(u: Vec<T>, w: Vec<T>, b: T) -> Result<Self> {
        if u.len() != w.len() {
            return Err(Error::Dimension(format!(
                "planar u has length {} but w has length {}",
                u.len(),
                w.len()
            )));
        }
        let uw = T::dot(&u, &w).value();
        if !(uw >= -1.0) {
            return Err(Error::InvalidParams(format!("planar uᵀw = {uw} < −1")));
        }
        Ok(PlanarParams { u, w, b })
    }

    /// Projects an unconstrained `u` with [`project_planar`] first.
    pub fn from_raw(u_raw: &[T], w: Vec<T>, b: T) -> Result<Self> {
        let u = project_planar(u_raw, &w)?;
        Self::new(u, w, b)
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn u(&self) -> &[T] {
        &self.u
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn b(&self) -> T {
        self.b
    }
}

/// `û = u + (m(wᵀu) − wᵀu) w/‖w‖²` with `m(x) = −1 + softplus(x)`, so `ûᵀw > −1`.
pub fn project_planar<T: Real>(u: &[T], w: &[T]) -> Result<Vec<T>> {
    if u.len() != w.len() {
        return Err(Error::Dimension(format!(
            "planar u has length {} but w has length {}",
            u.len(),
            w.len()
        )));
    }
    let ww = T::dot(w, w);
    if !(ww.value() > 0.0) {
        return Err(Error::ZeroDirection);
    }
    let wu = T::dot(w, u);
    let m = wu.softplus() - 1.0;
    let coef = (m - wu) / ww;
    Ok(u.iter().zip(w).map(|(&ui, &wi)| ui + coef * wi).collect())
}

/// Planar transform and `ln |1 + uᵀ h′(wᵀz + b) w|`, both O(D).
pub fn planar_forward<T: Real>(
    p: &PlanarParams<T>,
    z: &[T],
    act: Activation,
) -> Result<(Vec<T>, T)> {
    if z.len() != p.dim() {
        return Err(Error::Dimension(format!(
            "planar flow in dimension {} applied to a vector of length {}",
            p.dim(),
            z.len()
        )));
    }
    let pre = T::dot(&p.w, z) + p.b;
    let hz = act.apply(pre);
    let out = z.iter().zip(&p.u).map(|(&zi, &ui)| zi + ui * hz).collect();
    let factor = act.derivative(pre) * T::dot(&p.u, &p.w) + 1.0;
    Ok((out, log_abs_factor(factor)?))
}

impl<T: Real> Params<T> for PlanarParams<T> {
    type With<U: Real> = PlanarParams<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        f(&join(prefix, "u"), &self.u);
        f(&join(prefix, "w"), &self.w);
        f(&join(prefix, "b"), std::slice::from_ref(&self.b));
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> PlanarParams<U> {
        let u = self.u.iter().map(|&x| f(x)).collect();
        let w = self.w.iter().map(|&x| f(x)).collect();
        let b = f(self.b);
        PlanarParams { u, w, b }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::fd::{numerical_log_abs_det, FD_STEP};
    use crate::seeded_rng;
    use rand::Rng;

    #[test]
    fn zero_u_is_identity() {
        let p = PlanarParams::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], 0.4).unwrap();
        let z = [0.3, -0.2, 1.0];
        let (out, ld) = planar_forward(&p, &z, Activation::Tanh).unwrap();
        assert_eq!(out, z.to_vec());
        assert_eq!(ld, 0.0);
    }

    #[test]
    fn two_dimensional_example() {
        let p = PlanarParams::new(vec![0.5, 0.0], vec![1.0, 0.0], 0.0).unwrap();
        let (_, ld) = planar_forward(&p, &[1.0, 0.0], Activation::Tanh).unwrap();
        // Finite-difference oracle evaluated beforehand: ln(1 + 0.5·(1 − tanh²1)).
        assert!((ld - 0.190_609_756_9).abs() < 1e-9, "{ld}");
        let fd = numerical_log_abs_det(
            |z| planar_forward(&p, z, Activation::Tanh).unwrap().0,
            &[1.0, 0.0],
            FD_STEP,
        );
        assert!((ld - fd).abs() < 1e-9);
    }

    #[test]
    fn random_instance_matches_numerical_jacobian() {
        let mut rng = seeded_rng(6);
        let mut draw =
            |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
        let p = PlanarParams::from_raw(&draw(6), draw(6), 0.3).unwrap();
        let z = draw(6);
        let (_, ld) = planar_forward(&p, &z, Activation::Tanh).unwrap();
        let fd = numerical_log_abs_det(
            |z| planar_forward(&p, z, Activation::Tanh).unwrap().0,
            &z,
            FD_STEP,
        );
        assert!((ld - fd).abs() < 1e-6);
    }

    #[test]
    fn projection_examples() {
        // Values of m(x) = −1 + softplus(x) evaluated independently.
        let w = vec![1.0, 0.0];
        let u = project_planar(&[5.0, 0.0], &w).unwrap();
        assert!((u[0] - (-1.0 + (1.0 + 5f64.exp()).ln())).abs() < 1e-12);
        assert!((u[0] - 4.006_715_348_5).abs() < 1e-9);
        let u = project_planar(&[-10.0, 0.0], &w).unwrap();
        assert!((u[0] + 0.999_954_601_1).abs() < 1e-9);
        assert!(u[0] > -1.0);
        let u = project_planar(&[0.0, 0.0], &w).unwrap();
        assert!((u[0] - (2f64.ln() - 1.0)).abs() < 1e-15);
        assert!(matches!(
            project_planar(&[1.0, 1.0], &[0.0, 0.0]),
            Err(Error::ZeroDirection)
        ));
    }

    #[test]
    fn singular_jacobian_is_reported() {
        // uᵀw = −1 at the origin gives det = 1 − 1 = 0.
        let p = PlanarParams::new(vec![-1.0, 0.0], vec![1.0, 0.0], 0.0).unwrap();
        assert!(matches!(
            planar_forward(&p, &[0.0, 0.0], Activation::Tanh),
            Err(Error::SingularJacobian(_))
        ));
    }
}
