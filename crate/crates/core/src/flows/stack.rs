use super::activation::Activation;
use super::general::{general_sylvester_forward, GeneralSylvesterParams};
use super::iaf::{iaf_forward, MadeParams};
use super::planar::{planar_forward, PlanarParams};
use super::sylvester::{sylvester_forward, OrthogonalFactor, PermutationOrder, SylvesterParams};
use crate::diffcore::{join, Params, Real};
use crate::error::{Error, Result};

/// One element of a [`FlowStack`].
#[derive(Debug, Clone, PartialEq)]
pub enum Flow<T = f64> {
    Planar(PlanarParams<T>),
    Sylvester(SylvesterParams<T>),
    GeneralSylvester(GeneralSylvesterParams<T>),
    Iaf {
        made: MadeParams<T>,
        context: Vec<T>,
    },
    /// Reverses the coordinate order; volume preserving.
    Reverse {
        dim: usize,
    },
}

impl<T: Real> Flow<T> {
    pub fn dim(&self) -> usize {
        match self {
            Flow::Planar(p) => p.dim(),
            Flow::Sylvester(p) => p.dim(),
            Flow::GeneralSylvester(p) => p.dim(),
            Flow::Iaf { made, .. } => made.dim(),
            Flow::Reverse { dim } => *dim,
        }
    }

    pub fn forward(&self, z: &[T], act: Activation) -> Result<(Vec<T>, T)> {
        match self {
            Flow::Planar(p) => planar_forward(p, z, act),
            Flow::Sylvester(p) => sylvester_forward(p, z, act),
            Flow::GeneralSylvester(p) => general_sylvester_forward(p, z, act),
            Flow::Iaf { made, context } => iaf_forward(made, z, context),
            Flow::Reverse { dim } => {
                if z.len() != *dim {
                    return Err(Error::Dimension(format!(
                        "reversal in dimension {dim} applied to a vector of length {}",
                        z.len()
                    )));
                }
                Ok((z.iter().rev().copied().collect(), T::zero()))
            }
        }
    }

    /// Whether the element carries parameters (permutations do not count toward K).
    pub fn is_transformation(&self) -> bool {
        !matches!(self, Flow::Reverse { .. })
    }
}

/// `f_K ∘ … ∘ f_1` sharing one activation.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowStack<T = f64> {
    dim: usize,
    flows: Vec<Flow<T>>,
    activation: Activation,
}

impl<T: Real> FlowStack<T> {
    /// Checks that every flow lives in dimension `dim` and that triangular
    /// Sylvester flows alternate identity/reverse starting from identity.
    pub fn new(dim: usize, flows: Vec<Flow<T>>, activation: Activation) -> Result<Self> {
        let mut triangular = 0;
        for (k, f) in flows.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::Dimension(format!(
                    "flow {k} has dimension {} in a stack of dimension {dim}",
                    f.dim()
                )));
            }
            if let Flow::Sylvester(p) = f {
                if let OrthogonalFactor::Permutation { order, .. } = p.q() {
                    if *order != PermutationOrder::for_flow(triangular) {
                        return Err(Error::InvalidParams(format!(
                            "triangular flow {triangular} uses {order:?}; tags must alternate starting from identity"
                        )));
                    }
                    triangular += 1;
                }
            }
        }
        Ok(FlowStack {
            dim,
            flows,
            activation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        FlowStack {
            dim,
            flows: Vec::new(),
            activation: Activation::Tanh,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn flows(&self) -> &[Flow<T>] {
        &self.flows
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Number of parameterized transformations K.
    pub fn num_transformations(&self) -> usize {
        self.flows.iter().filter(|f| f.is_transformation()).count()
    }
}

#[derive(Debug, Clone)]
pub struct StackOutput<T> {
    pub z: Vec<T>,
    pub sum_log_det: T,
    /// `z_0, z_1, …, z_K` when requested.
    pub trajectory: Option<Vec<Vec<T>>>,
}

/// Applies the flows in order, accumulating `Σ_k ln |det J_k|`.
pub fn stack_forward<T: Real>(
    stack: &FlowStack<T>,
    z0: &[T],
    keep_trajectory: bool,
) -> Result<StackOutput<T>> {
    if z0.len() != stack.dim {
        return Err(Error::Dimension(format!(
            "stack of dimension {} applied to a vector of length {}",
            stack.dim,
            z0.len()
        )));
    }
    let mut z = z0.to_vec();
    let mut sum = T::zero();
    let mut trajectory = keep_trajectory.then(|| vec![z.clone()]);
    for flow in &stack.flows {
        let (next, ld) = flow.forward(&z, stack.activation)?;
        z = next;
        sum = sum + ld;
        if let Some(t) = trajectory.as_mut() {
            t.push(z.clone());
        }
    }
    Ok(StackOutput {
        z,
        sum_log_det: sum,
        trajectory,
    })
}

impl<T: Real> Params<T> for Flow<T> {
    type With<U: Real> = Flow<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        match self {
            Flow::Planar(p) => p.visit(prefix, f),
            Flow::Sylvester(p) => p.visit(prefix, f),
            Flow::GeneralSylvester(p) => p.visit(prefix, f),
            Flow::Iaf { made, context } => {
                made.visit(prefix, f);
                f(&join(prefix, "context"), context);
            }
            Flow::Reverse { .. } => {}
        }
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> Flow<U> {
        match self {
            Flow::Planar(p) => Flow::Planar(p.map(f)),
            Flow::Sylvester(p) => Flow::Sylvester(p.map(f)),
            Flow::GeneralSylvester(p) => Flow::GeneralSylvester(p.map(f)),
            Flow::Iaf { made, context } => {
                let made = made.map(f);
                let context = context.iter().map(|&x| f(x)).collect();
                Flow::Iaf { made, context }
            }
            Flow::Reverse { dim } => Flow::Reverse { dim: *dim },
        }
    }
}

impl<T: Real> Params<T> for FlowStack<T> {
    type With<U: Real> = FlowStack<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        for (k, flow) in self.flows.iter().enumerate() {
            flow.visit(&join(prefix, &format!("flow{k}")), f);
        }
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> FlowStack<U> {
        FlowStack {
            dim: self.dim,
            flows: self.flows.iter().map(|fl| fl.map(f)).collect(),
            activation: self.activation,
        }
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::diffcore::fd::{numerical_log_abs_det, FD_STEP};
    use crate::linalg::Matrix;
    use crate::seeded_rng;

    const ACT: Activation = Activation::Tanh;

    fn triangular_flow(rng: &mut crate::Rng, d: usize, k: usize) -> Flow {
        let mut m = || {
            Matrix::from_vec(
                d,
                d,
                (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            )
            .unwrap()
        };
        let (r, rt) = (m(), m());
        let q = OrthogonalFactor::Permutation {
            dim: d,
            order: PermutationOrder::for_flow(k),
        };
        Flow::Sylvester(SylvesterParams::from_raw(q, &r, &rt, vec![0.1; d], ACT).unwrap())
    }

    #[test]
    fn empty_stack_is_identity() {
        let s = FlowStack::<f64>::identity(3);
        let out = stack_forward(&s, &[1.0, 2.0, 3.0], true).unwrap();
        assert_eq!(out.z, vec![1.0, 2.0, 3.0]);
        assert_eq!(out.sum_log_det, 0.0);
        assert_eq!(out.trajectory.unwrap().len(), 1);
    }

    #[test]
    fn zero_u_planar_flows_are_identity() {
        let p = PlanarParams::new(vec![0.0; 2], vec![1.0, -1.0], 0.5).unwrap();
        let s = FlowStack::new(2, vec![Flow::Planar(p.clone()), Flow::Planar(p)], ACT).unwrap();
        let out = stack_forward(&s, &[0.4, 0.6], false).unwrap();
        assert_eq!(out.z, vec![0.4, 0.6]);
        assert_eq!(out.sum_log_det, 0.0);
        assert!(out.trajectory.is_none());
    }

    #[test]
    fn triangular_stack_matches_numerical_jacobian() {
        let mut rng = seeded_rng(51);
        let flows = vec![
            triangular_flow(&mut rng, 2, 0),
            triangular_flow(&mut rng, 2, 1),
        ];
        let s = FlowStack::new(2, flows, ACT).unwrap();
        let z = [0.3, -0.9];
        let out = stack_forward(&s, &z, true).unwrap();
        assert_eq!(out.trajectory.as_ref().unwrap().len(), 3);
        let fd = numerical_log_abs_det(|z| stack_forward(&s, z, false).unwrap().z, &z, FD_STEP);
        assert!((out.sum_log_det - fd).abs() < 1e-6);
    }

    #[test]
    fn alternation_is_enforced() {
        let mut rng = seeded_rng(52);
        let bad = vec![triangular_flow(&mut rng, 2, 1)];
        assert!(FlowStack::new(2, bad, ACT).is_err());
        let wrong_dim = vec![triangular_flow(&mut rng, 3, 0)];
        assert!(FlowStack::new(2, wrong_dim, ACT).is_err());
    }
}
