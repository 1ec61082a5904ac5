//! Reverse-mode accumulation on a flat tape.
//!
//! Every node stores its parents together with the local partial derivative
//! with respect to each parent. Nodes are appended in evaluation order, so a
//! single reverse sweep over the tape propagates adjoints.

use std::cell::RefCell;
use std::ops::{Add, Div, Mul, Neg, Sub};

use super::scalar::{sigmoid_f64, softplus_f64, Real};

#[derive(Default)]
struct Nodes {
    /// `starts[i]..starts[i + 1]` indexes the parent edges of node `i`.
    starts: Vec<u32>,
    parents: Vec<u32>,
    partials: Vec<f64>,
}

pub struct Tape {
    nodes: RefCell<Nodes>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Nodes {
                starts: vec![0],
                parents: Vec::new(),
                partials: Vec::new(),
            }),
        }
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.borrow().starts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Registers an independent variable.
    pub fn var(&self, value: f64) -> Var<'_> {
        let index = self.push(std::iter::empty());
        Var {
            tape: Some(self),
            index,
            value,
        }
    }

    fn push(&self, edges: impl IntoIterator<Item = (u32, f64)>) -> u32 {
        let mut nodes = self.nodes.borrow_mut();
        for (p, d) in edges {
            nodes.parents.push(p);
            nodes.partials.push(d);
        }
        let index = nodes.starts.len() - 1;
        let end = nodes.parents.len() as u32;
        nodes.starts.push(end);
        index as u32
    }

    /// Adjoints `∂output/∂node` for every node on the tape.
    ///
    /// Constants have no node; their gradient is implicitly zero.
    pub fn adjoints(&self, output: Var<'_>) -> Vec<f64> {
        let nodes = self.nodes.borrow();
        let n = nodes.starts.len() - 1;
        let mut adj = vec![0.0; n];
        let Some(tape) = output.tape else {
            return adj;
        };
        assert!(
            std::ptr::eq(tape, self),
            "output recorded on a different tape"
        );
        adj[output.index as usize] = 1.0;
        for i in (0..=output.index as usize).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let (s, e) = (nodes.starts[i] as usize, nodes.starts[i + 1] as usize);
            for k in s..e {
                adj[nodes.parents[k] as usize] += a * nodes.partials[k];
            }
        }
        adj
    }
}

/// A scalar that records the operations applied to it.
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: Option<&'t Tape>,
    index: u32,
    value: f64,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.tape {
            Some(_) => write!(f, "Var(#{}: {})", self.index, self.value),
            None => write!(f, "Const({})", self.value),
        }
    }
}

impl<'t> Var<'t> {
    pub fn index(&self) -> Option<usize> {
        self.tape.map(|_| self.index as usize)
    }

    pub fn is_constant(&self) -> bool {
        self.tape.is_none()
    }

    fn unary(self, value: f64, d: f64) -> Self {
        match self.tape {
            None => Var::constant(value),
            Some(t) => Var {
                tape: Some(t),
                index: t.push([(self.index, d)]),
                value,
            },
        }
    }

    fn binary(self, rhs: Self, value: f64, da: f64, db: f64) -> Self {
        match (self.tape, rhs.tape) {
            (None, None) => Var::constant(value),
            (Some(t), None) => Var {
                tape: Some(t),
                index: t.push([(self.index, da)]),
                value,
            },
            (None, Some(t)) => Var {
                tape: Some(t),
                index: t.push([(rhs.index, db)]),
                value,
            },
            (Some(t), Some(_)) => Var {
                tape: Some(t),
                index: t.push([(self.index, da), (rhs.index, db)]),
                value,
            },
        }
    }
}

impl<'t> Add for Var<'t> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        self.binary(rhs, self.value + rhs.value, 1.0, 1.0)
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self.binary(rhs, self.value - rhs.value, 1.0, -1.0)
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.binary(rhs, self.value * rhs.value, rhs.value, self.value)
    }
}

impl<'t> Div for Var<'t> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let q = self.value / rhs.value;
        self.binary(rhs, q, 1.0 / rhs.value, -q / rhs.value)
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Self;
    fn neg(self) -> Self {
        self.unary(-self.value, -1.0)
    }
}

impl<'t> Add<f64> for Var<'t> {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        self.unary(self.value + rhs, 1.0)
    }
}

impl<'t> Sub<f64> for Var<'t> {
    type Output = Self;
    fn sub(self, rhs: f64) -> Self {
        self.unary(self.value - rhs, 1.0)
    }
}

impl<'t> Mul<f64> for Var<'t> {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.unary(self.value * rhs, rhs)
    }
}

impl<'t> Div<f64> for Var<'t> {
    type Output = Self;
    fn div(self, rhs: f64) -> Self {
        self.unary(self.value / rhs, 1.0 / rhs)
    }
}

impl<'t> Real for Var<'t> {
    fn constant(x: f64) -> Self {
        Var {
            tape: None,
            index: u32::MAX,
            value: x,
        }
    }

    #[inline]
    fn value(self) -> f64 {
        self.value
    }

    fn exp(self) -> Self {
        let e = self.value.exp();
        self.unary(e, e)
    }

    fn ln(self) -> Self {
        self.unary(self.value.ln(), 1.0 / self.value)
    }

    fn tanh(self) -> Self {
        let t = self.value.tanh();
        self.unary(t, 1.0 - t * t)
    }

    fn sqrt(self) -> Self {
        let s = self.value.sqrt();
        self.unary(s, 0.5 / s)
    }

    fn abs(self) -> Self {
        let sign = if self.value < 0.0 { -1.0 } else { 1.0 };
        self.unary(self.value.abs(), sign)
    }

    fn sigmoid(self) -> Self {
        let s = sigmoid_f64(self.value);
        self.unary(s, s * (1.0 - s))
    }

    fn softplus(self) -> Self {
        self.unary(softplus_f64(self.value), sigmoid_f64(self.value))
    }

    fn elu(self) -> Self {
        if self.value > 0.0 {
            self.unary(self.value, 1.0)
        } else {
            let e = self.value.exp();
            self.unary(e - 1.0, e)
        }
    }

    fn dot(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let mut value = 0.0;
        let mut tape = None;
        for (x, y) in a.iter().zip(b) {
            value += x.value * y.value;
            tape = tape.or(x.tape).or(y.tape);
        }
        let Some(t) = tape else {
            return Var::constant(value);
        };
        let edges = a.iter().zip(b).flat_map(|(x, y)| {
            let ex = x.tape.map(|_| (x.index, y.value));
            let ey = y.tape.map(|_| (y.index, x.value));
            ex.into_iter().chain(ey)
        });
        Var {
            tape: Some(t),
            index: t.push(edges),
            value,
        }
    }

    fn sum(xs: &[Self]) -> Self {
        let value = xs.iter().map(|x| x.value).sum();
        let Some(t) = xs.iter().find_map(|x| x.tape) else {
            return Var::constant(value);
        };
        let edges = xs
            .iter()
            .filter(|x| x.tape.is_some())
            .map(|x| (x.index, 1.0));
        Var {
            tape: Some(t),
            index: t.push(edges),
            value,
        }
    }
}
