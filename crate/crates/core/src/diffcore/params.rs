use super::scalar::Real;

/// A container of named parameter blocks.
///
/// `visit` and `map` must walk the blocks in the same order: gradients and
/// finite-difference probes rely on both producing one shared flat layout.
pub trait Params<T: Real> {
    type With<U: Real>;

    /// Calls `f(name, values)` for every block, in layout order.
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T]));

    /// Rebuilds the container with every scalar passed through `f`, in layout order.
    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> Self::With<U>;

    fn num_params(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, v| n += v.len());
        n
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.visit("", &mut |_, v| out.extend(v.iter().map(|x| x.value())));
        out
    }

    /// `(name, len)` for every block.
    fn layout(&self) -> Vec<(String, usize)> {
        let mut out = Vec::new();
        self.visit("", &mut |name, v| out.push((name.to_string(), v.len())));
        out
    }
}

/// Joins a prefix and a field name with a dot, skipping an empty prefix.
pub fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl<T: Real> Params<T> for Vec<T> {
    type With<U: Real> = Vec<U>;

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[T])) {
        f(prefix, self);
    }

    fn map<U: Real>(&self, f: &mut dyn FnMut(T) -> U) -> Vec<U> {
        self.iter().map(|&x| f(x)).collect()
    }
}

/// Rebuilds `params` with values taken from `flat`, which must follow the layout order.
pub fn unflatten<T: Real, P: Params<T>>(params: &P, flat: &[f64]) -> P::With<f64> {
    assert_eq!(
        flat.len(),
        params.num_params(),
        "flat vector length mismatch"
    );
    let mut it = flat.iter();
    params.map(&mut |_| *it.next().expect("length checked"))
}
