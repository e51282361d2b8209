use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
type MatrixFn = Arc<dyn Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync>;

/// Smooth function on the plane given by analytic value, gradient and
/// Hessian evaluators.
#[derive(Clone)]
pub struct MorseFunction {
    pub label: String,
    value: ScalarFn,
    gradient: VectorFn,
    hessian: MatrixFn,
}

impl fmt::Debug for MorseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MorseFunction({})", self.label)
    }
}

impl MorseFunction {
    pub fn new(
        label: impl Into<String>,
        value: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static,
        gradient: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static,
        hessian: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Send + Sync + 'static,
    ) -> Self {
        MorseFunction { label: label.into(), value: Arc::new(value), gradient: Arc::new(gradient), hessian: Arc::new(hessian) }
    }

    /// f(x) = ½ xᵀ A x + b·x + c with A symmetric.
    pub fn quadratic(label: impl Into<String>, a: [[f64; 2]; 2], b: [f64; 2], c: f64) -> Self {
        let a = [[a[0][0], 0.5 * (a[0][1] + a[1][0])], [0.5 * (a[0][1] + a[1][0]), a[1][1]]];
        MorseFunction::new(
            label,
            move |p| {
                0.5 * (a[0][0] * p[0] * p[0] + 2.0 * a[0][1] * p[0] * p[1] + a[1][1] * p[1] * p[1])
                    + b[0] * p[0]
                    + b[1] * p[1]
                    + c
            },
            move |p| [a[0][0] * p[0] + a[0][1] * p[1] + b[0], a[1][0] * p[0] + a[1][1] * p[1] + b[1]],
            move |_| a,
        )
    }

    pub fn linear(label: impl Into<String>, b: [f64; 2]) -> Self {
        Self::quadratic(label, [[0.0; 2]; 2], b, 0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self::quadratic(format!("{c}"), [[0.0; 2]; 2], [0.0; 2], c)
    }

    pub fn negated(&self) -> Self {
        let (v, g, h) = (self.value.clone(), self.gradient.clone(), self.hessian.clone());
        MorseFunction::new(
            format!("-({})", self.label),
            move |p| -v(p),
            move |p| g(p).map(|x| -x),
            move |p| h(p).map(|r| r.map(|x| -x)),
        )
    }

    pub fn shifted(&self, c: f64) -> Self {
        let v = self.value.clone();
        MorseFunction {
            label: format!("{} + {c}", self.label),
            value: Arc::new(move |p| v(p) + c),
            gradient: self.gradient.clone(),
            hessian: self.hessian.clone(),
        }
    }

    pub fn value(&self, p: [f64; 2]) -> f64 {
        (self.value)(p)
    }

    pub fn gradient(&self, p: [f64; 2]) -> [f64; 2] {
        (self.gradient)(p)
    }

    pub fn hessian(&self, p: [f64; 2]) -> [[f64; 2]; 2] {
        (self.hessian)(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_derivatives_match_differences() {
        let f = MorseFunction::quadratic("q", [[1.0, 0.3], [0.3, -2.0]], [0.1, -0.4], 0.7);
        let p = [0.3, -0.8];
        let e = 1e-6;
        let g = f.gradient(p);
        let gx = (f.value([p[0] + e, p[1]]) - f.value([p[0] - e, p[1]])) / (2.0 * e);
        let gy = (f.value([p[0], p[1] + e]) - f.value([p[0], p[1] - e])) / (2.0 * e);
        assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
        let n = f.negated().shifted(2.0);
        assert!((n.value(p) + f.value(p) - 2.0).abs() < 1e-15);
        assert_eq!(n.hessian(p)[1][1], 2.0);
    }
}
