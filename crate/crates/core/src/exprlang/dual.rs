/// First-order dual number carrying a value and its gradient with respect to
/// every `x` variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Dual {
    pub fn constant(value: f64, n: usize) -> Self {
        Dual {
            value,
            partials: vec![0.0; n],
        }
    }

    /// The `index`-th coordinate function evaluated at `value`.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut partials = vec![0.0; n];
        partials[index] = 1.0;
        Dual { value, partials }
    }

    pub fn is_constant(&self) -> bool {
        self.partials.iter().all(|&d| d == 0.0)
    }

    /// `f(self)` given `f(v)` and `f'(v)`.
    pub(crate) fn chain(&self, value: f64, derivative: f64) -> Dual {
        Dual {
            value,
            partials: self.partials.iter().map(|d| derivative * d).collect(),
        }
    }

    /// `a * self + b * other` on the partials, with the given value.
    pub(crate) fn combine(&self, a: f64, other: &Dual, b: f64, value: f64) -> Dual {
        Dual {
            value,
            partials: self
                .partials
                .iter()
                .zip(&other.partials)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }
}
