use std::ops::{Add, Mul, Neg, Sub};

/// First-order jet: a value together with its partial derivatives.
///
/// Partials are ordered `x1..xm` followed by `t` when the owning expression
/// is time dependent.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet1 {
    pub value: f64,
    pub partials: Vec<f64>,
}

impl Jet1 {
    pub fn constant(value: f64, n: usize) -> Jet1 {
        Jet1 { value, partials: vec![0.0; n] }
    }

    /// The `index`-th coordinate function evaluated at `value`.
    pub fn variable(value: f64, index: usize, n: usize) -> Jet1 {
        let mut partials = vec![0.0; n];
        partials[index] = 1.0;
        Jet1 { value, partials }
    }

    /// Applies a scalar function with known value and derivative (chain rule).
    pub fn chain(&self, value: f64, derivative: f64) -> Jet1 {
        Jet1 { value, partials: self.partials.iter().map(|p| p * derivative).collect() }
    }

    pub fn scale(&self, factor: f64) -> Jet1 {
        self.chain(self.value * factor, factor)
    }

    /// Quotient, assuming the caller has checked `rhs.value != 0`.
    pub fn div(&self, rhs: &Jet1) -> Jet1 {
        let value = self.value / rhs.value;
        let inv = 1.0 / rhs.value;
        let partials = self
            .partials
            .iter()
            .zip(&rhs.partials)
            .map(|(a, b)| (a - value * b) * inv)
            .collect();
        Jet1 { value, partials }
    }

    pub fn exp(&self) -> Jet1 {
        let v = self.value.exp();
        self.chain(v, v)
    }

    pub fn sin(&self) -> Jet1 {
        self.chain(self.value.sin(), self.value.cos())
    }

    pub fn cos(&self) -> Jet1 {
        self.chain(self.value.cos(), -self.value.sin())
    }

    pub fn tanh(&self) -> Jet1 {
        let v = self.value.tanh();
        self.chain(v, 1.0 - v * v)
    }

    /// Directional derivative along `direction` (length must match the partials).
    pub fn directional(&self, direction: &[f64]) -> f64 {
        self.partials.iter().zip(direction).map(|(p, d)| p * d).sum()
    }
}

impl Add for &Jet1 {
    type Output = Jet1;
    fn add(self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            value: self.value + rhs.value,
            partials: self.partials.iter().zip(&rhs.partials).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Jet1 {
    type Output = Jet1;
    fn sub(self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            value: self.value - rhs.value,
            partials: self.partials.iter().zip(&rhs.partials).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Jet1 {
    type Output = Jet1;
    fn mul(self, rhs: &Jet1) -> Jet1 {
        Jet1 {
            value: self.value * rhs.value,
            partials: self
                .partials
                .iter()
                .zip(&rhs.partials)
                .map(|(a, b)| a * rhs.value + self.value * b)
                .collect(),
        }
    }
}

impl Neg for &Jet1 {
    type Output = Jet1;
    fn neg(self) -> Jet1 {
        Jet1 { value: -self.value, partials: self.partials.iter().map(|p| -p).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_quotient_rules() {
        let x = Jet1::variable(3.0, 0, 2);
        let y = Jet1::variable(2.0, 1, 2);
        let p = &x * &y;
        assert_eq!(p.value, 6.0);
        assert_eq!(p.partials, vec![2.0, 3.0]);
        let q = x.div(&y);
        assert_eq!(q.value, 1.5);
        assert_eq!(q.partials, vec![0.5, -0.75]);
    }

    #[test]
    fn directional_derivative() {
        let j = Jet1 { value: 1.0, partials: vec![2.0, -1.0] };
        assert_eq!(j.directional(&[1.0, 3.0]), -1.0);
    }
}
