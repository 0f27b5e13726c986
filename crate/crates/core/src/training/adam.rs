use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Dense Adam state over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub params: AdamParams,
    pub m: Vec<T>,
    pub v: Vec<T>,
    /// Number of completed steps.
    pub step: u64,
}

impl<T: Real> Adam<T> {
    pub fn new(len: usize, params: AdamParams) -> Self {
        Self {
            params,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One bias-corrected update of `x` along `-grad`.
    pub fn update(&mut self, x: &mut [T], grad: &[T], lr: f64) {
        assert_eq!(x.len(), self.m.len());
        assert_eq!(grad.len(), self.m.len());
        self.step += 1;
        let b1 = T::lit(self.params.beta1);
        let b2 = T::lit(self.params.beta2);
        let t = self.step as i32;
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        let lr = T::lit(lr);
        let eps = T::lit(self.params.eps);
        for (((x, &g), m), v) in x.iter_mut().zip(grad).zip(&mut self.m).zip(&mut self.v) {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let mh = *m / c1;
            let vh = *v / c2;
            *x -= lr * mh / (vh.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::<f64>::new(2, AdamParams::default());
        let mut x = vec![1.0, -1.0];
        adam.update(&mut x, &[3.0, -0.5], 0.1);
        assert!((x[0] - 0.9).abs() < 1e-7);
        assert!((x[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut adam = Adam::<f64>::new(1, AdamParams::default());
        let mut x = vec![5.0];
        for _ in 0..2000 {
            let g = [2.0 * (x[0] - 2.0)];
            adam.update(&mut x, &g, 0.05);
        }
        assert!((x[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = Adam::<f32>::new(3, AdamParams::default());
        let mut x = vec![0.5f32, 1.0, 2.0];
        adam.update(&mut x, &[0.0; 3], 1.0);
        assert_eq!(x, vec![0.5, 1.0, 2.0]);
    }
}
