use crate::error::{Error, Result};

/// A mutable parameter tensor, flattened, with a name for error reports.
pub struct ParamMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update. Moment buffers are allocated on the first call and must
    /// keep the same shapes afterwards. Nothing is modified if any gradient
    /// is non-finite or mis-shaped.
    pub fn step(&mut self, params: &mut [ParamMut<'_>], grads: &[&[f64]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter tensors but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.values.len() != g.len() {
                return Err(Error::Shape(format!(
                    "{}: {} values but {} gradient entries",
                    p.name,
                    p.values.len(),
                    g.len()
                )));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {}", p.name)));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.values.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.values.len())
        {
            return Err(Error::Shape("parameter layout changed between Adam steps".into()));
        }

        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((x, &g), m), v) in p.values.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *x -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_scalar(state: &mut AdamState, x: &mut f64, g: f64) -> Result<()> {
        let mut p = [ParamMut {
            name: "x".into(),
            values: std::slice::from_mut(x),
        }];
        state.step(&mut p, &[&[g]])
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        let mut s = AdamState::new(0.1);
        let mut x = 1.0;
        step_scalar(&mut s, &mut x, 0.5).unwrap();
        let expected = 0.1 * 0.5 / (0.5 + 1e-8);
        assert!((1.0 - x - expected).abs() < 1e-15);
        assert!((1.0 - x - 0.099_999_998).abs() < 1e-12);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_gradients_leave_params() {
        let mut s = AdamState::new(0.01);
        let mut x = 3.25;
        for _ in 0..10 {
            step_scalar(&mut s, &mut x, 0.0).unwrap();
        }
        assert_eq!(x, 3.25);
        assert_eq!(s.t, 10);
    }

    #[test]
    fn rejects_non_finite_and_mismatch() {
        let mut s = AdamState::new(0.01);
        let mut x = 1.0;
        let err = step_scalar(&mut s, &mut x, f64::NAN).unwrap_err();
        assert!(err.to_string().contains('x'));
        assert_eq!(x, 1.0);
        assert_eq!(s.t, 0);
        let mut vals = [0.0, 0.0];
        let mut p = [ParamMut {
            name: "w".into(),
            values: &mut vals,
        }];
        assert!(s.step(&mut p, &[&[1.0]]).is_err());
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut s = AdamState::new(0.05);
            let mut x = 2.0;
            for i in 0..50 {
                let g = 2.0 * x + (i as f64).sin();
                step_scalar(&mut s, &mut x, g).unwrap();
            }
            x
        };
        assert_eq!(run().to_bits(), run().to_bits());
    }
}
