//! Adam optimizer over named parameter tensors.

use crate::error::{Error, Result};
use crate::neural::autodiff::Tensor;
use ndarray::ArrayD;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPS: f64 = 1e-8;

/// First/second moment state mirroring the parameter list.
pub struct Adam {
    pub lr: f64,
    step: u64,
    m: Vec<ArrayD<f64>>,
    v: Vec<ArrayD<f64>>,
}

impl Adam {
    pub fn new(params: &[(String, Tensor)], lr: f64) -> Self {
        Adam {
            lr,
            step: 0,
            m: params
                .iter()
                .map(|(_, p)| ArrayD::zeros(p.data().raw_dim()))
                .collect(),
            v: params
                .iter()
                .map(|(_, p)| ArrayD::zeros(p.data().raw_dim()))
                .collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. Parameters without a gradient this step are treated as
    /// having zero gradient. A NaN gradient aborts with the parameter
    /// name. Consumes (clears) the gradients.
    pub fn step(&mut self, params: &[(String, Tensor)]) -> Result<()> {
        self.step_with_clip(params, None)
    }

    /// As [`Adam::step`], optionally clipping the global gradient norm.
    pub fn step_with_clip(
        &mut self,
        params: &[(String, Tensor)],
        clip: Option<f64>,
    ) -> Result<()> {
        assert_eq!(params.len(), self.m.len(), "parameter list changed");
        let grads: Vec<Option<ArrayD<f64>>> = params.iter().map(|(_, p)| p.grad()).collect();
        for ((name, _), g) in params.iter().zip(&grads) {
            if let Some(g) = g {
                if g.iter().any(|v| v.is_nan()) {
                    return Err(Error::NanGradient(name.clone()));
                }
            }
        }
        let scale = match clip {
            Some(max_norm) => {
                let total: f64 = grads
                    .iter()
                    .flatten()
                    .map(|g| g.iter().map(|v| v * v).sum::<f64>())
                    .sum();
                let norm = total.sqrt();
                if norm > max_norm {
                    max_norm / norm
                } else {
                    1.0
                }
            }
            None => 1.0,
        };
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - BETA1.powf(t);
        let bc2 = 1.0 - BETA2.powf(t);
        for (i, (_, p)) in params.iter().enumerate() {
            let g = grads[i]
                .clone()
                .unwrap_or_else(|| ArrayD::zeros(p.data().raw_dim()));
            let g = if scale != 1.0 { g.mapv(|v| v * scale) } else { g };
            self.m[i].zip_mut_with(&g, |m, &gv| *m = BETA1 * *m + (1.0 - BETA1) * gv);
            self.v[i].zip_mut_with(&g, |v, &gv| *v = BETA2 * *v + (1.0 - BETA2) * gv * gv);
            let mut new = p.data().clone();
            ndarray::Zip::from(&mut new)
                .and(&self.m[i])
                .and(&self.v[i])
                .for_each(|w, &m, &v| {
                    let mhat = m / bc1;
                    let vhat = v / bc2;
                    *w -= self.lr * mhat / (vhat.sqrt() + EPS);
                });
            p.set_data(new);
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn zero_gradients_leave_parameters_unchanged() {
        let p = Tensor::param(ArrayD::from_elem(IxDyn(&[3]), 1.5));
        let params = vec![("p".to_string(), p.clone())];
        let mut opt = Adam::new(&params, 0.1);
        opt.step(&params).unwrap();
        assert!(p.data().iter().all(|&v| v == 1.5));
    }

    #[test]
    fn first_step_with_unit_gradient_moves_by_lr() {
        let p = Tensor::param(ArrayD::from_elem(IxDyn(&[1]), 2.0));
        let params = vec![("p".to_string(), p.clone())];
        let mut opt = Adam::new(&params, 0.1);
        // loss = p => d loss / d p = 1
        let loss = p.sum_all();
        loss.backward();
        opt.step(&params).unwrap();
        // mhat = 1, vhat = 1 -> delta = lr / (1 + eps)
        let expect = 2.0 - 0.1 / (1.0 + EPS);
        let got = p.data()[[0]];
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    #[test]
    fn nan_gradient_aborts_with_name() {
        let p = Tensor::param(ArrayD::from_elem(IxDyn(&[1]), 0.0));
        let params = vec![("layer.w".to_string(), p.clone())];
        let mut opt = Adam::new(&params, 0.1);
        // ln(0) -> -inf; 0 * -inf -> NaN in the chain.
        let loss = p.ln().mul(&p).sum_all();
        loss.backward();
        match opt.step(&params) {
            Err(Error::NanGradient(name)) => assert_eq!(name, "layer.w"),
            other => panic!("expected NaN gradient error, got {other:?}"),
        }
    }

    #[test]
    fn clipping_caps_global_norm() {
        let p = Tensor::param(ArrayD::from_elem(IxDyn(&[4]), 0.0));
        let params = vec![("p".to_string(), p.clone())];
        let mut opt = Adam::new(&params, 1.0);
        let loss = p.mul_scalar(100.0).sum_all();
        loss.backward(); // grad = 100 each, norm 200
        opt.step_with_clip(&params, Some(1.0)).unwrap();
        // With clip, each grad becomes 0.5; Adam first step is lr-bounded
        // regardless, so just confirm the update is finite and happened.
        assert!(p.data().iter().all(|v| v.is_finite() && *v != 0.0));
    }
}
