use ndarray::Zip;

use super::{Gradient, Mlp};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && self.epsilon.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// First/second moment accumulators for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    config: AdamConfig,
    first: Gradient,
    second: Gradient,
    timestep: u64,
}

impl AdamState {
    pub fn new(params: &Mlp, config: AdamConfig) -> Self {
        Self {
            config,
            first: Gradient::zeros_like(params),
            second: Gradient::zeros_like(params),
            timestep: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn timestep(&self) -> u64 {
        self.timestep
    }

    pub fn first_moment(&self) -> &Gradient {
        &self.first
    }

    pub fn second_moment(&self) -> &Gradient {
        &self.second
    }

    /// Descends along `grad` in place. Shape and finiteness of `grad` are
    /// checked before anything is touched.
    pub fn step(&mut self, params: &mut Mlp, grad: &Gradient) -> Result<()> {
        if !grad.is_congruent(params) {
            return Err(Error::shape(
                "adam gradient",
                format!("{:?}", params.sizes()),
                format!("{} layers", grad.layers().len()),
            ));
        }
        if !self.first.is_congruent(params) {
            return Err(Error::shape(
                "adam moments",
                format!("{:?}", params.sizes()),
                format!("{} layers", self.first.layers().len()),
            ));
        }
        if let Some(layer) = grad.first_non_finite_layer() {
            return Err(Error::NonFinite { layer });
        }

        self.timestep += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.timestep as i32;
        let m_correction = 1.0 - beta1.powi(t);
        let v_correction = 1.0 - beta2.powi(t);

        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / m_correction;
            let v_hat = *v / v_correction;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        };

        let layers = params.layers_mut();
        for (k, layer) in layers.iter_mut().enumerate() {
            let g = &grad.layers()[k];
            let m = &mut self.first.layers_mut()[k];
            let v = &mut self.second.layers_mut()[k];
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
        if let Some(layer) = params.layers().iter().position(|l| !l.is_finite()) {
            return Err(Error::NonFinite { layer });
        }
        Ok(())
    }
}

/// Pure form of [`AdamState::step`].
pub fn adam_step(params: &Mlp, grad: &Gradient, state: &AdamState) -> Result<(Mlp, AdamState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    state.step(&mut params, grad)?;
    Ok((params, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, Layer};
    use ndarray::array;

    fn scalar_param(value: f64) -> Mlp {
        let layer = Layer::new(array![[value]], array![0.0], Activation::Identity).unwrap();
        Mlp::from_layers(vec![layer]).unwrap()
    }

    fn scalar_grad(params: &Mlp, g: f64) -> Gradient {
        let mut grad = Gradient::zeros_like(params);
        grad.layers_mut()[0].weights[[0, 0]] = g;
        grad
    }

    #[test]
    fn first_step_matches_hand_computation() {
        let params = scalar_param(0.0);
        let config = AdamConfig {
            learning_rate: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        };
        let state = AdamState::new(&params, config);
        let (next, state) = adam_step(&params, &scalar_grad(&params, 2.0), &state).unwrap();
        // m = 0.2, v = 0.004; m_hat = 2, v_hat = 4; step = 0.1 * 2 / (2 + 1e-8)
        let expected = -0.1 * 2.0 / (2.0 + 1e-8);
        assert!((next.layers()[0].weights()[[0, 0]] - expected).abs() < 1e-12);
        assert!((next.layers()[0].weights()[[0, 0]] + 0.099_999_999_5).abs() < 1e-9);
        assert_eq!(state.timestep(), 1);
        assert!((state.first_moment().layers()[0].weights[[0, 0]] - 0.2).abs() < 1e-15);
        assert!((state.second_moment().layers()[0].weights[[0, 0]] - 0.004).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let params = Mlp::init(&[3, 4, 1], &[Activation::Tanh, Activation::Sigmoid], 3).unwrap();
        let mut state = AdamState::new(&params, AdamConfig::default());
        let zero = Gradient::zeros_like(&params);
        let mut current = params.clone();
        for expected_t in 1..=5 {
            state.step(&mut current, &zero).unwrap();
            assert_eq!(state.timestep(), expected_t);
        }
        assert_eq!(current, params);
    }

    #[test]
    fn non_finite_gradient_reports_layer() {
        let params = Mlp::init(&[2, 3, 1], &[Activation::Tanh, Activation::Sigmoid], 0).unwrap();
        let state = AdamState::new(&params, AdamConfig::default());
        let mut grad = Gradient::zeros_like(&params);
        grad.layers_mut()[1].bias[0] = f64::INFINITY;
        let err = adam_step(&params, &grad, &state).unwrap_err();
        assert!(matches!(err, Error::NonFinite { layer: 1 }));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let params = Mlp::init(&[2, 3, 1], &[Activation::Tanh, Activation::Sigmoid], 0).unwrap();
        let other = Mlp::init(&[2, 1], &[Activation::Sigmoid], 0).unwrap();
        let state = AdamState::new(&params, AdamConfig::default());
        let grad = Gradient::zeros_like(&other);
        assert!(matches!(adam_step(&params, &grad, &state), Err(Error::Shape { .. })));
    }

    #[test]
    fn repeated_runs_are_identical() {
        let params = Mlp::init(&[2, 3, 1], &[Activation::Tanh, Activation::Sigmoid], 1).unwrap();
        let mut grad = Gradient::zeros_like(&params);
        grad.layers_mut()[0].weights.fill(0.3);
        let state = AdamState::new(&params, AdamConfig::default());
        let a = adam_step(&params, &grad, &state).unwrap();
        let b = adam_step(&params, &grad, &state).unwrap();
        assert_eq!(a, b);
    }
}
