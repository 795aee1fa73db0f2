use crate::{Gradients, Matrix, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Rescale gradients whose global L2 norm exceeds this value.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: None,
        }
    }
}

/// Adaptive-moment gradient descent with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    steps: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, store: &ParamStore) -> Self {
        let zeros = |m: &Matrix| Matrix::zeros(m.raw_dim());
        Self {
            config,
            first: store.iter().map(|(_, _, v)| zeros(v)).collect(),
            second: store.iter().map(|(_, _, v)| zeros(v)).collect(),
            steps: 0,
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.config.learning_rate = lr;
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Applies one update. Returns the pre-clipping gradient norm.
    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) -> f64 {
        let norm = grads.global_norm();
        let clip = match self.config.clip_norm {
            Some(max) if norm > max => max / norm,
            _ => 1.0,
        };
        self.steps += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
            ..
        } = self.config;
        let bc1 = 1.0 - beta1.powi(self.steps as i32);
        let bc2 = 1.0 - beta2.powi(self.steps as i32);
        for id in store.ids().collect::<Vec<_>>() {
            let Some(g) = grads.get(id) else { continue };
            let m = &mut self.first[id.index()];
            let v = &mut self.second[id.index()];
            let p = store.get_mut(id);
            ndarray::Zip::from(p)
                .and(m)
                .and(v)
                .and(g)
                .for_each(|p, m, v, &g| {
                    let g = g * clip;
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let mhat = *m / bc1;
                    let vhat = *v / bc2;
                    *p -= learning_rate * mhat / (vhat.sqrt() + eps);
                });
        }
        norm
    }

    /// Moment buffers in parameter order, for checkpointing.
    pub fn moments(&self) -> (&[Matrix], &[Matrix]) {
        (&self.first, &self.second)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Graph;
    use ndarray::array;

    #[test]
    fn minimizes_a_quadratic() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[3.0, -2.0]]);
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: 0.1,
                ..Default::default()
            },
            &store,
        );
        for _ in 0..500 {
            let mut g = Graph::new(&store);
            let p = g.param(w);
            let loss = g.sum_sq(p);
            let grads = g.backward(loss).unwrap();
            adam.step(&mut store, &grads);
        }
        assert!(store.get(w).iter().all(|x| x.abs() < 1e-2), "{:?}", store.get(w));
    }

    #[test]
    fn clipping_bounds_the_first_step() {
        let mut store = ParamStore::new();
        let w = store.add("w", array![[100.0]]);
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: 0.5,
                clip_norm: Some(1.0),
                ..Default::default()
            },
            &store,
        );
        let mut g = Graph::new(&store);
        let p = g.param(w);
        let loss = g.sum_sq(p);
        let grads = g.backward(loss).unwrap();
        let norm = adam.step(&mut store, &grads);
        assert!((norm - 200.0).abs() < 1e-9);
        // Adam's first step moves by ~lr regardless of scale.
        assert!((store.get(w)[[0, 0]] - 99.5).abs() < 1e-6);
    }
}
