//! Adam optimizer over a named parameter store.

use std::collections::BTreeMap;

use super::array::Array;
use super::params::Params;

#[derive(Clone, Debug)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    first_moment: BTreeMap<String, Array>,
    second_moment: BTreeMap<String, Array>,
}

impl AdamState {
    pub fn new(lr: f64) -> AdamState {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            first_moment: BTreeMap::new(),
            second_moment: BTreeMap::new(),
        }
    }
}

/// One Adam update with bias correction. Parameters without a gradient entry
/// are treated as having zero gradient.
pub fn adam_step(params: &mut Params, grads: &BTreeMap<String, Array>, state: &mut AdamState) {
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);
    for (name, value) in params.iter_mut() {
        let shape = value.shape().to_vec();
        let zero = Array::zeros(&shape);
        let grad = grads.get(name).unwrap_or(&zero);
        debug_assert_eq!(grad.shape(), &shape[..], "gradient shape mismatch for {name}");
        let m = state
            .first_moment
            .entry(name.to_string())
            .or_insert_with(|| Array::zeros(&shape));
        let v = state
            .second_moment
            .entry(name.to_string())
            .or_insert_with(|| Array::zeros(&shape));
        for i in 0..value.len() {
            let g = grad.data()[i];
            let mi = state.beta1 * m.data()[i] + (1.0 - state.beta1) * g;
            let vi = state.beta2 * v.data()[i] + (1.0 - state.beta2) * g * g;
            m.data_mut()[i] = mi;
            v.data_mut()[i] = vi;
            let m_hat = mi / bc1;
            let v_hat = vi / bc2;
            value.data_mut()[i] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = Params::new();
        p.insert("x", Array::from_vec(&[2], vec![1.0, -2.0]).unwrap());
        let before = p.get("x").clone();
        let mut state = AdamState::new(0.001);
        adam_step(&mut p, &BTreeMap::new(), &mut state);
        assert_eq!(p.get("x"), &before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn quadratic_descends() {
        // f(x) = x^2 from x = 1: gradient 2x, one step must decrease x
        let mut p = Params::new();
        p.insert("x", Array::from_vec(&[1], vec![1.0]).unwrap());
        let mut grads = BTreeMap::new();
        grads.insert("x".to_string(), Array::from_vec(&[1], vec![2.0]).unwrap());
        let mut state = AdamState::new(0.001);
        adam_step(&mut p, &grads, &mut state);
        let x = p.get("x").data()[0];
        assert!(x < 1.0 && x > 0.99);
    }

    #[test]
    fn two_groups_with_distinct_rates_both_update() {
        let mut contact = Params::new();
        contact.insert("w", Array::from_vec(&[1], vec![1.0]).unwrap());
        let mut motion = Params::new();
        motion.insert("w", Array::from_vec(&[1], vec![1.0]).unwrap());
        let mut g = BTreeMap::new();
        g.insert("w".to_string(), Array::from_vec(&[1], vec![1.0]).unwrap());
        let mut s_contact = AdamState::new(0.0005);
        let mut s_motion = AdamState::new(0.001);
        adam_step(&mut contact, &g, &mut s_contact);
        adam_step(&mut motion, &g, &mut s_motion);
        assert!(contact.get("w").data()[0] < 1.0);
        assert!(motion.get("w").data()[0] < 1.0);
        assert!(motion.get("w").data()[0] < contact.get("w").data()[0]);
    }

    #[test]
    fn deterministic_given_identical_inputs() {
        let run = || {
            let mut p = Params::new();
            p.insert("x", Array::from_vec(&[3], vec![0.5, -0.25, 2.0]).unwrap());
            let mut grads = BTreeMap::new();
            grads.insert(
                "x".to_string(),
                Array::from_vec(&[3], vec![0.1, 0.3, -0.2]).unwrap(),
            );
            let mut state = AdamState::new(0.01);
            for _ in 0..5 {
                adam_step(&mut p, &grads, &mut state);
            }
            p.get("x").data().to_vec()
        };
        assert_eq!(run(), run());
    }
}
