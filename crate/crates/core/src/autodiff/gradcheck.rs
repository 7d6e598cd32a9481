//! Central-difference verification of recorded gradients.

use super::array::Array;
use super::params::Params;
use super::tape::{Tape, Tensor};
use crate::error::{Error, Result};

/// Max relative error between analytic and central-difference gradients of a
/// scalar-valued function of one array.
///
/// Error per coordinate: |analytic - numeric| / max(1, |analytic|, |numeric|).
pub fn grad_check<F>(f: F, x: &Array, eps: f64) -> Result<f64>
where
    F: Fn(&Tape, &Tensor) -> Result<Tensor>,
{
    if eps <= 0.0 || eps > 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "grad_check eps {} outside (0, 1e-3]",
            eps
        )));
    }
    let tape = Tape::new();
    let leaf = tape.var(x.clone());
    let out = f(&tape, &leaf)?;
    if out.value().len() != 1 {
        return Err(Error::InvalidInput(
            "grad_check requires a scalar-valued function".into(),
        ));
    }
    out.backward()?;
    let analytic = leaf.grad();

    let eval = |x: &Array| -> Result<f64> {
        let tape = Tape::new();
        let leaf = tape.constant(x.clone());
        Ok(f(&tape, &leaf)?.value().item())
    };

    let mut max_err: f64 = 0.0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = eval(&probe)?;
        probe.data_mut()[i] = orig - eps;
        let minus = eval(&probe)?;
        probe.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * eps);
        let a = analytic.data()[i];
        let denom = 1.0f64.max(a.abs()).max(numeric.abs());
        max_err = max_err.max((a - numeric).abs() / denom);
    }
    Ok(max_err)
}

/// Central-difference check for a loss defined over a named parameter store.
/// `loss_and_grads` runs one forward/backward and returns the loss plus
/// per-name gradients; `loss_only` evaluates the loss for given parameters.
pub fn grad_check_named<G, L>(
    params: &Params,
    loss_and_grads: G,
    loss_only: L,
    eps: f64,
) -> Result<f64>
where
    G: Fn(&Params) -> Result<(f64, std::collections::BTreeMap<String, Array>)>,
    L: Fn(&Params) -> Result<f64>,
{
    if eps <= 0.0 || eps > 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "grad_check eps {} outside (0, 1e-3]",
            eps
        )));
    }
    let (_, grads) = loss_and_grads(params)?;
    let mut max_err: f64 = 0.0;
    let mut work = params.clone();
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let n = params.get(name).len();
        for i in 0..n {
            let orig = work.get(name).data()[i];
            work.get_mut(name).data_mut()[i] = orig + eps;
            let plus = loss_only(&work)?;
            work.get_mut(name).data_mut()[i] = orig - eps;
            let minus = loss_only(&work)?;
            work.get_mut(name).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = grads
                .get(name)
                .map(|g| g.data()[i])
                .unwrap_or(0.0);
            let denom = 1.0f64.max(a.abs()).max(numeric.abs());
            max_err = max_err.max((a - numeric).abs() / denom);
        }
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let x = Array::from_vec(&[4], vec![0.3, -1.2, 0.0, 2.5]).unwrap();
        let err = grad_check(|_tape, t| Ok(t.sum_all()), &x, 1e-5).unwrap();
        assert!(err < 1e-10, "err = {err}");
    }

    #[test]
    fn sigmoid_sum_passes() {
        let x = Array::from_vec(&[5], vec![0.1, -0.4, 1.3, -2.0, 0.7]).unwrap();
        let err = grad_check(|_tape, t| Ok(t.sigmoid().sum_all()), &x, 1e-5).unwrap();
        assert!(err < 1e-6, "err = {err}");
    }

    #[test]
    fn eps_out_of_range_rejected() {
        let x = Array::scalar(1.0);
        assert!(grad_check(|_t, t| Ok(t.sum_all()), &x, 0.0).is_err());
        assert!(grad_check(|_t, t| Ok(t.sum_all()), &x, 1e-2).is_err());
    }
}
