//! Central finite-difference gradient checks.

use super::Module;

/// Default perturbation size.
pub const EPS: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, 1e-8)`; non-finite inputs count as infinitely wrong.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
    if err.is_nan() {
        f64::INFINITY
    } else {
        err
    }
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

/// Compares `analytic` with the central-difference gradient of `f` at
/// `inputs` and returns the largest relative error over coordinates.
pub fn grad_check(mut f: impl FnMut(&[f64]) -> f64, inputs: &[f64], analytic: &[f64], eps: f64) -> f64 {
    let mut x = inputs.to_vec();
    let numeric: Vec<f64> = (0..x.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + eps;
            let up = f(&x);
            x[i] = orig - eps;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * eps)
        })
        .collect();
    max_relative_error(analytic, &numeric)
}

/// Central-difference gradient of `loss` with respect to every coordinate of
/// the parameter `name` of `module`.
pub fn numeric_gradient<M: Module>(
    module: &mut M,
    name: &str,
    loss: impl Fn(&M) -> f64,
    eps: f64,
) -> Vec<f64> {
    let len = super::param(module, name).len();
    numeric_gradient_at(module, name, &(0..len).collect::<Vec<_>>(), loss, eps)
}

/// Like [`numeric_gradient`] but only at the listed coordinates.
pub fn numeric_gradient_at<M: Module>(
    module: &mut M,
    name: &str,
    coords: &[usize],
    loss: impl Fn(&M) -> f64,
    eps: f64,
) -> Vec<f64> {
    let nudge = |module: &mut M, i: usize, delta: f64| {
        module.visit_mut(&mut |n, t| {
            if n == name {
                t.values_mut()[i] += delta;
            }
        });
    };
    coords
        .iter()
        .map(|&i| {
            nudge(module, i, eps);
            let up = loss(module);
            nudge(module, i, -2.0 * eps);
            let down = loss(module);
            nudge(module, i, eps);
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// Largest relative error over every parameter of `module`, with the name
/// of the parameter where it occurs. `backward` must zero and then
/// accumulate the gradient of `loss`.
pub fn check_module<M: Module>(
    module: &mut M,
    backward: impl FnOnce(&mut M),
    loss: impl Fn(&M) -> f64,
    eps: f64,
) -> (f64, String) {
    backward(module);
    let mut worst = (0.0, String::new());
    for name in super::param_names(module) {
        let analytic = super::param(module, &name)
            .grad()
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; super::param(module, &name).len()]);
        let numeric = numeric_gradient(module, &name, &loss, eps);
        let err = max_relative_error(&analytic, &numeric);
        if err > worst.0 {
            worst = (err, name);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_functions_check_exactly() {
        let w = [0.5, -2.0, 3.25];
        let f = |x: &[f64]| x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
        let err = grad_check(f, &[1.0, 2.0, -4.0], &w, EPS);
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        let f = |x: &[f64]| x[0] * x[0];
        assert!(grad_check(f, &[3.0], &[5.0], EPS) > 0.1);
        assert_eq!(grad_check(|_| f64::NAN, &[1.0], &[0.0], EPS), f64::INFINITY);
    }
}
