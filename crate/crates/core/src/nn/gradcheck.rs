//! Finite-difference verification of hand-written gradients.

use super::layers::Sequential;
use super::tensor::Tensor;
use crate::error::Result;

/// Central-difference step on 64-bit floats.
pub const FD_STEP: f64 = 1e-4;

/// Denominator floor in [`relative_error`]; keeps near-zero gradients from
/// turning round-off into huge relative errors.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckReport {
    pub passed: bool,
    pub max_rel_error: f64,
    /// Coordinates compared.
    pub checked: usize,
    /// Coordinates whose finite-difference probe crossed a rectifier kink.
    pub skipped: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// `(f(x + h) - f(x - h)) / 2h`
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Compares an analytic gradient of a scalar function of a flat vector with
/// central differences at every coordinate.
pub fn check_gradient(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    tolerance: f64,
) -> GradCheckReport {
    assert_eq!(x.len(), analytic.len(), "gradient length mismatch");
    let mut probe = x.to_vec();
    let mut max_rel_error: f64 = 0.0;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let up = f(&probe);
        probe[i] = x[i] - FD_STEP;
        let down = f(&probe);
        probe[i] = x[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        max_rel_error = max_rel_error.max(relative_error(analytic[i], numeric));
    }
    GradCheckReport {
        passed: max_rel_error < tolerance,
        max_rel_error,
        checked: x.len(),
        skipped: 0,
    }
}

/// Checks every parameter gradient of `net` for the scalar `loss` of its
/// output at `input`. `loss` returns the value and its gradient with respect
/// to the network output.
///
/// Coordinates whose `±h` probe flips any rectifier's sign are skipped: the
/// function is not differentiable across the kink and the probe says nothing
/// about the backward pass.
pub fn grad_check<L>(
    net: &mut Sequential,
    input: &Tensor,
    loss: L,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    L: Fn(&Tensor) -> Result<(f64, Tensor)>,
{
    net.zero_grad();
    let tape = net.forward_tape(input)?;
    let (_, grad_out) = loss(tape.output())?;
    net.backward(&tape, &grad_out)?;

    let analytic: Vec<Vec<f64>> = net
        .params()
        .iter()
        .map(|p| p.grad().map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; p.len()]))
        .collect();
    let base_pattern = net.relu_pattern(input)?;

    let mut max_rel_error: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    for (pi, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let original = net.params()[pi].data()[i];
            let mut eval_at = |v: f64| -> Result<(f64, bool)> {
                net.params_mut()[pi].data_mut()[i] = v;
                let out = net.forward(input)?;
                let same = net.relu_pattern(input)? == base_pattern;
                Ok((loss(&out)?.0, same))
            };
            let (up, same_up) = eval_at(original + FD_STEP)?;
            let (down, same_down) = eval_at(original - FD_STEP)?;
            net.params_mut()[pi].data_mut()[i] = original;
            if !(same_up && same_down) {
                skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * FD_STEP);
            max_rel_error = max_rel_error.max(relative_error(a, numeric));
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        passed: max_rel_error < tolerance,
        max_rel_error,
        checked,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::loss::softmax_cross_entropy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn polynomial_derivative() {
        let d = central_difference(|x| x * x, 3.0, FD_STEP);
        assert!((d - 6.0).abs() < 1e-6);
    }

    #[test]
    fn mlp_cross_entropy_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = Sequential::mlp(&[4, 6, 3], &mut rng);
        let x = Tensor::vector(vec![0.3, -1.2, 0.8, 0.1]);
        let report = grad_check(
            &mut net,
            &x,
            |out| {
                let (l, g) = softmax_cross_entropy(out.data(), 1)?;
                Ok((l, Tensor::vector(g)))
            },
            1e-4,
        )
        .unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.checked > 0);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let report = check_gradient(|v| v[0] * v[0], &[2.0], &[5.0], 1e-4);
        assert!(!report.passed);
    }
}
