use crate::error::{Error, Result};
use crate::nn::params::ParamSet;

pub const DEFAULT_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Tensor name and flat index of the worst coordinate.
    pub worst: (String, usize),
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Compares `analytic` against central differences of `loss` around `params`,
/// coordinate by coordinate.
pub fn grad_check<P, F>(
    params: &P,
    analytic: &P,
    mut loss: F,
    delta: f64,
) -> Result<GradCheckReport>
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> Result<f64>,
{
    let base = loss(params)?;
    if !base.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    let grads: Vec<(String, Vec<f64>)> = analytic
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.to_vec()))
        .collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    for (ti, (name, grad)) in grads.iter().enumerate() {
        for i in 0..grad.len() {
            let orig = probe.tensors()[ti].1[i];
            probe.tensors_mut()[ti].1[i] = orig + delta;
            let up = loss(&probe)?;
            probe.tensors_mut()[ti].1[i] = orig - delta;
            let down = loss(&probe)?;
            probe.tensors_mut()[ti].1[i] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss while perturbing {name}[{i}]"
                )));
            }
            let numeric = (up - down) / (2.0 * delta);
            let err = rel_error(grad[i], numeric);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.0.is_empty() {
                report.max_rel_error = err;
                report.worst = (name.clone(), i);
                report.analytic = grad[i];
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
