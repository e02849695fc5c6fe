use serde::Serialize;

/// Outcome of comparing an analytic gradient with central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradCheck {
    pub n: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub pass: bool,
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            probe[k] = x[k] + step;
            let up = f(&probe);
            probe[k] = x[k] - step;
            let down = f(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Per-coordinate `|a - fd| / max(|a|, |fd|, floor)`, where the floor is `1e-5`
/// of the largest finite-difference component (and at least `1e-9`), so entries
/// that are zero up to finite-difference noise do not dominate.
pub fn relative_errors(analytic: &[f64], fd: &[f64]) -> Vec<f64> {
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (1e-5 * scale).max(1e-9);
    analytic
        .iter()
        .zip(fd)
        .map(|(a, f)| {
            let err = (a - f).abs() / a.abs().max(f.abs()).max(floor);
            if err.is_nan() {
                f64::INFINITY
            } else {
                err
            }
        })
        .collect()
}

pub fn check_gradients(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
    fd_step: f64,
    rtol: f64,
) -> GradCheck {
    assert_eq!(
        x.len(),
        analytic.len(),
        "gradient length must match the parameters"
    );
    let fd = central_difference(f, x, fd_step);
    let errs = relative_errors(analytic, &fd);
    let (worst_index, max_rel_err) =
        errs.iter()
            .copied()
            .enumerate()
            .fold((0, 0.0), |b, c| if c.1 > b.1 { c } else { b });
    GradCheck {
        n: x.len(),
        max_rel_err,
        worst_index,
        pass: max_rel_err <= rtol,
    }
}
