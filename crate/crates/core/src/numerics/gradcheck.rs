use super::ParamStore;
use crate::error::{Error, Result};

/// Denominator floor for relative errors, so that entries whose true
/// gradient is ~0 are judged by absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GradCheckEntry {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| !e.flagged)
    }

    pub fn flagged(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| e.flagged)
    }

    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compare the analytic gradients stored in `params` against central
/// differences of `loss_fn`, for every entry of every parameter.
pub fn grad_check<F>(
    loss_fn: F,
    params: &ParamStore,
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> f64,
{
    grad_check_filtered(loss_fn, params, epsilon, tolerance, |_| true)
}

/// Like [`grad_check`], restricted to parameters whose name passes `filter`.
pub fn grad_check_filtered<F, P>(
    mut loss_fn: F,
    params: &ParamStore,
    epsilon: f64,
    tolerance: f64,
    filter: P,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> f64,
    P: Fn(&str) -> bool,
{
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
    }
    let first = loss_fn(params);
    let second = loss_fn(params);
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let mut probe = params.clone();
    let mut entries = Vec::new();
    for id in params.ids() {
        let name = params.name(id);
        if !filter(name) {
            continue;
        }
        for index in 0..params.value(id).data().len() {
            let orig = params.value(id).data()[index];
            probe.value_mut(id).data_mut()[index] = orig + epsilon;
            let plus = loss_fn(&probe);
            probe.value_mut(id).data_mut()[index] = orig - epsilon;
            let minus = loss_fn(&probe);
            probe.value_mut(id).data_mut()[index] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = params.grad(id).data()[index];
            let rel_error = relative_error(analytic, numeric);
            entries.push(GradCheckEntry {
                param: name.to_string(),
                index,
                analytic,
                numeric,
                abs_error: (analytic - numeric).abs(),
                rel_error,
                flagged: !(rel_error <= tolerance),
            });
        }
    }
    Ok(GradCheckReport { tolerance, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::DenseMatrix;
    use std::cell::Cell;

    fn scalar_store(name: &str, w: f64) -> (ParamStore, crate::numerics::ParamId) {
        let mut s = ParamStore::new();
        let id = s
            .register(name, DenseMatrix::from_vec(1, 1, vec![w]).unwrap())
            .unwrap();
        (s, id)
    }

    #[test]
    fn linear_loss_matches_exactly() {
        let x = [0.5, -2.0, 3.0];
        let mut s = ParamStore::new();
        let id = s
            .register("w", DenseMatrix::from_vec(1, 3, vec![1.0, 2.0, -1.0]).unwrap())
            .unwrap();
        s.grad_mut(id).data_mut().copy_from_slice(&x);
        let report = grad_check(
            |p| crate::numerics::dot(p.value(id).data(), &x),
            &s,
            1e-4,
            1e-9,
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn quadratic_at_three() {
        let (mut s, id) = scalar_store("w", 3.0);
        s.grad_mut(id).set(0, 0, 6.0);
        let report = grad_check(|p| p.value(id).get(0, 0).powi(2), &s, 1e-4, 1e-6).unwrap();
        let e = &report.entries[0];
        assert!((e.numeric - 6.0).abs() < 1e-7);
        assert!(e.abs_error < 1e-7);
        assert!(report.passed());
    }

    #[test]
    fn wrong_gradient_flagged() {
        let (mut s, id) = scalar_store("w", 3.0);
        s.grad_mut(id).set(0, 0, 12.0);
        let report = grad_check(|p| p.value(id).get(0, 0).powi(2), &s, 1e-4, 1e-3).unwrap();
        assert!(!report.passed());
        assert_eq!(report.flagged().count(), 1);
    }

    #[test]
    fn nondeterminism_detected() {
        let (s, _) = scalar_store("w", 1.0);
        let calls = Cell::new(0.0);
        let err = grad_check(
            |_| {
                calls.set(calls.get() + 1.0);
                calls.get()
            },
            &s,
            1e-4,
            1e-3,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }

    #[test]
    fn filter_restricts_params() {
        let mut s = ParamStore::new();
        let a = s.register("a", DenseMatrix::zeros(1, 2)).unwrap();
        s.register("b", DenseMatrix::zeros(1, 2)).unwrap();
        let report =
            grad_check_filtered(|p| p.value(a).get(0, 0), &s, 1e-4, 1e-3, |n| n == "b").unwrap();
        assert_eq!(report.entries.len(), 2);
        assert!(report.entries.iter().all(|e| e.param == "b"));
    }
}
