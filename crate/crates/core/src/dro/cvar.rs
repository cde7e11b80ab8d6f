use super::{AffineLoss, MaxAffineLoss};
use crate::error::{check_unit_interval, Result};
use crate::program::{AffExpr, VarId};

/// Two-piece max-affine form of `CVaR_η(g)`:
///
/// ```text
/// CVaR_η(g) = min_κ E[max{κ + (g − κ)/η, κ}]
/// ```
///
/// The first piece is `(a_g/η, κ(1 − 1/η) + b_g/η)`, the second `(0, κ)`.
/// `κ` is a free program variable supplied by the caller.
pub fn cvar_to_max_affine(g: &AffineLoss, eta: f64, kappa: VarId) -> Result<MaxAffineLoss> {
    check_unit_interval("eta", eta)?;
    let inv = 1.0 / eta;
    let first = AffineLoss {
        a: g.a.iter().map(|e| e.scaled(inv)).collect(),
        b: g.b.scaled(inv) + AffExpr::term(kappa, 1.0 - inv),
    };
    let second = AffineLoss { a: vec![AffExpr::zero(); g.dim()], b: AffExpr::var(kappa) };
    MaxAffineLoss::new(vec![first, second])
}

/// CVaR of an empirical sample by sorting: mean of the worst `η` fraction,
/// with the boundary sample weighted fractionally.
pub fn empirical_cvar(values: &[f64], eta: f64) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let n = v.len() as f64;
    let mut mass = eta * n;
    let mut acc = 0.0;
    for x in &v {
        let w = mass.min(1.0);
        acc += w * x;
        mass -= w;
        if mass <= 0.0 {
            break;
        }
    }
    Ok(acc / (eta * n))
}

/// CVaR through its variational form `min_t t + mean[x − t]_+ / η`.
/// The minimum is attained at a sample value, so scanning them is exact.
pub fn empirical_cvar_epigraph(values: &[f64], eta: f64) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    let n = values.len() as f64;
    Ok(values
        .iter()
        .map(|&t| t + values.iter().map(|&x| (x - t).max(0.0)).sum::<f64>() / (n * eta))
        .fold(f64::INFINITY, f64::min))
}

/// Upper `η` quantile: the `⌈ηN⌉`-th largest sample.
pub fn empirical_var(values: &[f64], eta: f64) -> Result<f64> {
    check_unit_interval("eta", eta)?;
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let k = ((eta * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Ok(v[k - 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dro::{wc_expectation_epigraph, AmbiguitySet, SampleSet};
    use crate::program::{solve, ConvexProgram, SolverConfig};
    use proptest::prelude::*;

    fn min_over_kappa(g: &AffineLoss, eta: f64, samples: &[f64]) -> f64 {
        let mut prog = ConvexProgram::new();
        let kappa = prog.add_free("kappa");
        let loss = cvar_to_max_affine(g, eta, kappa).unwrap();
        let data = SampleSet::new(samples.iter().map(|&v| vec![v]).collect()).unwrap();
        let amb = AmbiguitySet::unbounded(data, 0.0).unwrap();
        let term = wc_expectation_epigraph(&mut prog, &loss, &amb, 1.0).unwrap();
        prog.add_objective(&term.objective);
        solve(&prog, &SolverConfig::default()).unwrap().require_optimal().unwrap().objective
    }

    #[test]
    fn level_one_is_the_mean() {
        let g = AffineLoss::numeric(&[1.0], 0.0);
        assert!((min_over_kappa(&g, 1.0, &[1.0, 3.0]) - 2.0).abs() < 1e-7);
    }

    #[test]
    fn half_level_matches_kappa_grid_search() {
        let g = AffineLoss::numeric(&[1.0], -2.0);
        let samples = [1.0, 3.0];
        // brute force over κ on a fine grid
        let brute = (-5000..=5000)
            .map(|k| {
                let kappa = k as f64 * 1e-3;
                samples
                    .iter()
                    .map(|&x| (kappa + (x - 2.0 - kappa) / 0.5).max(kappa))
                    .sum::<f64>()
                    / 2.0
            })
            .fold(f64::INFINITY, f64::min);
        assert!((brute - 1.0).abs() < 1e-9);
        assert!((min_over_kappa(&g, 0.5, &samples) - brute).abs() < 1e-7);
    }

    #[test]
    fn small_level_amplifies_slope() {
        let mut prog = ConvexProgram::new();
        let kappa = prog.add_free("kappa");
        let g = AffineLoss::numeric(&[0.02, -0.01], -1.05);
        let loss = cvar_to_max_affine(&g, 0.01, kappa).unwrap();
        let a = &loss.pieces()[0].a;
        assert!((a[0].constant - 2.0).abs() < 1e-12);
        assert!((a[1].constant + 1.0).abs() < 1e-12);
        assert_eq!(loss.pieces()[0].b.terms, vec![(kappa, 1.0 - 100.0)]);
        assert!((loss.pieces()[0].b.constant + 105.0).abs() < 1e-9);
    }

    #[test]
    fn bad_levels_rejected() {
        let g = AffineLoss::numeric(&[1.0], 0.0);
        assert!(cvar_to_max_affine(&g, 0.0, VarId(0)).is_err());
        assert!(cvar_to_max_affine(&g, 1.5, VarId(0)).is_err());
        assert!(empirical_cvar(&[1.0], -0.1).is_err());
    }

    #[test]
    fn empirical_examples() {
        let v = [-2.0, -2.0, -2.0, -1.0];
        assert_eq!(empirical_cvar(&v, 0.25).unwrap(), -1.0);
        assert_eq!(empirical_cvar(&v, 1.0).unwrap(), -1.75);
        assert_eq!(empirical_cvar(&v, 0.5).unwrap(), -1.5);
        assert_eq!(empirical_var(&v, 0.25).unwrap(), -1.0);
    }

    proptest! {
        #[test]
        fn sorting_matches_epigraph(values in proptest::collection::vec(-10.0f64..10.0, 1..40), eta in 0.01f64..=1.0) {
            let a = empirical_cvar(&values, eta).unwrap();
            let b = empirical_cvar_epigraph(&values, eta).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            prop_assert!(a + 1e-12 >= empirical_var(&values, eta).unwrap());
        }
    }
}
