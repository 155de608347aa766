//! Film-metric extraction against the oracle's closed-form truth.

use cpodem_core::design::{DesignSpace, NormalizedDesign};
use cpodem_core::diagnostics::{film_metrics, label_flow};
use cpodem_core::field::{CaseGeometry, GridSpec, Variable};
use cpodem_core::oracle::{oracle_fields_for, oracle_metrics, SamplingSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn angle_sweep_on_fine_grid() {
    let s = DesignSpace::injector();
    let sampling = SamplingSpec { grid: GridSpec::new(128, 96), steps: 16, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..60 {
        let u: Vec<f64> = (0..5).map(|_| rng.random()).collect();
        let d = s.denormalize(&NormalizedDesign::new(u).unwrap()).unwrap();
        let truth = oracle_metrics(&d, &s).unwrap();
        let series = oracle_fields_for(&d, &s, &sampling, 0, &[Variable::Density]).unwrap();
        let geom = CaseGeometry::from_design(&d);
        let m = film_metrics(&series, &geom).unwrap();
        assert!((m.angle - truth.alpha).abs() <= 2.0, "{d}: {} vs {}", m.angle, truth.alpha);
        if (truth.alpha - 30.0).abs() > 2.0 {
            assert_eq!(label_flow(&series, &geom).unwrap(), truth.label, "{d}");
        }
    }
}

#[test]
fn jet_extremes_are_labelled() {
    let s = DesignSpace::injector();
    let sampling = SamplingSpec { steps: 16, ..Default::default() };
    // theta at its lower bound, delta and L at their upper bounds: alpha = 2 degrees.
    let d = s.denormalize(&NormalizedDesign::new(vec![1.0, 0.5, 0.0, 1.0, 0.5]).unwrap()).unwrap();
    assert_eq!(oracle_metrics(&d, &s).unwrap().alpha, 2.0);
    let series = oracle_fields_for(&d, &s, &sampling, 0, &[Variable::Density]).unwrap();
    let geom = CaseGeometry::from_design(&d);
    assert!((film_metrics(&series, &geom).unwrap().angle - 2.0).abs() <= 2.0);
}
