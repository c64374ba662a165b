#![allow(dead_code)]

use cwp_core::alphabet::{build_circle_alphabet, build_finite_alphabet, build_uniform_alphabet, TransitionFn};
use cwp_core::potential::PotentialVec;
use cwp_core::transfer::Model;

pub fn spin() -> Model {
    let a = build_finite_alphabet(&["+1", "-1"], &[0.5, 0.5]).unwrap();
    let t = TransitionFn::full(2);
    let p = PotentialVec::plus_minus(&a, &t).unwrap();
    Model::new(a, t, p).unwrap()
}

pub fn potts(q: usize) -> Model {
    let labels: Vec<String> = (1..=q).map(|i| i.to_string()).collect();
    let a = build_uniform_alphabet(&labels).unwrap();
    let t = TransitionFn::full(q);
    let p = PotentialVec::indicators(&a, &t).unwrap();
    Model::new(a, t, p).unwrap()
}

pub fn golden_mean() -> TransitionFn {
    TransitionFn::from_rows(&[vec![0, 1], vec![1, 1]]).unwrap()
}

pub fn circle(m: usize) -> Model {
    let a = build_circle_alphabet(m).unwrap();
    let t = TransitionFn::full(m);
    let p = PotentialVec::xy(&a, &t).unwrap();
    Model::new(a, t, p).unwrap()
}

/// Three symbols with planar values spanning a triangle.
pub fn triangle(weights: [f64; 3]) -> Model {
    let a = build_finite_alphabet(&["a", "b", "c"], &weights).unwrap();
    let t = TransitionFn::full(3);
    let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, -1.0]];
    let p = PotentialVec::table(&a, &t, 1, &rows).unwrap();
    Model::new(a, t, p).unwrap()
}

/// Depth-2 table potential on the golden-mean shift or the full shift.
pub fn table_model(values: &[f64], constrained: bool) -> Model {
    let a = build_uniform_alphabet(&["0", "1"]).unwrap();
    let t = if constrained { golden_mean() } else { TransitionFn::full(2) };
    let rows: Vec<Vec<f64>> = values.chunks(2).map(|c| c.to_vec()).collect();
    let p = PotentialVec::table(&a, &t, 2, &rows).unwrap();
    Model::new(a, t, p).unwrap()
}
