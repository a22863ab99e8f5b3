use std::f64::consts::TAU;

use proptest::prelude::*;
use scenery::reconstruct::{reconstruct_pipeline, PipelineConfig};
use serde_json::json;

fn config(arcs: &[(f64, f64)], m: usize) -> PipelineConfig {
    let boxes: Vec<_> = arcs.iter().map(|&(a, b)| json!([[a, b]])).collect();
    serde_json::from_value(json!({
        "law": {"dim": 1, "brownian": {"drift": [1.0], "sigma2": [1.0]}},
        "scenery": {"dim": 1, "boxes": boxes},
        "m": m,
        "mode": "exact",
    }))
    .unwrap()
}

/// Two disjoint arcs with a gap of at least `0.3` between them.
fn two_arcs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (0.0..1.0f64, 0.3..2.0f64, 0.3..1.5f64, 0.3..2.0f64).prop_map(|(a, l1, g, l2)| {
        let b = a + l1;
        let c = b + g;
        vec![(a, b), (c, (c + l2).min(a + TAU - 0.3))]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn exact_mode_meets_the_boundary_bound(arcs in two_arcs(), m in prop::sample::select(vec![8usize, 16])) {
        let out = reconstruct_pipeline(&config(&arcs, m), None).unwrap();
        let delta = TAU / m as f64;
        // every one of the four boundary points costs at most two cells
        let dist = out.aligned_distance.unwrap();
        prop_assert!(dist <= 2.0 * 4.0 * delta + 1e-9, "distance {dist} at m = {m}");
        prop_assert_eq!(out.diagnostics.soundness, Some(true));
    }
}

#[test]
fn refinement_does_not_hurt() {
    let arcs = [(0.3, 1.1), (2.0, 3.4), (4.2, 5.0)];
    let mut last = f64::INFINITY;
    for m in [8, 16, 32] {
        let d = reconstruct_pipeline(&config(&arcs, m), None)
            .unwrap()
            .aligned_distance
            .unwrap();
        assert!(d <= last + 1e-12, "m = {m}: {d} after {last}");
        last = d;
    }
}

#[test]
fn same_seed_same_output() {
    let mut cfg = config(&[(0.0, 2.0)], 8);
    cfg.mode = scenery::reconstruct::PipelineMode::Inverted;
    cfg.seed = 9;
    let a = serde_json::to_string(&reconstruct_pipeline(&cfg, None).unwrap()).unwrap();
    let b = serde_json::to_string(&reconstruct_pipeline(&cfg, None).unwrap()).unwrap();
    assert_eq!(a, b);
}
