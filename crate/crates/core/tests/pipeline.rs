use ddns_core::connmap::ConnectivityMap;
use ddns_core::derivation::{fit_derivation, synthesize_profile, DerivationConfig};
use ddns_core::engine::{replay, ReplayModels, RunConfig};
use ddns_core::metrics::{ecdf_similarity, summarize};
use ddns_core::regression::{cross_validate, ForestParams, ForestTrainer, LabeledRow, Trainer};
use ddns_core::rng::rng_from_seed;
use ddns_core::schemes::{SchemeConfig, SchemeKind};
use ddns_core::trace::{generate_synthetic_scenario, Direction, ScenarioConfig};

#[test]
fn synthetic_trace_through_every_stage() {
    let cfg = ScenarioConfig { n_samples: 600, ..Default::default() };
    let (trace, records) = generate_synthetic_scenario(&cfg, 21).unwrap();
    let rows: Vec<LabeledRow> = records.iter().map(|r| LabeledRow::new(r.context.features(), r.data_rate)).collect();

    let trainer = ForestTrainer { params: ForestParams { n_trees: 20, ..Default::default() } };
    let report = cross_validate(&rows, 5, &trainer, 2).unwrap();
    assert!(report.r_squared > 0.8, "cv r2 {}", report.r_squared);
    let derivation = fit_derivation(&report.residuals, &DerivationConfig::default()).unwrap();
    let forest = trainer.fit(&rows, 2).unwrap().with_provenance("A", Direction::Uplink);

    let mut rng = rng_from_seed(4);
    let profile = synthesize_profile(&forest, &derivation, &records, &mut rng).unwrap();
    let simulated: Vec<f64> = profile.iter().map(|p| p.1.clipped).collect();
    let measured: Vec<f64> = records.iter().map(|r| r.data_rate).collect();
    assert!(ecdf_similarity(&simulated, &measured).unwrap() > 0.9);

    let mut map = ConnectivityMap::new(25.0).unwrap();
    map.insert_trace(&trace);
    map.build_prediction_layer(&forest, 1.0).unwrap();
    let models = ReplayModels { forest: &forest, derivation: &derivation, map: Some(&map) };

    let mut delays = Vec::new();
    for kind in SchemeKind::ALL {
        let run = RunConfig::new(SchemeConfig::with_defaults(kind, "A", Direction::Uplink), 8);
        let result = replay(&run, &trace, &models).unwrap();
        assert!(result.transmissions() > 0, "{kind}");
        let total: f64 = result.events.iter().map(|e| e.payload_mb).sum();
        assert!((total - result.total_mb).abs() < 1e-9);
        assert_eq!(result, replay(&run, &trace, &models).unwrap());
        delays.push(result.mean_delay_s.unwrap());
    }
    let s = summarize(&delays).unwrap();
    assert!(s.min >= 5.0 && s.max <= 60.5, "{s:?}");
}
