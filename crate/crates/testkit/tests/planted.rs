use std::sync::Arc;

use rmcontrast::analysis::preference_flip_rate;
use rmcontrast::dataset::{load, sample, DatasetRegistry, SamplePlan};
use rmcontrast::gateway::{EndpointConfig, ResponseCache};
use rmcontrast::perturbation::TemplateSet;
use rmcontrast::pipeline::{Pipeline, PipelineOptions, RewardModel};
use rmcontrast::{AttributeCatalog, Side};
use rmcontrast_testkit::fixtures::{write_planted_fixture, PLANTED_ATTRIBUTE, REJECTED_FLIP_ATTRIBUTE};
use rmcontrast_testkit::{in_process_gateway, CannedPerturbationSpec, MockServices, ToyRewardSpec};

#[test]
fn planted_sensitivity_is_recovered() {
    let dir = tempfile::tempdir().unwrap();
    let catalog = AttributeCatalog::default();
    let fixture = write_planted_fixture(dir.path(), "toy", 8, &catalog).unwrap();

    let registry = DatasetRegistry::from_toml_file(&fixture.registry).unwrap();
    let loaded = load(registry.get("toy").unwrap()).unwrap();
    let plan = SamplePlan::new(8, vec![1]).unwrap();
    let samples = sample(&loaded.comparisons, &plan).unwrap();

    let canned = CannedPerturbationSpec::from_json_file(&fixture.canned).unwrap();
    let services = Arc::new(MockServices::new(ToyRewardSpec::default(), canned));
    let gateway = in_process_gateway(services, ResponseCache::in_memory());
    let endpoint = EndpointConfig::new("http://mock", "toy").with_retries(0, 1);
    let models = [RewardModel {
        id: "toy".into(),
        endpoint: endpoint.clone(),
        scalarisation: None,
    }];
    let templates = TemplateSet::default();
    let options = PipelineOptions {
        fixture_markers: true,
        ..PipelineOptions::default()
    };
    let pipeline = Pipeline {
        gateway: &gateway,
        chat: &endpoint,
        models: &models,
        catalog: &catalog,
        templates: &templates,
        options: &options,
    };
    let run = pipeline.run_seed(samples[0].0, &samples[0].1).unwrap();
    assert_eq!(run.explained(), 8);
    assert!(run.generation_failures.is_empty());
    assert!(run.score_failures.is_empty());

    let chosen = preference_flip_rate("toy", &run.sets, Side::Chosen, &catalog).unwrap();
    let rejected = preference_flip_rate("toy", &run.sets, Side::Rejected, &catalog).unwrap();
    for name in catalog.names() {
        let expect_chosen = if name == PLANTED_ATTRIBUTE { 1.0 } else { 0.0 };
        let expect_rejected = if name == REJECTED_FLIP_ATTRIBUTE { 1.0 } else { 0.0 };
        assert_eq!(chosen.pfr(name), Some(expect_chosen), "chosen {name}");
        assert_eq!(rejected.pfr(name), Some(expect_rejected), "rejected {name}");
    }
    assert_eq!(chosen.ranking().order()[0], PLANTED_ATTRIBUTE);
}
