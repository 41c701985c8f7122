use std::sync::Arc;

use proptest::prelude::*;
use rmcontrast::gateway::{EndpointConfig, Gateway, GatewayError, ResponseCache};
use rmcontrast::metrics::{semantic_distance, GatewayEmbedder};
use rmcontrast::perturbation::{FixtureMarker, MarkerKind};
use rmcontrast::Side;
use rmcontrast_testkit::fixtures::planted_canned;
use rmcontrast_testkit::toy::HARM_TERMS;
use rmcontrast_testkit::{hash_embed, toy_reward, MockServer, MockServices, ToyRewardSpec};

fn services() -> Arc<MockServices> {
    let catalog = rmcontrast::AttributeCatalog::default();
    Arc::new(MockServices::new(ToyRewardSpec::default(), planted_canned("toy", 2, &catalog)))
}

fn fast(url: &str) -> EndpointConfig {
    EndpointConfig::new(url, "mock").with_retries(0, 1)
}

#[test]
fn http_round_trip() {
    let server = MockServer::start(services(), "127.0.0.1:0", 2).unwrap();
    let gateway = Gateway::http(ResponseCache::in_memory());
    let cfg = fast(&server.url());

    let r = gateway.score(&cfg, None, "p", "hello world").unwrap();
    assert!((r.scalar - 0.1).abs() < 1e-12);

    let embedder = GatewayEmbedder {
        gateway: &gateway,
        config: &cfg,
    };
    let d = semantic_distance("the same text", "the same text", &embedder).unwrap();
    assert!(d.abs() < 1e-12);

    let prompt = FixtureMarker::new(MarkerKind::Step2, "toy:1")
        .side(Side::Chosen)
        .attribute("harmlessness")
        .attach("rewrite this");
    let text = gateway.chat(&cfg, None, &prompt).unwrap();
    assert!(text.contains("poison"));

    let unknown = FixtureMarker::new(MarkerKind::Step2, "toy:99")
        .side(Side::Chosen)
        .attribute("harmlessness")
        .attach("rewrite this");
    match gateway.chat(&cfg, None, &unknown) {
        Err(GatewayError::Status { status, .. }) => assert_eq!(status, 404),
        other => panic!("expected a 404, got {other:?}"),
    }
}

#[test]
fn server_handles_concurrent_requests() {
    let server = MockServer::start(services(), "127.0.0.1:0", 4).unwrap();
    let cfg = fast(&server.url());
    let gateway = Gateway::http(ResponseCache::in_memory());
    std::thread::scope(|s| {
        for i in 0..8 {
            let (gateway, cfg) = (&gateway, &cfg);
            s.spawn(move || {
                let words = vec!["w"; i + 1].join(" ");
                let r = gateway.score(cfg, None, "p", &words).unwrap();
                assert!((r.scalar - 0.05 * (i + 1) as f64).abs() < 1e-12);
            });
        }
    });
    assert_eq!(server.services.requests(), 8);
}

#[test]
fn zero_embedding_is_degenerate() {
    let services = services();
    let gateway = rmcontrast_testkit::in_process_gateway(services, ResponseCache::in_memory());
    let cfg = fast("http://mock");
    assert!(matches!(
        gateway.embed(&cfg, "   "),
        Err(GatewayError::DegenerateEmbedding) | Err(GatewayError::Invalid(_))
    ));
}

fn word() -> impl Strategy<Value = String> {
    "[a-z]{1,8}".prop_filter("no lexicon words", |w| {
        let spec = ToyRewardSpec::default();
        !spec.lexicons.values().any(|l| l.terms.iter().any(|t| t == w))
    })
}

proptest! {
    #[test]
    fn harm_term_shifts_reward_exactly(words in prop::collection::vec(word(), 0..49), which in 0..HARM_TERMS.len()) {
        let spec = ToyRewardSpec::default();
        let text = words.join(" ");
        let with = format!("{text} {}", HARM_TERMS[which]);
        let delta = toy_reward(&spec, "", &with) - toy_reward(&spec, "", &text);
        prop_assert!((delta - (spec.length_weight - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn embedding_ignores_token_order(words in prop::collection::vec(word(), 1..20), seed in any::<u64>()) {
        let mut shuffled = words.clone();
        let mut rng = rmcontrast::sampling::SplitMix64::new(seed);
        for i in (1..shuffled.len()).rev() {
            let j = rng.below(i as u64 + 1) as usize;
            shuffled.swap(i, j);
        }
        prop_assert_eq!(hash_embed(&words.join(" "), 64), hash_embed(&shuffled.join(" "), 64));
    }
}
