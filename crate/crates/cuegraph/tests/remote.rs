//! Remote backend behavior against a real (local) HTTP server: caching,
//! retries, auth headers, replay, and parse-failure handling.

mod common;

use common::{CannedResponse, MockServer};
use cuegraph::cue::Cue;
use cuegraph::detectors::{BackendSpec, Detector, ModalityConfig, Mode, PromptVariant, RemoteSpec};
use cuegraph::synthgen::{demo_config, generate};
use cuegraph::{Error, LabeledSegment};
use std::path::Path;
use tempfile::tempdir;

fn spec(server: &MockServer, cache_dir: &Path) -> RemoteSpec {
    RemoteSpec {
        endpoint: server.endpoint(),
        model: "mock-model".to_string(),
        timeout_s: 5.0,
        max_retries: 2,
        max_concurrent_requests: 4,
        cache_dir: cache_dir.to_path_buf(),
        api_key_env: None,
    }
}

fn sample_segment() -> LabeledSegment {
    let manifest = generate(&demo_config(6, 42)).unwrap();
    manifest.segments.into_iter().next().unwrap()
}

fn modality() -> ModalityConfig {
    ModalityConfig {
        mode: Mode::AudioVideo,
        frame_budget: 5,
    }
}

#[test]
fn round_trip_caches_every_query() {
    let server = MockServer::always("yes");
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let segment = sample_segment();

    let first = detector
        .predict(&segment, &Cue::ALL, &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(server.hits(), 8);
    for cue in Cue::ALL {
        assert_eq!(*first.values.get(cue), Some(true));
        assert!(!first.parse_failures.get(cue));
    }

    // Same queries again: everything served from the cache.
    let second = detector
        .predict(&segment, &Cue::ALL, &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(server.hits(), 8);
    assert_eq!(second.values, first.values);

    // Final and direct questions are distinct cache entries.
    let fin = detector
        .predict_final(&segment, &modality(), &PromptVariant::graph(), Some(&first))
        .unwrap();
    assert!(fin.value);
    let direct = detector.predict_direct(&segment, &modality()).unwrap();
    assert!(direct.value);
    assert_eq!(server.hits(), 10);

    let request = &server.requests()[0];
    assert_eq!(request["model"], "mock-model");
    let media = request["media"].as_array().unwrap();
    assert_eq!(media.len(), 6);
    assert_eq!(
        media.iter().filter(|m| m["kind"] == "frame").count(),
        5
    );
    assert_eq!(media.last().unwrap()["kind"], "audio");
    assert!(media[0]["reference"]
        .as_str()
        .unwrap()
        .starts_with("synthetic://"));

    let cached: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(cached.len(), 10);
    assert!(cached.iter().all(|name| name.ends_with(".json")));
    assert!(!cached.iter().any(|name| name.contains("tmp")));
    let entry: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join(&cached[0])).unwrap(),
    )
    .unwrap();
    assert_eq!(entry["response"]["text"], "yes");
    assert_eq!(entry["request"]["model"], "mock-model");
}

#[test]
fn bearer_token_is_sent_but_never_cached() {
    std::env::set_var("CUEGRAPH_TEST_KEY_BEARER", "sekrit-token");
    let server = MockServer::always("no");
    let dir = tempdir().unwrap();
    let mut remote = spec(&server, dir.path());
    remote.api_key_env = Some("CUEGRAPH_TEST_KEY_BEARER".to_string());
    let detector = Detector::new(&BackendSpec::remote(remote)).unwrap();
    let segment = sample_segment();
    detector
        .predict(&segment, &[Cue::Osad], &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(
        server.last_header("authorization").as_deref(),
        Some("Bearer sekrit-token")
    );
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(!text.contains("sekrit-token"));
    }
}

#[test]
fn missing_key_env_fails_at_construction() {
    let server = MockServer::always("yes");
    let dir = tempdir().unwrap();
    let mut remote = spec(&server, dir.path());
    remote.api_key_env = Some("CUEGRAPH_TEST_KEY_UNSET".to_string());
    let err = match Detector::new(&BackendSpec::remote(remote)) {
        Err(e) => e,
        Ok(_) => panic!("detector built without its key"),
    };
    assert!(err.to_string().contains("CUEGRAPH_TEST_KEY_UNSET"), "{err}");
    assert_eq!(server.hits(), 0);
}

#[test]
fn server_errors_are_retried_until_success() {
    let server = MockServer::start(|i, _| {
        if i < 2 {
            CannedResponse::status(500, "worker crashed")
        } else {
            CannedResponse::text("yes")
        }
    });
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let p = detector
        .predict(&sample_segment(), &[Cue::Aud], &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(*p.values.get(Cue::Aud), Some(true));
    assert_eq!(server.hits(), 3);
}

#[test]
fn rate_limits_are_retried() {
    let server = MockServer::start(|i, _| {
        if i == 0 {
            CannedResponse::status(429, "slow down")
        } else {
            CannedResponse::text("no")
        }
    });
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let p = detector
        .predict(&sample_segment(), &[Cue::Pad], &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(*p.values.get(Cue::Pad), Some(false));
    assert_eq!(server.hits(), 2);
}

#[test]
fn retries_exhaust_into_a_backend_error() {
    let server = MockServer::start(|_, _| CannedResponse::status(503, "down"));
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let err = detector
        .predict(&sample_segment(), &[Cue::Igd], &modality(), &PromptVariant::auto())
        .unwrap_err();
    // max_retries = 2 means one initial attempt plus two retries.
    assert_eq!(server.hits(), 3);
    let msg = err.to_string();
    assert!(msg.contains("HTTP 503") && msg.contains("after 2 retries"), "{msg}");
    assert!(matches!(err, Error::Backend { .. }));
    // Failures must not poison the cache.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn client_errors_fail_immediately() {
    let server = MockServer::start(|_, _| CannedResponse::status(400, "bad request"));
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let err = detector
        .predict(&sample_segment(), &[Cue::Ogd], &modality(), &PromptVariant::auto())
        .unwrap_err();
    assert_eq!(server.hits(), 1);
    assert!(err.to_string().contains("HTTP 400"), "{err}");
}

#[test]
fn malformed_response_body_fails_immediately() {
    let server = MockServer::start(|_, _| CannedResponse::status(200, "plain text, not json"));
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let err = detector
        .predict(&sample_segment(), &[Cue::Sfd], &modality(), &PromptVariant::auto())
        .unwrap_err();
    assert_eq!(server.hits(), 1);
    assert!(err.to_string().contains("bad response body"), "{err}");
}

#[test]
fn unparsable_answers_set_the_failure_flag() {
    let server = MockServer::always("I cannot tell from these frames.");
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let segment = sample_segment();
    let p = detector
        .predict(&segment, &[Cue::Stad], &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(*p.values.get(Cue::Stad), Some(false));
    assert!(*p.parse_failures.get(Cue::Stad));
    assert_eq!(p.parse_failure_count(), 1);
    let fin = detector.predict_direct(&segment, &modality()).unwrap();
    assert!(!fin.value);
    assert!(fin.parse_failed);
}

#[test]
fn replay_reads_the_cache_and_never_dials_out() {
    let server = MockServer::always("yes");
    let dir = tempdir().unwrap();
    let remote_spec = spec(&server, dir.path());
    let segment = sample_segment();

    let live = Detector::new(&BackendSpec::remote(remote_spec.clone())).unwrap();
    let from_wire = live
        .predict(&segment, &Cue::ALL, &modality(), &PromptVariant::auto())
        .unwrap();
    let wire_hits = server.hits();

    let replay = Detector::new(&BackendSpec::replay(remote_spec)).unwrap();
    let from_cache = replay
        .predict(&segment, &Cue::ALL, &modality(), &PromptVariant::auto())
        .unwrap();
    assert_eq!(from_cache.values, from_wire.values);
    assert_eq!(server.hits(), wire_hits);

    // A cold cache is a hard error, not a network fallback.
    let cold = tempdir().unwrap();
    let mut cold_spec = spec(&server, cold.path());
    cold_spec.max_retries = 0;
    let replay_cold = Detector::new(&BackendSpec::replay(cold_spec)).unwrap();
    let err = replay_cold
        .predict(&segment, &[Cue::Osad], &modality(), &PromptVariant::auto())
        .unwrap_err();
    assert!(matches!(err, Error::CacheMiss { .. }), "{err}");
    assert_eq!(server.hits(), wire_hits);
}

#[test]
fn final_variants_share_cached_cue_answers() {
    let server = MockServer::always("yes");
    let dir = tempdir().unwrap();
    let detector = Detector::new(&BackendSpec::remote(spec(&server, dir.path()))).unwrap();
    let segment = sample_segment();

    let variants = [
        PromptVariant::auto(),
        PromptVariant::graph(),
        "graph-dep-think".parse::<PromptVariant>().unwrap(),
    ];
    let mut final_answers = Vec::new();
    for variant in &variants {
        let cues = detector
            .predict(&segment, &Cue::ALL, &modality(), variant)
            .unwrap();
        let fin = detector
            .predict_final(&segment, &modality(), variant, Some(&cues))
            .unwrap();
        final_answers.push(fin.value);
    }
    // Cue queries were paid for once; each variant only added its own
    // final question.
    assert_eq!(server.hits(), 8 + variants.len());
    assert!(final_answers.iter().all(|v| *v));
}
