mod common;

use std::time::Duration;

use driftdet::corpus::{clean, Document};
use driftdet::density::ModelKind;
use driftdet::detector::{load_pipeline, save_pipeline, train_pipeline, BackendConfig, PipelineConfig};
use driftdet::embeddings::{embed_batch, Backend, BackendKind, RemoteProvider};
use driftdet::Error;

use common::*;

fn docs(n: usize) -> Vec<driftdet::corpus::CleanDocument> {
    (0..n)
        .map(|i| clean(&Document::new(format!("d{i}"), format!("claims adjuster visited house {i} after storm")), true).unwrap())
        .collect()
}

#[test]
fn token_average_is_mean_of_token_vectors() {
    let stub = StubProvider::start(StubMode::Ok { dim: 6 });
    let backend = Backend::remote(BackendKind::RemoteTokenAvg, RemoteProvider::new(stub.url.clone(), 6).unwrap()).unwrap();
    let docs = docs(5);
    let batch = embed_batch(&docs, &backend, 2).unwrap();
    for (doc, got) in docs.iter().zip(&batch.results) {
        let got = got.as_ref().unwrap();
        let mut want = vec![0.0; 6];
        for t in &doc.tokens {
            for (w, x) in want.iter_mut().zip(stub_embedding(t, 6)) {
                *w += x / doc.tokens.len() as f64;
            }
        }
        for (a, b) in got.values().iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn single_in_flight_request_keeps_order() {
    let stub = StubProvider::start(StubMode::Ok { dim: 4 });
    let provider = RemoteProvider::new(stub.url.clone(), 4).unwrap().with_max_in_flight(1);
    let backend = Backend::remote(BackendKind::RemoteSentence, provider).unwrap();
    let docs = docs(7);
    let batch = embed_batch(&docs, &backend, 3).unwrap();
    assert_eq!(stub.request_count(), 3);
    for (doc, got) in docs.iter().zip(&batch.results) {
        assert_eq!(got.as_ref().unwrap().values(), stub_embedding(&doc.sentence_text, 4).as_slice());
    }
}

#[test]
fn unreachable_provider_is_a_provider_error() {
    // bind and drop to get a port nothing listens on
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let provider = RemoteProvider::new(format!("http://127.0.0.1:{port}"), 4)
        .unwrap()
        .with_backoff(Duration::from_millis(1));
    let backend = Backend::remote(BackendKind::RemoteSentence, provider).unwrap();
    assert!(matches!(embed_batch(&docs(2), &backend, 8), Err(Error::Provider { .. })));
}

#[test]
fn remote_pipeline_round_trips_with_endpoint_override() {
    let stub = StubProvider::start(StubMode::Ok { dim: 5 });
    let train: Vec<Document> = (0..12)
        .map(|i| Document::new(format!("t{i}"), format!("policy premium renewal number {i}")))
        .collect();
    let config = PipelineConfig::new(
        BackendConfig::RemoteSentence {
            endpoint: stub.url.clone(),
            dim: 5,
            batch_size: 4,
        },
        ModelKind::Centroid,
    );
    let pipe = train_pipeline(&train, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_pipeline(&pipe, dir.path()).unwrap();
    // remote backends keep no word table
    assert!(!dir.path().join("vocab.txt").exists());

    // the environment points at a different provider than the saved one
    drop(stub);
    let other = StubProvider::start(StubMode::Ok { dim: 5 });
    std::env::set_var("DRIFTDET_PROVIDER_URL", &other.url);
    let loaded = load_pipeline(dir.path());
    std::env::remove_var("DRIFTDET_PROVIDER_URL");
    let loaded = loaded.unwrap();
    let probe = Document::new("p", "policy premium renewal number 3");
    let b = driftdet::detector::score_payload(&loaded, &probe).unwrap();
    assert_eq!(other.request_count(), 1);
    assert!(b.score.value() > 0.9);
}
