use std::sync::Arc;

use toposearch::api::{self, AskRequest, SearchParams};
use toposearch::corpus::ToponymRecord;
use toposearch::engine::Engine;
use toposearch::hybrid::Method;
use toposearch::semantic::HashingEncoder;
use toposearch_client::Client;

fn engine() -> Arc<Engine> {
    let recs = vec![
        ToponymRecord::named("m", "Мёша").with_coordinates("55.6", "49.9"),
        ToponymRecord::named("k", "Кабан").with_coordinates("55.7636", "49.1389"),
        ToponymRecord::named("a/b", "Слэш").with_coordinates("55.70", "49.20"),
    ];
    Arc::new(Engine::from_records(recs, Box::new(HashingEncoder::new(64))).unwrap())
}

async fn start() -> (Arc<Engine>, Client) {
    let engine = engine();
    let (addr, _) = toposearch_service::spawn(Arc::clone(&engine), "127.0.0.1:0".parse().unwrap())
        .await
        .unwrap();
    (engine, Client::new(&format!("http://{addr}")).unwrap())
}

#[tokio::test]
async fn search_matches_in_process() {
    let (engine, client) = start().await;
    for method in [Method::Hybrid, Method::SemanticOnly, Method::SpatialOnly, Method::Bm25] {
        let p = SearchParams {
            q: Some("озеро Кабан".into()),
            lat: Some(55.7),
            lon: Some(49.2),
            k: Some(3),
            method: Some(method),
            ..Default::default()
        };
        assert_eq!(client.search(&p).await.unwrap(), api::search(&engine, &p).unwrap());
    }
}

#[tokio::test]
async fn ask_doc_health() {
    let (engine, client) = start().await;
    let req = AskRequest {
        question: "Какие координаты у Кабан?".into(),
        lat: Some(55.7636),
        lon: Some(49.1389),
        ..Default::default()
    };
    assert_eq!(client.ask(&req).await.unwrap(), api::ask(&engine, &req).unwrap());
    assert_eq!(client.doc("a/b").await.unwrap(), api::doc(&engine, "a/b").unwrap());
    assert_eq!(client.health().await.unwrap().records, 3);
}

#[tokio::test]
async fn errors_carry_the_body() {
    let (_, client) = start().await;
    let err = client
        .search(&SearchParams {
            q: Some("x".into()),
            alpha: Some(7.0),
            ..Default::default()
        })
        .await
        .unwrap_err();
    assert_eq!(err.api_error().unwrap().fields[0].field, "alpha");
    let err = client.doc("missing").await.unwrap_err();
    assert_eq!(err.api_error().unwrap().kind, api::ErrorKind::NotFound);
}

#[test]
fn rejects_bad_base_urls() {
    assert!(Client::new("not a url").is_err());
    assert!(Client::new("mailto:x@y").is_err());
}
