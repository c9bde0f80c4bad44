use dramaturg_core::session::TurnEventKind;
use dramaturg_service::{app, ApiSession, EventFrame, ServiceConfig};
use futures::StreamExt;
use serde_json::json;
use tokio_tungstenite::tungstenite::Message;

async fn start() -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app(ServiceConfig::default()).unwrap()).await });
    addr.to_string()
}

async fn post<T: serde::de::DeserializeOwned>(addr: &str, path: &str, body: serde_json::Value) -> T {
    let resp = reqwest::Client::new()
        .post(format!("http://{addr}{path}"))
        .json(&body)
        .send()
        .await
        .unwrap();
    assert!(resp.status().is_success(), "{path}: {}", resp.status());
    resp.json().await.unwrap()
}

async fn collect(url: &str, upto: usize) -> Vec<EventFrame> {
    let (mut ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
    let mut out = Vec::new();
    while out.len() < upto {
        match ws.next().await {
            Some(Ok(Message::Text(t))) => out.push(serde_json::from_str(&t).unwrap()),
            Some(Ok(Message::Close(_))) | None => break,
            Some(Ok(_)) => {}
            Some(Err(e)) => panic!("{e}"),
        }
    }
    out
}

#[tokio::test(flavor = "multi_thread")]
async fn stream_replays_buffer_then_follows_live() {
    let addr = start().await;
    let s: ApiSession = post(&addr, "/sessions", json!({ "seed": 9 })).await;
    let id = s.session_id;

    let first: Vec<EventFrame> = post(&addr, &format!("/sessions/{id}/advance"), json!({ "ticks": 4 })).await;
    let url = format!("ws://{addr}/sessions/{id}/stream?from=2");
    let live = tokio::spawn({
        let url = url.clone();
        async move { collect(&url, usize::MAX).await }
    });
    tokio::time::sleep(std::time::Duration::from_millis(50)).await;
    let rest: Vec<EventFrame> = post(&addr, &format!("/sessions/{id}/advance"), json!({ "ticks": 1000 })).await;
    assert_eq!(rest.last().unwrap().event.kind, TurnEventKind::Finished);

    let streamed = live.await.unwrap();
    let all: Vec<EventFrame> = first.into_iter().chain(rest).collect();
    assert_eq!(&streamed[..], &all[2..]);

    // A late client sees the identical history from 0 and is then closed.
    let again = collect(&format!("ws://{addr}/sessions/{id}/stream?from=0"), usize::MAX).await;
    assert_eq!(again, all);
    let partial = collect(&format!("ws://{addr}/sessions/{id}/stream?from=0"), 3).await;
    assert_eq!(&partial[..], &all[..3]);
}
