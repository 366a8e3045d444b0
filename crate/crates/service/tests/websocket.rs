use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use ringjam_service::{ServerMessage, ServiceConfig};
use tokio_tungstenite::tungstenite::Message;

async fn next_message<S>(ws: &mut S) -> ServerMessage
where
    S: StreamExt<Item = Result<Message, tokio_tungstenite::tungstenite::Error>> + Unpin,
{
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(5), ws.next())
            .await
            .expect("server replied in time")
            .expect("stream open")
            .expect("frame ok");
        if let Message::Text(text) = msg {
            return serde_json::from_str(text.as_str()).expect("valid server JSON");
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn drive_over_websocket() {
    let addr = ringjam_service::spawn("127.0.0.1:0".parse().unwrap(), ServiceConfig::default())
        .await
        .unwrap();
    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/ws")).await.unwrap();

    ws.send(Message::Text(r#"{"type":"input"}"#.into())).await.unwrap();
    assert!(matches!(next_message(&mut ws).await, ServerMessage::Error { .. }));

    ws.send(Message::Text(r#"{"type":"start","condition":"automated","seed":3}"#.into()))
        .await
        .unwrap();
    let ServerMessage::State { t, vehicles, .. } = next_message(&mut ws).await else {
        panic!("expected initial state");
    };
    assert_eq!(t, 0.0);
    assert_eq!(vehicles.len(), 21);

    let mut last_t = 0.0;
    let mut states = 0;
    let started = tokio::time::Instant::now();
    while started.elapsed() < Duration::from_millis(600) {
        ws.send(Message::Text(
            r#"{"type":"input","accel_force":{"mode":"force","value":0.0},"brake_force":{"mode":"force","value":0.0}}"#.into(),
        ))
        .await
        .unwrap();
        if let ServerMessage::State { t, .. } = next_message(&mut ws).await {
            assert!(t >= last_t);
            last_t = t;
            states += 1;
        }
    }
    // ≥ 30 Hz over 0.6 s, with slack for a loaded test machine
    assert!(states >= 10, "only {states} states");
    assert!(last_t > 0.1);

    ws.send(Message::Text(r#"{"type":"stop"}"#.into())).await.unwrap();
    loop {
        if let ServerMessage::End { summary } = next_message(&mut ws).await {
            assert!(summary.steps > 0);
            break;
        }
    }
    ws.close(None).await.unwrap();
}

#[tokio::test]
async fn health_endpoint() {
    use tokio::io::{AsyncReadExt, AsyncWriteExt};
    let addr = ringjam_service::spawn("127.0.0.1:0".parse().unwrap(), ServiceConfig::default())
        .await
        .unwrap();
    let mut stream = tokio::net::TcpStream::connect(addr).await.unwrap();
    stream
        .write_all(b"GET /health HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n")
        .await
        .unwrap();
    let mut body = String::new();
    stream.read_to_string(&mut body).await.unwrap();
    assert!(body.starts_with("HTTP/1.1 200"));
    assert!(body.ends_with("ok"));
}
