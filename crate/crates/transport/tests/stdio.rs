mod common;

use scimcp_core::{decode_message, RpcEnvelope};
use scimcp_transport::serve_lines;
use serde_json::Value;
use tokio::io::{AsyncBufReadExt, AsyncWriteExt, BufReader};

/// Feed `input` and collect every output line after EOF.
async fn run(input: &str) -> (Vec<String>, usize) {
    let server = common::server();
    let (mut client, transport) = tokio::io::duplex(1 << 16);
    let (read_half, write_half) = tokio::io::split(transport);
    let s = server.clone();
    let task = tokio::spawn(async move { serve_lines(&s, BufReader::new(read_half), write_half).await });
    client.write_all(input.as_bytes()).await.unwrap();
    client.shutdown().await.unwrap();
    let mut lines = Vec::new();
    let mut reader = BufReader::new(client).lines();
    while let Some(l) = reader.next_line().await.unwrap() {
        lines.push(l);
    }
    task.await.unwrap().unwrap();
    (lines, server.session_count())
}

fn parse(line: &str) -> RpcEnvelope {
    decode_message(line).unwrap()
}

fn result(line: &str) -> Value {
    match parse(line) {
        RpcEnvelope::Response { outcome, .. } => outcome.unwrap(),
        other => panic!("not a response: {other:?}"),
    }
}

const INIT: &str = r#"{"jsonrpc":"2.0","id":1,"method":"initialize","params":{}}"#;

#[tokio::test]
async fn initialize_then_list_answers_in_order() {
    let input = format!("{INIT}\n{}\n", r#"{"jsonrpc":"2.0","id":2,"method":"tools/list"}"#);
    let (lines, open) = run(&input).await;
    assert_eq!(lines.len(), 2);
    assert_eq!(parse(&lines[0]).id().map(ToString::to_string).as_deref(), Some("1"));
    assert_eq!(result(&lines[1])["tools"].as_array().unwrap().len(), 2);
    assert_eq!(open, 0, "EOF closes the session");
}

#[tokio::test]
async fn malformed_line_gets_parse_error_and_input_continues() {
    let input = format!(
        "{INIT}\nthis is not json\n{}\n",
        r#"{"jsonrpc":"2.0","id":3,"method":"ping"}"#
    );
    let (lines, _) = run(&input).await;
    assert_eq!(lines.len(), 3);
    let RpcEnvelope::Response { outcome: Err(e), .. } = parse(&lines[1]) else {
        panic!("expected an error response")
    };
    assert_eq!(e.code, -32700);
    assert!(result(&lines[2]).is_object());
}

#[tokio::test]
async fn notifications_are_interleaved_on_the_output() {
    let call = r#"{"jsonrpc":"2.0","id":2,"method":"tools/call","params":{"name":"echo","arguments":{"x":1}}}"#;
    let (lines, _) = run(&format!("{INIT}\n{call}\n")).await;
    assert_eq!(lines.len(), 3);
    let methods: Vec<Option<String>> = lines.iter().map(|l| parse(l).method().map(String::from)).collect();
    assert!(methods.contains(&Some("notifications/message".into())), "{lines:?}");
}

#[tokio::test]
async fn empty_input_is_a_clean_shutdown() {
    let (lines, open) = run("").await;
    assert!(lines.is_empty());
    assert_eq!(open, 0);
}

#[tokio::test]
async fn every_line_is_a_single_envelope() {
    let mut input = format!("{INIT}\n");
    for i in 0..50 {
        input.push_str(&format!(
            "{{\"jsonrpc\":\"2.0\",\"id\":{},\"method\":\"ping\"}}\r\n\n",
            i + 10
        ));
    }
    let (lines, _) = run(&input).await;
    assert_eq!(lines.len(), 51);
    for (i, l) in lines[1..].iter().enumerate() {
        assert_eq!(parse(l).id().unwrap().to_string(), (i + 10).to_string());
    }
}
