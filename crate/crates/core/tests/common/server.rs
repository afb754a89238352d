//! Scripted model server on a loopback socket.

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;

use serde_json::{json, Value};

/// What the server sends back for one request line. `None` sends nothing.
pub type Handler = Box<dyn FnMut(&Value) -> Option<String> + Send>;

/// Serves a single connection, answering each request line with `handler`.
/// Returns the `tcp://` endpoint.
pub fn spawn(mut handler: Handler) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        let Ok((stream, _)) = listener.accept() else {
            return;
        };
        let mut writer = stream.try_clone().unwrap();
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            let request: Value = serde_json::from_str(&line).unwrap_or(Value::Null);
            if let Some(reply) = handler(&request) {
                if writer.write_all(format!("{reply}\n").as_bytes()).is_err() {
                    break;
                }
            }
        }
    });
    format!("tcp://{addr}")
}

pub fn ok(id: &Value, result: Value) -> Option<String> {
    Some(json!({"id": id, "result": result}).to_string())
}

pub fn err(id: &Value, code: i64, message: &str) -> Option<String> {
    Some(json!({"id": id, "error": {"code": code, "message": message}}).to_string())
}

/// Handshakes as an `n`-token model and answers `logits` with `v` or `d`
/// depending on the requested side.
pub fn fixed(n: usize, v: Value, d: Value) -> Handler {
    Box::new(move |req| {
        let id = &req["id"];
        match req["method"].as_str() {
            Some("handshake") => ok(id, json!({"n": n, "eos_id": null, "model": "fixed"})),
            Some("logits") if req["params"]["side"] == "v" => ok(id, json!({"logits": v})),
            Some("logits") => ok(id, json!({"logits": d})),
            _ => err(id, -32601, "method not found"),
        }
    })
}
