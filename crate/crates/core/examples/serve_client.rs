//! Starts the session server on a free port and drives it with a scripted
//! client: start, look at the smartphone, answer two trials.

use std::net::TcpStream;
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::{json, Value};
use tungstenite::{connect, stream::MaybeTlsStream, Message, WebSocket};
use visionsim::experiment::{Protocol, SceneEntry};
use visionsim::runner::{Server, ServiceConfig};

type Socket = WebSocket<MaybeTlsStream<TcpStream>>;

fn recv_where(
    ws: &mut Socket,
    kind: &str,
    accept: impl Fn(&Value) -> bool,
) -> Result<Value, Box<dyn std::error::Error>> {
    let deadline = Instant::now() + Duration::from_secs(5);
    while Instant::now() < deadline {
        if let Message::Text(t) = ws.read()? {
            let v: Value = serde_json::from_str(t.as_str())?;
            if v["type"] == kind && accept(&v["payload"]) {
                return Ok(v);
            }
        }
    }
    Err(format!("no {kind} within 5 s").into())
}

fn recv_until(ws: &mut Socket, kind: &str) -> Result<Value, Box<dyn std::error::Error>> {
    recv_where(ws, kind, |_| true)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data_root = std::env::temp_dir().join(format!("visionsim_serve_{}", std::process::id()));
    let config = ServiceConfig {
        protocol: Protocol {
            name: "serve_demo".into(),
            order_mode: Default::default(),
            seed: 3,
            scenes: vec![SceneEntry::new("matching_task", r#"{"trials": 2}"#)],
        },
        mask: Default::default(),
        data_root: data_root.clone(),
        questionnaire_dir: Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("fixtures/demo/questionnaires"),
    };
    let mut server = Server::bind("127.0.0.1:0", config)?;
    let url = format!("ws://{}", server.local_addr()?);
    let handle = std::thread::spawn(move || server.run(Some(1)));

    let (mut ws, _) = connect(url.as_str())?;
    let mask = recv_until(&mut ws, "setup_mask")?;
    println!(
        "mask fields: {}",
        mask["payload"]["fields"].as_array().map_or(0, Vec::len)
    );

    let mut seq = 0;
    let mut send =
        |ws: &mut Socket, t: f64, kind: &str, payload: Value| -> tungstenite::Result<()> {
            seq += 1;
            let frame = json!({"type": kind, "seq": seq, "timestamp": t, "payload": payload});
            ws.send(Message::text(frame.to_string()))
        };

    send(
        &mut ws,
        0.0,
        "session_start",
        json!({"subject_id": "web01"}),
    )?;
    let trial = recv_until(&mut ws, "trial_present")?;
    println!("trial 0 table {}", trial["payload"]["trial"]["table"]);

    send(
        &mut ws,
        0.5,
        "gaze_proxy",
        json!({"x": 0.2, "y": 0.7, "screen": "smartphone"}),
    )?;
    // frames already in flight still show the old target
    let state = recv_where(&mut ws, "autofocal_state", |p| {
        p["target_vergence"].as_f64() > Some(3.0)
    })?;
    let p = &state["payload"];
    println!(
        "lens {:.4} D toward {:.4} D",
        p["lens_power"].as_f64().unwrap_or(f64::NAN),
        p["target_vergence"].as_f64().unwrap_or(f64::NAN)
    );

    send(
        &mut ws,
        2.0,
        "trial_response",
        json!({"trial_id": 0, "response": "match"}),
    )?;
    recv_until(&mut ws, "trial_present")?;
    send(
        &mut ws,
        3.5,
        "trial_response",
        json!({"trial_id": 1, "response": "no_match"}),
    )?;
    let done = recv_until(&mut ws, "scene_state")?;
    println!("phase {}", done["payload"]["phase"]);
    ws.close(None)?;
    while ws.read().is_ok() {}

    handle.join().expect("server thread")?;
    println!(
        "trials at {}",
        data_root.join("web01/matching_task_1/trials.csv").display()
    );
    Ok(())
}
