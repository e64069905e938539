//! Websocket front end. Each connection gets the triangles once, then a
//! `mesh_frame` header, a binary position frame and an `energy_report` for
//! every published result.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use tokio::net::TcpListener;

use crate::protocol::{FrameHeader, ProtocolMessage};
use crate::session::{Frame, Service};

pub const DEFAULT_PORT: u16 = 7870;

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/", get(upgrade))
        .route("/ws", get(upgrade))
        .with_state(service)
}

pub async fn bind(addr: SocketAddr) -> std::io::Result<TcpListener> {
    TcpListener::bind(addr).await
}

/// Serves until the listener fails. Sessions outlive their connections.
pub async fn serve(listener: TcpListener, service: Service) -> std::io::Result<()> {
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on ws://{addr}");
    }
    axum::serve(listener, router(service)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(service): State<Service>) -> Response {
    ws.on_upgrade(move |socket| connection(socket, service))
}

async fn connection(mut socket: WebSocket, service: Service) {
    let mut frames = service.subscribe();
    let mut sent_triangles = false;
    let mut last: Option<Arc<Frame>> = None;
    loop {
        let current = frames.borrow_and_update().clone();
        if let Some(frame) = current {
            if last.as_ref().is_none_or(|l| !Arc::ptr_eq(l, &frame)) {
                if send_frame(&mut socket, &service, &frame, !sent_triangles).await.is_err() {
                    return;
                }
                sent_triangles = true;
                last = Some(frame);
            }
        }
        tokio::select! {
            changed = frames.changed() => {
                if changed.is_err() {
                    return;
                }
            }
            incoming = socket.recv() => {
                let Some(Ok(msg)) = incoming else { return };
                let reply = match msg {
                    Message::Text(text) => handle_text(&service, text.as_str()).await,
                    Message::Binary(_) => Some(error("clients send JSON text only", None)),
                    Message::Close(_) => return,
                    _ => None,
                };
                if let Some(reply) = reply {
                    if socket.send(Message::Text(reply.to_json().into())).await.is_err() {
                        return;
                    }
                }
            }
        }
    }
}

async fn send_frame(socket: &mut WebSocket, service: &Service, frame: &Frame, with_triangles: bool) -> Result<(), axum::Error> {
    let header = ProtocolMessage::MeshFrame(FrameHeader {
        revision: frame.revision,
        vertex_count: (frame.positions.len() / 3) as u32,
        connectivity_hash: service.connectivity_hash().to_owned(),
        converged: frame.converged,
        triangles: with_triangles.then(|| service.triangles().to_vec()),
    });
    socket.send(Message::Text(header.to_json().into())).await?;
    socket.send(Message::Binary(frame.encode().into())).await?;
    let report = ProtocolMessage::EnergyReport(frame.report.clone());
    socket.send(Message::Text(report.to_json().into())).await
}

fn error(message: impl Into<String>, revision: Option<u64>) -> ProtocolMessage {
    ProtocolMessage::Error {
        message: message.into(),
        revision,
    }
}

async fn handle_text(service: &Service, text: &str) -> Option<ProtocolMessage> {
    let msg = match ProtocolMessage::from_json(text) {
        Ok(m) => m,
        Err(e) => return Some(error(e, Some(service.revision()))),
    };
    if msg.is_edit() {
        return match service.handle_edit(&msg) {
            Ok(_) => None,
            Err(e) => Some(error(e, Some(service.revision()))),
        };
    }
    match msg {
        ProtocolMessage::RequestExport { path, .. } => {
            let s = service.clone();
            let target = path.clone();
            match tokio::task::spawn_blocking(move || s.export(target)).await {
                Ok(Ok(revision)) => Some(ProtocolMessage::RequestExport {
                    path,
                    revision: Some(revision),
                }),
                Ok(Err(e)) => Some(error(e, Some(service.revision()))),
                Err(e) => Some(error(e.to_string(), None)),
            }
        }
        _ => Some(error("servers only accept edits and export requests", Some(service.revision()))),
    }
}
