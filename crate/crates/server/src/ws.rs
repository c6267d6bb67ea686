use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::response::{IntoResponse, Response};
use serde::Deserialize;

use wxflow_core::{ProjectId, Service};

use crate::ApiError;

#[derive(Debug, Deserialize)]
pub struct EventsQuery {
    project: Option<ProjectId>,
}

/// Push-only socket of service events, optionally limited to one project.
/// Client messages other than close are ignored.
pub async fn events(
    State(svc): State<Service>,
    Query(q): Query<EventsQuery>,
    ws: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Result<Response, ApiError> {
    if let Some(p) = q.project {
        svc.store().project(p)?;
    }
    let ws = match ws {
        Ok(ws) => ws,
        Err(rej) => return Ok(rej.into_response()),
    };
    Ok(ws.on_upgrade(move |socket| pump(svc, q.project, socket)).into_response())
}

async fn pump(svc: Service, project: Option<ProjectId>, mut socket: WebSocket) {
    let (tx, mut rx) = tokio::sync::mpsc::unbounded_channel();
    let id = svc.events().subscribe(move |e| {
        if project.is_none_or(|p| p == e.project_id) {
            let _ = tx.send(e.clone());
        }
    });
    loop {
        tokio::select! {
            ev = rx.recv() => {
                let Some(ev) = ev else { break };
                let text = serde_json::to_string(&ev).expect("events serialize");
                if socket.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => match msg {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => break,
                Some(Ok(_)) => {}
            }
        }
    }
    svc.events().unsubscribe(id);
}
