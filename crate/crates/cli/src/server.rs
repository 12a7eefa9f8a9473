//! JSON API behind the annotation UI. The hidden key is never loaded here.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Map, Value};
use tokio::sync::Mutex;
use tower_http::services::ServeDir;

use fstaug::eval::humaneval::{MAX_RATING, SYSTEMS_PER_ITEM};
use fstaug::eval::{load_items, Appended, HumanEvalItem, RatingRecord, RatingStore};

pub struct AppState {
    items: Vec<HumanEvalItem>,
    // one writer at a time
    store: Mutex<RatingStore>,
}

impl AppState {
    pub fn new(mut items: Vec<HumanEvalItem>, store: RatingStore) -> Self {
        items.sort_by_key(|i| i.id);
        AppState {
            items,
            store: Mutex::new(store),
        }
    }

    pub fn open(items: &Path, ratings: &Path) -> fstaug::Result<Self> {
        Ok(Self::new(load_items(items)?, RatingStore::open(ratings)?))
    }

    fn item(&self, id: usize) -> Option<&HumanEvalItem> {
        self.items
            .binary_search_by_key(&id, |i| i.id)
            .ok()
            .map(|k| &self.items[k])
    }
}

fn error(status: StatusCode, errors: Vec<String>) -> Response {
    (status, Json(json!({ "errors": errors }))).into_response()
}

fn annotator(q: &HashMap<String, String>) -> Result<String, Response> {
    match q.get("annotator").map(|a| a.trim()) {
        Some(a) if !a.is_empty() => Ok(a.to_string()),
        _ => Err(error(
            StatusCode::BAD_REQUEST,
            vec!["annotator: query parameter is required".into()],
        )),
    }
}

async fn next_item(State(state): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let who = match annotator(&q) {
        Ok(a) => a,
        Err(r) => return r,
    };
    let store = state.store.lock().await;
    let next = state.items.iter().find(|i| !store.item_done(&who, i.id));
    match next {
        None => Json(json!({ "done": true, "total": state.items.len() })).into_response(),
        Some(item) => {
            let rated: Vec<usize> = (0..SYSTEMS_PER_ITEM)
                .filter(|&d| store.contains(&who, item.id, d))
                .collect();
            Json(json!({ "done": false, "item": item, "rated": rated })).into_response()
        }
    }
}

async fn progress(State(state): State<Arc<AppState>>, Query(q): Query<HashMap<String, String>>) -> Response {
    let who = match annotator(&q) {
        Ok(a) => a,
        Err(r) => return r,
    };
    let store = state.store.lock().await;
    let rated = state
        .items
        .iter()
        .map(|i| (0..SYSTEMS_PER_ITEM).filter(|&d| store.contains(&who, i.id, d)).count())
        .sum::<usize>();
    let items_rated = state.items.iter().filter(|i| store.item_done(&who, i.id)).count();
    Json(json!({
        "annotator": who,
        "rated": rated,
        "total": state.items.len() * SYSTEMS_PER_ITEM,
        "items_rated": items_rated,
        "items_total": state.items.len(),
    }))
    .into_response()
}

const FIELDS: [&str; 6] = ["annotator", "item", "display_index", "formality", "fluency", "meaning"];

/// Field-by-field reading of a rating body so every problem can be named.
fn parse_rating(body: &[u8]) -> Result<RatingRecord, Vec<String>> {
    let obj: Map<String, Value> = match serde_json::from_slice(body) {
        Ok(Value::Object(m)) => m,
        Ok(_) => return Err(vec!["body: expected a JSON object".into()]),
        Err(e) => return Err(vec![format!("body: {e}")]),
    };
    let mut errs: Vec<String> = obj
        .keys()
        .filter(|k| !FIELDS.contains(&k.as_str()))
        .map(|k| format!("{k}: unknown field"))
        .collect();
    let annotator = match obj.get("annotator") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            errs.push("annotator: expected a string".into());
            String::new()
        }
        None => {
            errs.push("annotator: missing".into());
            String::new()
        }
    };
    let mut int = |name: &str, max: Option<u64>| -> u64 {
        match obj.get(name) {
            None => errs.push(format!("{name}: missing")),
            Some(v) => match (v.as_u64(), max) {
                (Some(n), Some(m)) if n > m => errs.push(format!("{name}: {n} is not in 0..={m}")),
                (Some(n), _) => return n,
                (None, _) => errs.push(format!("{name}: expected a non-negative integer, got {v}")),
            },
        }
        0
    };
    let item = int("item", None);
    let display_index = int("display_index", None);
    let formality = int("formality", Some(MAX_RATING.into()));
    let fluency = int("fluency", Some(MAX_RATING.into()));
    let meaning = int("meaning", Some(MAX_RATING.into()));
    if !errs.is_empty() {
        return Err(errs);
    }
    let record = RatingRecord {
        annotator: annotator.trim().to_string(),
        item: item as usize,
        display_index: display_index as usize,
        formality: formality as u8,
        fluency: fluency as u8,
        meaning: meaning as u8,
    };
    let problems = record.problems();
    if problems.is_empty() {
        Ok(record)
    } else {
        Err(problems)
    }
}

async fn submit(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let record = match parse_rating(&body) {
        Ok(r) => r,
        Err(errs) => return error(StatusCode::BAD_REQUEST, errs),
    };
    if state.item(record.item).is_none() {
        return error(
            StatusCode::BAD_REQUEST,
            vec![format!("item: no item with id {}", record.item)],
        );
    }
    let mut store = state.store.lock().await;
    match store.append(record.clone()) {
        Ok(Appended::Stored) => (StatusCode::CREATED, Json(json!({ "stored": record }))).into_response(),
        Ok(Appended::Duplicate) => error(
            StatusCode::CONFLICT,
            vec![format!(
                "{} already rated item {} output {}",
                record.annotator, record.item, record.display_index
            )],
        ),
        Err(e) => {
            log::error!("rating store: {e}");
            error(StatusCode::INTERNAL_SERVER_ERROR, vec![e.to_string()])
        }
    }
}

const NO_UI: &str = "annotation API is running; start the server with --ui-dir to serve the UI bundle\n";

pub fn router(state: Arc<AppState>, ui_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/items/next", get(next_item))
        .route("/api/progress", get(progress))
        .route("/api/ratings", post(submit))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(|| async { NO_UI })),
    }
}

pub async fn serve(state: AppState, addr: SocketAddr, ui_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("annotation server listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state), ui_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_problems_name_fields() {
        let errs = parse_rating(br#"{"annotator":"a","item":0,"display_index":7,"formality":3,"fluency":"x","extra":1}"#)
            .unwrap_err();
        let joined = errs.join("\n");
        assert!(joined.contains("extra: unknown field"), "{joined}");
        assert!(joined.contains("formality: 3 is not in 0..=2"), "{joined}");
        assert!(joined.contains("fluency: expected"), "{joined}");
        assert!(joined.contains("meaning: missing"), "{joined}");
        assert!(parse_rating(b"[1]").is_err());
        let errs = parse_rating(br#"{"annotator":"a","item":0,"display_index":7,"formality":0,"fluency":1,"meaning":2}"#)
            .unwrap_err();
        assert!(errs[0].starts_with("display_index"), "{errs:?}");
    }
}
