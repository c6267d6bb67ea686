//! REST routes and the per-project event socket.

mod params;
mod ws;

use std::future::Future;
use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;

use wxflow_core::analytics::{ScenarioAt, ScenarioSpec};
use wxflow_core::export;
use wxflow_core::griddef::{snap_child_domain, validate_nesting};
use wxflow_core::service::ErrorClass;
use wxflow_core::{DomainSpec, EnsembleId, GeoRect, ProjectId, RunConfig, RunId, Service, ServiceError};

pub use params::QueryParams;

/// Error response: status from the error class, JSON body from the error.
#[derive(Debug)]
pub struct ApiError(pub ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

pub fn status_of(class: ErrorClass) -> StatusCode {
    match class {
        ErrorClass::Validation => StatusCode::BAD_REQUEST,
        ErrorClass::NotFound => StatusCode::NOT_FOUND,
        ErrorClass::Conflict => StatusCode::CONFLICT,
        ErrorClass::Internal => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (status_of(self.0.class()), Json(self.0.to_json())).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn invalid(msg: impl Into<String>) -> ApiError {
    ApiError(ServiceError::Invalid(msg.into()))
}

/// JSON body parsed with our own error mapping, so bad input is a 400 with
/// the usual error shape.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| invalid(format!("bad request body: {e}")))
}

/// Runs a blocking service call off the async workers.
async fn blocking<T, F>(svc: Service, f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce(Service) -> Result<T, ServiceError> + Send + 'static,
{
    tokio::task::spawn_blocking(move || f(svc))
        .await
        .map_err(|e| ApiError(ServiceError::Invalid(format!("handler panicked: {e}"))))?
        .map_err(ApiError)
}

fn csv(text: String) -> Response {
    ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], text).into_response()
}

fn json_or_csv<T: Serialize>(p: &QueryParams, v: T, to_csv: impl FnOnce(&T) -> String) -> ApiResult<Response> {
    match p.format.as_deref() {
        None | Some("json") => Ok(Json(v).into_response()),
        Some("csv") => Ok(csv(to_csv(&v))),
        Some(f) => Err(invalid(format!("unsupported format `{f}`"))),
    }
}

pub fn router(svc: Service) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/projects", get(list_projects).post(create_project))
        .route("/projects/{p}/lineage", get(lineage))
        .route("/projects/{p}/export", get(export_project))
        .route("/projects/{p}/runs", post(create_run))
        .route("/projects/{p}/ensembles", get(list_ensembles).post(create_ensemble))
        .route("/projects/{p}/projection", get(projection))
        .route("/runs/{id}", get(run_detail).delete(delete_run))
        .route("/runs/{id}/start", post(start_run))
        .route("/runs/{id}/abort", post(abort_run))
        .route("/runs/{id}/restart", post(restart_run))
        .route("/runs/{id}/series", get(run_series))
        .route("/runs/{id}/sunburst", get(run_sunburst))
        .route("/runs/{id}/map", get(run_map))
        .route("/runs/{id}/aggregates", get(run_aggregates))
        .route("/ensembles/{e}", get(ensemble))
        .route("/ensembles/{e}/members/{run}", put(add_member).delete(remove_member))
        .route("/ensembles/{e}/map", get(ensemble_map))
        .route("/ensembles/{e}/heatmatrix", get(ensemble_heatmatrix))
        .route("/ensembles/{e}/sunburst", get(ensemble_sunburst))
        .route("/ensembles/{e}/probability", get(ensemble_probability))
        .route("/domains/snap", post(snap_domain))
        .route("/domains/validate", post(validate_domains))
        .route("/events", get(ws::events))
        .with_state(svc)
}

/// Serves until `shutdown` resolves, then stops the service.
pub async fn serve(svc: Service, listener: TcpListener, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    let app = router(svc.clone());
    let res = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    tokio::task::spawn_blocking(move || svc.shutdown()).await.ok();
    res
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn run(svc: Service, addr: SocketAddr) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    serve(svc, listener, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct NameBody {
    name: String,
}

async fn list_projects(State(svc): State<Service>) -> impl IntoResponse {
    Json(svc.projects())
}

async fn create_project(State(svc): State<Service>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let NameBody { name } = body(&b)?;
    Ok((StatusCode::CREATED, Json(svc.create_project(&name)?)))
}

async fn lineage(State(svc): State<Service>, Path(p): Path<ProjectId>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.lineage(p)?))
}

async fn export_project(State(svc): State<Service>, Path(p): Path<ProjectId>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.export_project(p)?))
}

#[derive(Deserialize)]
struct NewRun {
    #[serde(flatten)]
    config: RunConfig,
    #[serde(default)]
    parent_run_id: Option<RunId>,
}

async fn create_run(State(svc): State<Service>, Path(p): Path<ProjectId>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let NewRun { config, parent_run_id } = body(&b)?;
    Ok((StatusCode::CREATED, Json(svc.create_run(p, config, parent_run_id)?)))
}

async fn run_detail(State(svc): State<Service>, Path(id): Path<RunId>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.run_detail(id)?))
}

async fn delete_run(State(svc): State<Service>, Path(id): Path<RunId>) -> ApiResult<impl IntoResponse> {
    blocking(svc, move |s| s.delete_run(id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

#[derive(Deserialize, Default)]
struct StartQuery {
    pacing_ms: Option<u64>,
}

async fn start_run(
    State(svc): State<Service>,
    Path(id): Path<RunId>,
    Query(q): Query<StartQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(svc.start_run(id, q.pacing_ms)?)))
}

async fn restart_run(
    State(svc): State<Service>,
    Path(id): Path<RunId>,
    Query(q): Query<StartQuery>,
) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(svc.restart_run(id, q.pacing_ms)?)))
}

async fn abort_run(State(svc): State<Service>, Path(id): Path<RunId>) -> ApiResult<impl IntoResponse> {
    Ok((StatusCode::ACCEPTED, Json(svc.abort_run(id)?)))
}

async fn run_series(
    State(svc): State<Service>,
    Path(id): Path<RunId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, field, spatial) = (p.domain()?, p.field()?, p.spatial()?);
    let v = blocking(svc, move |s| s.series(id, domain, field, spatial)).await?;
    json_or_csv(&p, v, export::series_csv)
}

async fn run_aggregates(
    State(svc): State<Service>,
    Path(id): Path<RunId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let domain = p.domain()?;
    Ok(Json(blocking(svc, move |s| s.aggregates(id, domain)).await?).into_response())
}

async fn run_sunburst(
    State(svc): State<Service>,
    Path(id): Path<RunId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, spatial) = (p.domain()?, p.spatial()?);
    Ok(Json(blocking(svc, move |s| s.run_sunburst(id, domain, spatial)).await?).into_response())
}

async fn run_map(
    State(svc): State<Service>,
    Path(id): Path<RunId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, field, time, levels) = (p.domain()?, p.field()?, p.time()?, p.levels()?);
    Ok(Json(blocking(svc, move |s| s.run_map(id, domain, field, time, levels)).await?).into_response())
}

async fn list_ensembles(State(svc): State<Service>, Path(p): Path<ProjectId>) -> ApiResult<impl IntoResponse> {
    svc.store().project(p)?;
    Ok(Json(svc.store().ensembles_in_project(p)))
}

async fn create_ensemble(State(svc): State<Service>, Path(p): Path<ProjectId>, b: Bytes) -> ApiResult<impl IntoResponse> {
    let NameBody { name } = body(&b)?;
    Ok((StatusCode::CREATED, Json(svc.create_ensemble(p, &name)?)))
}

async fn ensemble(State(svc): State<Service>, Path(e): Path<EnsembleId>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.ensemble(e)?))
}

async fn add_member(State(svc): State<Service>, Path((e, run)): Path<(EnsembleId, RunId)>) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.set_membership(e, run, true)?))
}

async fn remove_member(
    State(svc): State<Service>,
    Path((e, run)): Path<(EnsembleId, RunId)>,
) -> ApiResult<impl IntoResponse> {
    Ok(Json(svc.set_membership(e, run, false)?))
}

async fn ensemble_map(
    State(svc): State<Service>,
    Path(e): Path<EnsembleId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, field, time, agg, levels) = (p.domain()?, p.field()?, p.time()?, p.agg()?, p.levels()?);
    Ok(Json(blocking(svc, move |s| s.ensemble_map(e, domain, field, time, agg, levels)).await?).into_response())
}

async fn ensemble_heatmatrix(
    State(svc): State<Service>,
    Path(e): Path<EnsembleId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, field, agg) = (p.domain()?, p.field()?, p.agg()?);
    let v = blocking(svc, move |s| s.ensemble_heatmatrix(e, domain, field, agg)).await?;
    json_or_csv(&p, v, export::heatmatrix_csv)
}

async fn ensemble_sunburst(
    State(svc): State<Service>,
    Path(e): Path<EnsembleId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, spatial, ens) = (p.domain()?, p.spatial()?, p.ensemble_agg()?);
    Ok(Json(blocking(svc, move |s| s.ensemble_sunburst(e, domain, spatial, ens)).await?).into_response())
}

/// Scenario from query parameters; the evaluation window defaults to the
/// members' whole horizon.
pub fn scenario_of(svc: &Service, e: EnsembleId, p: &QueryParams) -> Result<ScenarioSpec, ServiceError> {
    let horizon = svc
        .ensemble(e)?
        .members
        .first()
        .map(|&m| svc.store().run(m).map(|r| r.config.horizon_hours().unwrap_or(0)))
        .transpose()?
        .unwrap_or(0);
    let conditions = p.conditions().map_err(|e| e.0)?;
    Ok(ScenarioSpec {
        conditions,
        precip_window_h: p.window.unwrap_or(1),
        eval_t0: p.t0.unwrap_or(1),
        eval_t1: p.t1.unwrap_or(horizon),
    })
}

async fn ensemble_probability(
    State(svc): State<Service>,
    Path(e): Path<EnsembleId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let (domain, levels) = (p.domain()?, p.levels()?);
    let at = p.hour.map_or(ScenarioAt::Window, ScenarioAt::Hour);
    match p.view.as_deref() {
        None | Some("map") => {
            let v = blocking(svc, move |s| {
                let spec = scenario_of(&s, e, &p)?;
                s.ensemble_probability(e, domain, &spec, at, levels)
            })
            .await?;
            Ok(Json(v).into_response())
        }
        Some("matrix") => {
            let format = p.format.clone();
            let v = blocking(svc, move |s| {
                let spec = scenario_of(&s, e, &p)?;
                s.ensemble_scenario_matrix(e, domain, &spec)
            })
            .await?;
            let q = QueryParams { format, ..Default::default() };
            json_or_csv(&q, v, export::scenario_matrix_csv)
        }
        Some(v) => Err(invalid(format!("unknown view `{v}`"))),
    }
}

async fn projection(
    State(svc): State<Service>,
    Path(project): Path<ProjectId>,
    p: QueryParams,
) -> ApiResult<Response> {
    let domain = p.domain()?;
    let v = blocking(svc, move |s| s.projection(project, domain)).await?;
    json_or_csv(&p, v, export::projection_csv)
}

#[derive(Deserialize)]
struct SnapBody {
    parent: DomainSpec,
    rect: GeoRect,
    #[serde(default = "default_ratio")]
    ratio: u32,
}

fn default_ratio() -> u32 {
    3
}

async fn snap_domain(b: Bytes) -> ApiResult<impl IntoResponse> {
    let SnapBody { parent, rect, ratio } = body(&b)?;
    Ok(Json(snap_child_domain(&parent, &rect, ratio)?))
}

async fn validate_domains(b: Bytes) -> ApiResult<impl IntoResponse> {
    let domains: Vec<DomainSpec> = body(&b)?;
    Ok(Json(validate_nesting(&domains)))
}
