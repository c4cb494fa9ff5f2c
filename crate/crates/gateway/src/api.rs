//! HTTP/JSON service over a live simulation.
//!
//! Every request, read or write, is turned into a job and run on one writer
//! thread that owns the [`Simulation`]. Mutations are therefore linearized and
//! every read sees a state between two whole commands.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use evochain::agentvm::{agent_price, tokens_minted_by};
use evochain::ledger::{Call, ErrorCode, Status, TxError};
use evochain::morphogen::phenotype_svg;
use evochain::simkernel::export_tree_dot;
use evochain::{Address, Receipt, Simulation, Transaction, Wei};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};

/// Upper bound on `count` for one `POST /api/tick`.
pub const MAX_TICKS_PER_REQUEST: u64 = 10_000;
/// Upper bound on `limit` for one `GET /api/events` page.
pub const MAX_EVENTS_PER_PAGE: usize = 1_000;
const DEFAULT_EVENTS_PER_PAGE: usize = 100;
const QUEUE_DEPTH: usize = 256;

const SESSION_TAG: &[u8] = b"evochain/session";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ApiSession {
    pub session_id: String,
    pub bound_eoa: Address,
    /// Unix seconds.
    pub created_at: u64,
}

/// State owned by the writer thread.
struct Live {
    sim: Simulation,
    sessions: HashMap<String, ApiSession>,
    next_eoa: u64,
}

impl Live {
    fn session(&self, id: &str) -> Result<&ApiSession, ApiError> {
        self.sessions
            .get(id)
            .ok_or_else(|| ApiError::new(StatusCode::UNAUTHORIZED, "UnknownSession"))
    }

    fn advance(&mut self) {
        let scripted = self.sim.config().interactive.scripted_actors;
        self.sim.advance(scripted);
    }
}

type Job = Box<dyn FnOnce(&mut Live) + Send>;

/// Handle to the single-writer command queue.
#[derive(Clone)]
pub struct Service {
    queue: mpsc::Sender<Job>,
}

impl Service {
    /// Moves `sim` onto a dedicated writer thread. The thread exits once every
    /// handle has been dropped.
    pub fn start(sim: Simulation) -> Self {
        let (queue, mut jobs) = mpsc::channel::<Job>(QUEUE_DEPTH);
        let mut live = Live {
            sim,
            sessions: HashMap::new(),
            next_eoa: 0,
        };
        std::thread::Builder::new()
            .name("evochain-writer".into())
            .spawn(move || {
                while let Some(job) = jobs.blocking_recv() {
                    job(&mut live);
                }
            })
            .expect("spawn writer thread");
        Self { queue }
    }

    async fn exec<R, F>(&self, f: F) -> Result<R, ApiError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Live) -> R + Send + 'static,
    {
        let (reply, answer) = oneshot::channel();
        let job: Job = Box::new(move |live| {
            let _ = reply.send(f(live));
        });
        self.queue.send(job).await.map_err(|_| ApiError::unavailable())?;
        answer.await.map_err(|_| ApiError::unavailable())
    }

    /// Advances one tick, exactly as `POST /api/tick {"count":1}` would.
    pub async fn tick(&self) -> Result<u64, ApiError> {
        self.exec(|live| {
            live.advance();
            live.sim.tick()
        })
        .await
    }

    /// Ticks every `interval` until the service is dropped.
    pub fn spawn_timer(&self, interval: Duration) -> tokio::task::JoinHandle<()> {
        let service = self.clone();
        tokio::spawn(async move {
            let mut timer = tokio::time::interval(interval);
            timer.tick().await;
            loop {
                timer.tick().await;
                if service.tick().await.is_err() {
                    break;
                }
            }
        })
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: String,
    message: Option<String>,
    receipt: Option<Receipt>,
}

impl ApiError {
    fn new(status: StatusCode, code: impl Into<String>) -> Self {
        Self {
            status,
            code: code.into(),
            message: None,
            receipt: None,
        }
    }

    fn bad_request(code: &str, message: impl ToString) -> Self {
        Self {
            message: Some(message.to_string()),
            ..Self::new(StatusCode::BAD_REQUEST, code)
        }
    }

    fn unavailable() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "Unavailable")
    }

    pub fn status(&self) -> StatusCode {
        self.status
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.code });
        if let Some(m) = self.message {
            body["message"] = Value::String(m);
        }
        if let Some(r) = self.receipt {
            body["receipt"] = serde_json::to_value(r).expect("receipt serializes");
        }
        (self.status, Json(body)).into_response()
    }
}

fn status_for(code: ErrorCode) -> StatusCode {
    match code {
        ErrorCode::InsufficientFunds => StatusCode::PAYMENT_REQUIRED,
        ErrorCode::UnknownAgent | ErrorCode::UnknownAccount | ErrorCode::UnknownToken => {
            StatusCode::NOT_FOUND
        }
        _ => StatusCode::CONFLICT,
    }
}

fn receipt_response(outcome: Result<Receipt, TxError>) -> Result<Json<Receipt>, ApiError> {
    match outcome {
        Ok(receipt) => match receipt.status {
            Status::Ok => Ok(Json(receipt)),
            Status::Err(code) => Err(ApiError {
                receipt: Some(receipt),
                ..ApiError::new(status_for(code), code.to_string())
            }),
        },
        Err(TxError::InsufficientGasFunds { .. }) => Err(ApiError::new(
            StatusCode::PAYMENT_REQUIRED,
            ErrorCode::InsufficientFunds.to_string(),
        )),
        Err(e) => Err(ApiError {
            message: Some(e.to_string()),
            ..ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Rejected")
        }),
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let bytes: &[u8] = if body.iter().all(u8::is_ascii_whitespace) { b"{}" } else { body };
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("MalformedBody", e))
}

fn parse_address(text: &str) -> Result<Address, ApiError> {
    text.parse()
        .map_err(|e| ApiError::bad_request("MalformedAddress", e))
}

fn now_secs() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Serialize)]
struct AgentSummary {
    address: Address,
    generation: u32,
    balance: Wei,
    price: Wei,
    born_at: u64,
    children_count: usize,
    nfts_sold: u64,
    /// Balance has reached the replication threshold.
    ripe: bool,
}

fn summary(live: &Live, address: &Address) -> AgentSummary {
    let world = live.sim.world();
    let agent = &world.agents[address];
    let balance = world.balance(address);
    AgentSummary {
        address: *address,
        generation: agent.generation,
        balance,
        price: agent_price(agent, &world.economics),
        born_at: agent.born_at,
        children_count: agent.children.len(),
        nfts_sold: agent.nfts_sold,
        ripe: balance >= world.economics.replication_threshold(),
    }
}

async fn list_agents(State(svc): State<Arc<Service>>) -> Result<Json<Vec<AgentSummary>>, ApiError> {
    let list = svc
        .exec(|live| {
            live.sim
                .world()
                .birth_order
                .iter()
                .map(|a| summary(live, a))
                .collect()
        })
        .await?;
    Ok(Json(list))
}

fn unknown_agent() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, ErrorCode::UnknownAgent.to_string())
}

async fn agent_detail(
    State(svc): State<Arc<Service>>,
    Path(addr): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let address = parse_address(&addr)?;
    let detail = svc
        .exec(move |live| {
            let world = live.sim.world();
            let agent = world.agent(&address).ok_or_else(unknown_agent)?;
            let mut out = serde_json::to_value(summary(live, &address)).expect("summary serializes");
            let genome: Value =
                serde_json::from_str(&agent.genome.to_json()).expect("genome json is valid");
            let tokens: Vec<u64> = tokens_minted_by(world, &address).map(|t| t.token_id).collect();
            out["parent"] = json!(agent.parent);
            out["children"] = json!(agent.children);
            out["income"] = json!(agent.income);
            out["logic_ref"] = json!(agent.logic_ref);
            out["genome"] = genome;
            out["tokens"] = json!(tokens);
            Ok::<_, ApiError>(out)
        })
        .await??;
    Ok(Json(detail))
}

async fn phenotype(
    State(svc): State<Arc<Service>>,
    Path(addr): Path<String>,
) -> Result<Response, ApiError> {
    let address = parse_address(&addr)?;
    let genome = svc
        .exec(move |live| live.sim.world().agent(&address).map(|a| a.genome))
        .await?
        .ok_or_else(unknown_agent)?;
    let svg = phenotype_svg(&genome).into_string();
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionRequest {
    /// Defaults to the configured cap; larger requests are reduced to it.
    faucet_amount: Option<Wei>,
}

#[derive(Debug, Serialize)]
struct SessionView {
    #[serde(flatten)]
    session: ApiSession,
    balance: Wei,
}

async fn create_session(
    State(svc): State<Arc<Service>>,
    body: Bytes,
) -> Result<Json<SessionView>, ApiError> {
    let req: SessionRequest = parse_body(&body)?;
    let view = svc
        .exec(move |live| {
            let cap = live.sim.config().interactive.faucet_cap;
            let amount = req.faucet_amount.unwrap_or(cap).min(cap);
            let address = loop {
                let a = Address::derive(SESSION_TAG, live.next_eoa);
                live.next_eoa += 1;
                if live.sim.world().account(&a).is_none() {
                    break a;
                }
            };
            live.sim.faucet(address, amount).map_err(|e| ApiError {
                message: Some(e.to_string()),
                ..ApiError::new(StatusCode::CONFLICT, "FaucetRejected")
            })?;
            let session = ApiSession {
                session_id: uuid::Uuid::new_v4().simple().to_string(),
                bound_eoa: address,
                created_at: now_secs(),
            };
            live.sessions.insert(session.session_id.clone(), session.clone());
            Ok::<_, ApiError>(SessionView { session, balance: amount })
        })
        .await??;
    Ok(Json(view))
}

async fn session_detail(
    State(svc): State<Arc<Service>>,
    Path(id): Path<String>,
) -> Result<Json<SessionView>, ApiError> {
    let view = svc
        .exec(move |live| {
            let session = live.session(&id)?.clone();
            let balance = live.sim.world().balance(&session.bound_eoa);
            Ok::<_, ApiError>(SessionView { session, balance })
        })
        .await??;
    Ok(Json(view))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BuyRequest {
    session_id: String,
    value: Wei,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PokeRequest {
    session_id: String,
}

async fn submit(
    svc: &Service,
    session_id: String,
    target: Address,
    call: Call,
    value: Wei,
) -> Result<Json<Receipt>, ApiError> {
    svc.exec(move |live| {
        let origin = live.session(&session_id)?.bound_eoa;
        if live.sim.world().agent(&target).is_none() {
            return Err(unknown_agent());
        }
        let tx = Transaction {
            origin,
            target,
            value,
            call,
            tick: live.sim.tick(),
        };
        receipt_response(live.sim.submit(tx))
    })
    .await?
}

async fn buy(
    State(svc): State<Arc<Service>>,
    Path(addr): Path<String>,
    body: Bytes,
) -> Result<Json<Receipt>, ApiError> {
    let target = parse_address(&addr)?;
    let req: BuyRequest = parse_body(&body)?;
    submit(&svc, req.session_id, target, Call::BuyNft, req.value).await
}

async fn poke(
    State(svc): State<Arc<Service>>,
    Path(addr): Path<String>,
    body: Bytes,
) -> Result<Json<Receipt>, ApiError> {
    let target = parse_address(&addr)?;
    let req: PokeRequest = parse_body(&body)?;
    submit(&svc, req.session_id, target, Call::Poke, Wei::ZERO).await
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TickRequest {
    #[serde(default = "one")]
    count: u64,
}

fn one() -> u64 {
    1
}

async fn tick(State(svc): State<Arc<Service>>, body: Bytes) -> Result<Json<Value>, ApiError> {
    let req: TickRequest = parse_body(&body)?;
    if req.count == 0 || req.count > MAX_TICKS_PER_REQUEST {
        return Err(ApiError::bad_request(
            "MalformedBody",
            format!("count must be between 1 and {MAX_TICKS_PER_REQUEST}"),
        ));
    }
    let (tick, population) = svc
        .exec(move |live| {
            for _ in 0..req.count {
                live.advance();
            }
            (live.sim.tick(), live.sim.world().agents.len())
        })
        .await?;
    Ok(Json(json!({ "tick": tick, "population": population })))
}

async fn tree_dot(State(svc): State<Arc<Service>>) -> Result<Response, ApiError> {
    let dot = svc.exec(|live| export_tree_dot(&live.sim.tree())).await?;
    Ok(([(header::CONTENT_TYPE, "text/vnd.graphviz; charset=utf-8")], dot).into_response())
}

#[derive(Debug, Deserialize)]
struct StatsQuery {
    format: Option<String>,
}

async fn stats(
    State(svc): State<Arc<Service>>,
    Query(q): Query<StatsQuery>,
) -> Result<Response, ApiError> {
    match q.format.as_deref() {
        None | Some("json") => {
            let series = svc.exec(|live| live.sim.stats().clone()).await?;
            Ok(Json(series).into_response())
        }
        Some("csv") => {
            let csv = svc.exec(|live| live.sim.stats().to_csv()).await?;
            Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
        }
        Some(other) => Err(ApiError::bad_request(
            "MalformedQuery",
            format!("unknown stats format `{other}`"),
        )),
    }
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    #[serde(default)]
    since: u64,
    limit: Option<usize>,
}

async fn events(
    State(svc): State<Arc<Service>>,
    Query(q): Query<EventsQuery>,
) -> Result<Json<Value>, ApiError> {
    let limit = q.limit.unwrap_or(DEFAULT_EVENTS_PER_PAGE).min(MAX_EVENTS_PER_PAGE);
    let page = svc
        .exec(move |live| {
            let world = live.sim.world();
            let records = world.events_since(q.since, limit);
            let next = records.last().map_or(q.since, |r| r.seq + 1);
            json!({
                "events": records,
                "next": next,
                "total": world.log.len(),
                "tick": world.tick,
            })
        })
        .await?;
    Ok(Json(page))
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/api/agents", get(list_agents))
        .route("/api/agents/{addr}", get(agent_detail))
        .route("/api/agents/{addr}/phenotype.svg", get(phenotype))
        .route("/api/agents/{addr}/buy", post(buy))
        .route("/api/agents/{addr}/poke", post(poke))
        .route("/api/session", post(create_session))
        .route("/api/session/{id}", get(session_detail))
        .route("/api/tick", post(tick))
        .route("/api/tree.dot", get(tree_dot))
        .route("/api/stats", get(stats))
        .route("/api/events", get(events))
        .with_state(Arc::new(service))
}
