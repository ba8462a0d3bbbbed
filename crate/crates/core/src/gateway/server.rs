//! HTTP endpoints over a [`Store`], every response a JSON grid.

use std::io::Read;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::Value;
use tiny_http::{Header, Method, Request, Response, Server};

use super::grid::GridDocument;
use super::store::{HisRows, PointKind, Store};
use crate::error::{Error, Result};
use crate::registry::Registry;
use crate::time::{format_ts, parse_ts};
use crate::timeseries::PointId;

pub const PRODUCT_NAME: &str = "loadcast";
const MAX_BODY: u64 = 8 << 20;
const WORKERS: usize = 4;

struct Ctx {
    store: Arc<Store>,
    registry: Option<Registry>,
    boot: i64,
}

/// A running server. Dropping the handle without calling
/// [`shutdown`](ServerHandle::shutdown) leaves it running.
pub struct ServerHandle {
    addr: SocketAddr,
    server: Arc<Server>,
    stop: Arc<AtomicBool>,
    workers: Vec<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(self) {
        self.stop.store(true, Ordering::SeqCst);
        for _ in &self.workers {
            self.server.unblock();
        }
        for w in self.workers {
            let _ = w.join();
        }
    }

    /// Blocks until the server stops.
    pub fn join(self) {
        for w in self.workers {
            let _ = w.join();
        }
    }
}

/// Binds `bind` (use port 0 for an ephemeral port) and starts serving.
pub fn serve(bind: &str, store: Arc<Store>, registry: Option<Registry>) -> Result<ServerHandle> {
    let server = Server::http(bind).map_err(|e| Error::Network(format!("cannot bind {bind}: {e}")))?;
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| Error::Network(format!("{bind} is not an IP address")))?;
    let server = Arc::new(server);
    let stop = Arc::new(AtomicBool::new(false));
    let ctx = Arc::new(Ctx { store, registry, boot: chrono::Utc::now().timestamp() });
    let workers = (0..WORKERS)
        .map(|_| {
            let (server, stop, ctx) = (server.clone(), stop.clone(), ctx.clone());
            std::thread::spawn(move || loop {
                match server.recv() {
                    Ok(req) => handle(&ctx, req),
                    Err(_) if stop.load(Ordering::SeqCst) => break,
                    Err(e) => log::warn!("accept failed: {e}"),
                }
                if stop.load(Ordering::SeqCst) {
                    break;
                }
            })
        })
        .collect();
    log::info!("gateway listening on http://{addr}");
    Ok(ServerHandle { addr, server, stop, workers })
}

fn handle(ctx: &Ctx, mut req: Request) {
    let (status, grid) = route(ctx, &mut req);
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    let resp = Response::from_string(grid.to_json()).with_status_code(status).with_header(header);
    if let Err(e) = req.respond(resp) {
        log::debug!("client went away: {e}");
    }
}

fn op_name(path: &str) -> &str {
    path.strip_prefix("/api/").unwrap_or(path)
}

fn status_of(e: &Error) -> (u16, &'static str) {
    match e.root() {
        Error::Invalid(_) | Error::Protocol(_) => (400, "bad_request"),
        Error::NotFound(_) => (404, "not_found"),
        _ => (503, "unavailable"),
    }
}

fn route(ctx: &Ctx, req: &mut Request) -> (u16, GridDocument) {
    let url = req.url().to_string();
    let (path, query) = url.split_once('?').unwrap_or((&url, ""));
    let params: Vec<(String, String)> = form_urlencoded::parse(query.as_bytes()).into_owned().collect();
    let param = |k: &str| params.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
    let op = op_name(path);
    let method = req.method().clone();

    let result = match (op, &method) {
        ("about", Method::Get) => about(ctx),
        ("read", Method::Get) => read(ctx, param("filter"), param("id")),
        ("hisRead", Method::Get) => his_read(ctx, param("id"), param("range")),
        ("forecast", Method::Get) => forecast(ctx, param("id")),
        ("hisWrite", Method::Post) => read_body(req).and_then(|b| his_write(ctx, &b)),
        ("about" | "read" | "hisRead" | "forecast" | "hisWrite", _) => {
            return (405, GridDocument::error(op, "method_not_allowed", format!("{method} not allowed on {path}")))
        }
        _ => return (404, GridDocument::error(op, "not_found", format!("no endpoint {path}"))),
    };
    match result {
        Ok(g) => (200, g),
        Err(e) => {
            let (status, kind) = status_of(&e);
            if status == 503 {
                log::error!("{path}: {e}");
            }
            (status, GridDocument::error(op, kind, e.to_string()))
        }
    }
}

fn read_body(req: &mut Request) -> Result<String> {
    let mut body = String::new();
    req.as_reader()
        .take(MAX_BODY + 1)
        .read_to_string(&mut body)
        .map_err(|e| Error::invalid(format!("unreadable body: {e}")))?;
    if body.len() as u64 > MAX_BODY {
        return Err(Error::invalid("request body too large"));
    }
    Ok(body)
}

fn required<'a>(v: Option<&'a str>, name: &str) -> Result<&'a str> {
    v.filter(|s| !s.is_empty())
        .ok_or_else(|| Error::invalid(format!("missing `{name}` parameter")))
}

fn point_param(v: Option<&str>) -> Result<PointId> {
    PointId::new(required(v, "id")?)
}

fn about(ctx: &Ctx) -> Result<GridDocument> {
    ctx.store.points()?;
    let mut g = GridDocument::new("about", &["productName", "productVersion", "serverTime", "serverBootTime", "tz"]);
    g.push(vec![
        PRODUCT_NAME.into(),
        env!("CARGO_PKG_VERSION").into(),
        format_ts(chrono::Utc::now().timestamp()).into(),
        format_ts(ctx.boot).into(),
        "UTC".into(),
    ]);
    Ok(g)
}

fn read(ctx: &Ctx, filter: Option<&str>, id: Option<&str>) -> Result<GridDocument> {
    let points = match (filter, id) {
        (_, Some(id)) => vec![ctx.store.point(&PointId::new(id)?)?],
        (Some("point"), None) => ctx.store.points()?,
        (Some(f), None) => return Err(Error::invalid(format!("unsupported filter `{f}`; only `point` is supported"))),
        (None, None) => return Err(Error::invalid("read needs `filter` or `id`")),
    };
    let mut g = GridDocument::new("read", &["id", "kind", "unit", "resolution", "tz", "modelVersion"]);
    for p in points {
        let version = match (&ctx.registry, p.kind) {
            (Some(reg), PointKind::His) => reg.versions(&p.id)?.last().map(|v| Value::from(*v)),
            _ => None,
        };
        g.push(vec![
            p.id.as_str().into(),
            serde_json::to_value(p.kind)?,
            p.unit.into(),
            p.resolution_s.into(),
            "UTC".into(),
            version.unwrap_or(Value::Null),
        ]);
    }
    Ok(g)
}

/// `start,end` as ISO-8601 (or epoch seconds), closed-open.
pub fn parse_range(range: &str) -> Result<(i64, i64)> {
    let (a, b) = range
        .split_once(',')
        .ok_or_else(|| Error::invalid(format!("range `{range}` is not `start,end`")))?;
    let (start, end) = (parse_ts(a.trim())?, parse_ts(b.trim())?);
    if start > end {
        return Err(Error::invalid(format!("range `{range}` ends before it starts")));
    }
    Ok((start, end))
}

fn his_read(ctx: &Ctx, id: Option<&str>, range: Option<&str>) -> Result<GridDocument> {
    let id = point_param(id)?;
    let (start, end) = parse_range(required(range, "range")?)?;
    let (info, rows) = ctx.store.his_read(&id, start, end)?;
    let meta = |g: GridDocument| {
        g.with_meta("id", id.as_str())
            .with_meta("unit", info.unit.as_str())
            .with_meta("resolution", info.resolution_s)
            .with_meta("hisStart", format_ts(start))
            .with_meta("hisEnd", format_ts(end))
    };
    Ok(match rows {
        HisRows::History(items) => {
            let mut g = meta(GridDocument::new("hisRead", &["ts", "val"]));
            for (ts, v) in items {
                g.push(vec![format_ts(ts).into(), v.into()]);
            }
            g
        }
        HisRows::Forecast(items) => {
            let mut g = meta(GridDocument::new("hisRead", &["ts", "val", "issuedAt", "modelVersion"]));
            for (ts, e) in items {
                g.push(vec![
                    format_ts(ts).into(),
                    e.value.into(),
                    format_ts(e.issued_at).into(),
                    e.model_version.into(),
                ]);
            }
            g
        }
    })
}

fn forecast(ctx: &Ctx, id: Option<&str>) -> Result<GridDocument> {
    let id = point_param(id)?;
    let (issued, items) = ctx.store.latest_forecast(&id)?;
    let mut g = GridDocument::new("forecast", &["ts", "val", "issuedAt", "modelVersion"]).with_meta("id", id.as_str());
    if let Some(at) = issued {
        g = g.with_meta("issuedAt", format_ts(at));
    }
    for (ts, e) in items {
        g.push(vec![format_ts(ts).into(), e.value.into(), format_ts(e.issued_at).into(), e.model_version.into()]);
    }
    Ok(g)
}

/// Parses a hisWrite request grid into `(id, items, issued_at, version)`.
pub fn parse_his_write(body: &str) -> Result<(PointId, Vec<(i64, f64)>, i64, u64)> {
    let g = GridDocument::parse(body).map_err(|e| Error::invalid(e.to_string()))?;
    let id = PointId::new(g.meta_str("id").ok_or_else(|| Error::invalid("meta.id is missing"))?)?;
    let issued_at = parse_ts(g.meta_str("issuedAt").ok_or_else(|| Error::invalid("meta.issuedAt is missing"))?)?;
    let version = g
        .meta
        .get("modelVersion")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::invalid("meta.modelVersion must be a non-negative integer"))?;
    let mut items = Vec::with_capacity(g.rows.len());
    for (i, row) in g.rows.iter().enumerate() {
        let ts = row
            .get("ts")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::invalid(format!("row {i}: `ts` must be an ISO timestamp")))?;
        let val = row
            .get("val")
            .and_then(Value::as_f64)
            .ok_or_else(|| Error::invalid(format!("row {i}: `val` must be a finite number")))?;
        items.push((parse_ts(ts)?, val));
    }
    Ok((id, items, issued_at, version))
}

fn his_write(ctx: &Ctx, body: &str) -> Result<GridDocument> {
    let (id, items, issued_at, version) = parse_his_write(body)?;
    let out = ctx.store.his_write(&id, &items, issued_at, version)?;
    let mut g = GridDocument::new("hisWrite", &["accepted", "stale"]).with_meta("id", id.as_str());
    g.push(vec![out.accepted.into(), out.stale.into()]);
    Ok(g)
}
