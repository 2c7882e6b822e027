//! Locally served fixture shop: categories, faceted listings, a cookie
//! cart, checkout and a few pages exercising browser edge cases.

pub mod catalog;
mod pages;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Form, Path, Query, State};
use axum::http::header::{COOKIE, LOCATION, SET_COOKIE};
use axum::http::{HeaderMap, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use parking_lot::Mutex;
use serde::Deserialize;

use catalog::Product;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Order {
    pub id: u64,
    pub session: String,
    pub items: Vec<(u32, u32)>,
    pub name: String,
}

#[derive(Default)]
pub struct ShopState {
    products: Vec<Product>,
    carts: Mutex<HashMap<String, Vec<(u32, u32)>>>,
    orders: Mutex<Vec<Order>>,
    next_session: AtomicU64,
    requests: AtomicU64,
}

impl ShopState {
    pub fn new() -> Self {
        Self { products: catalog::catalog(), ..Default::default() }
    }

    pub fn product(&self, id: u32) -> Option<&Product> {
        self.products.iter().find(|p| p.id == id)
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn cart(&self, session: &str) -> Vec<(u32, u32)> {
        self.carts.lock().get(session).cloned().unwrap_or_default()
    }

    pub fn orders(&self) -> Vec<Order> {
        self.orders.lock().clone()
    }

    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn cart_count(&self, session: Option<&str>) -> u32 {
        session.map(|s| self.cart(s).iter().map(|(_, q)| q).sum()).unwrap_or(0)
    }
}

pub type Shared = Arc<ShopState>;

const SESSION_COOKIE: &str = "shop_session";

fn session_of(headers: &HeaderMap) -> Option<String> {
    headers.get_all(COOKIE).iter().filter_map(|v| v.to_str().ok()).flat_map(|v| v.split(';')).find_map(|kv| {
        let (k, v) = kv.trim().split_once('=')?;
        (k == SESSION_COOKIE).then(|| v.to_string())
    })
}

pub struct Ctx {
    pub cart_count: u32,
}

fn ctx(state: &ShopState, headers: &HeaderMap) -> Ctx {
    state.requests.fetch_add(1, Ordering::Relaxed);
    Ctx { cart_count: state.cart_count(session_of(headers).as_deref()) }
}

pub fn router() -> Router {
    router_with(Arc::new(ShopState::new()))
}

pub fn router_with(state: Shared) -> Router {
    Router::new()
        .route("/", get(home))
        .route("/category/{slug}", get(category))
        .route("/category/{slug}/{sub}", get(listing))
        .route("/product/{id}", get(product))
        .route("/search", get(search))
        .route("/cart", get(cart))
        .route("/cart/add", post(cart_add))
        .route("/cart/remove", post(cart_remove))
        .route("/checkout", get(checkout).post(place_order))
        .route("/order/{id}", get(order))
        .route("/help", get(help))
        .route("/tall", get(tall))
        .route("/hover", get(hover))
        .route("/slow", get(slow))
        .with_state(state)
}

/// A running shop bound to an ephemeral local port.
pub struct RunningShop {
    pub addr: SocketAddr,
    pub state: Shared,
    handle: tokio::task::JoinHandle<()>,
}

impl RunningShop {
    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }
}

impl Drop for RunningShop {
    fn drop(&mut self) {
        self.handle.abort();
    }
}

pub async fn spawn() -> std::io::Result<RunningShop> {
    spawn_on("127.0.0.1:0".parse().unwrap()).await
}

pub async fn spawn_on(addr: SocketAddr) -> std::io::Result<RunningShop> {
    let state = Arc::new(ShopState::new());
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let app = router_with(state.clone());
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "fixture shop stopped");
        }
    });
    Ok(RunningShop { addr, state, handle })
}

async fn home(State(s): State<Shared>, headers: HeaderMap) -> Html<String> {
    let c = ctx(&s, &headers);
    Html(pages::home(&c, &s.products))
}

async fn category(State(s): State<Shared>, headers: HeaderMap, Path(slug): Path<String>) -> Response {
    let c = ctx(&s, &headers);
    match catalog::category(&slug) {
        Some(cat) => Html(pages::category(&c, cat, &s.products)).into_response(),
        None => not_found(&c),
    }
}

#[derive(Debug, Deserialize, Default)]
pub struct ListingQuery {
    pub price: Option<String>,
    pub sort: Option<String>,
    pub page: Option<usize>,
}

async fn listing(
    State(s): State<Shared>,
    headers: HeaderMap,
    Path((slug, sub)): Path<(String, String)>,
    Query(q): Query<ListingQuery>,
) -> Response {
    let c = ctx(&s, &headers);
    let Some(cat) = catalog::category(&slug) else { return not_found(&c) };
    let Some(&(_, sub_name)) = cat.subcategories.iter().find(|(k, _)| *k == sub) else { return not_found(&c) };
    Html(pages::listing(&c, cat, &sub, sub_name, &s.products, &q)).into_response()
}

async fn product(State(s): State<Shared>, headers: HeaderMap, Path(id): Path<u32>) -> Response {
    let c = ctx(&s, &headers);
    match s.product(id) {
        Some(p) => Html(pages::product(&c, p)).into_response(),
        None => not_found(&c),
    }
}

#[derive(Debug, Deserialize)]
struct SearchQuery {
    #[serde(default)]
    q: String,
}

async fn search(State(s): State<Shared>, headers: HeaderMap, Query(q): Query<SearchQuery>) -> Html<String> {
    let c = ctx(&s, &headers);
    Html(pages::search(&c, &q.q, &s.products))
}

async fn cart(State(s): State<Shared>, headers: HeaderMap) -> Html<String> {
    let c = ctx(&s, &headers);
    let items = session_of(&headers).map(|sid| s.cart(&sid)).unwrap_or_default();
    let lines: Vec<(&Product, u32)> = items.iter().filter_map(|&(id, q)| s.product(id).map(|p| (p, q))).collect();
    Html(pages::cart(&c, &lines))
}

#[derive(Debug, Deserialize)]
struct AddForm {
    product_id: u32,
    #[serde(default)]
    qty: Option<u32>,
    #[serde(default)]
    return_to: Option<String>,
}

fn redirect(to: &str, cookie: Option<String>) -> Response {
    let mut resp = (StatusCode::SEE_OTHER, [(LOCATION, HeaderValue::from_str(to).unwrap_or(HeaderValue::from_static("/")))]).into_response();
    if let Some(c) = cookie {
        resp.headers_mut().insert(SET_COOKIE, HeaderValue::from_str(&c).unwrap());
    }
    resp
}

fn safe_return(to: Option<&str>, fallback: &str) -> String {
    match to {
        Some(t) if t.starts_with('/') && !t.starts_with("//") => t.to_string(),
        _ => fallback.to_string(),
    }
}

async fn cart_add(State(s): State<Shared>, headers: HeaderMap, Form(f): Form<AddForm>) -> Response {
    s.requests.fetch_add(1, Ordering::Relaxed);
    if s.product(f.product_id).is_none() {
        return (StatusCode::UNPROCESSABLE_ENTITY, "unknown product").into_response();
    }
    let (sid, cookie) = match session_of(&headers) {
        Some(sid) => (sid, None),
        None => {
            let sid = format!("s{}", s.next_session.fetch_add(1, Ordering::Relaxed) + 1);
            let cookie = format!("{SESSION_COOKIE}={sid}; Path=/; HttpOnly");
            (sid, Some(cookie))
        }
    };
    let qty = f.qty.unwrap_or(1).max(1);
    {
        let mut carts = s.carts.lock();
        let cart = carts.entry(sid).or_default();
        match cart.iter_mut().find(|(id, _)| *id == f.product_id) {
            Some(line) => line.1 += qty,
            None => cart.push((f.product_id, qty)),
        }
    }
    redirect(&safe_return(f.return_to.as_deref(), "/cart"), cookie)
}

#[derive(Debug, Deserialize)]
struct RemoveForm {
    product_id: u32,
}

async fn cart_remove(State(s): State<Shared>, headers: HeaderMap, Form(f): Form<RemoveForm>) -> Response {
    if let Some(sid) = session_of(&headers) {
        if let Some(cart) = s.carts.lock().get_mut(&sid) {
            cart.retain(|(id, _)| *id != f.product_id);
        }
    }
    redirect("/cart", None)
}

async fn checkout(State(s): State<Shared>, headers: HeaderMap) -> Html<String> {
    let c = ctx(&s, &headers);
    Html(pages::checkout(&c, None))
}

#[derive(Debug, Deserialize)]
struct OrderForm {
    #[serde(default)]
    full_name: String,
    #[serde(default)]
    address: String,
    #[serde(default)]
    shipping: String,
}

async fn place_order(State(s): State<Shared>, headers: HeaderMap, Form(f): Form<OrderForm>) -> Response {
    let c = ctx(&s, &headers);
    let Some(sid) = session_of(&headers) else {
        return Html(pages::checkout(&c, Some("Your cart is empty."))).into_response();
    };
    if f.full_name.trim().is_empty() || f.address.trim().is_empty() {
        return Html(pages::checkout(&c, Some("Please fill in your name and address."))).into_response();
    }
    let items = s.carts.lock().remove(&sid).unwrap_or_default();
    if items.is_empty() {
        return Html(pages::checkout(&c, Some("Your cart is empty."))).into_response();
    }
    let id = {
        let mut orders = s.orders.lock();
        let id = orders.len() as u64 + 1000;
        tracing::debug!(shipping = %f.shipping, "order placed");
        orders.push(Order { id, session: sid, items, name: f.full_name });
        id
    };
    redirect(&format!("/order/{id}"), None)
}

async fn order(State(s): State<Shared>, headers: HeaderMap, Path(id): Path<u64>) -> Response {
    let c = ctx(&s, &headers);
    let found = s.orders.lock().iter().find(|o| o.id == id).cloned();
    match found {
        Some(o) => Html(pages::order(&c, &o)).into_response(),
        None => not_found(&c),
    }
}

async fn help(State(s): State<Shared>, headers: HeaderMap) -> Html<String> {
    let c = ctx(&s, &headers);
    Html(pages::help(&c))
}

#[derive(Debug, Deserialize)]
struct TallQuery {
    clicked: Option<u8>,
}

async fn tall(State(s): State<Shared>, headers: HeaderMap, Query(q): Query<TallQuery>) -> Html<String> {
    let c = ctx(&s, &headers);
    Html(pages::tall(&c, q.clicked.is_some()))
}

async fn hover(State(s): State<Shared>, headers: HeaderMap) -> Html<String> {
    let c = ctx(&s, &headers);
    Html(pages::hover(&c))
}

#[derive(Debug, Deserialize)]
struct SlowQuery {
    #[serde(default)]
    ms: u64,
}

async fn slow(State(s): State<Shared>, headers: HeaderMap, Query(q): Query<SlowQuery>) -> Html<String> {
    let c = ctx(&s, &headers);
    tokio::time::sleep(Duration::from_millis(q.ms.min(60_000))).await;
    Html(pages::slow(&c, q.ms))
}

fn not_found(c: &Ctx) -> Response {
    (StatusCode::NOT_FOUND, Html(pages::not_found(c))).into_response()
}
