use std::fmt::Write;

use crate::catalog::{Category, Product, CATEGORIES};
use crate::{Ctx, ListingQuery, Order};

const CSS: &str = r#"
body { margin: 0 }
.skip-link { position: absolute; left: -10000px; top: 0 }
.promo-banner { display: none }
.sidebar { width: 240px }
.product-items { list-style: none }
.submenu { display: none }
.menu:hover .submenu { display: block }
.spacer { height: 2400px }
"#;

pub fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn layout(c: &Ctx, title: &str, main: &str) -> String {
    let mut nav = String::new();
    for cat in CATEGORIES {
        let _ = write!(nav, r#"<li class="nav-item"><a href="/category/{}">{}</a></li>"#, cat.slug, esc(cat.name));
    }
    let n = c.cart_count;
    format!(
        r##"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>{title}</title>
<style>{CSS}</style>
</head>
<body>
<div class="page-wrapper">
<div class="header-wrap"><header class="page-header">
<div class="logo-wrap"><a class="logo" href="/">One Stop Market</a></div>
<div class="promo-banner">Flash sale today only: half price on everything</div>
<a class="skip-link" href="#maincontent">Skip to Content</a>
<form class="search-form" action="/search" method="get">
<input type="search" id="search" name="q" placeholder="Search entire store here...">
<button type="submit" title="Search">Search</button>
</form>
<div class="minicart-wrapper"><a class="showcart" href="/cart">My Cart <span class="counter">({n})</span> <span class="counter-label">{n} items</span></a></div>
<a class="help-link" href="/help" target="_blank">Help &amp; Support</a>
</header></div>
<nav class="top-nav"><ul>{nav}</ul></nav>
<main id="maincontent">
{main}
</main>
<footer class="page-footer"><p>Prices include tax. Free returns within 30 days.</p></footer>
</div>
</body>
</html>
"##,
        title = esc(title),
    )
}

fn card(p: &Product, return_to: &str) -> String {
    format!(
        r#"<li class="product-item"><div class="product-item-info"><div class="product-item-details">
<a class="product-item-link" href="/product/{id}">{name}</a>
<div class="rating-summary"><span class="rating">Rating: {rating} out of 5</span> <span class="reviews">({reviews} reviews)</span></div>
<div class="price-box"><span class="price">{price}</span></div>
<div class="actions"><form method="post" action="/cart/add"><input type="hidden" name="product_id" value="{id}"><input type="hidden" name="return_to" value="{ret}"><button type="submit" class="tocart">Add to Cart</button></form></div>
</div></div></li>"#,
        id = p.id,
        name = esc(&p.name),
        rating = p.rating_text(),
        reviews = p.reviews,
        price = p.price(),
        ret = esc(return_to),
    )
}

fn grid(products: &[&Product], return_to: &str) -> String {
    let cards: String = products.iter().map(|p| card(p, return_to)).collect();
    format!(r#"<ol class="product-items">{cards}</ol>"#)
}

pub fn home(c: &Ctx, products: &[Product]) -> String {
    let featured: Vec<&Product> =
        CATEGORIES.iter().filter_map(|cat| products.iter().find(|p| p.category == cat.slug)).collect();
    let main = format!(
        r#"<h1>Welcome to One Stop Market</h1>
<p>Everyday essentials delivered to your door.</p>
<h2>Featured Products</h2>
{}"#,
        grid(&featured, "/")
    );
    layout(c, "One Stop Market", &main)
}

pub fn category(c: &Ctx, cat: &Category, products: &[Product]) -> String {
    let mut side = String::new();
    for (slug, name) in cat.subcategories {
        let n = products.iter().filter(|p| p.category == cat.slug && p.subcategory == *slug).count();
        let _ = write!(
            side,
            r#"<li><a href="/category/{}/{slug}">{} <span class="count">({n})</span></a></li>"#,
            cat.slug,
            esc(name)
        );
    }
    let mut top: Vec<&Product> = products.iter().filter(|p| p.category == cat.slug).collect();
    top.sort_by(|a, b| b.rating.cmp(&a.rating).then(a.id.cmp(&b.id)));
    top.truncate(4);
    let main = format!(
        r#"<div class="columns">
<div class="sidebar"><div class="block-title"><strong>Shop By Category</strong></div><ul class="categories">{side}</ul></div>
<div class="column-main"><h1>{name}</h1><h2>Top Rated</h2>{grid}</div>
</div>"#,
        name = esc(cat.name),
        grid = grid(&top, &format!("/category/{}", cat.slug)),
    );
    layout(c, cat.name, &main)
}

const PRICE_BUCKETS: &[(u32, u32)] = &[(0, 100), (100, 200), (200, 300)];
const PER_PAGE: usize = 12;

fn bucket_label(lo: u32, hi: u32) -> String {
    format!("${lo}.00-${}.99", hi - 1)
}

fn parse_price(q: Option<&str>) -> Option<(u32, u32)> {
    let (a, b) = q?.split_once('-')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

fn query_string(price: Option<&str>, sort: Option<&str>, page: Option<usize>) -> String {
    let mut parts = Vec::new();
    if let Some(p) = price {
        parts.push(format!("price={p}"));
    }
    if let Some(s) = sort {
        parts.push(format!("sort={s}"));
    }
    if let Some(n) = page {
        parts.push(format!("page={n}"));
    }
    if parts.is_empty() {
        String::new()
    } else {
        format!("?{}", parts.join("&"))
    }
}

pub fn listing(c: &Ctx, cat: &Category, sub: &str, sub_name: &str, products: &[Product], q: &ListingQuery) -> String {
    let base = format!("/category/{}/{sub}", cat.slug);
    let all: Vec<&Product> = products.iter().filter(|p| p.category == cat.slug && p.subcategory == sub).collect();
    let price = parse_price(q.price.as_deref());
    let mut items: Vec<&Product> = all
        .iter()
        .copied()
        .filter(|p| price.is_none_or(|(lo, hi)| p.price_cents >= lo * 100 && p.price_cents < hi * 100))
        .collect();
    let sort = q.sort.as_deref().unwrap_or("position");
    match sort {
        "name" => items.sort_by(|a, b| a.name.cmp(&b.name)),
        "price" => items.sort_by_key(|p| (p.price_cents, p.id)),
        "rating" => items.sort_by(|a, b| b.rating.cmp(&a.rating).then(a.id.cmp(&b.id))),
        _ => {}
    }
    let total = items.len();
    let pages = total.div_ceil(PER_PAGE).max(1);
    let page = q.page.unwrap_or(1).clamp(1, pages);
    let shown: Vec<&Product> = items.iter().skip((page - 1) * PER_PAGE).take(PER_PAGE).copied().collect();

    let mut options = String::new();
    match price {
        None => {
            options.push_str(r#"<div class="filter-options-title">Price</div><ol class="items">"#);
            for &(lo, hi) in PRICE_BUCKETS {
                let n = all.iter().filter(|p| p.price_cents >= lo * 100 && p.price_cents < hi * 100).count();
                if n == 0 {
                    continue;
                }
                let href = format!("{base}{}", query_string(Some(&format!("{lo}-{hi}")), q.sort.as_deref(), None));
                let _ = write!(
                    options,
                    r#"<li class="item"><a href="{}">{} <span class="count">({n} item)</span></a></li>"#,
                    esc(&href),
                    bucket_label(lo, hi)
                );
            }
            options.push_str("</ol>");
        }
        Some((lo, hi)) => {
            let _ = write!(
                options,
                r#"<div class="filter-current"><strong>Now Shopping by</strong><p>Price: {}</p><a href="{}">Clear All</a></div>"#,
                bucket_label(lo, hi),
                esc(&format!("{base}{}", query_string(None, q.sort.as_deref(), None)))
            );
        }
    }

    let mut sort_opts = String::new();
    for (value, label) in [("position", "Position"), ("name", "Product Name"), ("price", "Price"), ("rating", "Rating")] {
        let sel = if value == sort { " selected" } else { "" };
        let _ = write!(sort_opts, r#"<option value="{value}"{sel}>{label}</option>"#);
    }
    let hidden_price = q
        .price
        .as_deref()
        .map(|p| format!(r#"<input type="hidden" name="price" value="{}">"#, esc(p)))
        .unwrap_or_default();
    let first = if total == 0 { 0 } else { (page - 1) * PER_PAGE + 1 };
    let last = ((page - 1) * PER_PAGE + shown.len()).max(first);

    let mut pager = String::new();
    if pages > 1 {
        pager.push_str(r#"<div class="pages">"#);
        if page > 1 {
            let href = format!("{base}{}", query_string(q.price.as_deref(), q.sort.as_deref(), Some(page - 1)));
            let _ = write!(pager, r#"<a class="previous" href="{}">Previous</a> "#, esc(&href));
        }
        let _ = write!(pager, "<span>Page {page} of {pages}</span>");
        if page < pages {
            let href = format!("{base}{}", query_string(q.price.as_deref(), q.sort.as_deref(), Some(page + 1)));
            let _ = write!(pager, r#" <a class="next" href="{}">Next</a>"#, esc(&href));
        }
        pager.push_str("</div>");
    }

    let here = format!("{base}{}", query_string(q.price.as_deref(), q.sort.as_deref(), q.page));
    let main = format!(
        r#"<div class="columns">
<div class="sidebar"><div class="block-title"><strong>Shopping Options</strong></div>{options}</div>
<div class="column-main"><h1>{name}</h1>
<div class="toolbar"><p class="toolbar-amount">Items {first}-{last} of {total}</p>
<form class="sorter" method="get" action="{base}">{hidden_price}<select name="sort" aria-label="Sort By" onchange="this.form.submit()">{sort_opts}</select></form></div>
{grid}
{pager}
</div>
</div>"#,
        name = esc(sub_name),
        grid = grid(&shown, &here),
    );
    layout(c, sub_name, &main)
}

pub fn product(c: &Ctx, p: &Product) -> String {
    let main = format!(
        r#"<div class="product-info-main">
<h1 class="page-title">{name}</h1>
<div class="rating-summary"><span class="rating">Rating: {rating} out of 5</span> <span class="reviews">({reviews} reviews)</span></div>
<div class="price-box"><span class="price">{price}</span></div>
<div class="description"><p>{desc}</p></div>
<form method="post" action="/cart/add"><input type="hidden" name="product_id" value="{id}"><input type="hidden" name="return_to" value="/product/{id}">
<input type="number" name="qty" value="1" aria-label="Qty">
<button type="submit" class="tocart">Add to Cart</button></form>
</div>"#,
        id = p.id,
        name = esc(&p.name),
        rating = p.rating_text(),
        reviews = p.reviews,
        price = p.price(),
        desc = esc(&p.description),
    );
    layout(c, &p.name, &main)
}

pub fn search(c: &Ctx, query: &str, products: &[Product]) -> String {
    let terms: Vec<String> = query.split_whitespace().map(str::to_lowercase).collect();
    let hits: Vec<&Product> = if terms.is_empty() {
        vec![]
    } else {
        products.iter().filter(|p| {
            let name = p.name.to_lowercase();
            terms.iter().all(|t| name.contains(t.as_str()))
        }).collect()
    };
    let body = if hits.is_empty() {
        "<p class=\"message\">Your search returned no results.</p>".to_string()
    } else {
        grid(&hits, &format!("/search?q={}", esc(&query.replace(' ', "+"))))
    };
    let main = format!(
        r#"<h1>Search results for: '{q}'</h1><p class="toolbar-amount">{n} items</p>{body}"#,
        q = esc(query),
        n = hits.len()
    );
    layout(c, &format!("Search results for: '{query}'"), &main)
}

pub fn cart(c: &Ctx, lines: &[(&Product, u32)]) -> String {
    let main = if lines.is_empty() {
        r#"<h1>Shopping Cart</h1><div class="cart-empty"><p>You have no items in your shopping cart.</p><a href="/">Continue Shopping</a></div>"#.to_string()
    } else {
        let mut rows = String::new();
        let mut subtotal = 0u32;
        for (p, q) in lines {
            subtotal += p.price_cents * q;
            let _ = write!(
                rows,
                r#"<tr class="item"><td><a href="/product/{id}">{name}</a></td><td class="qty">Qty: {q}</td><td class="price">{price}</td>
<td><form method="post" action="/cart/remove"><input type="hidden" name="product_id" value="{id}"><button type="submit">Remove</button></form></td></tr>"#,
                id = p.id,
                name = esc(&p.name),
                price = p.price()
            );
        }
        format!(
            r#"<h1>Shopping Cart</h1><table class="cart items"><tbody>{rows}</tbody></table>
<div class="cart-summary"><p class="subtotal">Subtotal: ${}.{:02}</p>
<button type="button" class="checkout" onclick="location.href='/checkout'">Proceed to Checkout</button></div>"#,
            subtotal / 100,
            subtotal % 100
        )
    };
    layout(c, "Shopping Cart", &main)
}

pub fn checkout(c: &Ctx, error: Option<&str>) -> String {
    let err = error.map(|e| format!(r#"<div class="message error">{}</div>"#, esc(e))).unwrap_or_default();
    let main = format!(
        r#"<h1>Checkout</h1>{err}
<p>Items in cart: {n}</p>
<form class="checkout-form" method="post" action="/checkout">
<label>Full Name <input type="text" name="full_name" placeholder="Full Name"></label>
<label>Street Address <input type="text" name="address" placeholder="Street Address"></label>
<select name="shipping" aria-label="Shipping Method"><option value="standard">Standard Shipping ($5.00)</option><option value="express">Express Shipping ($15.00)</option></select>
<label><input type="checkbox" name="gift" value="yes"> This order is a gift</label>
<textarea name="notes" placeholder="Order notes"></textarea>
<button type="submit">Place Order</button>
</form>"#,
        n = c.cart_count
    );
    layout(c, "Checkout", &main)
}

pub fn order(c: &Ctx, o: &Order) -> String {
    let main = format!(
        r#"<h1>Thank you for your purchase!</h1><p>Your order number is: {}.</p><p>We will email {} a confirmation.</p><a href="/">Continue Shopping</a>"#,
        o.id,
        esc(&o.name)
    );
    layout(c, "Order Confirmed", &main)
}

pub fn help(c: &Ctx) -> String {
    let main = r#"<h1>Help &amp; Support</h1><p>Orders ship within two business days.</p><a href="/">Back to Store</a>"#;
    layout(c, "Help & Support", main)
}

pub fn tall(c: &Ctx, clicked: bool) -> String {
    let extra = if clicked { r#"<p class="loaded">More results loaded</p>"# } else { "" };
    let main = format!(
        r#"<h1>All Results</h1><div class="spacer">Scroll down for more results.</div>
<button type="button" class="load-more" onclick="location.href='/tall?clicked=1'">Load More Results</button>{extra}"#
    );
    layout(c, "All Results", &main)
}

pub fn hover(c: &Ctx) -> String {
    let main = r#"<h1>Departments</h1>
<div class="menu" id="dept-menu">Shop by Department
<div class="submenu"><a href="/category/home">Home Decor Deals</a> <a href="/category/sports">Outdoor Deals</a></div>
</div>
<span id="deals" class="deals">Today's Deals</span>
<div id="deals-panel" hidden><p>Deals refresh at midnight.</p></div>
<script>document.getElementById('deals').addEventListener('mouseenter', function () { document.getElementById('deals-panel').hidden = false; });</script>"#;
    layout(c, "Departments", main)
}

pub fn slow(c: &Ctx, ms: u64) -> String {
    layout(c, "Slow Page", &format!("<h1>Slow Page</h1><p>Served after {ms} ms.</p>"))
}

pub fn not_found(c: &Ctx) -> String {
    layout(c, "Page Not Found", "<h1>Whoops, our bad...</h1><p>The page you requested was not found.</p>")
}
