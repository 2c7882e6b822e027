// Installed into every document before page scripts run. Records hover-type
// listener registrations, DOM mutation times and a stable node handle table,
// and exposes the helpers the CDP driver calls as `__uxsim.<fn>(...)`.
(() => {
  if (window.__uxsim) return;

  const HOVER_EVENTS = new Set(["mouseover", "mouseenter", "mousemove", "pointerover", "pointerenter"]);
  const hoverTargets = new WeakSet();
  const clickTargets = new WeakSet();
  const refs = new WeakMap();
  const nodes = new Map();
  let nextRef = 1;
  let lastMutation = performance.now();

  const original = EventTarget.prototype.addEventListener;
  EventTarget.prototype.addEventListener = function (type, listener, options) {
    try {
      if (HOVER_EVENTS.has(type) && this instanceof Element) {
        hoverTargets.add(this);
        this.setAttribute("maybe-hoverable", "true");
      } else if (type === "click" && this instanceof Element) {
        clickTargets.add(this);
      }
    } catch (_) {}
    return original.call(this, type, listener, options);
  };

  const watch = () => {
    new MutationObserver(() => {
      lastMutation = performance.now();
    }).observe(document, { subtree: true, childList: true, attributes: true, characterData: true });
  };
  if (document.documentElement) watch();
  else document.addEventListener("readystatechange", watch, { once: true });

  const refOf = (node) => {
    let r = refs.get(node);
    if (r === undefined) {
      r = nextRef++;
      refs.set(node, r);
      nodes.set(r, new WeakRef(node));
    }
    return r;
  };

  const nodeOf = (r) => {
    const w = nodes.get(r);
    const n = w && w.deref();
    if (!n || !n.isConnected) throw new Error("stale node " + r);
    return n;
  };

  const rectOf = (el) => {
    const b = el.getBoundingClientRect();
    return { x: b.left, y: b.top, width: b.width, height: b.height };
  };

  const hoverRules = () => {
    const selectors = [];
    const visit = (rules) => {
      for (const rule of rules) {
        if (rule.cssRules && !rule.selectorText) {
          visit(rule.cssRules);
        } else if (rule.selectorText && rule.selectorText.includes(":hover")) {
          for (const part of rule.selectorText.split(",")) {
            const idx = part.indexOf(":hover");
            if (idx < 0) continue;
            // The element that must be hovered is the compound ending at ":hover".
            const head = part.slice(0, idx).replace(/:+[\w-]+(\([^)]*\))?$/g, "").trim();
            if (head) selectors.push(head);
            else selectors.push("*");
          }
        }
      }
    };
    for (const sheet of document.styleSheets) {
      try {
        visit(sheet.cssRules);
      } catch (_) {}
    }
    return selectors;
  };

  const matchesAny = (el, selectors) => {
    for (const s of selectors) {
      try {
        if (el.matches(s)) return true;
      } catch (_) {}
    }
    return false;
  };

  const selectedLabel = (sel) => {
    const opt = sel.options[sel.selectedIndex];
    return opt ? opt.label || opt.text.trim() : undefined;
  };

  const snapshot = () => {
    const out = [];
    const hoverSelectors = hoverRules();
    const sx = window.scrollX;
    const sy = window.scrollY;
    const visit = (node) => {
      const idx = out.length;
      if (node.nodeType === Node.TEXT_NODE) {
        out.push({ ref: refOf(node), type: "text", text: node.data });
        return idx;
      }
      if (node.nodeType === Node.DOCUMENT_NODE) {
        out.push({ ref: refOf(node), type: "document", children: [] });
      } else {
        const el = node;
        const cs = getComputedStyle(el);
        const attrs = {};
        for (const a of el.attributes) attrs[a.name] = a.value;
        const rects = el.getClientRects();
        const b = rects.length ? el.getBoundingClientRect() : null;
        const state = { focused: document.activeElement === el };
        const tag = el.tagName.toLowerCase();
        if (tag === "input" || tag === "textarea") {
          if (el.type === "checkbox" || el.type === "radio") state.checked = el.checked;
          else state.value = el.value;
        } else if (tag === "select") {
          state.selected = selectedLabel(el);
        }
        out.push({
          ref: refOf(el),
          type: "element",
          tag,
          attrs,
          children: [],
          style: { display: cs.display, visibility: cs.visibility, cursor: cs.cursor },
          box: b ? { x: b.left + sx, y: b.top + sy, width: b.width, height: b.height } : null,
          hoverStyled: matchesAny(el, hoverSelectors),
          listeners: {
            click: typeof el.onclick === "function" || clickTargets.has(el),
            hover: hoverTargets.has(el) || typeof el.onmouseover === "function" || typeof el.onmouseenter === "function",
          },
          state,
        });
      }
      const kids = [];
      for (const c of node.childNodes) {
        if (c.nodeType === Node.ELEMENT_NODE || c.nodeType === Node.TEXT_NODE) kids.push(visit(c));
      }
      out[idx].children = kids;
      return idx;
    };
    visit(document);
    const root = document.documentElement;
    return {
      url: location.href,
      title: document.title,
      viewport: { width: innerWidth, height: innerHeight },
      document: {
        width: Math.max(root ? root.scrollWidth : 0, innerWidth),
        height: Math.max(root ? root.scrollHeight : 0, innerHeight),
      },
      scroll: { width: sx, height: sy },
      nodes: out,
      root: 0,
      warnings: [],
    };
  };

  const annotate = (list) => {
    for (const el of document.querySelectorAll("[semantic-id]")) {
      el.removeAttribute("semantic-id");
      el.removeAttribute("clickable");
    }
    for (const a of list) {
      let el;
      try {
        el = nodeOf(a.node_ref);
      } catch (_) {
        continue;
      }
      el.setAttribute("semantic-id", a.semantic_id);
      if (a.clickable) el.setAttribute("clickable", "true");
    }
    return true;
  };

  const resolve = (id) => {
    const el = document.querySelector('[semantic-id="' + CSS.escape(id) + '"]');
    return el ? refOf(el) : null;
  };

  const scrollIntoView = (r) => {
    const el = nodeOf(r);
    if (!el.getClientRects().length) return { x: 0, y: 0, width: 0, height: 0 };
    el.scrollIntoView({ block: "center", inline: "center", behavior: "instant" });
    return rectOf(el);
  };

  const hitTest = (x, y) => {
    const out = [];
    for (let el = document.elementFromPoint(x, y); el; el = el.parentNode) {
      if (el.nodeType === Node.ELEMENT_NODE || el.nodeType === Node.DOCUMENT_NODE) out.push(refOf(el));
    }
    return out;
  };

  const focus = (r) => {
    nodeOf(r).focus();
    return true;
  };

  const fire = (el, type) => el.dispatchEvent(new Event(type, { bubbles: true }));

  const clear = (r) => {
    const el = nodeOf(r);
    if (el.isContentEditable) el.textContent = "";
    else el.value = "";
    fire(el, "input");
    fire(el, "change");
    return true;
  };

  const select = (r, wanted) => {
    const el = nodeOf(r);
    const w = wanted.trim().toLowerCase();
    const opts = Array.from(el.options);
    const hit =
      opts.find((o) => (o.label || o.text).trim().toLowerCase() === w) ||
      opts.find((o) => o.value.trim().toLowerCase() === w);
    if (!hit) return false;
    el.value = hit.value;
    fire(el, "input");
    fire(el, "change");
    return true;
  };

  const activity = () => performance.now() - lastMutation;

  window.__uxsim = { snapshot, annotate, resolve, scrollIntoView, hitTest, focus, clear, select, activity };
})();
