/** DOM wiring for the sim console.
 *
 * All recognition lives server-side: this file only renders /state and
 * /events data, and posts steering input back.
 */

import {
  Bounds,
  Viewport,
  canvasToWorld,
  insideCanvas,
  planBounds,
  worldToCanvas,
} from "./geometry.js";
import { HIGH_SCORE_THRESHOLD, TranscriptStore, scoreClass } from "./transcript.js";
import type { FloorPlan, SensorInfo, UserInfo, WsMessage } from "./types.js";
import {
  applyMessage,
  avatarPosition,
  beginDrag,
  endDrag,
  initialViewState,
  setConnection,
  userEntry,
  wsUrl,
} from "./viewstate.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const VIEW: Viewport = { width: 640, height: 520, padding: 20 };
const AVATAR_COLORS = ["#2f7ed8", "#c0392b", "#27ae60", "#8e44ad"];

let plan: FloorPlan;
let users: UserInfo[];
let bounds: Bounds;
let view = initialViewState();
const transcript = new TranscriptStore();
let activeTab: string | null = null;
let socket: WebSocket | null = null;

function $(id: string): HTMLElement {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
}

function toast(message: string): void {
  const box = $("toasts");
  const el = document.createElement("div");
  el.className = "toast";
  el.textContent = message;
  box.appendChild(el);
  setTimeout(() => el.remove(), 4000);
}

async function post(path: string, body: unknown): Promise<boolean> {
  try {
    const resp = await fetch(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) {
      const detail = (await resp.json().catch(() => null)) as { detail?: string } | null;
      toast(`${resp.status}: ${detail?.detail ?? "request rejected"}`);
      return false;
    }
    return true;
  } catch {
    toast("server unreachable");
    return false;
  }
}

// -- floor plan -------------------------------------------------------------

function polyPoints(polygon: [number, number][]): string {
  return polygon
    .map(([x, y]) => {
      const p = worldToCanvas({ x, y }, bounds, VIEW);
      return `${p.x},${p.y}`;
    })
    .join(" ");
}

function renderPlan(svg: SVGSVGElement): void {
  svg.setAttribute("viewBox", `0 0 ${VIEW.width} ${VIEW.height}`);
  for (const room of plan.rooms) {
    const poly = document.createElementNS(SVG_NS, "polygon");
    poly.setAttribute("points", polyPoints(room.polygon));
    poly.setAttribute("class", "room");
    svg.appendChild(poly);
    const [cx, cy] = room.polygon
      .reduce(([ax, ay], [x, y]) => [ax + x, ay + y], [0, 0])
      .map((v) => v / room.polygon.length);
    const label = document.createElementNS(SVG_NS, "text");
    const p = worldToCanvas({ x: cx, y: cy }, bounds, VIEW);
    label.setAttribute("x", String(p.x));
    label.setAttribute("y", String(p.y));
    label.setAttribute("class", "room-label");
    label.textContent = room.label;
    svg.appendChild(label);
  }
  const exit = document.createElementNS(SVG_NS, "polygon");
  exit.setAttribute("points", polyPoints(plan.exit_zone));
  exit.setAttribute("class", "exit-zone");
  svg.appendChild(exit);
  for (const [name, [x, y]] of Object.entries(plan.pois)) {
    const p = worldToCanvas({ x, y }, bounds, VIEW);
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(p.x));
    dot.setAttribute("cy", String(p.y));
    dot.setAttribute("r", "4");
    dot.setAttribute("class", "poi");
    svg.appendChild(dot);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(p.x + 6));
    label.setAttribute("y", String(p.y - 4));
    label.setAttribute("class", "poi-label");
    label.textContent = name;
    svg.appendChild(label);
  }
  for (const sensor of plan.sensors) {
    const p = worldToCanvas({ x: sensor.location[0], y: sensor.location[1] }, bounds, VIEW);
    const dot = document.createElementNS(SVG_NS, "rect");
    dot.setAttribute("x", String(p.x - 3));
    dot.setAttribute("y", String(p.y - 3));
    dot.setAttribute("width", "6");
    dot.setAttribute("height", "6");
    dot.setAttribute("class", "sensor-dot");
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = sensor.sensor_id;
    dot.appendChild(title);
    svg.appendChild(dot);
  }
}

// -- avatars ----------------------------------------------------------------

function renderAvatars(svg: SVGSVGElement): void {
  svg.querySelectorAll(".avatar").forEach((el) => el.remove());
  users.forEach((user, i) => {
    const pos = avatarPosition(view, user.tag_id);
    if (!pos) return;
    const p = worldToCanvas(pos, bounds, VIEW);
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "avatar");
    group.dataset.tag = user.tag_id;
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(p.x));
    circle.setAttribute("cy", String(p.y));
    circle.setAttribute("r", "11");
    circle.setAttribute("fill", AVATAR_COLORS[i % AVATAR_COLORS.length]);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(p.x));
    label.setAttribute("y", String(p.y + 4));
    label.setAttribute("class", "avatar-label");
    label.textContent = user.name[0] ?? "?";
    group.appendChild(circle);
    group.appendChild(label);
    svg.appendChild(group);
  });
}

function svgPoint(svg: SVGSVGElement, ev: PointerEvent): { x: number; y: number } {
  const rect = svg.getBoundingClientRect();
  return {
    x: ((ev.clientX - rect.left) / rect.width) * VIEW.width,
    y: ((ev.clientY - rect.top) / rect.height) * VIEW.height,
  };
}

function wireDrag(svg: SVGSVGElement): void {
  let dragging: string | null = null;
  svg.addEventListener("pointerdown", (ev) => {
    if (view.connection !== "open") return;
    const target = (ev.target as Element).closest(".avatar") as SVGGElement | null;
    if (!target?.dataset.tag) return;
    dragging = target.dataset.tag;
    svg.setPointerCapture(ev.pointerId);
  });
  svg.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const c = svgPoint(svg, ev);
    const w = canvasToWorld(c, bounds, VIEW);
    view = beginDrag(view, dragging, w.x, w.y);
    renderAvatars(svg);
  });
  svg.addEventListener("pointerup", async (ev) => {
    if (!dragging) return;
    const tag = dragging;
    dragging = null;
    const c = svgPoint(svg, ev);
    if (!insideCanvas(c, VIEW)) {
      view = endDrag(view);
      renderAvatars(svg);
      return;
    }
    const w = canvasToWorld(c, bounds, VIEW);
    await post("/simulate/position", { tag, x: w.x, y: w.y });
    view = endDrag(view); // server echo (state delta) reconciles the avatar
    renderAvatars(svg);
  });
}

// -- sensor widgets ---------------------------------------------------------

function binary(sensor: SensorInfo): boolean {
  return sensor.raw_range[0] === 0 && sensor.raw_range[1] === 1;
}

function renderSensorWidgets(): void {
  const box = $("sensors");
  box.innerHTML = "";
  for (const sensor of plan.sensors) {
    const row = document.createElement("div");
    row.className = "sensor-row";
    const name = document.createElement("span");
    name.textContent = sensor.sensor_id;
    row.appendChild(name);
    if (binary(sensor)) {
      const button = document.createElement("button");
      button.textContent = "pulse";
      button.addEventListener("click", async () => {
        // a contact/motion pulse: active then released
        if (await post("/simulate/sensor", { sensor: sensor.sensor_id, raw: 1 })) {
          await post("/simulate/sensor", { sensor: sensor.sensor_id, raw: 0 });
        }
      });
      row.appendChild(button);
    } else {
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(sensor.raw_range[0]);
      slider.max = String(sensor.raw_range[1]);
      slider.step = "any";
      slider.value = String(sensor.raw_range[0]);
      const value = document.createElement("span");
      value.className = "sensor-value";
      value.textContent = slider.value;
      slider.addEventListener("change", () => {
        value.textContent = Number(slider.value).toFixed(0);
        void post("/simulate/sensor", { sensor: sensor.sensor_id, raw: Number(slider.value) });
      });
      row.appendChild(slider);
      row.appendChild(value);
    }
    box.appendChild(row);
  }
}

// -- status and transcript --------------------------------------------------

function renderStatus(): void {
  const banner = $("banner");
  banner.className = `banner ${view.connection}`;
  banner.textContent =
    view.connection === "open" ? "connected" : view.connection === "closed" ? "disconnected — retrying" : "connecting…";
  const box = $("occupants");
  box.innerHTML = "";
  for (const user of users) {
    const entry = userEntry(view, user.tag_id);
    const row = document.createElement("div");
    row.className = "occupant";
    const badge = entry?.activity_label ?? "idle";
    row.textContent = `${user.name}: ${entry?.room_label ?? "unknown"}`;
    const chip = document.createElement("span");
    chip.className = `badge ${entry?.activity ? "active" : ""}`;
    chip.textContent = badge;
    row.appendChild(chip);
    box.appendChild(row);
  }
}

function renderTranscript(): void {
  const tabs = $("tabs");
  tabs.innerHTML = "";
  for (const user of users) {
    const button = document.createElement("button");
    button.className = `tab ${activeTab === user.tag_id ? "selected" : ""}`;
    const n = transcript.bubbles(user.tag_id).length;
    button.textContent = n ? `${user.name} (${n})` : user.name;
    button.addEventListener("click", () => {
      activeTab = user.tag_id;
      renderTranscript();
    });
    tabs.appendChild(button);
  }
  const panel = $("bubbles");
  panel.innerHTML = "";
  if (!activeTab) activeTab = users[0]?.tag_id ?? null;
  if (!activeTab) return;
  for (const bubble of transcript.bubbles(activeTab)) {
    const el = document.createElement("div");
    el.className = "bubble";
    const meta = document.createElement("div");
    meta.className = "bubble-meta";
    const when = new Date(bubble.record.ts * 1000).toISOString().replace("T", " ").slice(0, 19);
    meta.textContent = `${when} · ${bubble.record.activity}`;
    const chipClass = scoreClass(bubble.record.score, HIGH_SCORE_THRESHOLD);
    const chip = document.createElement("span");
    chip.className = `score-chip ${chipClass}`;
    chip.textContent = String(bubble.record.score);
    const text = document.createElement("div");
    text.textContent = bubble.record.response_text;
    el.appendChild(meta);
    el.appendChild(text);
    el.appendChild(chip);
    panel.appendChild(el);
  }
  panel.scrollTop = panel.scrollHeight;
}

// -- websocket loop ---------------------------------------------------------

function connect(svg: SVGSVGElement): void {
  socket = new WebSocket(wsUrl(window.location.href, transcript.nextCursor));
  socket.onopen = () => {
    view = setConnection(view, "open");
    renderStatus();
  };
  socket.onmessage = (ev) => {
    const msg = JSON.parse(ev.data) as WsMessage;
    view = applyMessage(view, transcript, msg);
    renderStatus();
    renderAvatars(svg);
    if (msg.type === "interaction") renderTranscript();
  };
  socket.onclose = () => {
    view = setConnection(view, "closed");
    renderStatus();
    // resume from the cursor we already hold: no duplicate bubbles
    setTimeout(() => connect(svg), 1000);
  };
  socket.onerror = () => socket?.close();
}

async function main(): Promise<void> {
  const [planResp, usersResp] = await Promise.all([fetch("/floorplan"), fetch("/users")]);
  plan = (await planResp.json()) as FloorPlan;
  users = (await usersResp.json()) as UserInfo[];
  bounds = planBounds(plan);
  const svg = $("plan") as unknown as SVGSVGElement;
  renderPlan(svg);
  renderSensorWidgets();
  renderStatus();
  renderTranscript();
  wireDrag(svg);
  connect(svg);
}

void main().catch((err) => toast(String(err)));
