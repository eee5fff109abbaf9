/** Server-authoritative view model: snapshots replace, never merge.
 *
 * The only client-side state layered on top is the transient drag ghost
 * (optimistic avatar motion while the pointer is down); the server echo
 * reconciles it.
 */

import type { StateSnapshot, UserStateEntry, WsMessage } from "./types.js";
import { TranscriptStore } from "./transcript.js";

export type Connection = "connecting" | "open" | "closed";

export interface ViewState {
  connection: Connection;
  snapshot: StateSnapshot | null;
  drag: { tag: string; x: number; y: number } | null;
}

export function initialViewState(): ViewState {
  return { connection: "connecting", snapshot: null, drag: null };
}

export function applySnapshot(state: ViewState, snapshot: StateSnapshot): ViewState {
  return { ...state, snapshot };
}

export function setConnection(state: ViewState, connection: Connection): ViewState {
  // losing the socket also drops any in-flight drag ghost
  return connection === "open"
    ? { ...state, connection }
    : { ...state, connection, drag: null };
}

export function beginDrag(state: ViewState, tag: string, x: number, y: number): ViewState {
  return { ...state, drag: { tag, x, y } };
}

export function endDrag(state: ViewState): ViewState {
  return { ...state, drag: null };
}

/** Rendered avatar position: drag ghost while dragging, else server truth. */
export function avatarPosition(
  state: ViewState,
  tag: string,
): { x: number; y: number } | null {
  if (state.drag && state.drag.tag === tag) return { x: state.drag.x, y: state.drag.y };
  const entry = state.snapshot?.users[tag];
  return entry?.position ?? null;
}

export function userEntry(state: ViewState, tag: string): UserStateEntry | null {
  return state.snapshot?.users[tag] ?? null;
}

/** Fold one WebSocket message into (view, transcript); pure except for the store. */
export function applyMessage(
  state: ViewState,
  transcript: TranscriptStore,
  msg: WsMessage,
): ViewState {
  if (msg.type === "interaction") {
    transcript.apply(msg.cursor - 1, msg.record);
    return state;
  }
  return applySnapshot(state, msg.state);
}

export function wsUrl(base: string, since: number): string {
  const url = new URL("/events", base);
  url.protocol = url.protocol === "https:" ? "wss:" : "ws:";
  url.searchParams.set("since", String(since));
  return url.toString();
}
