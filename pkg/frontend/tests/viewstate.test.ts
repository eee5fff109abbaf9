import { describe, expect, it } from "vitest";

import { TranscriptStore } from "../src/transcript.js";
import type { StateSnapshot, WsMessage } from "../src/types.js";
import {
  applyMessage,
  applySnapshot,
  avatarPosition,
  beginDrag,
  endDrag,
  initialViewState,
  setConnection,
  userEntry,
  wsUrl,
} from "../src/viewstate.js";

function snapshot(x = 5, y = 1.3, activity: string | null = "cooking"): StateSnapshot {
  return {
    users: {
      "5b66": {
        name: "Mary",
        room: "kitchen",
        room_label: "kitchen",
        position: { x, y },
        activity,
        activity_label: activity,
      },
    },
    interactions: 0,
  };
}

describe("snapshot handling", () => {
  it("snapshots replace, never merge", () => {
    let state = applySnapshot(initialViewState(), snapshot(5, 1.3));
    state = applySnapshot(state, snapshot(2, 2.5, null));
    expect(userEntry(state, "5b66")?.position).toEqual({ x: 2, y: 2.5 });
    expect(userEntry(state, "5b66")?.activity).toBeNull();
  });

  it("re-applying the same snapshot reproduces the identical view", () => {
    const a = applySnapshot(initialViewState(), snapshot());
    const b = applySnapshot(initialViewState(), snapshot());
    expect(a).toEqual(b);
  });
});

describe("drag ghost", () => {
  it("overrides the avatar position only while dragging", () => {
    let state = applySnapshot(initialViewState(), snapshot(5, 1.3));
    state = beginDrag(state, "5b66", 9, 7);
    expect(avatarPosition(state, "5b66")).toEqual({ x: 9, y: 7 });
    state = endDrag(state);
    expect(avatarPosition(state, "5b66")).toEqual({ x: 5, y: 1.3 });
  });

  it("only affects the dragged avatar", () => {
    let state = applySnapshot(initialViewState(), snapshot());
    state = beginDrag(state, "ed9c", 1, 1);
    expect(avatarPosition(state, "5b66")).toEqual({ x: 5, y: 1.3 });
  });

  it("disconnect drops the ghost", () => {
    let state = beginDrag(applySnapshot(initialViewState(), snapshot()), "5b66", 9, 7);
    state = setConnection(state, "closed");
    expect(state.drag).toBeNull();
  });
});

describe("applyMessage", () => {
  it("routes interactions to the transcript and state to the view", () => {
    const transcript = new TranscriptStore();
    let state = initialViewState();
    const messages: WsMessage[] = [
      {
        type: "interaction",
        cursor: 1,
        record: {
          ts: 0,
          user: "5b66",
          activity: "cooking",
          room: "kitchen",
          prompt_chars: 10,
          response_text: "Acknowledged cooking in kitchen.",
          score: 50,
          backend_id: "mock",
          latency_ms: 0,
        },
      },
      { type: "state", state: snapshot() },
    ];
    for (const msg of messages) state = applyMessage(state, transcript, msg);
    expect(transcript.total()).toBe(1);
    expect(transcript.nextCursor).toBe(1);
    expect(userEntry(state, "5b66")?.room).toBe("kitchen");
  });
});

describe("wsUrl", () => {
  it("builds a ws URL with the resume cursor", () => {
    expect(wsUrl("http://localhost:8000/index.html", 7)).toBe(
      "ws://localhost:8000/events?since=7",
    );
  });

  it("uses wss for https origins", () => {
    expect(wsUrl("https://example.com/app/", 0)).toBe("wss://example.com/events?since=0");
  });
});
