/** Per-user chat transcript fed by WebSocket deltas.
 *
 * Deduplication is purely cursor-based: the store remembers the next cursor
 * it expects and drops anything already seen, so reconnecting with
 * `?since=<nextCursor>` (or replaying old messages) never duplicates a
 * bubble. Records are never mutated client-side.
 */

import type { InteractionRecord } from "./types.js";

export const HIGH_SCORE_THRESHOLD = 75;

export interface Bubble {
  cursor: number;
  record: InteractionRecord;
}

export function scoreClass(score: number, threshold = HIGH_SCORE_THRESHOLD): "high" | "normal" {
  if (!Number.isFinite(score) || score < 0 || score > 100) {
    throw new Error(`score ${score} outside [0,100]`);
  }
  return score >= threshold ? "high" : "normal";
}

export class TranscriptStore {
  private byUser = new Map<string, Bubble[]>();
  /** Cursor to resume from: one past the last interaction applied. */
  nextCursor = 0;

  /** Apply one interaction delta; returns true when it was new. */
  apply(cursor: number, record: InteractionRecord): boolean {
    if (cursor < this.nextCursor) return false;
    this.nextCursor = cursor + 1;
    const list = this.byUser.get(record.user) ?? [];
    list.push({ cursor, record });
    this.byUser.set(record.user, list);
    return true;
  }

  bubbles(user: string): readonly Bubble[] {
    return this.byUser.get(user) ?? [];
  }

  users(): string[] {
    return [...this.byUser.keys()].sort();
  }

  total(): number {
    let n = 0;
    for (const list of this.byUser.values()) n += list.length;
    return n;
  }

  clear(): void {
    this.byUser.clear();
    this.nextCursor = 0;
  }
}
