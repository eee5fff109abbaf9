/** Wire types mirroring the orchestrator HTTP/WebSocket API. */

export interface RoomShape {
  room: string;
  label: string;
  polygon: [number, number][];
}

export interface SensorInfo {
  sensor_id: string;
  kind: string;
  room: string;
  location: [number, number];
  raw_range: [number, number];
}

export interface FloorPlan {
  rooms: RoomShape[];
  exit_zone: [number, number][];
  pois: Record<string, [number, number]>;
  sensors: SensorInfo[];
}

export interface UserInfo {
  tag_id: string;
  name: string;
  bedroom: string;
}

export interface UserStateEntry {
  name: string;
  room: string;
  room_label: string;
  position: { x: number; y: number } | null;
  activity: string | null;
  activity_label: string | null;
}

export interface StateSnapshot {
  users: Record<string, UserStateEntry>;
  interactions: number;
}

export interface InteractionRecord {
  ts: number;
  user: string;
  activity: string;
  room: string;
  prompt_chars: number;
  response_text: string;
  score: number;
  backend_id: string;
  latency_ms: number;
}

export type WsMessage =
  | { type: "interaction"; cursor: number; record: InteractionRecord }
  | { type: "state"; state: StateSnapshot };
