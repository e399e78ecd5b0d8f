// Wire protocol shared with the demo server.
//
// Server -> client binary frame message:
//   u32le step counter, f32le last-step reward, u8 terminal flag,
//   f32le cumulative score, then 7744 grayscale frame bytes (88x88).
// Text messages are JSON with a "type" field.

export const FRAME_W = 88;
export const FRAME_H = 88;
export const FRAME_BYTES = FRAME_W * FRAME_H;
export const HEAD_BYTES = 4 + 4 + 1 + 4;
export const MSG_BYTES = HEAD_BYTES + FRAME_BYTES;

export interface FrameMsg {
  step: number;
  reward: number;
  terminal: boolean;
  score: number;
  pixels: Uint8Array;
}

export interface HelloMsg {
  type: "hello";
  env: string;
  env_version: string;
  actions: string[];
  tick_hz: number;
  seed: number;
}

export type StatusMsg =
  | HelloMsg
  | { type: "saved"; episodes: number; states: number; score: number }
  | { type: "discarded"; seed: number }
  | { type: "reset"; seed: number }
  | { type: "stopped" }
  | { type: "warning"; message: string }
  | { type: "error"; message: string };

export function decodeFrame(buf: ArrayBuffer): FrameMsg {
  if (buf.byteLength !== MSG_BYTES) {
    throw new Error(`frame message must be ${MSG_BYTES} bytes, got ${buf.byteLength}`);
  }
  const view = new DataView(buf);
  return {
    step: view.getUint32(0, true),
    reward: view.getFloat32(4, true),
    terminal: view.getUint8(8) !== 0,
    score: view.getFloat32(9, true),
    pixels: new Uint8Array(buf, HEAD_BYTES),
  };
}

export type ClientMsg =
  | { type: "hello" }
  | { type: "action"; index: number }
  | { type: "reset" }
  | { type: "save" }
  | { type: "discard" }
  | { type: "stop" };

// Keyboard layout: arrows move, space is noop where the game has one,
// S/D/R save/discard/reset.
const MOVE_KEYS: Record<string, string> = {
  up: "ArrowUp",
  down: "ArrowDown",
  left: "ArrowLeft",
  right: "ArrowRight",
  noop: " ",
};

export function buildKeymap(actions: string[]): Map<string, number> {
  const map = new Map<string, number>();
  actions.forEach((name, index) => {
    const key = MOVE_KEYS[name];
    if (key !== undefined) {
      map.set(key, index);
    }
  });
  return map;
}

export function defaultAction(actions: string[]): number {
  const noop = actions.indexOf("noop");
  return noop >= 0 ? noop : 0;
}
