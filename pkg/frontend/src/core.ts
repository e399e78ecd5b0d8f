// Headless client state machine. The browser layer injects a transport
// (WebSocket) and a renderer (canvas); the integration test injects a
// node transport and a recording renderer. Keeping the logic here means
// what the test drives is exactly what the browser runs.

import {
  ClientMsg,
  FrameMsg,
  StatusMsg,
  buildKeymap,
  decodeFrame,
  defaultAction,
} from "./protocol.js";

export interface Transport {
  sendText(text: string): void;
}

export interface Renderer {
  paintFrame(frame: FrameMsg): void;
  statusChanged(core: ClientCore): void;
}

export class ClientCore {
  actions: string[] = [];
  keymap = new Map<string, number>();
  envId = "";
  tickHz = 0;
  score = 0;
  step = 0;
  terminal = false;
  connected = false;
  recording = false;
  heldAction: number | null = null;
  errorCount = 0;
  lastNote = "";
  savedEpisodes = 0;

  constructor(private transport: Transport, private renderer: Renderer) {}

  private send(msg: ClientMsg) {
    this.transport.sendText(JSON.stringify(msg));
  }

  start() {
    this.connected = true;
    this.send({ type: "hello" });
    this.renderer.statusChanged(this);
  }

  disconnected() {
    this.connected = false;
    this.recording = false;
    this.renderer.statusChanged(this);
  }

  handleBinary(buf: ArrayBuffer) {
    let frame: FrameMsg;
    try {
      frame = decodeFrame(buf);
    } catch {
      this.errorCount += 1;
      return;
    }
    this.step = frame.step;
    this.score = frame.score;
    this.terminal = frame.terminal;
    this.recording = !frame.terminal;
    this.renderer.paintFrame(frame);
    this.renderer.statusChanged(this);
  }

  handleText(text: string) {
    let msg: StatusMsg;
    try {
      msg = JSON.parse(text);
    } catch {
      this.errorCount += 1;
      return;
    }
    switch (msg.type) {
      case "hello":
        this.envId = msg.env;
        this.actions = msg.actions;
        this.tickHz = msg.tick_hz;
        this.keymap = buildKeymap(msg.actions);
        this.recording = true;
        break;
      case "saved":
        this.savedEpisodes = msg.episodes;
        this.lastNote = `saved episode ${msg.episodes} (${msg.states} states, score ${msg.score})`;
        this.terminal = false;
        break;
      case "discarded":
      case "reset":
        this.lastNote = `${msg.type}; new seed ${msg.seed}`;
        this.terminal = false;
        this.score = 0;
        this.step = 0;
        break;
      case "stopped":
        this.recording = false;
        break;
      case "warning":
      case "error":
        this.errorCount += 1;
        this.lastNote = msg.message;
        break;
    }
    this.renderer.statusChanged(this);
  }

  // keyboard -------------------------------------------------------------
  keyDown(key: string): boolean {
    if (key === "s" || key === "S") {
      this.send({ type: "save" });
      return true;
    }
    if (key === "d" || key === "D") {
      this.send({ type: "discard" });
      return true;
    }
    if (key === "r" || key === "R") {
      this.send({ type: "reset" });
      return true;
    }
    if (this.terminal) {
      return false; // gameplay input disabled until save/discard
    }
    const action = this.keymap.get(key);
    if (action === undefined) {
      return false; // unbound key: nothing sent
    }
    if (action !== this.heldAction) {
      this.heldAction = action;
      this.send({ type: "action", index: action });
    }
    return true;
  }

  keyUp(key: string): boolean {
    const action = this.keymap.get(key);
    if (action === undefined || action !== this.heldAction) {
      return false;
    }
    this.heldAction = defaultAction(this.actions);
    this.send({ type: "action", index: this.heldAction });
    return true;
  }
}
