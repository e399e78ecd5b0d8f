// Browser bootstrap: canvas rendering, WebSocket transport, keyboard.

import { ClientCore, Renderer, Transport } from "./core.js";
import { FRAME_H, FRAME_W, FrameMsg } from "./protocol.js";

const SCALE = 4;

class CanvasRenderer implements Renderer {
  private ctx: CanvasRenderingContext2D;
  private off: HTMLCanvasElement;
  private offCtx: CanvasRenderingContext2D;
  private image: ImageData;

  constructor(private canvas: HTMLCanvasElement, private status: HTMLElement,
              private note: HTMLElement) {
    canvas.width = FRAME_W * SCALE;
    canvas.height = FRAME_H * SCALE;
    this.ctx = canvas.getContext("2d")!;
    this.ctx.imageSmoothingEnabled = false; // nearest-neighbour upscale
    this.off = document.createElement("canvas");
    this.off.width = FRAME_W;
    this.off.height = FRAME_H;
    this.offCtx = this.off.getContext("2d")!;
    this.image = this.offCtx.createImageData(FRAME_W, FRAME_H);
  }

  paintFrame(frame: FrameMsg) {
    const rgba = this.image.data;
    for (let i = 0; i < frame.pixels.length; i++) {
      const v = frame.pixels[i];
      const j = i * 4;
      rgba[j] = v;
      rgba[j + 1] = v;
      rgba[j + 2] = v;
      rgba[j + 3] = 255;
    }
    this.offCtx.putImageData(this.image, 0, 0);
    this.ctx.drawImage(this.off, 0, 0, this.canvas.width, this.canvas.height);
  }

  statusChanged(core: ClientCore) {
    const bits = [
      core.connected ? `playing ${core.envId}` : "disconnected - retrying",
      `step ${core.step}`,
      `score ${core.score}`,
      core.terminal ? "EPISODE OVER - S save / D discard" : "",
      core.recording ? "REC" : "",
    ];
    this.status.textContent = bits.filter(Boolean).join("  |  ");
    this.note.textContent = core.lastNote;
  }
}

export function mount(canvas: HTMLCanvasElement, status: HTMLElement, note: HTMLElement) {
  let backoff = 1000;
  const renderer = new CanvasRenderer(canvas, status, note);

  const connect = () => {
    const ws = new WebSocket(`ws://${location.host}/ws`);
    ws.binaryType = "arraybuffer";
    const transport: Transport = { sendText: (t) => ws.send(t) };
    const core = new ClientCore(transport, renderer);

    ws.onopen = () => {
      backoff = 1000;
      core.start();
    };
    ws.onmessage = (ev) => {
      if (typeof ev.data === "string") {
        core.handleText(ev.data);
      } else {
        core.handleBinary(ev.data);
      }
    };
    ws.onclose = () => {
      core.disconnected();
      setTimeout(connect, backoff);
      backoff = Math.min(backoff * 2, 10_000);
    };
    window.onkeydown = (ev) => {
      if (core.keyDown(ev.key)) {
        ev.preventDefault();
      }
    };
    window.onkeyup = (ev) => {
      if (core.keyUp(ev.key)) {
        ev.preventDefault();
      }
    };
  };

  connect();
}
