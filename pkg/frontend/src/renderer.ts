/** Canvas implementation of the Renderer interface. */

import { ApiClient } from "./api.js";
import { AnnotatorController, Renderer } from "./controller.js";
import { OverlayData, maskToRgba } from "./overlay.js";
import { AnnotationState } from "./state.js";
import { ViewState, Viewport, visibleTiles, worldToScreen } from "./viewer.js";

const HR_COLOR: [number, number, number] = [46, 204, 113];
const LR_COLOR: [number, number, number] = [52, 152, 219];

export class CanvasRenderer implements Renderer {
  /** Set by the factory so patch geometry tracks the loaded checkpoint. */
  patchSize = () => 64;
  private tileCache = new Map<string, HTMLImageElement>();
  private lastState: AnnotationState | null = null;
  private lastOverlay: OverlayData | null = null;

  constructor(
    private api: ApiClient,
    private mainCanvas: HTMLCanvasElement,
    private hrPane: HTMLCanvasElement,
    private lrPane: HTMLCanvasElement,
    private banner: HTMLElement,
    private status: HTMLElement,
  ) {}

  viewState(state: AnnotationState): ViewState {
    return { center: state.center, zoom: state.zoom };
  }

  private viewport(): Viewport {
    return { width: this.mainCanvas.width, height: this.mainCanvas.height };
  }

  renderState(state: AnnotationState): void {
    this.lastState = state;
    this.drawMain();
  }

  renderOverlay(overlay: OverlayData | null): void {
    this.lastOverlay = overlay;
    this.drawPane(this.hrPane, overlay, "hr");
    this.drawPane(this.lrPane, overlay, "lr");
    this.status.textContent = overlay ? `latency ${overlay.latencyMs.toFixed(0)} ms` : "no prediction yet";
    this.drawMain();
  }

  showError(message: string | null): void {
    this.banner.textContent = message ?? "";
    this.banner.style.display = message ? "block" : "none";
  }

  private drawMain(): void {
    const state = this.lastState;
    if (!state || !state.sessionId) return;
    const ctx = this.mainCanvas.getContext("2d");
    if (!ctx) return;
    const vp = this.viewport();
    const view = this.viewState(state);
    ctx.fillStyle = "#202020";
    ctx.fillRect(0, 0, vp.width, vp.height);
    for (const tile of visibleTiles(view, vp, state.levels)) {
      const key = `${tile.level}:${tile.row}:${tile.col}`;
      let img = this.tileCache.get(key);
      if (!img) {
        img = new Image();
        img.src = this.api.tileUrl(state.sessionId, tile.level, tile.row, tile.col);
        img.onload = () => this.drawMain();
        this.tileCache.set(key, img);
        continue;
      }
      if (img.complete) {
        ctx.imageSmoothingEnabled = view.zoom < 1;
        ctx.drawImage(img, tile.x, tile.y, tile.w, tile.h);
      }
    }

    // active patch footprint + prompts
    const p = this.patchRect(state, vp);
    if (state.promptLog.length && p) {
      ctx.strokeStyle = "#2ecc71";
      ctx.lineWidth = 2;
      ctx.strokeRect(p.x, p.y, p.w, p.h);
    }
    for (const entry of state.promptLog) {
      if (entry.kind === "point" && p) {
        const scale = p.w / this.patchSizeOf(state);
        ctx.fillStyle = entry.label === 1 ? "#2ecc71" : "#e74c3c";
        ctx.beginPath();
        ctx.arc(p.x + entry.c * scale, p.y + entry.r * scale, 4, 0, 2 * Math.PI);
        ctx.fill();
      } else if (entry.kind === "box" && p) {
        const scale = p.w / this.patchSizeOf(state);
        ctx.strokeStyle = "#f1c40f";
        ctx.lineWidth = 1.5;
        ctx.strokeRect(
          p.x + entry.c0 * scale,
          p.y + entry.r0 * scale,
          (entry.c1 - entry.c0) * scale,
          (entry.r1 - entry.r0) * scale,
        );
      }
    }
  }

  private patchSizeOf(_state: AnnotationState): number {
    return this.lastOverlay ? this.lastOverlay.height : this.patchSize();
  }

  private patchRect(state: AnnotationState, vp: Viewport) {
    const p = this.patchSizeOf(state);
    const view = this.viewState(state);
    const [x, y] = worldToScreen(view, vp, state.center[0] - p / 2, state.center[1] - p / 2);
    return { x, y, w: p * view.zoom, h: p * view.zoom };
  }

  private drawPane(canvas: HTMLCanvasElement, overlay: OverlayData | null, which: "hr" | "lr"): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    ctx.clearRect(0, 0, canvas.width, canvas.height);
    if (!overlay) return;
    const mask = which === "hr" ? overlay.maskHr : overlay.maskLr;
    const color = which === "hr" ? HR_COLOR : LR_COLOR;
    const rgba = maskToRgba(mask, color);
    const img = new ImageData(new Uint8ClampedArray(rgba), overlay.width, overlay.height);
    // draw mask at native resolution, then scale onto the pane
    const off = document.createElement("canvas");
    off.width = overlay.width;
    off.height = overlay.height;
    off.getContext("2d")!.putImageData(img, 0, 0);
    ctx.imageSmoothingEnabled = false;
    ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
    if (which === "lr") {
      // outline the HR footprint: central quarter of the LR world extent
      const f = overlay.footprint;
      ctx.strokeStyle = "#2ecc71";
      ctx.lineWidth = 2;
      ctx.strokeRect(
        f.v0 * canvas.width,
        f.u0 * canvas.height,
        (f.v1 - f.v0) * canvas.width,
        (f.u1 - f.u0) * canvas.height,
      );
    }
  }
}

export function createController(
  baseUrl: string,
  mainCanvas: HTMLCanvasElement,
  hrPane: HTMLCanvasElement,
  lrPane: HTMLCanvasElement,
  banner: HTMLElement,
  status: HTMLElement,
): AnnotatorController {
  const api = new ApiClient(baseUrl);
  const renderer = new CanvasRenderer(api, mainCanvas, hrPane, lrPane, banner, status);
  const controller = new AnnotatorController(api, renderer);
  renderer.patchSize = () => controller.patchSize;
  return controller;
}
