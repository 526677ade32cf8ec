/**
 * Wires user actions to the reducer, the predict scheduler, and a
 * renderer. The renderer is an interface so the whole interaction loop
 * runs headless in tests.
 */

import { ApiClient, PredictRequest, PredictResponse, SyntheticSpec } from "./api.js";
import { OverlayData, overlayFromResponse } from "./overlay.js";
import { PredictScheduler } from "./scheduler.js";
import {
  Action,
  AnnotationState,
  PromptEntry,
  effectivePrompts,
  hasPrompts,
  initialState,
  reduce,
} from "./state.js";
import { snapCenter } from "./viewer.js";

export interface Renderer {
  renderState(state: AnnotationState): void;
  renderOverlay(overlay: OverlayData | null): void;
  showError(message: string | null): void;
}

export class AnnotatorController {
  state: AnnotationState = initialState();
  patchSize = 64;
  private scheduler: PredictScheduler<PredictRequest, PredictResponse>;
  private confirmedLog: PromptEntry[] = [];

  constructor(
    private api: ApiClient,
    private renderer: Renderer,
  ) {
    this.scheduler = new PredictScheduler(
      (req) => {
        if (!this.state.sessionId) return Promise.reject(new Error("no session"));
        return this.api.predict(this.state.sessionId, req);
      },
      (_req, resp) => {
        this.confirmedLog = this.state.promptLog;
        this.dispatch({ type: "response", response: resp });
        this.renderer.renderOverlay(overlayFromResponse(resp));
      },
      (err) => {
        // roll back to the last server-confirmed prompt set
        this.state = { ...this.state, promptLog: this.confirmedLog };
        this.dispatch({ type: "error", message: String(err) });
      },
    );
  }

  dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.renderer.renderState(this.state);
    this.renderer.showError(this.state.error);
  }

  async createSession(spec: SyntheticSpec): Promise<void> {
    const health = await this.api.health();
    this.patchSize = health.patch_size;
    const info = await this.api.createSyntheticSession(spec);
    this.confirmedLog = [];
    this.dispatch({ type: "session", id: info.id, levels: info.levels });
    this.renderer.renderOverlay(null);
  }

  /** World-coordinate click. The first prompt anchors the patch center. */
  clickPoint(worldR: number, worldC: number, label: 0 | 1): void {
    if (!this.state.sessionId) return;
    if (!hasPrompts(this.state.promptLog)) {
      const [r, c] = snapCenter(worldR, worldC, this.patchSize, this.state.levels[0]);
      this.dispatch({ type: "pan", center: [r, c] });
    }
    const patch = this.worldToPatch(worldR, worldC);
    if (!patch) {
      this.dispatch({ type: "error", message: "click inside the active patch (or reset first)" });
      return;
    }
    this.dispatch({ type: "add_point", r: patch[0], c: patch[1], label });
    this.submitPrompts();
  }

  /** World-coordinate drag rectangle; replaces any previous box. */
  dragBox(r0: number, c0: number, r1: number, c1: number): void {
    if (!this.state.sessionId) return;
    const rLo = Math.min(r0, r1);
    const rHi = Math.max(r0, r1);
    const cLo = Math.min(c0, c1);
    const cHi = Math.max(c0, c1);
    if (rHi - rLo < 1 || cHi - cLo < 1) {
      return; // degenerate drag: no state change, no request
    }
    if (!hasPrompts(this.state.promptLog)) {
      const [r, c] = snapCenter((rLo + rHi) / 2, (cLo + cHi) / 2, this.patchSize, this.state.levels[0]);
      this.dispatch({ type: "pan", center: [r, c] });
    }
    const a = this.worldToPatch(rLo, cLo, true);
    const b = this.worldToPatch(rHi, cHi, true);
    if (!a || !b || b[0] <= a[0] || b[1] <= a[1]) {
      this.dispatch({ type: "error", message: "box does not overlap the active patch" });
      return;
    }
    this.dispatch({ type: "set_box", r0: a[0], c0: a[1], r1: b[0], c1: b[1] });
    this.submitPrompts();
  }

  undo(): void {
    if (!this.state.promptLog.length) return;
    this.dispatch({ type: "undo" });
    if (hasPrompts(this.state.promptLog)) {
      this.submitPrompts();
    } else {
      this.confirmedLog = [];
      this.dispatch({ type: "clear_response" });
      this.renderer.renderOverlay(null);
    }
  }

  reset(): void {
    this.confirmedLog = [];
    this.dispatch({ type: "reset" });
    this.renderer.renderOverlay(null);
  }

  idle(): Promise<void> {
    return this.scheduler.idle();
  }

  private worldToPatch(worldR: number, worldC: number, clip = false): [number, number] | null {
    const p = this.patchSize;
    const r = Math.round(worldR - this.state.center[0] + p / 2);
    const c = Math.round(worldC - this.state.center[1] + p / 2);
    if (clip) {
      return [Math.min(Math.max(r, 0), p), Math.min(Math.max(c, 0), p)];
    }
    if (r < 0 || r >= p || c < 0 || c >= p) return null;
    return [r, c];
  }

  private submitPrompts(): void {
    this.scheduler.submit({
      center_world: this.state.center,
      patch_size: this.patchSize,
      hr_level: 0,
      prompts: effectivePrompts(this.state.promptLog),
    });
  }
}
