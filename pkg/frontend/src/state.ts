/**
 * Annotation state as a pure reducer over user actions.
 *
 * Prompts live in an append-only log; the effective prompt set (points +
 * at most one box, the latest drawn) is derived by folding the log, so
 * undo is exactly "pop one log entry" and replaying an action log always
 * reproduces the same rendered prompt set.
 */

import type { Extent, PredictResponse, PromptPayload } from "./api.js";

export type PromptEntry =
  | { kind: "point"; r: number; c: number; label: 0 | 1 }
  | { kind: "box"; r0: number; c0: number; r1: number; c1: number };

export interface AnnotationState {
  sessionId: string | null;
  levels: { level: number; height: number; width: number }[];
  center: [number, number]; // world (level-0) pixel coords of the patch center
  zoom: number; // display pixels per level-0 pixel
  promptLog: PromptEntry[];
  lastResponse: PredictResponse | null;
  error: string | null;
}

export type Action =
  | { type: "session"; id: string; levels: AnnotationState["levels"] }
  | { type: "add_point"; r: number; c: number; label: 0 | 1 }
  | { type: "set_box"; r0: number; c0: number; r1: number; c1: number }
  | { type: "undo" }
  | { type: "reset" }
  | { type: "pan"; center: [number, number] }
  | { type: "zoom"; zoom: number }
  | { type: "response"; response: PredictResponse }
  | { type: "clear_response" }
  | { type: "error"; message: string }
  | { type: "dismiss_error" };

export function initialState(): AnnotationState {
  return {
    sessionId: null,
    levels: [],
    center: [0, 0],
    zoom: 1,
    promptLog: [],
    lastResponse: null,
    error: null,
  };
}

export function reduce(state: AnnotationState, action: Action): AnnotationState {
  switch (action.type) {
    case "session":
      return {
        ...initialState(),
        sessionId: action.id,
        levels: action.levels,
        center: [Math.floor(action.levels[0].height / 2), Math.floor(action.levels[0].width / 2)],
        zoom: state.zoom,
      };
    case "add_point":
      return {
        ...state,
        promptLog: [...state.promptLog, { kind: "point", r: action.r, c: action.c, label: action.label }],
        error: null,
      };
    case "set_box": {
      if (action.r1 <= action.r0 || action.c1 <= action.c0) {
        return state; // degenerate drag: ignore entirely
      }
      return {
        ...state,
        promptLog: [
          ...state.promptLog,
          { kind: "box", r0: action.r0, c0: action.c0, r1: action.r1, c1: action.c1 },
        ],
        error: null,
      };
    }
    case "undo":
      return { ...state, promptLog: state.promptLog.slice(0, -1) };
    case "reset":
      return { ...state, promptLog: [], lastResponse: null };
    case "pan":
      return { ...state, center: action.center };
    case "zoom":
      return { ...state, zoom: action.zoom };
    case "response":
      return { ...state, lastResponse: action.response };
    case "clear_response":
      return { ...state, lastResponse: null };
    case "error":
      return { ...state, error: action.message };
    case "dismiss_error":
      return { ...state, error: null };
  }
}

/** Effective prompt set: all points, plus the most recent box if any. */
export function effectivePrompts(log: PromptEntry[]): PromptPayload {
  const points: [number, number][] = [];
  const labels: number[] = [];
  let box: [number, number, number, number] | undefined;
  for (const entry of log) {
    if (entry.kind === "point") {
      points.push([entry.r, entry.c]);
      labels.push(entry.label);
    } else {
      box = [entry.r0, entry.c0, entry.r1, entry.c1];
    }
  }
  const payload: PromptPayload = {};
  if (points.length) {
    payload.points = points;
    payload.labels = labels;
  }
  if (box) payload.box = box;
  return payload;
}

export function hasPrompts(log: PromptEntry[]): boolean {
  return log.length > 0;
}

/** The HR patch footprint sits in the central quarter of the LR extent. */
export function hrFootprintWithinLr(hr: Extent, lr: Extent): { u0: number; v0: number; u1: number; v1: number } {
  const h = lr.r1 - lr.r0;
  const w = lr.c1 - lr.c0;
  return {
    u0: (hr.r0 - lr.r0) / h,
    v0: (hr.c0 - lr.c0) / w,
    u1: (hr.r1 - lr.r0) / h,
    v1: (hr.c1 - lr.c0) / w,
  };
}
