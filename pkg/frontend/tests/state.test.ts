import { describe, expect, it } from "vitest";

import {
  Action,
  effectivePrompts,
  hrFootprintWithinLr,
  initialState,
  reduce,
} from "../src/state.js";

const session: Action = {
  type: "session",
  id: "s1",
  levels: [
    { level: 0, height: 256, width: 256 },
    { level: 1, height: 128, width: 128 },
  ],
};

function replay(actions: Action[]) {
  return actions.reduce(reduce, initialState());
}

describe("annotation state reducer", () => {
  it("first click produces exactly one point", () => {
    const state = replay([session, { type: "add_point", r: 10, c: 12, label: 1 }]);
    expect(effectivePrompts(state.promptLog)).toEqual({ points: [[10, 12]], labels: [1] });
  });

  it("click then undo restores the previous prompt set", () => {
    const before = replay([session, { type: "add_point", r: 1, c: 1, label: 1 }]);
    const after = replay([
      session,
      { type: "add_point", r: 1, c: 1, label: 1 },
      { type: "add_point", r: 2, c: 2, label: 0 },
      { type: "undo" },
    ]);
    expect(effectivePrompts(after.promptLog)).toEqual(effectivePrompts(before.promptLog));
  });

  it("three clicks accumulate three points in order", () => {
    const state = replay([
      session,
      { type: "add_point", r: 1, c: 1, label: 1 },
      { type: "add_point", r: 2, c: 2, label: 1 },
      { type: "add_point", r: 3, c: 3, label: 0 },
    ]);
    expect(effectivePrompts(state.promptLog).points).toEqual([
      [1, 1],
      [2, 2],
      [3, 3],
    ]);
    expect(effectivePrompts(state.promptLog).labels).toEqual([1, 1, 0]);
  });

  it("redrawing the box keeps exactly one box", () => {
    const state = replay([
      session,
      { type: "set_box", r0: 0, c0: 0, r1: 10, c1: 10 },
      { type: "set_box", r0: 5, c0: 5, r1: 20, c1: 22 },
    ]);
    expect(effectivePrompts(state.promptLog).box).toEqual([5, 5, 20, 22]);
  });

  it("undo after box redraw restores the earlier box", () => {
    const state = replay([
      session,
      { type: "set_box", r0: 0, c0: 0, r1: 10, c1: 10 },
      { type: "set_box", r0: 5, c0: 5, r1: 20, c1: 22 },
      { type: "undo" },
    ]);
    expect(effectivePrompts(state.promptLog).box).toEqual([0, 0, 10, 10]);
  });

  it("degenerate zero-area box is ignored entirely", () => {
    const state = replay([session, { type: "set_box", r0: 4, c0: 4, r1: 4, c1: 9 }]);
    expect(state.promptLog).toHaveLength(0);
  });

  it("box plus points carry both prompt kinds", () => {
    const state = replay([
      session,
      { type: "set_box", r0: 0, c0: 0, r1: 10, c1: 10 },
      { type: "add_point", r: 3, c: 3, label: 1 },
      { type: "add_point", r: 6, c: 6, label: 1 },
    ]);
    const prompts = effectivePrompts(state.promptLog);
    expect(prompts.box).toEqual([0, 0, 10, 10]);
    expect(prompts.points).toHaveLength(2);
  });

  it("replaying an action log reproduces the final prompt set", () => {
    const log: Action[] = [
      session,
      { type: "add_point", r: 1, c: 1, label: 1 },
      { type: "set_box", r0: 0, c0: 0, r1: 30, c1: 30 },
      { type: "add_point", r: 9, c: 9, label: 0 },
      { type: "undo" },
      { type: "add_point", r: 7, c: 7, label: 1 },
    ];
    const a = replay(log);
    const b = replay(log);
    expect(effectivePrompts(a.promptLog)).toEqual(effectivePrompts(b.promptLog));
    expect(a.promptLog).toEqual(b.promptLog);
  });

  it("reset clears prompts and the last response", () => {
    const state = replay([
      session,
      { type: "add_point", r: 1, c: 1, label: 1 },
      { type: "reset" },
    ]);
    expect(state.promptLog).toHaveLength(0);
    expect(state.lastResponse).toBeNull();
  });

  it("error banner is dismissible and does not change prompts", () => {
    const state = replay([
      session,
      { type: "add_point", r: 1, c: 1, label: 1 },
      { type: "error", message: "boom" },
    ]);
    expect(state.error).toBe("boom");
    expect(state.promptLog).toHaveLength(1);
    const cleared = reduce(state, { type: "dismiss_error" });
    expect(cleared.error).toBeNull();
  });
});

describe("overlay geometry", () => {
  it("HR footprint sits in the central quarter of the LR extent", () => {
    const hr = { r0: 96, c0: 96, r1: 160, c1: 160 };
    const lr = { r0: 64, c0: 64, r1: 192, c1: 192 };
    expect(hrFootprintWithinLr(hr, lr)).toEqual({ u0: 0.25, v0: 0.25, u1: 0.75, v1: 0.75 });
  });
});
