import { describe, expect, it } from "vitest";

import { PredictScheduler } from "../src/scheduler.js";

interface Req {
  n: number;
}

function deferred<T>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe("predict scheduler", () => {
  it("sends immediately when idle", async () => {
    const sent: Req[] = [];
    const s = new PredictScheduler<Req, string>(
      async (r) => {
        sent.push(r);
        return "ok";
      },
      () => {},
      () => {},
    );
    s.submit({ n: 1 });
    await s.idle();
    expect(sent).toEqual([{ n: 1 }]);
  });

  it("coalesces a burst into exactly one follow-up with the last request", async () => {
    const sent: Req[] = [];
    const gates: ReturnType<typeof deferred<string>>[] = [];
    const s = new PredictScheduler<Req, string>(
      (r) => {
        sent.push(r);
        const gate = deferred<string>();
        gates.push(gate);
        return gate.promise;
      },
      () => {},
      () => {},
    );
    s.submit({ n: 1 }); // goes out
    s.submit({ n: 2 }); // queued
    s.submit({ n: 3 }); // replaces the queued one
    s.submit({ n: 4 }); // replaces again
    expect(sent).toEqual([{ n: 1 }]);
    gates[0].resolve("ok");
    await new Promise((r) => setTimeout(r, 0));
    expect(sent).toEqual([{ n: 1 }, { n: 4 }]);
    gates[1].resolve("ok");
    await s.idle();
    expect(sent).toEqual([{ n: 1 }, { n: 4 }]);
  });

  it("reports errors and keeps serving afterwards", async () => {
    const errors: unknown[] = [];
    const results: string[] = [];
    let fail = true;
    const s = new PredictScheduler<Req, string>(
      async () => {
        if (fail) {
          fail = false;
          throw new Error("server said no");
        }
        return "ok";
      },
      (_r, resp) => results.push(resp),
      (e) => errors.push(e),
    );
    s.submit({ n: 1 });
    await s.idle();
    expect(errors).toHaveLength(1);
    s.submit({ n: 2 });
    await s.idle();
    expect(results).toEqual(["ok"]);
  });

  it("busy flag reflects in-flight and queued work", async () => {
    const gate = deferred<string>();
    const s = new PredictScheduler<Req, string>(
      () => gate.promise,
      () => {},
      () => {},
    );
    expect(s.busy).toBe(false);
    s.submit({ n: 1 });
    expect(s.busy).toBe(true);
    gate.resolve("ok");
    await s.idle();
    expect(s.busy).toBe(false);
  });
});
