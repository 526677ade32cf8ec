/**
 * Keeps at most one predict request in flight. Requests submitted while
 * one is flying replace any queued request, so a burst of clicks yields
 * exactly one follow-up carrying the final accumulated prompt set.
 */

export class PredictScheduler<Req, Resp> {
  private inflight = false;
  private pending: Req | null = null;
  private idleResolvers: (() => void)[] = [];

  constructor(
    private send: (req: Req) => Promise<Resp>,
    private onResult: (req: Req, resp: Resp) => void,
    private onError: (err: unknown) => void,
  ) {}

  submit(req: Req): void {
    if (this.inflight) {
      this.pending = req;
      return;
    }
    void this.fire(req);
  }

  get busy(): boolean {
    return this.inflight || this.pending !== null;
  }

  /** Resolves once no request is in flight and none is queued. */
  idle(): Promise<void> {
    if (!this.busy) return Promise.resolve();
    return new Promise((resolve) => this.idleResolvers.push(resolve));
  }

  private async fire(req: Req): Promise<void> {
    this.inflight = true;
    try {
      const resp = await this.send(req);
      this.onResult(req, resp);
    } catch (err) {
      this.onError(err);
    } finally {
      this.inflight = false;
      const next = this.pending;
      this.pending = null;
      if (next !== null) {
        void this.fire(next);
      } else {
        for (const resolve of this.idleResolvers.splice(0)) resolve();
      }
    }
  }
}
