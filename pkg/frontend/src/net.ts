/** Debounced re-planning with last-write-wins reconciliation.
 *
 * Every authoring mutation calls schedule() with the full request body.
 * Requests are debounced (150 ms default), at most one is in flight at a
 * time, and responses are keyed by a monotonically increasing edit counter
 * so a stale reply can never overwrite a newer overlay.
 */

export const DEBOUNCE_MS = 150;

export class Replanner<TBody, TResp> {
  private editCounter = 0;
  private delivered = 0;
  private pendingBody: TBody | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private inFlight = false;

  constructor(
    private readonly post: (body: TBody) => Promise<TResp>,
    private readonly onResult: (resp: TResp, edit: number) => void,
    private readonly onError: (err: unknown, edit: number) => void = () => {},
    private readonly debounceMs: number = DEBOUNCE_MS,
  ) {}

  /** Record a mutation; the request fires after the debounce window. */
  schedule(body: TBody): number {
    this.editCounter += 1;
    this.pendingBody = body;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => {
      this.timer = null;
      this.flush();
    }, this.debounceMs);
    return this.editCounter;
  }

  /** Latest edit the UI has been shown a response for. */
  get acknowledged(): number {
    return this.delivered;
  }

  get hasInFlight(): boolean {
    return this.inFlight;
  }

  private flush(): void {
    if (this.inFlight || this.pendingBody === null) return;
    const edit = this.editCounter;
    const body = this.pendingBody;
    this.pendingBody = null;
    this.inFlight = true;
    this.post(body).then(
      (resp) => this.settle(edit, () => this.onResult(resp, edit)),
      (err) => this.settle(edit, () => this.onError(err, edit)),
    );
  }

  private settle(edit: number, deliver: () => void): void {
    this.inFlight = false;
    if (edit > this.delivered) {
      this.delivered = edit;
      deliver();
    }
    // Mutations that arrived mid-flight re-send immediately with the
    // newest body; the debounce already happened for them.
    if (this.pendingBody !== null) this.flush();
  }
}
