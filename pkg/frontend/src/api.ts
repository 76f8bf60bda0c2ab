/** Thin typed client over the session service's HTTP + event stream. */

import type { AdvanceAck, ForceAck, StateDto, TrajectoryDto } from "./types";

export class ServiceUnreachable extends Error {
  constructor(cause: unknown) {
    super(`session service unreachable: ${String(cause)}`);
    this.name = "ServiceUnreachable";
  }
}

export class ServiceRejected extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceRejected";
  }
}

export class ServiceBusy extends ServiceRejected {
  constructor(message: string) {
    super(409, "busy", message);
    this.name = "ServiceBusy";
  }
}

async function request<T>(
  fetchFn: typeof fetch,
  url: string,
  init?: RequestInit,
): Promise<T> {
  let resp: Response;
  try {
    resp = await fetchFn(url, init);
  } catch (cause) {
    throw new ServiceUnreachable(cause);
  }
  const body = await resp.json().catch(() => ({}));
  if (!resp.ok) {
    const err = (body as { error?: { kind?: string; message?: string } })
      .error ?? {};
    const kind = err.kind ?? "error";
    const message = err.message ?? `HTTP ${resp.status}`;
    if (resp.status === 409) throw new ServiceBusy(message);
    throw new ServiceRejected(resp.status, kind, message);
  }
  return body as T;
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch.bind(globalThis),
  ) {}

  getState(): Promise<StateDto> {
    return request<StateDto>(this.fetchFn, `${this.baseUrl}/state`);
  }

  postForce(t: number, fx: number, fy: number): Promise<ForceAck> {
    return request<ForceAck>(this.fetchFn, `${this.baseUrl}/force`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ t, fx, fy }),
    });
  }

  advance(): Promise<AdvanceAck> {
    return request<AdvanceAck>(this.fetchFn, `${this.baseUrl}/advance`, {
      method: "POST",
    });
  }

  reset(): Promise<{ version: number; iteration: number }> {
    return request(this.fetchFn, `${this.baseUrl}/reset`, { method: "POST" });
  }

  getReplay(episode: number): Promise<{ episode: number; actual: TrajectoryDto }> {
    return request(this.fetchFn, `${this.baseUrl}/replay?episode=${episode}`);
  }

  /**
   * Subscribe to the version stream; onVersion fires for every data event.
   * Returns an unsubscribe function. Uses EventSource when the host
   * provides one, else falls back to polling /state.
   */
  subscribe(onVersion: (version: number) => void, pollMs = 2000): () => void {
    const EventSourceCtor = (
      globalThis as { EventSource?: typeof EventSource }
    ).EventSource;
    if (EventSourceCtor) {
      const source = new EventSourceCtor(`${this.baseUrl}/events`);
      source.onmessage = (ev) => {
        try {
          const payload = JSON.parse(ev.data as string) as { version?: number };
          if (typeof payload.version === "number") onVersion(payload.version);
        } catch {
          /* keepalives and malformed frames are ignored */
        }
      };
      return () => source.close();
    }
    const timer = setInterval(() => {
      this.getState().then(
        (state) => onVersion(state.version),
        () => undefined,
      );
    }, pollMs);
    return () => clearInterval(timer);
  }
}
