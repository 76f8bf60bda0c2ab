import { afterEach, describe, expect, it, vi } from "vitest";

import {
  ApiClient,
  ServiceBusy,
  ServiceRejected,
  ServiceUnreachable,
} from "../src/api";
import { FakeService } from "./fake_service";

function client(fake: FakeService): ApiClient {
  return new ApiClient("http://svc", fake.fetch);
}

afterEach(() => {
  vi.unstubAllGlobals();
  vi.useRealTimers();
});

describe("ApiClient requests", () => {
  it("fetches and parses the state snapshot", async () => {
    const fake = new FakeService();
    const state = await client(fake).getState();
    expect(state.scenario).toBe("fake-scenario");
    expect(state.iteration).toBe(0);
    expect(state.preference).toBeNull();
    expect(fake.requests).toEqual([
      { method: "GET", path: "/state", body: undefined },
    ]);
  });

  it("posts forces as JSON {t, fx, fy} and returns the ack", async () => {
    const fake = new FakeService();
    const ack = await client(fake).postForce(2.0, 15, 0);
    expect(ack).toEqual({ pending: 1, magnitude: 15, clears_threshold: true });
    expect(fake.requests[0]).toEqual({
      method: "POST",
      path: "/force",
      body: { t: 2.0, fx: 15, fy: 0 },
    });
  });

  it("advances and resets through POST endpoints", async () => {
    const fake = new FakeService();
    const ack = await client(fake).advance();
    expect(ack.iteration).toBe(1);
    const reset = await client(fake).reset();
    expect(reset.iteration).toBe(0);
    expect(fake.requests.map((r) => `${r.method} ${r.path}`)).toEqual([
      "POST /advance",
      "POST /reset",
    ]);
  });

  it("fetches a replay by episode", async () => {
    const fake = new FakeService();
    const replay = await client(fake).getReplay(1);
    expect(replay.episode).toBe(1);
    expect(replay.actual.points.length).toBeGreaterThan(0);
  });
});

describe("ApiClient errors", () => {
  it("maps 409 to ServiceBusy (a ServiceRejected subtype)", async () => {
    const fake = new FakeService();
    fake.busyOnce = true;
    const err = await client(fake).advance().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceBusy);
    expect(err).toBeInstanceOf(ServiceRejected);
    expect((err as ServiceBusy).status).toBe(409);
  });

  it("preserves the service's error kind and message on 4xx", async () => {
    const fake = new FakeService();
    const err = await client(fake)
      .postForce(99, 1, 1)
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceRejected);
    const rejected = err as ServiceRejected;
    expect(rejected.status).toBe(422);
    expect(rejected.kind).toBe("out_of_range");
    expect(rejected.message).toContain("[0, 10]");
  });

  it("wraps a thrown fetch in ServiceUnreachable", async () => {
    const fake = new FakeService();
    fake.down = true;
    const err = await client(fake).getState().catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ServiceUnreachable);
  });
});

describe("ApiClient.subscribe", () => {
  it("delivers versions from the event stream when EventSource exists", () => {
    const instances: FakeEventSource[] = [];
    class FakeEventSource {
      onmessage: ((ev: { data: string }) => void) | null = null;
      closed = false;
      constructor(readonly url: string) {
        instances.push(this);
      }
      close(): void {
        this.closed = true;
      }
    }
    vi.stubGlobal("EventSource", FakeEventSource);

    const versions: number[] = [];
    const unsubscribe = client(new FakeService()).subscribe((v) =>
      versions.push(v),
    );
    expect(instances.length).toBe(1);
    expect(instances[0]!.url).toBe("http://svc/events");

    instances[0]!.onmessage!({ data: '{"version": 7}' });
    instances[0]!.onmessage!({ data: "not json" });
    instances[0]!.onmessage!({ data: '{"other": 1}' });
    instances[0]!.onmessage!({ data: '{"version": 8}' });
    expect(versions).toEqual([7, 8]);

    unsubscribe();
    expect(instances[0]!.closed).toBe(true);
  });

  it("falls back to polling /state when EventSource is absent", async () => {
    vi.stubGlobal("EventSource", undefined);
    vi.useFakeTimers();
    const fake = new FakeService();
    const versions: number[] = [];
    const unsubscribe = client(fake).subscribe((v) => versions.push(v), 10);

    await vi.advanceTimersByTimeAsync(25);
    expect(versions.length).toBeGreaterThanOrEqual(2);
    expect(versions[0]).toBe(fake.version);

    unsubscribe();
    const seen = versions.length;
    await vi.advanceTimersByTimeAsync(50);
    expect(versions.length).toBe(seen);
  });
});
