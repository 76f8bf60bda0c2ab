/**
 * Scripted browser tests for the mounted console, driven end to end
 * through DOM events against a contract-faithful fake service. The
 * headline flow: drag a 15 N force at replay time 2.0 s, advance the
 * iteration, and observe the via-point at 2.05 s in the rendered state.
 */

import { afterEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { ConsoleApp, mountConsole } from "../src/app";
import { FakeService } from "./fake_service";

const mounted: ConsoleApp[] = [];

afterEach(() => {
  for (const app of mounted.splice(0)) app.dispose();
  document.body.innerHTML = "";
});

async function flush(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
  await new Promise((resolve) => setTimeout(resolve, 0));
}

interface Mounted {
  app: ConsoleApp;
  root: HTMLElement;
  /** The version callback the app registered with subscribe(). */
  versionCb: () => ((v: number) => void) | null;
}

async function mount(fake: FakeService): Promise<Mounted> {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const client = new ApiClient("http://svc", fake.fetch);
  let captured: ((v: number) => void) | null = null;
  client.subscribe = (cb) => {
    captured = cb;
    return () => {
      captured = null;
    };
  };
  const app = mountConsole(root, client);
  mounted.push(app);
  await app.start();
  await flush();
  return { app, root, versionCb: () => captured };
}

function firePointer(target: Element, type: string, x: number, y: number): void {
  const win = window as unknown as { PointerEvent?: typeof MouseEvent };
  const Ctor = win.PointerEvent ?? MouseEvent;
  target.dispatchEvent(new Ctor(type, { clientX: x, clientY: y, bubbles: true }));
}

function q<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const found = root.querySelector<T>(selector);
  if (!found) throw new Error(`missing ${selector}`);
  return found;
}

function scrubTo(root: HTMLElement, t: number): void {
  const scrub = q<HTMLInputElement>(root, "#scrub");
  scrub.value = String(t);
  scrub.dispatchEvent(new Event("input", { bubbles: true }));
}

describe("scripted console session", () => {
  it("drags a 15 N force at t = 2.0 s, advances, and shows the via-point at 2.05 s", async () => {
    const fake = new FakeService();
    const { app, root } = await mount(fake);
    expect(app.state?.iteration).toBe(0);
    expect(app.viewModel?.vias).toEqual([]);

    // Scrub the replay clock to 2.0 s; forces are stamped at replay time.
    scrubTo(root, 2.0);
    expect(app.transport.time).toBe(2);

    // Drag 60 px across the canvas: 60 px * 0.25 N/px = 15 N.
    const canvas = q<HTMLCanvasElement>(root, "#court");
    firePointer(canvas, "pointerdown", 100, 200);
    firePointer(canvas, "pointermove", 160, 200);
    const readout = q(root, "#drag-readout");
    expect(readout.textContent).toContain("15.0 N");
    expect(readout.textContent).toContain("2.00 s");
    firePointer(canvas, "pointerup", 160, 200);
    await flush();

    // The console posted exactly the dragged force, stamped at 2.0 s.
    const post = fake.requests.find((r) => r.path === "/force");
    expect(post?.method).toBe("POST");
    const body = post?.body as { t: number; fx: number; fy: number };
    expect(body.t).toBe(2);
    const magnitude = Math.hypot(body.fx, body.fy);
    expect(Math.abs(magnitude - 15) / 15).toBeLessThan(0.01);
    expect(readout.textContent).toContain("queued 15.0 N at 2.00 s");
    expect(readout.textContent).toContain("clears the threshold");
    expect(q(root, "#pending").textContent).toBe("pending forces: 1");

    // Advance the iteration.
    q<HTMLButtonElement>(root, "#advance").click();
    await flush();
    expect(app.state?.iteration).toBe(1);
    expect(q(root, "#status").textContent).toBe("iteration 1 of 4");

    // The rendered state carries the via-point at 2.05 s: in the view
    // model the painter draws from...
    const vias = app.viewModel?.vias ?? [];
    expect(vias.length).toBe(1);
    const marker = vias[0]!;
    expect(Math.abs(marker.t - 2.05)).toBeLessThan(1e-9);
    expect(marker.iteration).toBe(1);
    expect(marker.x).toBeGreaterThan(0);
    expect(marker.x).toBeLessThan(720);
    expect(marker.y).toBeGreaterThan(0);
    expect(marker.y).toBeLessThan(520);
    // ...and in the via-point panel.
    const item = root.querySelector('#vias li[data-t="2.05"]');
    expect(item).not.toBeNull();
    expect(item?.textContent).toContain("iteration 1 @ 2.05 s");
    // The queued force was consumed by the advance.
    expect(q(root, "#pending").textContent).toBe("pending forces: 0");
  });

  it("advancing without a drag runs an eventless iteration: no vias, band appears", async () => {
    const fake = new FakeService();
    const { app, root } = await mount(fake);
    expect(app.viewModel?.band).toBeNull();

    q<HTMLButtonElement>(root, "#advance").click();
    await flush();

    expect(app.state?.iteration).toBe(1);
    expect(app.viewModel?.vias).toEqual([]);
    expect(root.querySelectorAll("#vias li").length).toBe(0);
    // The first advance publishes the preference band.
    expect(app.viewModel?.band).not.toBeNull();
    expect(app.viewModel?.preferenceMean).not.toBeNull();
  });

  it("acknowledges a sub-threshold drag without creating a via", async () => {
    const fake = new FakeService();
    const { app, root } = await mount(fake);
    scrubTo(root, 3.0);

    // 20 px = 5 N, below the 10 N threshold.
    const canvas = q<HTMLCanvasElement>(root, "#court");
    firePointer(canvas, "pointerdown", 100, 200);
    firePointer(canvas, "pointermove", 120, 200);
    expect(q(root, "#drag-readout").textContent).toContain("below 10 N");
    firePointer(canvas, "pointerup", 120, 200);
    await flush();

    expect(q(root, "#drag-readout").textContent).toContain("below the threshold");
    q<HTMLButtonElement>(root, "#advance").click();
    await flush();
    expect(app.viewModel?.vias).toEqual([]);
  });

  it("renders one metrics row per iteration with decreasing corrective effort", async () => {
    const fake = new FakeService();
    const { root } = await mount(fake);
    q<HTMLButtonElement>(root, "#advance").click();
    await flush();
    q<HTMLButtonElement>(root, "#advance").click();
    await flush();

    const rows = [...root.querySelectorAll("#metrics tbody tr")];
    expect(rows.length).toBe(3);
    const iterations = rows.map((r) => r.getAttribute("data-iteration"));
    expect(iterations).toEqual(["0", "1", "2"]);
    const m1 = rows.map((r) =>
      Number(r.querySelectorAll("td")[1]?.textContent),
    );
    expect(m1[1]).toBeLessThan(m1[0]!);
    expect(m1[2]).toBeLessThan(m1[1]!);
  });

  it("keeps the advance button disabled on 409 until the stream reports a new version", async () => {
    const fake = new FakeService();
    const { app, root, versionCb } = await mount(fake);
    const button = q<HTMLButtonElement>(root, "#advance");

    fake.busyOnce = true;
    button.click();
    await flush();
    expect(button.disabled).toBe(true);
    expect(button.textContent).toBe("busy elsewhere…");

    // The other session finishes its advance; the stream announces it.
    await new ApiClient("http://svc", fake.fetch).advance();
    versionCb()?.(fake.version);
    await flush();

    expect(button.disabled).toBe(false);
    expect(button.textContent).toBe("advance iteration");
    expect(app.state?.iteration).toBe(1);
  });

  it("shows the unreachable banner and recovers on retry", async () => {
    const fake = new FakeService();
    fake.down = true;
    const { root } = await mount(fake);
    const banner = q(root, "#banner");
    expect(banner.hidden).toBe(false);
    expect(q(root, "#banner-message").textContent).toContain("unreachable");

    fake.down = false;
    q<HTMLButtonElement>(root, "#retry").click();
    await flush();
    expect(banner.hidden).toBe(true);
    expect(q(root, "#scenario").textContent).toBe("fake-scenario");
  });

  it("reset returns the console to the bootstrap picture", async () => {
    const fake = new FakeService();
    const { app, root } = await mount(fake);
    scrubTo(root, 2.0);
    const canvas = q<HTMLCanvasElement>(root, "#court");
    firePointer(canvas, "pointerdown", 0, 0);
    firePointer(canvas, "pointerup", 60, 0);
    await flush();
    q<HTMLButtonElement>(root, "#advance").click();
    await flush();
    expect(root.querySelectorAll("#vias li").length).toBe(1);

    q<HTMLButtonElement>(root, "#reset").click();
    await flush();
    expect(app.state?.iteration).toBe(0);
    expect(root.querySelectorAll("#vias li").length).toBe(0);
    expect(app.viewModel?.band).toBeNull();
    expect(root.querySelectorAll("#metrics tbody tr").length).toBe(1);
  });

  it("offers every recorded episode and switches the replay source", async () => {
    const fake = new FakeService();
    const { app, root } = await mount(fake);
    const select = q<HTMLSelectElement>(root, "#episode");
    expect(select.querySelectorAll("option").length).toBe(2);

    select.value = "1";
    select.dispatchEvent(new Event("change", { bubbles: true }));
    expect(app.episode).toBe(1);
  });

  it("toggles replay playback from the transport button", async () => {
    const fake = new FakeService();
    const { app, root } = await mount(fake);
    const button = q<HTMLButtonElement>(root, "#playpause");
    expect(app.transport.playing).toBe(false);
    button.click();
    expect(app.transport.playing).toBe(true);
    expect(button.textContent).toBe("pause");
    button.click();
    expect(app.transport.playing).toBe(false);
  });

  it("a second console mounted on the same service renders the same picture", async () => {
    const fake = new FakeService();
    const first = await mount(fake);
    scrubTo(first.root, 2.0);
    const canvas = q<HTMLCanvasElement>(first.root, "#court");
    firePointer(canvas, "pointerdown", 0, 0);
    firePointer(canvas, "pointerup", 60, 0);
    await flush();
    q<HTMLButtonElement>(first.root, "#advance").click();
    await flush();

    // A fresh mount holds no session truth of its own: its rendered state
    // converges to the same snapshot.
    const second = await mount(fake);
    expect(second.app.viewModel).toEqual(first.app.viewModel);
    expect(second.root.querySelector("#vias")?.innerHTML).toBe(
      first.root.querySelector("#vias")?.innerHTML,
    );
  });
});
