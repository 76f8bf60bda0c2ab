/**
 * DOM wiring for the session console.
 *
 * The console is stateless with respect to the session: every view is
 * rebuilt from the most recent `/state` snapshot, so a page reload (or a
 * second browser) always converges to the same picture.  The only local
 * state is ephemeral UI state: the replay clock, an in-progress drag, and
 * the selected episode.
 */

import {
  ApiClient,
  ServiceBusy,
  ServiceRejected,
  ServiceUnreachable,
} from "./api";
import { dragLabel, dragToForce, type DragForce } from "./drag";
import { paint, type Overlays } from "./render";
import { ReplayTransport, positionAt } from "./replay";
import type { StateDto } from "./types";
import { buildViewModel, worldToScreen, type ViewModel } from "./view";

const CANVAS_WIDTH = 720;
const CANVAS_HEIGHT = 520;

interface DragState {
  startX: number;
  startY: number;
  currentX: number;
  currentY: number;
  /** Replay time captured when the drag began; the force is stamped here. */
  time: number;
}

const TEMPLATE = `
<header class="topbar">
  <strong id="scenario">—</strong>
  <span id="status">connecting…</span>
</header>
<div id="banner" hidden>
  <span id="banner-message"></span>
  <button id="retry" type="button">retry</button>
</div>
<div class="layout">
  <canvas id="court" width="${CANVAS_WIDTH}" height="${CANVAS_HEIGHT}"></canvas>
  <aside class="panel">
    <section class="controls">
      <button id="playpause" type="button">play</button>
      <input id="scrub" type="range" min="0" max="10" step="0.01" value="0" />
      <span id="clock">0.00 s</span>
    </section>
    <section class="controls">
      <label>episode
        <select id="episode"></select>
      </label>
      <button id="advance" type="button">advance iteration</button>
      <button id="reset" type="button">reset</button>
    </section>
    <p id="drag-readout">drag on the canvas to queue a corrective force</p>
    <p id="pending">pending forces: 0</p>
    <section>
      <h2>metrics</h2>
      <table id="metrics">
        <thead>
          <tr><th>iter</th><th>M1 (N)</th><th>M2</th><th>track RMS (m)</th></tr>
        </thead>
        <tbody></tbody>
      </table>
    </section>
    <section>
      <h2>via-points</h2>
      <ul id="vias"></ul>
    </section>
  </aside>
</div>
`;

function el<T extends HTMLElement>(root: HTMLElement, selector: string): T {
  const found = root.querySelector<T>(selector);
  if (!found) throw new Error(`console template is missing ${selector}`);
  return found;
}

export class ConsoleApp {
  readonly root: HTMLElement;
  readonly client: ApiClient;

  state: StateDto | null = null;
  model: ViewModel | null = null;
  transport: ReplayTransport;
  episode = 0;
  drag: DragState | null = null;
  lastForce: DragForce | null = null;

  private canvas: HTMLCanvasElement;
  private unsubscribe: (() => void) | null = null;
  private rafHandle: number | null = null;
  private lastFrameMs: number | null = null;
  private waitingForVersion = false;
  private disposed = false;

  constructor(root: HTMLElement, client: ApiClient) {
    this.root = root;
    this.client = client;
    root.innerHTML = TEMPLATE;
    this.canvas = el<HTMLCanvasElement>(root, "#court");
    this.transport = new ReplayTransport(10);
    this.bindEvents();
  }

  async start(): Promise<void> {
    await this.refresh();
    this.unsubscribe = this.client.subscribe((version) => {
      if (this.waitingForVersion) {
        this.waitingForVersion = false;
        this.setAdvanceEnabled(true);
      }
      if (!this.state || version !== this.state.version) {
        void this.refresh();
      }
    });
    this.startLoop();
  }

  dispose(): void {
    this.disposed = true;
    if (this.unsubscribe) this.unsubscribe();
    if (this.rafHandle !== null && typeof cancelAnimationFrame === "function") {
      cancelAnimationFrame(this.rafHandle);
    }
  }

  /** Fetch the latest snapshot and rebuild everything derived from it. */
  async refresh(): Promise<void> {
    let state: StateDto;
    try {
      state = await this.client.getState();
    } catch (err) {
      this.showBanner(err);
      return;
    }
    this.hideBanner();
    const durationChanged =
      !this.state || this.state.duration !== state.duration;
    this.state = state;
    if (durationChanged) {
      this.transport = new ReplayTransport(state.duration);
      const scrub = el<HTMLInputElement>(this.root, "#scrub");
      scrub.max = String(state.duration);
    }
    if (this.episode >= state.actuals.length) this.episode = 0;
    this.model = buildViewModel(state, CANVAS_WIDTH, CANVAS_HEIGHT);
    this.renderPanels(state);
    this.paintFrame();
  }

  /** The state snapshot projected for drawing; tests assert on this. */
  get viewModel(): ViewModel | null {
    return this.model;
  }

  private bindEvents(): void {
    el<HTMLButtonElement>(this.root, "#retry").addEventListener("click", () => {
      void this.refresh();
    });
    el<HTMLButtonElement>(this.root, "#advance").addEventListener(
      "click",
      () => {
        void this.advance();
      },
    );
    el<HTMLButtonElement>(this.root, "#reset").addEventListener("click", () => {
      void this.reset();
    });
    el<HTMLButtonElement>(this.root, "#playpause").addEventListener(
      "click",
      () => {
        this.transport.toggle();
        this.updateClock();
      },
    );
    el<HTMLInputElement>(this.root, "#scrub").addEventListener("input", (e) => {
      const value = Number((e.target as HTMLInputElement).value);
      this.transport.scrub(value);
      this.updateClock();
      this.paintFrame();
    });
    el<HTMLSelectElement>(this.root, "#episode").addEventListener(
      "change",
      (e) => {
        this.episode = Number((e.target as HTMLSelectElement).value) || 0;
        this.paintFrame();
      },
    );

    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.canvas.addEventListener("pointerup", (e) => {
      void this.onPointerUp(e);
    });
  }

  private canvasPoint(e: PointerEvent | MouseEvent): [number, number] {
    const rect = this.canvas.getBoundingClientRect();
    return [e.clientX - rect.left, e.clientY - rect.top];
  }

  private onPointerDown(e: PointerEvent | MouseEvent): void {
    const [x, y] = this.canvasPoint(e);
    this.drag = {
      startX: x,
      startY: y,
      currentX: x,
      currentY: y,
      time: this.transport.time,
    };
    this.updateDragReadout();
    this.paintFrame();
  }

  private onPointerMove(e: PointerEvent | MouseEvent): void {
    if (!this.drag) return;
    const [x, y] = this.canvasPoint(e);
    this.drag.currentX = x;
    this.drag.currentY = y;
    this.updateDragReadout();
    this.paintFrame();
  }

  private async onPointerUp(e: PointerEvent | MouseEvent): Promise<void> {
    if (!this.drag || !this.state) {
      this.drag = null;
      return;
    }
    const [x, y] = this.canvasPoint(e);
    const drag = this.drag;
    this.drag = null;
    const force = dragToForce(
      drag.startX,
      drag.startY,
      x,
      y,
      this.state.force_threshold,
    );
    const readout = el<HTMLElement>(this.root, "#drag-readout");
    if (force.magnitude < 0.05) {
      readout.textContent = "drag released without force";
      this.paintFrame();
      return;
    }
    this.lastForce = force;
    try {
      const ack = await this.client.postForce(drag.time, force.fx, force.fy);
      const verdict = ack.clears_threshold
        ? "clears the threshold"
        : "below the threshold";
      readout.textContent =
        `queued ${ack.magnitude.toFixed(1)} N at ` +
        `${drag.time.toFixed(2)} s (${verdict}); ` +
        `${ack.pending} pending`;
      await this.refresh();
    } catch (err) {
      if (err instanceof ServiceRejected) {
        readout.textContent = `rejected: ${err.message}`;
      } else {
        this.showBanner(err);
      }
    }
  }

  private async advance(): Promise<void> {
    const button = el<HTMLButtonElement>(this.root, "#advance");
    this.setAdvanceEnabled(false);
    button.textContent = "running…";
    try {
      await this.client.advance();
      await this.refresh();
      this.setAdvanceEnabled(true);
    } catch (err) {
      if (err instanceof ServiceBusy) {
        // Another client is driving the same session; stay disabled until
        // the event stream reports the new version.
        this.waitingForVersion = true;
        button.textContent = "busy elsewhere…";
      } else {
        this.showBanner(err);
        this.setAdvanceEnabled(true);
      }
    }
  }

  private async reset(): Promise<void> {
    try {
      await this.client.reset();
      await this.refresh();
    } catch (err) {
      this.showBanner(err);
    }
  }

  private setAdvanceEnabled(enabled: boolean): void {
    const button = el<HTMLButtonElement>(this.root, "#advance");
    const exhausted =
      this.state !== null &&
      this.state.iteration >= this.state.iterations_planned;
    button.disabled = !enabled || exhausted;
    button.textContent = exhausted ? "session complete" : "advance iteration";
  }

  private renderPanels(state: StateDto): void {
    el<HTMLElement>(this.root, "#scenario").textContent = state.scenario;
    el<HTMLElement>(this.root, "#status").textContent =
      `iteration ${state.iteration} of ${state.iterations_planned}`;
    el<HTMLElement>(this.root, "#pending").textContent =
      `pending forces: ${state.pending_events}`;

    const episodeSelect = el<HTMLSelectElement>(this.root, "#episode");
    episodeSelect.innerHTML = state.actuals
      .map((_, i) => `<option value="${i}">${i}</option>`)
      .join("");
    episodeSelect.value = String(this.episode);

    const tbody = el<HTMLElement>(this.root, "#metrics tbody");
    tbody.innerHTML = state.metrics
      .map(
        (row) =>
          `<tr data-iteration="${row.iteration}">` +
          `<td>${row.iteration}</td>` +
          `<td>${row.M1.toFixed(3)}</td>` +
          `<td>${row.M2.toFixed(3)}</td>` +
          `<td>${row.track_rms.toFixed(4)}</td></tr>`,
      )
      .join("");

    const vias = el<HTMLElement>(this.root, "#vias");
    vias.innerHTML = state.via_points
      .map(
        (via) =>
          `<li data-t="${via.t.toFixed(2)}" data-iteration="${via.iteration}">` +
          `iteration ${via.iteration} @ ${via.t.toFixed(2)} s</li>`,
      )
      .join("");

    this.setAdvanceEnabled(!this.waitingForVersion);
  }

  private updateDragReadout(): void {
    if (!this.drag || !this.state) return;
    const force = dragToForce(
      this.drag.startX,
      this.drag.startY,
      this.drag.currentX,
      this.drag.currentY,
      this.state.force_threshold,
    );
    el<HTMLElement>(this.root, "#drag-readout").textContent =
      `${dragLabel(force, this.state.force_threshold)} ` +
      `at ${this.drag.time.toFixed(2)} s`;
  }

  private updateClock(): void {
    el<HTMLElement>(this.root, "#clock").textContent =
      `${this.transport.time.toFixed(2)} s`;
    el<HTMLButtonElement>(this.root, "#playpause").textContent = this.transport
      .playing
      ? "pause"
      : "play";
    const scrub = el<HTMLInputElement>(this.root, "#scrub");
    scrub.value = this.transport.time.toFixed(2);
  }

  private overlays(): Overlays {
    const overlays: Overlays = { cursor: null, drag: null };
    if (this.model && this.state) {
      const actual = this.state.actuals[this.episode];
      if (actual) {
        const pos = positionAt(actual, this.transport.time);
        overlays.cursor = worldToScreen(this.model.projection, pos[0], pos[1]);
      }
      if (this.drag) {
        const force = dragToForce(
          this.drag.startX,
          this.drag.startY,
          this.drag.currentX,
          this.drag.currentY,
          this.state.force_threshold,
        );
        overlays.drag = {
          fromX: this.drag.startX,
          fromY: this.drag.startY,
          toX: this.drag.currentX,
          toY: this.drag.currentY,
          label: dragLabel(force, this.state.force_threshold),
          clears: force.clearsThreshold,
        };
      }
    }
    return overlays;
  }

  paintFrame(): void {
    paint(this.canvas, this.model, this.overlays());
  }

  private startLoop(): void {
    if (typeof requestAnimationFrame !== "function") return;
    const step = (nowMs: number) => {
      if (this.disposed) return;
      if (this.lastFrameMs !== null) {
        this.transport.tick((nowMs - this.lastFrameMs) / 1000);
      }
      this.lastFrameMs = nowMs;
      if (this.transport.playing) {
        this.updateClock();
        this.paintFrame();
      }
      this.rafHandle = requestAnimationFrame(step);
    };
    this.rafHandle = requestAnimationFrame(step);
  }

  private showBanner(err: unknown): void {
    const banner = el<HTMLElement>(this.root, "#banner");
    const message = el<HTMLElement>(this.root, "#banner-message");
    banner.hidden = false;
    if (err instanceof ServiceUnreachable) {
      message.textContent =
        "session service unreachable — is `aanrehab serve` running?";
    } else if (err instanceof Error) {
      message.textContent = err.message;
    } else {
      message.textContent = String(err);
    }
  }

  private hideBanner(): void {
    el<HTMLElement>(this.root, "#banner").hidden = true;
  }
}

export function mountConsole(root: HTMLElement, client: ApiClient): ConsoleApp {
  return new ConsoleApp(root, client);
}
